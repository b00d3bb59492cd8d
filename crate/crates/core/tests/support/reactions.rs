use cgst_core::cgst::{AveragingWindow, CgstAccumulator};
use cgst_core::grw::{SplitMode, TransportParams};
use cgst_core::lattice::{BoundarySpec, Boundaries, LatticeSpec, ParticleField, SideRule};
use cgst_core::reactive::{
    react_step, saturated_reactive_step, unsaturated_reactive_step, CoupledStepControl, ReactionSystem,
};
use cgst_core::richards::FlowState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure, max_abs, max_abs_diff, Check};

fn err(e: cgst_core::Error) -> String {
    e.to_string()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn no_flux(field: &ParticleField) -> Result<Boundaries, String> {
    Boundaries::capture(BoundarySpec::uniform(field.lattice.dims(), SideRule::NoFlux), field).map_err(err)
}

fn field_from(lattice: &LatticeSpec, conc: &[Vec<f64>], per_mole: f64) -> ParticleField {
    let mut f = ParticleField::zeros(lattice.clone(), conc.len());
    for (k, c) in conc.iter().enumerate() {
        f.counts[k] = c.iter().map(|v| v * per_mole).collect();
        f.total_initial[k] = f.counts[k].iter().sum();
    }
    f
}

fn pulse(lattice: &LatticeSpec, center: f64, width: f64, height: f64) -> Vec<f64> {
    (0..lattice.len())
        .map(|s| {
            let x = lattice.position(s)[0] - center;
            height * (-(x * x) / (2.0 * width * width)).exp()
        })
        .collect()
}

/// Worst relative change of `c1 + c2` at any site over one bimolecular step
/// with random state drawn from `seed`.
pub fn bimolecular_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 50;
    let mut conc = vec![
        (0..n).map(|_| r.random_range(0.0..2.0)).collect::<Vec<f64>>(),
        (0..n).map(|_| r.random_range(0.0..2.0)).collect::<Vec<f64>>(),
    ];
    let before: Vec<f64> = (0..n).map(|s| conc[0][s] + conc[1][s]).collect();
    let system = ReactionSystem::Bimolecular {
        k_r: r.random_range(0.0..100.0),
    };
    react_step(&mut conc, None, &system, r.random_range(0.0..0.1));
    (0..n)
        .map(|s| ((conc[0][s] + conc[1][s]) - before[s]).abs() / before[s].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn bimolecular_conservation() -> Check {
    let worst = (0..200).map(bimolecular_case).fold(0.0, f64::max);
    ensure(worst <= 4.0 * f64::EPSILON, || format!("relative change of c1 + c2 is {worst:e}"))?;
    Ok(format!("200 random states, c1 + c2 changes by at most {worst:.1e}"))
}

/// Monod rates are non-positive and consume the species in the ratio of
/// their yield coefficients.
pub fn monod_sign_and_ratio() -> Check {
    let (alpha1, alpha2) = (5.0, 0.5);
    let system = ReactionSystem::Monod {
        alpha1,
        alpha2,
        m1: 0.1,
        m2: 0.1,
    };
    let mut r = rng(21);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (c1, c2, theta) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.1..1.0));
        let (r1, r2) = system.rates(c1, c2, theta);
        ensure(r1 <= 0.0 && r2 <= 0.0, || format!("positive rate ({r1}, {r2}) at ({c1}, {c2})"))?;
        if r2 != 0.0 {
            worst = worst.max((r1 / r2 - alpha1 / alpha2).abs() / (alpha1 / alpha2));
        }
        // Applied changes carry the rounding of c + dt R.
        let mut conc = vec![vec![c1 + 0.5], vec![c2 + 0.5]];
        let out = react_step(&mut conc, Some(&[theta]), &system, 1e-3);
        ensure(out.clipped == 0.0, || "unexpected clipping".into())?;
        if out.delta[1][0] != 0.0 {
            let ratio = out.delta[0][0] / out.delta[1][0];
            let rel = (ratio - alpha1 / alpha2).abs() / (alpha1 / alpha2);
            let bound = 4.0 * f64::EPSILON * 2.0 / out.delta[1][0].abs();
            ensure(rel <= bound, || format!("applied ratio off by {rel:e} (rounding bound {bound:e})"))?;
        }
    }
    ensure(worst <= 4.0 * f64::EPSILON, || format!("rate ratio off by {worst:e}"))?;
    // Hand-computed step: mu = (0.1/0.2)^2 = 0.25.
    let mut conc = vec![vec![0.1], vec![0.1]];
    react_step(&mut conc, Some(&[1.0]), &system, 0.01);
    ensure(
        (conc[0][0] - 0.0875).abs() <= 1e-15 && (conc[1][0] - 0.09875).abs() <= 1e-15,
        || format!("hand step gave ({}, {})", conc[0][0], conc[1][0]),
    )?;
    Ok(format!("1000 states, ratio off by {worst:.1e}"))
}

/// Under the bimolecular system c1 + c2 moves like a single passive species.
pub fn bimolecular_sum_is_passive() -> Check {
    let lattice = LatticeSpec::line(0.0, 1.0, 0.01).unwrap();
    let per_mole = 1e6;
    let c1 = pulse(&lattice, 0.4, 0.05, 1.0);
    let c2: Vec<f64> = (0..lattice.len()).map(|s| 0.5 + 0.5 * lattice.position(s)[0]).collect();
    let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
    let mut pair = field_from(&lattice, &[c1, c2], per_mole);
    let mut passive = field_from(&lattice, &[sum], per_mole);
    let p = TransportParams::uniform(&lattice, [1.0, 0.0], [0.01, 0.0], 2.5e-3, 1);
    let system = ReactionSystem::Bimolecular { k_r: 10.0 };
    let (bc_pair, bc_passive) = (no_flux(&pair)?, no_flux(&passive)?);
    let mut r = rng(22);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        pair = saturated_reactive_step(&pair, &p, &system, &bc_pair, per_mole, SplitMode::Deterministic, &mut r)
            .map_err(err)?
            .field;
        passive = saturated_reactive_step(
            &passive,
            &p,
            &ReactionSystem::None,
            &bc_passive,
            per_mole,
            SplitMode::Deterministic,
            &mut r,
        )
        .map_err(err)?
        .field;
        let total: Vec<f64> = pair.counts[0].iter().zip(&pair.counts[1]).map(|(a, b)| a + b).collect();
        worst = worst.max(max_abs_diff(&total, &passive.counts[0]) / max_abs(&passive.counts[0]));
    }
    ensure(worst <= 1e-12, || format!("relative deviation {worst:e}"))?;
    Ok(format!("200 steps, c1 + c2 within {worst:.1e} of the passive run"))
}

/// With uniform water content, flux u theta and no reactions, the unsaturated
/// step equals the saturated step with diffusion D / theta.
pub fn saturated_reduction() -> Check {
    let lattice = LatticeSpec::line(0.0, 1.0, 1.0 / 16.0).unwrap();
    let n = lattice.len();
    let (theta, u, d, dt) = (0.4, 0.5, 0.01, 0.05);
    let per_mole = 1e6;
    let flow = FlowState {
        time: 0.0,
        psi: vec![0.0; n],
        theta: vec![theta; n],
        flux: vec![vec![u * theta; n]],
    };
    let thetas = vec![theta; n];
    let control = CoupledStepControl {
        l: 1.0,
        rel_tol: 1e-15,
        abs_tol: 0.0,
        max_iterations: 100_000,
    };
    let init = vec![pulse(&lattice, 0.35, 0.1, 1.0), pulse(&lattice, 0.6, 0.15, 0.3)];
    let mut sat = field_from(&lattice, &init, per_mole);
    let bc_sat = no_flux(&sat)?;
    let p = TransportParams::uniform(&lattice, [u, 0.0], [d / theta, 0.0], dt, 1);
    let mut conc = init;
    let bc_unsat = no_flux(&field_from(&lattice, &conc, per_mole))?;
    let mut r = rng(23);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        sat = saturated_reactive_step(&sat, &p, &ReactionSystem::None, &bc_sat, per_mole, SplitMode::Deterministic, &mut r)
            .map_err(err)?
            .field;
        let step = unsaturated_reactive_step(
            &conc,
            &thetas,
            &flow,
            &lattice,
            d,
            &ReactionSystem::None,
            dt,
            &control,
            &bc_unsat,
            per_mole,
            SplitMode::Deterministic,
            &mut r,
        )
        .map_err(err)?;
        ensure(step.raised_faces == 0, || "Peclet fallback triggered".into())?;
        conc = cgst_core::reactive::concentrations(&step.field, Some(&thetas), per_mole);
        for k in 0..2 {
            let c_sat: Vec<f64> = sat.counts[k].iter().map(|v| v / per_mole).collect();
            worst = worst.max(max_abs_diff(&c_sat, &conc[k]) / max_abs(&c_sat));
        }
    }
    ensure(worst <= 1e-10, || format!("relative deviation {worst:e}"))?;
    Ok(format!("17 sites, 50 steps, relative deviation {worst:.1e}"))
}

fn monod_run(steps: usize) -> Result<Vec<f64>, String> {
    let lattice = LatticeSpec::line(0.0, 1.0, 0.01).unwrap();
    let per_mole = 1e6;
    let dt = 0.2 / steps as f64;
    let c2 = vec![0.1; lattice.len()];
    let mut f = field_from(&lattice, &[pulse(&lattice, 0.3, 0.05, 1.0), c2], per_mole);
    let bc = no_flux(&f)?;
    let p = TransportParams::uniform(&lattice, [0.5, 0.0], [0.01, 0.0], dt, 1);
    let system = ReactionSystem::monod_default();
    let mut r = rng(24);
    for _ in 0..steps {
        let step = saturated_reactive_step(&f, &p, &system, &bc, per_mole, SplitMode::Deterministic, &mut r)
            .map_err(err)?;
        if step.clipped > 0.0 {
            return Err(format!("clipping at {steps} steps"));
        }
        f = step.field;
    }
    Ok(f.counts[0].iter().map(|v| v / per_mole).collect())
}

/// The split transport/reaction step converges at first order in dt.
pub fn splitting_order() -> Check {
    let reference = monod_run(50 * 64)?;
    let scale = max_abs(&reference);
    let errors: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&s| monod_run(s).map(|c| max_abs_diff(&c, &reference) / scale))
        .collect::<Result<_, _>>()?;
    let slopes = [(errors[0] / errors[1]).log2(), (errors[1] / errors[2]).log2()];
    for s in slopes {
        ensure((s - 1.0).abs() <= 0.2, || format!("observed order {s:.3} (errors {errors:?})"))?;
    }
    Ok(format!("errors {:.2e}, {:.2e}, {:.2e}; orders {:.3}, {:.3}", errors[0], errors[1], errors[2], slopes[0], slopes[1]))
}

/// Reaction sums collected by the accumulator match a direct sum of the
/// per-step changes over the sites inside the open window.
pub fn reaction_bookkeeping() -> Check {
    let lattice = LatticeSpec::line(0.0, 1.0, 0.01).unwrap();
    let per_mole = 1e6;
    let dt = 2.5e-3;
    let c2: Vec<f64> = (0..lattice.len()).map(|s| 0.3 + lattice.position(s)[0]).collect();
    let mut f = field_from(&lattice, &[pulse(&lattice, 0.45, 0.05, 1.0), c2], per_mole);
    let bc = no_flux(&f)?;
    let p = TransportParams::uniform(&lattice, [1.0, 0.0], [0.01, 0.0], dt, 1);
    let system = ReactionSystem::Bimolecular { k_r: 10.0 };
    let (center, a, t, tau) = (0.5, 0.1, 0.05, 0.025);
    let window = AveragingWindow::new(&lattice, &[center], a, t, tau).map_err(err)?;
    let volume = window.volume();
    let mut acc = CgstAccumulator::new(window, 2);
    let mut direct = [0.0; 2];
    let mut r = rng(25);
    for k in 0..40 {
        let time = k as f64 * dt;
        let mut step = saturated_reactive_step(&f, &p, &system, &bc, per_mole, SplitMode::Deterministic, &mut r)
            .map_err(err)?;
        step.record.time = time;
        step.record.dt = dt;
        if acc.window.covers(time, dt) {
            acc.accumulate(&lattice, &step.record, &step.field).map_err(err)?;
            acc.accumulate_reaction(time, dt, &step.reaction).map_err(err)?;
            for (s_pos, sp) in (0..lattice.len()).map(|s| (lattice.position(s)[0], s)) {
                if (s_pos - center).abs() < a - 1e-9 {
                    for (kk, d) in direct.iter_mut().enumerate() {
                        *d += step.reaction[kk][sp];
                    }
                }
            }
        }
        f = step.field;
    }
    ensure(acc.steps == 20, || format!("window covered {} steps", acc.steps))?;
    let sample = acc.finalize(per_mole);
    let norm = 1.0 / (2.0 * tau * volume);
    let mut worst = 0.0f64;
    for k in 0..2 {
        let got = sample.species[k].generated;
        let want = direct[k] * norm;
        ensure(want != 0.0, || "no reaction inside the window".into())?;
        worst = worst.max((got - want).abs() / want.abs());
    }
    ensure(worst <= 1e-12, || format!("relative mismatch {worst:e}"))?;
    Ok(format!("20 steps inside the window, relative mismatch {worst:.1e}"))
}
