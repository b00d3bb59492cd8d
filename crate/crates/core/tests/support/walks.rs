use cgst_core::grw::{bgrw_step, transport_step, Algorithm, SplitMode, TransportParams};
use cgst_core::lattice::{
    apply_boundaries, mirror_sides, total_mass, BoundarySpec, Boundaries, LatticeSpec, ParticleField, SideRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure, Check};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn line(n: usize) -> LatticeSpec {
    LatticeSpec::line(0.0, (n - 1) as f64, 1.0).unwrap()
}

fn random_field(lattice: &LatticeSpec, scale: f64, integer: bool, r: &mut ChaCha8Rng) -> ParticleField {
    let mut f = ParticleField::zeros(lattice.clone(), 1);
    for v in f.counts[0].iter_mut() {
        let x = scale * r.random::<f64>();
        *v = if integer { x.floor() } else { x };
    }
    f.total_initial[0] = total_mass(&f, 0);
    f
}

fn no_flux(field: &ParticleField) -> Boundaries {
    Boundaries::capture(BoundarySpec::uniform(field.lattice.dims(), SideRule::NoFlux), field).unwrap()
}

/// Parameters with diffusive fraction `r` per axis and bias `c` along the first axis (dx = dt = 1).
fn params(lattice: &LatticeSpec, r: f64, c: f64) -> TransportParams {
    let d = lattice.dims() as f64;
    TransportParams::uniform(lattice, [c, 0.0], [r / (2.0 * d), r / (2.0 * d)], 1.0, 1)
}

/// Every site's outgoing parts add up to its pre-step count.
pub fn splitting_conservation() -> Check {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for case in 0..200 {
        let lattice = if case % 2 == 0 {
            line(8 + case % 17)
        } else {
            LatticeSpec::rect([0.0, 0.0], [5.0, 4.0], [1.0, 1.0]).unwrap()
        };
        let stochastic = case % 3 == 0;
        let field = random_field(&lattice, if stochastic { 1e9 } else { 1e20 }, stochastic, &mut r);
        let alg = if case % 4 < 2 { Algorithm::Bgrw } else { Algorithm::Grw };
        let rr = r.random_range(0.05..1.0);
        let per_axis = rr / lattice.dims() as f64;
        let c = if alg == Algorithm::Bgrw { r.random_range(-per_axis..per_axis) } else { 0.0 };
        let p = params(&lattice, rr, c);
        let mode = if stochastic { SplitMode::Stochastic } else { SplitMode::Deterministic };
        let (_, record) = transport_step(alg, &field, &p, &no_flux(&field), mode, &mut r).map_err(|e| e.to_string())?;
        for (s, j) in record.sites[0].iter().enumerate() {
            let err = (j.total() - j.source).abs();
            if stochastic {
                ensure(err == 0.0, || format!("case {case}: site {s} parts {} vs {}", j.total(), j.source))?;
            } else {
                worst = worst.max(err / j.source.max(f64::MIN_POSITIVE));
            }
        }
        cases += 1;
    }
    ensure(worst <= 4.0 * f64::EPSILON, || format!("relative split residue {worst:e}"))?;
    Ok(format!("{cases} steps, deterministic residue {worst:.1e}, stochastic exact"))
}

/// Walk steps conserve particles. The no-flux mirror that follows a step
/// overwrites edge sites and is excluded from the balance.
pub fn walk_conserves_mass() -> Check {
    let mut r = rng(12);
    let mut report = Vec::new();
    for (lattice, alg) in [
        (line(64), Algorithm::Bgrw),
        (line(64), Algorithm::Grw),
        (LatticeSpec::rect([0.0, 0.0], [11.0, 9.0], [1.0, 1.0]).unwrap(), Algorithm::Bgrw),
    ] {
        for mode in [SplitMode::Deterministic, SplitMode::Stochastic] {
            let integer = mode == SplitMode::Stochastic;
            let mut field = random_field(&lattice, if integer { 1e9 } else { 1e20 }, integer, &mut r);
            let spec = BoundarySpec::uniform(lattice.dims(), SideRule::NoFlux);
            let bc = no_flux(&field);
            let p = params(&lattice, 0.9, 0.0);
            let m0 = total_mass(&field, 0);
            let mut drift = 0.0f64;
            for step in 0..1000 {
                let (mut next, _) = transport_step(alg, &field, &p, &bc, mode, &mut r).map_err(|e| e.to_string())?;
                let d = total_mass(&next, 0) - total_mass(&field, 0);
                if integer {
                    ensure(d == 0.0, || format!("{alg:?} stochastic step {step} changed the count by {d}"))?;
                }
                drift += d.abs();
                mirror_sides(&mut next.counts[0], &lattice, &spec);
                field = next;
            }
            ensure(drift <= 1e-12 * m0, || format!("{alg:?} {mode:?}: cumulative drift {:e}", drift / m0))?;
        }
        report.push(format!("{alg:?} {}D", lattice.dims()));
    }
    // With the field kept away from the edges, advection conserves mass too.
    let lattice = line(64);
    let mut field = ParticleField::zeros(lattice.clone(), 1);
    for s in 24..40 {
        field.counts[0][s] = 1e20 * (1.0 + s as f64);
    }
    let bc = no_flux(&field);
    let p = params(&lattice, 0.8, 0.5);
    let m0 = total_mass(&field, 0);
    for _ in 0..20 {
        field = bgrw_step(&field, &p, &bc, SplitMode::Deterministic, &mut r).map_err(|e| e.to_string())?.0;
    }
    let rel = (total_mass(&field, 0) - m0).abs() / m0;
    ensure(rel <= 1e-12, || format!("advected pulse drift {rel:e}"))?;
    Ok(format!("1000 steps each for {}; advected pulse drift {rel:.1e}", report.join(", ")))
}

pub fn counts_stay_non_negative() -> Check {
    let mut r = rng(13);
    for case in 0..60 {
        let lattice = line(32);
        let stochastic = case % 2 == 1;
        let mut field = random_field(&lattice, 1e6, stochastic, &mut r);
        let spec = BoundarySpec {
            sides: vec![[SideRule::DirichletReset { width: 2 }, SideRule::NoFlux]],
            reset_regions: Vec::new(),
        };
        let bc = Boundaries::capture(spec, &field).map_err(|e| e.to_string())?;
        let rr = r.random_range(0.1..1.0);
        let alg = if case % 4 < 2 { Algorithm::Bgrw } else { Algorithm::Grw };
        let c = if alg == Algorithm::Bgrw { r.random_range(-rr..rr) } else { 0.0 };
        let p = params(&lattice, rr, c);
        let mode = if stochastic { SplitMode::Stochastic } else { SplitMode::Deterministic };
        for step in 0..100 {
            field = transport_step(alg, &field, &p, &bc, mode, &mut r).map_err(|e| e.to_string())?.0;
            apply_boundaries(&mut field, &bc);
            if let Some(v) = field.counts[0].iter().find(|v| **v < 0.0) {
                return Err(format!("case {case} step {step}: count {v}"));
            }
        }
    }
    Ok("60 runs of 100 steps".into())
}

/// Deterministic BGRW against the explicit scheme
/// `c_l <- (1 - r) c_l + (r - c)/2 c_{l+1} + (r + c)/2 c_{l-1}`
/// with zero-gradient ghosts and the no-flux mirror.
pub fn fd_oracle() -> Check {
    let n = 64;
    let (rr, c) = (0.8, 0.3);
    let lattice = line(n);
    let mut r = rng(14);
    let mut field = random_field(&lattice, 1e20, false, &mut r);
    let mut fd = field.counts[0].clone();
    let spec = BoundarySpec::uniform(1, SideRule::NoFlux);
    let bc = no_flux(&field);
    let p = params(&lattice, rr, c);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (mut next, _) = bgrw_step(&field, &p, &bc, SplitMode::Deterministic, &mut r).map_err(|e| e.to_string())?;
        mirror_sides(&mut next.counts[0], &lattice, &spec);
        field = next;

        let get = |l: isize| fd[l.clamp(0, n as isize - 1) as usize];
        let mut new = vec![0.0; n];
        for (l, v) in new.iter_mut().enumerate() {
            let l = l as isize;
            *v = (1.0 - rr) * get(l) + 0.5 * (rr - c) * get(l + 1) + 0.5 * (rr + c) * get(l - 1);
        }
        new[0] = new[1];
        new[n - 1] = new[n - 2];
        fd = new;
        let scale = super::max_abs(&fd);
        worst = worst.max(super::max_abs_diff(&field.counts[0], &fd) / scale);
    }
    ensure(worst <= 1e-12, || format!("max relative deviation {worst:e}"))?;
    Ok(format!("64 sites, 1000 steps, max relative deviation {worst:.1e}"))
}

/// The mean of 200 stochastic steps lies within three standard errors of the
/// deterministic step at every site.
pub fn stochastic_consistency() -> Check {
    let lattice = line(20);
    let mut r = rng(15);
    let field = random_field(&lattice, 1e4, true, &mut r);
    let bc = no_flux(&field);
    let p = params(&lattice, 0.7, 0.2);
    let det = bgrw_step(&field, &p, &bc, SplitMode::Deterministic, &mut r).map_err(|e| e.to_string())?.0;
    let seeds = 200;
    let mut sum = vec![0.0; lattice.len()];
    let mut sq = vec![0.0; lattice.len()];
    for seed in 0..seeds {
        let out = bgrw_step(&field, &p, &bc, SplitMode::Stochastic, &mut rng(1000 + seed))
            .map_err(|e| e.to_string())?
            .0;
        for (s, v) in out.counts[0].iter().enumerate() {
            sum[s] += v;
            sq[s] += v * v;
        }
    }
    let n = seeds as f64;
    let mut worst = 0.0f64;
    for s in 0..lattice.len() {
        let mean = sum[s] / n;
        let var = ((sq[s] - n * mean * mean) / (n - 1.0)).max(0.0);
        let se = (var / n).sqrt();
        let dev = (mean - det.counts[0][s]).abs();
        if se == 0.0 {
            ensure(dev <= 1e-9 * det.counts[0][s].abs(), || format!("site {s}: zero spread but off by {dev}"))?;
        } else {
            worst = worst.max(dev / se);
        }
    }
    ensure(worst <= 3.0, || format!("deviation of {worst:.2} standard errors"))?;
    Ok(format!("200 seeds, largest deviation {worst:.2} standard errors"))
}

/// With 1e10 particles per site one stochastic realization stays within
/// 1e-4 (relative l2) of the deterministic field.
pub fn self_averaging() -> Check {
    let lattice = line(64);
    let mut field = ParticleField::zeros(lattice.clone(), 1);
    for (s, v) in field.counts[0].iter_mut().enumerate() {
        *v = (1e10 * (1.0 + 0.5 * (s as f64 / 8.0).sin())).floor();
    }
    let bc = no_flux(&field);
    let spec = BoundarySpec::uniform(1, SideRule::NoFlux);
    let p = params(&lattice, 0.8, 0.2);
    let (mut det, mut sto) = (field.clone(), field);
    let mut r = rng(16);
    for _ in 0..100 {
        det = bgrw_step(&det, &p, &bc, SplitMode::Deterministic, &mut r).map_err(|e| e.to_string())?.0;
        sto = bgrw_step(&sto, &p, &bc, SplitMode::Stochastic, &mut r).map_err(|e| e.to_string())?.0;
        mirror_sides(&mut det.counts[0], &lattice, &spec);
        mirror_sides(&mut sto.counts[0], &lattice, &spec);
    }
    let norm = det.counts[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = det.counts[0]
        .iter()
        .zip(&sto.counts[0])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel = diff / norm;
    ensure(rel < 1e-4, || format!("relative l2 difference {rel:e}"))?;
    Ok(format!("relative l2 difference {rel:.1e} after 100 steps"))
}
