use cgst_core::cgst::{
    balance_residual, volume_average, Averages, AveragingWindow, BalanceGrid, CgstAccumulator, UpscaledSample,
};
use cgst_core::grw::{transport_step, Algorithm, JumpRecord, SplitMode, TransportParams};
use cgst_core::lattice::{
    mirror_sides, total_mass, BoundarySpec, Boundaries, LatticeSpec, ParticleField, SideRule,
};
use cgst_core::reactive::{saturated_reactive_step, ReactionSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure, Check};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn err(e: cgst_core::Error) -> String {
    e.to_string()
}

/// Deterministic history: records of each step and the counts after it.
pub struct History {
    pub lattice: LatticeSpec,
    pub records: Vec<JumpRecord>,
    pub after: Vec<ParticleField>,
}

/// Run `steps` steps from `field` with no-flux sides, stamping each record with its start time.
pub fn history(
    field: ParticleField,
    params: &TransportParams,
    algorithm: Algorithm,
    steps: usize,
    seed: u64,
) -> Result<History, String> {
    let lattice = field.lattice.clone();
    let spec = BoundarySpec::uniform(lattice.dims(), SideRule::NoFlux);
    let bc = Boundaries::capture(spec.clone(), &field).map_err(err)?;
    let mut r = rng(seed);
    let mut h = History {
        lattice: lattice.clone(),
        records: Vec::with_capacity(steps),
        after: Vec::with_capacity(steps),
    };
    let mut current = field;
    for k in 0..steps {
        let (mut next, mut record) =
            transport_step(algorithm, &current, params, &bc, SplitMode::Deterministic, &mut r).map_err(err)?;
        for c in next.counts.iter_mut() {
            mirror_sides(c, &lattice, &spec);
        }
        record.time = k as f64 * params.dt;
        record.dt = params.dt;
        h.records.push(record);
        h.after.push(next.clone());
        current = next;
    }
    Ok(h)
}

/// Feed every step lying inside the window to a fresh accumulator.
pub fn accumulate(h: &History, window: &AveragingWindow, range: std::ops::Range<usize>) -> Result<CgstAccumulator, String> {
    let mut acc = CgstAccumulator::new(window.clone(), h.after[0].species());
    for k in range {
        let rec = &h.records[k];
        if window.covers(rec.time, rec.dt) {
            acc.accumulate(&h.lattice, rec, &h.after[k]).map_err(err)?;
        }
    }
    Ok(acc)
}

fn random_field(lattice: &LatticeSpec, r: &mut ChaCha8Rng) -> ParticleField {
    let mut f = ParticleField::zeros(lattice.clone(), 1);
    for v in f.counts[0].iter_mut() {
        *v = 1e20 * (0.1 + r.random::<f64>());
    }
    f.total_initial[0] = total_mass(&f, 0);
    f
}

/// CGST `<1>` equals the midpoint-rule space-time average of the counts
/// over the window, computed here from the stored history.
pub fn field_average_equivalence() -> Check {
    let mut r = rng(21);
    let mut worst = 0.0f64;
    let cases: [(LatticeSpec, Algorithm, [f64; 2]); 3] = [
        (LatticeSpec::line(0.0, 40.0, 1.0).unwrap(), Algorithm::Bgrw, [20.0, 0.0]),
        (LatticeSpec::line(0.0, 40.0, 1.0).unwrap(), Algorithm::Grw, [20.0, 0.0]),
        (LatticeSpec::rect([0.0, 0.0], [14.0, 14.0], [1.0, 1.0]).unwrap(), Algorithm::Bgrw, [7.0, 7.0]),
    ];
    for (lattice, alg, center) in cases {
        let dims = lattice.dims();
        let field = random_field(&lattice, &mut r);
        let params = TransportParams::uniform(&lattice, [0.3, 0.0], [0.4 / dims as f64, 0.4 / dims as f64], 1.0, 1);
        let h = history(field, &params, alg, 45, 3)?;
        let (a, t, tau) = (5.0, 30.0, 10.0);
        let window = AveragingWindow::new(&lattice, &center[..dims], a, t, tau).map_err(err)?;
        let one = accumulate(&h, &window, 0..45)?.finalize(1.0).species[0].one;

        let mut sum = 0.0;
        for (k, after) in h.after.iter().enumerate() {
            let start = k as f64;
            if start < t - tau || start + 1.0 > t + tau {
                continue;
            }
            for s in 0..lattice.len() {
                let x = lattice.position(s);
                if (0..dims).all(|d| (x[d] - center[d]).abs() < a) {
                    sum += after.counts[0][s];
                }
            }
        }
        let expected = sum / (2.0 * tau * (2.0 * a).powi(dims as i32));
        worst = worst.max((one - expected).abs() / expected);
    }
    ensure(worst <= 1e-12, || format!("relative deviation {worst:e}"))?;
    Ok(format!("BGRW/GRW in 1D and BGRW in 2D, max relative deviation {worst:.1e}"))
}

/// Dyadic setup (r = 1, u = 0, dt = dx = 1, integer counts) in which every
/// sum is exact, so merged partial accumulators match bit for bit.
pub fn merge_partition(cut1: usize, cut2: usize, seed: u64) -> Result<(), String> {
    // Sums stay below 2^53 in units of 2^-steps.
    let steps = 16;
    let lattice = LatticeSpec::line(0.0, 15.0, 1.0).unwrap();
    let mut r = rng(seed);
    let mut field = ParticleField::zeros(lattice.clone(), 1);
    for v in field.counts[0].iter_mut() {
        *v = r.random_range(0..1024) as f64;
    }
    let params = TransportParams::uniform(&lattice, [0.0, 0.0], [0.5, 0.0], 1.0, 1);
    let h = history(field, &params, Algorithm::Bgrw, steps, seed)?;
    let window = AveragingWindow::new(&lattice, &[8.0], 4.0, 8.0, 8.0).map_err(err)?;
    let (c1, c2) = (cut1.min(cut2).min(steps), cut1.max(cut2).min(steps));
    let whole = accumulate(&h, &window, 0..steps)?;
    let a = accumulate(&h, &window, 0..c1)?;
    let b = accumulate(&h, &window, c1..c2)?;
    let c = accumulate(&h, &window, c2..steps)?;
    let orders: [[&CgstAccumulator; 3]; 3] = [[&a, &b, &c], [&c, &a, &b], [&b, &c, &a]];
    for order in orders {
        let mut m = order[0].clone();
        m.merge(order[1]);
        m.merge(order[2]);
        ensure(m.sums == whole.sums, || format!("cuts ({c1}, {c2}): merged sums differ"))?;
    }
    let mut right = b.clone();
    right.merge(&c);
    let mut nested = a.clone();
    nested.merge(&right);
    ensure(nested.sums == whole.sums, || format!("cuts ({c1}, {c2}): nested merge differs"))?;
    Ok(())
}

pub fn merge_associativity() -> Check {
    for (i, (c1, c2)) in [(0, 16), (5, 11), (1, 15), (8, 8), (3, 4)].into_iter().enumerate() {
        merge_partition(c1, c2, i as u64)?;
    }
    Ok("five partitions, three merge orders each, exact".into())
}

/// A site exactly `a` away from the center is outside the window.
pub fn window_openness() -> Check {
    let lattice = LatticeSpec::line(0.0, 1.0, 0.1).unwrap();
    let window = AveragingWindow::new(&lattice, &[0.5], 0.3, 0.5, 0.5).map_err(err)?;
    ensure(window.sites == vec![3, 4, 5, 6, 7], || format!("sites {:?}", window.sites))?;
    let mut field = ParticleField::zeros(lattice.clone(), 1);
    field.counts[0][2] = 1e20;
    field.counts[0][8] = 1e20;
    field.total_initial[0] = 2e20;
    let params = TransportParams::uniform(&lattice, [0.0, 0.0], [0.0, 0.0], 0.1, 1);
    let h = history(field, &params, Algorithm::Grw, 1, 0)?;
    let one = accumulate(&h, &window, 0..1)?.sums[0].one;
    ensure(one == 0.0, || format!("boundary sites contributed {one}"))?;

    let plane = LatticeSpec::rect([0.0, 0.0], [1.0, 1.0], [0.1, 0.1]).unwrap();
    let w2 = AveragingWindow::new(&plane, &[0.5, 0.5], 0.3, 0.5, 0.5).map_err(err)?;
    ensure(w2.sites.len() == 25, || format!("2D window holds {} sites", w2.sites.len()))?;
    Ok("sites at distance a excluded in 1D and 2D".into())
}

/// For a stationary field the CGST average does not depend on tau and equals
/// the volume average.
pub fn stationarity_collapse() -> Check {
    let lattice = LatticeSpec::line(0.0, 30.0, 1.0).unwrap();
    let mut field = ParticleField::zeros(lattice.clone(), 1);
    field.counts[0].iter_mut().for_each(|v| *v = 3e21);
    field.total_initial[0] = total_mass(&field, 0);
    let params = TransportParams::uniform(&lattice, [0.0, 0.0], [0.45, 0.0], 1.0, 1);
    let h = history(field.clone(), &params, Algorithm::Bgrw, 30, 0)?;
    let mut values = Vec::new();
    for tau in [1.0, 4.0, 10.0] {
        let w = AveragingWindow::new(&lattice, &[15.0], 3.0, 15.0, tau).map_err(err)?;
        let cg = accumulate(&h, &w, 0..30)?.finalize(1.0).species[0].one;
        let vol = volume_average(&field, &w, 1.0)[0];
        ensure((cg - vol).abs() <= 1e-12 * vol, || format!("tau {tau}: cgst {cg} vs volume {vol}"))?;
        values.push(cg);
    }
    let spread = values.iter().fold(0.0f64, |m, v| m.max((v - values[0]).abs())) / values[0];
    ensure(spread <= 1e-12, || format!("tau dependence {spread:e}"))?;
    Ok(format!("three tau values, spread {spread:.1e}"))
}

pub fn zero_conventions() -> Check {
    let a = Averages::default();
    ensure(a.velocity() == [0.0; 2] && a.diffusion() == [[0.0; 2]; 2], || "nonzero coefficients for <1> = 0".into())?;
    let lattice = LatticeSpec::line(0.0, 10.0, 1.0).unwrap();
    let field = ParticleField::zeros(lattice.clone(), 1);
    let params = TransportParams::uniform(&lattice, [0.2, 0.0], [0.4, 0.0], 1.0, 1);
    let h = history(field, &params, Algorithm::Bgrw, 4, 0)?;
    let w = AveragingWindow::new(&lattice, &[5.0], 2.0, 2.0, 2.0).map_err(err)?;
    let s = accumulate(&h, &w, 0..4)?.finalize(1.0).species[0];
    ensure(s.one == 0.0 && s.velocity() == [0.0; 2] && s.diffusion() == [[0.0; 2]; 2], || {
        format!("empty field gave {s:?}")
    })?;
    Ok("<1> = 0 gives u = 0 and D = 0".into())
}

/// CGST samples on a regular grid of centers and times.
fn grid(h: &History, centers: &[f64], times: &[f64], a: f64, tau: f64) -> Result<Vec<Vec<UpscaledSample>>, String> {
    let steps = h.records.len();
    times
        .iter()
        .map(|&t| {
            centers
                .iter()
                .map(|&x| {
                    let w = AveragingWindow::new(&h.lattice, &[x], a, t, tau).map_err(err)?;
                    Ok(accumulate(h, &w, 0..steps)?.finalize(1.0))
                })
                .collect()
        })
        .collect()
}

pub fn stationary_balance() -> Check {
    let lattice = LatticeSpec::line(0.0, 40.0, 1.0).unwrap();
    let mut field = ParticleField::zeros(lattice.clone(), 1);
    field.counts[0].iter_mut().for_each(|v| *v = 1e20);
    field.total_initial[0] = total_mass(&field, 0);
    let m0 = field.total_initial[0];
    let params = TransportParams::uniform(&lattice, [0.0, 0.0], [0.5, 0.0], 1.0, 1);
    let h = history(field, &params, Algorithm::Bgrw, 40, 0)?;
    let centers = [12.0, 16.0, 20.0, 24.0, 28.0];
    let times = [10.0, 14.0, 18.0, 22.0, 26.0];
    let a = 4.0;
    let samples = grid(&h, &centers, &times, a, 4.0)?;
    let res = balance_residual(&BalanceGrid::from_samples(centers.to_vec(), times.to_vec(), &samples, 0)).map_err(err)?;
    let bound = 1e-10 * m0 / (2.0 * a);
    ensure(res <= bound, || format!("residual {res:e} above {bound:e}"))?;
    Ok(format!("residual {res:.1e} (bound {bound:.1e})"))
}

/// Continuity residual of an advected broad pulse relative to max |d_t <1>|,
/// on a lattice of spacing `dx`, with centers `spacing` apart and half window `tau`.
///
/// With u dt = dx and r = 1 every particle moves one site per step, so the
/// pulse is translated without spreading.
fn advective_residual(dx: f64, spacing: f64, tau: f64) -> Result<f64, String> {
    let lattice = LatticeSpec::line(0.0, 1.0, dx).unwrap();
    let dt = dx;
    let mut field = ParticleField::zeros(lattice.clone(), 1);
    for s in 0..lattice.len() {
        let x = lattice.position(s)[0];
        field.counts[0][s] = 1e20 * (-(x - 0.3f64).powi(2) / (2.0 * 0.1f64.powi(2))).exp();
    }
    field.total_initial[0] = total_mass(&field, 0);
    let params = TransportParams::uniform(&lattice, [1.0, 0.0], [0.5 * dx, 0.0], dt, 1);
    let tau_steps = (tau / dt).round() as usize;
    let start = (0.16 / dt).round();
    let h = history(field, &params, Algorithm::Bgrw, start as usize + 9 * tau_steps, 0)?;
    let tau = tau_steps as f64 * dt;
    let centers: Vec<f64> = (0..13).map(|j| 0.5 + spacing * (j as f64 - 6.0)).collect();
    let times: Vec<f64> = (0..9).map(|m| start * dt + m as f64 * tau).collect();
    let samples = grid(&h, &centers, &times, 0.025, tau)?;
    let g = BalanceGrid::from_samples(centers.clone(), times.clone(), &samples, 0);
    let res = balance_residual(&g).map_err(err)?;
    let mut dt_max = 0.0f64;
    for m in 1..times.len() - 1 {
        for j in 1..centers.len() - 1 {
            let d = (g.one[m + 1][j] - g.one[m - 1][j]) / (times[m + 1] - times[m - 1]);
            dt_max = dt_max.max(d.abs());
        }
    }
    Ok(res / dt_max)
}

/// Pure advection of a broad pulse: the continuity residual is small next to
/// the time derivative of `<1>`. `<1>` is built from after-step counts and
/// `<xi>` from pre-step sources, so the residual is first order in dt and
/// halves when the lattice and step are refined together.
pub fn advective_balance() -> Check {
    let coarse = advective_residual(0.0025, 0.0125, 0.02)?;
    let fine = advective_residual(0.00125, 0.0125, 0.02)?;
    ensure(coarse <= 0.05, || format!("residual is {:.1}% of max |d_t <1>|", 100.0 * coarse))?;
    let order = (coarse / fine).log2();
    ensure(order >= 0.8, || format!("refinement order {order:.2} ({coarse:e} -> {fine:e})"))?;
    Ok(format!(
        "residual {:.2}% then {:.2}% of max |d_t <1>|, order {order:.2}",
        100.0 * coarse,
        100.0 * fine
    ))
}

/// In bimolecular windows the reaction sources of the two species cancel.
pub fn bimolecular_sources_cancel() -> Check {
    let lattice = LatticeSpec::line(0.0, 1.0, 0.01).unwrap();
    let per_mole = 1e24;
    let mut field = ParticleField::zeros(lattice.clone(), 2);
    for s in 0..lattice.len() {
        let x = lattice.position(s)[0];
        field.counts[0][s] = (1.0 - x) * per_mole;
        field.counts[1][s] = (0.2 + x) * per_mole;
    }
    for k in 0..2 {
        field.total_initial[k] = total_mass(&field, k);
    }
    let dt = 2.5e-3;
    let params = TransportParams::uniform(&lattice, [1.0, 0.0], [0.01, 0.0], dt, 1);
    let bc = Boundaries::capture(BoundarySpec::uniform(1, SideRule::NoFlux), &field).map_err(err)?;
    let system = ReactionSystem::Bimolecular { k_r: 10.0 };
    let windows: Vec<AveragingWindow> = [0.3, 0.5, 0.7]
        .iter()
        .map(|&x| AveragingWindow::new(&lattice, &[x], 0.05, 0.1, 0.05))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut accs: Vec<CgstAccumulator> = windows.iter().map(|w| CgstAccumulator::new(w.clone(), 2)).collect();
    let mut r = rng(0);
    for k in 0..60 {
        let t = k as f64 * dt;
        let step = saturated_reactive_step(&field, &params, &system, &bc, per_mole, SplitMode::Deterministic, &mut r)
            .map_err(err)?;
        let mut record = step.record;
        record.time = t;
        record.dt = dt;
        for acc in accs.iter_mut() {
            if acc.window.covers(t, dt) {
                acc.accumulate(&lattice, &record, &step.field).map_err(err)?;
                acc.accumulate_reaction(t, dt, &step.reaction).map_err(err)?;
            }
        }
        field = step.field;
    }
    let mut worst = 0.0f64;
    for acc in &accs {
        let (g1, g2) = (acc.sums[0].generated, acc.sums[1].generated);
        ensure(g1 != 0.0, || "no reaction recorded".into())?;
        worst = worst.max((g1 + g2).abs() / g1.abs());
    }
    ensure(worst <= 1e-6, || format!("relative source imbalance {worst:e}"))?;
    Ok(format!("three windows, relative imbalance {worst:.1e}"))
}
