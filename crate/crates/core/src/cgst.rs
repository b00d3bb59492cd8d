//! Coarse-grained space-time averages over lattice random walks.
//!
//! A window is an open cube of half-side `a` around a lattice site together
//! with a time interval `[t - tau, t + tau]`. Accumulators receive one
//! [`JumpRecord`] per step and add the step contributions of every site
//! strictly inside the cube, weighted by the step length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grw::{JumpKind, JumpRecord};
use crate::lattice::{LatticeSpec, ParticleField};

/// Relative tolerance used when comparing step boundaries with window limits.
const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingWindow {
    /// Center coordinates after snapping to the nearest site.
    pub center: [f64; 2],
    pub center_index: [usize; 2],
    /// Spatial half-width after rounding down to whole lattice spacings.
    pub a: [f64; 2],
    pub t: f64,
    pub tau: f64,
    pub dims: usize,
    /// Flat indices of the sites strictly inside the open cube.
    pub sites: Vec<usize>,
}

impl AveragingWindow {
    pub fn new(lattice: &LatticeSpec, center: &[f64], a: f64, t: f64, tau: f64) -> Result<Self> {
        let dims = lattice.dims();
        if center.len() != dims {
            return Err(Error::Config(format!(
                "window center has {} coordinates on a {dims}D lattice",
                center.len()
            )));
        }
        if !(a > 0.0) || !(tau >= 0.0) || t - tau < -TIME_EPS * tau.max(1.0) {
            return Err(Error::Config(format!(
                "invalid window a={a}, t={t}, tau={tau}"
            )));
        }
        let mut c = [0.0; 2];
        let mut ci = [0usize; 2];
        let mut half = [0.0; 2];
        let mut m = [1usize; 2];
        for d in 0..dims {
            let axis = lattice.axis(d);
            let raw = ((center[d] - axis.lower) / axis.dx).round();
            if raw < 0.0 || raw as usize >= axis.sites {
                return Err(Error::Config(format!(
                    "window center {} outside axis {d}",
                    center[d]
                )));
            }
            ci[d] = raw as usize;
            c[d] = axis.coord(ci[d]);
            m[d] = (a / axis.dx + 1e-9).floor() as usize;
            if m[d] == 0 {
                return Err(Error::Config(format!(
                    "half-width {a} is smaller than the spacing {} on axis {d}",
                    axis.dx
                )));
            }
            half[d] = m[d] as f64 * axis.dx;
        }
        let [nx, ny] = lattice.shape();
        let range = |d: usize, n: usize| {
            let lo = ci[d].saturating_sub(m[d] - 1);
            let hi = (ci[d] + m[d] - 1).min(n - 1);
            lo..=hi
        };
        let mut sites = Vec::new();
        let ys = if dims == 2 { range(1, ny) } else { 0..=0 };
        for iy in ys {
            for ix in range(0, nx) {
                sites.push(lattice.flat([ix, iy]));
            }
        }
        Ok(Self {
            center: c,
            center_index: ci,
            a: half,
            t,
            tau,
            dims,
            sites,
        })
    }

    /// Number of lattice sites inside the window.
    pub fn n_a(&self) -> usize {
        self.sites.len()
    }

    /// Spatial measure `(2a)^d`.
    pub fn volume(&self) -> f64 {
        self.a[..self.dims].iter().map(|h| 2.0 * h).product()
    }

    pub fn start(&self) -> f64 {
        self.t - self.tau
    }

    pub fn end(&self) -> f64 {
        self.t + self.tau
    }

    /// Whether the step `[time, time + dt]` lies inside the time interval.
    pub fn covers(&self, time: f64, dt: f64) -> bool {
        let eps = TIME_EPS * dt.max(f64::MIN_POSITIVE);
        time >= self.start() - eps && time + dt <= self.end() + eps
    }
}

/// Window centers covering `[lower, upper]` with windows of half-width `a`.
///
/// Disjoint when `2a` divides the length; otherwise `ceil(len / 2a)` windows
/// are spread evenly from `lower + a` to `upper - a` and overlap slightly.
pub fn tile_centers(lower: f64, upper: f64, a: f64) -> Vec<f64> {
    let len = upper - lower;
    if !(a > 0.0) || 2.0 * a > len * (1.0 + 1e-9) {
        return Vec::new();
    }
    let n = (len / (2.0 * a) - 1e-9).ceil().max(1.0) as usize;
    if n == 1 {
        return vec![0.5 * (lower + upper)];
    }
    let step = (len - 2.0 * a) / (n - 1) as f64;
    (0..n).map(|j| lower + a + j as f64 * step).collect()
}

/// Time-weighted sums `sum_k dt_k sum_i Phi_{i,k}` for one species.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sums {
    pub one: f64,
    pub x: [f64; 2],
    pub xi: [f64; 2],
    /// `xxi[alpha][beta]` accumulates `x_alpha xi_beta`.
    pub xxi: [[f64; 2]; 2],
    /// Particles created (positive) or consumed (negative) by reactions.
    pub generated: f64,
}

impl Sums {
    fn add(&mut self, other: &Sums) {
        self.one += other.one;
        self.generated += other.generated;
        for a in 0..2 {
            self.x[a] += other.x[a];
            self.xi[a] += other.xi[a];
            for b in 0..2 {
                self.xxi[a][b] += other.xxi[a][b];
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgstAccumulator {
    pub window: AveragingWindow,
    pub sums: Vec<Sums>,
    pub steps: usize,
    /// Total step length accumulated so far.
    pub covered: f64,
}

impl CgstAccumulator {
    pub fn new(window: AveragingWindow, species: usize) -> Self {
        Self {
            window,
            sums: vec![Sums::default(); species],
            steps: 0,
            covered: 0.0,
        }
    }

    /// Add the contributions of one step.
    ///
    /// `after` holds the counts at the end of the step, which enter `<1>`.
    pub fn accumulate(&mut self, lattice: &LatticeSpec, record: &JumpRecord, after: &ParticleField) -> Result<()> {
        let w = &self.window;
        if !w.covers(record.time, record.dt) {
            return Err(Error::OutsideWindow {
                t: record.time,
                lo: w.start(),
                hi: w.end(),
            });
        }
        let dt = record.dt;
        let dims = w.dims;
        let h: Vec<f64> = (0..dims).map(|d| lattice.axis(d).dx).collect();
        for (k, sums) in self.sums.iter_mut().enumerate() {
            let jumps = &record.sites[k];
            let post = &after.counts[k];
            let mut step = Sums::default();
            for &s in &w.sites {
                step.one += post[s];
                let j = &jumps[s];
                if j.source == 0.0 {
                    continue;
                }
                let pos = lattice.position(s);
                match record.kind {
                    JumpKind::Biased => {
                        for a in 0..dims {
                            let net = j.plus[a] - j.minus[a];
                            step.x[a] += pos[a] * j.source + h[a] * net;
                            step.xi[a] += h[a] / dt * net;
                            for b in 0..dims {
                                let v = h[b] / dt;
                                if a == b {
                                    step.xxi[a][a] += (pos[a] + 0.5 * h[a]) * v * j.unbiased_plus[a]
                                        - (pos[a] - 0.5 * h[a]) * v * j.unbiased_minus[a];
                                } else {
                                    step.xxi[a][b] += pos[a] * v * (j.unbiased_plus[b] - j.unbiased_minus[b]);
                                }
                            }
                        }
                    }
                    JumpKind::Unbiased { jump } => {
                        let d = jump as f64;
                        let shift = record.shift[s];
                        for a in 0..dims {
                            let moved = pos[a] + shift[a] as f64 * h[a];
                            step.x[a] += moved * j.source;
                            step.xi[a] += shift[a] as f64 * h[a] / dt * j.source;
                            for b in 0..dims {
                                let v = d * h[b] / dt;
                                if a == b {
                                    step.xxi[a][a] += (moved + 0.5 * d * h[a]) * v * j.plus[a]
                                        - (moved - 0.5 * d * h[a]) * v * j.minus[a];
                                } else {
                                    step.xxi[a][b] += moved * v * (j.plus[b] - j.minus[b]);
                                }
                            }
                        }
                    }
                }
            }
            step.one *= dt;
            for a in 0..2 {
                step.x[a] *= dt;
                step.xi[a] *= dt;
                for b in 0..2 {
                    step.xxi[a][b] *= dt;
                }
            }
            sums.add(&step);
        }
        self.steps += 1;
        self.covered += dt;
        Ok(())
    }

    /// Record particles created or consumed by reactions during a step.
    ///
    /// `delta[species][site]` is the change in particle count.
    pub fn accumulate_reaction(&mut self, time: f64, dt: f64, delta: &[Vec<f64>]) -> Result<()> {
        let w = &self.window;
        if !w.covers(time, dt) {
            return Err(Error::OutsideWindow {
                t: time,
                lo: w.start(),
                hi: w.end(),
            });
        }
        for (sums, d) in self.sums.iter_mut().zip(delta) {
            sums.generated += w.sites.iter().map(|&s| d[s]).sum::<f64>();
        }
        Ok(())
    }

    /// Field-wise sum of two accumulators over the same window.
    pub fn merge(&mut self, other: &CgstAccumulator) {
        debug_assert_eq!(self.window, other.window);
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.add(b);
        }
        self.steps += other.steps;
        self.covered += other.covered;
    }

    /// Scale the sums by `1/(2 tau (2a)^d)`.
    ///
    /// `per_mole` is the number of particles per unit concentration; it only
    /// affects the normalized concentration.
    pub fn finalize(&self, per_mole: f64) -> UpscaledSample {
        let w = &self.window;
        let span = 2.0 * w.tau;
        let norm = if span > 0.0 { 1.0 / (span * w.volume()) } else { 0.0 };
        let species = self
            .sums
            .iter()
            .map(|s| {
                let mut avg = Averages {
                    one: s.one * norm,
                    generated: s.generated * norm,
                    ..Averages::default()
                };
                for a in 0..2 {
                    avg.x[a] = s.x[a] * norm;
                    avg.xi[a] = s.xi[a] * norm;
                    for b in 0..2 {
                        avg.xxi[a][b] = s.xxi[a][b] * norm;
                    }
                }
                avg.concentration = avg.one / per_mole;
                avg
            })
            .collect();
        UpscaledSample {
            window: w.clone(),
            species,
        }
    }
}

/// Finalized CGST averages of one species.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub one: f64,
    pub x: [f64; 2],
    pub xi: [f64; 2],
    pub xxi: [[f64; 2]; 2],
    /// Reaction source `delta 1` over the window.
    pub generated: f64,
    /// `<1>` divided by the particles per unit concentration.
    pub concentration: f64,
}

impl Averages {
    pub fn mean_position(&self) -> [f64; 2] {
        ratio2(self.x, self.one)
    }

    pub fn velocity(&self) -> [f64; 2] {
        ratio2(self.xi, self.one)
    }

    /// Diffusion tensor from `<x_alpha xi_beta> / <1>`.
    ///
    /// With the unbiased shadow split, the step contributions
    /// `(x +- dx/2)(+-dx/dt) n r/2` add up to `+n D`, so the coefficient of
    /// the particle system is the positive ratio.
    pub fn diffusion(&self) -> [[f64; 2]; 2] {
        if self.one == 0.0 {
            return [[0.0; 2]; 2];
        }
        let mut d = [[0.0; 2]; 2];
        for (a, row) in d.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = self.xxi[a][b] / self.one;
            }
        }
        d
    }
}

fn ratio2(v: [f64; 2], one: f64) -> [f64; 2] {
    if one == 0.0 {
        [0.0; 2]
    } else {
        [v[0] / one, v[1] / one]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpscaledSample {
    pub window: AveragingWindow,
    pub species: Vec<Averages>,
}

/// Intrinsic diffusion tensor of one species.
pub fn intrinsic_diffusion(sample: &UpscaledSample, species: usize) -> [[f64; 2]; 2] {
    sample.species[species].diffusion()
}

/// Macroscopic velocity `<xi>/<1>` of one species.
pub fn macro_velocity(sample: &UpscaledSample, species: usize) -> [f64; 2] {
    sample.species[species].velocity()
}

/// Spatial average `(2a)^-d sum_i n_i / per_mole` per species at one time.
pub fn volume_average(field: &ParticleField, window: &AveragingWindow, per_mole: f64) -> Vec<f64> {
    let v = window.volume();
    field
        .counts
        .iter()
        .map(|c| window.sites.iter().map(|&s| c[s]).sum::<f64>() / (v * per_mole))
        .collect()
}

/// Arithmetic site mean over the window, per species.
pub fn site_mean(counts: &[Vec<f64>], window: &AveragingWindow) -> Vec<f64> {
    let n = window.n_a() as f64;
    counts
        .iter()
        .map(|c| window.sites.iter().map(|&s| c[s]).sum::<f64>() / n)
        .collect()
}

/// Running trapezoidal time average of window site means.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingAverage {
    pub window: AveragingWindow,
    integral: Vec<f64>,
    covered: f64,
}

impl MovingAverage {
    pub fn new(window: AveragingWindow, species: usize) -> Self {
        Self {
            window,
            integral: vec![0.0; species],
            covered: 0.0,
        }
    }

    /// Add a step from `before` (at `time`) to `after` (at `time + dt`).
    pub fn add_step(&mut self, time: f64, dt: f64, before: &[Vec<f64>], after: &[Vec<f64>]) {
        if !self.window.covers(time, dt) {
            return;
        }
        let m0 = site_mean(before, &self.window);
        let m1 = site_mean(after, &self.window);
        for (acc, (a, b)) in self.integral.iter_mut().zip(m0.iter().zip(&m1)) {
            *acc += 0.5 * dt * (a + b);
        }
        self.covered += dt;
    }

    /// Normalized moving average; requires the whole interval to be covered.
    pub fn finalize(&self, per_mole: f64) -> Result<Vec<f64>> {
        let span = 2.0 * self.window.tau;
        if (self.covered - span).abs() > TIME_EPS * span.max(1.0) {
            return Err(Error::History(format!(
                "covered {} of the interval length {span}",
                self.covered
            )));
        }
        Ok(self.integral.iter().map(|v| v / (span * per_mole)).collect())
    }
}

/// Time-averaged site mean over `[t - tau, t + tau]` from a snapshot history.
///
/// `history` lists `(time, counts[species][site])` in increasing time. With
/// `tau = 0` the snapshot at `t` is used directly.
pub fn moving_average(
    history: &[(f64, Vec<Vec<f64>>)],
    window: &AveragingWindow,
    per_mole: f64,
) -> Result<Vec<f64>> {
    let eps = TIME_EPS * window.t.abs().max(1.0);
    if window.tau == 0.0 {
        let snap = history
            .iter()
            .find(|(t, _)| (t - window.t).abs() <= eps)
            .ok_or_else(|| Error::History(format!("no snapshot at t = {}", window.t)))?;
        return Ok(site_mean(&snap.1, window).into_iter().map(|v| v / per_mole).collect());
    }
    let species = history.first().map(|h| h.1.len()).unwrap_or(0);
    let mut avg = MovingAverage::new(window.clone(), species);
    for pair in history.windows(2) {
        let (t0, c0) = &pair[0];
        let (t1, c1) = &pair[1];
        avg.add_step(*t0, t1 - t0, c0, c1);
    }
    avg.finalize(per_mole)
}

/// Relative l2 discrepancy `e` and maximum relative difference `epsilon`.
pub fn discrepancy(cbar: &[f64], cgst: &[f64]) -> Result<(f64, f64)> {
    if cbar.len() != cgst.len() {
        return Err(Error::Config(format!(
            "discrepancy inputs differ in length ({} vs {})",
            cbar.len(),
            cgst.len()
        )));
    }
    let norm = cgst.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff = cbar
        .iter()
        .zip(cgst)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let (imax, dmax) = cbar
        .iter()
        .zip(cgst)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, -1.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    let eps = if dmax == 0.0 { 0.0 } else { dmax / cgst[imax].abs() };
    Ok((diff / norm, eps))
}

/// CGST samples of one species on a regular grid of 1D window centers and times.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceGrid {
    pub centers: Vec<f64>,
    pub times: Vec<f64>,
    /// `one[m][j]`: `<1>` at time `m`, center `j`.
    pub one: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    pub generated: Vec<Vec<f64>>,
}

impl BalanceGrid {
    pub fn from_samples(centers: Vec<f64>, times: Vec<f64>, samples: &[Vec<UpscaledSample>], species: usize) -> Self {
        let pick = |f: &dyn Fn(&Averages) -> f64| -> Vec<Vec<f64>> {
            samples
                .iter()
                .map(|row| row.iter().map(|s| f(&s.species[species])).collect())
                .collect()
        };
        Self {
            one: pick(&|a| a.one),
            xi: pick(&|a| a.xi[0]),
            generated: pick(&|a| a.generated),
            centers,
            times,
        }
    }

    /// Pointwise residual of `d_t <1> + d_x <xi> - delta1` at interior nodes.
    pub fn residuals(&self) -> Result<Vec<Vec<f64>>> {
        let (nt, nx) = (self.times.len(), self.centers.len());
        if nt < 3 || nx < 3 {
            return Err(Error::GridTooCoarse(format!(
                "{nt} times and {nx} centers; at least 3 of each are needed"
            )));
        }
        let mut out = Vec::with_capacity(nt - 2);
        for m in 1..nt - 1 {
            let dt = self.times[m + 1] - self.times[m - 1];
            let mut row = Vec::with_capacity(nx - 2);
            for j in 1..nx - 1 {
                let dx = self.centers[j + 1] - self.centers[j - 1];
                let dt_one = (self.one[m + 1][j] - self.one[m - 1][j]) / dt;
                let dx_xi = (self.xi[m][j + 1] - self.xi[m][j - 1]) / dx;
                row.push(dt_one + dx_xi - self.generated[m][j]);
            }
            out.push(row);
        }
        Ok(out)
    }
}

/// Max-norm of the continuity residual over the interior of the grid.
pub fn balance_residual(grid: &BalanceGrid) -> Result<f64> {
    Ok(grid
        .residuals()?
        .iter()
        .flatten()
        .fold(0.0f64, |m, r| m.max(r.abs())))
}
