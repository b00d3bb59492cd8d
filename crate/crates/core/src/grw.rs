//! Global random walk transport of grouped particles.
//!
//! Both algorithms move whole groups of particles per site and step. The
//! unbiased GRW shifts a site's particles by the integer advective
//! displacement and then spreads them over `{-d, 0, +d}`; the biased BGRW
//! keeps first-neighbour jumps and folds advection into the jump
//! probabilities `(r ± c)/2`.
//!
//! Exterior handling during a step depends on the side rule: extrapolating
//! sides (no-flux mirror and reset) behave as zero-gradient exteriors, so
//! ghost sites carrying the edge value feed the lattice while groups landing
//! outside are discarded. A free side rejects any group that would leave.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundaries, LatticeSpec, ParticleField};

/// Largest count split with exact binomial draws; above it a normal
/// approximation is used.
const EXACT_BINOMIAL_LIMIT: f64 = 9.0e15;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Expected-value splitting: each part is `n * p`.
    #[default]
    Deterministic,
    /// Multinomial splitting by sequential binomial draws.
    Stochastic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Bgrw,
    Grw,
}

/// Dimensionless diffusion coefficient `r = 2 D dt / (d dx)^2`.
pub fn compute_r(diffusion: f64, dt: f64, dx: f64, jump: u32) -> Result<f64> {
    compute_r_axis(diffusion, dt, dx, jump, 0)
}

pub fn compute_r_axis(diffusion: f64, dt: f64, dx: f64, jump: u32, axis: usize) -> Result<f64> {
    if diffusion < 0.0 || !(dt > 0.0) || !(dx > 0.0) || jump == 0 {
        return Err(Error::Config(format!(
            "invalid transport parameters D={diffusion}, dt={dt}, dx={dx}, d={jump}"
        )));
    }
    let h = jump as f64 * dx;
    let r = 2.0 * diffusion * dt / (h * h);
    if r > 1.0 + 1e-12 {
        return Err(Error::StepSize { axis, r });
    }
    Ok(r)
}

/// Largest time step keeping the jump probabilities admissible.
///
/// The diffusive bound is `sum_a r_a <= 1`. In BGRW mode the bias
/// `|u| dt/dx <= r` does not depend on `dt` (it is the local Peclet bound
/// `|u| dx / D <= 2`), so it either holds or no step is admissible.
pub fn max_dt(
    diffusion: &[f64],
    dx: &[f64],
    jump: u32,
    u_max: &[f64],
    algorithm: Algorithm,
) -> Result<f64> {
    if diffusion.len() != dx.len() || jump == 0 {
        return Err(Error::Config("max_dt: mismatched axes or zero jump".into()));
    }
    let rate: f64 = diffusion
        .iter()
        .zip(dx)
        .map(|(&d, &h)| 2.0 * d / (jump as f64 * h).powi(2))
        .sum();
    if algorithm == Algorithm::Bgrw {
        for (a, (&d, &h)) in diffusion.iter().zip(dx).enumerate() {
            let u = u_max.get(a).copied().unwrap_or(0.0).abs();
            if u > 0.0 && u * h > 2.0 * d * (1.0 + 1e-12) {
                return Err(Error::NoAdmissibleStep(format!(
                    "axis {a}: Peclet number {} exceeds 2",
                    u * h / d.max(f64::MIN_POSITIVE)
                )));
            }
        }
    }
    if rate <= 0.0 {
        return Err(Error::NoAdmissibleStep(
            "zero diffusion leaves the step unbounded".into(),
        ));
    }
    Ok(1.0 / rate)
}

/// Split `n` particles into parts with the given probabilities.
///
/// Part 0 is the remainder so that the parts always add up to `n`.
pub fn split_group<R: Rng + ?Sized>(
    n: f64,
    probabilities: &[f64],
    mode: SplitMode,
    rng: &mut R,
    parts: &mut [f64],
) -> Result<()> {
    if let Some(p) = probabilities.iter().find(|p| **p < 0.0 || !p.is_finite()) {
        return Err(Error::Probability(format!("negative or non-finite probability {p}")));
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Probability(format!("probabilities sum to {sum}")));
    }
    split_unchecked(n, probabilities, mode, rng, parts);
    Ok(())
}

fn split_unchecked<R: Rng + ?Sized>(
    n: f64,
    probabilities: &[f64],
    mode: SplitMode,
    rng: &mut R,
    parts: &mut [f64],
) {
    debug_assert_eq!(probabilities.len(), parts.len());
    if n == 0.0 {
        parts.iter_mut().for_each(|p| *p = 0.0);
        return;
    }
    match mode {
        SplitMode::Deterministic => {
            let mut moved = 0.0;
            for i in 1..parts.len() {
                parts[i] = n * probabilities[i];
                moved += parts[i];
            }
            parts[0] = n - moved;
        }
        SplitMode::Stochastic => {
            // Whole particles are drawn; a fractional residue is split by expectation.
            let whole = n.floor();
            let frac = n - whole;
            let mut remaining = whole;
            let mut mass = 1.0;
            let mut moved = 0.0;
            for i in 1..parts.len() {
                let p = probabilities[i];
                let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
                let drawn = draw_binomial(remaining, q, rng);
                mass -= p;
                remaining -= drawn;
                parts[i] = drawn + frac * p;
                moved += parts[i];
            }
            parts[0] = n - moved;
        }
    }
}

fn draw_binomial<R: Rng + ?Sized>(n: f64, p: f64, rng: &mut R) -> f64 {
    if n <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return n;
    }
    if n <= EXACT_BINOMIAL_LIMIT {
        let dist = Binomial::new(n as u64, p).expect("valid binomial parameters");
        dist.sample(rng) as f64
    } else {
        let mean = n * p;
        let sd = (n * p * (1.0 - p)).sqrt();
        let z = Normal::new(mean, sd).expect("valid normal parameters").sample(rng);
        z.round().clamp(0.0, n)
    }
}

/// Transport parameters for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportParams {
    /// Velocity per site, one component per axis (second ignored in 1D).
    pub velocity: Vec<[f64; 2]>,
    /// Diagonal diffusion coefficients per axis.
    pub diffusion: [f64; 2],
    pub dt: f64,
    /// Diffusive jump amplitude `d` (GRW only; BGRW always uses 1).
    pub jump: u32,
    /// Permit negative expected-value jump parts in deterministic BGRW when
    /// the bias exceeds `r`. Stochastic mode never allows it.
    pub allow_signed_split: bool,
    /// Raise `r` to `|c|` at sites where the bias exceeds it, i.e. add the
    /// numerical diffusion needed to keep the local Peclet number at 2.
    pub raise_diffusion: bool,
}

impl TransportParams {
    pub fn uniform(lattice: &LatticeSpec, velocity: [f64; 2], diffusion: [f64; 2], dt: f64, jump: u32) -> Self {
        Self {
            velocity: vec![velocity; lattice.len()],
            diffusion,
            dt,
            jump,
            allow_signed_split: false,
            raise_diffusion: false,
        }
    }

    /// `r` per axis for the given jump amplitude.
    pub fn r(&self, lattice: &LatticeSpec, jump: u32) -> Result<[f64; 2]> {
        let mut r = [0.0; 2];
        for a in 0..lattice.dims() {
            r[a] = compute_r_axis(self.diffusion[a], self.dt, lattice.axis(a).dx, jump, a)?;
        }
        let total: f64 = r.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::StepSize { axis: lattice.dims() - 1, r: total });
        }
        Ok(r)
    }

    /// Courant number `u dt / dx` at a site along an axis.
    #[inline]
    pub fn courant(&self, lattice: &LatticeSpec, site: usize, axis: usize) -> f64 {
        self.velocity[site][axis] * self.dt / lattice.axis(axis).dx
    }

    /// Integer advective shift `floor(u dt / dx)` at a site along an axis.
    #[inline]
    pub fn shift(&self, lattice: &LatticeSpec, site: usize, axis: usize) -> i64 {
        // The small offset keeps exact ratios such as dt = dx / u at 1.
        (self.courant(lattice, site, axis) + 1e-9).floor() as i64
    }
}

/// Jumps of the particles that started a step at one site.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SiteJumps {
    /// Particles at the site before the step.
    pub source: f64,
    /// Particles not making a diffusive jump (they may still be shifted by GRW).
    pub stay: f64,
    pub minus: [f64; 2],
    pub plus: [f64; 2],
    /// Shadow split with unbiased probabilities `r/2`, used for `<x xi>`.
    pub unbiased_minus: [f64; 2],
    pub unbiased_plus: [f64; 2],
}

impl SiteJumps {
    pub fn total(&self) -> f64 {
        self.stay + self.minus.iter().sum::<f64>() + self.plus.iter().sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpKind {
    /// First-neighbour jumps with biased probabilities.
    Biased,
    /// Shift by `shift` then jump by `±jump` sites.
    Unbiased { jump: u32 },
}

/// Per-step record of group splits, consumed by CGST accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpRecord {
    pub step: u64,
    /// Time at the start of the step.
    pub time: f64,
    pub dt: f64,
    pub kind: JumpKind,
    /// Integer advective shift per site (all zero for BGRW).
    pub shift: Vec<[i64; 2]>,
    /// `sites[species][site]`
    pub sites: Vec<Vec<SiteJumps>>,
}

impl JumpRecord {
    pub fn species(&self) -> usize {
        self.sites.len()
    }
}

/// Jump probabilities of one source site for the biased walk.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JumpOdds {
    pub minus: [f64; 2],
    pub plus: [f64; 2],
    /// Probability of each unbiased shadow jump (`r/2`) per axis.
    pub unbiased: [f64; 2],
}

impl JumpOdds {
    #[inline]
    pub fn stay(&self) -> f64 {
        1.0 - self.minus.iter().sum::<f64>() - self.plus.iter().sum::<f64>()
    }
}

/// BGRW step with constant `r` and site-wise bias `c = u dt / dx`.
pub fn bgrw_step<R: Rng + ?Sized>(
    field: &ParticleField,
    params: &TransportParams,
    boundaries: &Boundaries,
    mode: SplitMode,
    rng: &mut R,
) -> Result<(ParticleField, JumpRecord)> {
    let lattice = &field.lattice;
    let r = params.r(lattice, 1)?;
    let dims = lattice.dims();
    let signed_ok = params.allow_signed_split && mode == SplitMode::Deterministic;
    for s in 0..lattice.len() {
        for a in 0..dims {
            let c = params.courant(lattice, s, a);
            if !signed_ok && !params.raise_diffusion && c.abs() > r[a] * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::Courant {
                    site: s,
                    axis: a,
                    courant: c.abs(),
                    r: r[a],
                });
            }
        }
    }
    let odds = |s: usize| {
        let mut o = JumpOdds::default();
        for a in 0..dims {
            let c = params.courant(lattice, s, a);
            let ra = if params.raise_diffusion { r[a].max(c.abs()) } else { r[a] };
            o.minus[a] = 0.5 * (ra - c);
            o.plus[a] = 0.5 * (ra + c);
            o.unbiased[a] = 0.5 * r[a];
        }
        o
    };
    let (field, mut record) = biased_walk(field, &odds, boundaries, mode, rng, signed_ok)?;
    record.dt = params.dt;
    Ok((field, record))
}

/// BGRW step with arbitrary per-site jump probabilities.
///
/// `odds(site)` gives the probabilities of particles leaving `site`; ghost
/// sites beyond extrapolating sides reuse the odds of the adjacent edge site.
/// The returned record has `dt = 0`; callers set the step clock.
pub fn biased_walk<R: Rng + ?Sized, F: Fn(usize) -> JumpOdds>(
    field: &ParticleField,
    odds: &F,
    boundaries: &Boundaries,
    mode: SplitMode,
    rng: &mut R,
    allow_signed: bool,
) -> Result<(ParticleField, JumpRecord)> {
    let lattice = &field.lattice;
    let dims = lattice.dims();
    let [nx, ny] = lattice.shape();
    let n_sites = lattice.len();

    let table: Vec<JumpOdds> = (0..n_sites).map(odds).collect();
    for (s, o) in table.iter().enumerate() {
        let negative = o.minus.iter().chain(o.plus.iter()).any(|&p| p < 0.0);
        if o.stay() < -1e-12 || (negative && !allow_signed) {
            let axis = (0..dims)
                .find(|&a| o.minus[a] < 0.0 || o.plus[a] < 0.0)
                .unwrap_or(0);
            return Err(Error::Courant {
                site: s,
                axis,
                courant: (o.plus[axis] - o.minus[axis]).abs(),
                r: o.plus[axis] + o.minus[axis],
            });
        }
    }

    let mut out = ParticleField {
        lattice: lattice.clone(),
        counts: vec![vec![0.0; n_sites]; field.species()],
        total_initial: field.total_initial.clone(),
    };
    let mut sites = vec![vec![SiteJumps::default(); n_sites]; field.species()];
    let n_parts = 1 + 2 * dims;
    let mut probs = vec![0.0; n_parts];
    let mut parts = vec![0.0; n_parts];
    let mut shadow_p = vec![0.0; n_parts];
    let mut shadow = vec![0.0; n_parts];

    for (k, counts) in field.counts.iter().enumerate() {
        let dest = &mut out.counts[k];
        for s in 0..n_sites {
            let n = counts[s];
            let o = &table[s];
            probs[0] = o.stay();
            shadow_p[0] = 1.0 - 2.0 * o.unbiased[..dims].iter().sum::<f64>();
            for a in 0..dims {
                probs[1 + 2 * a] = o.minus[a];
                probs[2 + 2 * a] = o.plus[a];
                shadow_p[1 + 2 * a] = o.unbiased[a];
                shadow_p[2 + 2 * a] = o.unbiased[a];
            }
            split_signed(n, &probs, mode, rng, &mut parts);
            split_signed(n, &shadow_p, mode, rng, &mut shadow);

            let idx = lattice.unflat(s);
            dest[s] += parts[0];
            let rec = &mut sites[k][s];
            rec.source = n;
            rec.stay = parts[0];
            for a in 0..dims {
                rec.minus[a] = parts[1 + 2 * a];
                rec.plus[a] = parts[2 + 2 * a];
                rec.unbiased_minus[a] = shadow[1 + 2 * a];
                rec.unbiased_plus[a] = shadow[2 + 2 * a];
                for (side, part) in [(0usize, parts[1 + 2 * a]), (1, parts[2 + 2 * a])] {
                    let mut to = [idx[0] as i64, idx[1] as i64];
                    to[a] += if side == 0 { -1 } else { 1 };
                    let extent = if a == 0 { nx } else { ny } as i64;
                    if to[a] < 0 || to[a] >= extent {
                        if !boundaries.side(a, side).extrapolates() && part != 0.0 {
                            return Err(Error::OutOfRange { site: s });
                        }
                        continue;
                    }
                    dest[lattice.flat([to[0] as usize, to[1] as usize])] += part;
                }
            }
        }

        // Ghost layer: one site beyond each extrapolating side, jumping inwards.
        for a in 0..dims {
            let (n_along, n_across) = if a == 0 { (nx, ny) } else { (ny, nx) };
            for side in 0..2 {
                if !boundaries.side(a, side).extrapolates() {
                    continue;
                }
                let edge = if side == 0 { 0 } else { n_along - 1 };
                for j in 0..n_across {
                    let s = if a == 0 {
                        lattice.flat([edge, j])
                    } else {
                        lattice.flat([j, edge])
                    };
                    let o = &table[s];
                    // A ghost below the lower side jumps up (plus); above the upper side, down.
                    let p_in = if side == 0 { o.plus[a] } else { o.minus[a] };
                    let (p_out, out_part) = if side == 0 {
                        (o.minus[a], sites[k][s].minus[a])
                    } else {
                        (o.plus[a], sites[k][s].plus[a])
                    };
                    let inflow = match mode {
                        SplitMode::Deterministic => counts[s] * p_in,
                        // Mirror the edge's outward draw; exact when the odds are symmetric.
                        SplitMode::Stochastic if p_out > 0.0 => {
                            if p_in == p_out {
                                out_part
                            } else {
                                out_part * (p_in / p_out)
                            }
                        }
                        SplitMode::Stochastic => {
                            let whole = counts[s].floor();
                            draw_binomial(whole, p_in.clamp(0.0, 1.0), rng) + (counts[s] - whole) * p_in
                        }
                    };
                    dest[s] += inflow;
                }
            }
        }
    }

    let record = JumpRecord {
        step: 0,
        time: 0.0,
        dt: 0.0,
        kind: JumpKind::Biased,
        shift: vec![[0, 0]; n_sites],
        sites,
    };
    Ok((out, record))
}

fn split_signed<R: Rng + ?Sized>(n: f64, probs: &[f64], mode: SplitMode, rng: &mut R, parts: &mut [f64]) {
    if probs.iter().any(|&p| p < 0.0) {
        // Only reachable in deterministic mode with signed splits allowed.
        let mut moved = 0.0;
        for i in 1..parts.len() {
            parts[i] = n * probs[i];
            moved += parts[i];
        }
        parts[0] = n - moved;
    } else {
        split_unchecked(n, probs, mode, rng, parts);
    }
}

/// Unbiased GRW step: shift by `floor(u dt/dx)` then jump by `±d` sites.
pub fn grw_step<R: Rng + ?Sized>(
    field: &ParticleField,
    params: &TransportParams,
    boundaries: &Boundaries,
    mode: SplitMode,
    rng: &mut R,
) -> Result<(ParticleField, JumpRecord)> {
    let lattice = &field.lattice;
    let dims = lattice.dims();
    let d = params.jump;
    let r = params.r(lattice, d)?;
    let [nx, ny] = lattice.shape();
    let n_sites = lattice.len();
    let shifts: Vec<[i64; 2]> = (0..n_sites)
        .map(|s| {
            let mut sh = [0i64; 2];
            for (a, v) in sh.iter_mut().enumerate().take(dims) {
                *v = params.shift(lattice, s, a);
            }
            sh
        })
        .collect();
    let max_shift = shifts
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| v.unsigned_abs())
        .max()
        .unwrap_or(0) as i64;
    let reach = max_shift + d as i64;

    let n_parts = 1 + 2 * dims;
    let mut probs = vec![0.0; n_parts];
    probs[0] = 1.0 - r[..dims].iter().sum::<f64>();
    for a in 0..dims {
        probs[1 + 2 * a] = 0.5 * r[a];
        probs[2 + 2 * a] = 0.5 * r[a];
    }
    let offsets: Vec<[i64; 2]> = {
        let mut v = vec![[0, 0]];
        for a in 0..dims {
            let mut m = [0, 0];
            m[a] = -(d as i64);
            let mut p = [0, 0];
            p[a] = d as i64;
            v.push(m);
            v.push(p);
        }
        v
    };

    let mut out = ParticleField {
        lattice: lattice.clone(),
        counts: vec![vec![0.0; n_sites]; field.species()],
        total_initial: field.total_initial.clone(),
    };
    let mut sites = vec![vec![SiteJumps::default(); n_sites]; field.species()];
    let mut parts = vec![0.0; n_parts];

    let side_of = |a: usize, v: i64, extent: i64| -> Option<usize> {
        if v < 0 {
            Some(0)
        } else if v >= extent {
            Some(1)
        } else {
            let _ = a;
            None
        }
    };
    let (ex, ey) = (nx as i64, ny as i64);
    let (gy_lo, gy_hi) = if dims == 2 { (-reach, ey - 1 + reach) } else { (0, 0) };

    // Real sites come first so that stochastic ghosts can reuse their draws.
    let mut order: Vec<(i64, i64)> = Vec::new();
    for gy in gy_lo..=gy_hi {
        for gx in -reach..=(ex - 1 + reach) {
            order.push((gx, gy));
        }
    }
    order.sort_by_key(|&(gx, gy)| side_of(0, gx, ex).is_some() || (dims == 2 && side_of(1, gy, ey).is_some()));
    let mirrored = |j: usize, flip: [bool; 2]| -> usize {
        if j == 0 {
            return 0;
        }
        let a = (j - 1) / 2;
        if flip[a] {
            if j % 2 == 1 {
                j + 1
            } else {
                j - 1
            }
        } else {
            j
        }
    };
    let mut realized = vec![0.0; n_sites * n_parts];

    for (k, counts) in field.counts.iter().enumerate() {
        let dest = &mut out.counts[k];
        realized.iter_mut().for_each(|v| *v = 0.0);
        for &(gx, gy) in &order {
            {
                let ghost_x = side_of(0, gx, ex);
                let ghost_y = if dims == 2 { side_of(1, gy, ey) } else { None };
                let is_ghost = ghost_x.is_some() || ghost_y.is_some();
                if is_ghost {
                    let open_x = ghost_x.is_none_or(|side| boundaries.side(0, side).extrapolates());
                    let open_y = ghost_y.is_none_or(|side| boundaries.side(1, side).extrapolates());
                    if !(open_x && open_y) {
                        continue;
                    }
                }
                let cx = gx.clamp(0, ex - 1) as usize;
                let cy = gy.clamp(0, ey - 1) as usize;
                let src = lattice.flat([cx, cy]);
                let n = counts[src];
                if n == 0.0 && !is_ghost {
                    sites[k][src].source = 0.0;
                    continue;
                }
                if n == 0.0 {
                    continue;
                }
                let sh = shifts[src];
                // A stochastic ghost next to the edge mirrors the edge's own
                // draw, so that with no wall-normal shift the count is conserved.
                let flip = [ghost_x.is_some(), ghost_y.is_some()];
                let adjacent = (gx == -1 || gx == ex || ghost_x.is_none())
                    && (dims == 1 || gy == -1 || gy == ey || ghost_y.is_none());
                if is_ghost && adjacent && mode == SplitMode::Stochastic {
                    for (j, p) in parts.iter_mut().enumerate() {
                        *p = realized[src * n_parts + mirrored(j, flip)];
                    }
                } else {
                    split_unchecked(n, &probs, mode, rng, &mut parts);
                }
                if !is_ghost {
                    realized[src * n_parts..(src + 1) * n_parts].copy_from_slice(&parts);
                }
                for (j, off) in offsets.iter().enumerate() {
                    let tx = gx + sh[0] + off[0];
                    let ty = gy + sh[1] + off[1];
                    let inside = tx >= 0 && tx < ex && ty >= 0 && ty < ey;
                    if inside {
                        dest[lattice.flat([tx as usize, ty as usize])] += parts[j];
                    } else if !is_ghost {
                        let axis = if tx < 0 || tx >= ex { 0 } else { 1 };
                        let v = if axis == 0 { tx } else { ty };
                        let extent = if axis == 0 { ex } else { ey };
                        let side = side_of(axis, v, extent).unwrap_or(0);
                        if !boundaries.side(axis, side).extrapolates() && parts[j] != 0.0 {
                            return Err(Error::OutOfRange { site: src });
                        }
                    }
                }
                if !is_ghost {
                    let rec = &mut sites[k][src];
                    rec.source = n;
                    rec.stay = parts[0];
                    for a in 0..dims {
                        rec.minus[a] = parts[1 + 2 * a];
                        rec.plus[a] = parts[2 + 2 * a];
                        rec.unbiased_minus[a] = parts[1 + 2 * a];
                        rec.unbiased_plus[a] = parts[2 + 2 * a];
                    }
                }
            }
        }
    }

    let record = JumpRecord {
        step: 0,
        time: 0.0,
        dt: params.dt,
        kind: JumpKind::Unbiased { jump: d },
        shift: shifts,
        sites,
    };
    Ok((out, record))
}

/// Dispatch on the algorithm.
pub fn transport_step<R: Rng + ?Sized>(
    algorithm: Algorithm,
    field: &ParticleField,
    params: &TransportParams,
    boundaries: &Boundaries,
    mode: SplitMode,
    rng: &mut R,
) -> Result<(ParticleField, JumpRecord)> {
    match algorithm {
        Algorithm::Bgrw => bgrw_step(field, params, boundaries, mode, rng),
        Algorithm::Grw => grw_step(field, params, boundaries, mode, rng),
    }
}
