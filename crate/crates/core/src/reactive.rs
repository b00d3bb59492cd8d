//! Reaction systems and their coupling with BGRW transport.
//!
//! Concentrations are mole fractions: `c = n / N` with `N` particles per mole.
//! In unsaturated media a site holds `n = theta c N` particles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grw::{bgrw_step, biased_walk, JumpOdds, JumpRecord, SplitMode, TransportParams};
use crate::lattice::{mirror_sides, Boundaries, LatticeSpec, ParticleField};
use crate::richards::FlowState;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionSystem {
    #[default]
    None,
    /// `R1 = -K_r c1 c2^2`, `R2 = +K_r c1 c2^2`.
    Bimolecular { k_r: f64 },
    /// `R_nu = -theta alpha_nu mu(c1, c2)`.
    Monod { alpha1: f64, alpha2: f64, m1: f64, m2: f64 },
}

impl ReactionSystem {
    pub fn monod_default() -> Self {
        Self::Monod {
            alpha1: 5.0,
            alpha2: 0.5,
            m1: 0.1,
            m2: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::None => true,
            Self::Bimolecular { k_r } => k_r >= 0.0,
            Self::Monod { alpha1, alpha2, m1, m2 } => {
                alpha1 >= 0.0 && alpha2 >= 0.0 && m1 > 0.0 && m2 > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid reaction parameters {self:?}")))
        }
    }

    /// Rates `(R1, R2)` at non-negative concentrations.
    pub fn rates(&self, c1: f64, c2: f64, theta: f64) -> (f64, f64) {
        match *self {
            Self::None => (0.0, 0.0),
            Self::Bimolecular { k_r } => {
                let r = k_r * c1 * c2 * c2;
                (-r, r)
            }
            Self::Monod { alpha1, alpha2, m1, m2 } => {
                let mu = monod(c1, c2, m1, m2);
                (-theta * alpha1 * mu, -theta * alpha2 * mu)
            }
        }
    }
}

#[inline]
fn monod(c1: f64, c2: f64, m1: f64, m2: f64) -> f64 {
    c1 / (m1 + c1) * c2 / (m2 + c2)
}

/// Monod factor `c1/(M1 + c1) c2/(M2 + c2)`.
pub fn monod_rate(c1: f64, c2: f64, m1: f64, m2: f64) -> Result<f64> {
    if c1 < 0.0 {
        return Err(Error::NegativeConcentration(c1));
    }
    if c2 < 0.0 {
        return Err(Error::NegativeConcentration(c2));
    }
    Ok(monod(c1, c2, m1, m2))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReactionOutcome {
    /// Concentration change per species and site.
    pub delta: Vec<Vec<f64>>,
    /// Total concentration removed by clipping at zero.
    pub clipped: f64,
}

/// Explicit Euler reaction step `c' = c + dt R(c, theta)` for two species.
///
/// Results below zero are clipped and the deficit is reported. For the
/// bimolecular system the transferred amount is capped by `c1` so that
/// `c1 + c2` stays unchanged.
pub fn react_step(conc: &mut [Vec<f64>], theta: Option<&[f64]>, system: &ReactionSystem, dt: f64) -> ReactionOutcome {
    let sites = conc.first().map_or(0, Vec::len);
    let mut out = ReactionOutcome {
        delta: vec![vec![0.0; sites]; conc.len()],
        clipped: 0.0,
    };
    if matches!(system, ReactionSystem::None) || conc.len() < 2 {
        return out;
    }
    let (first, rest) = conc.split_at_mut(1);
    let (c1, c2) = (&mut first[0], &mut rest[0]);
    for s in 0..sites {
        let th = theta.map_or(1.0, |t| t[s]);
        let (a, b) = (c1[s].max(0.0), c2[s].max(0.0));
        let (r1, r2) = system.rates(a, b, th);
        let (mut n1, mut n2);
        if let ReactionSystem::Bimolecular { .. } = system {
            let mut moved = dt * r2;
            if moved > c1[s] {
                out.clipped += moved - c1[s];
                moved = c1[s].max(0.0);
            }
            n1 = c1[s] - moved;
            n2 = c2[s] + moved;
        } else {
            n1 = c1[s] + dt * r1;
            n2 = c2[s] + dt * r2;
            if n1 < 0.0 {
                out.clipped -= n1;
                n1 = 0.0;
            }
            if n2 < 0.0 {
                out.clipped -= n2;
                n2 = 0.0;
            }
        }
        out.delta[0][s] = n1 - c1[s];
        out.delta[1][s] = n2 - c2[s];
        c1[s] = n1;
        c2[s] = n2;
    }
    out
}

/// Result of one coupled step.
#[derive(Clone, Debug)]
pub struct CoupledStep {
    pub field: ParticleField,
    pub record: JumpRecord,
    /// Reaction change in particles per species and site.
    pub reaction: Vec<Vec<f64>>,
    pub clipped: f64,
    /// Outer iterations of the unsaturated coupling (zero when saturated).
    pub iterations: usize,
    /// Faces whose diffusion was raised to keep the local Peclet number at 2.
    pub raised_faces: usize,
}

/// Saturated step: BGRW per species, mirror, reaction, reset.
#[allow(clippy::too_many_arguments)]
pub fn saturated_reactive_step<R: Rng + ?Sized>(
    field: &ParticleField,
    params: &TransportParams,
    system: &ReactionSystem,
    boundaries: &Boundaries,
    per_mole: f64,
    mode: SplitMode,
    rng: &mut R,
) -> Result<CoupledStep> {
    let (mut next, record) = bgrw_step(field, params, boundaries, mode, rng)?;
    let lattice = next.lattice.clone();
    for counts in next.counts.iter_mut() {
        mirror_sides(counts, &lattice, &boundaries.spec);
    }
    let mut conc: Vec<Vec<f64>> = next
        .counts
        .iter()
        .map(|c| c.iter().map(|v| v / per_mole).collect())
        .collect();
    let outcome = react_step(&mut conc, None, system, params.dt);
    for (counts, c) in next.counts.iter_mut().zip(&conc) {
        for (n, v) in counts.iter_mut().zip(c) {
            *n = v * per_mole;
        }
    }
    crate::lattice::apply_boundaries(&mut next, boundaries);
    let reaction = outcome
        .delta
        .iter()
        .map(|d| d.iter().map(|v| v * per_mole).collect())
        .collect();
    Ok(CoupledStep {
        field: next,
        record,
        reaction,
        clipped: outcome.clipped * per_mole,
        iterations: 0,
        raised_faces: 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledStepControl {
    /// Stabilization of the concentration L-iteration.
    pub l: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iterations: usize,
}

impl Default for CoupledStepControl {
    fn default() -> Self {
        Self {
            l: 1.0,
            rel_tol: 1e-6,
            abs_tol: 1e-14,
            max_iterations: 1000,
        }
    }
}

impl CoupledStepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !(self.rel_tol > 0.0 || self.abs_tol > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(format!("invalid coupling control {self:?}")));
        }
        Ok(())
    }
}

/// Jump probabilities for the water-content weighted walk.
///
/// With `n = theta c N`, the split
/// `p_up = dt/(theta h) (q_up/2 + D/h)`, `p_down = dt/(theta h) (-q_down/2 + D/h)`
/// reproduces the central finite-volume update of `theta c`. Faces where the
/// local Peclet number would exceed 2 use `D = |q| h / 2`.
pub fn unsaturated_odds(
    lattice: &LatticeSpec,
    theta: &[f64],
    flux: &[Vec<f64>],
    diffusion: f64,
    dt: f64,
) -> (Vec<JumpOdds>, usize) {
    let shape = lattice.shape();
    let dims = lattice.dims();
    let mut raised = 0usize;
    let mut face_d = vec![vec![diffusion; lattice.len()]; dims];
    for a in 0..dims {
        let h = lattice.axis(a).dx;
        for s in 0..lattice.len() {
            let q = flux[a][s].abs();
            if q * h > 2.0 * diffusion && lattice.unflat(s)[a] + 1 < shape[a] {
                face_d[a][s] = 0.5 * q * h;
                raised += 1;
            }
        }
    }
    let odds = (0..lattice.len())
        .map(|s| {
            let idx = lattice.unflat(s);
            let mut o = JumpOdds::default();
            for a in 0..dims {
                let h = lattice.axis(a).dx;
                let stride = if a == 0 { 1 } else { shape[0] };
                let has_up = idx[a] + 1 < shape[a];
                let has_down = idx[a] > 0;
                let up = if has_up { s } else { s - stride };
                let down = if has_down { s - stride } else { s };
                let k = dt / (theta[s] * h);
                // Raised faces are non-negative by construction; drop rounding residue.
                o.plus[a] = (k * (0.5 * flux[a][up] + face_d[a][up] / h)).max(0.0);
                o.minus[a] = (k * (-0.5 * flux[a][down] + face_d[a][down] / h)).max(0.0);
                o.unbiased[a] = k * diffusion / h;
            }
            o
        })
        .collect();
    (odds, raised)
}

/// Largest step keeping every stay probability non-negative.
pub fn unsaturated_max_dt(lattice: &LatticeSpec, theta: &[f64], flux: &[Vec<f64>], diffusion: f64) -> f64 {
    let (odds, _) = unsaturated_odds(lattice, theta, flux, diffusion, 1.0);
    odds.iter()
        .map(|o| o.plus.iter().chain(o.minus.iter()).sum::<f64>())
        .fold(f64::INFINITY, |m, rate| if rate > 0.0 { m.min(1.0 / rate) } else { m })
}

/// Variably saturated step coupling BGRW transport of `theta c N` particles
/// with an L-iteration on the reaction:
///
/// `c^{s+1} = c^s + (n*/N + dt R(c^s, theta') - theta' c^s) / L`
///
/// where `n*` are the transported counts and `theta'` the new water content.
/// Afterwards sides are mirrored in concentration space and reset sites are
/// restored to their stored concentrations.
#[allow(clippy::too_many_arguments)]
pub fn unsaturated_reactive_step<R: Rng + ?Sized>(
    conc: &[Vec<f64>],
    theta_old: &[f64],
    flow_new: &FlowState,
    lattice: &LatticeSpec,
    diffusion: f64,
    system: &ReactionSystem,
    dt: f64,
    control: &CoupledStepControl,
    boundaries: &Boundaries,
    per_mole: f64,
    mode: SplitMode,
    rng: &mut R,
) -> Result<CoupledStep> {
    control.validate()?;
    let n_sites = lattice.len();
    let mut field = ParticleField::zeros(lattice.clone(), conc.len());
    for (k, c) in conc.iter().enumerate() {
        for s in 0..n_sites {
            field.counts[k][s] = theta_old[s] * c[s] * per_mole;
        }
        field.total_initial[k] = field.counts[k].iter().sum();
    }
    let (odds, raised) = unsaturated_odds(lattice, theta_old, &flow_new.flux, diffusion, dt);
    let (moved, mut record) = biased_walk(&field, &|s| odds[s], boundaries, mode, rng, false)?;
    record.dt = dt;

    let theta = &flow_new.theta;
    let target: Vec<Vec<f64>> = moved
        .counts
        .iter()
        .map(|n| n.iter().map(|v| v / per_mole).collect())
        .collect();
    let mut c: Vec<Vec<f64>> = conc.to_vec();
    let mut iterations = 0;
    let species = c.len();
    loop {
        let mut next = c.clone();
        let mut inc = 0.0f64;
        let mut scale = 0.0f64;
        for s in 0..n_sites {
            let (r1, r2) = if species >= 2 {
                system.rates(c[0][s].max(0.0), c[1][s].max(0.0), theta[s])
            } else {
                (0.0, 0.0)
            };
            for k in 0..species {
                let r = match k {
                    0 => r1,
                    1 => r2,
                    _ => 0.0,
                };
                let v = c[k][s] + (target[k][s] + dt * r - theta[s] * c[k][s]) / control.l;
                inc = inc.max((v - c[k][s]).abs());
                scale = scale.max(v.abs());
                next[k][s] = v;
            }
        }
        c = next;
        iterations += 1;
        if inc <= control.rel_tol * scale + control.abs_tol {
            break;
        }
        if iterations >= control.max_iterations {
            return Err(Error::NonConvergence {
                solver: "reactive L-iteration",
                iterations,
                residual: inc,
            });
        }
    }

    let mut clipped = 0.0;
    for ck in c.iter_mut() {
        for v in ck.iter_mut() {
            if *v < 0.0 {
                clipped -= *v;
                *v = 0.0;
            }
        }
    }
    let mut reaction = vec![vec![0.0; n_sites]; species];
    if species >= 2 {
        for s in 0..n_sites {
            let (r1, r2) = system.rates(c[0][s], c[1][s], theta[s]);
            reaction[0][s] = dt * r1 * per_mole;
            reaction[1][s] = dt * r2 * per_mole;
        }
    }
    for ck in c.iter_mut() {
        mirror_sides(ck, lattice, &boundaries.spec);
    }
    for (j, &s) in boundaries.reset_sites().iter().enumerate() {
        for (k, ck) in c.iter_mut().enumerate() {
            ck[s] = boundaries.stored(k)[j];
        }
    }
    let mut out = ParticleField::zeros(lattice.clone(), species);
    out.total_initial = field.total_initial.clone();
    for k in 0..species {
        for s in 0..n_sites {
            out.counts[k][s] = theta[s] * c[k][s] * per_mole;
        }
    }
    Ok(CoupledStep {
        field: out,
        record,
        reaction,
        clipped: clipped * per_mole,
        iterations,
        raised_faces: raised,
    })
}

/// Concentrations `n / (theta N)` of a particle field.
pub fn concentrations(field: &ParticleField, theta: Option<&[f64]>, per_mole: f64) -> Vec<Vec<f64>> {
    field
        .counts
        .iter()
        .map(|n| {
            n.iter()
                .enumerate()
                .map(|(s, v)| v / (theta.map_or(1.0, |t| t[s]) * per_mole))
                .collect()
        })
        .collect()
}
