//! Randomized spectral (Kraichnan) fields with Gaussian correlation.
//!
//! A realization is `f(x) = sigma sqrt(2/N) sum_j cos(k_j . x + phi_j)` with
//! phases uniform on `[0, 2 pi)` and wavenumber components drawn from
//! `Normal(0, 2/lambda^2)`, so that `E[f(x) f(x + h)] = sigma^2 exp(-|h|^2/lambda^2)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KraichnanSpec {
    /// Mean velocity `U` or mean conductivity `K_sat`.
    pub mean: f64,
    /// Variance of the log-conductivity.
    pub variance: f64,
    pub correlation_length: f64,
    pub modes: usize,
    pub seed: u64,
}

impl KraichnanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0) || !(self.correlation_length > 0.0) || self.modes == 0 {
            return Err(Error::Config(format!(
                "invalid random field: variance {}, correlation length {}, {} modes",
                self.variance, self.correlation_length, self.modes
            )));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Wavenumbers and phases of one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct Modes {
    pub wavenumbers: Vec<[f64; 2]>,
    pub phases: Vec<f64>,
    /// `sigma sqrt(2/N)`
    pub amplitude: f64,
}

impl Modes {
    pub fn draw<R: Rng + ?Sized>(spec: &KraichnanSpec, dims: usize, rng: &mut R) -> Self {
        let sd = 2f64.sqrt() / spec.correlation_length;
        let normal = Normal::new(0.0, sd).expect("positive standard deviation");
        let mut wavenumbers = Vec::with_capacity(spec.modes);
        let mut phases = Vec::with_capacity(spec.modes);
        for _ in 0..spec.modes {
            let mut k = [0.0; 2];
            for v in k.iter_mut().take(dims) {
                *v = normal.sample(rng);
            }
            wavenumbers.push(k);
            phases.push(rng.random_range(0.0..2.0 * PI));
        }
        Self {
            wavenumbers,
            phases,
            amplitude: spec.variance.sqrt() * (2.0 / spec.modes as f64).sqrt(),
        }
    }

    #[inline]
    fn arg(&self, j: usize, x: [f64; 2]) -> f64 {
        let k = self.wavenumbers[j];
        k[0] * x[0] + k[1] * x[1] + self.phases[j]
    }

    /// Scalar Gaussian fluctuation with variance `sigma^2`.
    pub fn scalar(&self, x: [f64; 2]) -> f64 {
        self.amplitude * (0..self.phases.len()).map(|j| self.arg(j, x).cos()).sum::<f64>()
    }

    /// Divergence-free fluctuation of a unit mean flow along the first axis.
    ///
    /// Each mode is projected perpendicular to its wavenumber, which is the
    /// first-order solution of Darcy flow with a random log-conductivity.
    pub fn solenoidal(&self, x: [f64; 2]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for j in 0..self.phases.len() {
            let k = self.wavenumbers[j];
            let k2 = k[0] * k[0] + k[1] * k[1];
            if k2 == 0.0 {
                continue;
            }
            let c = self.arg(j, x).cos();
            u[0] += (1.0 - k[0] * k[0] / k2) * c;
            u[1] += (-k[1] * k[0] / k2) * c;
        }
        [self.amplitude * u[0], self.amplitude * u[1]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    /// `components[c][site]`; one component for scalar fields.
    pub components: Vec<Vec<f64>>,
    pub seed: u64,
}

impl FieldRealization {
    /// Per-site vectors `[u, v]` as used by the transport parameters.
    pub fn as_vectors(&self) -> Vec<[f64; 2]> {
        let n = self.components[0].len();
        (0..n)
            .map(|s| [self.components[0][s], self.components.get(1).map_or(0.0, |c| c[s])])
            .collect()
    }
}

/// `u(x) = U (1 + f(x))` on a 1D lattice.
pub fn sample_velocity_1d(spec: &KraichnanSpec, lattice: &LatticeSpec) -> Result<FieldRealization> {
    spec.validate()?;
    let modes = Modes::draw(spec, 1, &mut spec.rng());
    let u = (0..lattice.len())
        .map(|s| spec.mean * (1.0 + modes.scalar(lattice.position(s))))
        .collect();
    Ok(FieldRealization {
        components: vec![u],
        seed: spec.seed,
    })
}

/// Two-component incompressible velocity with mean `(U, 0)`.
pub fn sample_velocity_2d(spec: &KraichnanSpec, lattice: &LatticeSpec) -> Result<FieldRealization> {
    spec.validate()?;
    let modes = Modes::draw(spec, 2, &mut spec.rng());
    let mut u = Vec::with_capacity(lattice.len());
    let mut v = Vec::with_capacity(lattice.len());
    for s in 0..lattice.len() {
        let f = modes.solenoidal(lattice.position(s));
        u.push(spec.mean * (1.0 + f[0]));
        v.push(spec.mean * f[1]);
    }
    Ok(FieldRealization {
        components: vec![u, v],
        seed: spec.seed,
    })
}

/// Log-normal conductivity `K = K_sat exp(f - sigma^2/2)` with mean `K_sat`.
pub fn sample_ln_k(spec: &KraichnanSpec, lattice: &LatticeSpec) -> Result<FieldRealization> {
    spec.validate()?;
    let modes = Modes::draw(spec, lattice.dims(), &mut spec.rng());
    let shift = 0.5 * spec.variance;
    let k = (0..lattice.len())
        .map(|s| spec.mean * (modes.scalar(lattice.position(s)) - shift).exp())
        .collect();
    Ok(FieldRealization {
        components: vec![k],
        seed: spec.seed,
    })
}
