//! Variably saturated flow: van Genuchten-Mualem soil laws and an L-scheme
//! solver for the Richards equation in mixed form.
//!
//! The vertical coordinate `z` is the last lattice axis and points upwards.
//! Each step solves the backward Euler finite-volume system
//!
//! ```text
//! theta(psi) - theta^k = dt div(K grad psi) + dt d_z K
//! ```
//!
//! with face conductivities taken as arithmetic means of the nodal values.
//! The L-scheme replaces `theta(psi)` by `theta(psi^s) + L (psi^{s+1} - psi^s)`
//! and lags `K` at the previous iterate, leaving one symmetric linear solve per
//! iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoilModel {
    pub theta_res: f64,
    pub theta_sat: f64,
    pub alpha: f64,
    pub n: f64,
    pub k_sat: f64,
}

impl SoilModel {
    pub fn silt_loam() -> Self {
        Self {
            theta_res: 0.131,
            theta_sat: 0.396,
            alpha: 0.423,
            n: 2.06,
            k_sat: 4.96e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.theta_res
            && self.theta_res < self.theta_sat
            && self.theta_sat <= 1.0
            && self.n > 1.0
            && self.alpha > 0.0
            && self.k_sat > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid soil model {self:?}")))
        }
    }

    pub fn m(&self) -> f64 {
        1.0 - 1.0 / self.n
    }

    /// Normalized water content `Theta(psi)`.
    pub fn saturation(&self, psi: f64) -> f64 {
        if psi >= 0.0 {
            1.0
        } else {
            (1.0 + (-self.alpha * psi).powf(self.n)).powf(-self.m())
        }
    }

    pub fn theta(&self, psi: f64) -> f64 {
        self.theta_res + (self.theta_sat - self.theta_res) * self.saturation(psi)
    }

    /// Mualem relative conductivity as a function of `Theta`.
    pub fn relative_conductivity(&self, sat: f64) -> f64 {
        if sat >= 1.0 {
            return 1.0;
        }
        if sat <= 0.0 {
            return 0.0;
        }
        let m = self.m();
        let inner = 1.0 - (1.0 - sat.powf(1.0 / m)).powf(m);
        sat.sqrt() * inner * inner
    }

    /// Conductivity at pressure head `psi` for a local saturated value.
    pub fn conductivity_with(&self, psi: f64, k_sat: f64) -> f64 {
        if psi >= 0.0 {
            k_sat
        } else {
            k_sat * self.relative_conductivity(self.saturation(psi))
        }
    }

    pub fn conductivity(&self, psi: f64) -> f64 {
        self.conductivity_with(psi, self.k_sat)
    }

    /// Default stabilization `(theta_sat - theta_res) alpha n / 4`.
    pub fn default_l(&self) -> f64 {
        (self.theta_sat - self.theta_res) * self.alpha * self.n / 4.0
    }
}

pub fn theta_of_psi(psi: f64, model: &SoilModel) -> f64 {
    model.theta(psi)
}

pub fn k_of_theta(psi: f64, model: &SoilModel) -> f64 {
    model.conductivity(psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LSchemeControl {
    pub l: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iterations: usize,
}

impl LSchemeControl {
    pub fn for_model(model: &SoilModel) -> Self {
        Self {
            l: model.default_l(),
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_iterations: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !(self.rel_tol > 0.0 || self.abs_tol > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(format!("invalid L-scheme control {self:?}")));
        }
        Ok(())
    }
}

/// Side rule for the flow problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowSide {
    /// Prescribed pressure head on the whole side.
    Dirichlet,
    NoFlow,
}

/// Flow domain: lattice, soil, per-site saturated conductivity, side rules.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowProblem {
    pub lattice: LatticeSpec,
    pub model: SoilModel,
    pub k_sat: Vec<f64>,
    /// `sides[axis] = [lower, upper]`
    pub sides: Vec<[FlowSide; 2]>,
}

impl FlowProblem {
    /// Dirichlet bottom and top, no flow across vertical sides.
    pub fn column(lattice: LatticeSpec, model: SoilModel, k_sat: Option<Vec<f64>>) -> Result<Self> {
        model.validate()?;
        let k_sat = k_sat.unwrap_or_else(|| vec![model.k_sat; lattice.len()]);
        if k_sat.len() != lattice.len() || k_sat.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("saturated conductivity must be positive at every site".into()));
        }
        let mut sides = vec![[FlowSide::NoFlow; 2]; lattice.dims()];
        *sides.last_mut().expect("at least one axis") = [FlowSide::Dirichlet; 2];
        Ok(Self {
            lattice,
            model,
            k_sat,
            sides,
        })
    }

    fn vertical(&self) -> usize {
        self.lattice.dims() - 1
    }

    fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.lattice.shape()[0]
        }
    }

    /// Dirichlet value for a site, if it lies on a Dirichlet side.
    fn dirichlet(&self, s: usize, values: &DirichletValues) -> Option<f64> {
        let idx = self.lattice.unflat(s);
        let shape = self.lattice.shape();
        // Vertical sides are applied last so they own the corners.
        let mut out = None;
        for a in 0..self.lattice.dims() {
            for side in 0..2 {
                let on = if side == 0 { idx[a] == 0 } else { idx[a] == shape[a] - 1 };
                if on && self.sides[a][side] == FlowSide::Dirichlet {
                    out = Some(values.get(a, side));
                }
            }
        }
        out
    }

    pub fn conductivities(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter()
            .zip(&self.k_sat)
            .map(|(&p, &k)| self.model.conductivity_with(p, k))
            .collect()
    }

    pub fn water_content(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter().map(|&p| self.model.theta(p)).collect()
    }
}

/// Prescribed heads per Dirichlet side: `values[axis] = [lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletValues {
    pub values: Vec<[f64; 2]>,
}

impl DirichletValues {
    /// Bottom and top heads of a column.
    pub fn vertical(dims: usize, bottom: f64, top: f64) -> Self {
        let mut values = vec![[0.0; 2]; dims];
        values[dims - 1] = [bottom, top];
        Self { values }
    }

    fn get(&self, axis: usize, side: usize) -> f64 {
        self.values[axis][side]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub time: f64,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    /// `flux[axis][s]`: Darcy flux across the face between `s` and its upper
    /// neighbour along `axis` (zero where there is none).
    pub flux: Vec<Vec<f64>>,
}

impl FlowState {
    pub fn new(problem: &FlowProblem, time: f64, psi: Vec<f64>) -> Self {
        let theta = problem.water_content(&psi);
        let flux = darcy_flux(problem, &psi);
        Self { time, psi, theta, flux }
    }

    /// Site values of the flux, averaged from the adjacent faces.
    pub fn site_flux(&self, lattice: &LatticeSpec) -> Vec<[f64; 2]> {
        let shape = lattice.shape();
        (0..lattice.len())
            .map(|s| {
                let idx = lattice.unflat(s);
                let mut q = [0.0; 2];
                for (a, v) in q.iter_mut().enumerate().take(lattice.dims()) {
                    let stride = if a == 0 { 1 } else { shape[0] };
                    let up = (idx[a] + 1 < shape[a]).then(|| self.flux[a][s]);
                    let down = (idx[a] > 0).then(|| self.flux[a][s - stride]);
                    *v = match (down, up) {
                        (Some(d), Some(u)) => 0.5 * (d + u),
                        (Some(d), None) => d,
                        (None, Some(u)) => u,
                        (None, None) => 0.0,
                    };
                }
                q
            })
            .collect()
    }
}

/// Face fluxes `q = -K_face (d psi / dh + [vertical])`.
pub fn darcy_flux(problem: &FlowProblem, psi: &[f64]) -> Vec<Vec<f64>> {
    let lattice = &problem.lattice;
    let k = problem.conductivities(psi);
    let shape = lattice.shape();
    let vertical = problem.vertical();
    (0..lattice.dims())
        .map(|a| {
            let h = lattice.axis(a).dx;
            let stride = problem.stride(a);
            let gravity = if a == vertical { 1.0 } else { 0.0 };
            (0..lattice.len())
                .map(|s| {
                    if lattice.unflat(s)[a] + 1 >= shape[a] {
                        return 0.0;
                    }
                    let t = s + stride;
                    let kf = 0.5 * (k[s] + k[t]);
                    -kf * ((psi[t] - psi[s]) / h + gravity)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStepReport {
    pub iterations: usize,
    /// Max-norm of `psi^{s+1} - psi^s` per iteration.
    pub increments: Vec<f64>,
}

/// One implicit step of length `dt` with the L-scheme.
pub fn l_scheme_flow_step(
    problem: &FlowProblem,
    state: &FlowState,
    control: &LSchemeControl,
    boundary: &DirichletValues,
    dt: f64,
) -> Result<(FlowState, FlowStepReport)> {
    control.validate()?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("flow step dt = {dt}")));
    }
    let lattice = &problem.lattice;
    let n = lattice.len();
    let dims = lattice.dims();
    let vertical = problem.vertical();
    let shape = lattice.shape();
    let fixed: Vec<Option<f64>> = (0..n).map(|s| problem.dirichlet(s, boundary)).collect();

    let theta_old = &state.theta;
    let mut psi: Vec<f64> = state
        .psi
        .iter()
        .zip(&fixed)
        .map(|(&p, f)| f.unwrap_or(p))
        .collect();
    let mut report = FlowStepReport::default();

    let mut diag = vec![0.0; n];
    let mut weight = vec![vec![0.0; n]; dims];
    let mut rhs = vec![0.0; n];
    loop {
        let k = problem.conductivities(&psi);
        for s in 0..n {
            if let Some(v) = fixed[s] {
                diag[s] = 1.0;
                rhs[s] = v;
            } else {
                diag[s] = control.l;
                rhs[s] = control.l * psi[s] - problem.model.theta(psi[s]) + theta_old[s];
            }
        }
        for (a, w) in weight.iter_mut().enumerate() {
            let h = lattice.axis(a).dx;
            let stride = problem.stride(a);
            let g = if a == vertical { dt / h } else { 0.0 };
            for s in 0..n {
                w[s] = 0.0;
                if lattice.unflat(s)[a] + 1 >= shape[a] {
                    continue;
                }
                let t = s + stride;
                let kf = 0.5 * (k[s] + k[t]);
                let c = dt * kf / (h * h);
                // Gravity: + dt/h K_{+} at the lower site, - dt/h K_{-} at the upper one.
                if fixed[s].is_none() {
                    rhs[s] += g * kf;
                    diag[s] += c;
                }
                if fixed[t].is_none() {
                    rhs[t] -= g * kf;
                    diag[t] += c;
                }
                match (fixed[s], fixed[t]) {
                    (None, None) => w[s] = c,
                    (None, Some(v)) => rhs[s] += c * v,
                    (Some(v), None) => rhs[t] += c * v,
                    (Some(_), Some(_)) => {}
                }
            }
        }
        let next = if dims == 1 {
            solve_tridiagonal(&diag, &weight[0], &rhs)
        } else {
            let strides: Vec<usize> = (0..dims).map(|a| problem.stride(a)).collect();
            solve_pcg(&diag, &weight, &strides, &rhs, &psi)?
        };
        let inc = next
            .iter()
            .zip(&psi)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        psi = next;
        report.iterations += 1;
        report.increments.push(inc);
        if inc <= control.rel_tol * scale + control.abs_tol {
            break;
        }
        if report.iterations >= control.max_iterations {
            return Err(Error::NonConvergence {
                solver: "L-scheme flow",
                iterations: report.iterations,
                residual: inc,
            });
        }
    }
    Ok((FlowState::new(problem, state.time + dt, psi), report))
}

/// Symmetric tridiagonal solve: `diag_i x_i - w_{i-1} x_{i-1} - w_i x_{i+1} = b_i`.
fn solve_tridiagonal(diag: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = -w[0] / denom;
    d[0] = b[0] / denom;
    for i in 1..n {
        let sub = -w[i - 1];
        denom = diag[i] - sub * c[i - 1];
        c[i] = if i + 1 < n { -w[i] / denom } else { 0.0 };
        d[i] = (b[i] - sub * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn apply(diag: &[f64], weight: &[Vec<f64>], strides: &[usize], x: &[f64], y: &mut [f64]) {
    for (i, v) in y.iter_mut().enumerate() {
        *v = diag[i] * x[i];
    }
    for (w, &st) in weight.iter().zip(strides) {
        for s in 0..x.len() {
            let c = w[s];
            if c != 0.0 {
                y[s] -= c * x[s + st];
                y[s + st] -= c * x[s];
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients.
fn solve_pcg(diag: &[f64], weight: &[Vec<f64>], strides: &[usize], b: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = guess.to_vec();
    let mut ax = vec![0.0; n];
    apply(diag, weight, strides, &x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= 1e-15 * b_norm {
            return Ok(x);
        }
        apply(diag, weight, strides, &p, &mut ax);
        let pap: f64 = p.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r_norm <= 1e-10 * b_norm {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            solver: "conjugate gradients",
            iterations: max_iter,
            residual: r_norm / b_norm,
        })
    }
}
