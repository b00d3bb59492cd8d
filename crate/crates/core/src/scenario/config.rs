//! Scenario configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grw::{Algorithm, SplitMode};
use crate::lattice::{BoundarySpec, LatticeSpec, SideRule};
use crate::reactive::{CoupledStepControl, ReactionSystem};
use crate::richards::SoilModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    #[serde(rename = "verify-1d")]
    Verify1d,
    #[serde(rename = "bimolecular-1d")]
    Bimolecular1d,
    #[serde(rename = "aquifer-1d")]
    Aquifer1d,
    #[serde(rename = "soil-1d")]
    Soil1d,
    #[serde(rename = "verify-2d")]
    Verify2d,
    #[serde(rename = "soil-2d")]
    Soil2d,
    #[serde(rename = "aquifer-2d")]
    Aquifer2d,
    #[serde(rename = "sweep")]
    Sweep,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        Self::Verify1d,
        Self::Bimolecular1d,
        Self::Aquifer1d,
        Self::Soil1d,
        Self::Verify2d,
        Self::Soil2d,
        Self::Aquifer2d,
        Self::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Verify1d => "verify-1d",
            Self::Bimolecular1d => "bimolecular-1d",
            Self::Aquifer1d => "aquifer-1d",
            Self::Soil1d => "soil-1d",
            Self::Verify2d => "verify-2d",
            Self::Soil2d => "soil-2d",
            Self::Aquifer2d => "aquifer-2d",
            Self::Sweep => "sweep",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{name}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub dx: Vec<f64>,
}

impl LatticeConfig {
    pub fn build(&self) -> Result<LatticeSpec> {
        LatticeSpec::from_bounds(&self.lower, &self.upper, &self.dx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Mean velocity per axis.
    #[serde(default)]
    pub velocity: Vec<f64>,
    pub diffusion: Vec<f64>,
    /// Nominal time step; unsaturated runs may shorten it.
    pub dt: f64,
    #[serde(default = "one")]
    pub jump: u32,
    #[serde(default)]
    pub allow_signed_split: bool,
    #[serde(default)]
    pub raise_diffusion: bool,
}

fn one() -> u32 {
    1
}

/// Kraichnan parameters shared by velocity and conductivity fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFieldConfig {
    pub variance: f64,
    pub correlation_length: f64,
    #[serde(default = "hundred")]
    pub modes: usize,
}

fn hundred() -> usize {
    100
}

/// Axis-aligned box in lattice coordinates, bounds included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn sites(&self, lattice: &LatticeSpec) -> Result<Vec<usize>> {
        if self.lower.len() != lattice.dims() || self.upper.len() != lattice.dims() {
            return Err(Error::Config("region dimension does not match the lattice".into()));
        }
        Ok(lattice.sites_in_box(&self.lower, &self.upper))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub name: String,
    /// Moles spread uniformly over the region (exclusive with `value`).
    #[serde(default)]
    pub moles: Option<f64>,
    /// Concentration per site inside the region.
    #[serde(default)]
    pub value: Option<f64>,
    /// Region holding the species; the whole lattice when absent.
    #[serde(default)]
    pub region: Option<Region>,
    /// Concentration outside the region.
    #[serde(default)]
    pub outside: f64,
}

impl SpeciesConfig {
    /// Initial concentration per site.
    pub fn initial(&self, lattice: &LatticeSpec) -> Result<Vec<f64>> {
        let inside: Vec<usize> = match &self.region {
            Some(r) => r.sites(lattice)?,
            None => (0..lattice.len()).collect(),
        };
        if inside.is_empty() {
            return Err(Error::Config(format!("species `{}` has an empty region", self.name)));
        }
        let v = match (self.moles, self.value) {
            (Some(m), None) => m / inside.len() as f64,
            (None, Some(v)) => v,
            _ => {
                return Err(Error::Config(format!(
                    "species `{}` needs exactly one of `moles` and `value`",
                    self.name
                )))
            }
        };
        if v < 0.0 || self.outside < 0.0 {
            return Err(Error::Config(format!("species `{}` has a negative concentration", self.name)));
        }
        let mut c = vec![self.outside; lattice.len()];
        for s in inside {
            c[s] = v;
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub sides: Vec<[SideRule; 2]>,
    #[serde(default)]
    pub reset_regions: Vec<Region>,
}

impl BoundaryConfig {
    pub fn build(&self, lattice: &LatticeSpec) -> Result<BoundarySpec> {
        let reset_regions = self
            .reset_regions
            .iter()
            .map(|r| r.sites(lattice))
            .collect::<Result<Vec<_>>>()?;
        let spec = BoundarySpec {
            sides: self.sides.clone(),
            reset_regions,
        };
        spec.validate(lattice)?;
        Ok(spec)
    }
}

/// Sampling line: windows with the coordinate along `axis` fixed at `at`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub axis: usize,
    pub at: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub a: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    /// Explicit centers per axis (Cartesian product); tiled when absent.
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
    /// 2D sampling lines; each forms its own metric group.
    #[serde(default)]
    pub lines: Vec<LineConfig>,
}

/// Piecewise-linear schedule of `(time, value)` pairs, constant outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<[f64; 2]>);

impl Schedule {
    pub fn at(&self, t: f64) -> f64 {
        let p = &self.0;
        if t <= p[0][0] {
            return p[0][1];
        }
        for w in p.windows(2) {
            let ([t0, v0], [t1, v1]) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        p[p.len() - 1][1]
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.0.is_empty() || self.0.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::Config(format!("{what} schedule must be non-empty with increasing times")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub soil: SoilModel,
    /// Random saturated conductivity with mean `soil.k_sat`.
    #[serde(default)]
    pub conductivity_field: Option<RandomFieldConfig>,
    /// Nominal flow time step.
    pub dt: f64,
    /// Initial head `psi = reference - z`.
    #[serde(default)]
    pub hydrostatic_reference: f64,
    pub bottom_head: Schedule,
    pub top_head: Schedule,
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iterations: usize,
    #[serde(default)]
    pub coupling: Option<CoupledStepControl>,
}

fn default_rel_tol() -> f64 {
    1e-6
}

fn default_abs_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    1000
}

/// Repeated runs over lattice spacings and algorithms (verification).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub dx: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
}

/// Repeated runs over window scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `tau` values at the base `a`.
    pub taus: Vec<f64>,
    /// `a` values at the base `tau`.
    pub a_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub mode: SplitMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub ensemble: usize,
    /// Particles per mole.
    pub per_mole: f64,
    pub final_time: f64,
    pub lattice: LatticeConfig,
    pub transport: TransportConfig,
    #[serde(default)]
    pub velocity_field: Option<RandomFieldConfig>,
    #[serde(default)]
    pub reaction: ReactionSystem,
    pub species: Vec<SpeciesConfig>,
    pub boundaries: BoundaryConfig,
    pub windows: WindowConfig,
    #[serde(default)]
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one_usize() -> usize {
    1
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Check every field against the module preconditions.
    pub fn validate(&self) -> Result<()> {
        let lattice = self.lattice.build()?;
        let dims = lattice.dims();
        let t = &self.transport;
        if t.diffusion.len() != dims || (!t.velocity.is_empty() && t.velocity.len() != dims) {
            return Err(Error::Config("transport: velocity/diffusion need one entry per axis".into()));
        }
        if t.diffusion.iter().any(|&d| d < 0.0) || !(t.dt > 0.0) || t.jump == 0 {
            return Err(Error::Config("transport: need D >= 0, dt > 0, jump >= 1".into()));
        }
        if !(self.per_mole > 0.0) || !(self.final_time > 0.0) || self.ensemble == 0 {
            return Err(Error::Config("per_mole, final_time and ensemble must be positive".into()));
        }
        if self.species.is_empty() || self.species.len() > 2 {
            return Err(Error::Config("one or two species are supported".into()));
        }
        for s in &self.species {
            s.initial(&lattice)?;
        }
        if !matches!(self.reaction, ReactionSystem::None) && self.species.len() != 2 {
            return Err(Error::Config("reactions need exactly two species".into()));
        }
        self.reaction.validate()?;
        self.boundaries.build(&lattice)?;
        let w = &self.windows;
        if !(w.a > 0.0) || !(w.tau > 0.0) || w.times.is_empty() {
            return Err(Error::Config("windows: need a > 0, tau > 0 and sampling times".into()));
        }
        for &tm in &w.times {
            if tm - w.tau < -1e-9 || tm + w.tau > self.final_time + 1e-9 {
                return Err(Error::Config(format!(
                    "windows: [t - tau, t + tau] at t = {tm} leaves [0, {}]",
                    self.final_time
                )));
            }
        }
        if 2.0 * w.tau >= self.final_time {
            return Err(Error::Config("windows: tau must be below T/2".into()));
        }
        for line in &w.lines {
            if line.axis >= dims || dims < 2 {
                return Err(Error::Config("windows: sampling lines need a 2D lattice".into()));
            }
        }
        if let Some(c) = &w.centers {
            if c.len() != dims {
                return Err(Error::Config("windows: centers need one list per axis".into()));
            }
        }
        if let Some(v) = &self.velocity_field {
            if !(v.variance >= 0.0) || !(v.correlation_length > 0.0) || v.modes == 0 {
                return Err(Error::Config("velocity_field: invalid parameters".into()));
            }
        }
        if let Some(f) = &self.flow {
            f.soil.validate()?;
            f.bottom_head.validate("bottom head")?;
            f.top_head.validate("top head")?;
            if !(f.dt > 0.0) || f.l.is_some_and(|l| !(l > 0.0)) {
                return Err(Error::Config("flow: need dt > 0 and L > 0".into()));
            }
            if let Some(c) = &f.coupling {
                c.validate()?;
            }
        }
        if let Some(v) = &self.verify {
            if v.dx.is_empty() || v.algorithms.is_empty() {
                return Err(Error::Config("verify: need spacings and algorithms".into()));
            }
        }
        if self.scenario == ScenarioId::Sweep && self.sweep.is_none() {
            return Err(Error::Config("sweep needs a [sweep] table".into()));
        }
        Ok(())
    }
}
