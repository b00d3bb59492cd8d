use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("step-size error on axis {axis}: r = {r} exceeds 1")]
    StepSize { axis: usize, r: f64 },

    #[error("Courant violation at site {site} (axis {axis}): |c| = {courant} > r = {r}")]
    Courant {
        site: usize,
        axis: usize,
        courant: f64,
        r: f64,
    },

    #[error("no admissible time step: {0}")]
    NoAdmissibleStep(String),

    #[error("invalid probabilities: {0}")]
    Probability(String),

    #[error("particles leave the lattice through a free side at site {site}")]
    OutOfRange { site: usize },

    #[error("record at t = {t} lies outside the averaging interval [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error("insufficient history: {0}")]
    History(String),

    #[error("undefined discrepancy: CGST vector is identically zero")]
    ZeroReference,

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("negative concentration: {0}")]
    NegativeConcentration(f64),

    #[error("{solver} did not converge after {iterations} iterations (last increment {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
