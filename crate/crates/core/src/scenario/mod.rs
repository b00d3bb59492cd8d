//! Scenario configuration, time loop and drivers.

pub mod config;
pub mod drivers;
pub mod engine;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{ScenarioConfig, ScenarioId};
pub use drivers::{run, run_ensemble, run_scenario, run_sweep, run_verify};
pub use output::RunManifest;
pub use run::{simulate, RunResult};
