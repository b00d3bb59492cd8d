//! Checked-in scenario configurations.

use crate::error::{Error, Result};

use super::config::ScenarioConfig;

/// `(name, TOML text)`; `-desk` variants are coarser or smaller for quick runs.
pub const PRESETS: [(&str, &str); 11] = [
    ("verify-1d", include_str!("../../presets/verify-1d.toml")),
    ("verify-2d", include_str!("../../presets/verify-2d.toml")),
    ("bimolecular-1d", include_str!("../../presets/bimolecular-1d.toml")),
    ("aquifer-1d", include_str!("../../presets/aquifer-1d.toml")),
    ("aquifer-1d-desk", include_str!("../../presets/aquifer-1d-desk.toml")),
    ("soil-1d", include_str!("../../presets/soil-1d.toml")),
    ("sweep", include_str!("../../presets/sweep.toml")),
    ("soil-2d", include_str!("../../presets/soil-2d.toml")),
    ("soil-2d-desk", include_str!("../../presets/soil-2d-desk.toml")),
    ("aquifer-2d", include_str!("../../presets/aquifer-2d.toml")),
    ("aquifer-2d-desk", include_str!("../../presets/aquifer-2d-desk.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::from_toml(text(name)?)
}
