//! CSV and manifest writers. Floats carry 17 significant digits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::config::ScenarioConfig;
use super::engine::RunStats;
use super::run::RunResult;

pub const SAMPLES_HEADER: [&str; 19] = [
    "group", "x", "y", "t", "a_x", "a_y", "tau", "species", "cgst", "volume", "moving", "fine", "u", "v", "D11",
    "D12", "D21", "D22", "generated",
];
pub const PROFILES_HEADER: [&str; 8] = ["x", "y", "time", "species", "fine", "moving", "volume", "cgst"];
pub const FLOW_HEADER: [&str; 7] = ["x", "z", "time", "psi", "theta", "q_x", "q_z"];

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn metrics_header(species: usize, grouped: bool) -> Vec<String> {
    let mut h = Vec::new();
    if grouped {
        h.push("line".to_string());
    }
    h.push("t".to_string());
    for k in 1..=species {
        h.push(format!("e_c{k}"));
        h.push(format!("eps_c{k}"));
    }
    h
}

/// Write samples, profiles, metrics and (if present) flow files; returns their names.
pub fn write_run(dir: &Path, result: &RunResult, species_names: &[String]) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let mut w = writer(&dir.join("samples.csv"))?;
    w.write_record(SAMPLES_HEADER)?;
    let mut p = writer(&dir.join("profiles.csv"))?;
    p.write_record(PROFILES_HEADER)?;
    for row in &result.samples {
        for (k, s) in row.species.iter().enumerate() {
            let name = species_names.get(k).cloned().unwrap_or_else(|| format!("c{}", k + 1));
            w.write_record([
                row.group.to_string(),
                fmt(row.center[0]),
                fmt(row.center[1]),
                fmt(row.t),
                fmt(row.a[0]),
                fmt(row.a[1]),
                fmt(row.tau),
                name.clone(),
                fmt(s.cgst),
                fmt(s.volume),
                fmt(s.moving),
                fmt(s.fine),
                fmt(s.velocity[0]),
                fmt(s.velocity[1]),
                fmt(s.diffusion[0][0]),
                fmt(s.diffusion[0][1]),
                fmt(s.diffusion[1][0]),
                fmt(s.diffusion[1][1]),
                fmt(s.generated),
            ])?;
            p.write_record([
                fmt(row.center[0]),
                fmt(row.center[1]),
                fmt(row.t),
                name,
                fmt(s.fine),
                fmt(s.moving),
                fmt(s.volume),
                fmt(s.cgst),
            ])?;
        }
    }
    w.flush()?;
    p.flush()?;
    files.push("samples.csv".to_string());
    files.push("profiles.csv".to_string());

    let grouped = result.groups.len() > 1;
    let mut m = writer(&dir.join("metrics.csv"))?;
    m.write_record(metrics_header(species_names.len(), grouped))?;
    for row in &result.metrics {
        let mut rec = Vec::new();
        if grouped {
            rec.push(result.groups[row.group].label.clone());
        }
        rec.push(fmt(row.t));
        for (e, eps) in row.e.iter().zip(&row.eps) {
            rec.push(fmt(*e));
            rec.push(fmt(*eps));
        }
        m.write_record(rec)?;
    }
    m.flush()?;
    files.push("metrics.csv".to_string());

    if !result.flow.is_empty() {
        let mut f = writer(&dir.join("flow.csv"))?;
        f.write_record(FLOW_HEADER)?;
        for snap in &result.flow {
            for (s, q) in snap.site_flux.iter().enumerate() {
                let (x, z, qx, qz) = match snap.state.flux.len() {
                    1 => (0.0, snap.position[s][0], 0.0, q[0]),
                    _ => (snap.position[s][0], snap.position[s][1], q[0], q[1]),
                };
                f.write_record([
                    fmt(x),
                    fmt(z),
                    fmt(snap.t),
                    fmt(snap.state.psi[s]),
                    fmt(snap.state.theta[s]),
                    fmt(qx),
                    fmt(qz),
                ])?;
            }
        }
        f.flush()?;
        files.push("flow.csv".to_string());
    }
    Ok(files)
}

/// Effective window scales after snapping to the lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedWindows {
    pub a: [f64; 2],
    pub tau: f64,
    pub windows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub version: String,
    pub status: String,
    pub config: ScenarioConfig,
    pub resolved: Option<ResolvedWindows>,
    pub seeds: Vec<u64>,
    pub seconds: Vec<f64>,
    pub stats: Vec<RunStats>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            scenario: config.scenario.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: "running".to_string(),
            config: config.clone(),
            resolved: None,
            seeds: Vec::new(),
            seconds: Vec::new(),
            stats: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, result: &RunResult) {
        self.seeds.push(result.seed);
        self.seconds.push(result.seconds);
        self.stats.push(result.stats.clone());
        if self.resolved.is_none() {
            if let Some(first) = result.samples.first() {
                self.resolved = Some(ResolvedWindows {
                    a: first.a,
                    tau: first.tau,
                    windows: result.samples.len(),
                });
            }
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?)
    }
}
