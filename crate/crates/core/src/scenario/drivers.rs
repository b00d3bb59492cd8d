//! Entry points writing a full output directory per invocation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grw::Algorithm;

use super::config::{ScenarioConfig, ScenarioId};
use super::output::{fmt, write_run, RunManifest};
use super::run::{ensemble_mean, simulate, RunResult};

fn species_names(cfg: &ScenarioConfig) -> Vec<String> {
    cfg.species.iter().map(|s| s.name.clone()).collect()
}

/// Dispatch on the configuration: verification table, sweep, ensemble or single run.
pub fn run(cfg: &ScenarioConfig, out: &Path) -> Result<RunManifest> {
    if cfg.verify.is_some() {
        run_verify(cfg, out)
    } else if let Some(s) = &cfg.sweep {
        run_sweep(cfg, &s.taus, &s.a_values, out)
    } else if cfg.ensemble > 1 {
        run_ensemble(cfg, cfg.ensemble, out)
    } else {
        run_scenario(cfg, out)
    }
}

/// Single realization with the base seed.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new(cfg);
    match simulate(cfg, cfg.seed) {
        Ok(result) => {
            manifest.record(&result);
            manifest.outputs = write_run(out, &result, &species_names(cfg))?;
            manifest.outputs.push("manifest.json".into());
            manifest.status = "complete".into();
            manifest.write(out)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.write(out)?;
            Err(e)
        }
    }
}

/// Realizations with seeds `seed + i`, run in parallel.
///
/// Each realization writes `realization-NNN/`; ensemble means go to `out`.
pub fn run_ensemble(cfg: &ScenarioConfig, n: usize, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Config("ensemble size must be positive".into()));
    }
    if n == 1 {
        return run_scenario(cfg, out);
    }
    let names = species_names(cfg);
    let results: Vec<Result<RunResult>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let r = simulate(cfg, cfg.seed + i as u64)?;
            write_run(&out.join(format!("realization-{i:03}")), &r, &names)?;
            Ok(r)
        })
        .collect();
    let mut manifest = RunManifest::new(cfg);
    manifest.config.ensemble = n;
    let mut ok = Vec::new();
    let mut failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                manifest.record(&r);
                manifest.outputs.push(format!("realization-{i:03}/"));
                ok.push(r);
            }
            Err(e) => {
                failure.get_or_insert((i, e));
            }
        }
    }
    if let Some((i, e)) = failure {
        manifest.status = format!("failed at realization {i}: {e}");
        manifest.write(out)?;
        return Err(e);
    }
    let mean = ensemble_mean(&ok, &cfg.windows.times)?;
    let mut files = write_run(out, &mean, &names)?;
    files.extend(manifest.outputs.drain(..));
    manifest.outputs = files;
    manifest.outputs.push("manifest.json".into());
    manifest.status = "complete".into();
    manifest.write(out)?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// `"tau"` when tau varies at fixed a, `"a"` otherwise.
    pub vary: String,
    pub a: f64,
    pub tau: f64,
    pub result: RunResult,
}

/// Soil-column discrepancies over `tau` at the base `a` and over `a` at the base `tau`.
pub fn sweep_points(cfg: &ScenarioConfig, taus: &[f64], a_values: &[f64]) -> Result<Vec<SweepPoint>> {
    let base = cfg.windows.clone();
    let jobs: Vec<(String, f64, f64)> = taus
        .iter()
        .map(|&tau| ("tau".to_string(), base.a, tau))
        .chain(a_values.iter().map(|&a| ("a".to_string(), a, base.tau)))
        .collect();
    jobs.into_par_iter()
        .map(|(vary, a, tau)| {
            let mut c = cfg.clone();
            c.scenario = ScenarioId::Soil1d;
            c.sweep = None;
            c.windows.a = a;
            c.windows.tau = tau;
            c.windows.centers = None;
            let result = simulate(&c, c.seed)?;
            Ok(SweepPoint { vary, a, tau, result })
        })
        .collect()
}

pub fn run_sweep(cfg: &ScenarioConfig, taus: &[f64], a_values: &[f64], out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new(cfg);
    let points = match sweep_points(cfg, taus, a_values) {
        Ok(p) => p,
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.write(out)?;
            return Err(e);
        }
    };
    std::fs::create_dir_all(out)?;
    let names = species_names(cfg);
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header = vec!["vary".to_string(), "a".into(), "tau".into(), "t".into()];
    for k in 1..=names.len() {
        header.push(format!("e_c{k}"));
        header.push(format!("eps_c{k}"));
    }
    w.write_record(&header)?;
    for p in &points {
        manifest.record(&p.result);
        for m in &p.result.metrics {
            let mut rec = vec![p.vary.clone(), fmt(p.a), fmt(p.tau), fmt(m.t)];
            for (e, eps) in m.e.iter().zip(&m.eps) {
                rec.push(fmt(*e));
                rec.push(fmt(*eps));
            }
            w.write_record(&rec)?;
        }
        let dir = format!("{}-a{}-tau{}", p.vary, p.a, p.tau);
        write_run(&out.join(&dir), &p.result, &names)?;
        manifest.outputs.push(format!("{dir}/"));
    }
    w.flush()?;
    manifest.outputs.insert(0, "sweep.csv".into());
    manifest.outputs.push("manifest.json".into());
    manifest.status = "complete".into();
    manifest.write(out)?;
    Ok(manifest)
}

/// Recovered coefficients of one (dx, algorithm) verification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub dx: f64,
    pub algorithm: Algorithm,
    /// `(name, mean, standard deviation)` over all windows.
    pub quantities: Vec<(String, f64, f64)>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Configuration of one verification run: spacing `dx` on every axis, `dt = dx / |u|`.
pub fn verify_config(cfg: &ScenarioConfig, dx: f64, algorithm: Algorithm) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    c.verify = None;
    let dims = c.lattice.lower.len();
    c.lattice.dx = vec![dx; dims];
    let speed = c.transport.velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(speed > 0.0) {
        return Err(Error::Config("verification needs a nonzero velocity".into()));
    }
    c.transport.dt = dx / speed;
    c.transport.algorithm = algorithm;
    Ok(c)
}

pub fn verify_rows(cfg: &ScenarioConfig) -> Result<Vec<(VerifyRow, RunResult)>> {
    let v = cfg
        .verify
        .as_ref()
        .ok_or_else(|| Error::Config("missing [verify] table".into()))?;
    let jobs: Vec<(f64, Algorithm)> = v
        .dx
        .iter()
        .flat_map(|&dx| v.algorithms.iter().map(move |&a| (dx, a)))
        .collect();
    let dims = cfg.lattice.lower.len();
    jobs.into_par_iter()
        .map(|(dx, algorithm)| {
            let c = verify_config(cfg, dx, algorithm)?;
            let result = simulate(&c, c.seed)?;
            let pick = |f: &dyn Fn(&super::run::SpeciesSample) -> f64| -> Vec<f64> {
                result.samples.iter().map(|s| f(&s.species[0])).collect()
            };
            let mut quantities = vec![
                ("D11".to_string(), pick(&|s| s.diffusion[0][0])),
                ("u".to_string(), pick(&|s| s.velocity[0])),
            ];
            if dims == 2 {
                quantities.push(("D22".into(), pick(&|s| s.diffusion[1][1])));
                quantities.push(("D12".into(), pick(&|s| s.diffusion[0][1])));
                quantities.push(("D21".into(), pick(&|s| s.diffusion[1][0])));
                quantities.push(("v".into(), pick(&|s| s.velocity[1])));
            }
            let quantities = quantities
                .into_iter()
                .map(|(n, v)| {
                    let (m, s) = mean_std(&v);
                    (n, m, s)
                })
                .collect();
            Ok((
                VerifyRow {
                    dx,
                    algorithm,
                    quantities,
                },
                result,
            ))
        })
        .collect()
}

pub fn run_verify(cfg: &ScenarioConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new(cfg);
    let rows = match verify_rows(cfg) {
        Ok(r) => r,
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.write(out)?;
            return Err(e);
        }
    };
    std::fs::create_dir_all(out)?;
    let names = species_names(cfg);
    let mut w = csv::Writer::from_path(out.join("table.csv"))?;
    w.write_record(["dx", "algorithm", "quantity", "mean", "std"])?;
    for (row, result) in &rows {
        let alg = algorithm_name(row.algorithm);
        for (q, m, s) in &row.quantities {
            w.write_record([fmt(row.dx), alg.to_string(), q.clone(), fmt(*m), fmt(*s)])?;
        }
        manifest.record(result);
        let dir = format!("dx{}-{alg}", row.dx);
        write_run(&out.join(&dir), result, &names)?;
        manifest.outputs.push(format!("{dir}/"));
    }
    w.flush()?;
    manifest.outputs.insert(0, "table.csv".into());
    manifest.outputs.push("manifest.json".into());
    manifest.status = "complete".into();
    manifest.write(out)?;
    Ok(manifest)
}

pub fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Bgrw => "bgrw",
        Algorithm::Grw => "grw",
    }
}
