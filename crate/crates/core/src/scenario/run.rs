//! Building steppers from a configuration and collecting run results.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cgst::discrepancy;
use crate::error::{Error, Result};
use crate::grw::TransportParams;
use crate::lattice::{LatticeSpec, ParticleField};
use crate::random_field::{sample_ln_k, sample_velocity_1d, sample_velocity_2d, KraichnanSpec};
use crate::richards::{FlowProblem, LSchemeControl};

use super::config::ScenarioConfig;
use super::engine::{
    build_probes, run_loop, window_groups, FlowSnapshot, GroupInfo, RunStats, SaturatedStepper, Trace,
    UnsaturatedStepper,
};

/// Averages of one species in one window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSample {
    pub cgst: f64,
    pub volume: f64,
    pub moving: f64,
    pub fine: f64,
    pub velocity: [f64; 2],
    pub diffusion: [[f64; 2]; 2],
    pub generated: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub group: usize,
    /// Snapped window center.
    pub center: [f64; 2],
    pub t: f64,
    /// Effective half-widths after snapping.
    pub a: [f64; 2],
    pub tau: f64,
    pub species: Vec<SpeciesSample>,
}

/// Discrepancy between volume and CGST averages over one group at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub group: usize,
    pub t: f64,
    /// `e` per species; NaN when the CGST reference vanishes.
    pub e: Vec<f64>,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub groups: Vec<GroupInfo>,
    pub samples: Vec<SampleRow>,
    pub metrics: Vec<MetricRow>,
    pub flow: Vec<FlowSnapshot>,
    pub stats: RunStats,
    pub seconds: f64,
}

fn kraichnan(mean: f64, f: &super::config::RandomFieldConfig, seed: u64) -> KraichnanSpec {
    KraichnanSpec {
        mean,
        variance: f.variance,
        correlation_length: f.correlation_length,
        modes: f.modes,
        seed,
    }
}

/// Initial concentrations `[species][site]`.
pub fn initial_concentrations(cfg: &ScenarioConfig, lattice: &LatticeSpec) -> Result<Vec<Vec<f64>>> {
    cfg.species.iter().map(|s| s.initial(lattice)).collect()
}

/// Per-site velocity: a Kraichnan realization or the uniform mean.
pub fn velocity_field(cfg: &ScenarioConfig, lattice: &LatticeSpec, seed: u64) -> Result<Vec<[f64; 2]>> {
    let mut mean = [0.0; 2];
    for (m, v) in mean.iter_mut().zip(&cfg.transport.velocity) {
        *m = *v;
    }
    match &cfg.velocity_field {
        None => Ok(vec![mean; lattice.len()]),
        Some(f) => {
            if mean[1] != 0.0 {
                return Err(Error::Config("random velocity needs a mean along the first axis only".into()));
            }
            let spec = kraichnan(mean[0], f, seed);
            let r = if lattice.dims() == 1 {
                sample_velocity_1d(&spec, lattice)?
            } else {
                sample_velocity_2d(&spec, lattice)?
            };
            Ok(r.as_vectors())
        }
    }
}

/// One realization with the given seed.
pub fn simulate(cfg: &ScenarioConfig, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let lattice = cfg.lattice.build()?;
    let dims = lattice.dims();
    let conc = initial_concentrations(cfg, &lattice)?;
    let spec = cfg.boundaries.build(&lattice)?;
    let groups = window_groups(&lattice, &cfg.windows);
    let probes = build_probes(&lattice, &cfg.windows, &groups, conc.len())?;
    let t = &cfg.transport;

    let trace: Trace = match &cfg.flow {
        Some(flow) => {
            if t.diffusion.iter().any(|&d| d != t.diffusion[0]) {
                return Err(Error::Config("unsaturated transport needs isotropic diffusion".into()));
            }
            let k_sat = match &flow.conductivity_field {
                Some(f) => Some(sample_ln_k(&kraichnan(flow.soil.k_sat, f, seed), &lattice)?.components.remove(0)),
                None => None,
            };
            let problem = FlowProblem::column(lattice.clone(), flow.soil.clone(), k_sat)?;
            let psi: Vec<f64> = (0..lattice.len())
                .map(|s| flow.hydrostatic_reference - lattice.position(s)[dims - 1])
                .collect();
            let mut control = LSchemeControl::for_model(&flow.soil);
            if let Some(l) = flow.l {
                control.l = l;
            }
            control.rel_tol = flow.rel_tol;
            control.abs_tol = flow.abs_tol;
            control.max_iterations = flow.max_iterations;
            let mut stepper = UnsaturatedStepper::new(
                problem,
                psi,
                control,
                flow.bottom_head.clone(),
                flow.top_head.clone(),
                conc,
                t.diffusion[0],
                cfg.reaction.clone(),
                flow.coupling.unwrap_or_default(),
                spec,
                cfg.per_mole,
                cfg.mode,
                seed,
                flow.dt.min(t.dt),
            )?;
            run_loop(&mut stepper, probes, &cfg.windows.times, cfg.final_time, cfg.per_mole, &lattice)?
        }
        None => {
            let mut field = ParticleField::zeros(lattice.clone(), conc.len());
            for (k, c) in conc.iter().enumerate() {
                field.counts[k] = c.iter().map(|v| v * cfg.per_mole).collect();
                field.total_initial[k] = field.counts[k].iter().sum();
            }
            let mut diffusion = [0.0; 2];
            diffusion[..dims].copy_from_slice(&t.diffusion);
            let params = TransportParams {
                velocity: velocity_field(cfg, &lattice, seed)?,
                diffusion,
                dt: t.dt,
                jump: t.jump,
                allow_signed_split: t.allow_signed_split,
                raise_diffusion: t.raise_diffusion,
            };
            let mut stepper = SaturatedStepper::new(
                field,
                params,
                t.algorithm,
                cfg.reaction.clone(),
                spec,
                cfg.per_mole,
                cfg.mode,
                seed,
            )?;
            run_loop(&mut stepper, probes, &cfg.windows.times, cfg.final_time, cfg.per_mole, &lattice)?
        }
    };

    let mut samples = Vec::with_capacity(trace.probes.len());
    for p in &trace.probes {
        let up = p.acc.finalize(cfg.per_mole);
        let moving = p.moving.finalize(cfg.per_mole)?;
        let volume = p
            .volume
            .clone()
            .ok_or_else(|| Error::History(format!("no snapshot at t = {}", up.window.t)))?;
        let fine = p.fine.clone().unwrap_or_default();
        let w = &up.window;
        let species = up
            .species
            .iter()
            .enumerate()
            .map(|(k, avg)| SpeciesSample {
                cgst: avg.concentration,
                volume: volume[k],
                moving: moving[k],
                fine: fine[k],
                velocity: avg.velocity(),
                diffusion: avg.diffusion(),
                generated: avg.generated / cfg.per_mole,
            })
            .collect();
        samples.push(SampleRow {
            group: p.group,
            center: w.center,
            t: w.t,
            a: w.a,
            tau: w.tau,
            species,
        });
    }
    let metrics = metrics_of(&samples, groups.len(), &cfg.windows.times);
    Ok(RunResult {
        seed,
        groups,
        samples,
        metrics,
        flow: trace.flow,
        stats: trace.stats,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `e` and `epsilon` per group and sampling time.
pub fn metrics_of(samples: &[SampleRow], groups: usize, times: &[f64]) -> Vec<MetricRow> {
    let species = samples.first().map_or(0, |s| s.species.len());
    let mut out = Vec::new();
    for g in 0..groups {
        for &t in times {
            let rows: Vec<&SampleRow> = samples.iter().filter(|s| s.group == g && s.t == t).collect();
            let mut e = Vec::with_capacity(species);
            let mut eps = Vec::with_capacity(species);
            for k in 0..species {
                let vol: Vec<f64> = rows.iter().map(|r| r.species[k].volume).collect();
                let cg: Vec<f64> = rows.iter().map(|r| r.species[k].cgst).collect();
                let (a, b) = discrepancy(&vol, &cg).unwrap_or((f64::NAN, f64::NAN));
                e.push(a);
                eps.push(b);
            }
            out.push(MetricRow { group: g, t, e, eps });
        }
    }
    out
}

/// Mean over realizations of every sample field; metrics are recomputed from the means.
pub fn ensemble_mean(results: &[RunResult], times: &[f64]) -> Result<RunResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::Config("ensemble needs at least one realization".into()))?;
    let n = results.len() as f64;
    let mut samples = first.samples.clone();
    for (i, row) in samples.iter_mut().enumerate() {
        for (k, sp) in row.species.iter_mut().enumerate() {
            let mut acc = SpeciesSample::default();
            for r in results {
                let s = &r.samples[i].species[k];
                acc.cgst += s.cgst / n;
                acc.volume += s.volume / n;
                acc.moving += s.moving / n;
                acc.fine += s.fine / n;
                acc.generated += s.generated / n;
                for a in 0..2 {
                    acc.velocity[a] += s.velocity[a] / n;
                    for b in 0..2 {
                        acc.diffusion[a][b] += s.diffusion[a][b] / n;
                    }
                }
            }
            *sp = acc;
        }
    }
    let metrics = metrics_of(&samples, first.groups.len(), times);
    Ok(RunResult {
        seed: first.seed,
        groups: first.groups.clone(),
        samples,
        metrics,
        flow: Vec::new(),
        stats: RunStats::default(),
        seconds: results.iter().map(|r| r.seconds).sum(),
    })
}
