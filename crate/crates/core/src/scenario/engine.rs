//! Event-aligned time loop feeding CGST probes from a stepper.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cgst::{tile_centers, volume_average, AveragingWindow, CgstAccumulator, MovingAverage};
use crate::error::{Error, Result};
use crate::grw::{grw_step, Algorithm, JumpRecord, SplitMode, TransportParams};
use crate::lattice::{apply_boundaries, mirror_sides, Boundaries, BoundarySpec, LatticeSpec, ParticleField};
use crate::reactive::{
    saturated_reactive_step, unsaturated_max_dt, unsaturated_odds, unsaturated_reactive_step, CoupledStepControl,
    ReactionSystem,
};
use crate::richards::{l_scheme_flow_step, DirichletValues, FlowProblem, FlowState, LSchemeControl};

use super::config::{Schedule, WindowConfig};

/// Steps shorter than this fraction of the nominal step are merged into the
/// preceding one when approaching an event.
const EVENT_SLACK: f64 = 1e-6;

pub struct StepOutput {
    pub dt: f64,
    pub record: JumpRecord,
    pub reaction: Option<Vec<Vec<f64>>>,
    pub clipped: f64,
    pub flow_iterations: Option<(usize, Vec<f64>)>,
    pub coupling_iterations: Option<usize>,
    pub raised_faces: usize,
}

pub trait Stepper {
    /// Particle counts `[species][site]` at the current time.
    fn counts(&self) -> &[Vec<f64>];
    /// Advance by at most `cap`.
    fn step(&mut self, t: f64, cap: f64) -> Result<StepOutput>;
    fn flow(&self) -> Option<(&FlowProblem, &FlowState)> {
        None
    }
}

/// Step length: the nominal one, or the remainder up to the next event.
fn event_dt(nominal: f64, cap: f64) -> f64 {
    if cap <= nominal * (1.0 + EVENT_SLACK) {
        cap
    } else {
        nominal
    }
}

pub struct SaturatedStepper {
    pub field: ParticleField,
    pub params: TransportParams,
    pub algorithm: Algorithm,
    pub system: ReactionSystem,
    pub boundaries: Boundaries,
    pub per_mole: f64,
    pub mode: SplitMode,
    pub rng: ChaCha8Rng,
    nominal: f64,
}

impl SaturatedStepper {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        field: ParticleField,
        params: TransportParams,
        algorithm: Algorithm,
        system: ReactionSystem,
        spec: BoundarySpec,
        per_mole: f64,
        mode: SplitMode,
        seed: u64,
    ) -> Result<Self> {
        if algorithm == Algorithm::Grw && !matches!(system, ReactionSystem::None) {
            return Err(Error::Config("reactions are coupled with the BGRW algorithm only".into()));
        }
        let boundaries = Boundaries::capture(spec, &field)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let nominal = params.dt;
        Ok(Self {
            field,
            params,
            algorithm,
            system,
            boundaries,
            per_mole,
            mode,
            rng,
            nominal,
        })
    }
}

impl Stepper for SaturatedStepper {
    fn counts(&self) -> &[Vec<f64>] {
        &self.field.counts
    }

    fn step(&mut self, _t: f64, cap: f64) -> Result<StepOutput> {
        let dt = event_dt(self.nominal, cap);
        self.params.dt = dt;
        match self.algorithm {
            Algorithm::Bgrw => {
                let out = saturated_reactive_step(
                    &self.field,
                    &self.params,
                    &self.system,
                    &self.boundaries,
                    self.per_mole,
                    self.mode,
                    &mut self.rng,
                )?;
                self.field = out.field;
                let reacts = !matches!(self.system, ReactionSystem::None);
                Ok(StepOutput {
                    dt,
                    record: out.record,
                    reaction: reacts.then_some(out.reaction),
                    clipped: out.clipped,
                    flow_iterations: None,
                    coupling_iterations: None,
                    raised_faces: 0,
                })
            }
            Algorithm::Grw => {
                let (mut next, record) = grw_step(&self.field, &self.params, &self.boundaries, self.mode, &mut self.rng)?;
                let lattice = next.lattice.clone();
                for counts in next.counts.iter_mut() {
                    mirror_sides(counts, &lattice, &self.boundaries.spec);
                }
                apply_boundaries(&mut next, &self.boundaries);
                self.field = next;
                Ok(StepOutput {
                    dt,
                    record,
                    reaction: None,
                    clipped: 0.0,
                    flow_iterations: None,
                    coupling_iterations: None,
                    raised_faces: 0,
                })
            }
        }
    }
}

pub struct UnsaturatedStepper {
    pub problem: FlowProblem,
    pub flow: FlowState,
    pub flow_control: LSchemeControl,
    pub bottom: Schedule,
    pub top: Schedule,
    pub conc: Vec<Vec<f64>>,
    pub field: ParticleField,
    pub diffusion: f64,
    pub system: ReactionSystem,
    pub coupling: CoupledStepControl,
    pub boundaries: Boundaries,
    pub per_mole: f64,
    pub mode: SplitMode,
    pub rng: ChaCha8Rng,
    pub flow_dt: f64,
}

impl UnsaturatedStepper {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        problem: FlowProblem,
        initial_psi: Vec<f64>,
        flow_control: LSchemeControl,
        bottom: Schedule,
        top: Schedule,
        conc: Vec<Vec<f64>>,
        diffusion: f64,
        system: ReactionSystem,
        coupling: CoupledStepControl,
        spec: BoundarySpec,
        per_mole: f64,
        mode: SplitMode,
        seed: u64,
        flow_dt: f64,
    ) -> Result<Self> {
        let lattice = problem.lattice.clone();
        let flow = FlowState::new(&problem, 0.0, initial_psi);
        let reset = spec.reset_sites(&lattice);
        let stored = conc.iter().map(|c| reset.iter().map(|&s| c[s]).collect()).collect();
        let boundaries = Boundaries::with_profile(spec, &lattice, stored)?;
        let field = counts_of(&lattice, &conc, &flow.theta, per_mole);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(Self {
            problem,
            flow,
            flow_control,
            bottom,
            top,
            conc,
            field,
            diffusion,
            system,
            coupling,
            boundaries,
            per_mole,
            mode,
            rng,
            flow_dt,
        })
    }

    fn heads(&self, t: f64) -> DirichletValues {
        DirichletValues::vertical(self.problem.lattice.dims(), self.bottom.at(t), self.top.at(t))
    }
}

fn counts_of(lattice: &LatticeSpec, conc: &[Vec<f64>], theta: &[f64], per_mole: f64) -> ParticleField {
    let mut f = ParticleField::zeros(lattice.clone(), conc.len());
    for (k, c) in conc.iter().enumerate() {
        for s in 0..lattice.len() {
            f.counts[k][s] = theta[s] * c[s] * per_mole;
        }
        f.total_initial[k] = f.counts[k].iter().sum();
    }
    f
}

impl Stepper for UnsaturatedStepper {
    fn counts(&self) -> &[Vec<f64>] {
        &self.field.counts
    }

    fn flow(&self) -> Option<(&FlowProblem, &FlowState)> {
        Some((&self.problem, &self.flow))
    }

    fn step(&mut self, t: f64, cap: f64) -> Result<StepOutput> {
        let lattice = self.problem.lattice.clone();
        let bound = 0.95 * unsaturated_max_dt(&lattice, &self.flow.theta, &self.flow.flux, self.diffusion);
        let mut dt = event_dt(self.flow_dt.min(bound), cap);
        let (flow_new, report) = loop {
            let (next, report) =
                l_scheme_flow_step(&self.problem, &self.flow, &self.flow_control, &self.heads(t + dt), dt)?;
            let (odds, _) = unsaturated_odds(&lattice, &self.flow.theta, &next.flux, self.diffusion, dt);
            if odds.iter().all(|o| o.stay() >= 0.0) {
                break (next, report);
            }
            dt *= 0.5;
            if dt < 1e-12 * self.flow_dt {
                return Err(Error::NoAdmissibleStep("unsaturated transport step collapsed".into()));
            }
        };
        let out = unsaturated_reactive_step(
            &self.conc,
            &self.flow.theta,
            &flow_new,
            &lattice,
            self.diffusion,
            &self.system,
            dt,
            &self.coupling,
            &self.boundaries,
            self.per_mole,
            self.mode,
            &mut self.rng,
        )?;
        self.conc = out
            .field
            .counts
            .iter()
            .map(|n| {
                n.iter()
                    .zip(&flow_new.theta)
                    .map(|(v, th)| v / (th * self.per_mole))
                    .collect()
            })
            .collect();
        self.field = out.field;
        self.flow = flow_new;
        let reacts = !matches!(self.system, ReactionSystem::None);
        Ok(StepOutput {
            dt,
            record: out.record,
            reaction: reacts.then_some(out.reaction),
            clipped: out.clipped,
            flow_iterations: Some((report.iterations, report.increments)),
            coupling_iterations: Some(out.iterations),
            raised_faces: out.raised_faces,
        })
    }
}

/// One window at one sampling time.
pub struct Probe {
    pub group: usize,
    pub time_index: usize,
    pub acc: CgstAccumulator,
    pub moving: MovingAverage,
    pub volume: Option<Vec<f64>>,
    pub fine: Option<Vec<f64>>,
}

/// Group of window centers sharing a metric (a sampling line, or all windows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub label: String,
    pub centers: Vec<[f64; 2]>,
}

/// Window centers per group.
pub fn window_groups(lattice: &LatticeSpec, cfg: &WindowConfig) -> Vec<GroupInfo> {
    let dims = lattice.dims();
    let axis_list = |a: usize| -> Vec<f64> {
        match &cfg.centers {
            Some(c) => c[a].clone(),
            None => tile_centers(lattice.axis(a).lower, lattice.axis(a).upper, cfg.a),
        }
    };
    if cfg.lines.is_empty() {
        let xs = axis_list(0);
        let ys = if dims == 2 { axis_list(1) } else { vec![0.0] };
        let mut centers = Vec::new();
        for &y in &ys {
            for &x in &xs {
                centers.push([x, y]);
            }
        }
        return vec![GroupInfo {
            label: "all".into(),
            centers,
        }];
    }
    cfg.lines
        .iter()
        .map(|line| {
            let other = 1 - line.axis;
            let centers = axis_list(other)
                .into_iter()
                .map(|v| {
                    let mut c = [0.0; 2];
                    c[line.axis] = line.at;
                    c[other] = v;
                    c
                })
                .collect();
            GroupInfo {
                label: format!("{}={}", ["x", "y"][line.axis], line.at),
                centers,
            }
        })
        .collect()
}

pub fn build_probes(lattice: &LatticeSpec, cfg: &WindowConfig, groups: &[GroupInfo], species: usize) -> Result<Vec<Probe>> {
    let dims = lattice.dims();
    let mut probes = Vec::new();
    for (m, &t) in cfg.times.iter().enumerate() {
        for (g, group) in groups.iter().enumerate() {
            for c in &group.centers {
                let w = AveragingWindow::new(lattice, &c[..dims], cfg.a, t, cfg.tau)?;
                probes.push(Probe {
                    group: g,
                    time_index: m,
                    acc: CgstAccumulator::new(w.clone(), species),
                    moving: MovingAverage::new(w, species),
                    volume: None,
                    fine: None,
                });
            }
        }
    }
    Ok(probes)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub clipped: f64,
    pub flow_iterations_min: usize,
    pub flow_iterations_max: usize,
    pub flow_iterations_mean: f64,
    /// Steps whose L-scheme increments were not monotone after the third iteration.
    pub flow_nonmonotone_steps: usize,
    pub coupling_iterations_min: usize,
    pub coupling_iterations_max: usize,
    pub coupling_iterations_mean: f64,
    pub raised_faces_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSnapshot {
    pub t: f64,
    pub state: FlowState,
    pub position: Vec<[f64; 2]>,
    pub site_flux: Vec<[f64; 2]>,
}

pub struct Trace {
    pub probes: Vec<Probe>,
    pub flow: Vec<FlowSnapshot>,
    pub stats: RunStats,
}

/// Run the stepper to `final_time`, aligning steps with every window event.
pub fn run_loop<S: Stepper>(
    stepper: &mut S,
    mut probes: Vec<Probe>,
    times: &[f64],
    final_time: f64,
    per_mole: f64,
    lattice: &LatticeSpec,
) -> Result<Trace> {
    let eps = 1e-9 * final_time;
    let mut events: Vec<f64> = vec![final_time];
    for p in &probes {
        let w = &p.acc.window;
        events.extend([w.start(), w.t, w.end()]);
    }
    events.retain(|&e| e > eps && e <= final_time + eps);
    events.sort_by(|a, b| a.partial_cmp(b).expect("finite event times"));
    events.dedup_by(|a, b| (*a - *b).abs() <= eps);

    let mut stats = RunStats {
        min_dt: f64::INFINITY,
        flow_iterations_min: usize::MAX,
        coupling_iterations_min: usize::MAX,
        ..RunStats::default()
    };
    let (mut flow_sum, mut flow_n, mut coupling_sum, mut coupling_n) = (0usize, 0usize, 0usize, 0usize);
    let mut flow = Vec::new();
    if let Some((problem, state)) = stepper.flow() {
        if times.iter().any(|&t| t.abs() <= eps) {
            flow.push(snapshot(problem, state, 0.0));
        }
    }

    let mut t = 0.0;
    let mut k = 0u64;
    let mut ev = 0usize;
    while ev < events.len() {
        let next = events[ev];
        let cap = next - t;
        let moving_active = probes
            .iter()
            .any(|p| t >= p.moving.window.start() - eps && t < p.moving.window.end() - eps);
        let before = moving_active.then(|| stepper.counts().to_vec());
        let mut out = stepper.step(t, cap)?;
        let hit = out.dt >= cap * (1.0 - 1e-12);
        let t_new = if hit { next } else { t + out.dt };
        out.record.step = k;
        out.record.time = t;
        out.record.dt = out.dt;

        let after = stepper.counts();
        let mut field_after: Option<ParticleField> = None;
        for p in probes.iter_mut() {
            if p.acc.window.covers(t, out.dt) {
                let f = field_after.get_or_insert_with(|| ParticleField {
                    lattice: lattice.clone(),
                    counts: after.to_vec(),
                    total_initial: vec![0.0; after.len()],
                });
                p.acc.accumulate(lattice, &out.record, f)?;
                if let Some(r) = &out.reaction {
                    p.acc.accumulate_reaction(t, out.dt, r)?;
                }
                if let Some(b) = &before {
                    p.moving.add_step(t, out.dt, b, after);
                }
            }
        }
        if hit {
            for p in probes.iter_mut() {
                if (p.acc.window.t - next).abs() <= eps && p.volume.is_none() {
                    let f = field_after.get_or_insert_with(|| ParticleField {
                        lattice: lattice.clone(),
                        counts: after.to_vec(),
                        total_initial: vec![0.0; after.len()],
                    });
                    p.volume = Some(volume_average(f, &p.acc.window, per_mole));
                    let c = lattice.flat(p.acc.window.center_index);
                    p.fine = Some(f.counts.iter().map(|n| n[c] / per_mole).collect());
                }
            }
            if times.iter().any(|&tm| (tm - next).abs() <= eps) {
                if let Some((problem, state)) = stepper.flow() {
                    flow.push(snapshot(problem, state, next));
                }
            }
            ev += 1;
        }

        stats.steps += 1;
        stats.min_dt = stats.min_dt.min(out.dt);
        stats.max_dt = stats.max_dt.max(out.dt);
        stats.clipped += out.clipped;
        stats.raised_faces_max = stats.raised_faces_max.max(out.raised_faces);
        if let Some((it, inc)) = &out.flow_iterations {
            stats.flow_iterations_min = stats.flow_iterations_min.min(*it);
            stats.flow_iterations_max = stats.flow_iterations_max.max(*it);
            flow_sum += it;
            flow_n += 1;
            if inc.len() > 4 && inc[3..].windows(2).any(|w| w[1] > w[0]) {
                stats.flow_nonmonotone_steps += 1;
            }
        }
        if let Some(it) = out.coupling_iterations {
            stats.coupling_iterations_min = stats.coupling_iterations_min.min(it);
            stats.coupling_iterations_max = stats.coupling_iterations_max.max(it);
            coupling_sum += it;
            coupling_n += 1;
        }
        t = t_new;
        k += 1;
    }
    if flow_n == 0 {
        stats.flow_iterations_min = 0;
    } else {
        stats.flow_iterations_mean = flow_sum as f64 / flow_n as f64;
    }
    if coupling_n == 0 {
        stats.coupling_iterations_min = 0;
    } else {
        stats.coupling_iterations_mean = coupling_sum as f64 / coupling_n as f64;
    }
    if stats.steps == 0 {
        stats.min_dt = 0.0;
    }
    Ok(Trace { probes, flow, stats })
}

fn snapshot(problem: &FlowProblem, state: &FlowState, t: f64) -> FlowSnapshot {
    FlowSnapshot {
        t,
        state: state.clone(),
        position: (0..problem.lattice.len()).map(|s| problem.lattice.position(s)).collect(),
        site_flux: state.site_flux(&problem.lattice),
    }
}
