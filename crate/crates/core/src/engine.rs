//! Trajectory simulation, moving distance, Monte Carlo aggregation and
//! paired BC/PBC runs on shared randomness.

use rayon::prelude::*;
use thiserror::Error;

use crate::controllers::{bc_step, pbc_step, BcLocalState, ControlError};
use crate::gains::GainSchedule;
use crate::objectives::ObjectiveSpec;
use crate::rng::SignSource;
use crate::scalar::sum_squares;
use crate::state::{CollectiveState, StateError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    Bc,
    Pbc,
}

impl Law {
    pub fn as_str(&self) -> &'static str {
        match self {
            Law::Bc => "bc",
            Law::Pbc => "pbc",
        }
    }
}

/// Horizon convention for BC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Both laws run `T` steps.
    Figure,
    /// BC runs `2T` steps against PBC's `T`.
    Theorem,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Figure => "figure",
            Mode::Theorem => "theorem",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("trial {trial} diverged at step {step}: {reason}")]
    Diverged { trial: u64, step: u64, reason: String },
    #[error("paired runs need K = 1, got K = {0}")]
    PairedNeedsSingleSample(usize),
    #[error("all {0} trials diverged")]
    AllDiverged(u64),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("worker pool: {0}")]
    Workers(String),
}

/// Everything that determines a trial apart from its index.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub objective: ObjectiveSpec<T>,
    pub initial: CollectiveState<T>,
    pub law: Law,
    /// `K`; ignored by BC.
    pub samples: usize,
    /// `T`.
    pub steps: u64,
    pub schedule: GainSchedule<T>,
    pub signs: SignSource,
    pub mode: Mode,
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.initial.dim() != self.objective.dim()
            || self.initial.agents() != self.objective.agents()
        {
            return Err(EngineError::Scenario(format!(
                "initial state is n={}, N={} but the objective expects n={}, N={}",
                self.initial.dim(),
                self.initial.agents(),
                self.objective.dim(),
                self.objective.agents()
            )));
        }
        if self.law == Law::Pbc && self.samples == 0 {
            return Err(EngineError::Scenario("K must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of physical steps the selected law takes.
    pub fn horizon(&self) -> u64 {
        match (self.law, self.mode) {
            (Law::Bc, Mode::Theorem) => 2 * self.steps,
            _ => self.steps,
        }
    }

    pub fn with_law(&self, law: Law) -> Self {
        Self {
            law,
            ..self.clone()
        }
    }
}

/// One seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord<T> {
    pub law: Law,
    pub samples: usize,
    pub trial: u64,
    pub signs: SignSource,
    pub dim: usize,
    pub agents: usize,
    /// `(H + 1) * nN` values, row `t` is `x(t)`.
    pub states: Vec<T>,
    /// `J(x(t))` for `t = 0..=H`.
    pub cost: Vec<T>,
    /// `D(t)` for `t = 0..=H`.
    pub distance: Vec<T>,
    /// `H * nN` values, row `t` is `u(t)`.
    pub inputs: Vec<T>,
    /// Objective evaluations performed.
    pub evaluations: u64,
}

impl<T: Real> TrialRecord<T> {
    pub fn horizon(&self) -> u64 {
        (self.cost.len() - 1) as u64
    }

    pub fn state(&self, t: u64) -> &[T] {
        let w = self.dim * self.agents;
        let t = t as usize;
        &self.states[t * w..(t + 1) * w]
    }

    pub fn input(&self, t: u64) -> &[T] {
        let w = self.dim * self.agents;
        let t = t as usize;
        &self.inputs[t * w..(t + 1) * w]
    }
}

/// `D(t) = sum_{s<t} sum_i |u_i(s)|` for inputs stored row-major, `len`
/// values per step.
pub fn moving_distance<T: Real>(inputs: &[T], len: usize, dim: usize) -> Vec<T> {
    assert!(dim > 0 && len.is_multiple_of(dim), "bad layout");
    let steps = inputs.len().checked_div(len).unwrap_or(0);
    let mut d = Vec::with_capacity(steps + 1);
    let mut acc = T::zero();
    d.push(acc);
    for row in inputs.chunks_exact(len.max(1)).take(steps) {
        let mut step = T::zero();
        for u in row.chunks_exact(dim) {
            step += sum_squares(u).sqrt();
        }
        acc += step;
        d.push(acc);
    }
    d
}

fn diverged(trial: u64, step: u64, err: ControlError) -> EngineError {
    let reason = match err {
        ControlError::NonFiniteCost => "objective is not finite".to_string(),
        ControlError::State(StateError::NonFinite { index }) => {
            format!("state entry {index} is not finite")
        }
        other => other.to_string(),
    };
    EngineError::Diverged {
        trial,
        step,
        reason,
    }
}

struct Trace<T> {
    states: Vec<T>,
    cost: Vec<T>,
    inputs: Vec<T>,
    evaluations: u64,
}

fn simulate<T: Real>(
    scenario: &Scenario<T>,
    law: Law,
    horizon: u64,
    trial: u64,
) -> Result<Trace<T>, EngineError> {
    let objective = scenario.objective.bind_initial(scenario.initial.values());
    let cost = |x: &[T]| objective.value(x);
    let (dim, agents) = (scenario.initial.dim(), scenario.initial.agents());
    let len = dim * agents;
    let h = horizon as usize;
    let mut states = Vec::with_capacity((h + 1) * len);
    let mut costs = Vec::with_capacity(h + 1);
    let mut inputs = Vec::with_capacity(h * len);
    let mut evaluations = 0u64;
    let mut x = scenario.initial.clone();
    states.extend_from_slice(x.values());
    match law {
        Law::Pbc => {
            for t in 0..horizon {
                let block = scenario
                    .signs
                    .block(trial, t, dim, agents, scenario.samples);
                let step = pbc_step(&x, t, &scenario.schedule, &block, &cost)
                    .map_err(|e| diverged(trial, t, e))?;
                evaluations += scenario.samples as u64 + 1;
                costs.push(step.broadcast.base);
                inputs.extend_from_slice(&step.input);
                x = step.state;
                states.extend_from_slice(x.values());
            }
        }
        Law::Bc => {
            let mut local = BcLocalState::initial(len);
            let mut sigma: Vec<i8> = vec![0; len];
            for t in 0..horizon {
                if t % 2 == 0 {
                    let block = scenario.signs.block(trial, t / 2, dim, agents, 1);
                    sigma.copy_from_slice(block.sample(0));
                }
                let step = bc_step(&x, &local, t, &scenario.schedule, &sigma, &cost)
                    .map_err(|e| diverged(trial, t, e))?;
                evaluations += 1;
                costs.push(step.broadcast);
                inputs.extend_from_slice(&step.input);
                local = step.local;
                x = step.state;
                states.extend_from_slice(x.values());
            }
        }
    }
    let last = cost(x.values());
    evaluations += 1;
    if !last.is_finite() {
        return Err(diverged(trial, horizon, ControlError::NonFiniteCost));
    }
    costs.push(last);
    Ok(Trace {
        states,
        cost: costs,
        inputs,
        evaluations,
    })
}

fn record<T: Real>(
    scenario: &Scenario<T>,
    law: Law,
    trial: u64,
    trace: Trace<T>,
) -> TrialRecord<T> {
    let (dim, agents) = (scenario.initial.dim(), scenario.initial.agents());
    TrialRecord {
        law,
        samples: if law == Law::Bc { 1 } else { scenario.samples },
        trial,
        signs: scenario.signs,
        dim,
        agents,
        distance: moving_distance(&trace.inputs, dim * agents, dim),
        states: trace.states,
        cost: trace.cost,
        inputs: trace.inputs,
        evaluations: trace.evaluations,
    }
}

/// Runs the scenario's law for trial `trial`.
pub fn run_trial<T: Real>(scenario: &Scenario<T>, trial: u64) -> Result<TrialRecord<T>, EngineError> {
    scenario.validate()?;
    let trace = simulate(scenario, scenario.law, scenario.horizon(), trial)?;
    Ok(record(scenario, scenario.law, trial, trace))
}

/// BC over `2T` steps and PBC over `T` steps on the same sign stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRecords<T> {
    pub bc: TrialRecord<T>,
    pub pbc: TrialRecord<T>,
}

pub fn run_paired<T: Real>(
    scenario: &Scenario<T>,
    trial: u64,
) -> Result<PairedRecords<T>, EngineError> {
    if scenario.samples != 1 {
        return Err(EngineError::PairedNeedsSingleSample(scenario.samples));
    }
    let pbc_scenario = scenario.with_law(Law::Pbc);
    pbc_scenario.validate()?;
    let bc = simulate(scenario, Law::Bc, 2 * scenario.steps, trial)?;
    let pbc = simulate(scenario, Law::Pbc, scenario.steps, trial)?;
    Ok(PairedRecords {
        bc: record(scenario, Law::Bc, trial, bc),
        pbc: record(scenario, Law::Pbc, trial, pbc),
    })
}

/// Per-step mean and standard deviation across the trials that completed.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats<T> {
    pub trials: u64,
    pub cost_mean: Vec<T>,
    pub cost_sd: Vec<T>,
    pub distance_mean: Vec<T>,
    pub distance_sd: Vec<T>,
}

/// Mean and unbiased SD per column, rows taken in the given order. Values
/// are accumulated relative to the first row, so identical columns give an
/// exact mean and a zero SD.
fn column_stats<T: Real>(rows: &[&[T]]) -> (Vec<T>, Vec<T>) {
    let width = rows[0].len();
    let n = T::from_count(rows.len());
    let origin = rows[0];
    let mut shift = vec![T::zero(); width];
    for row in rows {
        for ((s, &v), &o) in shift.iter_mut().zip(row.iter()).zip(origin) {
            *s += v - o;
        }
    }
    let mean: Vec<T> = shift.iter().zip(origin).map(|(&s, &o)| o + s / n).collect();
    let mut sd = vec![T::zero(); width];
    if rows.len() > 1 {
        for row in rows {
            for ((s, &m), &v) in sd.iter_mut().zip(&mean).zip(row.iter()) {
                let d = v - m;
                *s += d * d;
            }
        }
        let dof = T::from_count(rows.len() - 1);
        sd.iter_mut().for_each(|s| *s = (*s / dof).sqrt());
    }
    (mean, sd)
}

impl<T: Real> SummaryStats<T> {
    /// Aggregates `(J, D)` traces in the order given.
    pub fn from_traces(traces: &[(&[T], &[T])]) -> Option<Self> {
        if traces.is_empty() {
            return None;
        }
        let costs: Vec<&[T]> = traces.iter().map(|t| t.0).collect();
        let dists: Vec<&[T]> = traces.iter().map(|t| t.1).collect();
        let (cost_mean, cost_sd) = column_stats(&costs);
        let (distance_mean, distance_sd) = column_stats(&dists);
        Some(Self {
            trials: traces.len() as u64,
            cost_mean,
            cost_sd,
            distance_mean,
            distance_sd,
        })
    }
}

/// The `J` and `D` traces of one completed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTraces<T> {
    pub trial: u64,
    pub cost: Vec<T>,
    pub distance: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo<T> {
    pub summary: SummaryStats<T>,
    /// Completed trials in index order.
    pub traces: Vec<TrialTraces<T>>,
    /// Full records of completed trials, when retention was requested.
    pub records: Vec<TrialRecord<T>>,
    /// Trials excluded from the summary.
    pub excluded: Vec<EngineError>,
}

/// Evaluates `f` for trials `0..trials` on `workers` threads (the global
/// pool when `None`); results come back in trial-index order.
pub fn map_trials<R: Send, F: Fn(u64) -> R + Sync + Send>(
    trials: u64,
    workers: Option<usize>,
    f: F,
) -> Result<Vec<R>, EngineError> {
    let work = || (0..trials).into_par_iter().map(&f).collect();
    match workers {
        Some(w) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| EngineError::Workers(e.to_string()))?
            .install(work)),
        None => Ok(work()),
    }
}

/// Runs trials `0..trials` on `workers` threads (the global pool when
/// `None`) and aggregates them in trial-index order.
pub fn run_monte_carlo<T: Real>(
    scenario: &Scenario<T>,
    trials: u64,
    retain: bool,
    workers: Option<usize>,
) -> Result<MonteCarlo<T>, EngineError> {
    if trials == 0 {
        return Err(EngineError::NoTrials);
    }
    scenario.validate()?;
    let outcomes = map_trials(trials, workers, |i| {
        run_trial(scenario, i).map(|mut r| {
            if !retain {
                r.states = Vec::new();
                r.inputs = Vec::new();
            }
            r
        })
    })?;
    let mut traces = Vec::new();
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(mut r) => {
                traces.push(TrialTraces {
                    trial: r.trial,
                    cost: std::mem::take(&mut r.cost),
                    distance: std::mem::take(&mut r.distance),
                });
                if retain {
                    let t = traces.last().expect("just pushed");
                    r.cost = t.cost.clone();
                    r.distance = t.distance.clone();
                    records.push(r);
                }
            }
            Err(e @ EngineError::Diverged { .. }) => excluded.push(e),
            Err(e) => return Err(e),
        }
    }
    let pairs: Vec<(&[T], &[T])> = traces
        .iter()
        .map(|t| (t.cost.as_slice(), t.distance.as_slice()))
        .collect();
    let summary = SummaryStats::from_traces(&pairs).ok_or(EngineError::AllDiverged(trials))?;
    Ok(MonteCarlo {
        summary,
        traces,
        records,
        excluded,
    })
}
