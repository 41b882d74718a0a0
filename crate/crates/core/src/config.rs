//! Experiment configuration: a flat TOML document of `key = value` pairs.
//!
//! Every key is optional; an empty document gives the reference rendezvous
//! experiment. Unknown keys are rejected and all problems are reported
//! together.
//!
//! | key | type | default |
//! |---|---|---|
//! | `task` | `"coverage" \| "rendezvous" \| "assignment" \| "quadratic"` | `"rendezvous"` |
//! | `law` | `"bc" \| "pbc" \| "paired"` | `"pbc"` |
//! | `K` | integer | 1 |
//! | `N`, `n` | integer | 15, 2 |
//! | `T` | integer | 300 |
//! | `a0`, `a_p`, `c0`, `c_p`, `t_v` | real | 2, 0.7, 0.003, 0.16, 20 |
//! | `l1`, `l2` | real | 100, 101 |
//! | `trials` | integer | 500 |
//! | `seed` | integer (or decimal string above 2^63) | 0 |
//! | `mode` | `"figure" \| "theorem"` | `"figure"` |
//! | `out` | string | `"out"` |
//! | `smooth_min_eps` | negative real | unset (hard min) |
//! | `initial_state` | array of `nN` reals | task default |
//! | `retain_trajectories` | bool | true iff `trials <= 10` |
//! | `grid_spacing` | real in (0, 1) | 0.01 |
//! | `formation_radius` | real | 0.2 |
//! | `formations` | array of integers | `1..=N` |
//! | `reassignment` | `"every-step" \| "once-at-start"` | `"every-step"` |
//! | `assignment_targets` | array of `nN` reals | ring of `formation_radius` at offset 0 |
//! | `quadratic_diagonal` | array of `nN` reals | all ones |

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use thiserror::Error;
use toml::{Table, Value};

use crate::engine::{Law, Mode, Scenario};
use crate::gains::{validate_schedule, GainParams, GainSchedule};
use crate::objectives::{
    ring_positions, AssignmentPayload, Barrier, CoveragePayload, ObjectiveKind, ObjectiveSpec,
    QuadraticPayload, ReassignmentPolicy, RendezvousPayload,
};
use crate::rng::SignSource;
use crate::state::CollectiveState;

/// Largest coverage grid accepted.
const MAX_GRID_POINTS: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Coverage,
    Rendezvous,
    Assignment,
    Quadratic,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Coverage => "coverage",
            TaskKind::Rendezvous => "rendezvous",
            TaskKind::Assignment => "assignment",
            TaskKind::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "coverage" => TaskKind::Coverage,
            "rendezvous" => TaskKind::Rendezvous,
            "assignment" => TaskKind::Assignment,
            "quadratic" => TaskKind::Quadratic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LawChoice {
    Bc,
    Pbc,
    Paired,
}

impl LawChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            LawChoice::Bc => "bc",
            LawChoice::Pbc => "pbc",
            LawChoice::Paired => "paired",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "bc" => LawChoice::Bc,
            "pbc" => LawChoice::Pbc,
            "paired" => LawChoice::Paired,
            _ => return None,
        })
    }
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "figure" => Some(Mode::Figure),
        "theorem" => Some(Mode::Theorem),
        _ => None,
    }
}

pub fn parse_reassignment(s: &str) -> Option<ReassignmentPolicy> {
    match s {
        "every-step" => Some(ReassignmentPolicy::EveryStep),
        "once-at-start" => Some(ReassignmentPolicy::OnceAtStart),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub issues: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.issues.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub law: LawChoice,
    pub samples: usize,
    pub agents: usize,
    pub dim: usize,
    pub steps: u64,
    pub gains: GainParams<f64>,
    pub l1: f64,
    pub l2: f64,
    pub trials: u64,
    pub seed: u64,
    pub mode: Mode,
    pub out: String,
    pub smooth_min_eps: Option<f64>,
    pub initial_state: Option<Vec<f64>>,
    pub retain_trajectories: Option<bool>,
    pub grid_spacing: f64,
    pub formation_radius: f64,
    pub formations: Option<Vec<i64>>,
    pub reassignment: ReassignmentPolicy,
    pub assignment_targets: Option<Vec<f64>>,
    pub quadratic_diagonal: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Rendezvous,
            law: LawChoice::Pbc,
            samples: 1,
            agents: 15,
            dim: 2,
            steps: 300,
            gains: GainParams::reference(),
            l1: 100.0,
            l2: 101.0,
            trials: 500,
            seed: 0,
            mode: Mode::Figure,
            out: "out".into(),
            smooth_min_eps: None,
            initial_state: None,
            retain_trajectories: None,
            grid_spacing: 0.01,
            formation_radius: 0.2,
            formations: None,
            reassignment: ReassignmentPolicy::EveryStep,
            assignment_targets: None,
            quadratic_diagonal: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "task",
    "law",
    "K",
    "N",
    "n",
    "T",
    "a0",
    "a_p",
    "c0",
    "c_p",
    "t_v",
    "l1",
    "l2",
    "trials",
    "seed",
    "mode",
    "out",
    "smooth_min_eps",
    "initial_state",
    "retain_trajectories",
    "grid_spacing",
    "formation_radius",
    "formations",
    "reassignment",
    "assignment_targets",
    "quadratic_diagonal",
];

struct Reader<'a> {
    table: &'a Table,
    issues: Vec<String>,
}

impl Reader<'_> {
    fn bad(&mut self, key: &str, want: &str) {
        self.issues.push(format!("`{key}` must be {want}"));
    }

    fn real(&mut self, key: &str) -> Option<f64> {
        match self.table.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            _ => {
                self.bad(key, "a number");
                None
            }
        }
    }

    fn count(&mut self, key: &str) -> Option<u64> {
        match self.table.get(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as u64),
            _ => {
                self.bad(key, "a non-negative integer");
                None
            }
        }
    }

    fn seed(&mut self, key: &str) -> Option<u64> {
        match self.table.get(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as u64),
            Value::String(s) if s.parse::<u64>().is_ok() => s.parse().ok(),
            _ => {
                self.bad(key, "an unsigned 64-bit integer");
                None
            }
        }
    }

    fn text(&mut self, key: &str) -> Option<String> {
        match self.table.get(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.bad(key, "a string");
                None
            }
        }
    }

    fn choice<E>(&mut self, key: &str, options: &str, parse: impl Fn(&str) -> Option<E>) -> Option<E> {
        let s = self.text(key)?;
        let v = parse(&s);
        if v.is_none() {
            self.bad(key, &format!("one of {options}"));
        }
        v
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        match self.table.get(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.bad(key, "a boolean");
                None
            }
        }
    }

    fn reals(&mut self, key: &str) -> Option<Vec<f64>> {
        let parsed = match self.table.get(key)? {
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect::<Option<Vec<f64>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.bad(key, "an array of numbers");
        }
        parsed
    }

    fn integers(&mut self, key: &str) -> Option<Vec<i64>> {
        let parsed = match self.table.get(key)? {
            Value::Array(items) => items
                .iter()
                .map(|v| v.as_integer())
                .collect::<Option<Vec<i64>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.bad(key, "an array of integers");
        }
        parsed
    }
}

fn to_usize(v: u64) -> usize {
    usize::try_from(v).unwrap_or(usize::MAX)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        issues: vec![format!("syntax: {}", e.message())],
    })?;
    let config = read_table(&table)?;
    config.validate()?;
    Ok(config)
}

/// Reads fields without cross-field validation; the caller may apply
/// overrides before calling [`ExperimentConfig::validate`].
pub fn read_table(table: &Table) -> Result<ExperimentConfig, ConfigError> {
    let mut r = Reader {
        table,
        issues: Vec::new(),
    };
    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.issues.push(format!("unknown key `{key}`"));
        }
    }
    let mut c = ExperimentConfig::default();
    if let Some(v) = r.choice("task", "coverage, rendezvous, assignment, quadratic", TaskKind::parse) {
        c.task = v;
    }
    if let Some(v) = r.choice("law", "bc, pbc, paired", LawChoice::parse) {
        c.law = v;
    }
    if let Some(v) = r.count("K") {
        c.samples = to_usize(v);
    }
    if let Some(v) = r.count("N") {
        c.agents = to_usize(v);
    }
    if let Some(v) = r.count("n") {
        c.dim = to_usize(v);
    }
    if let Some(v) = r.count("T") {
        c.steps = v;
    }
    for (key, slot) in [
        ("a0", &mut c.gains.a0),
        ("a_p", &mut c.gains.a_p),
        ("c0", &mut c.gains.c0),
        ("c_p", &mut c.gains.c_p),
        ("t_v", &mut c.gains.t_v),
        ("l1", &mut c.l1),
        ("l2", &mut c.l2),
        ("grid_spacing", &mut c.grid_spacing),
        ("formation_radius", &mut c.formation_radius),
    ] {
        if let Some(v) = r.real(key) {
            *slot = v;
        }
    }
    if let Some(v) = r.count("trials") {
        c.trials = v;
    }
    if let Some(v) = r.seed("seed") {
        c.seed = v;
    }
    if let Some(v) = r.choice("mode", "figure, theorem", parse_mode) {
        c.mode = v;
    }
    if let Some(v) = r.text("out") {
        c.out = v;
    }
    if r.table.contains_key("smooth_min_eps") {
        c.smooth_min_eps = r.real("smooth_min_eps");
    }
    c.initial_state = r.reals("initial_state");
    c.retain_trajectories = r.flag("retain_trajectories");
    c.formations = r.integers("formations");
    if let Some(v) = r.choice("reassignment", "every-step, once-at-start", parse_reassignment) {
        c.reassignment = v;
    }
    c.assignment_targets = r.reals("assignment_targets");
    c.quadratic_diagonal = r.reals("quadratic_diagonal");
    if r.issues.is_empty() {
        Ok(c)
    } else {
        Err(ConfigError { issues: r.issues })
    }
}

fn write_reals(out: &mut String, key: &str, values: &[f64]) {
    let items: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "{key} = [{}]", items.join(", "));
}

impl ExperimentConfig {
    /// Cross-field validation; reports every violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let len = self.dim.saturating_mul(self.agents);
        if self.agents == 0 {
            issues.push("N must be at least 1".to_string());
        }
        if self.dim == 0 {
            issues.push("n must be at least 1".to_string());
        }
        if self.samples == 0 {
            issues.push("K must be at least 1".to_string());
        }
        if self.trials == 0 {
            issues.push("trials must be at least 1".to_string());
        }
        if self.law == LawChoice::Paired && self.samples != 1 {
            issues.push(format!("law=paired requires K=1, got K={}", self.samples));
        }
        for v in validate_schedule(&self.gains) {
            issues.push(format!("gain schedule violates {}", v.describe()));
        }
        if !(self.l1 > 0.0 && self.l1 < self.l2 && self.l2.is_finite()) {
            issues.push("barrier needs 0 < l1 < l2".to_string());
        }
        if let Some(eps) = self.smooth_min_eps {
            if !(eps < 0.0 && eps.is_finite()) {
                issues.push("smooth_min_eps must be negative".to_string());
            }
        }
        if let Some(x0) = &self.initial_state {
            if x0.len() != len {
                issues.push(format!("initial_state has {} values, expected nN={len}", x0.len()));
            }
            if x0.iter().any(|v| !v.is_finite()) {
                issues.push("initial_state must be finite".to_string());
            }
        }
        let planar_default = match self.task {
            TaskKind::Coverage => self.initial_state.is_none(),
            TaskKind::Rendezvous => true,
            TaskKind::Assignment => self.assignment_targets.is_none(),
            TaskKind::Quadratic => false,
        };
        if planar_default && self.dim != 2 {
            issues.push(format!(
                "{} defaults are planar: n must be 2 (or supply explicit values)",
                self.task.as_str()
            ));
        }
        match self.task {
            TaskKind::Coverage => {
                if !(self.grid_spacing > 0.0 && self.grid_spacing < 1.0) {
                    issues.push("grid_spacing must lie in (0, 1)".to_string());
                } else {
                    let per_axis = (1.0 / self.grid_spacing).round() + 1.0;
                    if per_axis.powi(self.dim.min(64) as i32) > MAX_GRID_POINTS {
                        issues.push("coverage grid is too large".to_string());
                    }
                }
            }
            TaskKind::Rendezvous => {
                if !self.formation_radius.is_finite() {
                    issues.push("formation_radius must be finite".to_string());
                }
                if let Some(f) = &self.formations {
                    let mut sorted = f.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if f.is_empty() || sorted.len() != f.len() {
                        issues.push("formations must be non-empty and distinct".to_string());
                    }
                }
            }
            TaskKind::Assignment => {
                if let Some(t) = &self.assignment_targets {
                    if t.len() != len || t.iter().any(|v| !v.is_finite()) {
                        issues.push(format!("assignment_targets needs nN={len} finite values"));
                    }
                } else if !self.formation_radius.is_finite() {
                    issues.push("formation_radius must be finite".to_string());
                }
            }
            TaskKind::Quadratic => {
                if let Some(d) = &self.quadratic_diagonal {
                    if d.len() != len || d.iter().any(|v| !v.is_finite()) {
                        issues.push(format!("quadratic_diagonal needs nN={len} finite values"));
                    }
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    /// Serializes every field; [`parse_config`] reads it back unchanged.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task = \"{}\"", self.task.as_str());
        let _ = writeln!(s, "law = \"{}\"", self.law.as_str());
        let _ = writeln!(s, "K = {}", self.samples);
        let _ = writeln!(s, "N = {}", self.agents);
        let _ = writeln!(s, "n = {}", self.dim);
        let _ = writeln!(s, "T = {}", self.steps);
        let g = &self.gains;
        for (k, v) in [
            ("a0", g.a0),
            ("a_p", g.a_p),
            ("c0", g.c0),
            ("c_p", g.c_p),
            ("t_v", g.t_v),
            ("l1", self.l1),
            ("l2", self.l2),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "trials = {}", self.trials);
        if self.seed <= i64::MAX as u64 {
            let _ = writeln!(s, "seed = {}", self.seed);
        } else {
            let _ = writeln!(s, "seed = \"{}\"", self.seed);
        }
        let _ = writeln!(s, "mode = \"{}\"", self.mode.as_str());
        let _ = writeln!(s, "out = {}", Value::String(self.out.clone()));
        if let Some(eps) = self.smooth_min_eps {
            let _ = writeln!(s, "smooth_min_eps = {eps:?}");
        }
        if let Some(x0) = &self.initial_state {
            write_reals(&mut s, "initial_state", x0);
        }
        if let Some(b) = self.retain_trajectories {
            let _ = writeln!(s, "retain_trajectories = {b}");
        }
        let _ = writeln!(s, "grid_spacing = {:?}", self.grid_spacing);
        let _ = writeln!(s, "formation_radius = {:?}", self.formation_radius);
        if let Some(f) = &self.formations {
            let items: Vec<String> = f.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "formations = [{}]", items.join(", "));
        }
        let _ = writeln!(s, "reassignment = \"{}\"", self.reassignment.as_str());
        if let Some(t) = &self.assignment_targets {
            write_reals(&mut s, "assignment_targets", t);
        }
        if let Some(d) = &self.quadratic_diagonal {
            write_reals(&mut s, "quadratic_diagonal", d);
        }
        s
    }

    /// Whether per-trial trajectories are written.
    pub fn retain(&self) -> bool {
        self.retain_trajectories.unwrap_or(self.trials <= 10)
    }

    pub fn objective(&self) -> Result<ObjectiveSpec<f64>, ConfigError> {
        let fail = |e: crate::objectives::ObjectiveError| ConfigError {
            issues: vec![e.to_string()],
        };
        let (n, agents) = (self.dim, self.agents);
        let kind = match self.task {
            TaskKind::Coverage => {
                ObjectiveKind::Coverage(CoveragePayload::unit_grid(n, self.grid_spacing).map_err(fail)?)
            }
            TaskKind::Rendezvous => {
                let thetas = self
                    .formations
                    .clone()
                    .unwrap_or_else(|| (1..=agents as i64).collect());
                ObjectiveKind::Rendezvous(
                    RendezvousPayload::ring(agents, self.formation_radius, thetas).map_err(fail)?,
                )
            }
            TaskKind::Assignment => {
                let targets = self
                    .assignment_targets
                    .clone()
                    .unwrap_or_else(|| ring_positions(agents, self.formation_radius, 0));
                ObjectiveKind::Assignment(
                    AssignmentPayload::new(n, targets, self.reassignment).map_err(fail)?,
                )
            }
            TaskKind::Quadratic => {
                let diag = self
                    .quadratic_diagonal
                    .clone()
                    .unwrap_or_else(|| vec![1.0; n * agents]);
                ObjectiveKind::Quadratic(QuadraticPayload::diagonal(&diag).map_err(fail)?)
            }
        };
        let barrier = Barrier::new(self.l1, self.l2).map_err(fail)?;
        ObjectiveSpec::new(n, agents, kind, barrier, self.smooth_min_eps).map_err(fail)
    }

    /// The explicit initial state, or the task default: agents on a ring
    /// around the centre of the unit square for coverage, and on the
    /// diagonal `x_i = (0.9 i / N) [1, ..., 1]` otherwise.
    pub fn initial(&self) -> Result<CollectiveState<f64>, ConfigError> {
        let (n, agents) = (self.dim, self.agents);
        let values = match (&self.initial_state, self.task) {
            (Some(x0), _) => x0.clone(),
            (None, TaskKind::Coverage) => (1..=agents)
                .flat_map(|i| {
                    let angle = 2.0 * PI * i as f64 / agents as f64;
                    [0.5 + 0.2 * angle.cos(), 0.5 + 0.2 * angle.sin()]
                })
                .collect(),
            (None, _) => (1..=agents)
                .flat_map(|i| std::iter::repeat_n(0.9 * i as f64 / agents as f64, n))
                .collect(),
        };
        CollectiveState::new(n, agents, values).map_err(|e| ConfigError {
            issues: vec![e.to_string()],
        })
    }

    /// Scenario for a single law; `paired` maps to PBC with the paired
    /// runner choosing BC's horizon itself.
    pub fn scenario(&self) -> Result<Scenario<f64>, ConfigError> {
        self.validate()?;
        let schedule = GainSchedule::new(self.gains).map_err(|e| ConfigError {
            issues: vec![e.to_string()],
        })?;
        Ok(Scenario {
            objective: self.objective()?,
            initial: self.initial()?,
            law: match self.law {
                LawChoice::Bc => Law::Bc,
                LawChoice::Pbc | LawChoice::Paired => Law::Pbc,
            },
            samples: if self.law == LawChoice::Bc { 1 } else { self.samples },
            steps: self.steps,
            schedule,
            signs: SignSource::Keyed {
                master_seed: self.seed,
            },
            mode: self.mode,
        })
    }
}
