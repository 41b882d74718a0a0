//! Run directories: CSV summaries, trajectories, the manifest, and the
//! long-format re-serialization used for plotting.
//!
//! CSV files are comma-separated with LF line endings and a header row;
//! reals are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use toml::{Table, Value};

use crate::config::{ConfigError, ExperimentConfig, LawChoice};
use crate::engine::{
    map_trials, run_monte_carlo, run_paired, EngineError, Law, SummaryStats, TrialRecord,
};
use crate::oracle::{check_distance_dominance, check_twice_speed, Convexity};
use crate::rng::{GENERATOR_ID, KEY_LAYOUT};

pub const MANIFEST: &str = "manifest.toml";
pub const MANIFEST_FORMAT: &str = "pbc-run/1";
pub const PLOTDATA: &str = "plotdata.csv";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    RunDirectory(String),
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, OutputError> {
    fs::read_to_string(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn summary_csv(stats: &SummaryStats<f64>) -> String {
    let mut s = String::from("t,J_mean,J_sd,D_mean,D_sd\n");
    for t in 0..stats.cost_mean.len() {
        let _ = writeln!(
            s,
            "{t},{},{},{},{}",
            fmt_real(stats.cost_mean[t]),
            fmt_real(stats.cost_sd[t]),
            fmt_real(stats.distance_mean[t]),
            fmt_real(stats.distance_sd[t])
        );
    }
    s
}

/// One row per agent and time step; agents are numbered from 1.
pub fn trajectory_csv(record: &TrialRecord<f64>) -> String {
    let mut s = String::from("t,agent");
    for d in 1..=record.dim {
        let _ = write!(s, ",x_{d}");
    }
    s.push('\n');
    for t in 0..=record.horizon() {
        for (i, x) in record.state(t).chunks_exact(record.dim).enumerate() {
            let _ = write!(s, "{t},{}", i + 1);
            for v in x {
                let _ = write!(s, ",{}", fmt_real(*v));
            }
            s.push('\n');
        }
    }
    s
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<String>,
    pub completed: u64,
    pub excluded: Vec<String>,
    /// Largest `|x_PBC(t) - x_BC(2t)|_inf` over paired trials.
    pub paired_state_deviation: Option<f64>,
    /// Smallest `D_BC(2t) - D_PBC(t)` over paired trials.
    pub paired_min_margin: Option<f64>,
}

struct Files {
    dir: PathBuf,
    names: Vec<String>,
    contents: Vec<String>,
}

impl Files {
    fn add(&mut self, name: String, contents: String) {
        self.names.push(name);
        self.contents.push(contents);
    }
}

fn string_array(items: &[String]) -> String {
    let quoted: Vec<String> = items
        .iter()
        .map(|s| Value::String(s.clone()).to_string())
        .collect();
    format!("[{}]", quoted.join(", "))
}

fn manifest(config: &ExperimentConfig, report: &RunReport, evaluations: u64, retained: &[u64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format = \"{MANIFEST_FORMAT}\"");
    s.push_str("\n[config]\n");
    for line in config.to_toml().lines() {
        // the output location never changes file contents
        if !line.starts_with("out = ") {
            s.push_str(line);
            s.push('\n');
        }
    }
    s.push_str("\n[generator]\n");
    let _ = writeln!(s, "id = \"{GENERATOR_ID}\"");
    let _ = writeln!(s, "key_layout = \"{KEY_LAYOUT}\"");
    s.push_str("\n[run]\n");
    let (mode, bc_horizon) = match config.law {
        LawChoice::Paired => ("theorem", 2 * config.steps),
        _ => (config.mode.as_str(), match config.mode {
            crate::engine::Mode::Figure => config.steps,
            crate::engine::Mode::Theorem => 2 * config.steps,
        }),
    };
    let _ = writeln!(s, "mode = \"{mode}\"");
    if config.law != LawChoice::Pbc {
        let _ = writeln!(s, "bc_horizon = {bc_horizon}");
    }
    if config.law != LawChoice::Bc {
        let _ = writeln!(s, "pbc_horizon = {}", config.steps);
    }
    let broadcast = match config.law {
        LawChoice::Bc => 1,
        _ => config.samples,
    };
    let _ = writeln!(s, "broadcast_reals_per_step = {broadcast}");
    let _ = writeln!(s, "objective_evaluations = {evaluations}");
    let _ = writeln!(s, "trials_completed = {}", report.completed);
    let _ = writeln!(s, "excluded_trials = {}", report.excluded.len());
    let _ = writeln!(s, "excluded = {}", string_array(&report.excluded));
    let ids: Vec<String> = retained.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(s, "retained_trials = [{}]", ids.join(", "));
    if let Some(v) = report.paired_state_deviation {
        let _ = writeln!(s, "max_state_deviation = {}", fmt_real(v));
    }
    if let Some(v) = report.paired_min_margin {
        let _ = writeln!(s, "min_distance_margin = {}", fmt_real(v));
    }
    let _ = writeln!(s, "files = {}", string_array(&report.files));
    s
}

fn run_single(config: &ExperimentConfig, files: &mut Files, workers: Option<usize>) -> Result<(RunReport, u64, Vec<u64>), OutputError> {
    let scenario = config.scenario()?;
    let mc = run_monte_carlo(&scenario, config.trials, config.retain(), workers)?;
    files.add("summary.csv".into(), summary_csv(&mc.summary));
    let mut evaluations = 0;
    let mut retained = Vec::new();
    for r in &mc.records {
        files.add(format!("trajectory_{}.csv", r.trial), trajectory_csv(r));
        retained.push(r.trial);
    }
    // evaluation counts do not depend on the sign draws
    let per_trial = match scenario.law {
        Law::Bc => scenario.horizon() + 1,
        Law::Pbc => scenario.horizon() * (scenario.samples as u64 + 1) + 1,
    };
    evaluations += per_trial * mc.summary.trials;
    let report = RunReport {
        files: Vec::new(),
        completed: mc.summary.trials,
        excluded: mc.excluded.iter().map(|e| e.to_string()).collect(),
        paired_state_deviation: None,
        paired_min_margin: None,
    };
    Ok((report, evaluations, retained))
}

fn run_paired_trials(config: &ExperimentConfig, files: &mut Files, workers: Option<usize>) -> Result<(RunReport, u64, Vec<u64>), OutputError> {
    let scenario = config.scenario()?;
    let retain = config.retain();
    let outcomes = map_trials(config.trials, workers, |i| {
        let paired = run_paired(&scenario, i)?;
        let twice = check_twice_speed(&paired).expect("paired horizons match");
        let dom = check_distance_dominance(&paired, &scenario.schedule, Convexity::Undeclared)
            .expect("paired horizons match");
        Ok::<_, EngineError>((paired, twice, dom))
    })?;
    let mut excluded = Vec::new();
    let mut table = String::from("trial,max_x_dev,max_J_dev,min_D_margin,final_D_margin\n");
    let mut bc_traces = Vec::new();
    let mut pbc_traces = Vec::new();
    let mut retained = Vec::new();
    let mut evaluations = 0;
    let mut max_dev: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for outcome in &outcomes {
        match outcome {
            Ok((paired, twice, dom)) => {
                let _ = writeln!(
                    table,
                    "{},{},{},{},{}",
                    paired.pbc.trial,
                    fmt_real(twice.state),
                    fmt_real(twice.cost),
                    fmt_real(dom.min_margin),
                    fmt_real(*dom.margins.last().expect("t = 0 is present"))
                );
                max_dev = max_dev.max(twice.state);
                min_margin = min_margin.min(dom.min_margin);
                evaluations += paired.bc.evaluations + paired.pbc.evaluations;
                bc_traces.push((paired.bc.cost.as_slice(), paired.bc.distance.as_slice()));
                pbc_traces.push((paired.pbc.cost.as_slice(), paired.pbc.distance.as_slice()));
            }
            Err(e @ EngineError::Diverged { .. }) => excluded.push(e.to_string()),
            Err(e) => return Err(e.clone().into()),
        }
    }
    let bc = SummaryStats::from_traces(&bc_traces).ok_or(EngineError::AllDiverged(config.trials))?;
    let pbc = SummaryStats::from_traces(&pbc_traces).ok_or(EngineError::AllDiverged(config.trials))?;
    files.add("summary_bc.csv".into(), summary_csv(&bc));
    files.add("summary_pbc.csv".into(), summary_csv(&pbc));
    files.add("paired.csv".into(), table);
    if retain {
        for (paired, _, _) in outcomes.iter().flatten() {
            files.add(format!("trajectory_bc_{}.csv", paired.bc.trial), trajectory_csv(&paired.bc));
            files.add(format!("trajectory_pbc_{}.csv", paired.pbc.trial), trajectory_csv(&paired.pbc));
            retained.push(paired.pbc.trial);
        }
    }
    let report = RunReport {
        files: Vec::new(),
        completed: bc.trials,
        excluded,
        paired_state_deviation: Some(max_dev),
        paired_min_margin: Some(min_margin),
    };
    Ok((report, evaluations, retained))
}

/// Runs the configured experiment and writes its run directory.
pub fn run_experiment(
    config: &ExperimentConfig,
    dir: &Path,
    workers: Option<usize>,
) -> Result<RunReport, OutputError> {
    config.validate()?;
    let mut files = Files {
        dir: dir.to_path_buf(),
        names: Vec::new(),
        contents: Vec::new(),
    };
    let (mut report, evaluations, retained) = match config.law {
        LawChoice::Paired => run_paired_trials(config, &mut files, workers)?,
        _ => run_single(config, &mut files, workers)?,
    };
    report.files = files.names.clone();
    report.files.push(MANIFEST.into());
    let manifest = manifest(config, &report, evaluations, &retained);
    fs::create_dir_all(&files.dir).map_err(|source| OutputError::Io {
        path: files.dir.clone(),
        source,
    })?;
    for (name, contents) in files.names.iter().zip(&files.contents) {
        write_file(&files.dir.join(name), contents)?;
    }
    write_file(&files.dir.join(MANIFEST), &manifest)?;
    Ok(report)
}

fn series_prefix(name: &str) -> Option<(&'static str, Option<u64>)> {
    let (prefix, rest) = if let Some(r) = name.strip_prefix("trajectory_bc_") {
        ("bc_", r)
    } else if let Some(r) = name.strip_prefix("trajectory_pbc_") {
        ("pbc_", r)
    } else if let Some(r) = name.strip_prefix("trajectory_") {
        ("", r)
    } else {
        return match name {
            "summary.csv" => Some(("", None)),
            "summary_bc.csv" => Some(("bc_", None)),
            "summary_pbc.csv" => Some(("pbc_", None)),
            _ => None,
        };
    };
    let trial = rest.strip_suffix(".csv")?.parse().ok()?;
    Some((prefix, Some(trial)))
}

/// Long-format rows `t,series,trial,value` built from a run directory.
/// Summary columns use `mean` in the trial column; trajectory values are
/// labelled `agent<i>_x<d>`. Values are copied verbatim.
pub fn plotdata(dir: &Path) -> Result<String, OutputError> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(OutputError::RunDirectory(format!(
            "{} has no {MANIFEST}",
            dir.display()
        )));
    }
    let manifest: Table = read_file(&manifest_path)?
        .parse()
        .map_err(|e: toml::de::Error| OutputError::RunDirectory(format!("{MANIFEST}: {}", e.message())))?;
    if manifest.get("format").and_then(Value::as_str) != Some(MANIFEST_FORMAT) {
        return Err(OutputError::RunDirectory(format!("{MANIFEST} has an unknown format")));
    }
    let names: Vec<String> = manifest
        .get("run")
        .and_then(|r| r.get("files"))
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .ok_or_else(|| OutputError::RunDirectory(format!("{MANIFEST} lists no files")))?;
    let mut out = String::from("t,series,trial,value\n");
    for name in &names {
        let Some((prefix, trial)) = series_prefix(name) else {
            continue;
        };
        let text = read_file(&dir.join(name))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| OutputError::RunDirectory(format!("{name} is empty")))?
            .split(',')
            .collect();
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(OutputError::RunDirectory(format!("{name}: ragged row `{line}`")));
            }
            match trial {
                None => {
                    for (col, value) in header.iter().zip(&cells).skip(1) {
                        let _ = writeln!(out, "{},{prefix}{col},mean,{value}", cells[0]);
                    }
                }
                Some(trial) => {
                    for (col, value) in header.iter().zip(&cells).skip(2) {
                        let _ = writeln!(
                            out,
                            "{},{prefix}agent{}_{col},{trial},{value}",
                            cells[0], cells[1]
                        );
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Writes [`plotdata`] to `dest`; nothing is written on error.
pub fn write_plotdata(dir: &Path, dest: &Path) -> Result<usize, OutputError> {
    let data = plotdata(dir)?;
    write_file(dest, &data)?;
    Ok(data.lines().count() - 1)
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;

    #[test]
    fn reals_have_seventeen_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_real(-2.0), "-2.0000000000000000e0");
        for v in [1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02e23] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn series_names() {
        assert_eq!(series_prefix("summary.csv"), Some(("", None)));
        assert_eq!(series_prefix("trajectory_12.csv"), Some(("", Some(12))));
        assert_eq!(series_prefix("trajectory_bc_3.csv"), Some(("bc_", Some(3))));
        assert_eq!(series_prefix("paired.csv"), None);
    }

    #[test]
    fn small_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::default();
        c.steps = 5;
        c.trials = 2;
        let report = run_experiment(&c, dir.path(), Some(1)).unwrap();
        assert_eq!(report.files, vec!["summary.csv", "trajectory_0.csv", "trajectory_1.csv", MANIFEST]);
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 7);
        let traj = fs::read_to_string(dir.path().join("trajectory_1.csv")).unwrap();
        assert_eq!(traj.lines().count(), 1 + 6 * 15);
        let rows = plotdata(dir.path()).unwrap();
        assert_eq!(rows.lines().count(), 1 + 4 * 6 + 2 * 6 * 15 * 2);
        let manifest: Table = fs::read_to_string(dir.path().join(MANIFEST)).unwrap().parse().unwrap();
        assert_eq!(manifest["run"]["objective_evaluations"].as_integer(), Some(2 * (5 * 2 + 1)));
    }
}
