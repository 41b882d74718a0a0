//! The `verify` report: paired-run checks of the twice-speed equivalence
//! and distance dominance, and enumeration checks of the estimator and of
//! the per-step `K` ordering.

use std::fmt::Write as _;

use crate::config::{ConfigError, ExperimentConfig, LawChoice, TaskKind};
use crate::engine::{map_trials, run_paired, EngineError};
use crate::oracle::{
    check_distance_dominance, check_k_monotonicity, check_twice_speed, enumerate_estimator_variance,
    enumerate_expected_gradient, expected_next_cost, Convexity, OracleError,
};
use crate::rng::mix64;

/// Paired trials used by the equivalence check.
pub const EQUIVALENCE_TRIALS: u64 = 10;
/// Paired trials used by the dominance check.
pub const DOMINANCE_TRIALS: u64 = 100;
/// Random quadratic instances used by the estimator checks.
pub const ESTIMATOR_INSTANCES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyScope {
    /// `Some(3 | 4 | 5)` limits the run to one theorem family.
    pub theorem: Option<u8>,
    /// Run the quadratic estimator checks.
    pub estimator: bool,
    /// Check the reversed ordering on a concave instance.
    pub concave: bool,
}

impl VerifyScope {
    fn everything(&self) -> bool {
        self.theorem.is_none() && !self.estimator
    }

    fn wants(&self, theorem: u8) -> bool {
        self.everything() || self.theorem == Some(theorem)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub bound: String,
    pub measured: String,
    /// `None` for rows that only report a value.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    fn push(&mut self, check: &str, bound: String, measured: String, pass: Option<bool>) {
        self.rows.push(CheckRow {
            check: check.to_string(),
            bound,
            measured,
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }

    pub fn render(&self) -> String {
        let w = self.rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        let b = self.rows.iter().map(|r| r.bound.len()).max().unwrap_or(5).max(5);
        let m = self.rows.iter().map(|r| r.measured.len()).max().unwrap_or(8).max(8);
        let mut s = format!("{:w$}  {:b$}  {:m$}  verdict\n", "check", "bound", "measured");
        for r in &self.rows {
            let verdict = match r.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "REPORT",
            };
            let _ = writeln!(s, "{:w$}  {:b$}  {:m$}  {verdict}", r.check, r.bound, r.measured);
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Uniform draws in `[0, 1)` from a counter hashed through the sign
/// stream's mixer.
struct Uniform(u64);

impl Uniform {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        (mix64(self.0) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }

    fn below(&mut self, n: usize) -> usize {
        ((self.next() * n as f64) as usize).min(n - 1)
    }
}

/// A random symmetric positive definite matrix, row-major.
fn random_spd(rng: &mut Uniform, n: usize) -> Vec<f64> {
    let a: Vec<f64> = (0..n * n).map(|_| rng.range(-1.0, 1.0)).collect();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for k in 0..n {
                v += a[k * n + i] * a[k * n + j];
            }
            h[i * n + j] = v / n as f64;
        }
        h[i * n + i] += 0.1;
    }
    h
}

fn quad_form(h: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += h[i * n + j] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

fn paired_checks(
    config: &ExperimentConfig,
    scope: &VerifyScope,
    workers: Option<usize>,
    report: &mut VerifyReport,
) -> Result<(), VerifyError> {
    let mut paired_config = config.clone();
    paired_config.law = LawChoice::Paired;
    paired_config.samples = 1;
    let scenario = paired_config.scenario()?;
    let convexity = if config.task == TaskKind::Quadratic {
        Convexity::Convex
    } else {
        Convexity::Undeclared
    };
    let trials = if scope.wants(4) {
        DOMINANCE_TRIALS
    } else {
        EQUIVALENCE_TRIALS
    };
    let results = map_trials(trials, workers, |i| {
        let paired = run_paired(&scenario, i)?;
        let twice = check_twice_speed(&paired).expect("paired horizons match");
        let dom = check_distance_dominance(&paired, &scenario.schedule, convexity)
            .expect("paired horizons match");
        Ok::<_, EngineError>((twice, dom))
    })?;
    let mut checked = Vec::with_capacity(results.len());
    for r in results {
        checked.push(r?);
    }
    let task = config.task.as_str();
    if scope.wants(3) {
        let first = &checked[..EQUIVALENCE_TRIALS as usize];
        let state = first.iter().map(|(t, _)| t.state).fold(0.0, f64::max);
        let cost = first.iter().map(|(t, _)| t.cost).fold(0.0, f64::max);
        report.push(
            &format!("theorem 3: sup_t |x_PBC(t) - x_BC(2t)|_inf ({task}, {EQUIVALENCE_TRIALS} seeds)"),
            "<= 1e-6".into(),
            sci(state),
            Some(state <= 1e-6),
        );
        report.push(
            &format!("theorem 3: sup_t |J_PBC(t) - J_BC(2t)| / (1 + J) ({task}, {EQUIVALENCE_TRIALS} seeds)"),
            "<= 1e-6".into(),
            sci(cost),
            Some(cost <= 1e-6),
        );
    }
    if scope.wants(4) {
        let min = checked.iter().map(|(_, d)| d.min_margin).fold(f64::INFINITY, f64::min);
        let positive = checked
            .iter()
            .filter(|(_, d)| *d.margins.last().expect("t = 0 is present") > 0.0)
            .count();
        report.push(
            &format!("theorem 4: min_t D_BC(2t) - D_PBC(t) ({task}, {DOMINANCE_TRIALS} seeds)"),
            ">= -1e-9".into(),
            sci(min),
            Some(min >= -1e-9),
        );
        report.push(
            &format!("theorem 4: seeds with D_BC(2T) > D_PBC(T) ({task})"),
            format!(">= {}", DOMINANCE_TRIALS * 95 / 100),
            positive.to_string(),
            Some(positive as u64 >= DOMINANCE_TRIALS * 95 / 100),
        );
        if convexity == Convexity::Convex {
            let n = checked.len() as f64;
            let mean = checked.iter().map(|(_, d)| *d.margins.last().unwrap()).sum::<f64>() / n;
            let bound = *checked[0].1.convex_bound.as_ref().unwrap().last().unwrap();
            report.push(
                "theorem 4: mean margin at T vs sqrt(n) N sum c(2t)",
                sci(bound),
                sci(mean),
                None,
            );
        }
    }
    Ok(())
}

fn estimator_checks(report: &mut VerifyReport) -> Result<(), VerifyError> {
    let mut rng = Uniform(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..ESTIMATOR_INSTANCES {
        let len = 1 + rng.below(4);
        let samples = 1 + rng.below(3.min(12 / len));
        let h = random_spd(&mut rng, len);
        let x: Vec<f64> = (0..len).map(|_| rng.range(-1.0, 1.0)).collect();
        let c = 10f64.powf(rng.range(-3.0, 0.0));
        let j = |v: &[f64]| quad_form(&h, v);
        let e = enumerate_expected_gradient(&x, c, samples, &j)?;
        for i in 0..len {
            let grad: f64 = (0..len).map(|k| 2.0 * h[i * len + k] * x[k]).sum();
            worst = worst.max((e[i] - grad).abs());
        }
    }
    report.push(
        &format!("estimator: max |E[g] - 2Hx| ({ESTIMATOR_INSTANCES} quadratics, nNK <= 12)"),
        "<= 1e-12".into(),
        sci(worst),
        Some(worst <= 1e-12),
    );

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let len = 1 + rng.below(3);
        let h = random_spd(&mut rng, len);
        let x: Vec<f64> = (0..len).map(|_| rng.range(-1.0, 1.0)).collect();
        let c = rng.range(0.05, 1.0);
        let j = |v: &[f64]| quad_form(&h, v);
        let base = enumerate_estimator_variance(&x, c, 1, &j)?;
        for k in 2..=4 {
            let var = enumerate_estimator_variance(&x, c, k, &j)?;
            for (v, b) in var.iter().zip(&base) {
                worst = worst.max((v - b / k as f64).abs());
            }
        }
    }
    report.push(
        "estimator: max |Var_K - Var_1 / K| (K = 2..4)",
        "<= 1e-12".into(),
        sci(worst),
        Some(worst <= 1e-12),
    );
    Ok(())
}

fn ordering_checks(scope: &VerifyScope, report: &mut VerifyReport) -> Result<(), VerifyError> {
    let sq = |v: &[f64]| v[0] * v[0];
    let k1 = expected_next_cost(&[1.0], 0.1, 0.5, 1, &sq)?;
    let k2 = expected_next_cost(&[1.0], 0.1, 0.5, 2, &sq)?;
    let dev = (k1 - 0.6425).abs().max((k2 - 0.64125).abs());
    report.push(
        "theorem 5: E[J(x(t+1))] at x=1, a=0.1, c=0.5, J=x^2, K=1,2",
        "0.6425, 0.64125 +- 1e-12".into(),
        format!("{k1:.15}, {k2:.15}"),
        Some(dev <= 1e-12),
    );
    let r = check_k_monotonicity(&[1.0], 1, 0.1, 0.5, &[1, 2, 3], &sq, Convexity::Convex)?;
    let strict = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(" > ");
    report.push(
        "theorem 5: E[J(x(t+1))] strictly decreasing, K=1..3",
        "strict".into(),
        list(&r.next_cost),
        Some(r.verdict == Some(true) && strict(&r.next_cost)),
    );
    report.push(
        "theorem 5: E[|u|^2] strictly decreasing, K=1..3",
        "strict".into(),
        list(&r.distance_sq),
        Some(strict(&r.distance_sq)),
    );
    let diag = |v: &[f64]| v[0] * v[0] + 4.0 * v[1] * v[1];
    let r = check_k_monotonicity(&[0.3, -0.7], 1, 0.05, 0.2, &[1, 2, 3], &diag, Convexity::Convex)?;
    report.push(
        "theorem 5: diag(1,4) quadratic, E[J] and E[|u|^k] non-increasing, K=1..3",
        "convex verdict".into(),
        list(&r.next_cost),
        Some(r.verdict == Some(true) && strict(&r.next_cost)),
    );
    if scope.concave {
        let concave = |v: &[f64]| 10.0 - v[0] * v[0];
        let r = check_k_monotonicity(&[1.0], 1, 0.1, 0.5, &[1, 2, 3], &concave, Convexity::Concave)?;
        let list_up = r
            .next_cost
            .iter()
            .map(|x| format!("{x:.9}"))
            .collect::<Vec<_>>()
            .join(" < ");
        let reversed = r.next_cost.windows(2).all(|w| w[1] > w[0]);
        report.push(
            "theorem 5 (concave): E[J(x(t+1))] strictly increasing, K=1..3",
            "reversed".into(),
            list_up,
            Some(r.verdict == Some(true) && reversed),
        );
    }
    Ok(())
}

/// Runs the selected checks. Paired checks use the configured task and
/// seed with `K = 1`.
pub fn run_verify(
    config: &ExperimentConfig,
    scope: &VerifyScope,
    workers: Option<usize>,
) -> Result<VerifyReport, VerifyError> {
    let mut report = VerifyReport::default();
    if scope.wants(3) || scope.wants(4) {
        paired_checks(config, scope, workers, &mut report)?;
    }
    if scope.wants(5) {
        ordering_checks(scope, &mut report)?;
    }
    if scope.everything() || scope.estimator {
        estimator_checks(&mut report)?;
    }
    Ok(report)
}
