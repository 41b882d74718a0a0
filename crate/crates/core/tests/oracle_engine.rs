#![allow(clippy::field_reassign_with_default)]

use pbc_core::config::{ExperimentConfig, TaskKind};
use pbc_core::controllers::pbc_step_with_gains;
use pbc_core::oracle::{expected_next_cost, finite_difference_gradient};
use pbc_core::rng::draw_block;
use pbc_core::CollectiveState;

#[test]
fn sampled_steps_match_enumerated_expectation() {
    let h = [1.0, 4.0, 0.5];
    let j = |x: &[f64]| x.iter().zip(&h).map(|(v, w)| w * v * v).sum::<f64>();
    let x0 = [0.4, -0.3, 0.8];
    let (a, c) = (0.05, 0.2);
    for k in [1usize, 2, 3] {
        let exact = expected_next_cost(&x0, a, c, k, &j).unwrap();
        let x = CollectiveState::new(1, 3, x0.to_vec()).unwrap();
        let n = 100_000u64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for t in 0..n {
            let block = draw_block(11, 0, t, 1, 3, k);
            let step = pbc_step_with_gains(&x, a, c, &block, &j).unwrap();
            let v = j(step.state.values());
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / (n as f64 - 1.0)).sqrt();
        assert!((mean - exact).abs() <= 4.0 * se, "K={k}: {mean} vs {exact} (se {se})");
    }
}

#[test]
fn coverage_gradient_matches_partition_formula() {
    let mut c = ExperimentConfig::default();
    c.task = TaskKind::Coverage;
    let objective = c.objective().unwrap();
    // break the ring's symmetry so no grid point is equidistant to two agents
    let values: Vec<f64> = c
        .initial()
        .unwrap()
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v + 0.013 * ((i as f64 + 1.0) * 1.618).sin())
        .collect();
    let x = CollectiveState::new(2, 15, values).unwrap();
    let fd = finite_difference_gradient(&|v: &[f64]| objective.value(v), x.values(), 1e-7).unwrap();

    // grad_i = (2 V / Nq) sum over grid points nearest to agent i of (x_i - q)
    let pts: Vec<[f64; 2]> = (0..=100)
        .flat_map(|a| (0..=100).map(move |b| [a as f64 / 100.0, b as f64 / 100.0]))
        .collect();
    let mut grad = vec![0.0; 30];
    for q in &pts {
        let (best, _) = (0..15)
            .map(|i| {
                let d = (x.agent(i)[0] - q[0]).powi(2) + (x.agent(i)[1] - q[1]).powi(2);
                (i, d)
            })
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        for d in 0..2 {
            grad[2 * best + d] += 2.0 * (x.agent(best)[d] - q[d]) / pts.len() as f64;
        }
    }
    for (a, b) in fd.iter().zip(&grad) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
