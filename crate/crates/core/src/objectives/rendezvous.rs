//! Rendezvous with formation selection.

use std::f64::consts::PI;

use crate::Real;

use super::smooth_min::smooth_min_unchecked;
use super::ObjectiveError;

/// Target positions `y_i(theta)` for one formation parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation<T> {
    pub theta: i64,
    /// Flat, `dim` values per agent.
    pub positions: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RendezvousPayload<T> {
    dim: usize,
    agents: usize,
    formations: Vec<Formation<T>>,
}

impl<T: Real> RendezvousPayload<T> {
    pub fn new(
        dim: usize,
        agents: usize,
        mut formations: Vec<Formation<T>>,
    ) -> Result<Self, ObjectiveError> {
        if formations.is_empty() {
            return Err(ObjectiveError::Payload(
                "formation family must be non-empty".into(),
            ));
        }
        for f in &formations {
            if f.positions.len() != dim * agents {
                return Err(ObjectiveError::Payload(format!(
                    "formation {} has {} values, expected {}",
                    f.theta,
                    f.positions.len(),
                    dim * agents
                )));
            }
            if f.positions.iter().any(|v| !v.is_finite()) {
                return Err(ObjectiveError::NonFinite);
            }
        }
        formations.sort_by_key(|f| f.theta);
        if formations.windows(2).any(|w| w[0].theta == w[1].theta) {
            return Err(ObjectiveError::Payload("duplicate formation parameter".into()));
        }
        Ok(Self {
            dim,
            agents,
            formations,
        })
    }

    /// Planar ring family `y_i(theta) = r [cos(2 pi (i + theta) / N), sin(2 pi (i + theta) / N)]`
    /// with agents numbered `i = 1..N` and `theta` ranging over `thetas`.
    pub fn ring(
        agents: usize,
        radius: T,
        thetas: impl IntoIterator<Item = i64>,
    ) -> Result<Self, ObjectiveError> {
        let formations = thetas
            .into_iter()
            .map(|theta| Formation {
                theta,
                positions: ring_positions(agents, radius, theta),
            })
            .collect();
        Self::new(2, agents, formations)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn formations(&self) -> &[Formation<T>] {
        &self.formations
    }
}

/// Ring targets for a single `theta`, agents numbered from 1.
pub fn ring_positions<T: Real>(agents: usize, radius: T, theta: i64) -> Vec<T> {
    let mut out = Vec::with_capacity(2 * agents);
    for i in 1..=agents {
        let angle = 2.0 * PI * (i as f64 + theta as f64) / agents as f64;
        out.push(radius * T::lit(angle.cos()));
        out.push(radius * T::lit(angle.sin()));
    }
    out
}

/// `(1/N^2) sum_i sum_j ||x_i - x_j - (y_i - y_j)||^2` for one formation.
fn formation_cost<T: Real>(dim: usize, agents: usize, x: &[T], y: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..agents {
        let xi = &x[i * dim..(i + 1) * dim];
        let yi = &y[i * dim..(i + 1) * dim];
        for j in 0..agents {
            let xj = &x[j * dim..(j + 1) * dim];
            let yj = &y[j * dim..(j + 1) * dim];
            for d in 0..dim {
                let e = xi[d] - xj[d] - (yi[d] - yj[d]);
                acc += e * e;
            }
        }
    }
    let n = T::from_count(agents);
    acc / (n * n)
}

/// Minimum over the family plus its argmin (smallest `theta` on ties). With
/// `smooth_eps` the value is the smooth minimum over formations.
pub(crate) fn rendezvous_value<T: Real>(
    payload: &RendezvousPayload<T>,
    x: &[T],
    smooth_eps: Option<T>,
) -> (T, i64) {
    let costs: Vec<T> = payload
        .formations
        .iter()
        .map(|f| formation_cost(payload.dim, payload.agents, x, &f.positions))
        .collect();
    let mut best = 0;
    for (k, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = k;
        }
    }
    let value = match smooth_eps {
        Some(eps) => smooth_min_unchecked(&costs, eps),
        None => costs[best],
    };
    (value, payload.formations[best].theta)
}

pub fn rendezvous_objective<T: Real>(
    payload: &RendezvousPayload<T>,
    x: &[T],
) -> Result<(T, i64), ObjectiveError> {
    if x.len() != payload.dim * payload.agents {
        return Err(ObjectiveError::Dimension {
            expected: payload.dim * payload.agents,
            actual: x.len(),
        });
    }
    Ok(rendezvous_value(payload, x, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_agent_hand_value() {
        let p = RendezvousPayload::new(
            1,
            2,
            vec![Formation {
                theta: 1,
                positions: vec![1.0, 0.0],
            }],
        )
        .unwrap();
        let (v, th) = rendezvous_objective(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(th, 1);
    }

    #[test]
    fn translated_formation_costs_zero() {
        let n = 15;
        let p = RendezvousPayload::<f64>::ring(n, 0.2, 1..=n as i64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let theta = rng.gen_range(1..=n as i64);
            let off = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x: Vec<f64> = ring_positions(n, 0.2, theta)
                .chunks(2)
                .flat_map(|y| [y[0] + off[0], y[1] + off[1]])
                .collect();
            let (v, th) = rendezvous_objective(&p, &x).unwrap();
            assert!(v < 1e-28, "{v}");
            let zero_cost = formation_cost(2, n, &x, &ring_positions(n, 0.2, th));
            assert!(zero_cost < 1e-28);
        }
    }

    #[test]
    fn zero_value_implies_a_translated_formation() {
        let n = 6;
        let p = RendezvousPayload::<f64>::ring(n, 0.2, 1..=n as i64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (v, th) = rendezvous_objective(&p, &x).unwrap();
            assert!(v > 1e-6);
            // reconstruct the translated formation and re-evaluate
            let y = ring_positions(n, 0.2, th);
            let off = [x[0] - y[0], x[1] - y[1]];
            let z: Vec<f64> = y.chunks(2).flat_map(|q| [q[0] + off[0], q[1] + off[1]]).collect();
            let (vz, _) = rendezvous_objective(&p, &z).unwrap();
            assert!(vz < 1e-28);
            // every agent of a zero-cost state sits at y_i(th) + common offset
            for (a, q) in z.chunks(2).zip(y.chunks(2)) {
                assert!((a[0] - q[0] - off[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cyclic_relabeling_is_invariant() {
        let n = 15;
        let p = RendezvousPayload::<f64>::ring(n, 0.2, 1..=n as i64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
            // x'_i = x_{i+1}
            let shifted: Vec<f64> = (0..n)
                .flat_map(|i| {
                    let j = (i + 1) % n;
                    [x[2 * j], x[2 * j + 1]]
                })
                .collect();
            let (a, _) = rendezvous_objective(&p, &x).unwrap();
            let (b, _) = rendezvous_objective(&p, &shifted).unwrap();
            assert!((a - b).abs() <= 1e-14 * (1.0 + a), "{a} {b}");
        }
    }

    #[test]
    fn ties_pick_smallest_theta() {
        let p = RendezvousPayload::new(
            1,
            2,
            vec![
                Formation {
                    theta: 9,
                    positions: vec![0.0, 0.0],
                },
                Formation {
                    theta: 4,
                    positions: vec![1.0, 1.0],
                },
            ],
        )
        .unwrap();
        assert_eq!(rendezvous_objective(&p, &[0.3, 0.3]).unwrap(), (0.0, 4));
    }

    #[test]
    fn rejects_bad_family() {
        assert!(RendezvousPayload::<f64>::new(1, 2, vec![]).is_err());
        assert!(RendezvousPayload::new(
            1,
            2,
            vec![Formation {
                theta: 0,
                positions: vec![0.0]
            }]
        )
        .is_err());
    }
}
