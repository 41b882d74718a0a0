//! Target assignment objective `sum_i ||x_i - y_{S_i}||^2`.

use crate::Real;

use super::coverage::squared_distance;
use super::hungarian::hungarian;
use super::ObjectiveError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReassignmentPolicy {
    /// Solve the assignment at every evaluation.
    EveryStep,
    /// Solve once from the initial state and keep that assignment.
    OnceAtStart,
}

impl ReassignmentPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReassignmentPolicy::EveryStep => "every-step",
            ReassignmentPolicy::OnceAtStart => "once-at-start",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentPayload<T> {
    dim: usize,
    targets: Vec<T>,
    policy: ReassignmentPolicy,
    fixed: Option<Vec<usize>>,
}

impl<T: Real> AssignmentPayload<T> {
    /// `targets` holds one `dim`-vector per agent.
    pub fn new(
        dim: usize,
        targets: Vec<T>,
        policy: ReassignmentPolicy,
    ) -> Result<Self, ObjectiveError> {
        if dim == 0 || targets.is_empty() || !targets.len().is_multiple_of(dim) {
            return Err(ObjectiveError::Payload(
                "assignment targets must be whole points".into(),
            ));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFinite);
        }
        Ok(Self {
            dim,
            targets,
            policy,
            fixed: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> usize {
        self.targets.len() / self.dim
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn policy(&self) -> ReassignmentPolicy {
        self.policy
    }

    /// Assignment frozen by [`AssignmentPayload::bind_initial`], if any.
    pub fn fixed(&self) -> Option<&[usize]> {
        self.fixed.as_deref()
    }

    /// For the once-at-start policy, solves the assignment at `x0` and
    /// freezes it. Every-step payloads are returned unchanged.
    pub fn bind_initial(&self, x0: &[T]) -> Self {
        let mut out = self.clone();
        if self.policy == ReassignmentPolicy::OnceAtStart {
            out.fixed = Some(self.solve(x0).1);
        }
        out
    }

    fn cost_matrix(&self, x: &[T]) -> Vec<T> {
        let n = self.agents();
        let d = self.dim;
        let mut c = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                c.push(squared_distance(
                    &x[i * d..(i + 1) * d],
                    &self.targets[j * d..(j + 1) * d],
                ));
            }
        }
        c
    }

    fn solve(&self, x: &[T]) -> (T, Vec<usize>) {
        let n = self.agents();
        let c = self.cost_matrix(x);
        // finite state and targets give a finite matrix
        let a = hungarian(n, &c).expect("finite cost matrix");
        (a.cost, a.perm)
    }
}

pub(crate) fn assignment_value<T: Real>(payload: &AssignmentPayload<T>, x: &[T]) -> (T, Vec<usize>) {
    match &payload.fixed {
        Some(perm) => {
            let d = payload.dim;
            let mut acc = T::zero();
            for (i, &j) in perm.iter().enumerate() {
                acc += squared_distance(&x[i * d..(i + 1) * d], &payload.targets[j * d..(j + 1) * d]);
            }
            (acc, perm.clone())
        }
        None => {
            if x.iter().any(|v| !v.is_finite()) {
                return (T::nan(), (0..payload.agents()).collect());
            }
            payload.solve(x)
        }
    }
}

pub fn assignment_objective<T: Real>(
    payload: &AssignmentPayload<T>,
    x: &[T],
) -> Result<(T, Vec<usize>), ObjectiveError> {
    if x.len() != payload.targets.len() {
        return Err(ObjectiveError::Dimension {
            expected: payload.targets.len(),
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ObjectiveError::NonFinite);
    }
    Ok(assignment_value(payload, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn identity_at_targets() {
        let y = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let p = AssignmentPayload::new(2, y.clone(), ReassignmentPolicy::EveryStep).unwrap();
        let (v, s) = assignment_objective(&p, &y).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(s, vec![0, 1, 2]);
    }

    #[test]
    fn crossing_pair_swaps() {
        let p = AssignmentPayload::new(1, vec![9.0, 1.0], ReassignmentPolicy::EveryStep).unwrap();
        let (v, s) = assignment_objective(&p, &[0.0, 10.0]).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(s, vec![1, 0]);
    }

    #[test]
    fn seven_agents_match_exhaustive_search() {
        let perms = permutations(7);
        assert_eq!(perms.len(), 5040);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let y: Vec<f64> = (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = AssignmentPayload::new(2, y.clone(), ReassignmentPolicy::EveryStep).unwrap();
            let (v, _) = assignment_objective(&p, &x).unwrap();
            let best = perms
                .iter()
                .map(|perm| {
                    perm.iter().enumerate().fold(0.0, |acc, (i, &j)| {
                        acc + squared_distance(&x[2 * i..2 * i + 2], &y[2 * j..2 * j + 2])
                    })
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(v, best);
        }
    }

    #[test]
    fn once_at_start_freezes_assignment() {
        let p = AssignmentPayload::new(1, vec![9.0, 1.0], ReassignmentPolicy::OnceAtStart).unwrap();
        let bound = p.bind_initial(&[0.0, 10.0]);
        assert_eq!(bound.fixed(), Some(&[1usize, 0][..]));
        // crossing to the other side no longer reassigns
        let (v, s) = assignment_objective(&bound, &[10.0, 0.0]).unwrap();
        assert_eq!(s, vec![1, 0]);
        assert_eq!(v, 81.0 + 81.0);
        let every = AssignmentPayload::new(1, vec![9.0, 1.0], ReassignmentPolicy::EveryStep).unwrap();
        assert_eq!(every.bind_initial(&[0.0, 10.0]).fixed(), None);
    }
}
