//! Objective functions and the barrier wrapper.
//!
//! `J(x) = rho(||x||) J_obj(x) + (1 - rho(||x||)) x^T x`, where `rho` is the
//! quintic smoothstep that is 1 inside radius `l1`, 0 outside `l2`, and C^2
//! in between.

mod assignment;
mod coverage;
mod hungarian;
mod quadratic;
mod rendezvous;
mod smooth_min;

pub use assignment::{assignment_objective, AssignmentPayload, ReassignmentPolicy};
pub use coverage::{coverage_objective, CoveragePayload};
pub use hungarian::{hungarian, Assignment};
pub use quadratic::{quadratic_objective, QuadraticPayload};
pub use rendezvous::{ring_positions, rendezvous_objective, Formation, RendezvousPayload};
pub use smooth_min::smooth_min;

use thiserror::Error;

use crate::scalar::sum_squares;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("non-finite value")]
    NonFinite,
    #[error("invalid barrier: need 0 < l1 < l2 (got l1={l1}, l2={l2})")]
    Barrier { l1: f64, l2: f64 },
    #[error("smooth-min epsilon must be negative and finite (got {0})")]
    SmoothMinEpsilon(f64),
    #[error("smooth min of an empty list")]
    EmptySmoothMin,
    #[error("invalid payload: {0}")]
    Payload(String),
}

/// Barrier radii: `J = J_obj` for `||x|| <= l1`, `J = x^T x` for `||x|| >= l2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier<T> {
    l1: T,
    l2: T,
}

impl<T: Real> Barrier<T> {
    pub fn new(l1: T, l2: T) -> Result<Self, ObjectiveError> {
        if !(l1 > T::zero() && l2 > l1 && l2.is_finite()) {
            return Err(ObjectiveError::Barrier {
                l1: l1.to_f64_lossy(),
                l2: l2.to_f64_lossy(),
            });
        }
        Ok(Self { l1, l2 })
    }

    pub fn l1(&self) -> T {
        self.l1
    }

    pub fn l2(&self) -> T {
        self.l2
    }

    /// Blend weight `rho(r)`.
    pub fn rho(&self, r: T) -> T {
        let w = (r - self.l1) / (self.l2 - self.l1);
        if w <= T::zero() {
            T::one()
        } else if w >= T::one() {
            T::zero()
        } else {
            let w3 = w * w * w;
            T::one() - w3 * (T::lit(10.0) - T::lit(15.0) * w + T::lit(6.0) * w * w)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind<T> {
    Coverage(CoveragePayload<T>),
    Rendezvous(RendezvousPayload<T>),
    Assignment(AssignmentPayload<T>),
    Quadratic(QuadraticPayload<T>),
}

impl<T> ObjectiveKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Coverage(_) => "coverage",
            ObjectiveKind::Rendezvous(_) => "rendezvous",
            ObjectiveKind::Assignment(_) => "assignment",
            ObjectiveKind::Quadratic(_) => "quadratic",
        }
    }
}

/// A task objective bound to a state layout, wrapped in the barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec<T> {
    dim: usize,
    agents: usize,
    kind: ObjectiveKind<T>,
    barrier: Barrier<T>,
    smooth_min_eps: Option<T>,
}

impl<T: Real> ObjectiveSpec<T> {
    pub fn new(
        dim: usize,
        agents: usize,
        kind: ObjectiveKind<T>,
        barrier: Barrier<T>,
        smooth_min_eps: Option<T>,
    ) -> Result<Self, ObjectiveError> {
        if let Some(eps) = smooth_min_eps {
            if !(eps < T::zero()) || !eps.is_finite() {
                return Err(ObjectiveError::SmoothMinEpsilon(eps.to_f64_lossy()));
            }
        }
        let ok = match &kind {
            ObjectiveKind::Coverage(p) => p.dim() == dim,
            ObjectiveKind::Rendezvous(p) => p.dim() == dim && p.agents() == agents,
            ObjectiveKind::Assignment(p) => p.dim() == dim && p.agents() == agents,
            ObjectiveKind::Quadratic(p) => p.size() == dim * agents,
        };
        if dim == 0 || agents == 0 || !ok {
            return Err(ObjectiveError::Payload(format!(
                "{} payload does not match layout n={dim}, N={agents}",
                kind.name()
            )));
        }
        Ok(Self {
            dim,
            agents,
            kind,
            barrier,
            smooth_min_eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn kind(&self) -> &ObjectiveKind<T> {
        &self.kind
    }

    pub fn barrier(&self) -> &Barrier<T> {
        &self.barrier
    }

    pub fn smooth_min_eps(&self) -> Option<T> {
        self.smooth_min_eps
    }

    /// Freezes state-dependent payload choices (once-at-start assignment)
    /// at the initial state.
    pub fn bind_initial(&self, x0: &[T]) -> Self {
        let mut out = self.clone();
        if let ObjectiveKind::Assignment(p) = &self.kind {
            out.kind = ObjectiveKind::Assignment(p.bind_initial(x0));
        }
        out
    }

    /// Unwrapped task objective `J_obj(x)`.
    pub fn task_value(&self, x: &[T]) -> T {
        match &self.kind {
            ObjectiveKind::Coverage(p) => coverage::coverage_value(p, x, self.smooth_min_eps),
            ObjectiveKind::Rendezvous(p) => rendezvous::rendezvous_value(p, x, self.smooth_min_eps).0,
            ObjectiveKind::Assignment(p) => assignment::assignment_value(p, x).0,
            ObjectiveKind::Quadratic(p) => p.value(x),
        }
    }

    /// Barrier-wrapped `J(x)`; `x` must have length `n * N`.
    pub fn value(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim * self.agents);
        let sq = sum_squares(x);
        let r = sq.sqrt();
        if r <= self.barrier.l1 {
            self.task_value(x)
        } else if r >= self.barrier.l2 {
            sq
        } else {
            let rho = self.barrier.rho(r);
            rho * self.task_value(x) + (T::one() - rho) * sq
        }
    }

    /// Checked `J(x)`.
    pub fn evaluate(&self, x: &[T]) -> Result<T, ObjectiveError> {
        if x.len() != self.dim * self.agents {
            return Err(ObjectiveError::Dimension {
                expected: self.dim * self.agents,
                actual: x.len(),
            });
        }
        Ok(self.value(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_spec(size: usize, l1: f64, l2: f64) -> ObjectiveSpec<f64> {
        // J_obj = 4 x^T x so the two barrier branches differ
        ObjectiveSpec::new(
            1,
            size,
            ObjectiveKind::Quadratic(QuadraticPayload::scaled_identity(size, 4.0).unwrap()),
            Barrier::new(l1, l2).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn inside_barrier_is_task_objective() {
        let s = quad_spec(2, 100.0, 101.0);
        let x = [3.0, 4.0];
        assert_eq!(s.evaluate(&x).unwrap(), s.task_value(&x));
        assert_eq!(s.evaluate(&x).unwrap(), 100.0);
    }

    #[test]
    fn outside_barrier_is_squared_norm() {
        let s = quad_spec(2, 100.0, 101.0);
        let x = [120.0, 160.0];
        assert_eq!(s.evaluate(&x).unwrap(), 40000.0);
    }

    #[test]
    fn transition_band_blends_strictly() {
        let s = quad_spec(1, 100.0, 101.0);
        let x = [100.5];
        let v = s.evaluate(&x).unwrap();
        let (inner, outer) = (4.0 * 100.5 * 100.5, 100.5 * 100.5);
        assert!(v > outer && v < inner);
        assert!((s.barrier().rho(100.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn barrier_validation() {
        assert!(Barrier::new(1.0, 1.0).is_err());
        assert!(Barrier::new(0.0, 1.0).is_err());
        assert!(Barrier::new(2.0, 1.0).is_err());
    }

    #[test]
    fn rho_is_c2_at_both_ends() {
        let b = Barrier::new(100.0, 101.0).unwrap();
        // deviation from the constant branches decays at order >= 2 (cubic)
        let dev_l1 = |h: f64| (b.rho(100.0 + h) - 1.0).abs();
        let dev_l2 = |h: f64| b.rho(101.0 - h).abs();
        for dev in [&dev_l1 as &dyn Fn(f64) -> f64, &dev_l2] {
            for h in [0.1, 0.05, 0.025] {
                let order = (dev(h) / dev(h / 2.0)).log2();
                assert!(order >= 2.0, "order {order}");
            }
        }
        // one-sided second differences shrink towards the flat branch's 0
        let d2 = |x: f64, h: f64| (b.rho(x + h) - 2.0 * b.rho(x) + b.rho(x - h)) / (h * h);
        let coarse = d2(100.0, 0.02).abs();
        let fine = d2(100.0, 0.005).abs();
        assert!(fine < coarse / 3.0);
        let coarse = d2(101.0, 0.02).abs();
        let fine = d2(101.0, 0.005).abs();
        assert!(fine < coarse / 3.0);
    }

    #[test]
    fn payload_layout_checked() {
        let q = QuadraticPayload::<f64>::scaled_identity(3, 1.0).unwrap();
        assert!(ObjectiveSpec::new(
            2,
            2,
            ObjectiveKind::Quadratic(q),
            Barrier::new(1.0, 2.0).unwrap(),
            None
        )
        .is_err());
        let q = QuadraticPayload::<f64>::scaled_identity(4, 1.0).unwrap();
        assert!(ObjectiveSpec::new(
            2,
            2,
            ObjectiveKind::Quadratic(q.clone()),
            Barrier::new(1.0, 2.0).unwrap(),
            Some(1.0)
        )
        .is_err());
        let s = ObjectiveSpec::new(
            2,
            2,
            ObjectiveKind::Quadratic(q),
            Barrier::new(1.0, 2.0).unwrap(),
            None,
        )
        .unwrap();
        assert!(matches!(
            s.evaluate(&[0.0; 3]),
            Err(ObjectiveError::Dimension { .. })
        ));
    }

    #[test]
    fn smooth_coverage_is_below_hard_coverage() {
        let grid = CoveragePayload::unit_grid(2, 0.1).unwrap();
        let mk = |eps| {
            ObjectiveSpec::new(
                2,
                2,
                ObjectiveKind::Coverage(grid.clone()),
                Barrier::new(100.0, 101.0).unwrap(),
                eps,
            )
            .unwrap()
        };
        let x = [0.3, 0.3, 0.7, 0.6];
        let hard = mk(None).value(&x);
        let soft = mk(Some(-1e4)).value(&x);
        assert!(soft <= hard && hard - soft < 2f64.ln() / 1e4 + 1e-15);
    }

    #[test]
    fn f32_spec_evaluates() {
        let s = ObjectiveSpec::<f32>::new(
            2,
            1,
            ObjectiveKind::Quadratic(QuadraticPayload::diagonal(&[1.0, 4.0]).unwrap()),
            Barrier::new(100.0, 101.0).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(s.value(&[1.0, 1.0]), 5.0f32);
    }
}
