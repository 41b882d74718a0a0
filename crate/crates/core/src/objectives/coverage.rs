//! Grid-quadrature coverage objective.

use crate::Real;

use super::smooth_min::smooth_min_unchecked;
use super::ObjectiveError;

/// Sample points `q_j` (flat, `dim` per point) and the workspace volume.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePayload<T> {
    dim: usize,
    points: Vec<T>,
    volume: T,
}

impl<T: Real> CoveragePayload<T> {
    pub fn new(dim: usize, points: Vec<T>, volume: T) -> Result<Self, ObjectiveError> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(ObjectiveError::Payload(
                "coverage grid must be a non-empty list of points".into(),
            ));
        }
        if !(volume > T::zero()) {
            return Err(ObjectiveError::Payload(
                "coverage volume must be positive".into(),
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFinite);
        }
        Ok(Self {
            dim,
            points,
            volume,
        })
    }

    /// Regular grid on `[0,1]^dim` with both endpoints included:
    /// `round(1/spacing) + 1` points per axis, volume 1.
    pub fn unit_grid(dim: usize, spacing: T) -> Result<Self, ObjectiveError> {
        if !(spacing > T::zero() && spacing < T::one()) {
            return Err(ObjectiveError::Payload(
                "grid spacing must lie in (0, 1)".into(),
            ));
        }
        let per_axis = (T::one() / spacing)
            .round()
            .to_usize()
            .ok_or_else(|| ObjectiveError::Payload("grid spacing too small".into()))?
            + 1;
        let total = per_axis
            .checked_pow(dim as u32)
            .filter(|&t| t <= 50_000_000)
            .ok_or_else(|| ObjectiveError::Payload("coverage grid too large".into()))?;
        let mut points = Vec::with_capacity(total * dim);
        for idx in 0..total {
            // first coordinate varies slowest
            let mut rem = idx;
            let mut coords = vec![T::zero(); dim];
            for d in (0..dim).rev() {
                coords[d] = T::from_count(rem % per_axis) * spacing;
                rem /= per_axis;
            }
            points.extend(coords);
        }
        Self::new(dim, points, T::one())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn volume(&self) -> T {
        self.volume
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }
}

/// `(V_q / N_q) sum_j min_i ||q_j - x_i||^2`; with `smooth_eps`, the inner
/// minimum is the log-sum-exp smooth minimum.
pub(crate) fn coverage_value<T: Real>(
    payload: &CoveragePayload<T>,
    x: &[T],
    smooth_eps: Option<T>,
) -> T {
    let dim = payload.dim;
    let agents = x.len() / dim;
    let mut total = T::zero();
    match smooth_eps {
        None if dim == 2 => {
            for q in payload.points.chunks_exact(2) {
                let (qx, qy) = (q[0], q[1]);
                let mut best = T::infinity();
                for a in x.chunks_exact(2) {
                    let dx = qx - a[0];
                    let dy = qy - a[1];
                    let d = dx * dx + dy * dy;
                    if d < best {
                        best = d;
                    }
                }
                total += best;
            }
        }
        None => {
            for q in payload.points.chunks_exact(dim) {
                let mut best = T::infinity();
                for a in x.chunks_exact(dim) {
                    let d = squared_distance(q, a);
                    if d < best {
                        best = d;
                    }
                }
                total += best;
            }
        }
        Some(eps) => {
            let mut buf = vec![T::zero(); agents];
            for q in payload.points.chunks_exact(dim) {
                for (slot, a) in buf.iter_mut().zip(x.chunks_exact(dim)) {
                    *slot = squared_distance(q, a);
                }
                total += smooth_min_unchecked(&buf, eps);
            }
        }
    }
    payload.volume / T::from_count(payload.len()) * total
}

#[inline]
pub(crate) fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&p, &q) in a.iter().zip(b) {
        let d = p - q;
        acc += d * d;
    }
    acc
}

/// Checked entry point: `x` must hold whole agents of the payload dimension.
pub fn coverage_objective<T: Real>(
    payload: &CoveragePayload<T>,
    x: &[T],
) -> Result<T, ObjectiveError> {
    if x.is_empty() || !x.len().is_multiple_of(payload.dim) {
        return Err(ObjectiveError::Dimension {
            expected: payload.dim,
            actual: x.len(),
        });
    }
    Ok(coverage_value(payload, x, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_agent_on_unit_grid() {
        let g = CoveragePayload::<f64>::unit_grid(2, 0.01).unwrap();
        assert_eq!(g.len(), 10201);
        // per-axis second moment of {0, 0.01, ..., 1} about 0.5 is 0.085
        let one_axis: f64 = (0..=100).map(|k| (0.01 * k as f64 - 0.5).powi(2)).sum::<f64>() / 101.0;
        assert!((one_axis - 0.085).abs() < 1e-12);
        let v = coverage_objective(&g, &[0.5, 0.5]).unwrap();
        assert!((v - 0.17).abs() < 1e-12, "{v}");
    }

    #[test]
    fn agents_on_every_point_cover_exactly() {
        let g = CoveragePayload::<f64>::unit_grid(2, 0.5).unwrap();
        assert_eq!(g.len(), 9);
        let x = g.points().to_vec();
        assert_eq!(coverage_objective(&g, &x).unwrap(), 0.0);
    }

    #[test]
    fn two_agents_beat_one() {
        let g = CoveragePayload::<f64>::unit_grid(2, 0.01).unwrap();
        let one = coverage_objective(&g, &[0.5, 0.5]).unwrap();
        let two = coverage_objective(&g, &[0.25, 0.5, 0.75, 0.5]).unwrap();
        assert!(two < one);
    }

    #[test]
    fn adding_an_agent_never_increases_cost() {
        let g = CoveragePayload::<f64>::unit_grid(2, 0.05).unwrap();
        let mut x = vec![0.1, 0.7, 0.4, 0.2];
        let mut prev = coverage_objective(&g, &x).unwrap();
        for k in 0..20 {
            let t = k as f64 * 0.37;
            x.extend([t.sin() * 1.3, (t * 1.7).cos() * 0.8]);
            let v = coverage_objective(&g, &x).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn general_dimension_path_matches_planar_path() {
        let g = CoveragePayload::<f64>::unit_grid(2, 0.1).unwrap();
        let x = [0.2, 0.3, 0.9, 0.1, 0.5, 0.55];
        let fast = coverage_value(&g, &x, None);
        let mut total = 0.0;
        for q in g.points().chunks_exact(2) {
            total += x
                .chunks_exact(2)
                .map(|a| squared_distance(q, a))
                .fold(f64::INFINITY, f64::min);
        }
        assert_eq!(fast, total / g.len() as f64);
    }

    #[test]
    fn one_dimensional_grid() {
        let g = CoveragePayload::<f64>::unit_grid(1, 0.25).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let v = coverage_objective(&g, &[0.5]).unwrap();
        assert!((v - (0.25 + 0.0625 + 0.0 + 0.0625 + 0.25) / 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_payloads() {
        assert!(CoveragePayload::<f64>::unit_grid(2, 0.0).is_err());
        assert!(CoveragePayload::<f64>::unit_grid(2, 1.0).is_err());
        assert!(CoveragePayload::<f64>::new(2, vec![], 1.0).is_err());
        assert!(CoveragePayload::<f64>::new(2, vec![0.0, 0.0], 0.0).is_err());
        let g = CoveragePayload::<f64>::unit_grid(2, 0.5).unwrap();
        assert!(coverage_objective(&g, &[0.0, 0.0, 1.0]).is_err());
    }
}
