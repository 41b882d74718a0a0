//! Quadratic form `x^T H x`, the analytic test objective for the oracles.

use crate::Real;

use super::ObjectiveError;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPayload<T> {
    size: usize,
    /// Row-major `size x size`.
    h: Vec<T>,
}

impl<T: Real> QuadraticPayload<T> {
    /// Symmetric `H` given row-major. Asymmetric or non-finite matrices are
    /// rejected.
    pub fn new(size: usize, h: Vec<T>) -> Result<Self, ObjectiveError> {
        if size == 0 || h.len() != size * size {
            return Err(ObjectiveError::Payload(format!(
                "quadratic matrix must be {size}x{size}"
            )));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFinite);
        }
        for i in 0..size {
            for j in (i + 1)..size {
                if h[i * size + j] != h[j * size + i] {
                    return Err(ObjectiveError::Payload(format!(
                        "quadratic matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { size, h })
    }

    pub fn diagonal(diag: &[T]) -> Result<Self, ObjectiveError> {
        let n = diag.len();
        let mut h = vec![T::zero(); n * n];
        for (i, &d) in diag.iter().enumerate() {
            h[i * n + i] = d;
        }
        Self::new(n, h)
    }

    /// `H = s I`.
    pub fn scaled_identity(size: usize, s: T) -> Result<Self, ObjectiveError> {
        Self::diagonal(&vec![s; size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn matrix(&self) -> &[T] {
        &self.h
    }

    pub fn value(&self, x: &[T]) -> T {
        let n = self.size;
        let mut acc = T::zero();
        for i in 0..n {
            let row = &self.h[i * n..(i + 1) * n];
            let mut hx = T::zero();
            for (hij, &xj) in row.iter().zip(x) {
                hx += *hij * xj;
            }
            acc += x[i] * hx;
        }
        acc
    }

    /// Analytic gradient `2 H x`.
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let n = self.size;
        let two = T::lit(2.0);
        (0..n)
            .map(|i| {
                let mut hx = T::zero();
                for (&h, &xj) in self.h[i * n..(i + 1) * n].iter().zip(x) {
                    hx += h * xj;
                }
                two * hx
            })
            .collect()
    }
}

/// `x^T H x` for a payload of matching size.
pub fn quadratic_objective<T: Real>(
    payload: &QuadraticPayload<T>,
    x: &[T],
) -> Result<T, ObjectiveError> {
    if x.len() != payload.size {
        return Err(ObjectiveError::Dimension {
            expected: payload.size,
            actual: x.len(),
        });
    }
    Ok(payload.value(x))
}
