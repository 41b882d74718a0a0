//! Stacked agent state and the single-integrator agent dynamics.

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("state layout needs positive dimension and agent count (got n={dim}, N={agents})")]
    EmptyLayout { dim: usize, agents: usize },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
}

/// Collective state of `agents` agents in `dim`-dimensional space, stored
/// agent-major: agent `i` occupies `values[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState<T> {
    dim: usize,
    agents: usize,
    values: Vec<T>,
}

impl<T: Real> CollectiveState<T> {
    pub fn new(dim: usize, agents: usize, values: Vec<T>) -> Result<Self, StateError> {
        if dim == 0 || agents == 0 {
            return Err(StateError::EmptyLayout { dim, agents });
        }
        if values.len() != dim * agents {
            return Err(StateError::LengthMismatch {
                expected: dim * agents,
                actual: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { dim, agents, values })
    }

    pub fn zeros(dim: usize, agents: usize) -> Result<Self, StateError> {
        Self::new(dim, agents, vec![T::zero(); dim * agents])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    /// Total dimension `n * N`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn agent(&self, i: usize) -> &[T] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `x(t+1) = x(t) + u(t)`, element-wise.
    pub fn apply_input(&self, input: &[T]) -> Result<Self, StateError> {
        if input.len() != self.values.len() {
            return Err(StateError::LengthMismatch {
                expected: self.values.len(),
                actual: input.len(),
            });
        }
        check_finite(input)?;
        let values: Vec<T> = self
            .values
            .iter()
            .zip(input)
            .map(|(&x, &u)| x + u)
            .collect();
        check_finite(&values)?;
        Ok(Self {
            dim: self.dim,
            agents: self.agents,
            values,
        })
    }
}

fn check_finite<T: Real>(values: &[T]) -> Result<(), StateError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(StateError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Free-function form of [`CollectiveState::apply_input`].
pub fn apply_input<T: Real>(
    x: &CollectiveState<T>,
    input: &[T],
) -> Result<CollectiveState<T>, StateError> {
    x.apply_input(input)
}
