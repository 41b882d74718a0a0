//! The BC law (two-stage physical perturbation) and the PBC law (`K` virtual
//! perturbations evaluated by the supervisor) as pure step functions.
//!
//! Both laws are split into the supervisor side, which evaluates `J` and
//! produces the broadcast signal, and the agent side, which computes each
//! agent's input from the broadcast, its own signs and the gains only.

use thiserror::Error;

use crate::gains::GainSchedule;
use crate::rng::PerturbationBlock;
use crate::scalar::sign_value;
use crate::state::{CollectiveState, StateError};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("objective returned a non-finite value")]
    NonFiniteCost,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("BC step at t={t} does not match the local controller phase")]
    Phase { t: u64 },
    #[error("gains must be positive")]
    Gains,
    #[error(transparent)]
    State(#[from] StateError),
}

fn finite_cost<T: Real>(v: T) -> Result<T, ControlError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ControlError::NonFiniteCost)
    }
}

/// Local controller state of the BC law, stacked over agents.
#[derive(Debug, Clone, PartialEq)]
pub struct BcLocalState<T> {
    /// Stored perturbation signs (all zero before the first even step).
    pub phi1: Vec<i8>,
    /// Broadcast value remembered from the preceding even step.
    pub phi2: T,
    /// Whether the next step is an odd (correction) step.
    pub odd_next: bool,
}

impl<T: Real> BcLocalState<T> {
    /// `phi(0) = 0`.
    pub fn initial(len: usize) -> Self {
        Self {
            phi1: vec![0; len],
            phi2: T::zero(),
            odd_next: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcStep<T> {
    pub state: CollectiveState<T>,
    pub local: BcLocalState<T>,
    pub input: Vec<T>,
    /// The broadcast `nu(t) = J(x(t))`.
    pub broadcast: T,
}

/// Agent-side BC law, even step: probe along the agent's own signs.
fn bc_even_input<T: Real>(own_sigma: &[i8], c: T, out: &mut [T]) {
    for (u, &s) in out.iter_mut().zip(own_sigma) {
        *u = c * sign_value::<T>(s);
    }
}

/// Agent-side BC law, odd step, with `g = (nu - phi2) / c`.
fn bc_odd_input<T: Real>(own_phi1: &[i8], g: T, a: T, c: T, out: &mut [T]) {
    for (u, &p) in out.iter_mut().zip(own_phi1) {
        let p = sign_value::<T>(p);
        // phi1 entries are +-1, so phi1^(-1) = phi1
        *u = -c * p - a * (g * p);
    }
}

/// One BC step at time `t`. `sigma` is the `k = 0` sign vector for logical
/// step `t / 2`; it is read on even steps only. Gains are the stair-stepped
/// BC gains for `t`.
pub fn bc_step<T: Real, F: Fn(&[T]) -> T>(
    x: &CollectiveState<T>,
    local: &BcLocalState<T>,
    t: u64,
    sched: &GainSchedule<T>,
    sigma: &[i8],
    cost: &F,
) -> Result<BcStep<T>, ControlError> {
    let odd = t % 2 == 1;
    if odd != local.odd_next {
        return Err(ControlError::Phase { t });
    }
    let len = x.len();
    if sigma.len() != len || local.phi1.len() != len {
        return Err(ControlError::Dimension {
            expected: len,
            actual: if sigma.len() != len {
                sigma.len()
            } else {
                local.phi1.len()
            },
        });
    }
    let (a, c) = sched.bc_gains_at(t);
    let nu = finite_cost(cost(x.values()))?;

    let dim = x.dim();
    let mut input = vec![T::zero(); len];
    for i in 0..x.agents() {
        let r = i * dim..(i + 1) * dim;
        if odd {
            bc_odd_input(&local.phi1[r.clone()], (nu - local.phi2) / c, a, c, &mut input[r]);
        } else {
            bc_even_input(&sigma[r.clone()], c, &mut input[r]);
        }
    }
    let next_local = if odd {
        BcLocalState {
            phi1: local.phi1.clone(),
            phi2: local.phi2,
            odd_next: false,
        }
    } else {
        BcLocalState {
            phi1: sigma.to_vec(),
            phi2: nu,
            odd_next: true,
        }
    };
    Ok(BcStep {
        state: x.apply_input(&input)?,
        local: next_local,
        input,
        broadcast: nu,
    })
}

/// Broadcast signal of the PBC law.
#[derive(Debug, Clone, PartialEq)]
pub struct PbcBroadcast<T> {
    /// `nu[k] = J(x + c sigma^(k)) - J(x)`.
    pub nu: Vec<T>,
    /// `J(x)`, evaluated once.
    pub base: T,
}

/// Supervisor side of the PBC law: `K + 1` objective evaluations.
pub fn pbc_broadcast<T: Real, F: Fn(&[T]) -> T>(
    x: &CollectiveState<T>,
    block: &PerturbationBlock,
    c: T,
    cost: &F,
) -> Result<PbcBroadcast<T>, ControlError> {
    if !(c > T::zero()) {
        return Err(ControlError::Gains);
    }
    if block.len() != x.len() {
        return Err(ControlError::Dimension {
            expected: x.len(),
            actual: block.len(),
        });
    }
    let base = finite_cost(cost(x.values()))?;
    let mut probe = vec![T::zero(); x.len()];
    let mut nu = Vec::with_capacity(block.samples());
    for sigma in block.iter() {
        for ((p, &xv), &s) in probe.iter_mut().zip(x.values()).zip(sigma) {
            *p = xv + c * sign_value::<T>(s);
        }
        nu.push(finite_cost(cost(&probe))? - base);
    }
    Ok(PbcBroadcast { nu, base })
}

/// Agent side of the PBC law:
/// `u_i = -a (1/K) sum_k (nu[k] / c) sigma_i^(k)`.
pub fn pbc_local_input<T: Real>(
    broadcast: &PbcBroadcast<T>,
    block: &PerturbationBlock,
    dim: usize,
    a: T,
    c: T,
) -> Result<Vec<T>, ControlError> {
    if broadcast.nu.len() != block.samples() {
        return Err(ControlError::Dimension {
            expected: block.samples(),
            actual: broadcast.nu.len(),
        });
    }
    if dim == 0 || !block.len().is_multiple_of(dim) {
        return Err(ControlError::Dimension {
            expected: dim,
            actual: block.len(),
        });
    }
    if !(a >= T::zero() && c > T::zero()) {
        return Err(ControlError::Gains);
    }
    let scaled: Vec<T> = broadcast.nu.iter().map(|&v| v / c).collect();
    let k_count = T::from_count(block.samples());
    let mut input = vec![T::zero(); block.len()];
    for agent in 0..block.len() / dim {
        let r = agent * dim..(agent + 1) * dim;
        for (d, u) in input[r.clone()].iter_mut().enumerate() {
            let idx = r.start + d;
            let mut acc = T::zero();
            for (k, &w) in scaled.iter().enumerate() {
                acc += w * sign_value::<T>(block.sample(k)[idx]);
            }
            *u = -a * (acc / k_count);
        }
    }
    Ok(input)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbcStep<T> {
    pub state: CollectiveState<T>,
    pub input: Vec<T>,
    pub broadcast: PbcBroadcast<T>,
}

/// One PBC step at time `t`; agents move once, virtual states are discarded.
pub fn pbc_step<T: Real, F: Fn(&[T]) -> T>(
    x: &CollectiveState<T>,
    t: u64,
    sched: &GainSchedule<T>,
    block: &PerturbationBlock,
    cost: &F,
) -> Result<PbcStep<T>, ControlError> {
    let (a, c) = sched.pbc_gains_at(t);
    pbc_step_with_gains(x, a, c, block, cost)
}

/// [`pbc_step`] with explicit gains.
pub fn pbc_step_with_gains<T: Real, F: Fn(&[T]) -> T>(
    x: &CollectiveState<T>,
    a: T,
    c: T,
    block: &PerturbationBlock,
    cost: &F,
) -> Result<PbcStep<T>, ControlError> {
    let broadcast = pbc_broadcast(x, block, c, cost)?;
    let input = pbc_local_input(&broadcast, block, x.dim(), a, c)?;
    Ok(PbcStep {
        state: x.apply_input(&input)?,
        input,
        broadcast,
    })
}

/// BC even-then-odd pair with explicit gains; used to compare against a
/// single PBC step.
pub fn bc_two_stage_with_gains<T: Real, F: Fn(&[T]) -> T>(
    x: &CollectiveState<T>,
    a: T,
    c: T,
    sigma: &[i8],
    cost: &F,
) -> Result<CollectiveState<T>, ControlError> {
    if sigma.len() != x.len() {
        return Err(ControlError::Dimension {
            expected: x.len(),
            actual: sigma.len(),
        });
    }
    let dim = x.dim();
    let nu0 = finite_cost(cost(x.values()))?;
    let mut u = vec![T::zero(); x.len()];
    for i in 0..x.agents() {
        let r = i * dim..(i + 1) * dim;
        bc_even_input(&sigma[r.clone()], c, &mut u[r]);
    }
    let mid = x.apply_input(&u)?;
    let nu1 = finite_cost(cost(mid.values()))?;
    for i in 0..x.agents() {
        let r = i * dim..(i + 1) * dim;
        bc_odd_input(&sigma[r.clone()], (nu1 - nu0) / c, a, c, &mut u[r]);
    }
    Ok(mid.apply_input(&u)?)
}
