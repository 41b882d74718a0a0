//! Power-law gain schedules `a(t) = a0 / (t + t_v)^a_p`, `c(t) = c0 / (t + t_v)^c_p`.
//!
//! A schedule is validated once at construction against the step-size
//! conditions required for convergence; an invalid parameter set never
//! becomes a [`GainSchedule`].

use std::fmt;

use thiserror::Error;

use crate::Real;

/// One of the inequalities a valid schedule must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GainCondition {
    /// `a0 > 0`
    PositiveA0,
    /// `c0 > 0`
    PositiveC0,
    /// `t_v > 0`
    PositiveOffset,
    /// `0 < a_p <= 1`
    StepExponentRange,
    /// `c_p > 0`
    PositiveProbeExponent,
    /// `2 a_p - 2 c_p > 1`
    SquaredRatioSummable,
    /// `a_p + 2 c_p > 1`
    StepProbeSquaredSummable,
}

impl GainCondition {
    pub fn describe(&self) -> &'static str {
        match self {
            GainCondition::PositiveA0 => "a0>0",
            GainCondition::PositiveC0 => "c0>0",
            GainCondition::PositiveOffset => "t_v>0",
            GainCondition::StepExponentRange => "0<a_p<=1",
            GainCondition::PositiveProbeExponent => "c_p>0",
            GainCondition::SquaredRatioSummable => "2a_p-2c_p>1",
            GainCondition::StepProbeSquaredSummable => "a_p+2c_p>1",
        }
    }
}

impl fmt::Display for GainCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid gain schedule: violates {}", .violations.iter().map(|c| c.describe()).collect::<Vec<_>>().join(", "))]
pub struct GainError {
    pub violations: Vec<GainCondition>,
}

/// Raw, unvalidated schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainParams<T> {
    pub a0: T,
    pub a_p: T,
    pub c0: T,
    pub c_p: T,
    pub t_v: T,
}

impl<T: Real> GainParams<T> {
    /// Schedule used in every experiment of the reference study.
    pub fn reference() -> Self {
        Self {
            a0: T::lit(2.0),
            a_p: T::lit(0.7),
            c0: T::lit(0.003),
            c_p: T::lit(0.16),
            t_v: T::lit(20.0),
        }
    }
}

/// Lists every violated condition; empty means valid.
pub fn validate_schedule<T: Real>(p: &GainParams<T>) -> Vec<GainCondition> {
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    let mut out = Vec::new();
    // `!(x > 0)` so that NaN parameters are reported too.
    if !(p.a0 > zero) {
        out.push(GainCondition::PositiveA0);
    }
    if !(p.c0 > zero) {
        out.push(GainCondition::PositiveC0);
    }
    if !(p.t_v > zero) {
        out.push(GainCondition::PositiveOffset);
    }
    if !(p.a_p > zero && p.a_p <= one) {
        out.push(GainCondition::StepExponentRange);
    }
    if !(p.c_p > zero) {
        out.push(GainCondition::PositiveProbeExponent);
    }
    if !(two * p.a_p - two * p.c_p > one) {
        out.push(GainCondition::SquaredRatioSummable);
    }
    if !(p.a_p + two * p.c_p > one) {
        out.push(GainCondition::StepProbeSquaredSummable);
    }
    out
}

/// A validated gain schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule<T> {
    params: GainParams<T>,
}

impl<T: Real> GainSchedule<T> {
    pub fn new(params: GainParams<T>) -> Result<Self, GainError> {
        let violations = validate_schedule(&params);
        if violations.is_empty() {
            Ok(Self { params })
        } else {
            Err(GainError { violations })
        }
    }

    pub fn reference() -> Self {
        Self::new(GainParams::reference()).expect("reference schedule is valid")
    }

    pub fn params(&self) -> &GainParams<T> {
        &self.params
    }

    /// Step size at PBC time `t`.
    pub fn gain_a(&self, t: u64) -> T {
        self.params.a0 / self.offset_time(t).powf(self.params.a_p)
    }

    /// Probe radius at PBC time `t`.
    pub fn gain_c(&self, t: u64) -> T {
        self.params.c0 / self.offset_time(t).powf(self.params.c_p)
    }

    /// `(a(t), c(t))` for the PBC law.
    pub fn pbc_gains_at(&self, t: u64) -> (T, T) {
        (self.gain_a(t), self.gain_c(t))
    }

    /// Stair-stepped BC gains: BC times `2s` and `2s + 1` both use the PBC
    /// gains at `s`.
    pub fn bc_gains_at(&self, t_bc: u64) -> (T, T) {
        self.pbc_gains_at(t_bc / 2)
    }

    fn offset_time(&self, t: u64) -> T {
        T::from_u64(t).expect("time representable") + self.params.t_v
    }
}

/// Free-function forms mirroring the operation names.
pub fn gain_a<T: Real>(sched: &GainSchedule<T>, t: u64) -> T {
    sched.gain_a(t)
}

pub fn gain_c<T: Real>(sched: &GainSchedule<T>, t: u64) -> T {
    sched.gain_c(t)
}

pub fn bc_gains_at<T: Real>(sched: &GainSchedule<T>, t_bc: u64) -> (T, T) {
    sched.bc_gains_at(t_bc)
}
