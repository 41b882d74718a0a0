//! Exhaustive-enumeration and finite-difference oracles for the SPSA
//! estimator and for the per-step comparisons between BC and PBC.
//!
//! Expectations are exact averages over every sign assignment in
//! `{-1, 1}^{nN K}`, so the checks carry no sampling error.

use thiserror::Error;

use crate::engine::PairedRecords;
use crate::gains::GainSchedule;
use crate::scalar::{sign_value, sum_squares};
use crate::Real;

/// Largest `nN * K` accepted for enumeration.
pub const ENUMERATION_CAP: usize = 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("enumeration over nN*K = {0} sign bits exceeds the cap of {ENUMERATION_CAP}")]
    DomainTooLarge(usize),
    #[error("{0}")]
    Argument(String),
}

/// `nN` and `K` of an enumerable sign space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationDomain {
    len: usize,
    samples: usize,
}

impl EnumerationDomain {
    pub fn new(len: usize, samples: usize) -> Result<Self, OracleError> {
        if len == 0 || samples == 0 {
            return Err(OracleError::Argument("nN and K must be positive".into()));
        }
        let bits = len.saturating_mul(samples);
        if bits > ENUMERATION_CAP {
            return Err(OracleError::DomainTooLarge(bits));
        }
        Ok(Self { len, samples })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// `2^(nN K)`.
    pub fn outcomes(&self) -> usize {
        1usize << (self.len * self.samples)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Accumulator<T> {
    fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> T {
        self.sum + self.comp
    }
}

/// Sign vector number `index` of length `len`: bit `i` set means `-1`.
fn signs_of(index: usize, len: usize, out: &mut [i8]) {
    for (i, s) in out.iter_mut().enumerate().take(len) {
        *s = if (index >> i) & 1 == 1 { -1 } else { 1 };
    }
}

fn check_probe<T: Real>(x: &[T], c: T) -> Result<(), OracleError> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(OracleError::Argument("c must be positive".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::Argument("x must be finite".into()));
    }
    Ok(())
}

/// `g = (J(x + c sigma) - J(x)) / c * sigma^(-1)`.
pub fn spsa_estimate<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    sigma: &[i8],
    c: T,
    cost: &F,
) -> Result<Vec<T>, OracleError> {
    check_probe(x, c)?;
    if sigma.len() != x.len() || sigma.iter().any(|&s| s != 1 && s != -1) {
        return Err(OracleError::Argument("sigma must be a +-1 vector of length nN".into()));
    }
    Ok(spsa_unchecked(x, sigma, c, cost(x), cost))
}

fn spsa_unchecked<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    sigma: &[i8],
    c: T,
    base: T,
    cost: &F,
) -> Vec<T> {
    let probe: Vec<T> = x
        .iter()
        .zip(sigma)
        .map(|(&v, &s)| v + c * sign_value::<T>(s))
        .collect();
    let w = (cost(&probe) - base) / c;
    sigma.iter().map(|&s| w * sign_value::<T>(s)).collect()
}

/// `g(sigma)` for every sign vector, indexed as in [`signs_of`].
fn estimate_table<T: Real, F: Fn(&[T]) -> T>(x: &[T], c: T, cost: &F) -> Vec<Vec<T>> {
    let len = x.len();
    let base = cost(x);
    let mut sigma = vec![0i8; len];
    (0..1usize << len)
        .map(|idx| {
            signs_of(idx, len, &mut sigma);
            spsa_unchecked(x, &sigma, c, base, cost)
        })
        .collect()
}

/// Calls `f` with the `K`-sample mean estimate for every sign assignment.
fn for_each_mean<T: Real>(table: &[Vec<T>], domain: EnumerationDomain, mut f: impl FnMut(&[T])) {
    let (len, k) = (domain.len, domain.samples);
    let mask = (1usize << len) - 1;
    let kf = T::from_count(k);
    let mut mean = vec![T::zero(); len];
    for m in 0..domain.outcomes() {
        mean.iter_mut().for_each(|v| *v = T::zero());
        for j in 0..k {
            let g = &table[(m >> (j * len)) & mask];
            for (v, &gi) in mean.iter_mut().zip(g) {
                *v += gi;
            }
        }
        mean.iter_mut().for_each(|v| *v /= kf);
        f(&mean);
    }
}

fn prepare<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    c: T,
    samples: usize,
    cost: &F,
) -> Result<(EnumerationDomain, Vec<Vec<T>>), OracleError> {
    let domain = EnumerationDomain::new(x.len(), samples)?;
    check_probe(x, c)?;
    Ok((domain, estimate_table(x, c, cost)))
}

/// Exact `E[(1/K) sum_k g(sigma^(k))]`.
pub fn enumerate_expected_gradient<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    c: T,
    samples: usize,
    cost: &F,
) -> Result<Vec<T>, OracleError> {
    let (domain, table) = prepare(x, c, samples, cost)?;
    Ok(expected_mean(&table, domain))
}

fn expected_mean<T: Real>(table: &[Vec<T>], domain: EnumerationDomain) -> Vec<T> {
    let mut acc = vec![Accumulator::<T>::default(); domain.len];
    for_each_mean(table, domain, |mean| {
        for (a, &v) in acc.iter_mut().zip(mean) {
            a.add(v);
        }
    });
    let n = T::from_count(domain.outcomes());
    acc.iter().map(|a| a.total() / n).collect()
}

/// Exact componentwise variance of the `K`-sample mean estimate.
pub fn enumerate_estimator_variance<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    c: T,
    samples: usize,
    cost: &F,
) -> Result<Vec<T>, OracleError> {
    let (domain, table) = prepare(x, c, samples, cost)?;
    let mu = expected_mean(&table, domain);
    let mut acc = vec![Accumulator::<T>::default(); domain.len];
    for_each_mean(&table, domain, |mean| {
        for ((a, &v), &m) in acc.iter_mut().zip(mean).zip(&mu) {
            let d = v - m;
            a.add(d * d);
        }
    });
    let n = T::from_count(domain.outcomes());
    Ok(acc.iter().map(|a| a.total() / n).collect())
}

/// Exact `E[J(x - a (1/K) sum_k g(sigma^(k)))]`.
pub fn expected_next_cost<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    a: T,
    c: T,
    samples: usize,
    cost: &F,
) -> Result<T, OracleError> {
    let (domain, table) = prepare(x, c, samples, cost)?;
    let mut next = vec![T::zero(); x.len()];
    let mut acc = Accumulator::<T>::default();
    for_each_mean(&table, domain, |mean| {
        for ((n, &xv), &g) in next.iter_mut().zip(x).zip(mean) {
            *n = xv - a * g;
        }
        acc.add(cost(&next));
    });
    Ok(acc.total() / T::from_count(domain.outcomes()))
}

/// Exact `E[sum_i |u_i|^kappa]` with `u = -a (1/K) sum_k g(sigma^(k))` and
/// agents of dimension `dim`.
pub fn expected_distance_power<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    dim: usize,
    a: T,
    c: T,
    samples: usize,
    kappa: T,
    cost: &F,
) -> Result<T, OracleError> {
    if !(kappa >= T::one()) {
        return Err(OracleError::Argument("kappa must be at least 1".into()));
    }
    if dim == 0 || !x.len().is_multiple_of(dim) {
        return Err(OracleError::Argument("nN must be a multiple of n".into()));
    }
    let (domain, table) = prepare(x, c, samples, cost)?;
    let mut acc = Accumulator::<T>::default();
    let mut u = vec![T::zero(); x.len()];
    for_each_mean(&table, domain, |mean| {
        for (ui, &g) in u.iter_mut().zip(mean) {
            *ui = -a * g;
        }
        let mut total = T::zero();
        for agent in u.chunks_exact(dim) {
            total += sum_squares(agent).sqrt().powf(kappa);
        }
        acc.add(total);
    });
    Ok(acc.total() / T::from_count(domain.outcomes()))
}

/// Central differences with step `h`.
pub fn finite_difference_gradient<T: Real, F: Fn(&[T]) -> T>(
    cost: &F,
    x: &[T],
    h: T,
) -> Result<Vec<T>, OracleError> {
    if !(h > T::zero()) {
        return Err(OracleError::Argument("h must be positive".into()));
    }
    let mut probe = x.to_vec();
    let two = T::lit(2.0);
    Ok((0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = cost(&probe);
            probe[i] = x[i] - h;
            let down = cost(&probe);
            probe[i] = x[i];
            (up - down) / (two * h)
        })
        .collect())
}

/// Largest deviations between PBC at `t` and BC at `2t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwiceSpeed<T> {
    /// `sup_t |x_PBC(t) - x_BC(2t)|_inf`.
    pub state: T,
    /// `sup_t |J_PBC(t) - J_BC(2t)| / (1 + |J_PBC(t)|)`.
    pub cost: T,
}

fn check_paired<T: Real>(paired: &PairedRecords<T>) -> Result<u64, OracleError> {
    let steps = paired.pbc.horizon();
    if paired.bc.horizon() != 2 * steps {
        return Err(OracleError::Argument(format!(
            "BC horizon {} is not twice the PBC horizon {steps}",
            paired.bc.horizon()
        )));
    }
    Ok(steps)
}

pub fn check_twice_speed<T: Real>(paired: &PairedRecords<T>) -> Result<TwiceSpeed<T>, OracleError> {
    let steps = check_paired(paired)?;
    let mut out = TwiceSpeed {
        state: T::zero(),
        cost: T::zero(),
    };
    for t in 0..=steps {
        for (&p, &b) in paired.pbc.state(t).iter().zip(paired.bc.state(2 * t)) {
            out.state = out.state.max((p - b).abs());
        }
        let jp = paired.pbc.cost[t as usize];
        let jb = paired.bc.cost[2 * t as usize];
        out.cost = out.cost.max((jp - jb).abs() / (T::one() + jp.abs()));
    }
    Ok(out)
}

/// Whether the caller declares the objective convex along the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    Convex,
    Concave,
    Undeclared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dominance<T> {
    /// `min_t (D_BC(2t) - D_PBC(t))`.
    pub min_margin: T,
    /// `D_BC(2t) - D_PBC(t)` for `t = 0..=T`.
    pub margins: Vec<T>,
    /// `sqrt(n) N sum_{tau<t} c(2 tau)` per `t`, reported when the
    /// objective is declared convex.
    pub convex_bound: Option<Vec<T>>,
}

pub fn check_distance_dominance<T: Real>(
    paired: &PairedRecords<T>,
    schedule: &GainSchedule<T>,
    convexity: Convexity,
) -> Result<Dominance<T>, OracleError> {
    let steps = check_paired(paired)?;
    let margins: Vec<T> = (0..=steps as usize)
        .map(|t| paired.bc.distance[2 * t] - paired.pbc.distance[t])
        .collect();
    let min_margin = margins.iter().copied().fold(T::infinity(), T::min);
    let convex_bound = (convexity == Convexity::Convex).then(|| {
        let scale = T::from_count(paired.pbc.dim).sqrt() * T::from_count(paired.pbc.agents);
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(steps as usize + 1);
        out.push(acc);
        for tau in 0..steps {
            acc += scale * schedule.bc_gains_at(2 * tau).1;
            out.push(acc);
        }
        out
    });
    Ok(Dominance {
        min_margin,
        margins,
        convex_bound,
    })
}

/// Enumerated per-step quantities along a list of `K` values.
#[derive(Debug, Clone, PartialEq)]
pub struct KMonotonicity<T> {
    pub samples: Vec<usize>,
    pub next_cost: Vec<T>,
    /// `kappa = 1`.
    pub distance: Vec<T>,
    /// `kappa = 2`.
    pub distance_sq: Vec<T>,
    /// `None` when convexity is undeclared.
    pub verdict: Option<bool>,
}

/// `v` is non-increasing up to a relative slack.
fn non_increasing<T: Real>(v: &[T]) -> bool {
    let slack = T::lit(1e-12);
    v.windows(2)
        .all(|w| w[1] <= w[0] + slack * (T::one() + w[0].abs()))
}

pub fn check_k_monotonicity<T: Real, F: Fn(&[T]) -> T>(
    x: &[T],
    dim: usize,
    a: T,
    c: T,
    samples: &[usize],
    cost: &F,
    convexity: Convexity,
) -> Result<KMonotonicity<T>, OracleError> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    if sorted != samples {
        return Err(OracleError::Argument("K list must be non-decreasing".into()));
    }
    let mut next_cost = Vec::new();
    let mut distance = Vec::new();
    let mut distance_sq = Vec::new();
    for &k in samples {
        next_cost.push(expected_next_cost(x, a, c, k, cost)?);
        distance.push(expected_distance_power(x, dim, a, c, k, T::one(), cost)?);
        distance_sq.push(expected_distance_power(x, dim, a, c, k, T::lit(2.0), cost)?);
    }
    let moves = non_increasing(&distance) && non_increasing(&distance_sq);
    let verdict = match convexity {
        Convexity::Convex => Some(moves && non_increasing(&next_cost)),
        Convexity::Concave => {
            let reversed: Vec<T> = next_cost.iter().map(|&v| -v).collect();
            Some(moves && non_increasing(&reversed))
        }
        Convexity::Undeclared => None,
    };
    Ok(KMonotonicity {
        samples: samples.to_vec(),
        next_cost,
        distance,
        distance_sq,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn domain_cap() {
        assert!(EnumerationDomain::new(11, 2).is_ok());
        assert_eq!(
            EnumerationDomain::new(12, 2),
            Err(OracleError::DomainTooLarge(24))
        );
        assert!(EnumerationDomain::new(0, 1).is_err());
        assert_eq!(EnumerationDomain::new(3, 2).unwrap().outcomes(), 64);
    }

    #[test]
    fn spsa_scalar_quadratic() {
        assert_eq!(spsa_estimate(&[1.0], &[1], 0.5, &sq).unwrap(), vec![2.5]);
        assert_eq!(spsa_estimate(&[1.0], &[-1], 0.5, &sq).unwrap(), vec![1.5]);
        let flat = |_: &[f64]| 2.0;
        assert_eq!(
            spsa_estimate(&[1.0, 3.0], &[1, -1], 0.1, &flat).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(spsa_estimate(&[1.0], &[0], 0.5, &sq).is_err());
        assert!(spsa_estimate(&[1.0], &[1], 0.0, &sq).is_err());
    }

    #[test]
    fn linear_objective_is_unbiased() {
        let g = [0.5, -2.0, 1.25];
        let lin = |x: &[f64]| x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let e = enumerate_expected_gradient(&[0.1, 0.2, 0.3], 0.25, 2, &lin).unwrap();
        for (a, b) in e.iter().zip(&g) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_point_has_zero_expected_gradient() {
        let quartic = |x: &[f64]| sq(x).powi(2);
        let e = enumerate_expected_gradient(&[0.0, 0.0, 0.0], 0.3, 1, &quartic).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn quartic_bias_is_second_order() {
        let quartic = |x: &[f64]| x[0].powi(4);
        let bias = |c: f64| enumerate_expected_gradient(&[1.0], c, 1, &quartic).unwrap()[0] - 4.0;
        let ratio = bias(0.1) / bias(0.05);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn finite_differences() {
        let g = finite_difference_gradient(&sq, &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 4.0).abs() < 1e-8);
        let flat = |_: &[f64]| 7.0;
        let g = finite_difference_gradient(&flat, &[1.0, 2.0], 1e-5).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
        assert!(finite_difference_gradient(&sq, &[1.0], 0.0).is_err());
    }

    #[test]
    fn scalar_next_cost_table() {
        let k1 = expected_next_cost(&[1.0], 0.1, 0.5, 1, &sq).unwrap();
        let k2 = expected_next_cost(&[1.0], 0.1, 0.5, 2, &sq).unwrap();
        let k1_hand = (0.5625 + 0.7225) / 2.0;
        let k2_hand = (0.5625 + 0.64 + 0.64 + 0.7225) / 4.0;
        assert!((k1 - k1_hand).abs() < 1e-15 && (k2 - k2_hand).abs() < 1e-15);
        assert!((k1 - 0.6425).abs() < 1e-12 && (k2 - 0.64125).abs() < 1e-12);
        for k in 1..4 {
            assert_eq!(expected_next_cost(&[1.0], 0.0, 0.5, k, &sq).unwrap(), 1.0);
        }
    }

    #[test]
    fn concave_ordering_reverses() {
        let concave = |x: &[f64]| 10.0 - x[0] * x[0];
        let r = check_k_monotonicity(&[1.0], 1, 0.1, 0.5, &[1, 2], &concave, Convexity::Concave)
            .unwrap();
        assert!(r.next_cost[0] < r.next_cost[1]);
        assert_eq!(r.verdict, Some(true));
        let wrong = check_k_monotonicity(&[1.0], 1, 0.1, 0.5, &[1, 2], &concave, Convexity::Convex)
            .unwrap();
        assert_eq!(wrong.verdict, Some(false));
    }

    #[test]
    fn distance_powers() {
        let lin = |x: &[f64]| 3.0 * x[0];
        let d1 = expected_distance_power(&[0.2], 1, 0.1, 0.5, 1, 1.0, &lin).unwrap();
        let d2 = expected_distance_power(&[0.2], 1, 0.1, 0.5, 2, 1.0, &lin).unwrap();
        assert!((d1 - d2).abs() < 1e-15 && (d1 - 0.3).abs() < 1e-15);
        let q1 = expected_distance_power(&[1.0], 1, 0.1, 0.5, 1, 2.0, &sq).unwrap();
        let q2 = expected_distance_power(&[1.0], 1, 0.1, 0.5, 2, 2.0, &sq).unwrap();
        assert!(q2 < q1);
        for k in 1..3 {
            assert_eq!(expected_distance_power(&[1.0], 1, 0.0, 0.5, k, 1.5, &sq).unwrap(), 0.0);
        }
        assert!(expected_distance_power(&[1.0], 1, 0.1, 0.5, 1, 0.5, &sq).is_err());
    }

    #[test]
    fn repeated_k_is_equal() {
        let r = check_k_monotonicity(&[1.0], 1, 0.1, 0.5, &[1, 1], &sq, Convexity::Convex).unwrap();
        assert_eq!(r.next_cost[0], r.next_cost[1]);
        assert_eq!(r.verdict, Some(true));
        let none = check_k_monotonicity(&[1.0], 1, 0.1, 0.5, &[1, 2], &sq, Convexity::Undeclared)
            .unwrap();
        assert_eq!(none.verdict, None);
        assert!(check_k_monotonicity(&[1.0], 1, 0.1, 0.5, &[2, 1], &sq, Convexity::Convex).is_err());
    }

    #[test]
    fn diagonal_quadratic_strictly_decreasing() {
        let j = |x: &[f64]| x[0] * x[0] + 4.0 * x[1] * x[1];
        let r = check_k_monotonicity(&[0.3, -0.7], 1, 0.05, 0.2, &[1, 2, 3], &j, Convexity::Convex)
            .unwrap();
        assert_eq!(r.verdict, Some(true));
        assert!(r.next_cost[0] > r.next_cost[1] && r.next_cost[1] > r.next_cost[2]);
        assert!(r.distance_sq[0] > r.distance_sq[1] && r.distance_sq[1] > r.distance_sq[2]);
    }
}
