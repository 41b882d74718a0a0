//! Shift-stable log-sum-exp smooth minimum.

use crate::Real;

use super::ObjectiveError;

/// `(1/eps) ln sum_j exp(eps f_j)` for `eps < 0`.
///
/// The sum is factored around the minimum so no exponent is positive, and
/// the result is kept inside `[min + ln(n)/eps, min]`.
pub fn smooth_min<T: Real>(values: &[T], eps: T) -> Result<T, ObjectiveError> {
    if values.is_empty() {
        return Err(ObjectiveError::EmptySmoothMin);
    }
    if !(eps < T::zero()) || !eps.is_finite() {
        return Err(ObjectiveError::SmoothMinEpsilon(eps.to_f64_lossy()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ObjectiveError::NonFinite);
    }
    Ok(smooth_min_unchecked(values, eps))
}

pub(crate) fn smooth_min_unchecked<T: Real>(values: &[T], eps: T) -> T {
    let (imin, m) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::infinity()), |(bi, bv), (i, v)| {
            if v < bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    let mut rest = T::zero();
    for (j, &v) in values.iter().enumerate() {
        if j != imin {
            rest += (eps * (v - m)).exp();
        }
    }
    let mut r = m + rest.ln_1p() / eps;
    let lower = T::from_count(values.len()).ln() / eps;
    // Project rounding residue back into the bracket [min + ln(n)/eps, min].
    if r - m < lower {
        r = m + lower;
    }
    for _ in 0..8 {
        if r - m >= lower {
            break;
        }
        r += (r.abs() * T::epsilon()).max(T::min_positive_value());
    }
    if r > m {
        r = m;
    }
    r
}
