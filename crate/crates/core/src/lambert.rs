//! The Lambert W function of the exponent, `V(t) = W(e^t)`.
//!
//! `V(t)` is the unique positive solution `x` of `x + ln x = t`. It behaves
//! like `e^t` for `t ≪ 0` and like `t − ln t` for `t ≫ 0`, and is the
//! building block of every entropic proximal map in [`crate::prox`].

use crate::error::{Error, Result};

/// Largest admissible defining residual `|x + ln x − t|`.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// Below this argument `e^t` underflows to zero and `V(t)` is returned as 0.
const UNDERFLOW_T: f64 = -745.0;

/// Switch between the `e^t` and `t − ln t` initial guesses.
const REGIME_SWITCH_T: f64 = 1.0;

const EXTRA_STEPS: usize = 4;

/// Evaluates `V(t) = W(e^t)`.
///
/// Returns a [`Error::Domain`] for non-finite `t`.
pub fn lambert_v(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!(
            "lambert_v: argument {t} is not finite"
        )));
    }
    Ok(v(t))
}

/// Derivative `V'(t) = V(t) / (1 + V(t))`.
pub fn lambert_v_prime(t: f64) -> Result<f64> {
    let x = lambert_v(t)?;
    Ok(x / (1.0 + x))
}

/// Inverse `V⁻¹(v) = v + ln v`, defined for `v > 0`.
pub fn lambert_v_inverse(v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!(
            "lambert_v_inverse: argument {v} must be positive and finite"
        )));
    }
    Ok(v_inv(v))
}

/// Unchecked `V(t)` for finite `t`; callers treat an underflowed 0 as an
/// inactive variable.
#[inline]
pub(crate) fn v(t: f64) -> f64 {
    debug_assert!(t.is_finite());
    if t < UNDERFLOW_T {
        return t.exp();
    }
    let mut x = if t <= REGIME_SWITCH_T {
        t.exp()
    } else {
        t - t.ln()
    };
    x = householder5(x, t);
    x = householder5(x, t);
    for _ in 0..EXTRA_STEPS {
        if (x + x.ln() - t).abs() <= RESIDUAL_TOL {
            break;
        }
        x = householder5(x, t);
    }
    x
}

#[inline]
pub(crate) fn v_inv(v: f64) -> f64 {
    v + v.ln()
}

/// Returns `(V, V', V'', V''')` at `t`.
#[inline]
pub(crate) fn v_derivs(t: f64) -> (f64, f64, f64, f64) {
    let x = v(t);
    let d = 1.0 + x;
    let d2 = d * d;
    let d3 = d2 * d;
    (x, x / d, x / d3, x * (1.0 - 2.0 * x) / (d3 * d2))
}

/// One step of the fifth-order Householder iteration for
/// `f(x) = x + ln x − t`.
#[inline]
fn householder5(x: f64, t: f64) -> f64 {
    let f = x + x.ln() - t;
    if f == 0.0 {
        return x;
    }
    let inv = 1.0 / x;
    let f1 = 1.0 + inv;
    let f2 = -inv * inv;
    let f3 = 2.0 * inv * inv * inv;
    let f4 = -6.0 * inv * inv * inv * inv;

    // x_new = x + 4 (1/f)''' / (1/f)''''
    let num = -6.0 * f1 * f1 * f1 + 6.0 * f * f1 * f2 - f * f * f3;
    let den =
        24.0 * f1.powi(4) - 36.0 * f * f1 * f1 * f2 + 6.0 * f * f * f2 * f2 + 8.0 * f * f * f1 * f3
            - f * f * f * f4;
    let step = 4.0 * f * num / den;
    let next = x + step;
    if next.is_finite() && next > 0.0 {
        next
    } else {
        // Fall back to a damped Newton step that stays positive.
        let newton = x - f / f1;
        if newton > 0.0 {
            newton
        } else {
            0.5 * x
        }
    }
}
