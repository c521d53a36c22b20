//! Caputo derivative by direct quadrature of the defining integral
//! `(1/Γ(1−γ)) ∫_0^t f'(τ) (t−τ)^{−γ} dτ`.
//!
//! The kernel singularity at `τ = t` is removed with `t − τ = u^{1/(1−γ)}`,
//! which turns the integral into `(1/(1−γ)) ∫_0^{t^{1−γ}} f'(t − u^{1/(1−γ)}) du`.
//! This path shares nothing with the closed forms and serves as their oracle.

use super::FractionalOrder;
use crate::quadrature::{integrate, DEFAULT_MAX_EVALS};
use crate::special::gamma;
use crate::{Error, Result};

/// Caputo derivative of the function whose derivative is `f_prime`, to
/// absolute accuracy `tol`.
pub fn caputo_quadrature<F: Fn(f64) -> f64>(
    f_prime: F,
    order: FractionalOrder,
    t: f64,
    tol: f64,
) -> Result<f64> {
    caputo_quadrature_piecewise(f_prime, order, t, &[], tol)
}

/// As [`caputo_quadrature`], with points `breaks` in `(0, t)` where `f'` is
/// not smooth (spline knots).
pub fn caputo_quadrature_piecewise<F: Fn(f64) -> f64>(
    f_prime: F,
    order: FractionalOrder,
    t: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    let g = order.require_fractional()?.get();
    if t < 0.0 {
        return Err(Error::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let expo = 1.0 / (1.0 - g);
    let upper = t.powf(1.0 - g);
    let mapped: Vec<f64> = breaks
        .iter()
        .filter(|&&b| b > 0.0 && b < t)
        .map(|&b| (t - b).powf(1.0 - g))
        .collect();
    let scale = expo / gamma(1.0 - g);
    let est = integrate(
        |u: f64| f_prime(t - u.powf(expo)),
        0.0,
        upper,
        &mapped,
        tol / scale,
        DEFAULT_MAX_EVALS,
    )?;
    Ok(scale * est.value)
}
