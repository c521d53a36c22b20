//! Caputo derivatives of the B-spline basis.
//!
//! For interior translates (`ℓ >= 0`) the derivative is the fractional
//! truncated-power difference
//!
//! ```text
//! D^γ B_{n,ℓ}(t) = Δ^{n+1} T_{n−γ}(t − ℓ) / Γ(n+1−γ).
//! ```
//!
//! Left-edge translates (`−n <= ℓ <= −1`) are clipped at `t = 0`, so the same
//! difference over-counts the part of the support left of the origin. That
//! part is removed with an explicit correction, expanded into a polynomial
//! in `t − ℓ − r` times `t^{1−γ}` (see [`EdgeExpansion`]).
//!
//! Well past the right end of the support the truncated-power terms are large
//! and nearly cancel, so [`CaputoEvaluator`] switches to a fixed Gauss–Legendre
//! rule on the defining integral there. The integrand is a polynomial times a
//! kernel that is analytic on each knot interval, so the rule is accurate to
//! rounding.

mod oracle;

pub use oracle::{caputo_quadrature, caputo_quadrature_piecewise};

use std::sync::OnceLock;

use crate::bspline::{
    backward_difference_tp, bspline_derivative, dyadic, truncated_power, BasisIndex, SplineDegree,
};
use crate::quadrature::GaussLegendre;
use crate::special::{binomial, factorial, gamma as gamma_fn, CompensatedSum};
use crate::{Error, Result};

/// Gap beyond the support end (in B-spline units) from which the far-field
/// route is used.
pub const FAR_FIELD_GAP: f64 = 0.5;

const FAR_FIELD_ORDER: usize = 20;

fn far_field_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(FAR_FIELD_ORDER))
}

/// Order `γ` of the Caputo derivative, `0 < γ <= 1`. `γ = 1` means the
/// ordinary first derivative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma <= 1.0 {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidOrder(gamma))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 == 1.0
    }

    /// Rejects `γ = 1`, for which the fractional formulas have a pole.
    pub fn require_fractional(self) -> Result<Self> {
        if self.is_integer() {
            Err(Error::InvalidOrder(self.0))
        } else {
            Ok(self)
        }
    }
}

impl std::fmt::Display for FractionalOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Correction table for one left-edge translate.
///
/// With `d_r = −ℓ − r` the edge derivative reads
///
/// ```text
/// D^γ B_{n,ℓ}(t) = Σ_{r=−ℓ}^{n+1} (−1)^r C(n+1,r) T_{n−γ}(t−ℓ−r) / Γ(n+1−γ)
///                − t^{1−γ} Σ_{r=0}^{−ℓ−1} Σ_{p=0}^{n−1} c_{r,p} (t−ℓ−r)^p
/// c_{r,p} = (−1)^{r+n−p} C(n+1,r) d_r^{n−1−p} Π_{s=1}^{n−1−p}(γ−s) / ((n−1−p)! Γ(n+1−γ))
/// ```
///
/// The `(t−ℓ−r)^{n−γ}` parts of the correction cancel the first `−ℓ` terms of
/// the full difference exactly, so they are dropped from both.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeExpansion {
    degree: SplineDegree,
    ell: i64,
    gamma: FractionalOrder,
    /// `coeffs[r][p]`
    coeffs: Vec<Vec<f64>>,
    inv_gamma: f64,
}

impl EdgeExpansion {
    pub fn new(degree: SplineDegree, gamma: FractionalOrder, ell: i64) -> Result<Self> {
        let n = degree.require_smooth()?.get();
        let gamma = gamma.require_fractional()?;
        check_edge(n, ell)?;
        let g = gamma.get();
        let inv_gamma = 1.0 / gamma_fn(n as f64 + 1.0 - g);
        let coeffs = (0..-ell)
            .map(|r| {
                let d = (-ell - r) as f64;
                let r_sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                (0..n)
                    .map(|p| {
                        let k = n - 1 - p;
                        let prod: f64 = (1..=k).map(|s| g - s as f64).product();
                        let sign = if (n - p) % 2 == 0 { 1.0 } else { -1.0 };
                        r_sign * sign * binomial(n + 1, r as u32) * d.powi(k as i32) * prod
                            / factorial(k)
                            * inv_gamma
                    })
                    .collect()
            })
            .collect();
        Ok(Self { degree, ell, gamma, coeffs, inv_gamma })
    }

    pub fn ell(&self) -> i64 {
        self.ell
    }

    pub fn coefficient(&self, r: usize, p: usize) -> f64 {
        self.coeffs[r][p]
    }

    /// `D^γ B_{n,ℓ}(t)` from the expansion; zero for `t <= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.degree.get();
        let alpha = n as f64 - self.gamma.get();
        let x = t - self.ell as f64;
        let mut acc = CompensatedSum::new();
        for r in (-self.ell) as u32..=n + 1 {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * binomial(n + 1, r) * truncated_power(x - r as f64, alpha) * self.inv_gamma);
        }
        let mut poly = CompensatedSum::new();
        for (r, row) in self.coeffs.iter().enumerate() {
            let y = x - r as f64;
            // Horner in y
            let v = row.iter().rev().fold(0.0, |h: f64, &c| h.mul_add(y, c));
            poly.add(v);
        }
        acc.add(-truncated_power(t, 1.0 - self.gamma.get()) * poly.value());
        acc.value()
    }
}

fn check_edge(n: u32, ell: i64) -> Result<()> {
    let lo = -(n as i64);
    if !(lo..=-1).contains(&ell) {
        return Err(Error::InvalidTranslate { ell, lo, hi: -1 });
    }
    Ok(())
}

fn check_interior(ell: i64) -> Result<()> {
    if ell < 0 {
        return Err(Error::InvalidTranslate { ell, lo: 0, hi: i64::MAX });
    }
    Ok(())
}

/// Caputo derivatives of all translates `B_{n,ℓ}` for one `(n, γ)` pair, with
/// the edge tables and far-field samples built once up front.
#[derive(Debug, Clone)]
pub struct CaputoEvaluator {
    degree: SplineDegree,
    gamma: FractionalOrder,
    inv_gamma_interior: f64,
    edges: Vec<EdgeExpansion>,
    /// Per knot interval `[i, i+1]` of `B_n`: `(node, weight · B_n'(node) / Γ(1−γ))`.
    far_samples: Vec<Vec<(f64, f64)>>,
}

impl CaputoEvaluator {
    pub fn new(degree: SplineDegree, gamma: FractionalOrder) -> Result<Self> {
        let n = degree.require_smooth()?.get();
        if gamma.is_integer() {
            return Ok(Self {
                degree,
                gamma,
                inv_gamma_interior: 0.0,
                edges: Vec::new(),
                far_samples: Vec::new(),
            });
        }
        let g = gamma.get();
        let edges = (1..=n as i64)
            .map(|k| EdgeExpansion::new(degree, gamma, -k))
            .collect::<Result<Vec<_>>>()?;
        let rule = far_field_rule();
        let inv_kernel = 1.0 / gamma_fn(1.0 - g);
        let far_samples = (0..=n)
            .map(|i| {
                let a = i as f64;
                rule.points(a, a + 1.0)
                    .map(|(x, w)| {
                        let d = bspline_derivative(degree, x).expect("degree checked above");
                        (x, w * d * inv_kernel)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            degree,
            gamma,
            inv_gamma_interior: 1.0 / gamma_fn(n as f64 + 1.0 - g),
            edges,
            far_samples,
        })
    }

    pub fn degree(&self) -> SplineDegree {
        self.degree
    }

    pub fn order(&self) -> FractionalOrder {
        self.gamma
    }

    pub fn edge_expansion(&self, ell: i64) -> Option<&EdgeExpansion> {
        (ell < 0).then(|| self.edges.get((-ell - 1) as usize)).flatten()
    }

    /// `D^γ B_{n,ℓ}(t)` for any `ℓ >= −n`, `t >= 0`.
    pub fn shifted(&self, ell: i64, t: f64) -> Result<f64> {
        let n = self.degree.get();
        if ell < -(n as i64) {
            return Err(Error::InvalidTranslate { ell, lo: -(n as i64), hi: i64::MAX });
        }
        if t < 0.0 {
            return Err(Error::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
        }
        let x = t - ell as f64;
        if self.gamma.is_integer() {
            // at t = 0 edge functions keep their one-sided slope
            return bspline_derivative(self.degree, x);
        }
        if t <= 0.0 || x <= 0.0 {
            return Ok(0.0);
        }
        if x >= self.degree.support_len() + FAR_FIELD_GAP {
            return Ok(self.far_field(ell, t));
        }
        Ok(self.closed_form(ell, t))
    }

    /// Closed-form value, regardless of the distance from the support.
    pub fn closed_form(&self, ell: i64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if ell < 0 {
            self.edges[(-ell - 1) as usize].eval(t)
        } else {
            let n = self.degree.get();
            let alpha = n as f64 - self.gamma.get();
            backward_difference_tp(n, alpha, t - ell as f64) * self.inv_gamma_interior
        }
    }

    /// Gauss–Legendre evaluation of `(1/Γ(1−γ)) ∫_0^t B_{n,ℓ}'(τ)(t−τ)^{−γ} dτ`;
    /// valid once `t` lies at least [`FAR_FIELD_GAP`] beyond the support.
    pub fn far_field(&self, ell: i64, t: f64) -> f64 {
        let x = t - ell as f64;
        let g = self.gamma.get();
        let first = (-ell).max(0) as usize;
        let mut acc = CompensatedSum::new();
        for interval in &self.far_samples[first..] {
            for &(u, w) in interval {
                acc.add(w * (x - u).powf(-g));
            }
        }
        acc.value()
    }

    /// `D^γ φ_{jℓ}(t) = 2^{j/2} 2^{γj} D^γ B_{n,ℓ}(2^j t)`.
    pub fn basis(&self, idx: &BasisIndex, t: f64) -> Result<f64> {
        if idx.degree != self.degree {
            return Err(Error::InvalidArgument(format!(
                "basis degree {} does not match evaluator degree {}",
                idx.degree.get(),
                self.degree.get()
            )));
        }
        let scale = dyadic(idx.level);
        let factor = scale.sqrt() * scale.powf(self.gamma.get());
        Ok(factor * self.shifted(idx.ell, scale * t)?)
    }
}

/// `Δ^{n+1} T_{n−γ}(t − ℓ) / Γ(n+1−γ)` for an interior translate.
pub fn caputo_interior(n: SplineDegree, gamma: FractionalOrder, ell: i64, t: f64) -> Result<f64> {
    n.require_smooth()?;
    gamma.require_fractional()?;
    check_interior(ell)?;
    CaputoEvaluator::new(n, gamma)?.shifted(ell, t)
}

/// Caputo derivative of a left-edge translate `−n <= ℓ <= −1`.
pub fn caputo_edge(n: SplineDegree, gamma: FractionalOrder, ell: i64, t: f64) -> Result<f64> {
    n.require_smooth()?;
    gamma.require_fractional()?;
    check_edge(n.get(), ell)?;
    CaputoEvaluator::new(n, gamma)?.shifted(ell, t)
}

/// Closed form of the edge correction
/// `(1/Γ(1−γ)) ∫_0^{−ℓ} B_n'(τ) (t−ℓ−τ)^{−γ} dτ`, term for term as
/// `(1/Γ(n+1−γ)) Σ_r (−1)^r C(n+1,r) [ (t−ℓ−r)^{n−γ}
///   + t^{1−γ} Σ_p (−1)^{n−p} (−ℓ−r)^{n−1−p} (t−ℓ−r)^p Π_{s=1}^{n−1−p}(γ−s) / (n−1−p)! ]`.
pub fn edge_correction(n: SplineDegree, gamma: FractionalOrder, ell: i64, t: f64) -> Result<f64> {
    let k = n.require_smooth()?.get();
    let g = gamma.require_fractional()?.get();
    check_edge(k, ell)?;
    if t < 0.0 {
        return Err(Error::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
    }
    let mut outer = 0.0;
    for r in 0..-ell {
        let d = (-ell - r) as f64;
        let x = t - ell as f64 - r as f64;
        let mut inner = 0.0;
        for p in 0..k {
            let m = k - 1 - p;
            let prod: f64 = (1..=m).map(|s| g - s as f64).product();
            let sign = if (k - p) % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * d.powi(m as i32) * x.powi(p as i32) / factorial(m) * prod;
        }
        let r_sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        outer += r_sign
            * binomial(k + 1, r as u32)
            * (x.powf(k as f64 - g) + truncated_power(t, 1.0 - g) * inner);
    }
    Ok(outer / gamma_fn(k as f64 + 1.0 - g))
}

/// `D^γ φ_{jℓ}(t)`; `γ = 1` gives the ordinary derivative.
pub fn caputo_basis(idx: &BasisIndex, gamma: FractionalOrder, t: f64) -> Result<f64> {
    CaputoEvaluator::new(idx.degree, gamma)?.basis(idx, t)
}

/// `D^γ t^p = Γ(p+1)/Γ(p+1−γ) t^{p−γ}` for `p >= 1`.
pub fn caputo_of_power(p: f64, gamma: FractionalOrder, t: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("power {p} must be >= 1")));
    }
    if t < 0.0 {
        return Err(Error::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
    }
    let g = gamma.get();
    let ratio = gamma_fn(p + 1.0) / gamma_fn(p + 1.0 - g);
    if p == g {
        return Ok(ratio);
    }
    Ok(ratio * truncated_power(t, p - g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::bspline_eval;

    fn deg(n: u32) -> SplineDegree {
        SplineDegree::new(n).unwrap()
    }

    fn ord(g: f64) -> FractionalOrder {
        FractionalOrder::new(g).unwrap()
    }

    fn b3_prime(x: f64) -> f64 {
        bspline_derivative(deg(3), x).unwrap()
    }

    #[test]
    fn order_range() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.2).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(ord(1.0).is_integer());
        assert!(ord(1.0).require_fractional().is_err());
    }

    #[test]
    fn interior_examples() {
        assert_eq!(caputo_interior(deg(3), ord(0.5), 0, 0.0).unwrap(), 0.0);
        assert_eq!(caputo_interior(deg(3), ord(0.5), 2, 1.0).unwrap(), 0.0);
        let closed = caputo_interior(deg(3), ord(0.5), 0, 1.5).unwrap();
        let quad = caputo_quadrature_piecewise(b3_prime, ord(0.5), 1.5, &[1.0], 1e-12).unwrap();
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
        assert!(caputo_interior(deg(3), ord(0.5), -1, 1.0).is_err());
        assert!(caputo_interior(deg(3), ord(1.0), 0, 1.0).is_err());
    }

    #[test]
    fn edge_examples() {
        assert_eq!(caputo_edge(deg(3), ord(0.5), -1, 0.0).unwrap(), 0.0);
        // B'_{3,-3}(τ) = B_3'(τ + 3) on [0, 1]
        let f = |tau: f64| b3_prime(tau + 3.0);
        let closed = caputo_edge(deg(3), ord(0.25), -3, 0.8).unwrap();
        let quad = caputo_quadrature(f, ord(0.25), 0.8, 1e-12).unwrap();
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
        assert!(caputo_edge(deg(3), ord(0.5), 0, 1.0).is_err());
        assert!(caputo_edge(deg(3), ord(0.5), -4, 1.0).is_err());
    }

    #[test]
    fn edge_closed_form_matches_printed_correction() {
        for &(n, g, ell, t) in &[(3, 0.75, -2, 2.0), (3, 0.3, -1, 0.4), (4, 0.6, -3, 1.7)] {
            let n = deg(n);
            let full = backward_difference_tp(n.get(), n.get() as f64 - g, t - ell as f64)
                / gamma_fn(n.get() as f64 + 1.0 - g);
            let printed = full - edge_correction(n, ord(g), ell, t).unwrap();
            let table = EdgeExpansion::new(n, ord(g), ell).unwrap().eval(t);
            assert!((printed - table).abs() < 1e-12, "{printed} vs {table}");
        }
    }

    #[test]
    fn basis_dilation_examples() {
        let idx = BasisIndex::new(deg(3), 0, 0).unwrap();
        let a = caputo_basis(&idx, ord(0.5), 1.5).unwrap();
        let b = caputo_interior(deg(3), ord(0.5), 0, 1.5).unwrap();
        assert_eq!(a, b);

        let idx = BasisIndex::new(deg(3), 2, 0).unwrap();
        for &t in &[0.1, 0.37, 0.9] {
            let a = caputo_basis(&idx, ord(0.5), t).unwrap();
            let b = 4.0 * caputo_interior(deg(3), ord(0.5), 0, 4.0 * t).unwrap();
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }

        let idx = BasisIndex::new(deg(3), 1, -2).unwrap();
        assert_eq!(caputo_basis(&idx, ord(0.25), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn integer_order_is_ordinary_derivative() {
        let idx = BasisIndex::new(deg(3), 2, -1).unwrap();
        let t = 0.3;
        let got = caputo_basis(&idx, ord(1.0), t).unwrap();
        let want = 2.0 * 4.0 * bspline_derivative(deg(3), 4.0 * t + 1.0).unwrap();
        assert_eq!(got, want);
        // ordinary derivative of an edge function is nonzero at the origin
        let edge = caputo_basis(&idx, ord(1.0), 0.0).unwrap();
        assert_eq!(edge, 8.0 * bspline_derivative(deg(3), 1.0).unwrap());
    }

    #[test]
    fn far_field_agrees_with_closed_form_near_threshold() {
        for &g in &[0.1, 0.5, 0.9] {
            let ev = CaputoEvaluator::new(deg(3), ord(g)).unwrap();
            for &ell in &[-3, -1, 0, 2] {
                let t = ell as f64 + 4.0 + FAR_FIELD_GAP + 0.25;
                let far = ev.far_field(ell, t);
                let closed = ev.closed_form(ell, t);
                assert!((far - closed).abs() < 1e-12, "γ={g} ℓ={ell}: {far} vs {closed}");
            }
        }
    }

    #[test]
    fn far_field_avoids_cancellation() {
        // Δ^{n+1} x^α / Γ(α+1) ≈ x^{α−n−1} / Γ(α−n) for x ≫ n+1, α = n−γ
        let ev = CaputoEvaluator::new(deg(3), ord(0.5)).unwrap();
        let x: f64 = 4096.0;
        let far = ev.shifted(0, x).unwrap();
        let leading = x.powf(-1.5) / gamma_fn(-0.5);
        let rel = (far - leading).abs() / leading.abs();
        // next term of the expansion is O((n+1)/x)
        assert!(rel < 2e-3, "relative deviation {rel}");
    }

    #[test]
    fn power_examples() {
        let v = caputo_of_power(2.0, ord(0.5), 1.0).unwrap();
        assert!((v - 2.0 / gamma_fn(2.5)).abs() < 1e-14);
        assert!((v - 1.504_505_556_127_350).abs() < 1e-14);
        assert_eq!(caputo_of_power(2.0, ord(0.3), 0.0).unwrap(), 0.0);
        assert_eq!(caputo_of_power(1.0, ord(1.0), 0.7).unwrap(), 1.0);
        assert!(caputo_of_power(0.5, ord(0.5), 1.0).is_err());
        let quad = caputo_quadrature(|tau| 2.0 * tau, ord(0.5), 1.0, 1e-10).unwrap();
        assert!((quad - v).abs() < 1e-10);
    }

    #[test]
    fn quadrature_examples() {
        assert_eq!(caputo_quadrature(|_| 0.0, ord(0.5), 1.0, 1e-10).unwrap(), 0.0);
        let closed = caputo_interior(deg(3), ord(0.25), 0, 2.0).unwrap();
        let quad = caputo_quadrature(b3_prime, ord(0.25), 2.0, 1e-10).unwrap();
        assert!((closed - quad).abs() < 1e-8);
    }

    #[test]
    fn edge_value_at_support_interior_is_finite() {
        let ev = CaputoEvaluator::new(deg(4), ord(0.75)).unwrap();
        for k in 1..=4 {
            let v = ev.shifted(-k, 0.5).unwrap();
            assert!(v.is_finite());
        }
        // ordinary value check: B_{3,-1}(0) = B_3(1) = 1/6
        assert!((bspline_eval(deg(3), 1.0) - 1.0 / 6.0).abs() < 1e-16);
    }
}
