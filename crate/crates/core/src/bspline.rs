//! Cardinal B-splines built from truncated powers, and the dyadic basis
//! `φ_{jℓ}(t) = 2^{j/2} B_n(2^j t − ℓ)` on `[0, ∞)`.
//!
//! `B_n` is evaluated as the scaled `(n+1)`-th backward difference of the
//! truncated power `T_n`. The same expansion with a fractional exponent gives
//! the Caputo derivatives in [`crate::fractional`].

use crate::special::{binomial, factorial};
use crate::{Error, Result};

/// Polynomial degree `n` of the cardinal B-spline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplineDegree(u32);

impl SplineDegree {
    /// Largest supported degree; keeps the binomial recurrence exact.
    pub const MAX: u32 = 19;

    pub fn new(n: u32) -> Result<Self> {
        if n > Self::MAX {
            return Err(Error::InvalidDegree { degree: n, reason: "degree above 19" });
        }
        Ok(Self(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Degree usable with fractional derivatives (`n >= 1`).
    pub fn require_smooth(self) -> Result<Self> {
        if self.0 == 0 {
            Err(Error::InvalidDegree { degree: 0, reason: "derivatives need n >= 1" })
        } else {
            Ok(self)
        }
    }

    /// Length of the support `[0, n+1]`.
    pub fn support_len(self) -> f64 {
        (self.0 + 1) as f64
    }
}

/// One basis function `φ_{jℓ}` of degree `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub degree: SplineDegree,
    pub level: u32,
    pub ell: i64,
}

impl BasisIndex {
    pub fn new(degree: SplineDegree, level: u32, ell: i64) -> Result<Self> {
        let lo = -(degree.get() as i64);
        if ell < lo {
            return Err(Error::InvalidTranslate { ell, lo, hi: i64::MAX });
        }
        Ok(Self { degree, level, ell })
    }

    /// Left-edge functions have their support clipped at `t = 0`.
    pub fn is_edge(&self) -> bool {
        self.ell < 0
    }

    pub fn scale(&self) -> f64 {
        dyadic(self.level)
    }

    /// Support on `[0, ∞)`: `[max(0, ℓ/2^j), (ℓ+n+1)/2^j]`.
    pub fn support(&self) -> (f64, f64) {
        let h = 1.0 / self.scale();
        let lo = (self.ell as f64 * h).max(0.0);
        let hi = (self.ell + self.degree.get() as i64 + 1) as f64 * h;
        (lo, hi)
    }

    /// Local B-spline argument `2^j t − ℓ`.
    pub fn local_arg(&self, t: f64) -> f64 {
        self.scale().mul_add(t, -(self.ell as f64))
    }
}

/// The translates `ℓ = −n, …, 2^j T − 1` whose supports meet `[0, T]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveBasis {
    pub degree: SplineDegree,
    pub level: u32,
    pub horizon: u32,
    pub indices: Vec<i64>,
}

impl ActiveBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn first(&self) -> i64 {
        -(self.degree.get() as i64)
    }

    pub fn last(&self) -> i64 {
        self.first() + self.indices.len() as i64 - 1
    }

    /// Column position of translate `ell`.
    pub fn column(&self, ell: i64) -> Option<usize> {
        let k = ell - self.first();
        (0..self.indices.len() as i64).contains(&k).then_some(k as usize)
    }

    pub fn basis(&self) -> impl Iterator<Item = BasisIndex> + '_ {
        self.indices
            .iter()
            .map(move |&ell| BasisIndex { degree: self.degree, level: self.level, ell })
    }

    /// Translates whose open support contains `t`, clipped to the active range;
    /// at most `n + 1` of them.
    pub fn covering(&self, t: f64) -> std::ops::RangeInclusive<i64> {
        let cell = (dyadic(self.level) * t).floor() as i64;
        let lo = (cell - self.degree.get() as i64).max(self.first());
        let hi = cell.min(self.last());
        lo..=hi
    }
}

pub(crate) fn dyadic(level: u32) -> f64 {
    (level as f64).exp2()
}

/// `(max(0, t))^p`. Zero for `t <= 0`, including `p = 0`.
pub fn truncated_power(t: f64, p: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if p == 0.0 {
        1.0
    } else if p.fract() == 0.0 && p <= 64.0 {
        t.powi(p as i32)
    } else {
        t.powf(p)
    }
}

/// `Σ_{r=0}^{n+1} (−1)^r C(n+1, r) T_p(x − r)`, summing only the nonzero terms.
pub(crate) fn backward_difference_tp(n: u32, p: f64, x: f64) -> f64 {
    let mut acc = 0.0;
    for r in 0..=n + 1 {
        let arg = x - r as f64;
        if arg <= 0.0 {
            break;
        }
        let term = binomial(n + 1, r) * truncated_power(arg, p);
        if r % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Cardinal B-spline `B_n(t)`; exactly zero outside `(0, n+1)`.
pub fn bspline_eval(n: SplineDegree, t: f64) -> f64 {
    let len = n.support_len();
    if t <= 0.0 || t >= len {
        return 0.0;
    }
    // B_n is symmetric about (n+1)/2; the left half keeps the differences short.
    let t = if t > 0.5 * len { len - t } else { t };
    backward_difference_tp(n.get(), n.get() as f64, t) / factorial(n.get())
}

/// Ordinary first derivative `B_n'(t)`.
pub fn bspline_derivative(n: SplineDegree, t: f64) -> Result<f64> {
    let n = n.require_smooth()?;
    let len = n.support_len();
    if t <= 0.0 || t >= len {
        return Ok(0.0);
    }
    let k = n.get();
    let (t, sign) = if t > 0.5 * len { (len - t, -1.0) } else { (t, 1.0) };
    Ok(sign * backward_difference_tp(k, (k - 1) as f64, t) / factorial(k - 1))
}

/// `φ_{jℓ}(t) = 2^{j/2} B_n(2^j t − ℓ)`.
pub fn basis_eval(idx: &BasisIndex, t: f64) -> f64 {
    let scale = idx.scale();
    scale.sqrt() * bspline_eval(idx.degree, idx.local_arg(t))
}

/// Ordinary derivative `φ_{jℓ}'(t) = 2^{3j/2} B_n'(2^j t − ℓ)`.
pub fn basis_derivative(idx: &BasisIndex, t: f64) -> Result<f64> {
    let scale = idx.scale();
    Ok(scale.sqrt() * scale * bspline_derivative(idx.degree, idx.local_arg(t))?)
}

pub fn active_basis(n: SplineDegree, level: u32, horizon: i64) -> Result<ActiveBasis> {
    if horizon <= 0 || horizon > u32::MAX as i64 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let last = (dyadic(level) as i64) * horizon - 1;
    let indices = (-(n.get() as i64)..=last).collect();
    Ok(ActiveBasis { degree: n, level, horizon: horizon as u32, indices })
}

/// Two-scale coefficients `a_k = 2^{−n} C(n+1, k)` with `B_n(t) = Σ_k a_k B_n(2t − k)`.
pub fn refinement_mask(n: SplineDegree) -> Vec<f64> {
    let k = n.get();
    let w = (-(k as f64)).exp2();
    (0..=k + 1).map(|i| w * binomial(k + 1, i)).collect()
}
