//! Mittag-Leffler functions `E_{γ,β}(z) = Σ_k z^k / Γ(γk + β)` and their
//! matrix counterparts `E_{γ,β}(z, A) = Σ_k (zA)^k / Γ(γk + β)`.
//!
//! The scalar series is summed with compensation. On the negative axis with
//! `0 < γ < 1` the series terms grow enormously before they decay (for
//! `γ = 0.1`, `z = −2` the largest term is near `1e441`), so when the series
//! would lose accuracy to cancellation and `β = 1`, the value is taken from the
//! completely monotone integral representation
//!
//! ```text
//! E_γ(−x) = sin(γπ)/(γπ) ∫_ℝ exp(−e^{(ln x + v)/γ}) / (2 cosh v + 2 cos γπ) dv,
//! ```
//!
//! whose integrand is positive and smooth.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::problem::FractionalProblem;
use crate::quadrature::{integrate, DEFAULT_MAX_EVALS};
use crate::special::{ln_gamma, recip_gamma, CompensatedSum};
use crate::{Error, Result};

pub const DEFAULT_Z_MAX: f64 = 50.0;
pub const DEFAULT_TERM_BUDGET: usize = 500;
/// Default cap on the eigenvector condition number.
pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

/// Largest series term beyond which the scalar series hands over to the
/// integral route. Gamma-function rounding is amplified by the term size, so
/// the switch happens early.
const SCALAR_SWITCH_LIMIT: f64 = 10.0;
/// Largest series term tolerated when there is no alternative route.
const SCALAR_CANCELLATION_LIMIT: f64 = 1e3;
/// Same bound for the matrix series.
const MATRIX_CANCELLATION_LIMIT: f64 = 1e4;
/// Spectral radius of `zA` up to which the matrix series is used.
const SERIES_FALLBACK_RADIUS: f64 = 5.0;
const SERIES_FALLBACK_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    gamma: f64,
    beta: f64,
}

impl MLParams {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("Mittag-Leffler γ must be > 0, got {gamma}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("Mittag-Leffler β must be > 0, got {beta}")));
        }
        Ok(Self { gamma, beta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Knobs for the scalar evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLOptions {
    pub z_max: f64,
    pub term_budget: usize,
}

impl Default for MLOptions {
    fn default() -> Self {
        Self { z_max: DEFAULT_Z_MAX, term_budget: DEFAULT_TERM_BUDGET }
    }
}

#[derive(Debug, Clone, Copy)]
struct SeriesOutcome {
    value: f64,
    max_term: f64,
}

fn series_term(params: MLParams, z: f64, k: usize) -> f64 {
    if k == 0 {
        return recip_gamma(params.beta);
    }
    let arg = params.gamma * k as f64 + params.beta;
    let zk = z.powi(k as i32);
    if arg < 170.0 && zk.is_finite() && zk != 0.0 {
        return zk * recip_gamma(arg);
    }
    let sign = if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    sign * (k as f64 * z.abs().ln() - ln_gamma(arg)).exp()
}

fn scalar_series(params: MLParams, z: f64, budget: usize) -> Result<SeriesOutcome> {
    let mut acc = CompensatedSum::new();
    let mut max_term: f64 = 0.0;
    let mut quiet = 0;
    for k in 0..budget {
        let term = series_term(params, z, k);
        if !term.is_finite() {
            return Err(Error::SeriesNotConverged { terms: k });
        }
        acc.add(term);
        max_term = max_term.max(term.abs());
        if k > 0 && term.abs() <= f64::EPSILON * acc.value().abs() {
            quiet += 1;
            if quiet == 3 {
                return Ok(SeriesOutcome { value: acc.value(), max_term });
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged { terms: budget })
}

/// `E_γ(−x)` for `0 < γ < 1`, `x > 0` from the integral representation.
pub fn ml_negative_axis(gamma: f64, x: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) || !(x > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integral route needs 0 < γ < 1 and x > 0, got γ = {gamma}, x = {x}"
        )));
    }
    let lx = x.ln();
    let pi = std::f64::consts::PI;
    // 2 cosh v + 2 cos γπ without cancellation; it nearly vanishes at v = 0 as γ → 1
    let c2 = (0.5 * gamma * pi).cos().powi(2);
    let width = (0.5 * gamma * pi).cos().max(f64::EPSILON);
    // beyond v_hi the exponential factor is below e^{-42}
    let v_hi = (gamma * 42f64.ln() - lx).min(40.0);
    let v_lo = -40.0;
    if v_hi <= v_lo {
        return Ok(0.0);
    }
    let f = |v: f64| (-((lx + v) / gamma).exp()).exp() / (4.0 * ((0.5 * v).sinh().powi(2) + c2));
    let mut breaks = vec![0.0];
    for k in 0..6 {
        let b = width * 4f64.powi(k);
        breaks.extend([-b, b]);
    }
    let pref = (gamma * pi).sin() / (gamma * pi);
    let est = integrate(f, v_lo, v_hi, &breaks, 1e-15 / pref, DEFAULT_MAX_EVALS)?;
    Ok(pref * est.value)
}

/// `E_{γ,β}(z)` with default options.
pub fn ml_scalar(params: MLParams, z: f64) -> Result<f64> {
    ml_scalar_with(params, z, &MLOptions::default())
}

pub fn ml_scalar_with(params: MLParams, z: f64, opts: &MLOptions) -> Result<f64> {
    if !z.is_finite() || z.abs() > opts.z_max {
        return Err(Error::ArgumentOutOfRange { z, z_max: opts.z_max });
    }
    if z == 0.0 {
        return Ok(recip_gamma(params.beta));
    }
    let alternative = |z: f64| -> Option<Result<f64>> {
        if z >= 0.0 || params.beta != 1.0 {
            return None;
        }
        if params.gamma == 1.0 {
            Some(Ok(z.exp()))
        } else if params.gamma < 1.0 {
            Some(ml_negative_axis(params.gamma, -z))
        } else {
            None
        }
    };
    match scalar_series(params, z, opts.term_budget) {
        Ok(out) if z > 0.0 || out.max_term <= SCALAR_SWITCH_LIMIT => Ok(out.value),
        Ok(out) => alternative(z).unwrap_or(if out.max_term <= SCALAR_CANCELLATION_LIMIT {
            Ok(out.value)
        } else {
            Err(Error::SeriesCancellation { max_term: out.max_term })
        }),
        Err(err) => alternative(z).unwrap_or(Err(err)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenData {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Spectral {
    Diagonalizable(EigenData),
    ComplexSpectrum,
    Defective,
    IllConditioned { cond: f64, cap: f64 },
}

/// System matrix together with its eigendecomposition, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    entries: DMatrix<f64>,
    spectral: Spectral,
    /// Real parts and moduli of all eigenvalues (complex ones included).
    eigen_real_parts: Vec<f64>,
    spectral_radius: f64,
}

impl SystemMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        Self::with_condition_cap(entries, DEFAULT_CONDITION_CAP)
    }

    pub fn with_condition_cap(entries: DMatrix<f64>, cap: f64) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 || entries.ncols() != m {
            return Err(Error::DimensionMismatch { what: "square system matrix", expected: m.max(1), got: entries.ncols() });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("system matrix has non-finite entries".into()));
        }
        let complex = entries.clone().complex_eigenvalues();
        let eigen_real_parts: Vec<f64> = complex.iter().map(|c| c.re).collect();
        let spectral_radius = complex.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let spectral = if is_symmetric(&entries) {
            let eig = SymmetricEigen::new(entries.clone());
            let inverse = eig.eigenvectors.transpose();
            Spectral::Diagonalizable(EigenData {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
                inverse,
                condition: 1.0,
            })
        } else {
            general_eigen(&entries, &complex, cap)
        };
        Ok(Self { entries, spectral, eigen_real_parts, spectral_radius })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn eigen(&self) -> Option<&EigenData> {
        match &self.spectral {
            Spectral::Diagonalizable(e) => Some(e),
            _ => None,
        }
    }

    pub fn eigenvalue_real_parts(&self) -> &[f64] {
        &self.eigen_real_parts
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn is_diagonal(&self) -> bool {
        let m = self.dim();
        (0..m).all(|i| (0..m).all(|k| i == k || self.entries[(i, k)] == 0.0))
    }
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let m = a.nrows();
    (0..m).all(|i| (0..i).all(|k| (a[(i, k)] - a[(k, i)]).abs() <= 1e-14 * scale))
}

fn general_eigen(a: &DMatrix<f64>, complex: &DVector<nalgebra::Complex<f64>>, cap: f64) -> Spectral {
    let m = a.nrows();
    let scale = a.amax().max(1.0);
    if complex.iter().any(|c| c.im.abs() > 1e-10 * scale) {
        return Spectral::ComplexSpectrum;
    }
    let mut values: Vec<f64> = complex.iter().map(|c| c.re).collect();
    values.sort_by(f64::total_cmp);
    let mut vectors = DMatrix::zeros(m, m);
    let mut col = 0;
    let mut i = 0;
    while i < m {
        let lambda = values[i];
        let mut j = i + 1;
        while j < m && (values[j] - lambda).abs() <= 1e-8 * scale {
            j += 1;
        }
        let multiplicity = j - i;
        let center = values[i..j].iter().sum::<f64>() / multiplicity as f64;
        let shifted = a - DMatrix::identity(m, m) * center;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        // null space = right singular vectors of the smallest singular values
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&p, &q| svd.singular_values[p].total_cmp(&svd.singular_values[q]));
        let null_tol = 1e-9 * scale;
        let null_dim = order.iter().filter(|&&k| svd.singular_values[k] <= null_tol).count();
        if null_dim < multiplicity {
            return Spectral::Defective;
        }
        for &k in order.iter().take(multiplicity) {
            vectors.set_column(col, &v_t.row(k).transpose());
            values[col] = center;
            col += 1;
        }
        i = j;
    }
    let sv = vectors.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let cond = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    if cond > cap {
        return Spectral::IllConditioned { cond, cap };
    }
    let Some(inverse) = vectors.clone().try_inverse() else {
        return Spectral::IllConditioned { cond: f64::INFINITY, cap };
    };
    Spectral::Diagonalizable(EigenData { values: DVector::from_vec(values), vectors, inverse, condition: cond })
}

/// `E_{γ,β}(z A)` by eigendecomposition, with a direct matrix series for small
/// non-diagonalizable matrices.
pub fn ml_matrix(params: MLParams, z_scale: f64, a: &SystemMatrix) -> Result<DMatrix<f64>> {
    let m = a.dim();
    if z_scale == 0.0 {
        return Ok(DMatrix::identity(m, m) * recip_gamma(params.beta));
    }
    if a.is_diagonal() {
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            out[(i, i)] = ml_scalar(params, z_scale * a.entries[(i, i)])?;
        }
        return Ok(out);
    }
    if a.eigen().is_some() {
        return ml_matrix_eigen(params, z_scale, a);
    }
    if m <= SERIES_FALLBACK_DIM && (z_scale * a.spectral_radius).abs() <= SERIES_FALLBACK_RADIUS {
        return ml_matrix_series(params, z_scale, a.entries());
    }
    match &a.spectral {
        Spectral::IllConditioned { cond, cap } => Err(Error::IllConditioned { cond: *cond, cap: *cap }),
        _ => Err(Error::Defective),
    }
}

/// `V diag(E_{γ,β}(z λ_i)) V^{-1}`.
pub fn ml_matrix_eigen(params: MLParams, z_scale: f64, a: &SystemMatrix) -> Result<DMatrix<f64>> {
    let eig = match &a.spectral {
        Spectral::Diagonalizable(e) => e,
        Spectral::IllConditioned { cond, cap } => {
            return Err(Error::IllConditioned { cond: *cond, cap: *cap })
        }
        _ => return Err(Error::Defective),
    };
    let mut scaled = eig.vectors.clone();
    for (k, &lambda) in eig.values.iter().enumerate() {
        let e = ml_scalar(params, z_scale * lambda)?;
        scaled.column_mut(k).scale_mut(e);
    }
    Ok(scaled * &eig.inverse)
}

/// Direct series `Σ_k (zA)^k / Γ(γk + β)`.
pub fn ml_matrix_series(params: MLParams, z_scale: f64, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let za = a * z_scale;
    let mut power = DMatrix::<f64>::identity(m, m);
    let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::new(); m * m];
    let mut max_norm: f64 = 0.0;
    let mut quiet = 0;
    for k in 0..DEFAULT_TERM_BUDGET {
        if k > 0 {
            power = &power * &za;
        }
        let w = recip_gamma(params.gamma * k as f64 + params.beta);
        let term_norm = power.amax() * w;
        if !term_norm.is_finite() {
            return Err(Error::SeriesNotConverged { terms: k });
        }
        for (acc, &p) in sums.iter_mut().zip(power.iter()) {
            acc.add(p * w);
        }
        max_norm = max_norm.max(term_norm);
        let sum_norm = sums.iter().map(|s| s.value().abs()).fold(0.0, f64::max);
        if k > 0 && term_norm <= f64::EPSILON * sum_norm {
            quiet += 1;
            if quiet == 3 {
                if max_norm > MATRIX_CANCELLATION_LIMIT * sum_norm.max(1.0) {
                    return Err(Error::SeriesCancellation { max_term: max_norm });
                }
                return Ok(DMatrix::from_iterator(m, m, sums.iter().map(|s| s.value())));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged { terms: DEFAULT_TERM_BUDGET })
}

/// Exact solution `X(t) = E_{γ,1}(t^γ A) X₀` of an unforced problem.
#[derive(Debug, Clone)]
pub struct MittagLefflerReference {
    matrix: SystemMatrix,
    x0: DVector<f64>,
    params: MLParams,
}

impl MittagLefflerReference {
    pub fn new(problem: &FractionalProblem) -> Result<Self> {
        if problem.is_forced() {
            return Err(Error::ForcedReference);
        }
        Ok(Self {
            matrix: SystemMatrix::new(problem.matrix().clone())?,
            x0: problem.initial_state().clone(),
            params: MLParams::new(problem.order().get(), 1.0)?,
        })
    }

    pub fn system(&self) -> &SystemMatrix {
        &self.matrix
    }

    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        if t < 0.0 {
            return Err(Error::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
        }
        if t == 0.0 || self.x0.iter().all(|&v| v == 0.0) {
            return Ok(self.x0.clone());
        }
        let e = ml_matrix(self.params, t.powf(self.params.gamma), &self.matrix)?;
        Ok(e * &self.x0)
    }
}

/// `E_{γ,1}(t^γ A) X₀` for an unforced problem.
pub fn reference_solution(problem: &FractionalProblem, t: f64) -> Result<DVector<f64>> {
    MittagLefflerReference::new(problem)?.eval(t)
}
