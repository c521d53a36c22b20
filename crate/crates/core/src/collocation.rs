//! Collocation of `D^γ X = A X + F` at the dyadic nodes `t_p = p / 2^s`.
//!
//! With `X_j(t) = Σ_ℓ C_ℓ φ_{jℓ}(t)` the conditions at `p = 1 … 2^s T` and at
//! `t = 0` read
//!
//! ```text
//! (I_m ⊗ G − A ⊗ B) vec(Γ) = vec(F(t_p)),    (I_m ⊗ φ(0)) vec(Γ) = X₀,
//! ```
//!
//! where `G` holds Caputo derivatives of the basis at the nodes, `B` the basis
//! values and `vec(Γ)` stacks the coefficient rows component by component.
//! The stacked system is overdetermined and solved in the least-squares sense.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector, RowDVector};
use rayon::prelude::*;

use crate::bspline::{active_basis, basis_eval, dyadic, ActiveBasis, BasisIndex, SplineDegree};
use crate::fractional::{CaputoEvaluator, FractionalOrder};
use crate::lstsq;
use crate::problem::FractionalProblem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationConfig {
    degree: SplineDegree,
    level: u32,
    colloc_level: u32,
    horizon: u32,
    ic_weight: f64,
}

/// Rejects `(n, j, s, T)` with fewer equations per component than unknowns.
pub fn check_solvability(n: SplineDegree, j: u32, s: u32, horizon: u32) -> Result<()> {
    let rows = (dyadic(s) * horizon as f64) as usize + 1;
    let cols = (dyadic(j) * horizon as f64) as usize + n.get() as usize;
    if rows < cols {
        return Err(Error::Solvability { s, j, n: n.get(), horizon, rows, cols });
    }
    Ok(())
}

impl CollocationConfig {
    /// `s = None` selects `s = j + 1`.
    pub fn new(degree: SplineDegree, level: u32, colloc_level: Option<u32>, horizon: i64) -> Result<Self> {
        degree.require_smooth()?;
        if horizon <= 0 || horizon > u32::MAX as i64 {
            return Err(Error::InvalidHorizon(horizon));
        }
        if level > 30 || colloc_level.is_some_and(|s| s > 30) {
            return Err(Error::InvalidArgument("levels above 30 are not supported".into()));
        }
        let s = colloc_level.unwrap_or(level + 1);
        check_solvability(degree, level, s, horizon as u32)?;
        Ok(Self { degree, level, colloc_level: s, horizon: horizon as u32, ic_weight: 1.0 })
    }

    /// Scales the initial-condition rows (and their right-hand side).
    pub fn with_ic_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("initial-condition weight must be > 0, got {weight}")));
        }
        self.ic_weight = weight;
        Ok(self)
    }

    pub fn degree(&self) -> SplineDegree {
        self.degree
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn colloc_level(&self) -> u32 {
        self.colloc_level
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn ic_weight(&self) -> f64 {
        self.ic_weight
    }

    /// Basis functions per component, `2^j T + n`.
    pub fn unknowns(&self) -> usize {
        (dyadic(self.level) * self.horizon as f64) as usize + self.degree.get() as usize
    }

    /// Collocation nodes with `t > 0`, `2^s T`.
    pub fn collocation_rows(&self) -> usize {
        (dyadic(self.colloc_level) * self.horizon as f64) as usize
    }

    /// Shape `(rows, cols)` of the stacked system for `m` components.
    pub fn system_shape(&self, m: usize) -> (usize, usize) {
        (m * (self.collocation_rows() + 1), m * self.unknowns())
    }
}

/// `{p / 2^s : p = 0 … 2^s T}`.
pub fn collocation_grid(s: u32, horizon: u32) -> Vec<f64> {
    let h = dyadic(s);
    let count = (h * horizon as f64) as u64;
    (0..=count).map(|p| p as f64 / h).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationMatrices {
    /// `G[p−1][ℓ] = D^γ φ_{jℓ}(t_p)`
    pub g: DMatrix<f64>,
    /// `B[p−1][ℓ] = φ_{jℓ}(t_p)`
    pub b: DMatrix<f64>,
    /// `φ_{jℓ}(0)`
    pub phi0: RowDVector<f64>,
    pub basis: ActiveBasis,
}

fn check_consistent(problem: &FractionalProblem, config: &CollocationConfig) -> Result<()> {
    if problem.horizon() != config.horizon() {
        return Err(Error::DimensionMismatch {
            what: "horizon of configuration vs problem",
            expected: problem.horizon() as usize,
            got: config.horizon() as usize,
        });
    }
    Ok(())
}

/// Samples the basis and its Caputo derivatives at the collocation nodes.
/// Rows are evaluated in parallel; each entry is an independent evaluation,
/// so the result does not depend on scheduling.
pub fn assemble(problem: &FractionalProblem, config: &CollocationConfig) -> Result<CollocationMatrices> {
    check_consistent(problem, config)?;
    assemble_basis(problem.order(), config)
}

pub(crate) fn assemble_basis(order: FractionalOrder, config: &CollocationConfig) -> Result<CollocationMatrices> {
    let basis = active_basis(config.degree(), config.level(), config.horizon() as i64)?;
    let eval = CaputoEvaluator::new(config.degree(), order)?;
    let grid = collocation_grid(config.colloc_level(), config.horizon());
    let cols = basis.len();
    let index: Vec<BasisIndex> = basis.basis().collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = grid[1..]
        .par_iter()
        .map(|&t| {
            let d = index.iter().map(|idx| eval.basis(idx, t)).collect::<Result<Vec<_>>>()?;
            let v = index.iter().map(|idx| basis_eval(idx, t)).collect();
            Ok((d, v))
        })
        .collect::<Result<_>>()?;

    let nrows = rows.len();
    let mut g = DMatrix::zeros(nrows, cols);
    let mut b = DMatrix::zeros(nrows, cols);
    for (p, (d, v)) in rows.iter().enumerate() {
        for c in 0..cols {
            g[(p, c)] = d[c];
            b[(p, c)] = v[c];
        }
    }
    let phi0 = RowDVector::from_iterator(cols, index.iter().map(|idx| basis_eval(idx, 0.0)));
    Ok(CollocationMatrices { g, b, phi0, basis })
}

/// The stacked operator `[I_m ⊗ G − A ⊗ B; w I_m ⊗ φ(0)]`, kept in factored form.
#[derive(Debug, Clone, Copy)]
pub struct StackedOperator<'a> {
    pub mats: &'a CollocationMatrices,
    pub a: &'a DMatrix<f64>,
    pub ic_weight: f64,
}

impl StackedOperator<'_> {
    pub fn shape(&self) -> (usize, usize) {
        let m = self.a.nrows();
        (m * (self.mats.g.nrows() + 1), m * self.mats.g.ncols())
    }

    /// Dense matrix composed block by block, without forming Kronecker factors.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.a.nrows();
        let (r, c) = self.mats.g.shape();
        let (rows, cols) = self.shape();
        let mut out = DMatrix::zeros(rows, cols);
        for i in 0..m {
            for k in 0..m {
                let a_ik = self.a[(i, k)];
                let mut block = out.view_mut((i * r, k * c), (r, c));
                if i == k {
                    block.copy_from(&self.mats.g);
                }
                if a_ik != 0.0 {
                    block.zip_apply(&self.mats.b, |x, b| *x -= a_ik * b);
                }
            }
            out.view_mut((m * r + i, i * c), (1, c)).copy_from(&(&self.mats.phi0 * self.ic_weight));
        }
        out
    }

    /// Same matrix from explicit Kronecker products; reference for tests.
    pub fn to_dense_kronecker(&self) -> DMatrix<f64> {
        let m = self.a.nrows();
        let id = DMatrix::<f64>::identity(m, m);
        let top = id.kronecker(&self.mats.g) - self.a.kronecker(&self.mats.b);
        let bottom = id.kronecker(&self.mats.phi0) * self.ic_weight;
        let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
        out.view_mut((0, 0), top.shape()).copy_from(&top);
        out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(&bottom);
        out
    }

    /// Applies the operator to `vec(Γ)` using only `G`, `B` and `φ(0)`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.a.nrows();
        let (r, c) = self.mats.g.shape();
        let gx: Vec<DVector<f64>> = (0..m).map(|k| &self.mats.g * x.rows(k * c, c)).collect();
        let bx: Vec<DVector<f64>> = (0..m).map(|k| &self.mats.b * x.rows(k * c, c)).collect();
        let mut out = DVector::zeros(m * (r + 1));
        for i in 0..m {
            let mut seg = gx[i].clone();
            for (k, bk) in bx.iter().enumerate() {
                seg.axpy(-self.a[(i, k)], bk, 1.0);
            }
            out.rows_mut(i * r, r).copy_from(&seg);
            out[m * r + i] = self.ic_weight * self.mats.phi0.dot(&x.rows(i * c, c).transpose());
        }
        out
    }
}

/// Right-hand side: forcing samples per component, then `w X₀`.
pub fn stacked_rhs(problem: &FractionalProblem, config: &CollocationConfig) -> DVector<f64> {
    let m = problem.dim();
    let grid = collocation_grid(config.colloc_level(), config.horizon());
    let r = grid.len() - 1;
    let mut rhs = DVector::zeros(m * (r + 1));
    if problem.is_forced() {
        for (p, &t) in grid[1..].iter().enumerate() {
            let f = problem.forcing_at(t);
            for i in 0..m {
                rhs[i * r + p] = f[i];
            }
        }
    }
    for i in 0..m {
        rhs[m * r + i] = config.ic_weight() * problem.initial_state()[i];
    }
    rhs
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineSolution {
    config: CollocationConfig,
    order: FractionalOrder,
    basis: ActiveBasis,
    /// Row `i` holds the spline coefficients of component `i`.
    coeffs: DMatrix<f64>,
    residual_norm: f64,
    diagonal_ratio: f64,
}

/// Assembles and solves the collocation system.
pub fn solve(problem: &FractionalProblem, config: &CollocationConfig) -> Result<SplineSolution> {
    let mats = assemble(problem, config)?;
    solve_assembled(problem, config, &mats)
}

pub fn solve_assembled(
    problem: &FractionalProblem,
    config: &CollocationConfig,
    mats: &CollocationMatrices,
) -> Result<SplineSolution> {
    check_consistent(problem, config)?;
    let op = StackedOperator { mats, a: problem.matrix(), ic_weight: config.ic_weight() };
    let ls = lstsq::solve(&op.to_dense(), &stacked_rhs(problem, config))?;
    let m = problem.dim();
    let c = mats.basis.len();
    let coeffs = DMatrix::from_fn(m, c, |i, k| ls.x[i * c + k]);
    Ok(SplineSolution {
        config: *config,
        order: problem.order(),
        basis: mats.basis.clone(),
        coeffs,
        residual_norm: ls.residual_norm,
        diagonal_ratio: ls.diagonal_ratio,
    })
}

impl SplineSolution {
    pub fn from_coefficients(config: CollocationConfig, order: FractionalOrder, coeffs: DMatrix<f64>) -> Result<Self> {
        let basis = active_basis(config.degree(), config.level(), config.horizon() as i64)?;
        if coeffs.ncols() != basis.len() || coeffs.nrows() == 0 {
            return Err(Error::DimensionMismatch { what: "coefficient columns", expected: basis.len(), got: coeffs.ncols() });
        }
        Ok(Self { config, order, basis, coeffs, residual_norm: 0.0, diagonal_ratio: f64::NAN })
    }

    pub fn config(&self) -> &CollocationConfig {
        &self.config
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// `|R_last| / |R_00|` from the pivoted QR; NaN when not produced by a solve.
    pub fn diagonal_ratio(&self) -> f64 {
        self.diagonal_ratio
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let hi = self.config.horizon() as f64;
        if !(0.0..=hi).contains(&t) {
            return Err(Error::OutOfDomain { t, lo: 0.0, hi });
        }
        Ok(())
    }

    /// Columns whose basis functions may be nonzero at `t`; at most `n + 1`.
    pub fn support_columns(&self, t: f64) -> RangeInclusive<usize> {
        let range = self.basis.covering(t);
        let first = self.basis.first();
        (*range.start() - first) as usize..=(*range.end() - first) as usize
    }

    /// `X_j(t)`, summing only the basis functions that cover `t`.
    pub fn evaluate(&self, t: f64) -> Result<DVector<f64>> {
        self.check_domain(t)?;
        let mut out = DVector::zeros(self.dim());
        let first = self.basis.first();
        for col in self.support_columns(t) {
            let idx = BasisIndex { degree: self.basis.degree, level: self.basis.level, ell: first + col as i64 };
            let v = basis_eval(&idx, t);
            if v != 0.0 {
                out.axpy(v, &self.coeffs.column(col), 1.0);
            }
        }
        Ok(out)
    }

    /// `D^γ X_j(t)`; nonlocal, so every translate starting left of `t` contributes.
    pub fn caputo_derivative(&self, eval: &CaputoEvaluator, t: f64) -> Result<DVector<f64>> {
        self.check_domain(t)?;
        let mut out = DVector::zeros(self.dim());
        for (col, idx) in self.basis.basis().enumerate() {
            if idx.ell as f64 >= dyadic(idx.level) * t {
                break;
            }
            let v = eval.basis(&idx, t)?;
            out.axpy(v, &self.coeffs.column(col), 1.0);
        }
        Ok(out)
    }

    pub fn evaluator(&self) -> Result<CaputoEvaluator> {
        CaputoEvaluator::new(self.config.degree(), self.order)
    }
}

/// `D^γ X_j(t) − A X_j(t) − F(t)` for `t ∈ (0, T]`.
pub fn collocation_residual(sol: &SplineSolution, problem: &FractionalProblem, t: f64) -> Result<DVector<f64>> {
    if problem.dim() != sol.dim() {
        return Err(Error::DimensionMismatch { what: "solution components", expected: problem.dim(), got: sol.dim() });
    }
    if t <= 0.0 {
        return Err(Error::OutOfDomain { t, lo: 0.0, hi: problem.horizon() as f64 });
    }
    let eval = sol.evaluator()?;
    let d = sol.caputo_derivative(&eval, t)?;
    let x = sol.evaluate(t)?;
    Ok(d - problem.matrix() * x - problem.forcing_at(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(n: u32) -> SplineDegree {
        SplineDegree::new(n).unwrap()
    }

    fn scalar_problem(g: f64) -> FractionalProblem {
        FractionalProblem::new(
            DMatrix::from_element(1, 1, -1.0),
            DVector::zeros(1),
            FractionalOrder::new(g).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn grids() {
        assert_eq!(collocation_grid(1, 1), vec![0.0, 0.5, 1.0]);
        let g = collocation_grid(3, 1);
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], 0.125);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(collocation_grid(0, 2), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn config_defaults_and_gate() {
        let c = CollocationConfig::new(deg(3), 7, None, 1).unwrap();
        assert_eq!(c.colloc_level(), 8);
        assert_eq!(c.unknowns(), 131);
        assert_eq!(c.system_shape(2), (2 * 257, 2 * 131));
        let err = CollocationConfig::new(deg(3), 3, Some(2), 1).unwrap_err();
        assert!(matches!(err, Error::Solvability { rows: 5, cols: 11, .. }));
        assert!(err.to_string().contains("solvability"));
        // 2^s T + 1 = 2^j T + n exactly
        assert!(CollocationConfig::new(deg(3), 1, Some(2), 1).is_ok());
        assert!(CollocationConfig::new(deg(3), 0, None, 1).is_err());
        assert!(CollocationConfig::new(deg(0), 3, None, 1).is_err());
        assert!(c.with_ic_weight(0.0).is_err());
    }

    #[test]
    fn assembled_shapes_and_zero_pattern() {
        let cfg = CollocationConfig::new(deg(3), 2, Some(3), 1).unwrap();
        let m = assemble(&scalar_problem(0.5), &cfg).unwrap();
        assert_eq!(m.g.shape(), (8, 7));
        assert_eq!(m.b.shape(), (8, 7));
        assert_eq!(m.phi0.len(), 7);
        for (c, &ell) in m.basis.indices.iter().enumerate() {
            if ell >= 0 {
                assert_eq!(m.phi0[c], 0.0);
            } else {
                let want = 2.0 * crate::bspline::bspline_eval(deg(3), -ell as f64);
                assert!((m.phi0[c] - want).abs() < 1e-15);
            }
        }
        // last column: ℓ = 3 starts at 3/4
        let last = m.basis.len() - 1;
        for p in 0..8 {
            let t = (p + 1) as f64 / 8.0;
            if t <= 0.75 {
                assert_eq!(m.g[(p, last)], 0.0);
                assert_eq!(m.b[(p, last)], 0.0);
            } else {
                assert!(m.g[(p, last)] != 0.0);
            }
        }
    }

    #[test]
    fn kronecker_paths_agree() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.5, 0.5, 0.5, -1.5]);
        let p = FractionalProblem::new(a, DVector::from_vec(vec![1.0, 2.0]), FractionalOrder::new(0.3).unwrap(), 1)
            .unwrap();
        let cfg = CollocationConfig::new(deg(3), 2, None, 1).unwrap().with_ic_weight(2.0).unwrap();
        let mats = assemble(&p, &cfg).unwrap();
        let op = StackedOperator { mats: &mats, a: p.matrix(), ic_weight: cfg.ic_weight() };
        let dense = op.to_dense();
        assert_eq!(dense.shape(), cfg.system_shape(2));
        assert_eq!(dense, op.to_dense_kronecker());
        let x = DVector::from_fn(dense.ncols(), |i, _| (i as f64 * 0.37).sin());
        assert!((op.apply(&x) - &dense * &x).amax() < 1e-13);
    }

    #[test]
    fn homogeneous_zero_problem() {
        let cfg = CollocationConfig::new(deg(3), 3, None, 1).unwrap();
        let sol = solve(&scalar_problem(0.5), &cfg).unwrap();
        assert!(sol.coefficients().iter().all(|&c| c == 0.0));
        assert_eq!(sol.residual_norm(), 0.0);
        assert_eq!(sol.evaluate(0.3).unwrap()[0], 0.0);
        assert_eq!(collocation_residual(&sol, &scalar_problem(0.5), 0.5).unwrap()[0], 0.0);
    }

    #[test]
    fn evaluation_is_local() {
        let cfg = CollocationConfig::new(deg(3), 3, None, 1).unwrap();
        let coeffs = DMatrix::from_fn(1, cfg.unknowns(), |_, k| 1.0 + k as f64);
        let sol = SplineSolution::from_coefficients(cfg, FractionalOrder::new(0.5).unwrap(), coeffs.clone()).unwrap();
        let basis = active_basis(deg(3), 3, 1).unwrap();
        for i in 0..=64 {
            let t = i as f64 / 64.0;
            let cols = sol.support_columns(t);
            assert!(cols.clone().count() <= 4);
            let full: f64 = basis.basis().enumerate().map(|(k, idx)| coeffs[(0, k)] * basis_eval(&idx, t)).sum();
            assert!((sol.evaluate(t).unwrap()[0] - full).abs() < 1e-13);
        }
        assert_eq!(sol.support_columns(1.0), 8..=10);
        assert!(sol.evaluate(1.0 + 1e-12).is_err());
        assert!(sol.evaluate(-1e-12).is_err());
    }

    #[test]
    fn horizon_mismatch() {
        let cfg = CollocationConfig::new(deg(3), 3, None, 2).unwrap();
        assert!(assemble(&scalar_problem(0.5), &cfg).is_err());
    }
}
