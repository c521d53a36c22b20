//! Error measurement, convergence orders and the two reference experiments.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bspline::SplineDegree;
use crate::collocation::{collocation_grid, solve, CollocationConfig, SplineSolution};
use crate::fractional::FractionalOrder;
use crate::mittag_leffler::{MittagLefflerReference, SystemMatrix};
use crate::problem::{FractionalProblem, Term};
use crate::{Error, Result};

/// Errors below this are rounding noise and are left out of order estimates.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Levels added to the collocation level for the default error grid.
pub const GRID_OFFSET: u32 = 2;

/// Level of the uniform grid on which errors are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorGrid {
    Fixed(u32),
    /// `s + k` for collocation level `s`.
    AboveCollocation(u32),
}

impl Default for ErrorGrid {
    fn default() -> Self {
        ErrorGrid::AboveCollocation(GRID_OFFSET)
    }
}

impl ErrorGrid {
    pub fn level(self, colloc_level: u32) -> u32 {
        match self {
            ErrorGrid::Fixed(k) => k,
            ErrorGrid::AboveCollocation(k) => colloc_level + k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub gamma: f64,
    pub n: u32,
    pub j: u32,
    pub s: u32,
    pub per_component_linf: Vec<f64>,
    pub sample_grid_level: u32,
}

impl ErrorReport {
    pub fn max(&self) -> f64 {
        self.per_component_linf.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub gamma: f64,
    pub n: u32,
    pub levels: Vec<u32>,
    pub errors: Vec<ErrorReport>,
    /// `rho[k][i]`: order between `levels[k]` and `levels[k+1]` for component
    /// `i`; `None` when either error is at the noise floor.
    pub rho: Vec<Vec<Option<f64>>>,
}

impl ConvergenceReport {
    pub fn components(&self) -> usize {
        self.errors.first().map_or(0, |e| e.per_component_linf.len())
    }

    pub fn component_errors(&self, i: usize) -> Vec<f64> {
        self.errors.iter().map(|e| e.per_component_linf[i]).collect()
    }

    pub fn strictly_decreasing(&self, i: usize) -> bool {
        self.component_errors(i).windows(2).all(|w| w[1] < w[0])
    }

    /// Smallest available order estimate for component `i`.
    pub fn min_rho(&self, i: usize) -> Option<f64> {
        self.rho.iter().filter_map(|r| r[i]).reduce(f64::min)
    }
}

/// `log2(e_j / e_{j+1})`.
pub fn estimate_order(e_j: f64, e_j1: f64) -> Result<f64> {
    if !(e_j > 0.0 && e_j1 > 0.0 && e_j.is_finite() && e_j1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "order estimate needs positive finite errors, got {e_j} and {e_j1}"
        )));
    }
    Ok((e_j / e_j1).log2())
}

fn pair_orders(a: &ErrorReport, b: &ErrorReport) -> Vec<Option<f64>> {
    a.per_component_linf
        .iter()
        .zip(&b.per_component_linf)
        .map(|(&x, &y)| {
            if x < NOISE_FLOOR || y < NOISE_FLOOR {
                None
            } else {
                estimate_order(x, y).ok()
            }
        })
        .collect()
}

/// Maximum componentwise deviation from `reference` on `{p / 2^K}`.
pub fn linf_error<F>(sol: &SplineSolution, reference: F, grid_level: u32) -> Result<ErrorReport>
where
    F: Fn(f64) -> Result<DVector<f64>> + Sync,
{
    let cfg = sol.config();
    let grid = collocation_grid(grid_level, cfg.horizon());
    let m = sol.dim();
    let per_point: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&t| {
            let x = sol.evaluate(t)?;
            let r = reference(t)?;
            if r.len() != m {
                return Err(Error::DimensionMismatch { what: "reference components", expected: m, got: r.len() });
            }
            Ok((x - r).iter().map(|d| d.abs()).collect())
        })
        .collect::<Result<_>>()?;
    let mut linf = vec![0.0f64; m];
    for errs in &per_point {
        for (acc, &e) in linf.iter_mut().zip(errs) {
            *acc = acc.max(e);
        }
    }
    Ok(ErrorReport {
        gamma: sol.order().get(),
        n: cfg.degree().get(),
        j: cfg.level(),
        s: cfg.colloc_level(),
        per_component_linf: linf,
        sample_grid_level: grid_level,
    })
}

/// Solves at each level with `s = j + 1` and measures errors on `grid`.
/// Levels run in parallel.
pub fn convergence<F>(
    problem: &FractionalProblem,
    reference: F,
    n: SplineDegree,
    levels: &[u32],
    grid: ErrorGrid,
) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> Result<DVector<f64>> + Sync,
{
    let errors: Vec<ErrorReport> = levels
        .par_iter()
        .map(|&j| {
            let cfg = CollocationConfig::new(n, j, None, problem.horizon() as i64)?;
            let sol = solve(problem, &cfg)?;
            linf_error(&sol, &reference, grid.level(cfg.colloc_level()))
        })
        .collect::<Result<_>>()?;
    let rho = errors.windows(2).map(|w| pair_orders(&w[0], &w[1])).collect();
    Ok(ConvergenceReport { gamma: problem.order().get(), n: n.get(), levels: levels.to_vec(), errors, rho })
}

/// Scalar test problem `D^γ x = −x + t² + 2 t^{2−γ}/Γ(3−γ)`, `x(0) = 0`,
/// with exact solution `t²`.
pub fn example1_problem(gamma: FractionalOrder) -> FractionalProblem {
    FractionalProblem::new(DMatrix::from_element(1, 1, -1.0), DVector::zeros(1), gamma, 1)
        .and_then(|p| {
            p.with_forcing(vec![vec![
                Term::Poly { power: 2.0, coef: 1.0 },
                Term::CaputoPower { power: 2.0, coef: 1.0 },
            ]])
        })
        .expect("fixed problem data is valid")
}

pub fn example1_exact(t: f64) -> DVector<f64> {
    DVector::from_element(1, t * t)
}

/// `A = ½[[−3, 1], [1, −3]]`, `X₀ = (1, 2)`, no forcing.
pub fn example2_problem(gamma: FractionalOrder) -> FractionalProblem {
    let a = DMatrix::from_row_slice(2, 2, &[-1.5, 0.5, 0.5, -1.5]);
    FractionalProblem::new(a, DVector::from_vec(vec![1.0, 2.0]), gamma, 1).expect("fixed problem data is valid")
}

pub fn run_example1(gamma: FractionalOrder, n: SplineDegree, j: u32) -> Result<ErrorReport> {
    let problem = example1_problem(gamma);
    let cfg = CollocationConfig::new(n, j, None, 1)?;
    let sol = solve(&problem, &cfg)?;
    linf_error(&sol, |t| Ok(example1_exact(t)), ErrorGrid::default().level(cfg.colloc_level()))
}

/// Convergence sweep for the 2×2 system against `E_{γ,1}(t^γ A) X₀`; with
/// `γ = 1` this is `e^{tA} X₀`.
pub fn run_example2(gamma: FractionalOrder, n: SplineDegree, levels: &[u32]) -> Result<ConvergenceReport> {
    let problem = example2_problem(gamma);
    let reference = MittagLefflerReference::new(&problem)?;
    convergence(&problem, |t| reference.eval(t), n, levels, ErrorGrid::default())
}

/// `true` when every eigenvalue of `A` has negative real part. Advisory only.
pub fn stability_check(a: &SystemMatrix) -> bool {
    a.eigenvalue_real_parts().iter().all(|&re| re < 0.0)
}
