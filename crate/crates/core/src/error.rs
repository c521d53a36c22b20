use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spline degree {degree} not allowed: {reason}")]
    InvalidDegree { degree: u32, reason: &'static str },

    #[error("fractional order {0} outside the admissible range")]
    InvalidOrder(f64),

    #[error("translate {ell} outside [{lo}, {hi}]")]
    InvalidTranslate { ell: i64, lo: i64, hi: i64 },

    #[error("horizon must be a positive integer, got {0}")]
    InvalidHorizon(i64),

    #[error("t = {t} outside [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("quadrature did not reach tolerance {tol:e} within {evals} evaluations (error estimate {estimate:e})")]
    QuadratureNotConverged { tol: f64, evals: usize, estimate: f64 },

    #[error("|z| = {z} exceeds the series trust region |z| <= {z_max}")]
    ArgumentOutOfRange { z: f64, z_max: f64 },

    #[error("Mittag-Leffler series did not converge within {terms} terms")]
    SeriesNotConverged { terms: usize },

    #[error("Mittag-Leffler series loses accuracy to cancellation (largest term {max_term:e}) and no alternative route applies")]
    SeriesCancellation { max_term: f64 },

    #[error("matrix is not diagonalizable with real eigenvectors and is outside the series fallback range")]
    Defective,

    #[error("eigenvector matrix is ill-conditioned (condition number {cond:e} > cap {cap:e})")]
    IllConditioned { cond: f64, cap: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("solvability condition 2^s*T + 1 >= 2^j*T + n violated: {rows} equations per component for {cols} unknowns (s={s}, j={j}, n={n}, T={horizon})")]
    Solvability { s: u32, j: u32, n: u32, horizon: u32, rows: usize, cols: usize },

    #[error("least-squares system is rank deficient: numerical rank {rank} of {cols} columns (|r_kk|/|r_11| = {ratio:e})")]
    RankDeficient { rank: usize, cols: usize, ratio: f64 },

    #[error("no closed-form reference for a forced problem")]
    ForcedReference,

    #[error("{0}")]
    InvalidArgument(String),
}
