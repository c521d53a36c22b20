//! Collocation solver for linear fractional dynamical systems
//!
//! ```text
//! D^γ X(t) = A X(t) + F(t),   X(0) = X₀,   0 < γ ≤ 1,
//! ```
//!
//! where `D^γ` is the Caputo derivative. The approximate solution lives in the
//! dyadic spline space spanned by `φ_{jℓ}(t) = 2^{j/2} B_n(2^j t − ℓ)`; Caputo
//! derivatives of the basis are evaluated in closed form, so the collocation
//! matrices are exact up to rounding. The overdetermined collocation system is
//! solved in the least-squares sense.
//!
//! Module map:
//! - [`bspline`]: cardinal B-splines, their translates and dilates.
//! - [`fractional`]: closed-form Caputo derivatives of the basis plus a quadrature oracle.
//! - [`mittag_leffler`]: scalar and matrix Mittag-Leffler functions (exact references).
//! - [`collocation`]: assembly and least-squares solution of the collocation system.
//! - [`analysis`]: error norms, convergence orders and the two reference experiments.

pub mod analysis;
pub mod bspline;
pub mod collocation;
mod error;
pub mod fractional;
pub mod lstsq;
pub mod mittag_leffler;
pub mod problem;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};

pub use analysis::{ConvergenceReport, ErrorReport};
pub use bspline::{ActiveBasis, BasisIndex, SplineDegree};
pub use fractional::FractionalOrder;
pub use mittag_leffler::{MLParams, SystemMatrix};
pub use collocation::{CollocationConfig, CollocationMatrices, SplineSolution};
pub use problem::{FractionalProblem, Term};
