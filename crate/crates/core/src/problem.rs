//! Problem definition: `D^γ X = A X + F(t)`, `X(0) = X₀` on `[0, T]`.

use nalgebra::{DMatrix, DVector};

use crate::fractional::FractionalOrder;
use crate::special::gamma;
use crate::{Error, Result};

/// One scalar term of a forcing or exact-solution component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    /// `coef · t^p`
    Poly { power: f64, coef: f64 },
    /// `coef · Γ(p+1)/Γ(p+1−γ) · t^{p−γ}`, the Caputo derivative of `coef · t^p`.
    CaputoPower { power: f64, coef: f64 },
}

impl Term {
    pub fn validate(&self) -> Result<()> {
        let (Term::Poly { power, coef } | Term::CaputoPower { power, coef }) = *self;
        if !(power >= 0.0) || !power.is_finite() || !coef.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "term needs a finite power >= 0 and a finite coefficient, got power {power}, coef {coef}"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, order: FractionalOrder) -> f64 {
        match *self {
            Term::Poly { power, coef } => coef * t.max(0.0).powf(power),
            Term::CaputoPower { power, coef } => {
                let g = order.get();
                let expo = power - g;
                let ratio = gamma(power + 1.0) / gamma(power + 1.0 - g);
                let tp = if expo == 0.0 { 1.0 } else if t <= 0.0 { 0.0 } else { t.powf(expo) };
                coef * ratio * tp
            }
        }
    }
}

pub(crate) fn eval_terms(terms: &[Term], t: f64, order: FractionalOrder) -> f64 {
    terms.iter().map(|term| term.eval(t, order)).sum()
}

/// Linear fractional system with optional forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalProblem {
    a: DMatrix<f64>,
    x0: DVector<f64>,
    order: FractionalOrder,
    horizon: u32,
    forcing: Option<Vec<Vec<Term>>>,
}

impl FractionalProblem {
    pub fn new(a: DMatrix<f64>, x0: DVector<f64>, order: FractionalOrder, horizon: i64) -> Result<Self> {
        let m = a.nrows();
        if m == 0 {
            return Err(Error::DimensionMismatch { what: "state dimension", expected: 1, got: 0 });
        }
        if a.ncols() != m {
            return Err(Error::DimensionMismatch { what: "columns of A", expected: m, got: a.ncols() });
        }
        if x0.len() != m {
            return Err(Error::DimensionMismatch { what: "initial state", expected: m, got: x0.len() });
        }
        if a.iter().chain(x0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("A and X0 must be finite".into()));
        }
        if horizon <= 0 || horizon > u32::MAX as i64 {
            return Err(Error::InvalidHorizon(horizon));
        }
        Ok(Self { a, x0, order, horizon: horizon as u32, forcing: None })
    }

    /// Adds `F(t)`; one term list per component.
    pub fn with_forcing(mut self, forcing: Vec<Vec<Term>>) -> Result<Self> {
        if forcing.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "forcing components",
                expected: self.dim(),
                got: forcing.len(),
            });
        }
        forcing.iter().flatten().try_for_each(Term::validate)?;
        self.forcing = Some(forcing);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn forcing(&self) -> Option<&[Vec<Term>]> {
        self.forcing.as_deref()
    }

    pub fn is_forced(&self) -> bool {
        self.forcing.is_some()
    }

    /// `F(t)`; zero without forcing.
    pub fn forcing_at(&self, t: f64) -> DVector<f64> {
        match &self.forcing {
            Some(f) => DVector::from_iterator(self.dim(), f.iter().map(|c| eval_terms(c, t, self.order))),
            None => DVector::zeros(self.dim()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord(g: f64) -> FractionalOrder {
        FractionalOrder::new(g).unwrap()
    }

    #[test]
    fn terms() {
        let g = ord(0.5);
        assert_eq!(Term::Poly { power: 2.0, coef: 3.0 }.eval(2.0, g), 12.0);
        assert_eq!(Term::Poly { power: 0.0, coef: 3.0 }.eval(0.0, g), 3.0);
        let c = Term::CaputoPower { power: 2.0, coef: 1.0 }.eval(1.0, g);
        assert!((c - 2.0 / gamma(2.5)).abs() < 1e-14);
        assert_eq!(Term::CaputoPower { power: 2.0, coef: 1.0 }.eval(0.0, g), 0.0);
        assert_eq!(Term::CaputoPower { power: 1.0, coef: 2.0 }.eval(0.0, ord(1.0)), 2.0);
        assert!(Term::Poly { power: -1.0, coef: 1.0 }.validate().is_err());
    }

    #[test]
    fn construction_checks() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.5, 0.5, 0.5, -1.5]);
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let p = FractionalProblem::new(a.clone(), x0.clone(), ord(0.5), 1).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(!p.is_forced());
        assert_eq!(p.forcing_at(0.3), DVector::zeros(2));
        assert!(FractionalProblem::new(a.clone(), x0.clone(), ord(0.5), 0).is_err());
        assert!(FractionalProblem::new(a.clone(), DVector::zeros(3), ord(0.5), 1).is_err());
        assert!(FractionalProblem::new(DMatrix::zeros(2, 3), x0.clone(), ord(0.5), 1).is_err());
        assert!(p.clone().with_forcing(vec![vec![]]).is_err());
        let forced = p.with_forcing(vec![vec![Term::Poly { power: 1.0, coef: 1.0 }], vec![]]).unwrap();
        assert_eq!(forced.forcing_at(0.25), DVector::from_vec(vec![0.25, 0.0]));
    }
}
