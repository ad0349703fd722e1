//! Exact sparse polynomial arithmetic.
//!
//! Polynomials are sparse maps from state/input monomials to coefficients
//! that are rational functions in named parameters ([`ParamRat`]). All
//! arithmetic is exact over arbitrary-precision rationals.
//!
//! Monomials are ordered so that the highest-indexed variable dominates,
//! then its exponent, then the remaining variables recursively; see
//! [`lex_compare`].

use std::collections::BTreeSet;

use num_traits::ToPrimitive;
use thiserror::Error;

mod monomial;
mod parampoly;
mod paramrat;
mod polynomial;
mod symbol;

pub use monomial::{lex_compare, Monomial};
pub use parampoly::{gcd as param_gcd, ParamMonomial, ParamPoly};
pub use paramrat::ParamRat;
pub(crate) use polynomial::{fmt_coefficient_prefix, fmt_linear_combination, fmt_term, var_name};
pub use polynomial::{Binding, PolyDisplay, Polynomial, StateMonomial, Var};
pub use symbol::{Role, Symbol};

/// Exact rational number.
pub type Q = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("empty polynomial has no maxterm")]
    EmptyPolynomial,
    #[error("division by the zero polynomial")]
    ZeroDenominator,
    #[error("parameter assignment vanishes a denominator")]
    VanishingDenominator,
    #[error("unbound symbols: {}", names(.0))]
    Unbound(BTreeSet<Symbol>),
    #[error("unbound variables at positions {0:?}")]
    UnboundVariables(Vec<Var>),
    #[error("parameter {0} cannot be bound to an expression in state or input variables")]
    NonConstantParamBinding(String),
    #[error("coefficient is not numeric: {0}")]
    NotNumeric(String),
}

fn names(s: &BTreeSet<Symbol>) -> String {
    s.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
}

/// A value for numeric evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Number {
    Exact(Q),
    Float(f64),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(q) => q_to_f64(q),
            Number::Float(x) => *x,
        }
    }
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Fall back for huge numerators/denominators.
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Parses `"p/q"` or `"p"` into a rational.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: num_bigint::BigInt = n.trim().parse().ok()?;
            let d: num_bigint::BigInt = d.trim().parse().ok()?;
            if num_traits::Zero::is_zero(&d) {
                return None;
            }
            Some(Q::new(n, d))
        }
        None => Some(Q::from_integer(s.parse().ok()?)),
    }
}

/// Shorthand for `n/d` as an exact rational.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}
