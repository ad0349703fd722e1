use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use super::monomial::Monomial;
use super::paramrat::ParamRat;
use super::symbol::Symbol;
use super::{Number, PolyError, Q};

/// 0-based position of a state or input variable.
pub type Var = u32;

pub type StateMonomial = Monomial<Var>;

/// Sparse polynomial in state/input variables with parametric coefficients.
///
/// Terms are kept in ascending monomial order, so the maximum term is the
/// last entry. No stored coefficient is zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<StateMonomial, ParamRat>,
}

/// Replacement value for a symbol in [`Polynomial::substitute`].
#[derive(Clone, Debug)]
pub enum Binding {
    Poly(Polynomial),
    Value(ParamRat),
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(ParamRat::one())
    }

    pub fn constant(c: ParamRat) -> Self {
        Self::term(StateMonomial::one(), c)
    }

    pub fn var(v: Var) -> Self {
        Self::term(StateMonomial::var(v), ParamRat::one())
    }

    pub fn term(m: StateMonomial, c: ParamRat) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn add_term(&mut self, m: StateMonomial, c: ParamRat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&StateMonomial, &ParamRat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &StateMonomial) -> ParamRat {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    /// The term with the largest monomial.
    pub fn maxterm(&self) -> Result<(&ParamRat, &StateMonomial), PolyError> {
        self.terms
            .iter()
            .next_back()
            .map(|(m, c)| (c, m))
            .ok_or(PolyError::EmptyPolynomial)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms.keys().map(|m| m.exponent(&v)).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.vars().copied()).collect()
    }

    /// Parameter symbols appearing in coefficients.
    pub fn params(&self) -> BTreeSet<Symbol> {
        self.terms.values().flat_map(|c| c.symbols()).collect()
    }

    /// True when every monomial only involves `v` (constants included).
    pub fn only_involves(&self, v: Var) -> bool {
        self.terms.keys().all(|m| m.vars().all(|w| *w == v))
    }

    pub fn scale(&self, c: &ParamRat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (m, k) in &self.terms {
            out.add_term(m.clone(), k * c);
        }
        out
    }

    pub fn mul_term(&self, mono: &StateMonomial, c: &ParamRat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (m, k) in &self.terms {
            out.add_term(m.mul(mono), k * c);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn partial_derivative(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if let Some((e, dm)) = m.derivative(&v) {
                out.add_term(dm, c.scale(&Q::from_integer(e.into())));
            }
        }
        out
    }

    /// Simultaneous substitution: variables may be bound to polynomials,
    /// parameters only to parameter expressions.
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Binding>) -> Result<Self, PolyError> {
        let mut vars = BTreeMap::new();
        let mut params = BTreeMap::new();
        for (s, b) in bindings {
            match (s.var(), b) {
                (Some(v), Binding::Poly(p)) => {
                    vars.insert(v, p.clone());
                }
                (Some(v), Binding::Value(c)) => {
                    vars.insert(v, Polynomial::constant(c.clone()));
                }
                (None, Binding::Value(c)) => {
                    params.insert(s.clone(), c.clone());
                }
                (None, Binding::Poly(p)) => {
                    let only_const = p.terms.keys().all(|m| m.is_one());
                    if !only_const {
                        return Err(PolyError::NonConstantParamBinding(s.name().to_string()));
                    }
                    params.insert(s.clone(), p.coefficient(&StateMonomial::one()));
                }
            }
        }
        let with_params = self.substitute_params(&params)?;
        Ok(with_params.substitute_vars(&vars))
    }

    pub fn substitute_params(
        &self,
        bindings: &BTreeMap<Symbol, ParamRat>,
    ) -> Result<Self, PolyError> {
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.substitute(bindings)?);
        }
        Ok(out)
    }

    pub fn substitute_vars(&self, bindings: &BTreeMap<Var, Polynomial>) -> Self {
        if bindings.is_empty() {
            return self.clone();
        }
        let mut cache: BTreeMap<(Var, u32), Polynomial> = BTreeMap::new();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut rest = Vec::new();
            let mut t = Polynomial::constant(c.clone());
            for (v, e) in m.pairs() {
                match bindings.get(v) {
                    Some(p) => {
                        let pw = cache.entry((*v, *e)).or_insert_with(|| p.pow(*e));
                        t = &t * pw;
                    }
                    None => rest.push((*v, *e)),
                }
            }
            let t = t.mul_term(&StateMonomial::from_pairs(rest), &ParamRat::one());
            out = &out + &t;
        }
        out
    }

    /// Exact evaluation with variables given by position and parameters by symbol.
    pub fn eval_exact(&self, vars: &[Q], params: &BTreeMap<Symbol, Q>) -> Result<Q, PolyError> {
        let mut missing = Vec::new();
        let mut acc = Q::zero();
        for (m, c) in &self.terms {
            let mut t = c.eval(params)?;
            for (v, e) in m.pairs() {
                match vars.get(*v as usize) {
                    Some(x) => t *= num_traits::pow(x.clone(), *e as usize),
                    None => missing.push(*v),
                }
            }
            acc += t;
        }
        if !missing.is_empty() {
            missing.sort();
            missing.dedup();
            return Err(PolyError::UnboundVariables(missing));
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, vars: &[f64], params: &BTreeMap<Symbol, f64>) -> Result<f64, PolyError> {
        let mut missing = Vec::new();
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.eval_f64(params)?;
            for (v, e) in m.pairs() {
                match vars.get(*v as usize) {
                    Some(x) => t *= x.powi(*e as i32),
                    None => missing.push(*v),
                }
            }
            acc += t;
        }
        if !missing.is_empty() {
            missing.sort();
            missing.dedup();
            return Err(PolyError::UnboundVariables(missing));
        }
        Ok(acc)
    }

    /// Evaluates at a point keyed by symbols (variables via their positions).
    ///
    /// The result is exact when every supplied value is exact.
    pub fn eval_numeric(&self, point: &BTreeMap<Symbol, Number>) -> Result<Number, PolyError> {
        let all_exact = point.values().all(|n| matches!(n, Number::Exact(_)));
        let mut missing: BTreeSet<Symbol> = self
            .params()
            .into_iter()
            .filter(|s| !point.contains_key(s))
            .collect();
        let nvars = self
            .vars()
            .iter()
            .max()
            .map(|v| *v as usize + 1)
            .unwrap_or(0);
        let mut var_slots: Vec<Option<&Number>> = vec![None; nvars];
        for (s, n) in point {
            if let Some(v) = s.var() {
                if (v as usize) < nvars {
                    var_slots[v as usize] = Some(n);
                }
            }
        }
        let unbound_vars: Vec<Var> = self
            .vars()
            .into_iter()
            .filter(|v| var_slots[*v as usize].is_none())
            .collect();
        if !missing.is_empty() {
            return Err(PolyError::Unbound(std::mem::take(&mut missing)));
        }
        if !unbound_vars.is_empty() {
            return Err(PolyError::UnboundVariables(unbound_vars));
        }
        if all_exact {
            let params: BTreeMap<Symbol, Q> = point
                .iter()
                .filter(|(s, _)| s.var().is_none())
                .map(|(s, n)| match n {
                    Number::Exact(q) => (s.clone(), q.clone()),
                    Number::Float(_) => unreachable!(),
                })
                .collect();
            let vars: Vec<Q> = var_slots
                .iter()
                .map(|n| match n {
                    Some(Number::Exact(q)) => q.clone(),
                    _ => Q::zero(),
                })
                .collect();
            self.eval_exact(&vars, &params).map(Number::Exact)
        } else {
            let params: BTreeMap<Symbol, f64> = point
                .iter()
                .filter(|(s, _)| s.var().is_none())
                .map(|(s, n)| (s.clone(), n.to_f64()))
                .collect();
            let vars: Vec<f64> = var_slots
                .iter()
                .map(|n| n.map(|x| x.to_f64()).unwrap_or(0.0))
                .collect();
            self.eval_f64(&vars, &params).map(Number::Float)
        }
    }

    /// Numeric coefficients only: `None` if any coefficient still has parameters.
    pub fn numeric_terms(&self) -> Option<Vec<(StateMonomial, Q)>> {
        self.terms
            .iter()
            .map(|(m, c)| c.constant_value().map(|q| (m.clone(), q)))
            .collect()
    }

    pub fn from_numeric_terms(terms: impl IntoIterator<Item = (StateMonomial, Q)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, ParamRat::constant(c));
        }
        p
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, names }
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (big, small) = if self.terms.len() >= rhs.terms.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Default variable names `x1, x2, ...`.
pub(crate) fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

pub(crate) fn var_name(names: &[String], v: Var) -> String {
    names
        .get(v as usize)
        .cloned()
        .unwrap_or_else(|| format!("x{}", v + 1))
}

pub(crate) fn fmt_state_monomial(
    f: &mut fmt::Formatter<'_>,
    m: &StateMonomial,
    names: &[String],
) -> fmt::Result {
    for (i, (v, e)) in m.pairs().iter().enumerate() {
        if i > 0 {
            f.write_str("*")?;
        }
        f.write_str(&var_name(names, *v))?;
        if *e != 1 {
            write!(f, "^{e}")?;
        }
    }
    Ok(())
}

fn write_sign(f: &mut fmt::Formatter<'_>, first: bool, neg: bool) -> fmt::Result {
    match (first, neg) {
        (true, true) => f.write_str("-"),
        (true, false) => Ok(()),
        (false, true) => f.write_str(" - "),
        (false, false) => f.write_str(" + "),
    }
}

/// Writes the sign and coefficient of the `index`-th summand, ending in `*`
/// unless the coefficient is one.
pub(crate) fn fmt_coefficient_prefix(
    f: &mut fmt::Formatter<'_>,
    index: usize,
    c: &ParamRat,
) -> fmt::Result {
    let first = index == 0;
    if let Some(q) = c.constant_value() {
        write_sign(f, first, q.is_negative())?;
        let a = q.abs();
        if !a.is_one() {
            write!(f, "{a}*")?;
        }
        return Ok(());
    }
    let (c, neg) = if c.is_negative_monomial() {
        (-c, true)
    } else {
        (c.clone(), false)
    };
    write_sign(f, first, neg)?;
    if c.is_compound() && c.is_polynomial() {
        write!(f, "({c})*")
    } else {
        write!(f, "{c}*")
    }
}

/// Writes `c*m` as the `index`-th summand of a sum.
pub(crate) fn fmt_term(
    f: &mut fmt::Formatter<'_>,
    index: usize,
    c: &ParamRat,
    m: &StateMonomial,
    names: &[String],
) -> fmt::Result {
    if !m.is_one() {
        fmt_coefficient_prefix(f, index, c)?;
        return fmt_state_monomial(f, m, names);
    }
    let first = index == 0;
    if let Some(q) = c.constant_value() {
        write_sign(f, first, q.is_negative())?;
        return write!(f, "{}", q.abs());
    }
    let (c, neg) = if c.is_negative_monomial() {
        (-c, true)
    } else {
        (c.clone(), false)
    };
    write_sign(f, first, neg)?;
    if c.is_compound() && !first {
        write!(f, "({c})")
    } else {
        write!(f, "{c}")
    }
}

/// Writes `sum c_i * x_(v_i)` in the given order.
pub(crate) fn fmt_linear_combination(
    f: &mut fmt::Formatter<'_>,
    terms: &[(Var, ParamRat)],
    names: &[String],
) -> fmt::Result {
    for (i, (v, c)) in terms.iter().enumerate() {
        fmt_term(f, i, c, &StateMonomial::var(*v), names)?;
    }
    Ok(())
}

pub struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    names: &'a [String],
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.poly.terms.iter().rev().enumerate() {
            fmt_term(f, i, c, m, self.names)?;
        }
        Ok(())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self
            .vars()
            .iter()
            .max()
            .map(|v| *v as usize + 1)
            .unwrap_or(0);
        let names = default_names(n);
        write!(f, "{}", self.display(&names))
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
