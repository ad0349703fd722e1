//! Linear-like factorization of multivariable polynomials.
//!
//! [`formal_lf`] repeatedly peels the maximum term `c*x1^a1*x2^a2*...` off a
//! polynomial by subtracting `c*x1^a1 * L2^a2 * ... * Ln^an`, where each
//! `Ls = xs + W_s_1_k*x1 + ... + W_s_(s-1)_k*x(s-1)` carries fresh
//! undetermined parameters. What is left once only powers of `x1` remain is
//! the remainder.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::polyring::{
    fmt_linear_combination, ParamRat, PolyError, Polynomial, Role, StateMonomial, Symbol, Var,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("input already contains undetermined parameter {0}")]
    ContainsWParams(String),
    #[error("iteration cap of {0} exceeded")]
    IterationCap(usize),
    #[error("rule vector {index} has {got} values, expected {expected}")]
    RuleLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `x_lead + sum_{r < lead} coeffs[r] * x_r`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearForm {
    lead: Var,
    coeffs: Vec<ParamRat>,
}

impl LinearForm {
    pub fn new(lead: Var, coeffs: Vec<ParamRat>) -> Self {
        assert_eq!(
            coeffs.len(),
            lead as usize,
            "one coefficient per lower variable"
        );
        LinearForm { lead, coeffs }
    }

    /// The bare variable `x_lead`.
    pub fn bare(lead: Var) -> Self {
        LinearForm {
            lead,
            coeffs: vec![ParamRat::zero(); lead as usize],
        }
    }

    fn minted(lead: Var, iteration: u32) -> (Self, Vec<Symbol>) {
        let syms: Vec<Symbol> = (0..lead)
            .map(|r| Symbol::w_param(lead + 1, r + 1, iteration))
            .collect();
        let coeffs = syms.iter().cloned().map(ParamRat::symbol).collect();
        (LinearForm { lead, coeffs }, syms)
    }

    pub fn lead(&self) -> Var {
        self.lead
    }

    /// Coefficients of `x_0 .. x_(lead-1)`.
    pub fn coeffs(&self) -> &[ParamRat] {
        &self.coeffs
    }

    pub fn to_polynomial(&self) -> Polynomial {
        let mut p = Polynomial::var(self.lead);
        for (r, c) in self.coeffs.iter().enumerate() {
            p.add_term(StateMonomial::var(r as Var), c.clone());
        }
        p
    }

    pub fn substitute_params(&self, b: &BTreeMap<Symbol, ParamRat>) -> Result<Self, PolyError> {
        Ok(LinearForm {
            lead: self.lead,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.substitute(b))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn is_bare(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Terms from the leading variable downwards, e.g. `z - 2/3*y`.
    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        FormDisplay { form: self, names }
    }
}

struct FormDisplay<'a> {
    form: &'a LinearForm,
    names: &'a [String],
}

impl fmt::Display for FormDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = vec![(self.form.lead, ParamRat::one())];
        for (r, c) in self.form.coeffs.iter().enumerate().rev() {
            if !c.is_zero() {
                terms.push((r as Var, c.clone()));
            }
        }
        fmt_linear_combination(f, &terms, self.names)
    }
}

/// `coefficient * x1^x1_power * prod(form^exp)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FactorTerm {
    pub coefficient: ParamRat,
    pub x1_power: u32,
    pub forms: Vec<(LinearForm, u32)>,
}

impl FactorTerm {
    pub fn expand(&self) -> Polynomial {
        let mut p = Polynomial::term(
            StateMonomial::pow_of(0, self.x1_power),
            self.coefficient.clone(),
        );
        for (l, e) in &self.forms {
            p = &p * &l.to_polynomial().pow(*e);
        }
        p
    }

    /// True when some exponent in the product is odd.
    pub fn has_odd_exponent(&self) -> bool {
        self.x1_power % 2 == 1 || self.forms.iter().any(|(_, e)| e % 2 == 1)
    }

    pub fn substitute_params(&self, b: &BTreeMap<Symbol, ParamRat>) -> Result<Self, PolyError> {
        Ok(FactorTerm {
            coefficient: self.coefficient.substitute(b)?,
            x1_power: self.x1_power,
            forms: self
                .forms
                .iter()
                .map(|(l, e)| Ok((l.substitute_params(b)?, *e)))
                .collect::<Result<_, PolyError>>()?,
        })
    }

    /// Writes the product without its coefficient, e.g. `x1*(x2 + W_2_1_1*x1)^2`.
    pub(crate) fn fmt_product(&self, f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
        let mut first = true;
        if self.x1_power > 0 {
            f.write_str(&crate::polyring::var_name(names, 0))?;
            if self.x1_power > 1 {
                write!(f, "^{}", self.x1_power)?;
            }
            first = false;
        }
        for (l, e) in &self.forms {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if l.is_bare() {
                f.write_str(&crate::polyring::var_name(names, l.lead))?;
            } else {
                write!(f, "({})", l.display(names))?;
            }
            if *e > 1 {
                write!(f, "^{e}")?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

/// Factor terms in extraction order plus a remainder in `x1` only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalFactorization {
    pub nvars: usize,
    pub factors: Vec<FactorTerm>,
    pub remainder: Polynomial,
    /// Parameters minted during the run, in minting order.
    pub params: Vec<Symbol>,
    /// Maximum monomial removed at each iteration.
    pub trace: Vec<StateMonomial>,
}

/// Where a coefficient of a factorization lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientSlot {
    Factor(usize),
    /// Remainder coefficient of `x1^e`.
    Remainder(u32),
}

impl FormalFactorization {
    pub fn expand(&self) -> Polynomial {
        let mut p = self.remainder.clone();
        for t in &self.factors {
            p = &p + &t.expand();
        }
        p
    }

    /// All coefficients: factor terms first, then remainder terms by
    /// descending power of `x1`. Each comes with whether its term has an
    /// odd exponent.
    pub fn coefficients(&self) -> Vec<(CoefficientSlot, ParamRat, bool)> {
        let mut out: Vec<_> = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    CoefficientSlot::Factor(i),
                    t.coefficient.clone(),
                    t.has_odd_exponent(),
                )
            })
            .collect();
        for (m, c) in self.remainder.terms().rev() {
            let e = m.exponent(&0);
            out.push((CoefficientSlot::Remainder(e), c.clone(), e % 2 == 1));
        }
        out
    }

    /// Substitutes parameter values everywhere, dropping factor terms whose
    /// coefficient vanishes.
    pub fn substitute_params(&self, b: &BTreeMap<Symbol, ParamRat>) -> Result<Self, PolyError> {
        let mut factors = Vec::new();
        for t in &self.factors {
            let t = t.substitute_params(b)?;
            if !t.coefficient.is_zero() {
                factors.push(t);
            }
        }
        Ok(FormalFactorization {
            nvars: self.nvars,
            factors,
            remainder: self.remainder.substitute_params(b)?,
            params: self.params.clone(),
            trace: self.trace.clone(),
        })
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> FactorizationDisplay<'a> {
        FactorizationDisplay { f: self, names }
    }
}

pub struct FactorizationDisplay<'a> {
    f: &'a FormalFactorization,
    names: &'a [String],
}

impl fmt::Display for FactorizationDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut i = 0;
        for t in &self.f.factors {
            crate::polyring::fmt_coefficient_prefix(f, i, &t.coefficient)?;
            t.fmt_product(f, self.names)?;
            i += 1;
        }
        for (m, c) in self.f.remainder.terms().rev() {
            crate::polyring::fmt_term(f, i, c, m, self.names)?;
            i += 1;
        }
        if i == 0 {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Default iteration cap: `10 * |support| * (deg + 1)^n`.
pub fn default_iteration_cap(p: &Polynomial, nvars: usize) -> usize {
    let support = p.num_terms().max(1);
    let base = (p.total_degree() as usize + 1).max(2);
    let pow = base.saturating_pow(nvars as u32);
    10usize.saturating_mul(support).saturating_mul(pow)
}

/// Runs the factorization with the default iteration cap.
pub fn formal_lf(p: &Polynomial, nvars: usize) -> Result<FormalFactorization, FactorError> {
    formal_lf_with_cap(p, nvars, default_iteration_cap(p, nvars))
}

pub fn formal_lf_with_cap(
    p: &Polynomial,
    nvars: usize,
    cap: usize,
) -> Result<FormalFactorization, FactorError> {
    if let Some(w) = p.params().into_iter().find(|s| s.role() == Role::WParam) {
        return Err(FactorError::ContainsWParams(w.name().to_string()));
    }
    let mut rest = p.clone();
    let mut factors = Vec::new();
    let mut params = Vec::new();
    let mut trace = Vec::new();
    while let Ok((c, m)) = rest.maxterm() {
        let (c, m) = (c.clone(), m.clone());
        if m.vars().all(|v| *v == 0) {
            break;
        }
        if trace.len() >= cap {
            return Err(FactorError::IterationCap(cap));
        }
        let k = trace.len() as u32 + 1;
        let (x1_power, _) = m.split(&0);
        let mut forms = Vec::new();
        for (v, e) in m.pairs() {
            if *v == 0 {
                continue;
            }
            let (form, syms) = LinearForm::minted(*v, k);
            params.extend(syms);
            forms.push((form, *e));
        }
        let term = FactorTerm {
            coefficient: c,
            x1_power,
            forms,
        };
        rest = &rest - &term.expand();
        debug_assert!(rest.maxterm().map(|(_, n)| *n < m).unwrap_or(true));
        trace.push(m);
        factors.push(term);
    }
    Ok(FormalFactorization {
        nvars,
        factors,
        remainder: rest,
        params,
        trace,
    })
}

/// Parameter vector with one or more value vectors.
#[derive(Clone, Debug)]
pub struct RuleSet {
    pub params: Vec<Symbol>,
    pub rules: Vec<Vec<ParamRat>>,
}

/// Applies each rule vector to the factorization.
pub fn evaluate(
    f: &FormalFactorization,
    rules: &RuleSet,
) -> Result<Vec<FormalFactorization>, FactorError> {
    let mut out = Vec::with_capacity(rules.rules.len());
    for (index, r) in rules.rules.iter().enumerate() {
        if r.len() != rules.params.len() {
            return Err(FactorError::RuleLength {
                index,
                expected: rules.params.len(),
                got: r.len(),
            });
        }
        let b: BTreeMap<Symbol, ParamRat> = rules
            .params
            .iter()
            .cloned()
            .zip(r.iter().cloned())
            .collect();
        out.push(f.substitute_params(&b)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyring::q;

    fn x(i: Var) -> Polynomial {
        Polynomial::var(i)
    }

    fn k(n: i64) -> Polynomial {
        Polynomial::constant(ParamRat::integer(n))
    }

    fn w(s: u32, r: u32, k: u32) -> ParamRat {
        ParamRat::symbol(Symbol::w_param(s, r, k))
    }

    fn example_21() -> Polynomial {
        &(&(&k(5) * &x(0)) - &(&k(7) * &(&x(0) * &x(1)))) + &(&k(11) * &(&x(0) * &x(2)))
    }

    #[test]
    fn two_step_example() {
        let f = formal_lf(&example_21(), 3).unwrap();
        assert_eq!(f.factors.len(), 2);
        assert_eq!(f.factors[0].coefficient, ParamRat::integer(11));
        assert_eq!(f.factors[0].x1_power, 1);
        assert_eq!(f.factors[0].forms.len(), 1);
        assert_eq!(f.factors[0].forms[0].0.lead(), 2);
        let c2 = &ParamRat::integer(-7) - &(&ParamRat::integer(11) * &w(3, 2, 1));
        assert_eq!(f.factors[1].coefficient, c2);
        assert_eq!(f.factors[1].forms[0].0.lead(), 1);
        let r2 = &(&(&ParamRat::integer(7) * &w(2, 1, 2))
            - &(&ParamRat::integer(11) * &w(3, 1, 1)))
            + &(&ParamRat::integer(11) * &(&w(2, 1, 2) * &w(3, 2, 1)));
        let mut rem = Polynomial::term(StateMonomial::var(0), ParamRat::integer(5));
        rem.add_term(StateMonomial::pow_of(0, 2), r2);
        assert_eq!(f.remainder, rem);
        let names: Vec<_> = f.params.iter().map(|s| s.name().to_string()).collect();
        assert_eq!(names, ["W_3_1_1", "W_3_2_1", "W_2_1_2"]);
        assert_eq!(f.expand(), example_21());
    }

    #[test]
    fn rule_evaluation() {
        let f = formal_lf(&example_21(), 3).unwrap();
        let rules = RuleSet {
            params: f.params.clone(),
            rules: vec![vec![
                ParamRat::integer(-2),
                ParamRat::integer(1),
                ParamRat::integer(-1),
            ]],
        };
        let e = evaluate(&f, &rules).unwrap().remove(0);
        assert_eq!(e.factors[0].coefficient, ParamRat::integer(11));
        assert_eq!(
            e.factors[0].forms[0].0.coeffs(),
            &[ParamRat::integer(-2), ParamRat::integer(1)]
        );
        assert_eq!(e.factors[1].coefficient, ParamRat::integer(-18));
        assert_eq!(e.factors[1].forms[0].0.coeffs(), &[ParamRat::integer(-1)]);
        let mut rem = Polynomial::term(StateMonomial::var(0), ParamRat::integer(5));
        rem.add_term(StateMonomial::pow_of(0, 2), ParamRat::integer(4));
        assert_eq!(e.remainder, rem);
        let names = vec!["x1".into(), "x2".into(), "x3".into()];
        assert_eq!(
            e.display(&names).to_string(),
            "11*x1*(x3 + x2 - 2*x1) - 18*x1*(x2 - x1) + 4*x1^2 + 5*x1"
        );

        let bad = RuleSet {
            params: f.params.clone(),
            rules: vec![vec![ParamRat::zero()]],
        };
        assert!(matches!(
            evaluate(&f, &bad),
            Err(FactorError::RuleLength { .. })
        ));
    }

    #[test]
    fn reparameterized_rules() {
        let f = formal_lf(&example_21(), 3).unwrap();
        let phi = ParamRat::symbol(Symbol::new("phi", Role::PlantConstant, vec![1]));
        let theta = ParamRat::symbol(Symbol::new("theta", Role::PlantConstant, vec![2]));
        let rules = RuleSet {
            params: f.params.clone(),
            rules: vec![vec![phi.clone(), phi.clone(), theta.clone()]],
        };
        let e = evaluate(&f, &rules).unwrap().remove(0);
        let expect = &(&(&ParamRat::integer(7) * &theta) - &(&ParamRat::integer(11) * &phi))
            + &(&ParamRat::integer(11) * &(&theta * &phi));
        assert_eq!(
            e.remainder.coefficient(&StateMonomial::pow_of(0, 2)),
            expect
        );
    }

    #[test]
    fn perfect_square_three_steps() {
        let p = (&x(0) + &x(1)).pow(2);
        let f = formal_lf(&p, 2).unwrap();
        assert_eq!(f.factors.len(), 2);
        assert_eq!(f.factors[0].coefficient, ParamRat::one());
        assert_eq!(f.factors[0].forms[0].1, 2);
        let w1 = w(2, 1, 1);
        let c2 = &ParamRat::integer(2) - &(&ParamRat::integer(2) * &w1);
        assert_eq!(f.factors[1].coefficient, c2);
        let rem = &(&ParamRat::one() - &w1.pow(2)) - &(&c2 * &w(2, 1, 2));
        assert_eq!(
            f.remainder,
            Polynomial::term(StateMonomial::pow_of(0, 2), rem)
        );
        assert_eq!(f.expand(), p);
    }

    #[test]
    fn univariate_input_is_all_remainder() {
        let p = &k(3) * &x(0).pow(4);
        let f = formal_lf(&p, 1).unwrap();
        assert!(f.factors.is_empty());
        assert_eq!(f.remainder, p);
        let z = formal_lf(&Polynomial::zero(), 2).unwrap();
        assert!(z.expand().is_zero());
        assert_eq!(z.display(&[]).to_string(), "0");
    }

    #[test]
    fn constant_term_goes_to_remainder() {
        let p = &x(1) + &k(2);
        let f = formal_lf(&p, 2).unwrap();
        assert_eq!(
            f.remainder.coefficient(&StateMonomial::one()),
            ParamRat::integer(2)
        );
        assert_eq!(f.expand(), p);
    }

    #[test]
    fn quadratic_form_round_trip() {
        let (a, b, c) = (x(0), x(1), x(2));
        let p = &(&(&(&a.pow(2) - &(&k(2) * &(&a * &b))) + &(&k(6) * &b.pow(2)))
            - &(&k(4) * &(&b * &c)))
            + &(&k(3) * &c.pow(2));
        let f = formal_lf(&p, 3).unwrap();
        assert_eq!(f.expand(), p);
        assert_eq!(f.factors[0].coefficient, ParamRat::integer(3));
        assert!(!f
            .remainder
            .coefficient(&StateMonomial::pow_of(0, 2))
            .is_zero());
        let _ = q(1, 1);
    }

    #[test]
    fn rejects_existing_w_params() {
        let p = Polynomial::term(StateMonomial::var(1), w(2, 1, 1));
        assert!(matches!(
            formal_lf(&p, 2),
            Err(FactorError::ContainsWParams(_))
        ));
    }

    #[test]
    fn iteration_cap_is_enforced() {
        let p = &x(1).pow(2) + &x(0);
        assert!(matches!(
            formal_lf_with_cap(&p, 2, 1),
            Err(FactorError::IterationCap(1))
        ));
    }
}
