//! Polynomial state feedback certified through a Lyapunov function.
//!
//! For `x' = f(x, u)` and a positive definite `L`, a parametric law
//! `u = a(x)` is substituted and `V = -grad(L) . f(x, a(x))` is handed to the
//! positivity solver with the feedback coefficients as extra decision
//! parameters.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::polyring::{ParamRat, PolyError, Polynomial, StateMonomial, Symbol, Var, Q};
use crate::positivity::{
    pos_check, Certificate, NoCertificate, PosOutcome, PositivityError, SolutionSet, SolveOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("expected {expected} right-hand sides, got {got}")]
    RhsLength { expected: usize, got: usize },
    #[error("right-hand side {index} has a free term; the origin must be an equilibrium")]
    FreeTerm { index: usize },
    #[error("expression uses variable position {0} outside the system")]
    UnknownVariable(Var),
    #[error("expected {expected} feedback laws, got {got}")]
    LawCount { expected: usize, got: usize },
    #[error("feedback law {0} has a free term")]
    LawFreeTerm(usize),
    #[error("feedback degree must be at least 1")]
    Degree,
    #[error("invalid Lyapunov function: {0}")]
    Lyapunov(String),
    #[error(transparent)]
    Positivity(#[from] PositivityError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `x_i' = rhs_i(x, u)`. States occupy positions `0..n`, inputs `n..n+m`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySystem {
    states: Vec<String>,
    inputs: Vec<String>,
    rhs: Vec<Polynomial>,
}

impl PolySystem {
    pub fn new(
        states: Vec<String>,
        inputs: Vec<String>,
        rhs: Vec<Polynomial>,
    ) -> Result<Self, FeedbackError> {
        if rhs.len() != states.len() {
            return Err(FeedbackError::RhsLength {
                expected: states.len(),
                got: rhs.len(),
            });
        }
        let nv = (states.len() + inputs.len()) as Var;
        for (i, p) in rhs.iter().enumerate() {
            if !p.coefficient(&StateMonomial::one()).is_zero() {
                return Err(FeedbackError::FreeTerm { index: i + 1 });
            }
            if let Some(v) = p.vars().into_iter().find(|v| *v >= nv) {
                return Err(FeedbackError::UnknownVariable(v));
            }
        }
        Ok(PolySystem {
            states,
            inputs,
            rhs,
        })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    pub fn rhs(&self) -> &[Polynomial] {
        &self.rhs
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    /// States followed by inputs.
    pub fn var_names(&self) -> Vec<String> {
        self.states.iter().chain(&self.inputs).cloned().collect()
    }

    /// Right-hand sides with `u = laws(x)` substituted.
    pub fn closed_loop(&self, laws: &[Polynomial]) -> Result<Vec<Polynomial>, FeedbackError> {
        if laws.len() != self.m() {
            return Err(FeedbackError::LawCount {
                expected: self.m(),
                got: laws.len(),
            });
        }
        for (j, a) in laws.iter().enumerate() {
            if !a.coefficient(&StateMonomial::one()).is_zero() {
                return Err(FeedbackError::LawFreeTerm(j + 1));
            }
            if let Some(v) = a.vars().into_iter().find(|v| *v as usize >= self.n()) {
                return Err(FeedbackError::UnknownVariable(v));
            }
        }
        let n = self.n() as Var;
        let b: BTreeMap<Var, Polynomial> = laws
            .iter()
            .enumerate()
            .map(|(j, a)| (n + j as Var, a.clone()))
            .collect();
        Ok(self.rhs.iter().map(|p| p.substitute_vars(&b)).collect())
    }

    /// Substitutes values for plant constants.
    pub fn with_constants(
        &self,
        values: &BTreeMap<Symbol, ParamRat>,
    ) -> Result<Self, FeedbackError> {
        let rhs = self
            .rhs
            .iter()
            .map(|p| p.substitute_params(values))
            .collect::<Result<_, _>>()?;
        Ok(PolySystem {
            states: self.states.clone(),
            inputs: self.inputs.clone(),
            rhs,
        })
    }
}

/// A candidate Lyapunov function in the states.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSpec {
    function: Polynomial,
}

impl LyapunovSpec {
    /// Checks `L(0) = 0` and `L > 0` on the unit axis points and 1000 random
    /// nonzero states.
    pub fn new(function: Polynomial, n: usize, seed: u64) -> Result<Self, FeedbackError> {
        if let Some(v) = function.vars().into_iter().find(|v| *v as usize >= n) {
            return Err(FeedbackError::Lyapunov(format!(
                "mentions variable position {v}, which is not a state"
            )));
        }
        if !function.coefficient(&StateMonomial::one()).is_zero() {
            return Err(FeedbackError::Lyapunov("L(0) is not zero".into()));
        }
        if !function.params().is_empty() {
            return Err(FeedbackError::Lyapunov(
                "coefficients must be numeric".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let empty = BTreeMap::new();
        let axes = (0..2 * n).map(|k| {
            let mut x = vec![0.0; n];
            x[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
            x
        });
        let random: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..n).map(|_| rng.gen_range(-10.0..=10.0)).collect())
            .collect();
        for x in axes.chain(random) {
            if x.iter().all(|c| *c == 0.0) {
                continue;
            }
            let v = function.eval_f64(&x, &empty)?;
            if v <= 0.0 {
                return Err(FeedbackError::Lyapunov(format!(
                    "not positive at {x:?} (value {v})"
                )));
            }
        }
        Ok(LyapunovSpec { function })
    }

    /// `x1^2 + ... + xn^2`.
    pub fn sum_of_squares(n: usize) -> Self {
        let mut function = Polynomial::zero();
        for i in 0..n {
            function.add_term(StateMonomial::pow_of(i as Var, 2), ParamRat::one());
        }
        LyapunovSpec { function }
    }

    pub fn function(&self) -> &Polynomial {
        &self.function
    }
}

/// One list of `(coefficient symbol, state monomial)` per input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeedbackTemplate {
    pub laws: Vec<Vec<(Symbol, StateMonomial)>>,
}

impl FeedbackTemplate {
    /// Coefficient symbols in input order, then term order.
    pub fn params(&self) -> Vec<Symbol> {
        self.laws.iter().flatten().map(|(s, _)| s.clone()).collect()
    }

    pub fn laws(&self) -> Vec<Polynomial> {
        self.laws
            .iter()
            .map(|terms| {
                let mut p = Polynomial::zero();
                for (s, m) in terms {
                    p.add_term(m.clone(), ParamRat::symbol(s.clone()));
                }
                p
            })
            .collect()
    }

    /// Monomials of each law.
    pub fn support(&self) -> Vec<Vec<StateMonomial>> {
        self.laws
            .iter()
            .map(|t| t.iter().map(|(_, m)| m.clone()).collect())
            .collect()
    }

    /// Template with auto-named coefficients over the given monomials.
    pub fn from_support(support: &[Vec<StateMonomial>]) -> Self {
        let laws = support
            .iter()
            .enumerate()
            .map(|(j, monos)| {
                let mut seen = BTreeSet::new();
                monos
                    .iter()
                    .filter(|m| !m.is_one() && seen.insert((*m).clone()))
                    .map(|m| (auto_param(j, m), m.clone()))
                    .collect()
            })
            .collect();
        FeedbackTemplate { laws }
    }
}

/// `A{j}_{i1}_{i2}...` with 1-based input and variable positions.
fn auto_param(j: usize, m: &StateMonomial) -> Symbol {
    let mut index = vec![j as u32 + 1];
    for (v, e) in m.pairs() {
        for _ in 0..*e {
            index.push(v + 1);
        }
    }
    let name = index
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("_");
    Symbol::feedback_param(format!("A{name}"), index)
}

/// Monomials of total degree `d` in `n` variables, ascending.
fn monomials_of_degree(n: usize, d: u32) -> Vec<StateMonomial> {
    fn rec(
        n: usize,
        start: usize,
        left: u32,
        cur: &mut Vec<(Var, u32)>,
        out: &mut Vec<StateMonomial>,
    ) {
        if left == 0 {
            out.push(StateMonomial::from_pairs(cur.iter().copied()));
            return;
        }
        for v in start..n {
            cur.push((v as Var, 1));
            rec(n, v, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, d, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Dense template: every monomial of degree `1..=degree` in every law.
pub fn build_parametric_feedback(
    n: usize,
    m: usize,
    degree: u32,
) -> Result<FeedbackTemplate, FeedbackError> {
    if degree < 1 {
        return Err(FeedbackError::Degree);
    }
    let monos: Vec<StateMonomial> = (1..=degree)
        .flat_map(|d| monomials_of_degree(n, d))
        .collect();
    Ok(FeedbackTemplate::from_support(&vec![monos; m]))
}

/// `V = -sum_i dL/dx_i * f_i(x, a(x))`.
pub fn lyapunov_derivative(
    sys: &PolySystem,
    l: &LyapunovSpec,
    laws: &[Polynomial],
) -> Result<Polynomial, FeedbackError> {
    let f = sys.closed_loop(laws)?;
    let mut v = Polynomial::zero();
    for (i, fi) in f.iter().enumerate() {
        let g = l.function.partial_derivative(i as Var);
        v = &v - &(&g * fi);
    }
    Ok(v)
}

/// A stabilizing family with its certificate.
#[derive(Clone, Debug)]
pub struct FeedbackFamily {
    pub template: FeedbackTemplate,
    /// Template laws with the solved equalities applied.
    pub laws: Vec<Polynomial>,
    pub derivative: Polynomial,
    pub certificate: Certificate,
    /// Laws under the numeric witness.
    pub witness_laws: Option<Vec<Polynomial>>,
    /// Claimed only when the certificate is positive definite under the witness.
    pub globally_asymptotically_stable: bool,
}

impl FeedbackFamily {
    pub fn solution(&self) -> &SolutionSet {
        &self.certificate.solution
    }
}

#[derive(Clone, Debug)]
pub enum SynthesisOutcome {
    Stabilized(Box<FeedbackFamily>),
    NoStabilizer(NoCertificate),
}

impl SynthesisOutcome {
    pub fn family(&self) -> Option<&FeedbackFamily> {
        match self {
            SynthesisOutcome::Stabilized(f) => Some(f),
            SynthesisOutcome::NoStabilizer(_) => None,
        }
    }
}

/// Certifies `V >= 0` with strict positivity requested of nonconstant even
/// coefficients.
pub fn synthesize(
    sys: &PolySystem,
    l: &LyapunovSpec,
    template: &FeedbackTemplate,
    opts: &SolveOptions,
) -> Result<SynthesisOutcome, FeedbackError> {
    let laws = template.laws();
    let v = lyapunov_derivative(sys, l, &laws)?;
    let opts = SolveOptions {
        strict: true,
        ..opts.clone()
    };
    let cert = match pos_check(&v, sys.n(), &template.params(), &opts)? {
        PosOutcome::Certified(c) => *c,
        PosOutcome::NoCertificate(e) => return Ok(SynthesisOutcome::NoStabilizer(e)),
    };
    let eqs = cert.solution.bindings();
    let family_laws = laws
        .iter()
        .map(|a| a.substitute_params(&eqs))
        .collect::<Result<Vec<_>, _>>()?;
    let witness_laws = match cert.solution.witness_bindings() {
        Some(w) => Some(
            laws.iter()
                .map(|a| a.substitute_params(&w))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let gas = cert.positive_definite == Some(true);
    Ok(SynthesisOutcome::Stabilized(Box::new(FeedbackFamily {
        template: template.clone(),
        laws: family_laws,
        derivative: v,
        certificate: cert,
        witness_laws,
        globally_asymptotically_stable: gas,
    })))
}

/// Tries [`suggest_templates`] in order; returns the first success or the
/// last failure.
pub fn synthesize_auto(
    sys: &PolySystem,
    l: &LyapunovSpec,
    max_degree: u32,
    opts: &SolveOptions,
) -> Result<(FeedbackTemplate, SynthesisOutcome), FeedbackError> {
    let mut last = None;
    for t in suggest_templates(sys, max_degree)? {
        let out = synthesize(sys, l, &t, opts)?;
        if out.family().is_some() {
            return Ok((t, out));
        }
        last = Some((t, out));
    }
    last.ok_or(FeedbackError::Degree)
}

/// `A = df/dx (0,0)`, `B = df/du (0,0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianPair {
    pub a: Vec<Vec<ParamRat>>,
    pub b: Vec<Vec<ParamRat>>,
}

pub fn linearize(sys: &PolySystem) -> JacobianPair {
    let (n, m) = (sys.n(), sys.m());
    let entry = |i: usize, v: usize| sys.rhs[i].coefficient(&StateMonomial::var(v as Var));
    JacobianPair {
        a: (0..n)
            .map(|i| (0..n).map(|j| entry(i, j)).collect())
            .collect(),
        b: (0..n)
            .map(|i| (0..m).map(|j| entry(i, n + j)).collect())
            .collect(),
    }
}

/// Escalating templates: linear, linear plus the nonlinear state monomials
/// of the rows each input drives, linear plus one extra monomial, dense.
pub fn suggest_templates(
    sys: &PolySystem,
    max_degree: u32,
) -> Result<Vec<FeedbackTemplate>, FeedbackError> {
    if max_degree < 1 {
        return Err(FeedbackError::Degree);
    }
    let (n, m) = (sys.n(), sys.m());
    let linear: Vec<StateMonomial> = monomials_of_degree(n, 1);
    let mut supports: Vec<Vec<Vec<StateMonomial>>> = vec![vec![linear.clone(); m]];
    if max_degree >= 2 {
        let mirrored: Vec<Vec<StateMonomial>> = (0..m)
            .map(|j| {
                let u = (n + j) as Var;
                let mut extra: Vec<StateMonomial> = Vec::new();
                for p in &sys.rhs {
                    if !p.vars().contains(&u) {
                        continue;
                    }
                    for (mono, _) in p.terms() {
                        let d = mono.degree();
                        if d >= 2
                            && d <= max_degree
                            && mono.vars().all(|v| (*v as usize) < n)
                            && !extra.contains(mono)
                        {
                            extra.push(mono.clone());
                        }
                    }
                }
                linear.iter().cloned().chain(extra).collect()
            })
            .collect();
        supports.push(mirrored);
        for d in 2..=max_degree {
            for mono in monomials_of_degree(n, d) {
                let mut s = linear.clone();
                s.push(mono);
                supports.push(vec![s; m]);
            }
        }
        let dense: Vec<StateMonomial> = (1..=max_degree)
            .flat_map(|d| monomials_of_degree(n, d))
            .collect();
        supports.push(vec![dense; m]);
    }
    let mut out: Vec<FeedbackTemplate> = Vec::new();
    for s in supports {
        let t = FeedbackTemplate::from_support(&s);
        if !out.iter().any(|o| o.support() == t.support()) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Numeric parameter values as exact constants.
pub fn constant_bindings(values: &BTreeMap<Symbol, Q>) -> BTreeMap<Symbol, ParamRat> {
    values
        .iter()
        .map(|(s, v)| (s.clone(), ParamRat::constant(v.clone())))
        .collect()
}
