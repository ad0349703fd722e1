//! Nonnegativity certificates by eliminating factorization parameters.
//!
//! Coefficients of a [`FormalFactorization`] split into those attached to a
//! product with some odd exponent (which must vanish) and the rest (which
//! must be nonnegative). [`solve`] picks parameter values accordingly and
//! [`extract_sos`] reads off the resulting sum of squares.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::formalfactor::{
    formal_lf, CoefficientSlot, FactorError, FactorTerm, FormalFactorization, LinearForm,
};
use crate::polyring::{
    q_to_f64, ParamPoly, ParamRat, PolyError, Polynomial, Role, StateMonomial, Symbol, Q,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PositivityError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("coefficient {0} multiplies an odd power but does not vanish under the solution")]
    SurvivingOddTerm(usize),
    #[error("solution has no numeric witness")]
    NoWitness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifiedCoefficient {
    /// 1-based position: factor terms first, then remainder terms.
    pub index: usize,
    pub slot: CoefficientSlot,
    pub coefficient: ParamRat,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParityClassification {
    pub odd: Vec<ClassifiedCoefficient>,
    pub even: Vec<ClassifiedCoefficient>,
}

pub fn classify(f: &FormalFactorization) -> ParityClassification {
    let mut cls = ParityClassification::default();
    for (i, (slot, coefficient, odd)) in f.coefficients().into_iter().enumerate() {
        let c = ClassifiedCoefficient {
            index: i + 1,
            slot,
            coefficient,
        };
        if odd {
            cls.odd.push(c);
        } else {
            cls.even.push(c);
        }
    }
    cls
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Relation {
    #[serde(rename = ">= 0")]
    NonNegative,
    #[serde(rename = "> 0")]
    Positive,
    #[serde(rename = "!= 0")]
    NonZero,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::NonNegative => ">= 0",
            Relation::Positive => "> 0",
            Relation::NonZero => "!= 0",
        }
    }

    pub fn holds(self, v: &Q) -> bool {
        match self {
            Relation::NonNegative => !v.is_negative(),
            Relation::Positive => v.is_positive(),
            Relation::NonZero => !v.is_zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub expr: ParamRat,
    pub relation: Relation,
}

impl Constraint {
    /// Evaluates at a point; a vanishing denominator counts as a violation.
    pub fn holds_at(&self, point: &BTreeMap<Symbol, Q>) -> bool {
        match self.expr.eval(point) {
            Ok(v) => self.relation.holds(&v),
            Err(_) => false,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.expr, self.relation.symbol())
    }
}

/// Parameter equalities, side constraints and an optional numeric witness.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolutionSet {
    /// In solving order; each value only mentions free parameters.
    pub equalities: Vec<(Symbol, ParamRat)>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<Symbol>,
    /// Values for every decision parameter, solved and free.
    pub witness: Option<BTreeMap<Symbol, Q>>,
}

impl SolutionSet {
    pub fn bindings(&self) -> BTreeMap<Symbol, ParamRat> {
        self.equalities.iter().cloned().collect()
    }

    pub fn value_of(&self, s: &Symbol) -> Option<&ParamRat> {
        self.equalities.iter().find(|(t, _)| t == s).map(|(_, v)| v)
    }

    pub fn witness_bindings(&self) -> Option<BTreeMap<Symbol, ParamRat>> {
        self.witness.as_ref().map(|w| {
            w.iter()
                .map(|(s, v)| (s.clone(), ParamRat::constant(v.clone())))
                .collect()
        })
    }

    /// Feasible ranges of constraints that mention a single parameter.
    pub fn ranges(&self) -> Vec<(Symbol, Relation, ParamRat, Vec<Interval>)> {
        let mut out = Vec::new();
        for c in &self.constraints {
            if c.relation == Relation::NonZero {
                continue;
            }
            let syms = c.expr.symbols();
            if syms.len() != 1 {
                continue;
            }
            let s = syms.into_iter().next().unwrap();
            if let Some(iv) = univariate_intervals(&c.expr, c.relation, &s) {
                out.push((s, c.relation, c.expr.clone(), iv));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bound {
    pub value: f64,
    /// Set when the endpoint is rational.
    pub exact: Option<Q>,
    pub closed: bool,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(q) => write!(f, "{q}"),
            None => write!(f, "{:.6}", self.value),
        }
    }
}

/// Interval with `None` for an infinite end.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: Option<Bound>,
    pub hi: Option<Bound>,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = match &self.lo {
            None => true,
            Some(b) => x > b.value || (b.closed && x == b.value),
        };
        let hi_ok = match &self.hi {
            None => true,
            Some(b) => x < b.value || (b.closed && x == b.value),
        };
        lo_ok && hi_ok
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            None => f.write_str("(-inf")?,
            Some(b) => write!(f, "{}{b}", if b.closed { "[" } else { "(" })?,
        }
        f.write_str(", ")?;
        match &self.hi {
            None => f.write_str("inf)"),
            Some(b) => write!(f, "{b}{}", if b.closed { "]" } else { ")" }),
        }
    }
}

/// Solves `expr rel 0` for `s` when `expr` depends on `s` alone and
/// numerator times denominator has degree at most two.
pub fn univariate_intervals(expr: &ParamRat, rel: Relation, s: &Symbol) -> Option<Vec<Interval>> {
    if expr.symbols().iter().any(|t| t != s) {
        return None;
    }
    let g = expr.numer() * expr.denom();
    let cs: Vec<Q> = g
        .coeffs_in(s)
        .iter()
        .map(|c| c.constant_value())
        .collect::<Option<_>>()?;
    if cs.len() > 3 {
        return None;
    }
    let mut roots: Vec<(f64, Option<Q>)> = Vec::new();
    match cs.len() {
        2 => {
            let r = -&cs[0] / &cs[1];
            roots.push((q_to_f64(&r), Some(r)));
        }
        3 => {
            let (a, b, c) = (&cs[2], &cs[1], &cs[0]);
            let disc = b * b - Q::from_integer(4.into()) * a * c;
            if disc.is_negative() {
            } else if let Some(sq) = rational_sqrt(&disc) {
                let two_a = a * Q::from_integer(2.into());
                for r in [(-b - &sq) / &two_a, (-b + &sq) / &two_a] {
                    roots.push((q_to_f64(&r), Some(r)));
                }
            } else {
                let (af, bf, df) = (q_to_f64(a), q_to_f64(b), q_to_f64(&disc).sqrt());
                roots.push(((-bf - df) / (2.0 * af), None));
                roots.push(((-bf + df) / (2.0 * af), None));
            }
        }
        _ => {}
    }
    roots.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    roots.dedup_by(|x, y| x.0 == y.0);
    let den_roots: Vec<f64> = {
        let d = expr.denom().coeffs_in(s);
        if d.len() == 2 {
            let (c0, c1) = (d[0].constant_value()?, d[1].constant_value()?);
            vec![q_to_f64(&(-c0 / c1))]
        } else {
            Vec::new()
        }
    };
    let eval = |x: f64| -> f64 {
        let mut m = BTreeMap::new();
        m.insert(s.clone(), x);
        expr.eval_f64(&m).unwrap_or(f64::NAN)
    };
    let test = |v: f64| match rel {
        Relation::NonNegative => v >= 0.0,
        Relation::Positive => v > 0.0,
        Relation::NonZero => v != 0.0,
    };
    // Sign is constant between consecutive roots; probe midpoints.
    let mut pieces: Vec<Interval> = Vec::new();
    let mut last_piece = None;
    let n = roots.len();
    for i in 0..=n {
        let lo = if i == 0 { None } else { Some(&roots[i - 1]) };
        let hi = if i == n { None } else { Some(&roots[i]) };
        let probe = match (lo, hi) {
            (None, None) => 0.0,
            (None, Some(h)) => h.0 - 1.0,
            (Some(l), None) => l.0 + 1.0,
            (Some(l), Some(h)) => 0.5 * (l.0 + h.0),
        };
        if test(eval(probe)) {
            let bound = |r: &(f64, Option<Q>)| {
                let closed = rel == Relation::NonNegative
                    && !den_roots.iter().any(|d| (d - r.0).abs() < 1e-12);
                Bound {
                    value: r.0,
                    exact: r.1.clone(),
                    closed,
                }
            };
            let iv = Interval {
                lo: lo.map(bound),
                hi: hi.map(bound),
            };
            let adjacent = i > 0 && last_piece == Some(i - 1);
            match pieces.last_mut() {
                Some(prev) if adjacent && iv.lo.as_ref().map(|b| b.closed).unwrap_or(false) => {
                    prev.hi = iv.hi;
                }
                _ => pieces.push(iv),
            }
            last_piece = Some(i);
        }
    }
    Some(pieces)
}

fn rational_sqrt(q: &Q) -> Option<Q> {
    let (n, d) = (q.numer(), q.denom());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    (&sn * &sn == *n && &sd * &sd == *d).then(|| Q::new(sn, sd))
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Require nonconstant even coefficients to be strictly positive.
    pub strict: bool,
    pub branch_limit: usize,
    /// Values tried first during witness search.
    pub hints: BTreeMap<Symbol, Q>,
    pub seed: u64,
    pub node_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            strict: false,
            branch_limit: 256,
            hints: BTreeMap::new(),
            seed: 0,
            node_limit: 200_000,
        }
    }
}

/// Why no certificate was produced. This is not a proof of non-positivity.
#[derive(Clone, Debug, PartialEq)]
pub struct NoCertificate {
    pub reason: String,
    pub branches: usize,
}

impl fmt::Display for NoCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no certificate found (inconclusive): {}", self.reason)
    }
}

const BRANCH_VALUES: [(i64, i64); 7] = [(0, 1), (1, 1), (-1, 1), (1, 2), (-1, 2), (2, 1), (-2, 1)];
const GRID: [(i64, i64); 9] = [
    (0, 1),
    (1, 1),
    (-1, 1),
    (1, 2),
    (-1, 2),
    (2, 1),
    (-2, 1),
    (4, 1),
    (-4, 1),
];

#[derive(Clone)]
struct Branch {
    eqs: Vec<(Symbol, ParamRat)>,
    side: Vec<ParamRat>,
    odd: Vec<ParamRat>,
    even: Vec<ParamRat>,
}

impl Branch {
    fn bind(&mut self, s: &Symbol, v: ParamRat) -> Result<(), String> {
        let mut b = BTreeMap::new();
        b.insert(s.clone(), v.clone());
        let sub = |c: &ParamRat| {
            c.substitute(&b)
                .map_err(|_| format!("setting {} vanishes a denominator", s.name()))
        };
        for (_, e) in self.eqs.iter_mut() {
            *e = sub(e)?;
        }
        for c in self.side.iter_mut() {
            *c = sub(c)?;
            if c.is_zero() {
                return Err(format!(
                    "setting {} violates a nonvanishing condition",
                    s.name()
                ));
            }
        }
        for c in self.odd.iter_mut() {
            *c = sub(c)?;
        }
        for c in self.even.iter_mut() {
            *c = sub(c)?;
            if c.constant_value().map(|q| q.is_negative()).unwrap_or(false) {
                return Err(format!("even coefficient becomes negative ({c})"));
            }
        }
        self.eqs.push((s.clone(), v));
        Ok(())
    }

    fn occurrences(&self, s: &Symbol) -> usize {
        self.odd
            .iter()
            .chain(&self.even)
            .filter(|c| c.contains(s))
            .count()
    }
}

struct Solver<'a> {
    decision: &'a [Symbol],
    position: BTreeMap<Symbol, usize>,
    opts: &'a SolveOptions,
    branches: usize,
    reason: String,
}

impl Solver<'_> {
    fn run(&mut self, mut br: Branch, start: usize) -> Option<SolutionSet> {
        let mut i = start;
        while i < br.odd.len() {
            let c = br.odd[i].clone();
            if c.is_zero() {
                i += 1;
                continue;
            }
            if c.is_constant() {
                self.reason = format!("odd coefficient is the nonzero constant {c}");
                return None;
            }
            let num = c.numer().clone();
            let params: Vec<Symbol> = self
                .decision
                .iter()
                .filter(|s| num.contains(s))
                .cloned()
                .collect();
            if params.is_empty() {
                self.reason = format!("odd coefficient {c} involves no decision parameter");
                return None;
            }
            let mut cands = Vec::new();
            for p in &params {
                if num.degree_in(p) != 1 {
                    continue;
                }
                let cs = num.coeffs_in(p);
                let (rest, cof) = (cs[0].clone(), cs[1].clone());
                let key = (
                    p.role() != Role::WParam,
                    !cof.is_constant(),
                    cof.num_terms(),
                    std::cmp::Reverse(br.occurrences(p)),
                    self.position[p],
                );
                cands.push((key, p.clone(), rest, cof));
            }
            cands.sort_by_key(|c| c.0);
            let mut solved = false;
            for (_, p, rest, cof) in cands {
                let val = match ParamRat::new(-&rest, cof.clone()) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let mut nb = br.clone();
                if !cof.is_constant() {
                    nb.side.push(ParamRat::from_poly(cof));
                }
                match nb.bind(&p, val) {
                    Ok(()) => {
                        br = nb;
                        solved = true;
                        break;
                    }
                    Err(e) => self.reason = e,
                }
            }
            if solved {
                i += 1;
                continue;
            }
            // Not affine in any parameter: branch on small values.
            let mut pairs = Vec::new();
            for p in &params {
                for (n, d) in BRANCH_VALUES {
                    let v = ParamRat::constant(Q::new(n.into(), d.into()));
                    let mut b = BTreeMap::new();
                    b.insert(p.clone(), v.clone());
                    let kills = ParamRat::from_poly(num.clone())
                        .substitute(&b)
                        .map(|r| r.is_zero())
                        .unwrap_or(false);
                    pairs.push((!kills, p.clone(), v));
                }
            }
            pairs.sort_by_key(|t| t.0);
            for (_, p, v) in pairs {
                if self.branches >= self.opts.branch_limit {
                    self.reason = format!("branch limit {} reached", self.opts.branch_limit);
                    return None;
                }
                self.branches += 1;
                let mut nb = br.clone();
                if let Err(e) = nb.bind(&p, v) {
                    self.reason = e;
                    continue;
                }
                if let Some(s) = self.run(nb, i) {
                    return Some(s);
                }
            }
            return None;
        }
        self.finish(br)
    }

    fn finish(&mut self, br: Branch) -> Option<SolutionSet> {
        let mut constraints = Vec::new();
        for c in &br.even {
            if c.is_zero() {
                continue;
            }
            let relation = if self.opts.strict && !c.is_constant() {
                Relation::Positive
            } else {
                Relation::NonNegative
            };
            constraints.push(Constraint {
                expr: c.clone(),
                relation,
            });
        }
        let mut nonzero: Vec<ParamPoly> = Vec::new();
        // Known factors are divided out so each listed polynomial is new.
        let mut push_nz = |p: &ParamPoly| {
            let mut rest = p.clone();
            for s in p.symbols() {
                let x = ParamPoly::symbol(s);
                let mut hit = false;
                while let Some(q) = rest.exact_div(&x).filter(|_| !rest.is_constant()) {
                    rest = q;
                    hit = true;
                }
                if hit && !nonzero.contains(&x) {
                    nonzero.push(x);
                }
            }
            for f in nonzero.clone() {
                while let Some(q) = rest.exact_div(&f).filter(|_| !rest.is_constant()) {
                    rest = q;
                }
            }
            if rest.is_constant() {
                return;
            }
            let m = rest.monic();
            if !nonzero.contains(&m) {
                nonzero.push(m);
            }
        };
        for c in &br.side {
            push_nz(c.numer());
            push_nz(c.denom());
        }
        for (_, v) in &br.eqs {
            push_nz(v.denom());
        }
        for c in br.odd.iter().chain(&br.even) {
            push_nz(c.denom());
        }
        for p in nonzero {
            constraints.push(Constraint {
                expr: ParamRat::from_poly(p),
                relation: Relation::NonZero,
            });
        }
        let solved: BTreeSet<&Symbol> = br.eqs.iter().map(|(s, _)| s).collect();
        let free: Vec<Symbol> = self
            .decision
            .iter()
            .filter(|s| !solved.contains(s))
            .cloned()
            .collect();
        let mut sol = SolutionSet {
            equalities: br.eqs.clone(),
            constraints,
            free,
            witness: None,
        };
        let foreign = sol
            .constraints
            .iter()
            .flat_map(|c| c.expr.symbols())
            .chain(sol.equalities.iter().flat_map(|(_, v)| v.symbols()))
            .any(|s| !self.position.contains_key(&s));
        if foreign {
            return Some(sol);
        }
        match find_witness(&sol, self.decision, self.opts) {
            Some(w) => {
                sol.witness = Some(w);
                Some(sol)
            }
            None => {
                self.reason = "no parameter values satisfying the constraints were found".into();
                None
            }
        }
    }
}

/// Sequential elimination over the odd coefficients, then witness search.
pub fn solve(
    f: &FormalFactorization,
    cls: &ParityClassification,
    decision: &[Symbol],
    opts: &SolveOptions,
) -> Result<SolutionSet, NoCertificate> {
    let _ = f;
    let position = decision
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let mut solver = Solver {
        decision,
        position,
        opts,
        branches: 0,
        reason: String::new(),
    };
    let br = Branch {
        eqs: Vec::new(),
        side: Vec::new(),
        odd: cls.odd.iter().map(|c| c.coefficient.clone()).collect(),
        even: cls.even.iter().map(|c| c.coefficient.clone()).collect(),
    };
    if let Some(c) = br
        .even
        .iter()
        .find(|c| c.constant_value().map(|q| q.is_negative()).unwrap_or(false))
    {
        return Err(NoCertificate {
            reason: format!("even coefficient {c} is negative"),
            branches: 0,
        });
    }
    match solver.run(br, 0) {
        Some(s) => Ok(s),
        None => Err(NoCertificate {
            reason: solver.reason,
            branches: solver.branches,
        }),
    }
}

fn grid_values(s: &Symbol, hints: &BTreeMap<Symbol, Q>) -> Vec<Q> {
    let mut out: Vec<Q> = hints.get(s).cloned().into_iter().collect();
    for (n, d) in GRID {
        let v = Q::new(n.into(), d.into());
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn find_witness(
    sol: &SolutionSet,
    decision: &[Symbol],
    opts: &SolveOptions,
) -> Option<BTreeMap<Symbol, Q>> {
    let used: BTreeSet<Symbol> = sol
        .constraints
        .iter()
        .flat_map(|c| c.expr.symbols())
        .collect();
    let vars: Vec<Symbol> = sol
        .free
        .iter()
        .filter(|s| used.contains(s))
        .cloned()
        .collect();
    let level = |c: &Constraint| -> usize {
        c.expr
            .symbols()
            .iter()
            .filter_map(|s| vars.iter().position(|v| v == s))
            .map(|p| p + 1)
            .max()
            .unwrap_or(0)
    };
    // checks[k]: constraints decidable once the first k variables are set.
    let mut checks: Vec<Vec<&Constraint>> = vec![Vec::new(); vars.len() + 1];
    for c in &sol.constraints {
        checks[level(c)].push(c);
    }
    let grids: Vec<Vec<Q>> = vars.iter().map(|s| grid_values(s, &opts.hints)).collect();

    let complete = |assign: BTreeMap<Symbol, Q>| -> Option<BTreeMap<Symbol, Q>> {
        let mut w = assign;
        for s in &sol.free {
            w.entry(s.clone()).or_insert_with(Q::zero);
        }
        for (s, v) in &sol.equalities {
            let val = v.eval(&w).ok()?;
            w.insert(s.clone(), val);
        }
        for s in decision {
            w.entry(s.clone()).or_insert_with(Q::zero);
        }
        Some(w)
    };

    for strict in [true, false] {
        let ok = |c: &Constraint, a: &BTreeMap<Symbol, Q>| {
            let c2;
            let c = if strict && c.relation == Relation::NonNegative && !c.expr.is_constant() {
                c2 = Constraint {
                    expr: c.expr.clone(),
                    relation: Relation::Positive,
                };
                &c2
            } else {
                c
            };
            c.holds_at(a)
        };
        if !checks[0].iter().all(|c| ok(c, &BTreeMap::new())) {
            return None;
        }
        let mut nodes = 0usize;
        let mut assign = BTreeMap::new();
        if dfs(
            0,
            &vars,
            &grids,
            &checks,
            &ok,
            &mut assign,
            &mut nodes,
            opts.node_limit,
        ) {
            if let Some(w) = complete(assign) {
                return Some(w);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..200 {
        let mut a = BTreeMap::new();
        for s in &vars {
            let d: i64 = [1, 2, 4, 8][rng.gen_range(0..4)];
            let n: i64 = rng.gen_range(-8 * d..=8 * d);
            a.insert(s.clone(), Q::new(n.into(), d.into()));
        }
        if sol.constraints.iter().all(|c| c.holds_at(&a)) {
            if let Some(w) = complete(a) {
                return Some(w);
            }
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    k: usize,
    vars: &[Symbol],
    grids: &[Vec<Q>],
    checks: &[Vec<&Constraint>],
    ok: &dyn Fn(&Constraint, &BTreeMap<Symbol, Q>) -> bool,
    assign: &mut BTreeMap<Symbol, Q>,
    nodes: &mut usize,
    limit: usize,
) -> bool {
    if k == vars.len() {
        return true;
    }
    for v in &grids[k] {
        *nodes += 1;
        if *nodes > limit {
            return false;
        }
        assign.insert(vars[k].clone(), v.clone());
        if checks[k + 1].iter().all(|c| ok(c, assign))
            && dfs(k + 1, vars, grids, checks, ok, assign, nodes, limit)
        {
            return true;
        }
    }
    assign.remove(&vars[k]);
    false
}

/// Weighted products of even powers of linear forms.
#[derive(Clone, Debug, PartialEq)]
pub struct SumOfSquares {
    pub nvars: usize,
    pub terms: Vec<FactorTerm>,
}

impl SumOfSquares {
    pub fn expand(&self) -> Polynomial {
        let mut p = Polynomial::zero();
        for t in &self.terms {
            p = &p + &t.expand();
        }
        p
    }

    pub fn instantiate(&self, values: &BTreeMap<Symbol, Q>) -> Result<SumOfSquares, PolyError> {
        let b: BTreeMap<Symbol, ParamRat> = values
            .iter()
            .map(|(s, v)| (s.clone(), ParamRat::constant(v.clone())))
            .collect();
        let mut terms = Vec::new();
        for t in &self.terms {
            let t = t.substitute_params(&b)?;
            if !t.coefficient.is_zero() {
                terms.push(t);
            }
        }
        Ok(SumOfSquares {
            nvars: self.nvars,
            terms,
        })
    }

    /// Whether the squares vanish only at the origin under `values`.
    ///
    /// Sufficient test: the forms appearing alone in a positively weighted
    /// square span the whole space. `None` if something stays symbolic.
    pub fn is_positive_definite(&self, values: &BTreeMap<Symbol, Q>) -> Option<bool> {
        let inst = self.instantiate(values).ok()?;
        let mut rows: Vec<Vec<Q>> = Vec::new();
        for t in &inst.terms {
            let c = t.coefficient.constant_value()?;
            if !c.is_positive() {
                continue;
            }
            let form = match (t.x1_power, t.forms.as_slice()) {
                (0, [(l, _)]) => l.clone(),
                (e, []) if e > 0 => LinearForm::bare(0),
                _ => continue,
            };
            let mut row = vec![Q::zero(); self.nvars];
            row[form.lead() as usize] = Q::one();
            for (r, c) in form.coeffs().iter().enumerate() {
                row[r] = c.constant_value()?;
            }
            rows.push(row);
        }
        Some(rank(rows) == self.nvars)
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> SosDisplay<'a> {
        SosDisplay { sos: self, names }
    }
}

pub struct SosDisplay<'a> {
    sos: &'a SumOfSquares,
    names: &'a [String],
}

impl fmt::Display for SosDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sos.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.sos.terms.iter().enumerate() {
            crate::polyring::fmt_coefficient_prefix(f, i, &t.coefficient)?;
            t.fmt_product(f, self.names)?;
        }
        Ok(())
    }
}

fn rank(mut rows: Vec<Vec<Q>>) -> usize {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut r = 0;
    for col in 0..ncols {
        let Some(piv) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, piv);
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let factor = &rows[i][col] / &rows[r][col];
                let pivot = rows[r].clone();
                for (x, p) in rows[i].iter_mut().zip(&pivot).skip(col) {
                    *x -= &factor * p;
                }
            }
        }
        r += 1;
    }
    r
}

/// Applies the equalities and keeps the even-exponent terms.
pub fn extract_sos(
    f: &FormalFactorization,
    s: &SolutionSet,
) -> Result<SumOfSquares, PositivityError> {
    let g = f.substitute_params(&s.bindings())?;
    let mut terms = Vec::new();
    for (i, (slot, c, odd)) in g.coefficients().into_iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        if odd {
            return Err(PositivityError::SurvivingOddTerm(i + 1));
        }
        match slot {
            CoefficientSlot::Factor(k) => terms.push(g.factors[k].clone()),
            CoefficientSlot::Remainder(e) => terms.push(FactorTerm {
                coefficient: c,
                x1_power: e,
                forms: Vec::new(),
            }),
        }
    }
    Ok(SumOfSquares {
        nvars: f.nvars,
        terms,
    })
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub factorization: FormalFactorization,
    pub classification: ParityClassification,
    pub solution: SolutionSet,
    pub sos: SumOfSquares,
    /// Decided under the witness; `None` without one.
    pub positive_definite: Option<bool>,
}

#[derive(Clone, Debug)]
pub enum PosOutcome {
    Certified(Box<Certificate>),
    NoCertificate(NoCertificate),
}

impl PosOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            PosOutcome::Certified(c) => Some(c),
            PosOutcome::NoCertificate(_) => None,
        }
    }
}

/// Factorizes, classifies, solves and extracts a certificate.
///
/// Decision parameters are the minted ones followed by `extra_decision`.
pub fn pos_check(
    p: &Polynomial,
    nvars: usize,
    extra_decision: &[Symbol],
    opts: &SolveOptions,
) -> Result<PosOutcome, PositivityError> {
    let f = formal_lf(p, nvars)?;
    let cls = classify(&f);
    let mut decision = f.params.clone();
    decision.extend(extra_decision.iter().cloned());
    let solution = match solve(&f, &cls, &decision, opts) {
        Ok(s) => s,
        Err(e) => return Ok(PosOutcome::NoCertificate(e)),
    };
    let sos = extract_sos(&f, &solution)?;
    let positive_definite = solution
        .witness
        .as_ref()
        .and_then(|w| sos.is_positive_definite(w));
    Ok(PosOutcome::Certified(Box::new(Certificate {
        factorization: f,
        classification: cls,
        solution,
        sos,
        positive_definite,
    })))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessReport {
    pub samples: usize,
    pub min_value: f64,
    /// First sampled point with a value below `-1e-9`.
    pub violation: Option<(Vec<f64>, f64)>,
    pub expansion_matches: bool,
    /// 1-based index of an even coefficient that is negative under the witness.
    pub negative_coefficient: Option<usize>,
}

impl WitnessReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none() && self.expansion_matches && self.negative_coefficient.is_none()
    }
}

/// Numeric and exact re-check of a certificate under its witness.
///
/// Samples states uniformly from `[-10, 10]^n` on a grid of spacing 1/1000
/// and evaluates exactly.
pub fn verify_witness(
    p: &Polynomial,
    f: &FormalFactorization,
    s: &SolutionSet,
    samples: usize,
    seed: u64,
) -> Result<WitnessReport, PositivityError> {
    let wb = s.witness_bindings().ok_or(PositivityError::NoWitness)?;
    let pw = p.substitute_params(&wb)?;
    let inst = f.substitute_params(&wb)?;
    let mut sos = Polynomial::zero();
    let mut negative_coefficient = None;
    for (i, (slot, c, odd)) in inst.coefficients().into_iter().enumerate() {
        if odd {
            continue;
        }
        if c.constant_value().map(|q| q.is_negative()).unwrap_or(true)
            && negative_coefficient.is_none()
        {
            negative_coefficient = Some(i + 1);
        }
        let term = match slot {
            CoefficientSlot::Factor(k) => inst.factors[k].expand(),
            CoefficientSlot::Remainder(e) => Polynomial::term(StateMonomial::pow_of(0, e), c),
        };
        sos = &sos + &term;
    }
    let expansion_matches = (&sos - &pw).is_zero();
    let terms = pw
        .numeric_terms()
        .ok_or_else(|| PositivityError::Poly(PolyError::NotNumeric(pw.to_string())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut violation = None;
    let empty = BTreeMap::new();
    let numeric = Polynomial::from_numeric_terms(terms);
    for _ in 0..samples {
        let pt: Vec<Q> = (0..f.nvars)
            .map(|_| Q::new(rng.gen_range(-10_000i64..=10_000).into(), 1000.into()))
            .collect();
        let v = q_to_f64(&numeric.eval_exact(&pt, &empty)?);
        min_value = min_value.min(v);
        if v < -1e-9 && violation.is_none() {
            violation = Some((pt.iter().map(q_to_f64).collect(), v));
        }
    }
    if samples == 0 {
        min_value = 0.0;
    }
    Ok(WitnessReport {
        samples,
        min_value,
        violation,
        expansion_matches,
        negative_coefficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyring::{q, Var};

    fn x(i: Var) -> Polynomial {
        Polynomial::var(i)
    }

    fn k(n: i64) -> Polynomial {
        Polynomial::constant(ParamRat::integer(n))
    }

    fn w(s: u32, r: u32, k: u32) -> Symbol {
        Symbol::w_param(s, r, k)
    }

    fn example_24() -> Polynomial {
        let (a, b, c) = (x(0), x(1), x(2));
        &(&(&(&a.pow(2) - &(&k(2) * &(&a * &b))) + &(&k(6) * &b.pow(2))) - &(&k(4) * &(&b * &c)))
            + &(&k(3) * &c.pow(2))
    }

    fn certify(p: &Polynomial, n: usize) -> Option<Certificate> {
        match pos_check(p, n, &[], &SolveOptions::default()).unwrap() {
            PosOutcome::Certified(c) => Some(*c),
            PosOutcome::NoCertificate(_) => None,
        }
    }

    #[test]
    fn three_variable_quadratic() {
        let p = example_24();
        let c = certify(&p, 3).unwrap();
        let eqs = &c.solution.equalities;
        assert_eq!(eqs[0], (w(3, 2, 1), ParamRat::constant(q(-2, 3))));
        assert_eq!(eqs[1], (w(3, 1, 1), ParamRat::zero()));
        assert_eq!(eqs[2], (w(2, 1, 4), ParamRat::constant(q(-3, 14))));
        assert_eq!(eqs.len(), 3);
        let names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            c.sos.display(&names).to_string(),
            "3*(z - 2/3*y)^2 + 14/3*(y - 3/14*x)^2 + 11/14*x^2"
        );
        assert_eq!(c.sos.expand(), p);
        assert_eq!(c.positive_definite, Some(true));
        let consts: Vec<Q> = c
            .solution
            .constraints
            .iter()
            .map(|c| c.expr.constant_value().unwrap())
            .collect();
        assert_eq!(consts, vec![q(3, 1), q(14, 3), q(11, 14)]);
        let rep = verify_witness(&p, &c.factorization, &c.solution, 1000, 1).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn corrupted_witness_is_caught() {
        let p = example_24();
        let c = certify(&p, 3).unwrap();
        let mut bad = c.solution.clone();
        bad.witness.as_mut().unwrap().insert(w(2, 1, 4), q(3, 14));
        let rep = verify_witness(&p, &c.factorization, &bad, 100, 1).unwrap();
        assert!(!rep.expansion_matches);
        assert!(!rep.passed());
    }

    #[test]
    fn classification_parity() {
        let f = formal_lf(&example_24(), 3).unwrap();
        let cls = classify(&f);
        assert_eq!(
            cls.odd.len() + cls.even.len(),
            f.factors.len() + f.remainder.num_terms()
        );
        assert_eq!(cls.even[0].coefficient, ParamRat::integer(3));
        let odd0 =
            &(&ParamRat::integer(-6) * &ParamRat::symbol(w(3, 2, 1))) - &ParamRat::integer(4);
        assert_eq!(cls.odd[0].coefficient, odd0);

        let g = formal_lf(&(&k(3) * &x(0).pow(4)), 1).unwrap();
        let cls = classify(&g);
        assert!(cls.odd.is_empty());
        assert_eq!(cls.even.len(), 1);
        let h = formal_lf(&(&x(0).pow(3) + &x(0).pow(4)), 1).unwrap();
        let cls = classify(&h);
        assert_eq!(cls.odd.len(), 1);
        assert_eq!(cls.even.len(), 1);
    }

    #[test]
    fn univariate_power() {
        let p = &k(3) * &x(0).pow(4);
        let c = certify(&p, 1).unwrap();
        assert!(c.solution.equalities.is_empty());
        assert_eq!(c.solution.witness, Some(BTreeMap::new()));
        assert_eq!(c.sos.display(&["x1".to_string()]).to_string(), "3*x1^4");
    }

    #[test]
    fn perfect_square() {
        let p = (&x(0) + &x(1)).pow(2);
        let c = certify(&p, 2).unwrap();
        assert_eq!(c.solution.equalities, vec![(w(2, 1, 1), ParamRat::one())]);
        let wit = c.solution.witness.as_ref().unwrap();
        assert_eq!(wit[&w(2, 1, 2)], Q::zero());
        let names = vec!["x1".to_string(), "x2".to_string()];
        assert_eq!(c.sos.display(&names).to_string(), "(x2 + x1)^2");
        assert_eq!(c.positive_definite, Some(false));
    }

    #[test]
    fn sum_of_two_squares() {
        let p = &x(0).pow(2) + &x(1).pow(2);
        let c = certify(&p, 2).unwrap();
        assert_eq!(c.solution.equalities[0], (w(2, 1, 1), ParamRat::zero()));
        let names = vec!["x1".to_string(), "x2".to_string()];
        assert_eq!(c.sos.display(&names).to_string(), "x2^2 + x1^2");
        assert_eq!(c.positive_definite, Some(true));
    }

    #[test]
    fn negative_controls() {
        assert!(certify(&(-&x(0).pow(2)), 1).is_none());
        assert!(certify(&(&x(0) * &x(1)), 2).is_none());
    }

    #[test]
    fn intervals_of_simple_constraints() {
        let b = Symbol::feedback_param("B1", vec![1, 2]);
        let bp = ParamRat::symbol(b.clone());
        // -(B1 - 5)/B1 > 0  <=>  0 < B1 < 5
        let e = (&ParamRat::integer(5) - &bp).checked_div(&bp).unwrap();
        let iv = univariate_intervals(&e, Relation::Positive, &b).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].to_string(), "(0, 5)");
        // B1^2 - 2 >= 0
        let e = &bp.pow(2) - &ParamRat::integer(2);
        let iv = univariate_intervals(&e, Relation::NonNegative, &b).unwrap();
        assert_eq!(iv.len(), 2);
        assert!((iv[1].lo.as_ref().unwrap().value - 2f64.sqrt()).abs() < 1e-12);
        assert!(iv[1].contains(2.0) && !iv[0].contains(0.0));
    }
}
