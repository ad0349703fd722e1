use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::monomial::Monomial;
use super::symbol::Symbol;
use super::Q;

pub type ParamMonomial = Monomial<Symbol>;

/// Polynomial over the rationals in parameter symbols.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ParamPoly {
    terms: BTreeMap<ParamMonomial, Q>,
}

impl ParamPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        let mut p = Self::zero();
        p.add_term(ParamMonomial::one(), c);
        p
    }

    pub fn integer(n: i64) -> Self {
        Self::constant(Q::from_integer(BigInt::from(n)))
    }

    pub fn symbol(s: Symbol) -> Self {
        Self::monomial(ParamMonomial::var(s), Q::one())
    }

    pub fn monomial(m: ParamMonomial, c: Q) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn add_term(&mut self, m: ParamMonomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .is_some_and(|(m, c)| m.is_one() && c.is_one())
    }

    /// The value if the polynomial has no symbols.
    pub fn constant_value(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&ParamMonomial, &Q)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Leading term under the monomial order.
    pub fn leading(&self) -> Option<(&ParamMonomial, &Q)> {
        self.terms.iter().next_back()
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.terms.keys().flat_map(|m| m.vars().cloned()).collect()
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.terms.keys().any(|m| m.contains(s))
    }

    pub fn degree_in(&self, s: &Symbol) -> u32 {
        self.terms.keys().map(|m| m.exponent(s)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        ParamPoly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, mono: &ParamMonomial, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        ParamPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.mul(mono), k * c))
                .collect(),
        }
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

    /// Coefficients as a univariate polynomial in `s`, indexed by power.
    pub fn coeffs_in(&self, s: &Symbol) -> Vec<ParamPoly> {
        let mut out = vec![ParamPoly::zero(); self.degree_in(s) as usize + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split(s);
            out[e as usize].add_term(rest, c.clone());
        }
        out
    }

    pub fn from_coeffs_in(s: &Symbol, coeffs: &[ParamPoly]) -> Self {
        let mut out = ParamPoly::zero();
        for (e, c) in coeffs.iter().enumerate() {
            let shift = ParamMonomial::pow_of(s.clone(), e as u32);
            for (m, k) in &c.terms {
                out.add_term(m.mul(&shift), k.clone());
            }
        }
        out
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn exact_div(&self, d: &ParamPoly) -> Option<ParamPoly> {
        let (dm, dc) = d.leading()?;
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        let mut rem = self.clone();
        let mut quot = ParamPoly::zero();
        while let Some((lm, lc)) = rem.leading() {
            let m = lm.div(dm)?;
            let c = lc / dc;
            rem = &rem - &d.mul_monomial(&m, &c);
            quot.add_term(m, c);
        }
        Some(quot)
    }

    /// Scales so the leading coefficient is 1.
    pub fn monic(&self) -> ParamPoly {
        match self.leading() {
            None => ParamPoly::zero(),
            Some((_, c)) if c.is_one() => self.clone(),
            Some((_, c)) => self.scale(&c.recip()),
        }
    }

    /// Positive rational `r` such that `self * r` has coprime integer
    /// coefficients.
    pub fn integer_normalizer(&self) -> Q {
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        if num_gcd.is_zero() {
            return Q::one();
        }
        Q::new(den_lcm, num_gcd.abs())
    }

    pub fn eval(&self, point: &BTreeMap<Symbol, Q>) -> Result<Q, BTreeSet<Symbol>> {
        let mut missing = BTreeSet::new();
        let mut acc = Q::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (s, e) in m.pairs() {
                match point.get(s) {
                    Some(v) => t *= num_traits::pow(v.clone(), *e as usize),
                    None => {
                        missing.insert(s.clone());
                    }
                }
            }
            acc += t;
        }
        if missing.is_empty() {
            Ok(acc)
        } else {
            Err(missing)
        }
    }

    pub fn eval_f64(&self, point: &BTreeMap<Symbol, f64>) -> Result<f64, BTreeSet<Symbol>> {
        let mut missing = BTreeSet::new();
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = super::q_to_f64(c);
            for (s, e) in m.pairs() {
                match point.get(s) {
                    Some(v) => t *= v.powi(*e as i32),
                    None => {
                        missing.insert(s.clone());
                    }
                }
            }
            acc += t;
        }
        if missing.is_empty() {
            Ok(acc)
        } else {
            Err(missing)
        }
    }
}

/// Greatest common divisor, normalized to leading coefficient 1.
///
/// Recursive primitive remainder sequence on the largest symbol, with
/// contents taken over the remaining symbols.
pub fn gcd(a: &ParamPoly, b: &ParamPoly) -> ParamPoly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return ParamPoly::one();
    }
    if a.num_terms() == 1 || b.num_terms() == 1 {
        let (single, other) = if a.num_terms() == 1 { (a, b) } else { (b, a) };
        let mut g = single.leading().unwrap().0.clone();
        for m in other.terms.keys() {
            g = g.gcd(m);
            if g.is_one() {
                break;
            }
        }
        return ParamPoly::monomial(g, Q::one());
    }
    let top = {
        let sa = a.leading_symbol_max();
        let sb = b.leading_symbol_max();
        sa.max(sb).unwrap()
    };
    match (a.contains(&top), b.contains(&top)) {
        (true, false) => gcd(&content_in(a, &top), b),
        (false, true) => gcd(a, &content_in(b, &top)),
        _ => {
            let ua = a.coeffs_in(&top);
            let ub = b.coeffs_in(&top);
            let ca = list_gcd(&ua);
            let cb = list_gcd(&ub);
            let c = gcd(&ca, &cb);
            let mut pa = divide_all(&ua, &ca);
            let mut pb = divide_all(&ub, &cb);
            if pa.len() < pb.len() {
                std::mem::swap(&mut pa, &mut pb);
            }
            loop {
                let r = prem(&pa, &pb);
                if r.is_empty() {
                    break;
                }
                if r.len() == 1 {
                    pb = vec![ParamPoly::one()];
                    break;
                }
                let cr = list_gcd(&r);
                pa = pb;
                pb = integer_primitive(divide_all(&r, &cr));
            }
            let cp = list_gcd(&pb);
            let g = ParamPoly::from_coeffs_in(&top, &divide_all(&pb, &cp));
            (&c * &g).monic()
        }
    }
}

impl ParamPoly {
    fn leading_symbol_max(&self) -> Option<Symbol> {
        self.terms
            .keys()
            .filter_map(|m| m.top().map(|(s, _)| s.clone()))
            .max()
    }
}

fn content_in(p: &ParamPoly, s: &Symbol) -> ParamPoly {
    list_gcd(&p.coeffs_in(s))
}

fn list_gcd(items: &[ParamPoly]) -> ParamPoly {
    let mut g = ParamPoly::zero();
    for it in items {
        if it.is_zero() {
            continue;
        }
        g = gcd(&g, it);
        if g.is_one() {
            break;
        }
    }
    g
}

fn divide_all(items: &[ParamPoly], d: &ParamPoly) -> Vec<ParamPoly> {
    if d.is_zero() || d.is_one() {
        return items.to_vec();
    }
    items
        .iter()
        .map(|c| c.exact_div(d).expect("content divides every coefficient"))
        .collect()
}

/// Scales to coprime integer coefficients so remainder sequences stay small.
fn integer_primitive(v: Vec<ParamPoly>) -> Vec<ParamPoly> {
    let k = all_normalizer(&v);
    if k.is_one() {
        return v;
    }
    v.iter().map(|c| c.scale(&k)).collect()
}

fn all_normalizer(v: &[ParamPoly]) -> Q {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for c in v {
        for q in c.terms.values() {
            num = num.gcd(q.numer());
            den = den.lcm(q.denom());
        }
    }
    if num.is_zero() {
        return Q::one();
    }
    Q::new(den, num.abs())
}

fn trim(v: &mut Vec<ParamPoly>) {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
}

/// Pseudo-remainder of univariate polynomials with polynomial coefficients.
fn prem(a: &[ParamPoly], b: &[ParamPoly]) -> Vec<ParamPoly> {
    let db = b.len() - 1;
    let lb = &b[db];
    let mut r = a.to_vec();
    trim(&mut r);
    while r.len() > db {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - db;
        let mut next: Vec<ParamPoly> = r.iter().map(|c| c * lb).collect();
        for (i, bc) in b.iter().enumerate() {
            next[i + shift] = &next[i + shift] - &(bc * &lr);
        }
        debug_assert!(next[dr].is_zero());
        r = next;
        trim(&mut r);
    }
    r
}

impl Add for &ParamPoly {
    type Output = ParamPoly;
    fn add(self, rhs: &ParamPoly) -> ParamPoly {
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

impl Sub for &ParamPoly {
    type Output = ParamPoly;
    fn sub(self, rhs: &ParamPoly) -> ParamPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Neg for &ParamPoly {
    type Output = ParamPoly;
    fn neg(self) -> ParamPoly {
        ParamPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &ParamPoly {
    type Output = ParamPoly;
    fn mul(self, rhs: &ParamPoly) -> ParamPoly {
        if self.is_zero() || rhs.is_zero() {
            return ParamPoly::zero();
        }
        if let Some(c) = self.constant_value() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.constant_value() {
            return self.scale(&c);
        }
        let mut out = ParamPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

pub(crate) fn fmt_monomial(f: &mut fmt::Formatter<'_>, m: &ParamMonomial) -> fmt::Result {
    for (i, (s, e)) in m.pairs().iter().enumerate() {
        if i > 0 {
            f.write_str("*")?;
        }
        if *e == 1 {
            write!(f, "{s}")?;
        } else {
            write!(f, "{s}^{e}")?;
        }
    }
    Ok(())
}

/// Writes `c*m` with the sign of `c` folded into the caller's joiner.
pub(crate) fn fmt_scaled_monomial(
    f: &mut fmt::Formatter<'_>,
    c_abs: &Q,
    m: &ParamMonomial,
) -> fmt::Result {
    if m.is_one() {
        write!(f, "{c_abs}")
    } else if c_abs.is_one() {
        fmt_monomial(f, m)
    } else {
        write!(f, "{c_abs}*")?;
        fmt_monomial(f, m)
    }
}

impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            match (i, c.is_negative()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            fmt_scaled_monomial(f, &c.abs(), m)?;
        }
        Ok(())
    }
}

impl fmt::Debug for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
