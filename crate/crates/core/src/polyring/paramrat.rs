use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use super::parampoly::{gcd, ParamPoly};
use super::symbol::Symbol;
use super::{PolyError, Q};

/// Rational function in the parameters.
///
/// Kept in canonical form: numerator and denominator coprime, denominator
/// with leading coefficient 1, zero stored as `0/1`. Structural equality is
/// therefore mathematical equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ParamRat {
    num: ParamPoly,
    den: ParamPoly,
}

impl Default for ParamRat {
    fn default() -> Self {
        ParamRat::zero()
    }
}

impl ParamRat {
    pub fn zero() -> Self {
        ParamRat {
            num: ParamPoly::zero(),
            den: ParamPoly::one(),
        }
    }

    pub fn one() -> Self {
        Self::from_poly(ParamPoly::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::from_poly(ParamPoly::constant(c))
    }

    pub fn integer(n: i64) -> Self {
        Self::from_poly(ParamPoly::integer(n))
    }

    pub fn symbol(s: Symbol) -> Self {
        Self::from_poly(ParamPoly::symbol(s))
    }

    pub fn from_poly(num: ParamPoly) -> Self {
        ParamRat {
            num,
            den: ParamPoly::one(),
        }
    }

    /// `num / den`; fails if `den` is the zero polynomial.
    pub fn new(num: ParamPoly, den: ParamPoly) -> Result<Self, PolyError> {
        if den.is_zero() {
            return Err(PolyError::ZeroDenominator);
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(num: ParamPoly, den: ParamPoly) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        if let Some(c) = den.constant_value() {
            return Self::from_poly(num.scale(&c.recip()));
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (
                num.exact_div(&g).expect("gcd divides numerator"),
                den.exact_div(&g).expect("gcd divides denominator"),
            )
        };
        let lc = den.leading().map(|(_, c)| c.clone()).unwrap();
        if lc.is_one() {
            ParamRat { num, den }
        } else {
            let inv = lc.recip();
            ParamRat {
                num: num.scale(&inv),
                den: den.scale(&inv),
            }
        }
    }

    pub fn numer(&self) -> &ParamPoly {
        &self.num
    }

    pub fn denom(&self) -> &ParamPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn constant_value(&self) -> Option<Q> {
        if self.den.is_one() {
            self.num.constant_value()
        } else {
            None
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut s = self.num.symbols();
        s.extend(self.den.symbols());
        s
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.num.contains(s) || self.den.contains(s)
    }

    pub fn recip(&self) -> Option<ParamRat> {
        if self.is_zero() {
            None
        } else {
            Some(Self::normalized(self.den.clone(), self.num.clone()))
        }
    }

    pub fn checked_div(&self, rhs: &ParamRat) -> Result<ParamRat, PolyError> {
        let inv = rhs.recip().ok_or(PolyError::ZeroDenominator)?;
        Ok(self * &inv)
    }

    pub fn scale(&self, c: &Q) -> ParamRat {
        if c.is_zero() {
            return Self::zero();
        }
        ParamRat {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn pow(&self, k: u32) -> ParamRat {
        ParamRat {
            num: self.num.pow(k),
            den: self.den.pow(k),
        }
    }

    /// Simultaneous substitution of parameters by rational functions.
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, ParamRat>) -> Result<ParamRat, PolyError> {
        if bindings.is_empty() || !self.symbols().iter().any(|s| bindings.contains_key(s)) {
            return Ok(self.clone());
        }
        let n = substitute_poly(&self.num, bindings);
        let d = substitute_poly(&self.den, bindings);
        n.checked_div(&d)
    }

    pub fn eval(&self, point: &BTreeMap<Symbol, Q>) -> Result<Q, PolyError> {
        let n = self.num.eval(point).map_err(PolyError::Unbound)?;
        let d = self.den.eval(point).map_err(PolyError::Unbound)?;
        if d.is_zero() {
            return Err(PolyError::VanishingDenominator);
        }
        Ok(n / d)
    }

    pub fn eval_f64(&self, point: &BTreeMap<Symbol, f64>) -> Result<f64, PolyError> {
        let n = self.num.eval_f64(point).map_err(PolyError::Unbound)?;
        let d = self.den.eval_f64(point).map_err(PolyError::Unbound)?;
        if d == 0.0 {
            return Err(PolyError::VanishingDenominator);
        }
        Ok(n / d)
    }

    /// Number of terms in numerator and denominator, a rough size measure.
    pub fn size(&self) -> usize {
        self.num.num_terms()
            + if self.den.is_one() {
                0
            } else {
                self.den.num_terms()
            }
    }

    /// True when the displayed form needs parentheses as a factor.
    pub(crate) fn is_compound(&self) -> bool {
        !self.den.is_one() || self.num.num_terms() > 1
    }

    /// True when the value is a single term with a negative coefficient.
    pub(crate) fn is_negative_monomial(&self) -> bool {
        self.den.is_one()
            && self.num.num_terms() == 1
            && self.num.leading().is_some_and(|(_, c)| c.is_negative())
    }
}

/// Substitutes into a polynomial over a common denominator, then normalizes once.
fn substitute_poly(p: &ParamPoly, bindings: &BTreeMap<Symbol, ParamRat>) -> ParamRat {
    let mut max_pow: BTreeMap<&Symbol, u32> = BTreeMap::new();
    for (m, _) in p.terms() {
        for (s, e) in m.pairs() {
            if let Some(v) = bindings.get(s) {
                if !v.den.is_one() {
                    let slot = max_pow.entry(s).or_insert(0);
                    *slot = (*slot).max(*e);
                }
            }
        }
    }
    let mut num_pows: BTreeMap<(&Symbol, u32), ParamPoly> = BTreeMap::new();
    let mut den_pows: BTreeMap<(&Symbol, u32), ParamPoly> = BTreeMap::new();
    let mut acc = ParamPoly::zero();
    for (m, c) in p.terms() {
        let mut rest = Vec::new();
        let mut t = ParamPoly::constant(c.clone());
        for (s, e) in m.pairs() {
            match bindings.get(s) {
                Some(v) => {
                    let np = num_pows.entry((s, *e)).or_insert_with(|| v.num.pow(*e));
                    t = &t * np;
                }
                None => rest.push((s.clone(), *e)),
            }
        }
        for (s, mp) in &max_pow {
            let e = m.exponent(s);
            if *mp > e {
                let dp = den_pows
                    .entry((s, mp - e))
                    .or_insert_with(|| bindings[*s].den.pow(mp - e));
                t = &t * dp;
            }
        }
        let rest = super::parampoly::ParamMonomial::from_pairs(rest);
        acc = &acc + &t.mul_monomial(&rest, &Q::one());
    }
    let mut den = ParamPoly::one();
    for (s, mp) in max_pow {
        den = &den * &bindings[s].den.pow(mp);
    }
    ParamRat::normalized(acc, den)
}

impl From<ParamPoly> for ParamRat {
    fn from(p: ParamPoly) -> Self {
        ParamRat::from_poly(p)
    }
}

impl From<Q> for ParamRat {
    fn from(q: Q) -> Self {
        ParamRat::constant(q)
    }
}

impl Add for &ParamRat {
    type Output = ParamRat;
    fn add(self, rhs: &ParamRat) -> ParamRat {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return ParamRat::from_poly(&self.num + &rhs.num);
        }
        if self.den == rhs.den {
            return ParamRat::normalized(&self.num + &rhs.num, self.den.clone());
        }
        ParamRat::normalized(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Sub for &ParamRat {
    type Output = ParamRat;
    fn sub(self, rhs: &ParamRat) -> ParamRat {
        self + &(-rhs)
    }
}

impl Neg for &ParamRat {
    type Output = ParamRat;
    fn neg(self) -> ParamRat {
        ParamRat {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Mul for &ParamRat {
    type Output = ParamRat;
    fn mul(self, rhs: &ParamRat) -> ParamRat {
        if self.is_zero() || rhs.is_zero() {
            return ParamRat::zero();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return ParamRat::from_poly(&self.num * &rhs.num);
        }
        ParamRat::normalized(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Div for &ParamRat {
    type Output = ParamRat;
    /// Panics on division by the zero function; use [`ParamRat::checked_div`] otherwise.
    fn div(self, rhs: &ParamRat) -> ParamRat {
        self.checked_div(rhs).expect("division by zero ParamRat")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for ParamRat {
            type Output = ParamRat;
            fn $m(self, rhs: ParamRat) -> ParamRat {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for ParamRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        // Clear fractions so the output reads as integer polynomials.
        let r = {
            let mut l = num_bigint::BigInt::one();
            let mut g = num_bigint::BigInt::zero();
            for (_, c) in self.num.terms().chain(self.den.terms()) {
                l = num_integer::Integer::lcm(&l, c.denom());
                g = num_integer::Integer::gcd(&g, c.numer());
            }
            Q::new(l, g)
        };
        let n = self.num.scale(&r);
        let d = self.den.scale(&r);
        if n.num_terms() > 1 {
            write!(f, "({n})")?;
        } else {
            write!(f, "{n}")?;
        }
        let bare = d.num_terms() == 1
            && d.leading()
                .is_some_and(|(m, c)| c.is_one() && m.pairs().len() <= 1);
        if bare {
            write!(f, "/{d}")
        } else {
            write!(f, "/({d})")
        }
    }
}

impl fmt::Debug for ParamRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
