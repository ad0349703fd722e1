use std::cmp::Ordering;

/// Sparse power product over an ordered variable type.
///
/// Exponents are stored sorted by variable and are strictly positive; the
/// empty product is the constant monomial.
///
/// The ordering is lexicographic with the *highest* variable most significant:
/// the monomial containing the larger top variable wins, ties on the top
/// variable are broken by its exponent, and equal top powers recurse on the
/// rest. The constant monomial is the unique minimum.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial<V> {
    exps: Vec<(V, u32)>,
}

impl<V> Default for Monomial<V> {
    fn default() -> Self {
        Monomial { exps: Vec::new() }
    }
}

impl<V: Ord + Clone> Monomial<V> {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(v: V) -> Self {
        Monomial { exps: vec![(v, 1)] }
    }

    pub fn pow_of(v: V, e: u32) -> Self {
        if e == 0 {
            Self::one()
        } else {
            Monomial { exps: vec![(v, e)] }
        }
    }

    /// Builds from arbitrary `(var, exp)` pairs, merging duplicates and dropping zeros.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (V, u32)>) -> Self {
        let mut exps: Vec<(V, u32)> = pairs.into_iter().filter(|(_, e)| *e > 0).collect();
        exps.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(V, u32)> = Vec::with_capacity(exps.len());
        for (v, e) in exps {
            match merged.last_mut() {
                Some((lv, le)) if *lv == v => *le += e,
                _ => merged.push((v, e)),
            }
        }
        Monomial { exps: merged }
    }

    pub fn is_one(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn pairs(&self) -> &[(V, u32)] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, v: &V) -> u32 {
        self.exps
            .binary_search_by(|(w, _)| w.cmp(v))
            .map(|i| self.exps[i].1)
            .unwrap_or(0)
    }

    pub fn contains(&self, v: &V) -> bool {
        self.exponent(v) > 0
    }

    /// Highest variable with a positive exponent.
    pub fn top(&self) -> Option<&(V, u32)> {
        self.exps.last()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.exps.len() + other.exps.len());
        let (mut i, mut j) = (0, 0);
        while i < self.exps.len() && j < other.exps.len() {
            match self.exps[i].0.cmp(&other.exps[j].0) {
                Ordering::Less => {
                    out.push(self.exps[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.exps[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.exps[i].0.clone(), self.exps[i].1 + other.exps[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.exps[i..]);
        out.extend_from_slice(&other.exps[j..]);
        Monomial { exps: out }
    }

    pub fn pow(&self, k: u32) -> Self {
        if k == 0 {
            return Self::one();
        }
        Monomial {
            exps: self.exps.iter().map(|(v, e)| (v.clone(), e * k)).collect(),
        }
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Self) -> Option<Self> {
        let mut out = Vec::with_capacity(self.exps.len());
        let mut j = 0;
        for (v, e) in &self.exps {
            if j < other.exps.len() && other.exps[j].0 < *v {
                return None;
            }
            if j < other.exps.len() && other.exps[j].0 == *v {
                let oe = other.exps[j].1;
                j += 1;
                match e.cmp(&oe) {
                    Ordering::Less => return None,
                    Ordering::Equal => continue,
                    Ordering::Greater => out.push((v.clone(), e - oe)),
                }
            } else {
                out.push((v.clone(), *e));
            }
        }
        if j < other.exps.len() {
            return None;
        }
        Some(Monomial { exps: out })
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.exps.len() && j < other.exps.len() {
            match self.exps[i].0.cmp(&other.exps[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    out.push((self.exps[i].0.clone(), self.exps[i].1.min(other.exps[j].1)));
                    i += 1;
                    j += 1;
                }
            }
        }
        Monomial { exps: out }
    }

    /// Splits off the power of `v`: returns `(exponent, rest)`.
    pub fn split(&self, v: &V) -> (u32, Self) {
        let mut rest = Vec::with_capacity(self.exps.len());
        let mut e = 0;
        for (w, k) in &self.exps {
            if w == v {
                e = *k;
            } else {
                rest.push((w.clone(), *k));
            }
        }
        (e, Monomial { exps: rest })
    }

    /// Derivative of the power product with respect to `v`: `(multiplier, monomial)`.
    pub fn derivative(&self, v: &V) -> Option<(u32, Self)> {
        let (e, rest) = self.split(v);
        if e == 0 {
            return None;
        }
        Some((e, rest.mul(&Self::pow_of(v.clone(), e - 1))))
    }

    pub fn vars(&self) -> impl Iterator<Item = &V> {
        self.exps.iter().map(|(v, _)| v)
    }

    pub fn map_vars<W: Ord + Clone>(&self, f: impl Fn(&V) -> W) -> Monomial<W> {
        Monomial::from_pairs(self.exps.iter().map(|(v, e)| (f(v), *e)))
    }
}

/// The monomial order used everywhere: highest variable dominates, then its
/// exponent, then recursion on what is left.
pub fn lex_compare<V: Ord>(a: &Monomial<V>, b: &Monomial<V>) -> Ordering {
    let (mut i, mut j) = (a.exps.len(), b.exps.len());
    loop {
        match (i, j) {
            (0, 0) => return Ordering::Equal,
            (0, _) => return Ordering::Less,
            (_, 0) => return Ordering::Greater,
            _ => {}
        }
        let (va, ea) = &a.exps[i - 1];
        let (vb, eb) = &b.exps[j - 1];
        match va.cmp(vb) {
            Ordering::Equal => {}
            other => return other,
        }
        match ea.cmp(eb) {
            Ordering::Equal => {}
            other => return other,
        }
        i -= 1;
        j -= 1;
    }
}

impl<V: Ord> PartialOrd for Monomial<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<V: Ord> Ord for Monomial<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        lex_compare(self, other)
    }
}
