use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::polyring::{ParamRat, Polynomial, Role, StateMonomial, Symbol, Var, Q};

/// 1-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{0}: {1}")]
    Syntax(Span, String),
    #[error("{0}: unknown identifier '{1}'")]
    UnknownIdentifier(Span, String),
    #[error("{0}: exponent must be a nonnegative integer")]
    BadExponent(Span),
    #[error("{0}: float literals are not supported; write rationals as p/q")]
    FloatLiteral(Span),
    #[error("{0}: can only divide by expressions free of state and input variables")]
    VariableDivision(Span),
    #[error("{0}: division by zero")]
    DivisionByZero(Span),
}

/// Names of variables (by polynomial position) and coefficient symbols.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    vars: Vec<String>,
    params: BTreeMap<String, Symbol>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Variables at positions `0..names.len()`.
    pub fn with_vars(names: &[String]) -> Self {
        SymbolTable {
            vars: names.to_vec(),
            params: BTreeMap::new(),
        }
    }

    pub fn add_var(&mut self, name: &str) -> Var {
        if let Some(v) = self.var(name) {
            return v;
        }
        self.vars.push(name.to_string());
        (self.vars.len() - 1) as Var
    }

    pub fn add_param(&mut self, s: Symbol) {
        self.params.insert(s.name().to_string(), s);
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.vars.iter().position(|v| v == name).map(|p| p as Var)
    }

    pub fn param(&self, name: &str) -> Option<&Symbol> {
        self.params.get(name)
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    pub fn params(&self) -> impl Iterator<Item = &Symbol> {
        self.params.values()
    }

    /// Builds a table for `text`: names in `params` become decision
    /// parameters, names in `constants` plant constants, and every other
    /// identifier a variable, in natural order (`x2` before `x10`).
    pub fn infer(text: &str, params: &[String], constants: &[String]) -> Result<Self, ParseError> {
        let mut t = SymbolTable::new();
        for (i, p) in params.iter().enumerate() {
            t.add_param(Symbol::feedback_param(p.clone(), vec![0, i as u32 + 1]));
        }
        for (i, c) in constants.iter().enumerate() {
            t.add_param(Symbol::plant_constant(c.clone(), i as u32 + 1));
        }
        let mut names: Vec<String> = Vec::new();
        for tok in tokenize(text)? {
            if let Tok::Ident(name) = tok.tok {
                if t.param(&name).is_none() && !names.contains(&name) {
                    names.push(name);
                }
            }
        }
        names.sort_by(|a, b| natural_cmp(a, b));
        for n in names {
            t.add_var(&n);
        }
        Ok(t)
    }
}

/// Orders embedded digit runs numerically.
pub fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn chunks(s: &str) -> Vec<(bool, String)> {
        let mut out: Vec<(bool, String)> = Vec::new();
        for ch in s.chars() {
            let d = ch.is_ascii_digit();
            match out.last_mut() {
                Some((ld, buf)) if *ld == d => buf.push(ch),
                _ => out.push((d, ch.to_string())),
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for (x, y) in ca.iter().zip(&cb) {
        let o = match (x.0, y.0) {
            (true, true) => {
                let (nx, ny) = (x.1.trim_start_matches('0'), y.1.trim_start_matches('0'));
                nx.len().cmp(&ny.len()).then_with(|| nx.cmp(ny))
            }
            _ => x.1.cmp(&y.1),
        };
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && (chars[i] == '.' || chars[i] == 'e' || chars[i] == 'E') {
                let next_digit = chars
                    .get(i + 1)
                    .is_some_and(|d| d.is_ascii_digit() || *d == '-');
                if chars[i] == '.' || next_digit {
                    return Err(ParseError::FloatLiteral(span));
                }
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token {
                tok: Tok::Int(s.parse().expect("digits")),
                span,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                span,
            });
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '.' => return Err(ParseError::FloatLiteral(span)),
            other => {
                return Err(ParseError::Syntax(
                    span,
                    format!("unexpected character '{other}'"),
                ))
            }
        };
        out.push(Token { tok, span });
        i += 1;
        col += 1;
    }
    out.push(Token {
        tok: Tok::End,
        span: Span { line, col },
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    table: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    acc = &acc * &self.unary()?;
                }
                Tok::Slash => {
                    let span = self.bump().span;
                    let d = self.unary()?;
                    if d.terms().any(|(m, _)| !m.is_one()) {
                        return Err(ParseError::VariableDivision(span));
                    }
                    let c = d.coefficient(&StateMonomial::one());
                    let inv = c.recip().ok_or(ParseError::DivisionByZero(span))?;
                    acc = acc.scale(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek().tok {
            Tok::Minus => {
                self.bump();
                Ok(-&self.unary()?)
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial, ParseError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        let span = self.bump().span;
        let e = self.exponent(span)?;
        Ok(base.pow(e))
    }

    fn exponent(&mut self, span: Span) -> Result<u32, ParseError> {
        let t = self.bump();
        match t.tok {
            // `x^1/2` reads as `(x^1)/2`; only a parenthesized fraction is rejected.
            Tok::Int(n) => n.to_u32().ok_or(ParseError::BadExponent(t.span)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                let c = (inner.terms().all(|(m, _)| m.is_one()))
                    .then(|| inner.coefficient(&StateMonomial::one()).constant_value())
                    .flatten()
                    .ok_or(ParseError::BadExponent(span))?;
                if !c.is_integer() || c < Q::zero() {
                    return Err(ParseError::BadExponent(span));
                }
                c.to_integer().to_u32().ok_or(ParseError::BadExponent(span))
            }
            Tok::Minus => Err(ParseError::BadExponent(span)),
            _ => Err(ParseError::Syntax(t.span, "expected an exponent".into())),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let t = self.bump();
        if t.tok != Tok::RParen {
            return Err(ParseError::Syntax(t.span, "expected ')'".into()));
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<Polynomial, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Int(n) => Ok(Polynomial::constant(ParamRat::constant(Q::from_integer(n)))),
            Tok::Ident(name) => {
                if let Some(v) = self.table.var(&name) {
                    Ok(Polynomial::var(v))
                } else if let Some(s) = self.table.param(&name) {
                    Ok(Polynomial::constant(ParamRat::symbol(s.clone())))
                } else {
                    Err(ParseError::UnknownIdentifier(t.span, name))
                }
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::End => Err(ParseError::Syntax(t.span, "unexpected end of input".into())),
            _ => Err(ParseError::Syntax(
                t.span,
                "expected a number, name or '('".into(),
            )),
        }
    }
}

/// Parses and fully expands a polynomial expression.
pub fn parse_poly(text: &str, table: &SymbolTable) -> Result<Polynomial, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        table,
    };
    let out = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(ParseError::Syntax(
            t.span,
            "expected an operator or end of input".into(),
        ));
    }
    Ok(out)
}

/// Parses a coefficient expression: no state or input variables allowed.
pub fn parse_coefficient(text: &str, table: &SymbolTable) -> Result<ParamRat, ParseError> {
    let p = parse_poly(text, table)?;
    if p.terms().any(|(m, _)| !m.is_one()) {
        return Err(ParseError::Syntax(
            Span { line: 1, col: 1 },
            "expected an expression without variables".into(),
        ));
    }
    Ok(p.coefficient(&StateMonomial::one()))
}

/// Declares `names` as coefficient symbols with the given role.
pub fn declare_params(table: &mut SymbolTable, names: &[String], role: Role) {
    for (i, n) in names.iter().enumerate() {
        table.add_param(Symbol::new(n.clone(), role, vec![0, i as u32 + 1]));
    }
}
