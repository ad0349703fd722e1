use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use super::expr::{parse_poly, ParseError, SymbolTable};
use crate::feedback::{FeedbackError, FeedbackTemplate, PolySystem};
use crate::polyring::{Polynomial, StateMonomial, Symbol, Var, Q};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("invalid system document: {0}")]
    Json(String),
    #[error("{field}: {err}")]
    Expr { field: String, err: ParseError },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    states: Vec<String>,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    constants: Vec<String>,
    #[serde(default)]
    constant_values: BTreeMap<String, String>,
    rhs: Vec<String>,
    lyapunov: Option<String>,
    feedback_template: Option<Vec<Vec<String>>>,
    degree: Option<u32>,
    #[serde(default)]
    witness_hint: BTreeMap<String, String>,
}

/// A parsed system document.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    /// The plant with any given constant values substituted.
    pub system: PolySystem,
    pub constants: Vec<Symbol>,
    pub constant_values: BTreeMap<Symbol, Q>,
    pub lyapunov: Option<Polynomial>,
    pub template: Option<FeedbackTemplate>,
    pub degree: Option<u32>,
    /// Witness-search hints by parameter name.
    pub hints: BTreeMap<String, Q>,
    pub table: SymbolTable,
}

impl SystemSpec {
    /// Hints resolved against a template's parameters and minted names.
    pub fn hints_for(&self, template: &FeedbackTemplate) -> BTreeMap<Symbol, Q> {
        let params = template.params();
        self.hints
            .iter()
            .filter_map(|(name, v)| {
                let s = params
                    .iter()
                    .find(|s| s.name() == name)
                    .cloned()
                    .or_else(|| minted_symbol(name))?;
                Some((s, v.clone()))
            })
            .collect()
    }
}

/// Recognizes minted names such as `W_3_2_1`.
pub fn minted_symbol(name: &str) -> Option<Symbol> {
    let rest = name.strip_prefix("W_")?;
    let parts: Vec<u32> = rest
        .split('_')
        .map(|p| p.parse().ok())
        .collect::<Option<_>>()?;
    match parts[..] {
        [sigma, rho, k] if rho < sigma && rho >= 1 && k >= 1 => {
            Some(Symbol::w_param(sigma, rho, k))
        }
        _ => None,
    }
}

fn expr_err(field: impl Into<String>) -> impl FnOnce(ParseError) -> SystemError {
    let field = field.into();
    move |err| SystemError::Expr { field, err }
}

pub fn parse_rational(text: &str) -> Option<Q> {
    crate::polyring::parse_q(text)
}

/// Parses the JSON system schema.
pub fn parse_system(doc: &str) -> Result<SystemSpec, SystemError> {
    let d: SystemDoc = serde_json::from_str(doc).map_err(|e| SystemError::Json(e.to_string()))?;
    if d.states.is_empty() {
        return Err(SystemError::Invalid(
            "at least one state is required".into(),
        ));
    }
    let mut names: Vec<&String> = d
        .states
        .iter()
        .chain(&d.inputs)
        .chain(&d.constants)
        .collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(SystemError::Invalid(format!(
            "name '{}' declared twice",
            w[0]
        )));
    }
    let mut table = SymbolTable::with_vars(&d.states);
    for u in &d.inputs {
        table.add_var(u);
    }
    let constants: Vec<Symbol> = d
        .constants
        .iter()
        .enumerate()
        .map(|(i, c)| Symbol::plant_constant(c.clone(), i as u32 + 1))
        .collect();
    for c in &constants {
        table.add_param(c.clone());
    }
    if d.rhs.len() != d.states.len() {
        return Err(FeedbackError::RhsLength {
            expected: d.states.len(),
            got: d.rhs.len(),
        }
        .into());
    }
    let rhs = d
        .rhs
        .iter()
        .enumerate()
        .map(|(i, r)| parse_poly(r, &table).map_err(expr_err(format!("rhs[{i}]"))))
        .collect::<Result<Vec<_>, _>>()?;

    let mut constant_values = BTreeMap::new();
    for (name, v) in &d.constant_values {
        let s = constants.iter().find(|c| c.name() == name).ok_or_else(|| {
            SystemError::Invalid(format!("value given for undeclared constant '{name}'"))
        })?;
        let q = parse_rational(v).ok_or_else(|| {
            SystemError::Invalid(format!("constant '{name}': '{v}' is not a rational"))
        })?;
        constant_values.insert(s.clone(), q);
    }
    let symbolic = PolySystem::new(d.states.clone(), d.inputs.clone(), rhs)?;
    let system = symbolic.with_constants(&crate::feedback::constant_bindings(&constant_values))?;

    let state_table = SymbolTable::with_vars(&d.states);
    let lyapunov = d
        .lyapunov
        .as_deref()
        .map(|l| parse_poly(l, &state_table).map_err(expr_err("lyapunov")))
        .transpose()?;
    let template = d
        .feedback_template
        .as_ref()
        .map(|t| parse_template(t, &d.states, d.inputs.len()))
        .transpose()?;
    let mut hints = BTreeMap::new();
    for (k, v) in &d.witness_hint {
        let q = parse_rational(v)
            .ok_or_else(|| SystemError::Invalid(format!("hint '{k}': '{v}' is not a rational")))?;
        hints.insert(k.clone(), q);
    }
    if d.degree == Some(0) {
        return Err(FeedbackError::Degree.into());
    }
    Ok(SystemSpec {
        system,
        constants,
        constant_values,
        lyapunov,
        template,
        degree: d.degree,
        hints,
        table,
    })
}

/// Each entry is a product of state names, optionally with one parameter
/// name (`G1*x*y`); entries without one get an automatic name.
pub fn parse_template(
    entries: &[Vec<String>],
    states: &[String],
    m: usize,
) -> Result<FeedbackTemplate, SystemError> {
    if entries.len() != m {
        return Err(SystemError::Invalid(format!(
            "feedback_template has {} laws for {m} inputs",
            entries.len()
        )));
    }
    let mut laws = Vec::new();
    let mut used: Vec<String> = Vec::new();
    for (j, law) in entries.iter().enumerate() {
        let mut terms = Vec::new();
        for (k, entry) in law.iter().enumerate() {
            let mut param: Option<String> = None;
            let mut pairs: Vec<(Var, u32)> = Vec::new();
            for factor in entry.split('*') {
                let factor = factor.trim();
                let (name, exp) = match factor.split_once('^') {
                    Some((n, e)) => (
                        n.trim(),
                        e.trim().parse::<u32>().map_err(|_| {
                            SystemError::Invalid(format!("template entry '{entry}': bad exponent"))
                        })?,
                    ),
                    None => (factor, 1),
                };
                match states.iter().position(|s| s == name) {
                    Some(v) => pairs.push((v as Var, exp)),
                    None if param.is_none() && exp == 1 && is_identifier(name) => {
                        param = Some(name.to_string())
                    }
                    None => {
                        return Err(SystemError::Invalid(format!(
                            "template entry '{entry}': '{name}' is not a state"
                        )))
                    }
                }
            }
            let mono = StateMonomial::from_pairs(pairs);
            if mono.is_one() {
                return Err(SystemError::Invalid(format!(
                    "template entry '{entry}' has no state factor"
                )));
            }
            let index = vec![j as u32 + 1, k as u32 + 1];
            let sym = match param {
                Some(p) => Symbol::feedback_param(p, index),
                None => {
                    let mut name = format!("A{}", j + 1);
                    for (v, e) in mono.pairs() {
                        for _ in 0..*e {
                            name.push_str(&format!("_{}", v + 1));
                        }
                    }
                    Symbol::feedback_param(name, index)
                }
            };
            if used.contains(&sym.name().to_string()) || states.iter().any(|s| s == sym.name()) {
                return Err(SystemError::Invalid(format!(
                    "parameter name '{}' is used twice",
                    sym.name()
                )));
            }
            used.push(sym.name().to_string());
            terms.push((sym, mono));
        }
        laws.push(terms);
    }
    Ok(FeedbackTemplate { laws })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// Parses numeric feedback laws over the states.
pub fn parse_laws(texts: &[String], states: &[String]) -> Result<Vec<Polynomial>, SystemError> {
    let table = SymbolTable::with_vars(states);
    texts
        .iter()
        .enumerate()
        .map(|(j, t)| parse_poly(t, &table).map_err(expr_err(format!("feedback[{j}]"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIGID: &str = r#"{
        "states": ["x1", "x2", "x3"],
        "inputs": ["u1", "u2"],
        "constants": ["a1", "a2", "a3"],
        "rhs": ["a1*x2*x3 + u1", "a2*x1*x3 + u2", "a3*x1*x2"]
    }"#;

    #[test]
    fn minted_names() {
        assert_eq!(minted_symbol("W_3_2_1"), Some(Symbol::w_param(3, 2, 1)));
        assert_eq!(minted_symbol("W_2_3_1"), None);
        assert_eq!(minted_symbol("W_3_2"), None);
        assert_eq!(minted_symbol("B1"), None);
    }

    #[test]
    fn rigid_body_document() {
        let s = parse_system(RIGID).unwrap();
        assert_eq!(s.system.n(), 3);
        assert_eq!(s.system.m(), 2);
        assert_eq!(s.constants.len(), 3);
        assert_eq!(s.system.rhs()[2].params().len(), 1);
    }

    #[test]
    fn autonomous_and_invalid_documents() {
        let s = parse_system(r#"{"states": ["x"], "rhs": ["-x"]}"#).unwrap();
        assert_eq!(s.system.m(), 0);
        let e = parse_system(r#"{"states": ["x1"], "rhs": ["1 + x1"]}"#).unwrap_err();
        assert!(
            e.to_string().contains("right-hand side 1 has a free term"),
            "{e}"
        );
        let e = parse_system(r#"{"states": ["x1", "x2"], "rhs": ["x1"]}"#).unwrap_err();
        assert!(matches!(
            e,
            SystemError::Feedback(FeedbackError::RhsLength { .. })
        ));
        assert!(parse_system(r#"{"states": ["x"], "rhs": ["x"], "bogus": 1}"#).is_err());
        assert!(matches!(
            parse_system(r#"{"states": ["x"], "rhs": ["y"]}"#),
            Err(SystemError::Expr { .. })
        ));
    }

    #[test]
    fn templates_name_parameters() {
        let states = vec!["x".to_string(), "y".to_string()];
        let t = parse_template(
            &[
                vec!["A1*x".into(), "B1*y".into(), "G1*x*y".into()],
                vec!["x".into(), "y^2".into()],
            ],
            &states,
            2,
        )
        .unwrap();
        let names: Vec<String> = t.params().iter().map(|s| s.name().to_string()).collect();
        assert_eq!(names, ["A1", "B1", "G1", "A2_1", "A2_2_2"]);
        assert!(parse_template(&[vec!["a*b*x".into()]], &states, 1).is_err());
        assert!(parse_template(&[vec!["A1".into()]], &states, 1).is_err());
    }

    #[test]
    fn constant_values_are_substituted() {
        let doc = RIGID.replace(
            r#""rhs""#,
            r#""constant_values": {"a1": "1", "a2": "1", "a3": "1"}, "rhs""#,
        );
        let s = parse_system(&doc).unwrap();
        assert!(s.system.rhs().iter().all(|p| p.params().is_empty()));
    }
}
