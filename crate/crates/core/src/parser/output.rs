use std::collections::BTreeMap;
use std::fmt::{self, Write};

use serde_json::{json, Map, Value};

use crate::feedback::{FeedbackFamily, PolySystem};
use crate::formalfactor::{FactorTerm, FormalFactorization};
use crate::polyring::{Polynomial, Symbol, Q};
use crate::positivity::{Certificate, NoCertificate, SolutionSet};

pub const SCHEMA_VERSION: u32 = 1;

struct Product<'a>(&'a FactorTerm, &'a [String]);

impl fmt::Display for Product<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_product(f, self.1)
    }
}

fn term_json(t: &FactorTerm, names: &[String]) -> Value {
    json!({
        "coefficient": t.coefficient.to_string(),
        "product": Product(t, names).to_string(),
        "x1_power": t.x1_power,
        "forms": t.forms.iter().map(|(l, e)| json!({
            "form": l.display(names).to_string(),
            "exponent": e,
        })).collect::<Vec<_>>(),
    })
}

fn witness_map(w: &BTreeMap<Symbol, Q>, order: &[Symbol]) -> Map<String, Value> {
    let mut m = Map::new();
    for s in order {
        if let Some(v) = w.get(s) {
            m.insert(s.name().to_string(), Value::String(v.to_string()));
        }
    }
    for (s, v) in w {
        m.entry(s.name().to_string())
            .or_insert_with(|| Value::String(v.to_string()));
    }
    m
}

fn poly_str(p: &Polynomial, names: &[String]) -> String {
    p.display(names).to_string()
}

pub fn factorization_json(f: &FormalFactorization, names: &[String]) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "factorization",
        "variables": names,
        "text": f.display(names).to_string(),
        "factors": f.factors.iter().map(|t| term_json(t, names)).collect::<Vec<_>>(),
        "remainder": poly_str(&f.remainder, names),
        "parameters": f.params.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "iterations": f.trace.len(),
    })
}

fn solution_json(s: &SolutionSet, decision: &[Symbol]) -> Map<String, Value> {
    let mut eq = Map::new();
    for (sym, v) in &s.equalities {
        eq.insert(sym.name().to_string(), Value::String(v.to_string()));
    }
    let ranges = s.ranges();
    let constraints: Vec<Value> = s
        .constraints
        .iter()
        .map(|c| {
            let mut o = Map::new();
            o.insert("expr".into(), Value::String(c.expr.to_string()));
            o.insert("relation".into(), Value::String(c.relation.symbol().into()));
            if let Some((sym, _, _, iv)) = ranges
                .iter()
                .find(|(_, r, e, _)| *r == c.relation && *e == c.expr)
            {
                o.insert("parameter".into(), Value::String(sym.name().into()));
                o.insert(
                    "intervals".into(),
                    iv.iter().map(|i| Value::String(i.to_string())).collect(),
                );
            }
            Value::Object(o)
        })
        .collect();
    let mut m = Map::new();
    m.insert("equalities".into(), Value::Object(eq));
    m.insert("constraints".into(), Value::Array(constraints));
    m.insert(
        "free".into(),
        s.free
            .iter()
            .map(|s| Value::String(s.name().into()))
            .collect(),
    );
    m.insert(
        "witness".into(),
        match &s.witness {
            Some(w) => Value::Object(witness_map(w, decision)),
            None => Value::Null,
        },
    );
    m
}

/// Caller-supplied parameters first, then minted ones.
fn decision_order(c: &Certificate, extra: &[Symbol]) -> Vec<Symbol> {
    let mut d = extra.to_vec();
    d.extend(c.factorization.params.iter().cloned());
    d
}

pub fn certificate_json(p: &Polynomial, c: &Certificate, names: &[String]) -> Value {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("kind".into(), json!("certificate"));
    m.insert("status".into(), json!("certified"));
    m.insert("polynomial".into(), json!(poly_str(p, names)));
    m.insert(
        "factorization".into(),
        factorization_json(&c.factorization, names),
    );
    m.extend(solution_json(&c.solution, &decision_order(c, &[])));
    m.insert("sos".into(), sos_json(c, names));
    m.insert("positive_definite".into(), json!(c.positive_definite));
    Value::Object(m)
}

fn sos_json(c: &Certificate, names: &[String]) -> Value {
    let mut m = Map::new();
    m.insert("text".into(), json!(c.sos.display(names).to_string()));
    m.insert(
        "terms".into(),
        c.sos.terms.iter().map(|t| term_json(t, names)).collect(),
    );
    if let Some(w) = &c.solution.witness {
        if let Ok(inst) = c.sos.instantiate(w) {
            m.insert(
                "witness_text".into(),
                json!(inst.display(names).to_string()),
            );
        }
    }
    Value::Object(m)
}

pub fn no_certificate_json(e: &NoCertificate) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "certificate",
        "status": "no_certificate",
        "message": e.to_string(),
        "reason": e.reason,
        "branches": e.branches,
    })
}

fn write_solution(out: &mut String, s: &SolutionSet, decision: &[Symbol]) {
    if !s.equalities.is_empty() {
        out.push_str("equalities:\n");
        for (sym, v) in &s.equalities {
            let _ = writeln!(out, "  {} = {}", sym.name(), v);
        }
    }
    if !s.constraints.is_empty() {
        let ranges = s.ranges();
        out.push_str("constraints:\n");
        for c in &s.constraints {
            let _ = write!(out, "  {c}");
            if let Some((sym, _, _, iv)) = ranges
                .iter()
                .find(|(_, r, e, _)| *r == c.relation && *e == c.expr)
            {
                let iv: Vec<String> = iv.iter().map(|i| i.to_string()).collect();
                let _ = write!(out, "    [{} in {}]", sym.name(), iv.join(" u "));
            }
            out.push('\n');
        }
    }
    if let Some(w) = &s.witness {
        let parts: Vec<String> = witness_map(w, decision)
            .into_iter()
            .map(|(k, v)| format!("{k} = {}", v.as_str().unwrap_or_default()))
            .collect();
        if !parts.is_empty() {
            let _ = writeln!(out, "witness: {}", parts.join(", "));
        }
    }
}

pub fn certificate_text(c: &Certificate, names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "factorization: {}", c.factorization.display(names));
    write_solution(&mut out, &c.solution, &decision_order(c, &[]));
    let _ = writeln!(out, "certificate: {}", c.sos.display(names));
    if let Some(w) = &c.solution.witness {
        if let Ok(inst) = c.sos.instantiate(w) {
            if inst != c.sos {
                let _ = writeln!(out, "at witness: {}", inst.display(names));
            }
        }
    }
    let pd = match c.positive_definite {
        Some(true) => "yes",
        Some(false) => "no",
        None => "undecided",
    };
    let _ = writeln!(out, "positive definite: {pd}");
    out
}

pub fn synthesis_json(sys: &PolySystem, fam: &FeedbackFamily) -> Value {
    let states = sys.state_names().to_vec();
    let cert = &fam.certificate;
    let decision = decision_order(cert, &fam.template.params());
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("kind".into(), json!("synthesis"));
    m.insert("status".into(), json!("stabilized"));
    m.insert(
        "template".into(),
        fam.template
            .laws
            .iter()
            .zip(sys.input_names())
            .map(|(law, u)| {
                let terms: Vec<Value> = law
                    .iter()
                    .map(|(s, mono)| {
                        json!({
                            "parameter": s.name(),
                            "monomial": poly_str(&Polynomial::term(mono.clone(), crate::polyring::ParamRat::one()), &states),
                        })
                    })
                    .collect();
                json!({ "input": u, "terms": terms })
            })
            .collect(),
    );
    m.insert(
        "laws".into(),
        fam.laws
            .iter()
            .map(|a| json!(poly_str(a, &states)))
            .collect(),
    );
    m.insert(
        "derivative".into(),
        json!(poly_str(&fam.derivative, &states)),
    );
    m.insert(
        "factorization".into(),
        factorization_json(&cert.factorization, &states),
    );
    m.extend(solution_json(&cert.solution, &decision));
    if let (Some(Value::Object(w)), Some(laws)) = (m.get("witness").cloned(), &fam.witness_laws) {
        m.insert(
            "witness".into(),
            json!({
                "parameters": w,
                "feedback": laws.iter().map(|a| poly_str(a, &states)).collect::<Vec<_>>(),
            }),
        );
    }
    m.insert("sos".into(), sos_json(cert, &states));
    m.insert("positive_definite".into(), json!(cert.positive_definite));
    m.insert(
        "globally_asymptotically_stable".into(),
        json!(fam.globally_asymptotically_stable),
    );
    Value::Object(m)
}

pub fn synthesis_text(sys: &PolySystem, fam: &FeedbackFamily) -> String {
    let states = sys.state_names().to_vec();
    let cert = &fam.certificate;
    let mut out = String::new();
    out.push_str("feedback family:\n");
    for (u, a) in sys.input_names().iter().zip(&fam.laws) {
        let _ = writeln!(out, "  {u} = {}", a.display(&states));
    }
    let _ = writeln!(out, "derivative: V = {}", fam.derivative.display(&states));
    write_solution(
        &mut out,
        &cert.solution,
        &decision_order(cert, &fam.template.params()),
    );
    if let Some(laws) = &fam.witness_laws {
        out.push_str("witness feedback:\n");
        for (u, a) in sys.input_names().iter().zip(laws) {
            let _ = writeln!(out, "  {u} = {}", a.display(&states));
        }
    }
    let _ = writeln!(out, "certificate: V = {}", cert.sos.display(&states));
    if let Some(w) = &cert.solution.witness {
        if let Ok(inst) = cert.sos.instantiate(w) {
            let _ = writeln!(out, "at witness: V = {}", inst.display(&states));
        }
    }
    let gas = if fam.globally_asymptotically_stable {
        "yes (V positive definite under the witness)"
    } else {
        "not claimed (V only shown nonnegative)"
    };
    let _ = writeln!(out, "globally asymptotically stable: {gas}");
    out
}
