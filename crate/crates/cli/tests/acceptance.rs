//! Runs every acceptance criterion and prints one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use formalsos::feedback::{
    lyapunov_derivative, synthesize, FeedbackFamily, LyapunovSpec, PolySystem, SynthesisOutcome,
};
use formalsos::formalfactor::{evaluate, formal_lf, FormalFactorization, LinearForm, RuleSet};
use formalsos::parser::{declare_params, parse_poly, parse_system, SymbolTable, SystemSpec};
use formalsos::polyring::{q, ParamPoly, ParamRat, Polynomial, Role, StateMonomial, Symbol, Q};
use formalsos::positivity::{
    pos_check, univariate_intervals, verify_witness, PosOutcome, Relation, SolveOptions,
};
use formalsos::simulate::{check_decrease, simulate_closed_loop, SimOptions, DECREASE_TOLERANCE};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_formalsos"))
}

fn systems(name: &str) -> String {
    format!("{}/../../systems/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run_cli(args: &[&str]) -> Result<(i32, String, Duration), String> {
    let start = Instant::now();
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let code = out.status.code().ok_or("killed by signal")?;
    Ok((
        code,
        String::from_utf8_lossy(&out.stdout).into_owned(),
        elapsed,
    ))
}

fn w(s: u32, r: u32, k: u32) -> Symbol {
    Symbol::w_param(s, r, k)
}

fn table_with_w(vars: &[&str], ws: &[Symbol]) -> SymbolTable {
    let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
    let mut t = SymbolTable::with_vars(&names);
    for s in ws {
        t.add_param(s.clone());
    }
    t
}

fn coeff(text: &str, t: &SymbolTable) -> ParamRat {
    parse_poly(text, t)
        .unwrap()
        .coefficient(&StateMonomial::one())
}

fn load(name: &str) -> SystemSpec {
    parse_system(&std::fs::read_to_string(systems(name)).unwrap()).unwrap()
}

fn family(spec: &SystemSpec) -> Result<FeedbackFamily, String> {
    let l = LyapunovSpec::new(spec.lyapunov.clone().unwrap(), spec.system.n(), 0)
        .map_err(|e| e.to_string())?;
    let t = spec.template.clone().unwrap();
    let opts = SolveOptions {
        hints: spec.hints_for(&t),
        ..SolveOptions::default()
    };
    match synthesize(&spec.system, &l, &t, &opts).map_err(|e| e.to_string())? {
        SynthesisOutcome::Stabilized(f) => Ok(*f),
        SynthesisOutcome::NoStabilizer(e) => Err(e.to_string()),
    }
}

fn named<'a, V>(m: impl IntoIterator<Item = (&'a Symbol, &'a V)>, name: &str) -> Option<&'a V> {
    m.into_iter()
        .find(|(s, _)| s.name() == name)
        .map(|(_, v)| v)
}

fn example_2_2() -> Result<(FormalFactorization, SymbolTable), String> {
    let t = table_with_w(&["x1", "x2", "x3"], &[w(3, 1, 1), w(3, 2, 1), w(2, 1, 2)]);
    let p = parse_poly("5*x1 - 7*x1*x2 + 11*x1*x3", &t).map_err(|e| e.to_string())?;
    let f = formal_lf(&p, 3).map_err(|e| e.to_string())?;
    ensure!(
        (&f.expand() - &p).is_zero(),
        "expansion differs from the input"
    );
    Ok((f, t))
}

fn criterion_1() -> Outcome {
    let (f, t) = example_2_2()?;
    ensure!(
        f.factors.len() == 2,
        "expected 2 factor terms, got {}",
        f.factors.len()
    );
    ensure!(
        f.factors[0].coefficient == ParamRat::integer(11),
        "c1 = {}",
        f.factors[0].coefficient
    );
    let c2 = coeff("-7 - 11*W_3_2_1", &t);
    ensure!(
        f.factors[1].coefficient == c2,
        "c2 = {}",
        f.factors[1].coefficient
    );
    let rem = parse_poly(
        "5*x1 + (7*W_2_1_2 - 11*W_3_1_1 + 11*W_2_1_2*W_3_2_1)*x1^2",
        &t,
    )
    .unwrap();
    ensure!(f.remainder == rem, "remainder = {}", f.remainder);
    let (code, out, elapsed) = run_cli(&["factor", "--expr", "5*x1 - 7*x1*x2 + 11*x1*x3"])?;
    ensure!(code == 0, "factor exited {code}");
    ensure!(elapsed < Duration::from_secs(1), "factor took {elapsed:?}");
    Ok(format!("{} ({elapsed:.2?})", out.trim()))
}

fn criterion_2() -> Outcome {
    let (f, _) = example_2_2()?;
    let rules = RuleSet {
        params: vec![w(3, 1, 1), w(3, 2, 1), w(2, 1, 2)],
        rules: vec![vec![q(-2, 1).into(), q(1, 1).into(), q(-1, 1).into()]],
    };
    let g = evaluate(&f, &rules).map_err(|e| e.to_string())?.remove(0);
    let t = table_with_w(&["x1", "x2", "x3"], &[]);
    let target = parse_poly(
        "11*x1*(-2*x1 + x2 + x3) - 18*x1*(-x1 + x2) + 5*x1 + 4*x1^2",
        &t,
    )
    .unwrap();
    ensure!(g.expand() == target, "expansion {} differs", g.expand());
    let int = |n: i64| ParamRat::integer(n);
    let l3 = LinearForm::new(2, vec![int(-2), int(1)]);
    let l2 = LinearForm::new(1, vec![int(-1)]);
    ensure!(
        g.factors[0].coefficient == int(11) && g.factors[0].forms == vec![(l3, 1)],
        "first term"
    );
    ensure!(
        g.factors[1].coefficient == int(-18) && g.factors[1].forms == vec![(l2, 1)],
        "second term"
    );
    let rem = parse_poly("5*x1 + 4*x1^2", &t).unwrap();
    ensure!(g.remainder == rem, "remainder {}", g.remainder);
    let names: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    Ok(g.display(&names).to_string())
}

fn criterion_3() -> Outcome {
    let expr = "x^2 - 2*x*y + 6*y^2 - 4*y*z + 3*z^2";
    let t = table_with_w(&["x", "y", "z"], &[]);
    let p = parse_poly(expr, &t).unwrap();
    let c = match pos_check(&p, 3, &[], &SolveOptions::default()).map_err(|e| e.to_string())? {
        PosOutcome::Certified(c) => c,
        PosOutcome::NoCertificate(e) => return Err(e.to_string()),
    };
    let expected = vec![
        (w(3, 2, 1), ParamRat::constant(q(-2, 3))),
        (w(3, 1, 1), ParamRat::zero()),
        (w(2, 1, 4), ParamRat::constant(q(-3, 14))),
    ];
    ensure!(
        c.solution.equalities == expected,
        "equalities {:?}",
        c.solution.equalities
    );
    let names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let text = c.sos.display(&names).to_string();
    ensure!(
        text == "3*(z - 2/3*y)^2 + 14/3*(y - 3/14*x)^2 + 11/14*x^2",
        "certificate {text}"
    );
    ensure!(c.sos.expand() == p, "certificate does not expand to p");
    let (code, out, elapsed) = run_cli(&["positivity", "--expr", expr])?;
    ensure!(code == 0, "positivity exited {code}");
    ensure!(
        out.contains(&format!("certificate: {text}")),
        "CLI output lacks the certificate"
    );
    ensure!(
        elapsed < Duration::from_secs(5),
        "positivity took {elapsed:?}"
    );
    Ok(format!("{text} ({elapsed:.2?})"))
}

fn two_state() -> (PolySystem, LyapunovSpec, SymbolTable) {
    let spec = load("example_3_2.json");
    let t = SymbolTable::with_vars(spec.system.state_names());
    let l = LyapunovSpec::new(spec.lyapunov.unwrap(), 2, 0).unwrap();
    (spec.system, l, t)
}

const PAPER_V: &str = "20375/663552*x^4 + 2*(659/1152*x + y)^2*x^2 + x^2 + 3*(x/6 + y)^4";

/// The law exactly as stated, with `u1 = x + ...`.
fn criterion_4_as_stated() -> Outcome {
    let (sys, l, t) = two_state();
    let laws = [
        parse_poly("x + y + x*y/2", &t).unwrap(),
        parse_poly("5*x/4 + 2*y", &t).unwrap(),
    ];
    let v = lyapunov_derivative(&sys, &l, &laws).map_err(|e| e.to_string())?;
    let target = parse_poly(PAPER_V, &t).unwrap();
    let two = ParamRat::integer(2);
    let residual = &v - &target.scale(&two);
    let plain = &v - &target;
    let names = t.var_names();
    ensure!(
        residual.is_zero() || plain.is_zero(),
        "V - 2*target = {}; V - target = {}",
        residual.display(names),
        plain.display(names)
    );
    Ok("V = 2 * target".into())
}

/// The same identity with the family's `A1 = 2`; V uses the full gradient
/// of `x^2 + y^2`, hence the factor 2.
fn criterion_4_family() -> Outcome {
    let (sys, l, t) = two_state();
    let laws = [
        parse_poly("2*x + y + x*y/2", &t).unwrap(),
        parse_poly("5*x/4 + 2*y", &t).unwrap(),
    ];
    let v = lyapunov_derivative(&sys, &l, &laws).map_err(|e| e.to_string())?;
    let target = parse_poly(PAPER_V, &t).unwrap();
    let residual = &v - &target.scale(&ParamRat::integer(2));
    ensure!(
        residual.is_zero(),
        "V - 2*target = {}",
        residual.display(t.var_names())
    );
    Ok("u1 = 2*x + y + x*y/2: V = 2 * target exactly".into())
}

fn criterion_5() -> Outcome {
    let spec = load("example_3_2.json");
    let start = Instant::now();
    let fam = family(&spec)?;
    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(60),
        "synthesis took {elapsed:?}"
    );
    let sol = fam.solution();
    let wit = sol.witness.as_ref().ok_or("no witness")?;
    let want = [
        ("A1", q(2, 1)),
        ("A2", q(5, 4)),
        ("B1", q(1, 1)),
        ("B2", q(2, 1)),
        ("Γ1", q(1, 2)),
        ("Γ2", q(0, 1)),
    ];
    for (n, v) in &want {
        ensure!(
            named(wit, n) == Some(v),
            "witness {n} = {:?}",
            named(wit, n)
        );
    }
    for (s, v) in &sol.equalities {
        ensure!(
            v.eval(wit).ok().as_ref() == wit.get(s),
            "equality for {} fails at the witness",
            s.name()
        );
    }
    for c in &sol.constraints {
        ensure!(c.holds_at(wit), "constraint {c} fails at the witness");
    }
    let eq = |n: &str| named(sol.equalities.iter().map(|(s, v)| (s, v)), n).map(|v| v.to_string());
    for (n, v) in [("A1", "2"), ("A2", "5/(4*B1)"), ("B2", "2"), ("Γ2", "0")] {
        ensure!(eq(n).as_deref() == Some(v), "{n} = {:?}", eq(n));
    }
    let b1 = spec
        .template
        .as_ref()
        .unwrap()
        .params()
        .into_iter()
        .find(|s| s.name() == "B1")
        .unwrap();
    let g1 = spec
        .template
        .as_ref()
        .unwrap()
        .params()
        .into_iter()
        .find(|s| s.name() == "Γ1")
        .unwrap();
    // Every constraint on B1 alone admits all of (0, 5/4), and one pins it exactly.
    let mut tight = false;
    for (s, _, _, ivs) in sol.ranges() {
        if s != b1 {
            continue;
        }
        let covers = ivs.iter().any(|iv| {
            iv.lo.as_ref().is_none_or(|b| b.value <= 0.0)
                && iv.hi.as_ref().is_none_or(|b| b.value >= 1.25)
        });
        ensure!(covers, "a B1 constraint excludes part of (0, 5/4): {ivs:?}");
        tight |= ivs.len() == 1 && ivs[0].to_string() == "(0, 5/4)";
    }
    ensure!(tight, "no constraint gives B1 in (0, 5/4)");
    // The Γ1 interval at B1 = 1.
    let at_b1 = BTreeMap::from([(b1.clone(), ParamRat::one())]);
    let c = sol
        .constraints
        .iter()
        .find(|c| c.expr.contains(&g1) && c.relation == Relation::Positive)
        .ok_or("no Γ1 constraint")?;
    let e = c.expr.substitute(&at_b1).map_err(|e| e.to_string())?;
    let ivs = univariate_intervals(&e, Relation::Positive, &g1)
        .ok_or("Γ1 constraint not univariate quadratic")?;
    let r = 111f64.sqrt();
    let (lo, hi) = (
        (16.0 - 225.0 - 32.0 * r * 2.0) / 900.0,
        (16.0 - 225.0 + 32.0 * r * 2.0) / 900.0,
    );
    ensure!(lo < 0.5 && 0.5 < hi, "1/2 outside ({lo}, {hi})");
    let iv = ivs
        .iter()
        .find(|iv| iv.contains(0.5))
        .ok_or("1/2 not feasible")?;
    let (a, b) = (
        iv.lo.as_ref().ok_or("unbounded")?.value,
        iv.hi.as_ref().ok_or("unbounded")?.value,
    );
    ensure!(
        (a - lo).abs() < 1e-9 && (b - hi).abs() < 1e-9,
        "Γ1 interval ({a}, {b}) vs ({lo}, {hi})"
    );
    let (code, out, cli_time) = run_cli(&[
        "synthesize",
        &systems("example_3_2.json"),
        "--format",
        "json",
    ])?;
    ensure!(code == 0, "synthesize exited {code}");
    ensure!(out.contains("\"A2\": \"5/(4*B1)\""), "JSON lacks A2");
    Ok(format!(
        "Γ1 in ({a:.5}, {b:.5}) at B1 = 1 ({elapsed:.2?}, CLI {cli_time:.2?})"
    ))
}

fn rigid() -> Result<(SystemSpec, FeedbackFamily), String> {
    let spec = load("rigid_body.json");
    let fam = family(&spec)?;
    Ok((spec, fam))
}

fn criterion_6_constraints() -> Outcome {
    let (spec, fam) = rigid()?;
    let sol = fam.solution();
    let syms = spec.template.as_ref().unwrap().params();
    let p = |n: &str| ParamPoly::symbol(syms.iter().find(|s| s.name() == n).unwrap().clone());
    let r = |pp: ParamPoly| ParamRat::from_poly(pp);
    let eq = |n: &str| named(sol.equalities.iter().map(|(s, v)| (s, v)), n).cloned();
    ensure!(eq("Γ1") == Some(ParamRat::zero()), "Γ1 = {:?}", eq("Γ1"));
    ensure!(eq("Γ2") == Some(ParamRat::zero()), "Γ2 = {:?}", eq("Γ2"));
    let d1 = eq("Δ1").ok_or("Δ1 not solved")?;
    let sum = &d1 + &r(p("Δ2"));
    ensure!(sum == ParamRat::integer(-3), "Δ1 + Δ2 = {sum}");
    // A constraint `c > 0` with `c` a positive multiple of `target`.
    let has = |target: &ParamRat| {
        sol.constraints.iter().any(|c| {
            c.relation == Relation::Positive
                && (&c.expr / target)
                    .constant_value()
                    .is_some_and(|k| k.is_positive())
        })
    };
    ensure!(has(&r(-&p("B2"))), "no B2 < 0 constraint");
    // A1 < (A2 + B1)^2 / (4*B2), as a positive multiple of the difference.
    let ab = &p("A2") + &p("B1");
    let bound = &r(&ab * &ab)
        .checked_div(&r(p("B2").scale(&q(4, 1))))
        .unwrap()
        - &r(p("A1"));
    ensure!(has(&bound), "no A1 < (A2 + B1)^2/(4*B2) constraint");
    Ok(format!(
        "{} equalities, {} constraints",
        sol.equalities.len(),
        sol.constraints.len()
    ))
}

fn rigid_runs() -> Result<Vec<(Vec<f64>, formalsos::simulate::SimTrace)>, String> {
    let (spec, fam) = rigid()?;
    let laws = fam.witness_laws.clone().ok_or("no witness laws")?;
    let l = spec.lyapunov.clone().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut out = Vec::new();
    while out.len() < 20 {
        let x0: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        if x0.iter().map(|v| v * v).sum::<f64>().sqrt() > 5.0 {
            continue;
        }
        let tr = simulate_closed_loop(&spec.system, &laws, &l, &x0, 20.0, &SimOptions::default())
            .map_err(|e| e.to_string())?;
        out.push((x0, tr));
    }
    Ok(out)
}

fn criterion_6_decrease() -> Outcome {
    for (x0, tr) in rigid_runs()? {
        let rep = check_decrease(&tr, DECREASE_TOLERANCE);
        ensure!(rep.passed(), "from {x0:?}: {:?}", rep.first_violation);
    }
    Ok("20 trajectories".into())
}

/// Expected to fail: Γ1 = Γ2 = 0 is forced, so every point of the x3 axis
/// is an equilibrium of the closed loop.
fn criterion_6_convergence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for (_, tr) in rigid_runs()? {
        let x = tr.final_state().unwrap();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(r);
        failures += (r >= 1e-3) as usize;
    }
    ensure!(
        failures == 0,
        "{failures}/20 runs end with |x(20)| >= 1e-3 (worst {worst:.4})"
    );
    Ok(format!("worst |x(20)| = {worst:e}"))
}

fn random_poly(rng: &mut ChaCha8Rng) -> (Polynomial, usize) {
    let n = rng.gen_range(1..=4usize);
    let mut p = Polynomial::zero();
    for _ in 0..rng.gen_range(1..=8) {
        let pairs: Vec<(u32, u32)> = (0..rng.gen_range(0..=4))
            .map(|_| (rng.gen_range(0..n as u32), 1))
            .collect();
        let c = Q::new(
            rng.gen_range(-9i64..=9).into(),
            rng.gen_range(1i64..=5).into(),
        );
        p.add_term(StateMonomial::from_pairs(pairs), ParamRat::constant(c));
    }
    (p, n)
}

fn criterion_7a_7b() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for _ in 0..200 {
        let (p, n) = random_poly(&mut rng);
        let f = formal_lf(&p, n).map_err(|e| e.to_string())?;
        ensure!((&f.expand() - &p).is_zero(), "nonzero residual for {p}");
        ensure!(
            f.trace.windows(2).all(|w| w[1] < w[0]),
            "maxterm did not descend for {p}"
        );
    }
    Ok("200 polynomials, zero residual, strict descent".into())
}

fn quadratic_forms(seed: u64, count: usize) -> Vec<(Vec<Vec<Q>>, Polynomial)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(2..=4);
            let b: Vec<Vec<Q>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| Q::from_integer(rng.gen_range(-3i64..=3).into()))
                        .collect()
                })
                .collect();
            let m: Vec<Vec<Q>> = if rng.gen_bool(0.5) {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| (0..n).map(|k| &b[k][i] * &b[k][j]).sum())
                            .collect()
                    })
                    .collect()
            } else {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                if i <= j {
                                    b[i][j].clone()
                                } else {
                                    b[j][i].clone()
                                }
                            })
                            .collect()
                    })
                    .collect()
            };
            let mut p = Polynomial::zero();
            for i in 0..n {
                for j in 0..n {
                    let mono = StateMonomial::from_pairs([(i as u32, 1), (j as u32, 1)]);
                    p.add_term(mono, ParamRat::constant(m[i][j].clone()));
                }
            }
            (m, p)
        })
        .collect()
}

fn det(mut m: Vec<Vec<Q>>) -> Q {
    let n = m.len();
    let mut d = Q::from_integer(1.into());
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= &m[c][c];
        for r in c + 1..n {
            let f = &m[r][c] / &m[c][c];
            for k in c..n {
                let v = &f * &m[c][k];
                m[r][k] -= v;
            }
        }
    }
    d
}

fn psd(m: &[Vec<Q>]) -> bool {
    let n = m.len();
    (1u32..1 << n).all(|mask| {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        !det(idx
            .iter()
            .map(|&i| idx.iter().map(|&j| m[i][j].clone()).collect())
            .collect())
        .is_negative()
    })
}

fn criterion_7c_7d() -> (Outcome, Outcome) {
    let mut certified = 0;
    let mut soundness = Ok(());
    let mut oracle = Ok(());
    for (i, (m, p)) in quadratic_forms(72, 100).into_iter().enumerate() {
        let Ok(PosOutcome::Certified(c)) = pos_check(&p, m.len(), &[], &SolveOptions::default())
        else {
            continue;
        };
        certified += 1;
        if !psd(&m) && oracle.is_ok() {
            oracle = Err(format!("certified a non-PSD form {p}"));
        }
        match verify_witness(&p, &c.factorization, &c.solution, 1000, i as u64) {
            Ok(r) if r.passed() && r.min_value >= -1e-9 => {}
            other if soundness.is_ok() => soundness = Err(format!("{p}: {other:?}")),
            _ => {}
        }
    }
    (
        soundness.map(|_| format!("{certified} certificates, 1000 samples each")),
        oracle.map(|_| format!("100 forms, {certified} certified, all PSD")),
    )
}

fn criterion_7e() -> Outcome {
    let t = SymbolTable::with_vars(&["x".into()]);
    let sys = PolySystem::new(
        vec!["x".into()],
        vec![],
        vec![parse_poly("-x", &t).unwrap()],
    )
    .map_err(|e| e.to_string())?;
    let l = parse_poly("x^2", &t).unwrap();
    let err = |dt: f64| {
        let tr = simulate_closed_loop(
            &sys,
            &[],
            &l,
            &[1.0],
            1.0,
            &SimOptions {
                dt,
                ..SimOptions::default()
            },
        )
        .unwrap();
        (tr.final_state().unwrap()[0] - (-1f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    ensure!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    ensure!(err(1e-3) < 1e-8, "x(1) error {}", err(1e-3));
    Ok(format!("error ratio {ratio:.3}"))
}

fn criterion_7f() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(76);
    let mut t = SymbolTable::with_vars(&["x1".into(), "x2".into(), "x3".into()]);
    declare_params(&mut t, &["a".into(), "b".into()], Role::FeedbackParam);
    let syms: Vec<Symbol> = t.params().cloned().collect();
    for _ in 0..500 {
        let mut p = Polynomial::zero();
        for _ in 0..rng.gen_range(0..=6) {
            let pairs: Vec<(u32, u32)> = (0..rng.gen_range(0..=3))
                .map(|_| (rng.gen_range(0..3), rng.gen_range(1..=3)))
                .collect();
            let mut num = ParamPoly::constant(Q::new(
                rng.gen_range(-20i64..=20).into(),
                rng.gen_range(1i64..=9).into(),
            ));
            if rng.gen_bool(0.4) {
                num = &num
                    + &ParamPoly::symbol(syms[rng.gen_range(0..2)].clone())
                        .pow(rng.gen_range(1..=2));
            }
            let c = if rng.gen_bool(0.2) {
                ParamRat::new(
                    num,
                    &ParamPoly::symbol(syms[rng.gen_range(0..2)].clone()) + &ParamPoly::integer(1),
                )
                .unwrap()
            } else {
                ParamRat::from_poly(num)
            };
            p.add_term(StateMonomial::from_pairs(pairs), c);
        }
        let text = p.to_string();
        let back = parse_poly(&text, &t).map_err(|e| format!("{text}: {e}"))?;
        ensure!(back == p, "round trip changed {text}");
        ensure!(
            back.to_string() == text,
            "printing is not stable for {text}"
        );
    }
    Ok("500 polynomials".into())
}

fn criterion_8() -> Outcome {
    for expr in ["-x1^2", "x1*x2"] {
        let (code, out, _) = run_cli(&["positivity", "--expr", expr])?;
        ensure!(code == 1, "positivity {expr} exited {code}");
        ensure!(
            out.contains("no certificate found (inconclusive)"),
            "positivity {expr}: {out}"
        );
    }
    let csv = std::env::temp_dir().join(format!("formalsos-acceptance-{}.csv", std::process::id()));
    let (code, out, _) = run_cli(&[
        "simulate",
        &systems("example_3_2.json"),
        "--x0",
        "0.1,0.1",
        "--csv",
        csv.to_str().unwrap(),
    ])?;
    let _ = std::fs::remove_file(&csv);
    ensure!(code == 1, "simulate u=0 exited {code}");
    ensure!(out.contains("violation"), "simulate output: {out}");
    Ok("exit 1 on -x1^2, x1*x2 and the uncontrolled loop".into())
}

fn main() {
    let start = Instant::now();
    let (c7c, c7d) = criterion_7c_7d();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 factorization of 5x1 - 7x1x2 + 11x1x3", criterion_1()),
        ("2 rule evaluation (-2, 1, -1)", criterion_2()),
        ("3 three-square certificate", criterion_3()),
        (
            "4 V identity with u1 = x + y + xy/2 as stated",
            criterion_4_as_stated(),
        ),
        (
            "4 V identity with the family's A1 = 2",
            criterion_4_family(),
        ),
        ("5 two-state synthesis", criterion_5()),
        ("6 rigid body constraints", criterion_6_constraints()),
        (
            "6 rigid body decrease from 20 starts",
            criterion_6_decrease(),
        ),
        (
            "6 rigid body |x(20)| < 1e-3 from 20 starts",
            criterion_6_convergence(),
        ),
        (
            "7a/7b factorization round trip and descent",
            criterion_7a_7b(),
        ),
        ("7c certificate soundness sampling", c7c),
        ("7d quadratic-form oracle", c7d),
        ("7e RK4 order", criterion_7e()),
        ("7f parse/print round trip", criterion_7f()),
        ("8 negative controls", criterion_8()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{} passed, {failed} failed in {:.1?}",
        results.len() - failed,
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
