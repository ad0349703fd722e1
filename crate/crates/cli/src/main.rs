//! `formalsos` command-line front end.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use formalsos::feedback::{
    synthesize, synthesize_auto, FeedbackTemplate, LyapunovSpec, SynthesisOutcome,
};
use formalsos::formalfactor::formal_lf;
use formalsos::parser::{
    certificate_json, certificate_text, factorization_json, minted_symbol, no_certificate_json,
    parse_laws, parse_poly, parse_rational, parse_system, synthesis_json, synthesis_text,
    SymbolTable,
};
use formalsos::polyring::{Polynomial, Symbol, Q};
use formalsos::positivity::{pos_check, PosOutcome, SolveOptions};
use formalsos::simulate::{
    check_decrease, simulate_closed_loop, SimError, SimOptions, DECREASE_TOLERANCE,
};

#[derive(Parser)]
#[command(
    name = "formalsos",
    version,
    about = "Exact positivity certificates and feedback synthesis for polynomial systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the formal linear-like factorization of a polynomial.
    Factor(PolyArgs),
    /// Search for a sum-of-squares certificate of nonnegativity.
    Positivity(PositivityArgs),
    /// Synthesize a stabilizing polynomial feedback family.
    Synthesize(SynthesizeArgs),
    /// Integrate a closed loop and check that the Lyapunov function decreases.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct PolyArgs {
    /// File containing the polynomial.
    file: Option<PathBuf>,
    /// The polynomial, instead of a file.
    #[arg(long, conflicts_with = "file", allow_hyphen_values = true)]
    expr: Option<String>,
    /// Variable names in order (default: identifiers in natural order).
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    /// Names treated as decision parameters.
    #[arg(long, value_delimiter = ',')]
    params: Vec<String>,
    /// Names treated as fixed symbolic constants.
    #[arg(long, value_delimiter = ',')]
    constants: Vec<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SearchArgs {
    /// Seed for every randomized stage.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of branches explored by the solver.
    #[arg(long, default_value_t = 256)]
    branch_limit: usize,
    /// Value tried first for a parameter during witness search, as NAME=p/q.
    #[arg(long = "hint")]
    hints: Vec<String>,
}

#[derive(Args)]
struct PositivityArgs {
    #[command(flatten)]
    poly: PolyArgs,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// JSON system document.
    system: PathBuf,
    /// Search escalating templates up to this degree instead of the file's template.
    #[arg(long)]
    degree: Option<u32>,
    /// Lyapunov function overriding the document's (default: sum of squares of the states).
    #[arg(long, allow_hyphen_values = true)]
    lyapunov: Option<String>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON system document.
    system: PathBuf,
    /// JSON file with a `feedback` list (or `witness.feedback`); omitted means u = 0.
    #[arg(long)]
    feedback: Option<PathBuf>,
    /// Initial state, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    x0: Vec<f64>,
    #[arg(long, default_value_t = 20.0)]
    tfinal: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Abort when the state norm exceeds this bound.
    #[arg(long, default_value_t = 1e6)]
    bound: f64,
    #[arg(long, allow_hyphen_values = true)]
    lyapunov: Option<String>,
    /// Write the trace here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    /// Bad input: exit 2.
    #[error("{0}")]
    Invalid(String),
    /// A negative or inconclusive verdict, already reported: exit 1.
    #[error("no certificate or check failed")]
    Negative,
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| {
            if text.ends_with('\n') {
                Ok(())
            } else {
                out.write_all(b"\n")
            }
        })
        .map_err(invalid)
}

fn emit_json(v: &serde_json::Value) -> Result<(), CliError> {
    emit(&serde_json::to_string_pretty(v).map_err(invalid)?)
}

fn load_poly(a: &PolyArgs) -> Result<(Polynomial, SymbolTable), CliError> {
    let text = match (&a.expr, &a.file) {
        (Some(e), _) => e.clone(),
        (None, Some(f)) => read(f)?,
        (None, None) => return Err(invalid("give a polynomial file or --expr")),
    };
    let mut table = SymbolTable::infer(&text, &a.params, &a.constants).map_err(invalid)?;
    if !a.vars.is_empty() {
        let params: Vec<Symbol> = table.params().cloned().collect();
        table = SymbolTable::with_vars(&a.vars);
        for p in params {
            table.add_param(p);
        }
    }
    let p = parse_poly(&text, &table).map_err(invalid)?;
    Ok((p, table))
}

fn parse_hints(
    hints: &[String],
    resolve: impl Fn(&str) -> Option<Symbol>,
) -> Result<BTreeMap<Symbol, Q>, CliError> {
    let mut out = BTreeMap::new();
    for h in hints {
        let (name, value) = h
            .split_once('=')
            .ok_or_else(|| invalid(format!("hint '{h}' is not NAME=VALUE")))?;
        let s = resolve(name.trim())
            .ok_or_else(|| invalid(format!("unknown parameter '{}' in hint", name.trim())))?;
        let v = parse_rational(value)
            .ok_or_else(|| invalid(format!("hint '{h}': value is not a rational")))?;
        out.insert(s, v);
    }
    Ok(out)
}

fn cmd_factor(a: &PolyArgs) -> Result<(), CliError> {
    let (p, table) = load_poly(a)?;
    let f = formal_lf(&p, table.var_names().len()).map_err(invalid)?;
    match a.format {
        Format::Text => emit(&f.display(table.var_names()).to_string()),
        Format::Json => emit_json(&factorization_json(&f, table.var_names())),
    }
}

fn cmd_positivity(a: &PositivityArgs) -> Result<(), CliError> {
    let (p, table) = load_poly(&a.poly)?;
    let decision: Vec<Symbol> = a
        .poly
        .params
        .iter()
        .filter_map(|n| table.param(n).cloned())
        .collect();
    let hints = parse_hints(&a.search.hints, |n| {
        table.param(n).cloned().or_else(|| minted_symbol(n))
    })?;
    let opts = SolveOptions {
        branch_limit: a.search.branch_limit,
        seed: a.search.seed,
        hints,
        ..SolveOptions::default()
    };
    let names = table.var_names();
    match pos_check(&p, names.len(), &decision, &opts).map_err(invalid)? {
        PosOutcome::Certified(c) => match a.poly.format {
            Format::Text => emit(&certificate_text(&c, names)),
            Format::Json => emit_json(&certificate_json(&p, &c, names)),
        },
        PosOutcome::NoCertificate(e) => {
            match a.poly.format {
                Format::Text => emit(&e.to_string())?,
                Format::Json => emit_json(&no_certificate_json(&e))?,
            }
            Err(CliError::Negative)
        }
    }
}

fn lyapunov_for(
    text: Option<&str>,
    doc: Option<&Polynomial>,
    states: &[String],
) -> Result<Polynomial, CliError> {
    match (text, doc) {
        (Some(t), _) => parse_poly(t, &SymbolTable::with_vars(states)).map_err(invalid),
        (None, Some(l)) => Ok(l.clone()),
        (None, None) => Ok(LyapunovSpec::sum_of_squares(states.len())
            .function()
            .clone()),
    }
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Result<(), CliError> {
    let spec = parse_system(&read(&a.system)?).map_err(invalid)?;
    let sys = &spec.system;
    if sys.m() == 0 {
        return Err(invalid("the system has no inputs to synthesize"));
    }
    let l = lyapunov_for(
        a.lyapunov.as_deref(),
        spec.lyapunov.as_ref(),
        sys.state_names(),
    )?;
    let l = LyapunovSpec::new(l, sys.n(), a.search.seed).map_err(invalid)?;
    let mut opts = SolveOptions {
        branch_limit: a.search.branch_limit,
        seed: a.search.seed,
        ..SolveOptions::default()
    };
    let extra = |t: &FeedbackTemplate| {
        let params = t.params();
        parse_hints(&a.search.hints, |n| {
            params
                .iter()
                .find(|s| s.name() == n)
                .cloned()
                .or_else(|| minted_symbol(n))
        })
    };
    let out = match (&spec.template, a.degree) {
        (Some(t), None) => {
            opts.hints = spec.hints_for(t);
            opts.hints.extend(extra(t)?);
            synthesize(sys, &l, t, &opts).map_err(invalid)?
        }
        (_, degree) => {
            if !a.search.hints.is_empty() {
                return Err(invalid("--hint needs the document's feedback_template"));
            }
            let degree = degree.or(spec.degree).unwrap_or(1);
            synthesize_auto(sys, &l, degree, &opts).map_err(invalid)?.1
        }
    };
    match out {
        SynthesisOutcome::Stabilized(fam) => match a.format {
            Format::Text => emit(&synthesis_text(sys, &fam)),
            Format::Json => emit_json(&synthesis_json(sys, &fam)),
        },
        SynthesisOutcome::NoStabilizer(e) => {
            match a.format {
                Format::Text => emit(&e.to_string())?,
                Format::Json => emit_json(&no_certificate_json(&e))?,
            }
            Err(CliError::Negative)
        }
    }
}

fn feedback_laws(path: &Path) -> Result<Vec<String>, CliError> {
    let v: serde_json::Value = serde_json::from_str(&read(path)?).map_err(invalid)?;
    let list = v
        .get("feedback")
        .or_else(|| v.get("witness").and_then(|w| w.get("feedback")))
        .and_then(|f| f.as_array())
        .ok_or_else(|| invalid(format!("{}: no 'feedback' list", path.display())))?;
    list.iter()
        .map(|e| {
            e.as_str()
                .map(str::to_string)
                .ok_or_else(|| invalid("feedback entries must be strings"))
        })
        .collect()
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let spec = parse_system(&read(&a.system)?).map_err(invalid)?;
    let sys = &spec.system;
    let laws = match &a.feedback {
        Some(p) => parse_laws(&feedback_laws(p)?, sys.state_names()).map_err(invalid)?,
        None => Vec::new(),
    };
    let l = lyapunov_for(
        a.lyapunov.as_deref(),
        spec.lyapunov.as_ref(),
        sys.state_names(),
    )?;
    let opts = SimOptions {
        dt: a.dt,
        divergence_bound: a.bound,
    };
    let (trace, diverged) = match simulate_closed_loop(sys, &laws, &l, &a.x0, a.tfinal, &opts) {
        Ok(t) => (t, None),
        Err(SimError::Diverged {
            partial,
            time,
            norm,
            bound,
        }) => (
            *partial,
            Some(format!(
                "diverged at t = {time}: |x| = {norm:e} exceeds {bound:e}"
            )),
        ),
        Err(e) => return Err(invalid(e)),
    };
    let csv_to_stdout = a.csv.is_none();
    match &a.csv {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path).map_err(invalid)?);
            trace
                .write_csv(&mut f, sys.state_names(), sys.input_names())
                .and_then(|_| f.flush())
                .map_err(invalid)?;
        }
        None => trace
            .write_csv(
                &mut io::stdout().lock(),
                sys.state_names(),
                sys.input_names(),
            )
            .map_err(invalid)?,
    }
    let report = check_decrease(&trace, DECREASE_TOLERANCE);
    let mut lines = Vec::new();
    match &report.first_violation {
        None => lines.push(format!(
            "decrease check: pass ({} steps, max increase {:e})",
            trace.len().saturating_sub(1),
            report.max_increase
        )),
        Some(v) => lines.push(format!(
            "decrease check: violation at t = {} (step {}): L went from {} to {}",
            v.time, v.step, v.before, v.after
        )),
    }
    if let Some(x) = trace.final_state() {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        lines.push(format!(
            "final |x| = {norm:e} at t = {}",
            trace.times.last().unwrap()
        ));
    }
    if let Some(d) = &diverged {
        lines.push(d.clone());
    }
    let text = lines.join("\n");
    if csv_to_stdout {
        eprintln!("{text}");
    } else {
        emit(&text)?;
    }
    if diverged.is_some() || !report.passed() {
        return Err(CliError::Negative);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Factor(a) => cmd_factor(a),
        Command::Positivity(a) => cmd_positivity(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Negative) => ExitCode::from(1),
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
