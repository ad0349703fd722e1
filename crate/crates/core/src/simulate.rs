//! Fixed-step RK4 integration of closed loops in double precision.

use std::io::{self, Write};

use thiserror::Error;

use crate::feedback::PolySystem;
use crate::polyring::{q_to_f64, Polynomial};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{what} has symbolic coefficients: {poly}")]
    NotNumeric { what: String, poly: String },
    #[error("expected {expected} {what}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} uses variables outside the states")]
    NotStateOnly { what: String },
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("non-finite state after t = {last_good_time}")]
    NonFinite { last_good_time: f64 },
    #[error("diverged at t = {time}: |x| = {norm:e} exceeds {bound:e}")]
    Diverged {
        time: f64,
        norm: f64,
        bound: f64,
        /// Trace up to the last state inside the bound.
        partial: Box<SimTrace>,
    },
}

/// A polynomial with `f64` coefficients, ready for fast evaluation.
#[derive(Clone, Debug)]
struct Compiled(Vec<(f64, Vec<(usize, i32)>)>);

impl Compiled {
    fn new(p: &Polynomial, what: &str) -> Result<Self, SimError> {
        let terms = p.numeric_terms().ok_or_else(|| SimError::NotNumeric {
            what: what.to_string(),
            poly: p.to_string(),
        })?;
        Ok(Compiled(
            terms
                .into_iter()
                .map(|(m, c)| {
                    let pw = m
                        .pairs()
                        .iter()
                        .map(|(v, e)| (*v as usize, *e as i32))
                        .collect();
                    (q_to_f64(&c), pw)
                })
                .collect(),
        ))
    }

    fn eval(&self, z: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(c, pw)| pw.iter().fold(*c, |acc, (v, e)| acc * z[*v].powi(*e)))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub divergence_bound: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 1e-3,
            divergence_bound: 1e6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub lyapunov: Vec<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// CSV with header `t,<states>,<inputs>,L`, one row per step.
    pub fn write_csv(
        &self,
        out: &mut impl Write,
        states: &[String],
        inputs: &[String],
    ) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(states.iter().cloned());
        header.extend(inputs.iter().cloned());
        header.push("L".into());
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.states[k].iter().map(f64::to_string));
            row.extend(self.inputs[k].iter().map(f64::to_string));
            row.push(self.lyapunov[k].to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct ClosedLoop {
    n: usize,
    rhs: Vec<Compiled>,
    laws: Vec<Compiled>,
    lyapunov: Compiled,
}

impl ClosedLoop {
    fn inputs(&self, x: &[f64]) -> Vec<f64> {
        self.laws.iter().map(|a| a.eval(x)).collect()
    }

    fn field(&self, x: &[f64], z: &mut Vec<f64>) -> Vec<f64> {
        z.clear();
        z.extend_from_slice(x);
        for a in &self.laws {
            let u = a.eval(x);
            z.push(u);
        }
        self.rhs.iter().map(|f| f.eval(z)).collect()
    }

    fn rk4(&self, x: &[f64], h: f64, z: &mut Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let shift = |k: &[f64], s: f64| (0..n).map(|i| x[i] + s * k[i]).collect::<Vec<_>>();
        let k1 = self.field(x, z);
        let k2 = self.field(&shift(&k1, h / 2.0), z);
        let k3 = self.field(&shift(&k2, h / 2.0), z);
        let k4 = self.field(&shift(&k3, h), z);
        (0..n)
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }
}

/// Integrates `x' = f(x, a(x))` from `x0` over `[0, t_final]`.
///
/// `laws` are numeric polynomials in the states, one per input; an empty
/// slice means `u = 0`.
pub fn simulate_closed_loop(
    sys: &PolySystem,
    laws: &[Polynomial],
    lyapunov: &Polynomial,
    x0: &[f64],
    t_final: f64,
    opts: &SimOptions,
) -> Result<SimTrace, SimError> {
    let (n, m) = (sys.n(), sys.m());
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(SimError::BadStep(opts.dt));
    }
    if x0.len() != n {
        return Err(SimError::Dimension {
            what: "initial states",
            expected: n,
            got: x0.len(),
        });
    }
    let zero = Polynomial::zero();
    let laws: Vec<&Polynomial> = if laws.is_empty() {
        vec![&zero; m]
    } else {
        laws.iter().collect()
    };
    if laws.len() != m {
        return Err(SimError::Dimension {
            what: "feedback laws",
            expected: m,
            got: laws.len(),
        });
    }
    let state_only = |p: &Polynomial| p.vars().iter().all(|v| (*v as usize) < n);
    for (j, a) in laws.iter().enumerate() {
        if !state_only(a) {
            return Err(SimError::NotStateOnly {
                what: format!("feedback law {}", j + 1),
            });
        }
    }
    if !state_only(lyapunov) {
        return Err(SimError::NotStateOnly {
            what: "Lyapunov function".into(),
        });
    }
    let cl = ClosedLoop {
        n,
        rhs: sys
            .rhs()
            .iter()
            .enumerate()
            .map(|(i, f)| Compiled::new(f, &format!("right-hand side {}", i + 1)))
            .collect::<Result<_, _>>()?,
        laws: laws
            .iter()
            .enumerate()
            .map(|(j, a)| Compiled::new(a, &format!("feedback law {}", j + 1)))
            .collect::<Result<_, _>>()?,
        lyapunov: Compiled::new(lyapunov, "Lyapunov function")?,
    };

    let steps = ((t_final / opts.dt) - 1e-9).ceil().max(0.0) as usize;
    let mut trace = SimTrace::default();
    let record = |trace: &mut SimTrace, t: f64, x: Vec<f64>| {
        trace.times.push(t);
        trace.inputs.push(cl.inputs(&x));
        trace.lyapunov.push(cl.lyapunov.eval(&x));
        trace.states.push(x);
    };
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite {
            last_good_time: 0.0,
        });
    }
    record(&mut trace, 0.0, x0.to_vec());
    let mut x = x0.to_vec();
    let mut z = Vec::with_capacity(n + m);
    for k in 0..steps {
        let t = k as f64 * opts.dt;
        let t_next = if k + 1 == steps {
            t_final
        } else {
            (k + 1) as f64 * opts.dt
        };
        let next = cl.rk4(&x, t_next - t, &mut z);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { last_good_time: t });
        }
        let r = norm(&next);
        if r > opts.divergence_bound {
            return Err(SimError::Diverged {
                time: t_next,
                norm: r,
                bound: opts.divergence_bound,
                partial: Box::new(trace),
            });
        }
        record(&mut trace, t_next, next.clone());
        x = next;
    }
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecreaseViolation {
    pub step: usize,
    pub time: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecreaseReport {
    pub tolerance: f64,
    pub max_increase: f64,
    pub first_violation: Option<DecreaseViolation>,
}

impl DecreaseReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub const DECREASE_TOLERANCE: f64 = 1e-7;

/// Checks `L(t_{k+1}) <= L(t_k) + tolerance` along the trace.
pub fn check_decrease(trace: &SimTrace, tolerance: f64) -> DecreaseReport {
    let mut max_increase = f64::NEG_INFINITY;
    let mut first_violation = None;
    for (k, w) in trace.lyapunov.windows(2).enumerate() {
        let inc = w[1] - w[0];
        max_increase = max_increase.max(inc);
        if first_violation.is_none() && (inc.is_nan() || inc > tolerance) {
            first_violation = Some(DecreaseViolation {
                step: k + 1,
                time: trace.times[k + 1],
                before: w[0],
                after: w[1],
            });
        }
    }
    DecreaseReport {
        tolerance,
        max_increase: if trace.len() < 2 { 0.0 } else { max_increase },
        first_violation,
    }
}
