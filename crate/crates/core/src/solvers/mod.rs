//! S2CD and the comparison baselines, sharing one trace format and one set
//! of cost counters.
//!
//! Counters are in per-example units: `grad_evals` counts `grad f_i`
//! evaluations and `partial_evals` counts `grad_j f_i` evaluations, so one
//! effective pass is `n` gradient evaluations or `n * mean_row_support`
//! partial evaluations.

mod baselines;
mod s2cd;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::Problem;

pub use baselines::{cd_nonuniform, cd_nonuniform_observed, gd, s2gd, sgd, StepSchedule};
pub use s2cd::{s2cd, s2cd_observed, InnerStep, StepObserver};

/// Divergence guard: abort once `f` exceeds this multiple of `f(x_0)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    S2cd,
    Gd,
    Sgd,
    Cd,
    S2gd,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::S2cd, Method::Gd, Method::Sgd, Method::Cd, Method::S2gd];

    pub fn name(self) -> &'static str {
        match self {
            Method::S2cd => "s2cd",
            Method::Gd => "gd",
            Method::Sgd => "sgd",
            Method::Cd => "cd",
            Method::S2gd => "s2gd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL.iter().copied().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method '{s}'; valid methods: {}", valid.join(", "))
        })
    }
}

/// S2CD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stepsize `h`.
    pub h: f64,
    /// Maximum inner steps per epoch.
    pub m: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Target accuracy the parameters were derived from, if any.
    pub epsilon: Option<f64>,
    /// Strong-convexity bound used by the inner-loop law; `None` means the
    /// problem's `mu`. Zero gives a uniform inner-loop length.
    pub mu_lower_bound: Option<f64>,
}

impl SolverConfig {
    pub fn new(h: f64, m: usize, epochs: usize, seed: u64) -> Self {
        Self { h, m, epochs, seed, epsilon: None, mu_lower_bound: None }
    }

    pub fn mu_for_law(&self, problem: &Problem) -> f64 {
        self.mu_lower_bound.unwrap_or(problem.mu())
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("stepsize h = {} must be positive", self.h)));
        }
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        let mu = self.mu_for_law(problem);
        if !(mu >= 0.0) || mu > problem.mu() {
            return Err(invalid(format!("mu lower bound {mu} must lie in [0, {}]", problem.mu())));
        }
        let mu_h = mu * self.h;
        if !(0.0..1.0).contains(&mu_h) {
            return Err(invalid(format!("mu*h = {mu_h} must lie in [0, 1)")));
        }
        Ok(())
    }

    /// Additionally requires `h < 1/(2 L_hat)`, the range where the epoch
    /// contraction bound applies.
    pub fn validate_theory(&self, problem: &Problem) -> Result<()> {
        self.validate(problem)?;
        if self.h >= 0.5 / problem.l_hat() {
            return Err(invalid(format!(
                "h = {} must be below 1/(2 L_hat) = {}",
                self.h,
                0.5 / problem.l_hat()
            )));
        }
        Ok(())
    }
}

/// Parameters derived from target accuracy `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyParams {
    pub epochs: usize,
    pub delta: f64,
    pub h: f64,
    pub m: usize,
}

/// `k = ceil(ln(1/eps))`, `Delta = eps^(1/k)`, `h = Delta / ((4 + 2 Delta) L_hat)`,
/// `m = ceil((4/Delta + 2) ln(2/Delta + 2) kappa_hat)`.
pub fn accuracy_params(l_hat: f64, mu: f64, epsilon: f64) -> Result<AccuracyParams> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if !(mu > 0.0 && l_hat > 0.0 && l_hat.is_finite()) {
        return Err(invalid("parameter selection needs mu > 0 and finite L_hat"));
    }
    let log_inv = (1.0 / epsilon).ln();
    // snap values within rounding of an integer, e.g. epsilon = exp(-3)
    let nearest = log_inv.round();
    let k_real = if (log_inv - nearest).abs() <= 1e-12 * nearest.max(1.0) { nearest } else { log_inv.ceil() };
    let epochs = k_real as usize;
    if epochs == 0 {
        return Err(invalid("epsilon too close to 1: zero epochs"));
    }
    let delta = epsilon.powf(1.0 / epochs as f64);
    let h = delta / ((4.0 + 2.0 * delta) * l_hat);
    let kappa_hat = l_hat / mu;
    let m = ((4.0 / delta + 2.0) * (2.0 / delta + 2.0).ln() * kappa_hat).ceil();
    if !(m >= 1.0 && m < 1e12) {
        return Err(invalid(format!("inner-loop bound m = {m} is out of range")));
    }
    Ok(AccuracyParams { epochs, delta, h, m: m as usize })
}

/// S2CD configuration for accuracy `epsilon` on `problem`.
pub fn default_params(problem: &Problem, epsilon: f64, seed: u64) -> Result<SolverConfig> {
    let c = accuracy_params(problem.l_hat(), problem.mu(), epsilon)?;
    Ok(SolverConfig {
        h: c.h,
        m: c.m,
        epochs: c.epochs,
        seed,
        epsilon: Some(epsilon),
        mu_lower_bound: None,
    })
}

/// Per-epoch contraction factor of the expected suboptimality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalRate {
    pub rho_epoch: f64,
    /// Same bound with `L_hat - mu / max_s p_s` in place of `L_hat` in the
    /// numerator of the second term.
    pub rho_epoch_sharp: f64,
}

impl TheoreticalRate {
    pub fn guarantees_convergence(&self) -> bool {
        self.rho_epoch > 0.0 && self.rho_epoch < 1.0
    }
}

pub fn theoretical_rate_from(l_hat: f64, mu: f64, max_p: f64, h: f64, m: usize) -> Result<TheoreticalRate> {
    if !(h > 0.0 && h < 0.5 / l_hat) {
        return Err(invalid(format!("h = {h} outside (0, 1/(2 L_hat)) = (0, {})", 0.5 / l_hat)));
    }
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let contraction = (1.0 - mu * h).powi(m.min(i32::MAX as usize) as i32);
    let denom = 1.0 - 2.0 * l_hat * h;
    let first = contraction / ((1.0 - contraction) * denom);
    let rho_epoch = first + 2.0 * l_hat * h / denom;
    let rho_epoch_sharp = first + 2.0 * (l_hat - mu / max_p) * h / denom;
    Ok(TheoreticalRate { rho_epoch, rho_epoch_sharp })
}

pub fn theoretical_rate(problem: &Problem, h: f64, m: usize) -> Result<TheoreticalRate> {
    theoretical_rate_from(problem.l_hat(), problem.mu(), problem.lipschitz().max_p(), h, m)
}

/// Options common to every solver.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Starting point; zero when absent.
    pub x0: Option<Vec<f64>>,
    /// Reference optimum used to fill the `gap` column.
    pub f_star: Option<f64>,
    /// Stop at the first record boundary where this many effective passes
    /// have been spent.
    pub max_passes: Option<f64>,
}

impl RunOptions {
    pub fn with_f_star(f_star: f64) -> Self {
        Self { f_star: Some(f_star), ..Self::default() }
    }

    fn start(&self, problem: &Problem) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(x) if x.len() != problem.d() => {
                Err(Error::DimensionMismatch { expected: problem.d(), actual: x.len() })
            }
            Some(x) => Ok(x.clone()),
            None => Ok(vec![0.0; problem.d()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub f: f64,
    pub gap: Option<f64>,
    /// Cumulative counters.
    pub grad_evals: u64,
    pub partial_evals: u64,
    pub column_touches: u64,
    /// Stochastic steps taken in this epoch.
    pub inner_steps: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: Method,
    pub seed: Option<u64>,
    pub records: Vec<EpochRecord>,
    pub final_point: Vec<f64>,
}

impl RunTrace {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("trace has at least the initial record")
    }

    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunTrace {
        let mut t = self.clone();
        for r in &mut t.records {
            r.wall_ms = 0.0;
        }
        t
    }
}

/// Effective passes: `grad_evals / n + partial_evals / (n * mean_row_support)`.
pub fn effective_passes(problem: &Problem, grad_evals: u64, partial_evals: u64) -> f64 {
    let n = problem.n_rows() as f64;
    let dbar = problem.dataset().mean_row_support().max(f64::MIN_POSITIVE);
    grad_evals as f64 / n + partial_evals as f64 / (n * dbar)
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Counters {
    pub grad_evals: u64,
    pub partial_evals: u64,
    pub column_touches: u64,
}

/// Shared record keeping: timing, gap, guard, budget.
pub(crate) struct Recorder<'a> {
    problem: &'a Problem,
    start: Instant,
    f_star: Option<f64>,
    f0: f64,
    max_passes: Option<f64>,
    records: Vec<EpochRecord>,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a Problem, options: &RunOptions, f0: f64) -> Self {
        let mut rec = Self {
            problem,
            start: Instant::now(),
            f_star: options.f_star,
            f0,
            max_passes: options.max_passes,
            records: Vec::new(),
        };
        rec.push(0, f0, Counters::default(), 0);
        rec
    }

    pub fn guard(&self, epoch: usize, f: f64) -> Result<()> {
        let threshold = DIVERGENCE_FACTOR * self.f0;
        if !f.is_finite() || (self.f0 > 0.0 && f > threshold) {
            return Err(Error::Diverged { epoch, value: f, threshold });
        }
        Ok(())
    }

    pub fn push(&mut self, epoch: usize, f: f64, c: Counters, inner_steps: u64) {
        self.records.push(EpochRecord {
            epoch,
            f,
            gap: self.f_star.map(|fs| f - fs),
            grad_evals: c.grad_evals,
            partial_evals: c.partial_evals,
            column_touches: c.column_touches,
            inner_steps,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
    }

    pub fn budget_spent(&self, c: Counters) -> bool {
        self.max_passes
            .is_some_and(|b| effective_passes(self.problem, c.grad_evals, c.partial_evals) >= b)
    }

    pub fn finish(self, method: Method, seed: Option<u64>, final_point: Vec<f64>) -> RunTrace {
        RunTrace { method, seed, records: self.records, final_point }
    }
}
