use rayon::prelude::*;

use s2cd::diagnostics::solve_reference;
use s2cd::solvers::{
    cd_nonuniform, accuracy_params, default_params, effective_passes, gd, s2cd, s2gd, sgd, Method, RunOptions,
    RunTrace, SolverConfig, StepSchedule,
};
use s2cd::Problem;

use crate::error::{HarnessError, Result};
use crate::spec::{fingerprint, ExperimentSpec};
use crate::trace::{EpochLine, Header, MethodPlan, TraceFile};

/// Tolerance on `||grad f||` for the reference optimum in trace headers.
pub const REFERENCE_TOL: f64 = 1e-10;
/// Epoch cap when a pass budget, not an epoch count, ends the run.
const BUDGETED_EPOCHS: usize = 1_000_000;
pub const THREADS_ENV: &str = "S2CD_THREADS";

/// Worst-case effective passes of the S2CD plan: every epoch at `t = m`.
fn s2cd_nominal_passes(problem: &Problem, config: &SolverConfig) -> f64 {
    let n = problem.n_rows() as f64;
    let dbar = problem.dataset().mean_row_support();
    config.epochs as f64 * (1.0 + 2.0 * config.m as f64 / (n * dbar))
}

fn s2cd_config(problem: &Problem, spec: &ExperimentSpec, seed: u64) -> Result<SolverConfig> {
    let mut config = default_params(problem, spec.epsilon, seed)?;
    if let Some(h) = spec.overrides.h {
        config.h = h;
    }
    if let Some(m) = spec.overrides.m {
        config.m = m;
    }
    match (spec.overrides.epochs, spec.budget_passes) {
        (Some(k), _) => config.epochs = k,
        (None, Some(_)) => config.epochs = BUDGETED_EPOCHS,
        (None, None) => {}
    }
    Ok(config)
}

/// Resolves every method's parameters before anything runs.
pub fn plan(problem: &Problem, spec: &ExperimentSpec) -> Result<Vec<MethodPlan>> {
    let s2cd_base = s2cd_config(problem, spec, 0)?;
    s2cd_base.validate(problem).map_err(|e| HarnessError::usage(e.to_string()))?;
    let budget = spec.budget_passes.unwrap_or_else(|| {
        let nominal = SolverConfig { epochs: spec.overrides.epochs.unwrap_or(s2cd_base.epochs), ..s2cd_base.clone() };
        s2cd_nominal_passes(problem, &nominal)
    });
    let n = problem.n_rows() as f64;
    let nnz = problem.dataset().matrix().nnz() as f64;
    spec.methods
        .iter()
        .map(|&method| {
            let plan = match method {
                Method::S2cd => MethodPlan {
                    method,
                    h: Some(s2cd_base.h),
                    m: Some(s2cd_base.m),
                    epochs: Some(s2cd_base.epochs),
                    iters: None,
                },
                Method::Gd => MethodPlan {
                    method,
                    h: Some(1.0 / problem.l_avg()),
                    m: None,
                    epochs: None,
                    iters: Some(budget.ceil() as usize),
                },
                Method::Sgd => MethodPlan {
                    method,
                    h: Some(1.0 / problem.l_max()),
                    m: None,
                    epochs: None,
                    iters: Some((budget * n).ceil() as usize),
                },
                Method::Cd => {
                    let collapsed = problem.collapse()?;
                    let p = collapsed.lipschitz().p();
                    let cost: f64 = (0..problem.d()).map(|j| p[j] * problem.dataset().col(j).len() as f64).sum();
                    MethodPlan {
                        method,
                        h: Some(problem.d() as f64 / collapsed.l_hat()),
                        m: None,
                        epochs: None,
                        iters: Some((budget * nnz / cost).ceil() as usize),
                    }
                }
                Method::S2gd => {
                    let c = accuracy_params(problem.l_max(), problem.mu(), spec.epsilon)?;
                    let epochs = if spec.budget_passes.is_some() { BUDGETED_EPOCHS } else { c.epochs };
                    MethodPlan { method, h: Some(c.h), m: Some(c.m), epochs: Some(epochs), iters: None }
                }
            };
            Ok(plan)
        })
        .collect()
}

fn execute(problem: &Problem, spec: &ExperimentSpec, plan: &MethodPlan, seed: u64, f_star: f64) -> Result<RunTrace> {
    let options = RunOptions { x0: None, f_star: Some(f_star), max_passes: spec.budget_passes };
    let h = plan.h.unwrap_or_default();
    let trace = match plan.method {
        Method::S2cd => s2cd(problem, &s2cd_config(problem, spec, seed)?, &options)?,
        Method::Gd => gd(problem, h, plan.iters.unwrap_or(1), &options)?,
        Method::Sgd => {
            // eta_t = 1 / (L_max + mu t)
            let schedule = StepSchedule::InverseTime { initial: h, decay: problem.mu() * h };
            sgd(problem, schedule, plan.iters.unwrap_or(1), seed, &options)?
        }
        Method::Cd => cd_nonuniform(problem, h, plan.iters.unwrap_or(1), seed, &options)?,
        Method::S2gd => s2gd(problem, h, plan.m.unwrap_or(1), plan.epochs.unwrap_or(1), seed, &options)?,
    };
    Ok(trace)
}

/// Thread count from `S2CD_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(HarnessError::usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every `(method, seed)` pair and assembles the trace. Runs execute in
/// parallel; lines are emitted in method order, then seed order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<TraceFile> {
    spec.validate()?;
    let threads = thread_cap()?;
    let problem = spec.build_problem()?;
    let plans = plan(&problem, spec)?;
    let reference = solve_reference(&problem, REFERENCE_TOL)?;
    let f0 = problem.value(&vec![0.0; problem.d()])?;

    let jobs: Vec<(&MethodPlan, u64)> =
        plans.iter().flat_map(|p| spec.seeds.iter().map(move |&s| (p, s))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| HarnessError::usage(e.to_string()))?;
    let results: Vec<Result<RunTrace>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(plan, seed)| execute(&problem, spec, plan, seed, reference.f_star))
            .collect()
    });

    let mut epochs = Vec::new();
    for ((plan, seed), result) in jobs.iter().zip(results) {
        let trace = result?;
        for r in &trace.records {
            let passes = effective_passes(&problem, r.grad_evals, r.partial_evals);
            epochs.push(EpochLine::from_record(plan.method, Some(*seed), passes, r));
        }
    }
    let header = Header {
        fingerprint: fingerprint(&problem),
        source: spec.source.clone(),
        n: problem.n_rows(),
        d: problem.d(),
        nnz: problem.dataset().matrix().nnz(),
        mean_row_support: problem.dataset().mean_row_support(),
        loss: problem.loss(),
        mu: problem.mu(),
        reg_mode: problem.reg_mode(),
        l_hat: problem.l_hat(),
        kappa_hat: problem.kappa_hat(),
        kappa_avg: problem.kappa_avg(),
        kappa_max: problem.kappa_max(),
        f_star: reference.f_star,
        f0,
        reference_grad_norm: reference.grad_norm,
        spec: spec.clone(),
        plans,
    };
    Ok(TraceFile { header, epochs })
}

/// [`run_experiment`], then writes the trace to `spec.out`.
pub fn run(spec: &ExperimentSpec) -> Result<TraceFile> {
    let trace = run_experiment(spec)?;
    trace.write_to(&spec.out)?;
    Ok(trace)
}
