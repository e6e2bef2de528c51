use crate::error::Result;
use crate::problem::Problem;
use crate::sampling::{GeometricLaw, Rng, Stream};

use super::{Counters, Method, Recorder, RunOptions, RunTrace, SolverConfig};

/// State visible to an observer just before an inner update is applied.
#[derive(Debug)]
pub struct InnerStep<'a> {
    pub epoch: usize,
    /// Zero-based index within the epoch.
    pub t: usize,
    pub inner_len: usize,
    pub coordinate: usize,
    pub component: usize,
    /// `G = grad_j f(x_k) + (grad_j f_i(y) - grad_j f_i(x_k)) / (n q_ij)`.
    pub direction: f64,
    /// Increment added to `y_j`, i.e. `-h G / p_j`.
    pub step: f64,
    /// Current inner iterate `y_t`.
    pub y: &'a [f64],
    /// `A y_t`.
    pub residuals: &'a [f64],
    /// Epoch snapshot `x_k`.
    pub snapshot: &'a [f64],
    pub snapshot_value: f64,
    pub full_gradient: &'a [f64],
}

pub trait StepObserver {
    fn on_step(&mut self, step: &InnerStep<'_>);
}

impl<F: FnMut(&InnerStep<'_>)> StepObserver for F {
    fn on_step(&mut self, step: &InnerStep<'_>) {
        self(step)
    }
}

struct Silent;

impl StepObserver for Silent {
    fn on_step(&mut self, _: &InnerStep<'_>) {}
}

pub fn s2cd(problem: &Problem, config: &SolverConfig, options: &RunOptions) -> Result<RunTrace> {
    s2cd_observed(problem, config, options, &mut Silent)
}

/// S2CD with a hook called before every inner update.
pub fn s2cd_observed<O: StepObserver + ?Sized>(
    problem: &Problem,
    config: &SolverConfig,
    options: &RunOptions,
    observer: &mut O,
) -> Result<RunTrace> {
    config.validate(problem)?;
    let h = config.h;
    let law = GeometricLaw::new(config.m, config.mu_for_law(problem) * h)?;
    let mut pair_rng = Rng::with_stream(config.seed, Stream::Pairs);
    let mut len_rng = Rng::with_stream(config.seed, Stream::InnerLength);

    let lip = problem.lipschitz();
    let p = lip.p();
    let sampler = problem.sampler();
    let n = problem.n_components() as f64;
    let n_rows = problem.n_rows();

    let mut live = problem.new_cache(options.start(problem)?)?;
    let mut f_k = problem.value_from_residuals(live.residuals(), live.point());
    let mut recorder = Recorder::new(problem, options, f_k);
    recorder.guard(0, f_k)?;
    let mut counters = Counters::default();

    for epoch in 1..=config.epochs {
        problem.refresh(&mut live)?;
        let snapshot = live.clone();
        let full_gradient = problem.gradient_from_residuals(snapshot.residuals(), snapshot.point());
        counters.grad_evals += n_rows as u64;

        let inner_len = law.sample(&mut len_rng);
        for t in 0..inner_len {
            let draw = sampler.sample(&mut pair_rng);
            let (j, slot) = (draw.coordinate, draw.slot);
            let at_y = problem.partial_at_slot(slot, j, &live);
            let at_x = problem.partial_at_slot(slot, j, &snapshot);
            counters.partial_evals += 2 * problem.partial_cost(j);
            let direction = full_gradient[j] + (at_y - at_x) / (n * lip.q_slot(slot));
            let step = -h * direction / p[j];
            observer.on_step(&InnerStep {
                epoch,
                t,
                inner_len,
                coordinate: j,
                component: draw.component,
                direction,
                step,
                y: live.point(),
                residuals: live.residuals(),
                snapshot: snapshot.point(),
                snapshot_value: f_k,
                full_gradient: &full_gradient,
            });
            problem.apply_coordinate_step(&mut live, j, step)?;
            if !step.is_finite() || (t + 1) % n_rows == 0 {
                recorder.guard(epoch, problem.value_from_residuals(live.residuals(), live.point()))?;
            }
        }

        problem.refresh(&mut live)?;
        f_k = problem.value_from_residuals(live.residuals(), live.point());
        recorder.guard(epoch, f_k)?;
        counters.column_touches = live.column_touches();
        recorder.push(epoch, f_k, counters, inner_len as u64);
        log::debug!("s2cd epoch {epoch}: t = {inner_len}, f = {f_k:e}");
        if recorder.budget_spent(counters) {
            break;
        }
    }
    Ok(recorder.finish(Method::S2cd, Some(config.seed), live.into_point()))
}
