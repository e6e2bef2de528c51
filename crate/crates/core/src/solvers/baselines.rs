use crate::error::{invalid, Result};
use crate::problem::{Layout, Problem, RegMode};
use crate::sampling::{DiscreteDistribution, GeometricLaw, Rng, Stream};

use super::{Counters, Method, Recorder, RunOptions, RunTrace};

/// SGD stepsize schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `initial / (1 + decay * t)`.
    InverseTime { initial: f64, decay: f64 },
}

impl StepSchedule {
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseTime { initial, decay } => initial / (1.0 + decay * t as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant(eta) => eta > 0.0 && eta.is_finite(),
            StepSchedule::InverseTime { initial, decay } => {
                initial > 0.0 && initial.is_finite() && decay >= 0.0 && decay.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid stepsize schedule {self:?}")))
        }
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {value} must be positive")))
    }
}

fn check_count(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(invalid(format!("{name} must be at least 1")));
    }
    Ok(())
}

/// Full gradient descent with a fixed stepsize; one record per iteration.
pub fn gd(problem: &Problem, stepsize: f64, iters: usize, options: &RunOptions) -> Result<RunTrace> {
    check_positive("stepsize", stepsize)?;
    check_count("iters", iters)?;
    let matrix = problem.dataset().matrix();
    let mut x = options.start(problem)?;
    let mut r = matrix.mul_vec(&x);
    let mut recorder = Recorder::new(problem, options, problem.value_from_residuals(&r, &x));
    let mut counters = Counters::default();
    for iter in 1..=iters {
        let g = problem.gradient_from_residuals(&r, &x);
        counters.grad_evals += problem.n_rows() as u64;
        for (xj, gj) in x.iter_mut().zip(&g) {
            *xj -= stepsize * gj;
        }
        r = matrix.mul_vec(&x);
        let f = problem.value_from_residuals(&r, &x);
        recorder.guard(iter, f)?;
        recorder.push(iter, f, counters, 1);
        if recorder.budget_spent(counters) {
            break;
        }
    }
    Ok(recorder.finish(Method::Gd, None, x))
}

/// Coordinates `grad f_i` can touch.
fn component_support(problem: &Problem, i: usize) -> Option<&[usize]> {
    match (problem.layout(), problem.reg_mode()) {
        (Layout::PerExample, RegMode::SupportDistributed) => Some(problem.dataset().row(i).indices),
        _ => None,
    }
}

/// SGD with `i` uniform; one record per `n` steps.
pub fn sgd(
    problem: &Problem,
    schedule: StepSchedule,
    iters: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<RunTrace> {
    schedule.validate()?;
    check_count("iters", iters)?;
    let mut rng = Rng::with_stream(seed, Stream::Pairs);
    let n = problem.n_components();
    let per_component = (problem.n_rows() / n) as u64;
    let mut x = options.start(problem)?;
    let mut g = vec![0.0; problem.d()];
    let mut recorder = Recorder::new(problem, options, problem.value(&x)?);
    let mut counters = Counters::default();
    let mut since_record = 0u64;
    for t in 0..iters {
        let i = rng.below(n);
        let eta = schedule.eta(t);
        problem.add_component_gradient(i, &x, 1.0, &mut g);
        counters.grad_evals += per_component;
        match component_support(problem, i) {
            Some(support) => {
                for &j in support {
                    x[j] -= eta * g[j];
                    g[j] = 0.0;
                }
            }
            None => {
                for (xj, gj) in x.iter_mut().zip(g.iter_mut()) {
                    *xj -= eta * *gj;
                    *gj = 0.0;
                }
            }
        }
        since_record += 1;
        if (t + 1) % n == 0 || t + 1 == iters {
            let epoch = (t + 1).div_ceil(n);
            let f = problem.value(&x)?;
            recorder.guard(epoch, f)?;
            recorder.push(epoch, f, counters, since_record);
            since_record = 0;
            if recorder.budget_spent(counters) {
                break;
            }
        }
    }
    Ok(recorder.finish(Method::Sgd, Some(seed), x))
}

/// Nonuniform coordinate descent `x_j -= h grad_j f(x) / p_j` with `j ~ p`
/// from the collapsed single-component table; one record per `d` steps.
pub fn cd_nonuniform(problem: &Problem, h: f64, iters: usize, seed: u64, options: &RunOptions) -> Result<RunTrace> {
    cd_nonuniform_observed(problem, h, iters, seed, options, |_, _, _| {})
}

/// [`cd_nonuniform`] calling `observer(step, j, x)` after every update.
pub fn cd_nonuniform_observed<F: FnMut(usize, usize, &[f64])>(
    problem: &Problem,
    h: f64,
    iters: usize,
    seed: u64,
    options: &RunOptions,
    mut observer: F,
) -> Result<RunTrace> {
    check_positive("h", h)?;
    check_count("iters", iters)?;
    let collapsed = problem.collapse()?;
    let p = collapsed.lipschitz().p();
    let sampler = collapsed.sampler();
    let mut rng = Rng::with_stream(seed, Stream::Pairs);
    let mut cache = collapsed.new_cache(options.start(problem)?)?;
    let f0 = collapsed.value_from_residuals(cache.residuals(), cache.point());
    let mut recorder = Recorder::new(problem, options, f0);
    let mut counters = Counters::default();
    let d = problem.d();
    let mut since_record = 0u64;
    for t in 0..iters {
        let draw = sampler.sample(&mut rng);
        let j = draw.coordinate;
        let g = collapsed.partial_at_slot(draw.slot, j, &cache);
        counters.partial_evals += collapsed.partial_cost(j);
        collapsed.apply_coordinate_step(&mut cache, j, -h * g / p[j])?;
        observer(t, j, cache.point());
        since_record += 1;
        if (t + 1) % d == 0 || t + 1 == iters {
            let epoch = (t + 1).div_ceil(d);
            let f = collapsed.value_from_residuals(cache.residuals(), cache.point());
            recorder.guard(epoch, f)?;
            counters.column_touches = cache.column_touches();
            recorder.push(epoch, f, counters, since_record);
            since_record = 0;
            if recorder.budget_spent(counters) {
                break;
            }
        }
    }
    Ok(recorder.finish(Method::Cd, Some(seed), cache.into_point()))
}

/// Semi-stochastic gradient descent: full-vector steps with `i ~ L_i` and
/// the same geometric inner-loop law as S2CD.
pub fn s2gd(
    problem: &Problem,
    h: f64,
    m: usize,
    epochs: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<RunTrace> {
    check_positive("h", h)?;
    check_count("m", m)?;
    check_count("epochs", epochs)?;
    let law = GeometricLaw::new(m, problem.mu() * h)?;
    let components = DiscreteDistribution::new(problem.component_smoothness())?;
    let q = components.probabilities();
    let mut pair_rng = Rng::with_stream(seed, Stream::Pairs);
    let mut len_rng = Rng::with_stream(seed, Stream::InnerLength);
    let n = problem.n_components() as f64;
    let per_component = problem.n_rows() as u64 / problem.n_components() as u64;

    let mut y = options.start(problem)?;
    let f0 = problem.value(&y)?;
    let mut recorder = Recorder::new(problem, options, f0);
    let mut counters = Counters::default();
    let mut direction = vec![0.0; problem.d()];
    for epoch in 1..=epochs {
        let snapshot = y.clone();
        let full_gradient = problem.full_gradient(&snapshot)?;
        counters.grad_evals += problem.n_rows() as u64;
        let inner_len = law.sample(&mut len_rng);
        for _ in 0..inner_len {
            let i = components.sample(&mut pair_rng);
            let w = 1.0 / (n * q[i]);
            direction.copy_from_slice(&full_gradient);
            problem.add_component_gradient(i, &y, w, &mut direction);
            problem.add_component_gradient(i, &snapshot, -w, &mut direction);
            counters.grad_evals += 2 * per_component;
            for (yj, dj) in y.iter_mut().zip(&direction) {
                *yj -= h * dj;
            }
        }
        let f = problem.value(&y)?;
        recorder.guard(epoch, f)?;
        recorder.push(epoch, f, counters, inner_len as u64);
        if recorder.budget_spent(counters) {
            break;
        }
    }
    Ok(recorder.finish(Method::S2gd, Some(seed), y))
}
