//! Exact checks of the estimator and smoothness inequalities, condition
//! numbers, and a high-accuracy reference solver.
//!
//! Expectations over the pair law are finite sums, so every audit here
//! enumerates them instead of sampling.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::loss::LossKind;
use crate::problem::{sq_norm, Problem};

/// Largest joint support an audit will enumerate.
pub const AUDIT_BUDGET: usize = 1_000_000;
/// Absolute slack for deterministic inequality checks.
pub const CHECK_SLACK: f64 = 1e-10;
/// Slack for the variance-bound chain.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAudit {
    pub y: Vec<f64>,
    pub x_k: Vec<f64>,
    /// `E[g] = sum_ij p_ij g^{ij}`.
    pub mean: Vec<f64>,
    /// `grad f(y)`.
    pub gradient: Vec<f64>,
    /// `E||g||^2 = sum_j p_j^{-1} sum_i q_ij (G^{ij})^2`.
    pub second_moment: f64,
    /// `4 L_hat (f(y) - f*) + 4 (L_hat - mu / max_s p_s)(f(x_k) - f*)`.
    pub stronger_bound: f64,
    /// `4 L_hat (f(y) - f*) + 4 L_hat (f(x_k) - f*)`.
    pub basic_bound: f64,
    pub f_y: f64,
    pub f_x: f64,
    pub f_star: f64,
}

impl EstimatorAudit {
    /// `||E[g] - grad f(y)|| / ||grad f(y)||`, or the absolute error when
    /// the gradient vanishes.
    pub fn unbiasedness_error(&self) -> f64 {
        let diff: f64 = self.mean.iter().zip(&self.gradient).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm = sq_norm(&self.gradient).sqrt();
        if norm > 0.0 {
            diff.sqrt() / norm
        } else {
            diff.sqrt()
        }
    }

    pub fn chain_holds(&self) -> bool {
        self.second_moment <= self.stronger_bound + BOUND_SLACK
            && self.stronger_bound <= self.basic_bound + BOUND_SLACK
    }
}

/// Enumerates the S2CD direction over every `(i, j)` with `L_ij > 0`.
pub fn audit_estimator(problem: &Problem, y: &[f64], x_k: &[f64], f_star: f64) -> Result<EstimatorAudit> {
    let lip = problem.lipschitz();
    let entries = lip.matrix().nnz();
    if entries > AUDIT_BUDGET {
        return Err(Error::BudgetExceeded { entries, budget: AUDIT_BUDGET });
    }
    let y_cache = problem.new_cache(y.to_vec())?;
    let x_cache = problem.new_cache(x_k.to_vec())?;
    let full_x = problem.gradient_from_residuals(x_cache.residuals(), x_k);
    let gradient = problem.gradient_from_residuals(y_cache.residuals(), y);
    let n = problem.n_components() as f64;
    let p = lip.p();

    let mut mean = vec![0.0; problem.d()];
    let mut second_moment = 0.0;
    for (j, mean_j) in mean.iter_mut().enumerate() {
        let mut inner = 0.0;
        for s in lip.matrix().col_slots(j) {
            let q = lip.q_slot(s);
            let g = full_x[j]
                + (problem.partial_at_slot(s, j, &y_cache) - problem.partial_at_slot(s, j, &x_cache)) / (n * q);
            // p_ij * (G / p_j) = q_ij * G
            *mean_j += q * g;
            inner += q * g * g;
        }
        second_moment += inner / p[j];
    }

    let f_y = problem.value_from_residuals(y_cache.residuals(), y);
    let f_x = problem.value_from_residuals(x_cache.residuals(), x_k);
    let l_hat = lip.l_hat();
    let sharp = l_hat - problem.mu() / lip.max_p();
    Ok(EstimatorAudit {
        y: y.to_vec(),
        x_k: x_k.to_vec(),
        mean,
        gradient,
        second_moment,
        stronger_bound: 4.0 * l_hat * (f_y - f_star) + 4.0 * sharp * (f_x - f_star),
        basic_bound: 4.0 * l_hat * (f_y - f_star) + 4.0 * l_hat * (f_x - f_star),
        f_y,
        f_x,
        f_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + CHECK_SLACK }
    }
}

fn bregman(problem: &Problem, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    let grad_y = problem.component_gradient(i, y)?;
    let inner: f64 = grad_y.iter().zip(x.iter().zip(y)).map(|(g, (a, b))| g * (a - b)).sum();
    Ok(problem.component_value(i, x)? - problem.component_value(i, y)? - inner)
}

fn check_component(problem: &Problem, i: usize) -> Result<()> {
    if i >= problem.n_components() {
        return Err(invalid(format!("component {i} out of range (n = {})", problem.n_components())));
    }
    Ok(())
}

/// `(grad_j f_i(x) - grad_j f_i(y))^2 <= 2 L_ij (f_i(x) - f_i(y) - <grad f_i(y), x - y>)`.
pub fn check_cocoercivity(problem: &Problem, i: usize, j: usize, x: &[f64], y: &[f64]) -> Result<InequalityCheck> {
    check_component(problem, i)?;
    let l = problem.lipschitz().l(i, j);
    if !(l > 0.0) {
        return Err(Error::NotInSupport { i, j });
    }
    let diff = problem.component_partial(i, j, x)? - problem.component_partial(i, j, y)?;
    Ok(InequalityCheck::new(diff * diff, 2.0 * l * bregman(problem, i, x, y)?))
}

/// `f_i(x + h e_j) <= f_i(x) + grad_j f_i(x) h + (L_ij / 2) h^2`.
pub fn check_smoothness_probe(problem: &Problem, i: usize, j: usize, x: &[f64], h: f64) -> Result<bool> {
    Ok(smoothness_probe(problem, i, j, x, h)?.holds)
}

pub fn smoothness_probe(problem: &Problem, i: usize, j: usize, x: &[f64], h: f64) -> Result<InequalityCheck> {
    check_component(problem, i)?;
    if j >= problem.d() {
        return Err(invalid(format!("coordinate {j} out of range (d = {})", problem.d())));
    }
    let mut moved = x.to_vec();
    moved[j] += h;
    let l = problem.lipschitz().l(i, j);
    let rhs = problem.component_value(i, x)? + problem.component_partial(i, j, x)? * h + 0.5 * l * h * h;
    Ok(InequalityCheck::new(problem.component_value(i, &moved)?, rhs))
}

/// `f(y) >= f(x) + <grad f(x), y - x> + (mu/2)||y - x||^2`, reported as
/// `lhs = f(x) + ... <= rhs = f(y)`.
pub fn check_strong_convexity(problem: &Problem, x: &[f64], y: &[f64]) -> Result<InequalityCheck> {
    let g = problem.full_gradient(x)?;
    let mut inner = 0.0;
    let mut dist = 0.0;
    for ((gj, xj), yj) in g.iter().zip(x).zip(y) {
        inner += gj * (yj - xj);
        dist += (yj - xj) * (yj - xj);
    }
    let lhs = problem.value(x)? + inner + 0.5 * problem.mu() * dist;
    Ok(InequalityCheck::new(lhs, problem.value(y)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMethod {
    ConjugateGradient,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub f_star: f64,
    /// `||grad f(x)||` recomputed from scratch.
    pub grad_norm: f64,
    /// `tol^2 / (2 mu)`: bound on `f(x) - min f`.
    pub gap_bound: f64,
    pub iterations: usize,
    pub method: ReferenceMethod,
}

const MIN_TOL: f64 = 1e-12;
const REFERENCE_ITERATION_CAP: usize = 2_000_000;

fn check_tol(tol: f64) -> Result<()> {
    if !(tol >= MIN_TOL && tol.is_finite()) {
        return Err(invalid(format!("reference tolerance {tol} must be at least {MIN_TOL:e}")));
    }
    Ok(())
}

fn certify(problem: &Problem, x: Vec<f64>, tol: f64, iterations: usize, method: ReferenceMethod) -> Result<ReferenceSolution> {
    let grad_norm = sq_norm(&problem.full_gradient(&x)?).sqrt();
    Ok(ReferenceSolution {
        f_star: problem.value(&x)?,
        x,
        grad_norm,
        gap_bound: tol * tol / (2.0 * problem.mu()),
        iterations,
        method,
    })
}

/// Conjugate gradients for squared loss, gradient descent otherwise.
pub fn solve_reference(problem: &Problem, tol: f64) -> Result<ReferenceSolution> {
    match problem.loss() {
        LossKind::Squared => solve_reference_cg(problem, tol),
        LossKind::Logistic => solve_reference_gd(problem, tol),
    }
}

/// CG on `(A^T A / n + mu I) x = A^T b / n`, restarted from the true
/// gradient until `||grad f(x)|| <= tol`.
pub fn solve_reference_cg(problem: &Problem, tol: f64) -> Result<ReferenceSolution> {
    check_tol(tol)?;
    if problem.loss() != LossKind::Squared {
        return Err(invalid("conjugate gradients apply to squared loss only"));
    }
    let matrix = problem.dataset().matrix();
    let nf = problem.n_rows() as f64;
    let mu = problem.mu();
    let hess = |v: &[f64]| -> Vec<f64> {
        let mut out = matrix.mul_transpose_vec(&matrix.mul_vec(v));
        for (o, vj) in out.iter_mut().zip(v) {
            *o = *o / nf + mu * vj;
        }
        out
    };
    let d = problem.d();
    let restart_every = (2 * d).max(50);
    let mut x = vec![0.0; d];
    let mut iterations = 0;
    loop {
        let mut r: Vec<f64> = problem.full_gradient(&x)?.iter().map(|g| -g).collect();
        let mut rr = sq_norm(&r);
        if rr.sqrt() <= tol {
            return certify(problem, x, tol, iterations, ReferenceMethod::ConjugateGradient);
        }
        let mut dir = r.clone();
        for _ in 0..restart_every {
            if iterations >= REFERENCE_ITERATION_CAP {
                return Err(Error::IterationCap(iterations));
            }
            iterations += 1;
            let hd = hess(&dir);
            let curvature: f64 = dir.iter().zip(&hd).map(|(a, b)| a * b).sum();
            if !(curvature > 0.0) {
                break;
            }
            let alpha = rr / curvature;
            for ((xj, rj), (dj, hj)) in x.iter_mut().zip(r.iter_mut()).zip(dir.iter().zip(&hd)) {
                *xj += alpha * dj;
                *rj -= alpha * hj;
            }
            let rr_next = sq_norm(&r);
            if rr_next.sqrt() <= 0.5 * tol {
                break;
            }
            let beta = rr_next / rr;
            rr = rr_next;
            for (dj, rj) in dir.iter_mut().zip(&r) {
                *dj = rj + beta * *dj;
            }
        }
    }
}

/// Gradient descent with backtracking until `||grad f(x)|| <= tol`.
pub fn solve_reference_gd(problem: &Problem, tol: f64) -> Result<ReferenceSolution> {
    check_tol(tol)?;
    let matrix = problem.dataset().matrix();
    let mut x = vec![0.0; problem.d()];
    let mut r = matrix.mul_vec(&x);
    let mut f = problem.value_from_residuals(&r, &x);
    // L_avg bounds the smoothness constant of f
    let safe_step = 1.0 / problem.l_avg();
    let mut step = safe_step;
    let mut iterations = 0;
    loop {
        let g = problem.gradient_from_residuals(&r, &x);
        let gg = sq_norm(&g);
        if gg.sqrt() <= tol {
            return certify(problem, x, tol, iterations, ReferenceMethod::GradientDescent);
        }
        if iterations >= REFERENCE_ITERATION_CAP {
            return Err(Error::IterationCap(iterations));
        }
        iterations += 1;
        step *= 2.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xj, gj)| xj - step * gj).collect();
            let r_trial = matrix.mul_vec(&trial);
            let f_trial = problem.value_from_residuals(&r_trial, &trial);
            // below 1/L_avg descent is guaranteed, so stop backtracking there;
            // near the optimum the decrease is smaller than the rounding of f
            if f_trial <= f - 0.5 * step * gg || step <= safe_step {
                x = trial;
                r = r_trial;
                f = f_trial;
                break;
            }
            step = (0.5 * step).max(safe_step);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges; the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() || lo == hi {
            let edge = if values.is_empty() { 0.0 } else { lo };
            return Self { edges: vec![edge, edge], counts: vec![values.len()] };
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| if k == bins { hi } else { lo + width * k as f64 }).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: usize,
    pub d: usize,
    pub mu: f64,
    pub l_hat: f64,
    pub l_avg: f64,
    pub l_max: f64,
    pub kappa_hat: f64,
    pub kappa_avg: f64,
    pub kappa_max: f64,
    pub max_p: f64,
    pub v_histogram: Histogram,
    pub omega_histogram: Histogram,
}

impl ConditionReport {
    /// `kappa_hat >= kappa_avg` up to rounding.
    pub fn chain_holds(&self) -> bool {
        self.l_hat >= self.l_avg * (1.0 - 1e-12)
    }

    /// One `key=value` pair per line.
    pub fn to_key_values(&self) -> String {
        fn join<T: std::fmt::Display>(xs: &[T]) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let scalars = [
            ("mu", self.mu),
            ("l_hat", self.l_hat),
            ("l_avg", self.l_avg),
            ("l_max", self.l_max),
            ("kappa_hat", self.kappa_hat),
            ("kappa_avg", self.kappa_avg),
            ("kappa_max", self.kappa_max),
            ("max_p", self.max_p),
        ];
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "d={}", self.d);
        for (k, v) in scalars {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "kappa_hat_ge_kappa_avg={}", self.chain_holds());
        let relation = if self.kappa_hat > self.kappa_max {
            "greater"
        } else if self.kappa_hat < self.kappa_max {
            "less"
        } else {
            "equal"
        };
        let _ = writeln!(s, "kappa_hat_vs_kappa_max={relation}");
        let _ = writeln!(s, "v_hist_edges={}", join(&self.v_histogram.edges));
        let _ = writeln!(s, "v_hist_counts={}", join(&self.v_histogram.counts));
        let _ = writeln!(s, "omega_hist_edges={}", join(&self.omega_histogram.edges));
        let _ = writeln!(s, "omega_hist_counts={}", join(&self.omega_histogram.counts));
        s
    }
}

pub fn condition_report(problem: &Problem) -> ConditionReport {
    let lip = problem.lipschitz();
    let omega: Vec<f64> = lip.omega().iter().map(|&w| w as f64).collect();
    let report = ConditionReport {
        n: problem.n_components(),
        d: problem.d(),
        mu: problem.mu(),
        l_hat: problem.l_hat(),
        l_avg: problem.l_avg(),
        l_max: problem.l_max(),
        kappa_hat: problem.kappa_hat(),
        kappa_avg: problem.kappa_avg(),
        kappa_max: problem.kappa_max(),
        max_p: lip.max_p(),
        v_histogram: Histogram::new(lip.v(), 10),
        omega_histogram: Histogram::new(&omega, 10),
    };
    debug_assert!(report.chain_holds());
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorParams, LabelModel, SparseDataset};
    use crate::problem::RegMode;
    use crate::sampling::{Rng, Stream};

    fn quadratic_1d() -> Problem {
        // f_1(x) = x^2 / 2 with L_11 = 1
        let ds = SparseDataset::from_dense(&[vec![1.0]], vec![0.0]).unwrap();
        Problem::new(ds, LossKind::Squared, 0.0, RegMode::SupportDistributed).unwrap()
    }

    fn random_problem(loss: LossKind, mode: RegMode, seed: u64) -> Problem {
        let labels = match loss {
            LossKind::Squared => LabelModel::Regression,
            LossKind::Logistic => LabelModel::Classification,
        };
        let (ds, _) = generate(&GeneratorParams::new(20, 15, 0.4, 1.0, labels, seed)).unwrap();
        Problem::new(ds, loss, 0.1, mode).unwrap()
    }

    fn random_point(rng: &mut Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| scale * (2.0 * rng.next_f64() - 1.0)).collect()
    }

    #[test]
    fn audit_vanishes_at_optimum() {
        let problem = random_problem(LossKind::Squared, RegMode::SupportDistributed, 1);
        let opt = solve_reference(&problem, 1e-12).unwrap();
        let audit = audit_estimator(&problem, &opt.x, &opt.x, opt.f_star).unwrap();
        assert!(audit.second_moment <= 1e-9);
        assert!(audit.basic_bound.abs() <= 1e-9);
        assert!(audit.stronger_bound.abs() <= 1e-9);
    }

    #[test]
    fn audit_single_component_closed_form() {
        let ds = SparseDataset::from_dense(&[vec![1.0, 2.0, -1.0]], vec![0.5]).unwrap();
        let problem = Problem::new(ds, LossKind::Squared, 0.3, RegMode::SupportDistributed).unwrap();
        let opt = solve_reference(&problem, 1e-12).unwrap();
        let y = [0.4, -0.2, 1.0];
        let x_k = [0.1, 0.3, -0.5];
        let audit = audit_estimator(&problem, &y, &x_k, opt.f_star).unwrap();
        // n = 1: q = 1, so G = grad_j f(y) and E||g||^2 = sum_j grad_j f(y)^2 / p_j
        let grad = problem.full_gradient(&y).unwrap();
        let p = problem.lipschitz().p();
        let expected: f64 = grad.iter().zip(p).map(|(g, pj)| g * g / pj).sum();
        assert!((audit.second_moment - expected).abs() <= 1e-12 * expected);
        assert!(audit.chain_holds());
        assert!(audit.unbiasedness_error() <= 1e-12);
    }

    #[test]
    fn audit_chain_on_random_pairs() {
        for mode in [RegMode::SupportDistributed, RegMode::Dense] {
            let problem = random_problem(LossKind::Squared, mode, 2);
            let opt = solve_reference(&problem, 1e-12).unwrap();
            let mut rng = Rng::with_stream(9, Stream::Probes);
            for _ in 0..100 {
                let y = random_point(&mut rng, problem.d(), 2.0);
                let x_k = random_point(&mut rng, problem.d(), 2.0);
                let audit = audit_estimator(&problem, &y, &x_k, opt.f_star).unwrap();
                assert!(audit.unbiasedness_error() <= 1e-10);
                assert!(audit.chain_holds(), "{audit:?}");
            }
        }
    }

    #[test]
    fn cocoercivity_trivial_and_tight_cases() {
        let problem = quadratic_1d();
        let same = check_cocoercivity(&problem, 0, 0, &[0.7], &[0.7]).unwrap();
        assert_eq!((same.lhs, same.rhs, same.holds), (0.0, 0.0, true));
        let c = check_cocoercivity(&problem, 0, 0, &[2.0], &[-0.5]).unwrap();
        assert!((c.lhs - 6.25).abs() < 1e-12);
        assert!((c.lhs - c.rhs).abs() < 1e-10);
        assert!(c.holds);
    }

    #[test]
    fn cocoercivity_rejects_missing_entry() {
        let ds = SparseDataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0]).unwrap();
        let problem = Problem::new(ds, LossKind::Squared, 0.1, RegMode::SupportDistributed).unwrap();
        assert!(matches!(
            check_cocoercivity(&problem, 0, 1, &[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::NotInSupport { i: 0, j: 1 })
        ));
    }

    #[test]
    fn random_probes_hold() {
        for loss in [LossKind::Squared, LossKind::Logistic] {
            for mode in [RegMode::SupportDistributed, RegMode::Dense] {
                let problem = random_problem(loss, mode, 3);
                let lip = problem.lipschitz();
                let mut rng = Rng::with_stream(4, Stream::Probes);
                for _ in 0..500 {
                    let s = rng.below(lip.matrix().nnz());
                    let i = lip.matrix().slot_row(s);
                    let j = (0..problem.d()).find(|&j| lip.matrix().col_slots(j).contains(&s)).unwrap();
                    let x = random_point(&mut rng, problem.d(), 3.0);
                    let y = random_point(&mut rng, problem.d(), 3.0);
                    assert!(check_cocoercivity(&problem, i, j, &x, &y).unwrap().holds);
                    let h = 4.0 * (2.0 * rng.next_f64() - 1.0);
                    assert!(check_smoothness_probe(&problem, i, j, &x, h).unwrap());
                    assert!(check_strong_convexity(&problem, &x, &y).unwrap().holds);
                }
            }
        }
    }

    #[test]
    fn smoothness_probe_cases() {
        let problem = quadratic_1d();
        assert!(check_smoothness_probe(&problem, 0, 0, &[1.5], 0.0).unwrap());
        let probe = smoothness_probe(&problem, 0, 0, &[1.5], -0.8).unwrap();
        assert!((probe.lhs - probe.rhs).abs() < 1e-12);
    }

    #[test]
    fn reference_identity_design() {
        let ds = SparseDataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![3.0, -2.0]).unwrap();
        let problem = Problem::new(ds, LossKind::Squared, 0.0, RegMode::SupportDistributed).unwrap();
        let sol = solve_reference(&problem, 1e-12).unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-10 && (sol.x[1] + 2.0).abs() < 1e-10);
        assert_eq!(sol.gap_bound, f64::INFINITY);
    }

    #[test]
    fn reference_solvers_agree() {
        let problem = random_problem(LossKind::Squared, RegMode::SupportDistributed, 5);
        let tol = 1e-9;
        let cg = solve_reference_cg(&problem, tol).unwrap();
        let gd = solve_reference_gd(&problem, tol).unwrap();
        assert!(cg.grad_norm <= tol && gd.grad_norm <= tol);
        assert_eq!(cg.gap_bound, tol * tol / 0.2);
        assert!((cg.f_star - gd.f_star).abs() <= 2.0 * cg.gap_bound);
    }

    #[test]
    fn reference_logistic_certificate() {
        let problem = random_problem(LossKind::Logistic, RegMode::SupportDistributed, 6);
        let sol = solve_reference(&problem, 1e-10).unwrap();
        assert!(sol.grad_norm <= 1e-10);
        assert_eq!(sol.method, ReferenceMethod::GradientDescent);
    }

    #[test]
    fn reference_rejects_loose_floor() {
        let problem = quadratic_1d();
        assert!(solve_reference(&problem, 1e-13).is_err());
        assert!(solve_reference(&problem, f64::NAN).is_err());
    }

    #[test]
    fn condition_report_dense_single_component() {
        // L row (1, 1): a_j^2 + mu = 1 with mu = 1/2
        let a = 0.5f64.sqrt();
        let ds = SparseDataset::from_dense(&[vec![a, a]], vec![0.0]).unwrap();
        let problem = Problem::new(ds, LossKind::Squared, 0.5, RegMode::Dense).unwrap();
        let report = condition_report(&problem);
        assert_eq!(problem.lipschitz().omega(), &[2]);
        assert!((report.l_hat - 4.0).abs() < 1e-12);
        assert!(report.l_avg <= 2.0 + 1e-12);
        assert!(report.chain_holds());
        let text = report.to_key_values();
        assert!(text.contains("kappa_hat_ge_kappa_avg=true"));
        assert!(text.lines().all(|l| l.contains('=')));
    }

    #[test]
    fn condition_report_single_coordinate() {
        let ds = SparseDataset::from_dense(&[vec![2.0]], vec![1.0]).unwrap();
        let problem = Problem::new(ds, LossKind::Squared, 0.5, RegMode::SupportDistributed).unwrap();
        let r = condition_report(&problem);
        assert!((r.kappa_hat - r.kappa_avg).abs() < 1e-12);
        assert!((r.kappa_hat - r.kappa_max).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::new(&[1.0, 2.0, 2.0, 10.0], 3);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.counts, vec![3, 0, 1]);
        assert_eq!(Histogram::new(&[5.0, 5.0], 4).counts, vec![2]);
    }
}
