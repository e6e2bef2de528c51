use std::fmt::Write as _;

use s2cd::diagnostics::{
    audit_estimator, check_cocoercivity, check_strong_convexity, condition_report, smoothness_probe, solve_reference,
};
use s2cd::sampling::{Rng, Stream};
use s2cd::Problem;

use crate::error::Result;

/// Audits run only when `n * d` is at most this.
pub const AUDIT_LIMIT: usize = 1_000_000;
const REFERENCE_TOL: f64 = 1e-10;
/// Vectors longer than this are summarized, not printed.
const PRINT_LIMIT: usize = 32;

#[derive(Debug, Clone, Copy)]
pub struct DiagnoseOptions {
    pub probes: usize,
    pub audit_points: usize,
    pub seed: u64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self { probes: 1000, audit_points: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
}

impl CheckResult {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone)]
pub struct Diagnosis {
    pub text: String,
    /// Empty when audits were skipped.
    pub checks: Vec<CheckResult>,
    pub audits_skipped: bool,
}

impl Diagnosis {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::ok)
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn around(rng: &mut Rng, center: &[f64], radius: f64) -> Vec<f64> {
    center.iter().map(|c| c + radius * (2.0 * rng.next_f64() - 1.0)).collect()
}

pub fn diagnose(problem: &Problem, options: &DiagnoseOptions) -> Result<Diagnosis> {
    let report = condition_report(problem);
    let mut text = report.to_key_values();
    let lip = problem.lipschitz();
    if problem.d() <= PRINT_LIMIT {
        let _ = writeln!(text, "p={}", join(lip.p()));
        let _ = writeln!(text, "v={}", join(lip.v()));
    }

    let size = problem.n_rows().saturating_mul(problem.d());
    let mut checks = vec![CheckResult {
        name: "kappa_chain",
        passed: usize::from(report.chain_holds()),
        total: 1,
    }];
    if size > AUDIT_LIMIT {
        let _ = writeln!(text, "audits=skipped (n*d = {size} exceeds {AUDIT_LIMIT})");
        write_checks(&mut text, &checks);
        return Ok(Diagnosis { text, checks, audits_skipped: true });
    }

    let reference = solve_reference(problem, REFERENCE_TOL)?;
    let _ = writeln!(text, "f_star={}", reference.f_star);
    let _ = writeln!(text, "reference_grad_norm={:e}", reference.grad_norm);
    checks.push(CheckResult {
        name: "reference",
        passed: usize::from(reference.grad_norm <= REFERENCE_TOL),
        total: 1,
    });

    let mut rng = Rng::with_stream(options.seed, Stream::Probes);
    let mut passed = 0;
    for _ in 0..options.audit_points {
        let y = around(&mut rng, &reference.x, 1.0);
        let x_k = around(&mut rng, &reference.x, 1.0);
        let audit = audit_estimator(problem, &y, &x_k, reference.f_star)?;
        passed += usize::from(audit.unbiasedness_error() <= 1e-10 && audit.chain_holds());
    }
    checks.push(CheckResult { name: "estimator", passed, total: options.audit_points });

    let slot_col: Vec<usize> =
        (0..problem.d()).flat_map(|j| lip.matrix().col_slots(j).map(move |_| j)).collect();
    let (mut cocoercive, mut smooth, mut convex) = (0, 0, 0);
    for _ in 0..options.probes {
        let s = rng.below(slot_col.len());
        let (i, j) = (lip.matrix().slot_row(s), slot_col[s]);
        let x = around(&mut rng, &reference.x, 2.0);
        let y = around(&mut rng, &reference.x, 2.0);
        let h = 4.0 * (2.0 * rng.next_f64() - 1.0);
        cocoercive += usize::from(check_cocoercivity(problem, i, j, &x, &y)?.holds);
        smooth += usize::from(smoothness_probe(problem, i, j, &x, h)?.holds);
        convex += usize::from(check_strong_convexity(problem, &x, &y)?.holds);
    }
    checks.push(CheckResult { name: "cocoercivity", passed: cocoercive, total: options.probes });
    checks.push(CheckResult { name: "smoothness", passed: smooth, total: options.probes });
    checks.push(CheckResult { name: "strong_convexity", passed: convex, total: options.probes });
    write_checks(&mut text, &checks);
    Ok(Diagnosis { text, checks, audits_skipped: false })
}

fn write_checks(text: &mut String, checks: &[CheckResult]) {
    for c in checks {
        let verdict = if c.ok() { "pass" } else { "fail" };
        let _ = writeln!(text, "check.{}={verdict} ({}/{})", c.name, c.passed, c.total);
    }
}
