use std::fmt::Write as _;

use s2cd::solvers::Method;

use crate::error::{HarnessError, Result};
use crate::trace::{RunSeries, TraceFile};

/// Relative gaps `(f - f*) / (f0 - f*)` reported by `compare`.
pub const THRESHOLDS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub file: String,
    pub method: Method,
    pub runs: usize,
    /// Mean passes to reach each threshold; `None` when some run never did.
    pub passes_to: [Option<f64>; 3],
    pub final_rel_gap: f64,
}

/// `kappa_hat C_pd / (kappa_avg C_grad)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRatio {
    /// Costs in effective passes: `C_grad = 1/n`, `C_pd = 1/(n d_bar)`.
    pub nominal: f64,
    /// Costs fitted from wall time against the evaluation counters.
    pub measured: Option<f64>,
    pub ms_per_grad: Option<f64>,
    pub ms_per_partial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub ratio: CostRatio,
}

fn rel_gap(trace: &TraceFile, f: f64) -> f64 {
    let h = &trace.header;
    let denom = h.f0 - h.f_star;
    if denom > 0.0 {
        (f - h.f_star) / denom
    } else {
        0.0
    }
}

fn passes_to(trace: &TraceFile, run: &RunSeries, threshold: f64) -> Option<f64> {
    run.lines.iter().find(|l| rel_gap(trace, l.f) <= threshold).map(|l| l.passes)
}

/// Least squares `wall_ms ~ a grad_evals + b partial_evals` over run ends.
fn fit_costs(traces: &[TraceFile]) -> Option<(f64, f64)> {
    let (mut sgg, mut spp, mut sgp, mut sgw, mut spw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in traces {
        for run in t.runs() {
            let last = run.lines.last()?;
            let (g, p, w) = (last.grad_evals as f64, last.partial_evals as f64, last.wall_ms);
            sgg += g * g;
            spp += p * p;
            sgp += g * p;
            sgw += g * w;
            spw += p * w;
        }
    }
    let det = sgg * spp - sgp * sgp;
    if !(det > 1e-9 * sgg * spp) {
        return None;
    }
    let a = (sgw * spp - spw * sgp) / det;
    let b = (spw * sgg - sgw * sgp) / det;
    (a > 0.0 && b > 0.0).then_some((a, b))
}

pub fn compare(traces: &[TraceFile], names: &[String]) -> Result<Summary> {
    let first = traces.first().ok_or_else(|| HarnessError::usage("compare needs at least one trace file"))?;
    for (t, name) in traces.iter().zip(names).skip(1) {
        if t.header.fingerprint != first.header.fingerprint {
            return Err(HarnessError::Incompatible(format!(
                "{name} was produced on a different problem than {}",
                names[0]
            )));
        }
    }
    let mut rows = Vec::new();
    for (t, name) in traces.iter().zip(names) {
        let runs = t.runs();
        let mut methods: Vec<Method> = runs.iter().map(|r| r.method).collect();
        methods.dedup();
        for method in methods {
            let mine: Vec<&RunSeries> = runs.iter().filter(|r| r.method == method).collect();
            let mut passes = [None; 3];
            for (k, &thr) in THRESHOLDS.iter().enumerate() {
                let reached: Option<Vec<f64>> = mine.iter().map(|r| passes_to(t, r, thr)).collect();
                passes[k] = reached.map(|v| v.iter().sum::<f64>() / v.len() as f64);
            }
            let final_rel_gap =
                mine.iter().map(|r| rel_gap(t, r.lines.last().map_or(f64::NAN, |l| l.f))).sum::<f64>()
                    / mine.len() as f64;
            rows.push(SummaryRow { file: name.clone(), method, runs: mine.len(), passes_to: passes, final_rel_gap });
        }
    }
    let h = &first.header;
    let condition = h.kappa_hat / h.kappa_avg;
    let nominal = condition / h.mean_row_support;
    let fitted = fit_costs(traces);
    let ratio = CostRatio {
        nominal,
        measured: fitted.map(|(a, b)| condition * b / a),
        ms_per_grad: fitted.map(|(a, _)| a),
        ms_per_partial: fitted.map(|(_, b)| b),
    };
    Ok(Summary { rows, ratio })
}

pub fn render(summary: &Summary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:<6} {:>5} {:>14} {:>14} {:>14} {:>14}",
        "file", "method", "runs", "passes@1e-1", "passes@1e-2", "passes@1e-3", "final_gap"
    );
    for row in &summary.rows {
        let cell = |p: Option<f64>| p.map_or_else(|| "not reached".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            s,
            "{:<24} {:<6} {:>5} {:>14} {:>14} {:>14} {:>14.3e}",
            row.file,
            row.method.name(),
            row.runs,
            cell(row.passes_to[0]),
            cell(row.passes_to[1]),
            cell(row.passes_to[2]),
            row.final_rel_gap
        );
    }
    let r = &summary.ratio;
    let _ = writeln!(s, "cost_ratio_nominal={:.6}", r.nominal);
    match (r.measured, r.ms_per_grad, r.ms_per_partial) {
        (Some(m), Some(g), Some(p)) => {
            let _ = writeln!(s, "cost_ratio_measured={m:.6}");
            let _ = writeln!(s, "ms_per_grad_eval={g:.3e}");
            let _ = writeln!(s, "ms_per_partial_eval={p:.3e}");
        }
        _ => {
            let _ = writeln!(s, "cost_ratio_measured=unavailable");
        }
    }
    s
}
