//! Newline-delimited JSON traces: one header record, then one record per
//! epoch per run, each tagged by its `record` field.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use s2cd::solvers::{EpochRecord, Method};
use s2cd::{LossKind, RegMode};

use crate::error::{HarnessError, Result};
use crate::spec::{ExperimentSpec, ProblemSource};

/// Parameters a method actually ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPlan {
    pub method: Method,
    pub h: Option<f64>,
    pub m: Option<usize>,
    pub epochs: Option<usize>,
    pub iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub fingerprint: String,
    pub source: ProblemSource,
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    pub mean_row_support: f64,
    pub loss: LossKind,
    pub mu: f64,
    pub reg_mode: RegMode,
    pub l_hat: f64,
    pub kappa_hat: f64,
    pub kappa_avg: f64,
    pub kappa_max: f64,
    pub f_star: f64,
    pub f0: f64,
    pub reference_grad_norm: f64,
    pub spec: ExperimentSpec,
    pub plans: Vec<MethodPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLine {
    pub method: Method,
    pub seed: Option<u64>,
    pub epoch: usize,
    pub f: f64,
    pub gap: Option<f64>,
    pub passes: f64,
    pub grad_evals: u64,
    pub partial_evals: u64,
    pub column_touches: u64,
    pub inner_steps: u64,
    pub wall_ms: f64,
}

impl EpochLine {
    pub fn from_record(method: Method, seed: Option<u64>, passes: f64, r: &EpochRecord) -> Self {
        Self {
            method,
            seed,
            epoch: r.epoch,
            f: r.f,
            gap: r.gap,
            passes,
            grad_evals: r.grad_evals,
            partial_evals: r.partial_evals,
            column_touches: r.column_touches,
            inner_steps: r.inner_steps,
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum TraceRecord {
    Header(Box<Header>),
    Epoch(EpochLine),
}

/// Epoch lines of one `(method, seed)` run, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub method: Method,
    pub seed: Option<u64>,
    pub lines: Vec<EpochLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: Header,
    pub epochs: Vec<EpochLine>,
}

impl TraceFile {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = TraceRecord::Header(Box::new(self.header.clone()));
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for line in &self.epochs {
            writeln!(out, "{}", serde_json::to_string(&TraceRecord::Epoch(line.clone()))?)?;
        }
        out.flush()
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        self.write(BufWriter::new(file)).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read_from<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let err = |line: usize, message: String| HarnessError::Trace { path: name.to_string(), line, message };
        let mut header = None;
        let mut epochs = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| HarnessError::io(name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(&line).map_err(|e| err(k + 1, e.to_string()))?;
            match record {
                TraceRecord::Header(h) if header.is_none() && epochs.is_empty() => header = Some(*h),
                TraceRecord::Header(_) => return Err(err(k + 1, "unexpected second header".into())),
                TraceRecord::Epoch(_) if header.is_none() => {
                    return Err(err(k + 1, "epoch record before header".into()))
                }
                TraceRecord::Epoch(e) => epochs.push(e),
            }
        }
        let header = header.ok_or_else(|| err(0, "missing header".into()))?;
        Ok(Self { header, epochs })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::read_from(BufReader::new(file), &path.display().to_string())
    }

    pub fn runs(&self) -> Vec<RunSeries> {
        let mut runs: Vec<RunSeries> = Vec::new();
        for line in &self.epochs {
            match runs.last_mut() {
                Some(run) if run.method == line.method && run.seed == line.seed && line.epoch > 0 => {
                    run.lines.push(line.clone())
                }
                _ => runs.push(RunSeries { method: line.method, seed: line.seed, lines: vec![line.clone()] }),
            }
        }
        runs
    }

    /// Copy with every `wall_ms` zeroed.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        for e in &mut t.epochs {
            e.wall_ms = 0.0;
        }
        t
    }
}
