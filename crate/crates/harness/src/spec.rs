use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use s2cd::data::{generate, read_libsvm, write_libsvm, GeneratorParams, LabelModel, SparseDataset};
use s2cd::solvers::Method;
use s2cd::{LossKind, Problem, RegMode};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemSource {
    File(PathBuf),
    Generate(GeneratorParams),
}

impl ProblemSource {
    /// Parses `n,d,density,scale`.
    pub fn parse_generator(text: &str, loss: LossKind, seed: u64) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let bad = || HarnessError::usage(format!("--generate expects n,d,density,scale, got '{text}'"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let n = parts[0].parse().map_err(|_| bad())?;
        let d = parts[1].parse().map_err(|_| bad())?;
        let density = parts[2].parse().map_err(|_| bad())?;
        let scale = parts[3].parse().map_err(|_| bad())?;
        let labels = match loss {
            LossKind::Squared => LabelModel::Regression,
            LossKind::Logistic => LabelModel::Classification,
        };
        let params = GeneratorParams::new(n, d, density, scale, labels, seed);
        params.validate().map_err(|e| HarnessError::usage(e.to_string()))?;
        Ok(ProblemSource::Generate(params))
    }

    pub fn load(&self) -> Result<SparseDataset> {
        let dataset = match self {
            ProblemSource::File(path) => {
                let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
                read_libsvm(BufReader::new(file), 0)?
            }
            ProblemSource::Generate(params) => generate(params)?.0,
        };
        let (dataset, remap) = dataset.prune_empty_columns();
        if remap.dropped() > 0 {
            log::warn!("dropped {} empty columns", remap.dropped());
        }
        Ok(dataset)
    }
}

/// Per-method overrides for S2CD; anything left out comes from the
/// accuracy-driven defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub h: Option<f64>,
    pub m: Option<usize>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub source: ProblemSource,
    pub loss: LossKind,
    pub mu: f64,
    pub reg_mode: RegMode,
    pub methods: Vec<Method>,
    pub epsilon: f64,
    pub overrides: Overrides,
    pub seeds: Vec<u64>,
    /// Effective passes per run; `None` lets each method use its own
    /// iteration count.
    pub budget_passes: Option<f64>,
    /// Not serialized, so traces do not depend on where they are written.
    #[serde(skip)]
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(HarnessError::usage("at least one method is required"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::usage("at least one seed is required"));
        }
        if let Some(b) = self.budget_passes {
            if !(b > 0.0 && b.is_finite()) {
                return Err(HarnessError::usage(format!("budget must be positive, got {b}")));
            }
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(HarnessError::usage(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(HarnessError::usage(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if let Some(h) = self.overrides.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(HarnessError::usage(format!("h must be positive, got {h}")));
            }
        }
        if self.overrides.m == Some(0) || self.overrides.epochs == Some(0) {
            return Err(HarnessError::usage("m and epochs must be at least 1"));
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Problem> {
        Ok(Problem::new(self.source.load()?, self.loss, self.mu, self.reg_mode)?)
    }
}

/// SHA-256 over the dataset in LibSVM form plus the objective settings.
pub fn fingerprint(problem: &Problem) -> String {
    let mut bytes = Vec::new();
    write_libsvm(problem.dataset(), &mut bytes).expect("writing to memory");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update(format!("{}|{:?}|{}", problem.loss(), problem.mu(), problem.reg_mode()).as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
