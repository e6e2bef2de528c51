//! Experiment harness for the `s2cd` solvers: problem loading, parallel
//! runs with JSON-lines traces, trace comparison, and diagnostics.

pub mod compare;
pub mod diagnose;
pub mod error;
pub mod run;
pub mod spec;
pub mod trace;

pub use error::{HarnessError, Result};
pub use spec::{ExperimentSpec, Overrides, ProblemSource};
pub use trace::TraceFile;
