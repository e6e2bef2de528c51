//! Semi-stochastic coordinate descent (S2CD) for strongly convex finite sums
//! `f(x) = (1/n) sum_i f_i(x)` built from sparse linear models.
//!
//! Each `f_i(x) = phi(<a_i, x>; b_i) + (mu/2) * reg_i(x)` is smooth per
//! coordinate with constants `L_ij`. S2CD takes a full gradient once per
//! epoch and then a random number of cheap steps that touch a single
//! `(coordinate, example)` pair, drawn with probability proportional to
//! `omega_i L_ij`.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod loss;
pub mod problem;
pub mod sampling;
pub mod solvers;

pub use data::{generate, read_libsvm, write_libsvm, GeneratorParams, LabelModel, SparseDataset, SparseMatrix};
pub use error::{Error, Result};
pub use loss::LossKind;
pub use problem::{build_problem, LipschitzTable, Problem, RegMode};
pub use solvers::{default_params, s2cd, Method, RunOptions, RunTrace, SolverConfig};
