//! Inexact accelerated stochastic ADMM for separable convex problems
//! `min f(x) + g(y)` subject to `Ax + By = b`, where `f` is an average of
//! many smooth components. The x-subproblem is solved approximately by a
//! short run of accelerated stochastic gradient steps whose length grows
//! across outer iterations; directions may be variance-reduced with an
//! anchored correction or incremental mini-batches. Ships with a linearized
//! ADMM baseline, a fused-lasso model family on logistic losses, LIBSVM
//! ingestion, and a benchmark harness with CSV traces.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod problem;
pub mod sampler;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{DenseVec, DiagMetric, SparseMat};
pub use problem::{ProblemSpec, SaddleReference};
pub use sampler::{Sampler, SamplerConfig, SamplerMode};
pub use solver::{solve, SolveResult, Solver, SolverConfig};
