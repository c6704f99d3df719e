//! Randomized time-splitting for linear-quadratic optimal control.
//!
//! The system matrix is split into dissipative parts; each time subinterval
//! randomly activates a subset of them, rescaled by the inclusion
//! probabilities so the expected operator equals the original matrix. The
//! crate provides the splitting and probability-table machinery, schedule
//! sampling, Crank-Nicolson solvers for the original and randomized dynamics
//! with exact discrete adjoints, gradient-descent optimal control, the
//! variance functionals governing the error behavior, and the benchmark
//! model builders used by the experiment harness.

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod models;
pub mod optimizer;
pub mod sampling;
pub mod scalar;
pub mod splitting;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete `f64` aliases for the generic core types.
pub type Mat64 = linalg::DenseMatrix<f64>;
pub type Csr64 = linalg::CsrMatrix<f64>;
pub type Vec64 = linalg::Vector<f64>;
pub type Lu64 = linalg::LuFactors<f64>;
