//! Dense and sparse matrices, LU factorization, operator norms, extreme
//! symmetric eigenvalues, matrix exponentials, and Matrix Market IO.

pub mod dense;
pub mod eig;
pub mod expm;
pub mod lu;
pub mod mm;
pub mod norms;
pub mod sparse;
pub mod vector;

pub use dense::DenseMatrix;
pub use eig::{symmetric_max_eigenvalue, symmetric_min_eigenvalue, symmetric_part_max_eigenvalue};
pub use expm::matrix_exponential;
pub use lu::{lu_factorize, LuFactors};
pub use norms::{operator_norm, DiffOp, LinearOp, MatrixWeightedOp, ResolventWeightedOp};
pub use sparse::CsrMatrix;
pub use vector::Vector;
