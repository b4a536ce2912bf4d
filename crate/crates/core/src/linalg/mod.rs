//! Dense linear algebra used by the training and structure code.

pub mod dense;
pub mod schur;
pub mod solve;
pub mod sylvester;

pub use dense::DenseMatrix;
pub use schur::{real_schur, SchurFactorization};
pub use solve::{covariance, ridge_solve};
pub use sylvester::{solve_sylvester, solve_sylvester_oracle, sylvester_residual};
