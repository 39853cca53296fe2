//! Compressed-column storage, shifted factorizations and the sparse–dense Sylvester sweep.

mod csc;
mod factor;
mod sylvester;

pub use csc::CscMatrix;
pub use factor::{factor_shifted, Shift, SparseFactorization};
pub use sylvester::{solve_sparse_dense_sylvester, Retain, SolveStats, SylvesterEngine};
