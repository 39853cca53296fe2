//! Dense kernels: real Schur, Bartels–Stewart, matrix logarithm, orthonormalization.

mod hqr;
mod logm;
mod orth;
mod schur;
pub(crate) mod small;
mod sylvester;

pub(crate) use logm::norm1;
pub use logm::{frechet_log, logm_real, matrix_log_band};
pub use orth::{orth_basis, orthonormalize};
pub use schur::{eigenvalues, quasi_blocks, real_schur, spectral_abscissa, Block, RealSchur};
pub use sylvester::{
    lyapunov_with_schur, solve_dense_lyapunov, solve_dense_sylvester, solve_sylvester_with_schur,
    symmetrize,
};
