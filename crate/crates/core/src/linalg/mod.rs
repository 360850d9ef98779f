//! Sparse and dense kernels, the BICGSTAB solver and partial SVD.

pub mod dense;
pub mod eigen;
pub mod solver;
pub mod sparse;
pub mod svd;

pub use dense::{dense_matmat, dense_matvec, dense_matvec_transpose, dense_sub, dense_transpose};
pub use eigen::{jacobi_svd, tridiagonal_eigen};
pub use solver::{
    bicgstab_solve, jacobi_preconditioner, IdentityPreconditioner, JacobiPreconditioner, Preconditioner,
    SolveStats,
};
pub use sparse::{
    matrix_shift, sparse_dense_matmat, sparse_matmat, sparse_matvec, sparse_matvec_into, sparse_matvec_transpose,
    sparse_transpose,
};
pub use svd::{max_forward_residual, residuals, svd_cross, svd_lanczos, MatrixRef, SvdFactors, DEFAULT_SVD_TOL};
