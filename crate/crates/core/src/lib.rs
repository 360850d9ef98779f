//! Constrained minimisation for RBF signal approximation and singular-value
//! shrinkage denoising, with the kernels, optimisers and benchmark harness
//! they need.

pub mod denoise;
pub mod error;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod neighbors;
pub mod optim;
pub mod parallel;
pub mod rbf;
pub mod types;
pub mod bench;

pub use error::{Error, Result};
pub use types::{CurvePoints, DenseMatrix, DomainKind, Point2, Signal, SparseMatrixCSR};
