//! Optimal inversion design: learning regularization parameters, data-fit and
//! penalty exponents, and prior covariance hyperparameters for linear inverse
//! problems from training data.
//!
//! The crate is organised bottom-up:
//!
//! - [`operators`]: matrix-free forward models (periodic Gaussian blur,
//!   straight-ray travel-time tomography, finite differences) with adjoints.
//! - [`noise`]: observation simulation and training-set construction.
//! - [`lplq`]: the Lp-Lq inner solver (majorization-minimization on generalized
//!   Krylov subspaces) and CGLS for the quadratic case.
//! - [`kernels`]: squared-exponential and Matérn covariance operators.
//! - [`gengk`]: generalized Golub-Kahan projection solver and its hybrid
//!   variant with weighted GCV.
//! - [`surrogate`]: RBF surrogate global optimizer for the outer problem.
//! - [`oid`]: the bi-level driver tying everything together.
//! - [`matrix_file`]: the binary matrix container used for persisted data.

pub mod error;
pub mod fft2;
pub mod gengk;
pub mod kernels;
pub mod linalg;
pub mod lplq;
pub mod matrix_file;
pub mod noise;
pub mod oid;
pub mod optim;
pub mod operators;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
pub use operators::{GridGeometry, LinearOperator, Operator};
