//! Matrix-free linear operators: forward models `A` and regularization
//! matrices `L`, each with an adjoint.

mod blur;
mod diff;
mod tomo;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub use blur::{gaussian_psf, BlurOperator, PsfParams};
pub use diff::{finite_difference_2d, FiniteDifference2d};
pub use tomo::{build_tomo_operator, build_tomo_operator_with, Point, TomoLayout, TomoOperator};

/// A regular `ny x nx` pixel grid on the unit square.
///
/// Pixels are stored row-major: index `row * nx + col`, where `col` runs along
/// the x axis and `row` along the y axis. Pixel centers are the spatial points
/// used for covariance kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
}

impl GridGeometry {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::DegenerateGeometry(format!(
                "grid must be at least 1x1, got {ny}x{nx}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.nx + col
    }

    /// Center of pixel `i` as `(x, y)`.
    pub fn point(&self, i: usize) -> (f64, f64) {
        let (row, col) = (i / self.nx, i % self.nx);
        (
            (col as f64 + 0.5) / self.nx as f64,
            (row as f64 + 0.5) / self.ny as f64,
        )
    }

    pub fn spacing(&self) -> (f64, f64) {
        (1.0 / self.nx as f64, 1.0 / self.ny as f64)
    }
}

/// A linear map `R^ncols -> R^nrows` available through products with itself
/// and its transpose.
pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `A x` without a dimension check.
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `A^T y` without a dimension check.
    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64>;

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.ncols(), x.len())?;
        Ok(self.matvec(x))
    }

    fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.nrows(), y.len())?;
        Ok(self.matvec_t(y))
    }

    /// Materialize the operator column by column. Test and diagnostic use only.
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.ncols();
        let mut out = DMatrix::zeros(self.nrows(), n);
        let mut e = DVector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            out.set_column(j, &self.matvec(&e));
            e[j] = 0.0;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity {
    pub n: usize,
}

impl LinearOperator for Identity {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }
    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64> {
        y.clone()
    }
}

/// An explicit dense matrix, mostly useful for small problems and oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
}

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }
    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(y)
    }
}

/// The closed set of operators the toolkit constructs.
#[derive(Debug, Clone)]
pub enum Operator {
    Blur(BlurOperator),
    Tomography(TomoOperator),
    Identity(Identity),
    FiniteDifference(FiniteDifference2d),
    Dense(DenseOperator),
}

impl Operator {
    pub fn identity(n: usize) -> Self {
        Operator::Identity(Identity { n })
    }

    pub fn dense(matrix: DMatrix<f64>) -> Self {
        Operator::Dense(DenseOperator { matrix })
    }

    fn inner(&self) -> &dyn LinearOperator {
        match self {
            Operator::Blur(op) => op,
            Operator::Tomography(op) => op,
            Operator::Identity(op) => op,
            Operator::FiniteDifference(op) => op,
            Operator::Dense(op) => op,
        }
    }
}

impl LinearOperator for Operator {
    fn nrows(&self) -> usize {
        self.inner().nrows()
    }
    fn ncols(&self) -> usize {
        self.inner().ncols()
    }
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner().matvec(x)
    }
    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64> {
        self.inner().matvec_t(y)
    }
}

impl From<BlurOperator> for Operator {
    fn from(op: BlurOperator) -> Self {
        Operator::Blur(op)
    }
}

impl From<TomoOperator> for Operator {
    fn from(op: TomoOperator) -> Self {
        Operator::Tomography(op)
    }
}

impl From<FiniteDifference2d> for Operator {
    fn from(op: FiniteDifference2d) -> Self {
        Operator::FiniteDifference(op)
    }
}
