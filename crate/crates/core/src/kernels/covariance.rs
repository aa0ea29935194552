use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::error::{check_len, Result};
use crate::fft2::Fft2;
use crate::operators::{GridGeometry, LinearOperator};

/// Grids with at least this many pixels use the FFT path under `Auto`.
const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Direct summation over all pixel pairs.
    Dense,
    /// Circulant embedding on a doubled grid, applied with FFTs.
    Embedded,
    #[default]
    Auto,
}

/// Prior covariance `Q_ij = kappa(|p_i - p_j|)` over the pixel centers of a
/// grid. Stationarity means `Q` depends only on the pixel offset, so it is
/// stored as a table over offsets rather than as an `n x n` matrix.
#[derive(Debug, Clone)]
pub struct CovarianceOperator {
    kernel: KernelSpec,
    geom: GridGeometry,
    representation: Representation,
    /// `kappa` for offsets `(dr, dc)` with `|dr| < ny`, `|dc| < nx`, indexed as
    /// `(dr + ny - 1) * (2 nx - 1) + (dc + nx - 1)`.
    offsets: Vec<f64>,
    embedding: Option<Embedding>,
}

#[derive(Debug, Clone)]
struct Embedding {
    fft: Fft2,
    eigenvalues: Vec<f64>,
}

impl CovarianceOperator {
    pub fn new(kernel: KernelSpec, geom: GridGeometry, representation: Representation) -> Result<Self> {
        kernel.validate()?;
        let (nx, ny) = (geom.nx as isize, geom.ny as isize);
        let (hx, hy) = geom.spacing();
        let dist = |dr: isize, dc: isize| ((dc as f64 * hx).powi(2) + (dr as f64 * hy).powi(2)).sqrt();
        let mut offsets = Vec::with_capacity(((2 * ny - 1) * (2 * nx - 1)) as usize);
        for dr in -(ny - 1)..ny {
            for dc in -(nx - 1)..nx {
                offsets.push(kernel.value(dist(dr, dc)));
            }
        }
        let representation = match representation {
            Representation::Auto if geom.len() < DENSE_LIMIT => Representation::Dense,
            Representation::Auto => Representation::Embedded,
            other => other,
        };
        let embedding = (representation == Representation::Embedded).then(|| {
            let (rows, cols) = (2 * geom.ny, 2 * geom.nx);
            let wrap = |i: usize, n: isize| {
                let i = i as isize;
                if i < n {
                    i
                } else {
                    i - 2 * n
                }
            };
            let mut first = vec![0.0; rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    first[r * cols + c] = kernel.value(dist(wrap(r, ny), wrap(c, nx)));
                }
            }
            let fft = Fft2::new(rows, cols);
            let eigenvalues = fft.forward_real(&first).into_iter().map(|z| z.re).collect();
            Embedding { fft, eigenvalues }
        });
        Ok(Self {
            kernel,
            geom,
            representation,
            offsets,
            embedding,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geom
    }

    /// Resolved representation (never `Auto`).
    pub fn representation(&self) -> Representation {
        self.representation
    }

    #[inline]
    fn offset_value(&self, dr: isize, dc: isize) -> f64 {
        let nx = self.geom.nx as isize;
        let ny = self.geom.ny as isize;
        self.offsets[((dr + ny - 1) * (2 * nx - 1) + dc + nx - 1) as usize]
    }

    /// Entry `Q_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let nx = self.geom.nx;
        let dr = (i / nx) as isize - (j / nx) as isize;
        let dc = (i % nx) as isize - (j % nx) as isize;
        self.offset_value(dr, dc)
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        let n = self.geom.len();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    fn apply_dense(&self, v: &DVector<f64>) -> DVector<f64> {
        let (nx, ny) = (self.geom.nx, self.geom.ny);
        let row_len = 2 * nx - 1;
        let mut out = DVector::zeros(self.geom.len());
        for ri in 0..ny {
            for ci in 0..nx {
                let mut acc = 0.0;
                for rj in 0..ny {
                    let base = (ri + ny - 1 - rj) * row_len + ci + nx - 1;
                    let vrow = &v.as_slice()[rj * nx..(rj + 1) * nx];
                    for (cj, vj) in vrow.iter().enumerate() {
                        acc += self.offsets[base - cj] * vj;
                    }
                }
                out[ri * nx + ci] = acc;
            }
        }
        out
    }

    fn apply_embedded(&self, emb: &Embedding, v: &DVector<f64>) -> DVector<f64> {
        let (nx, ny) = (self.geom.nx, self.geom.ny);
        let cols = 2 * nx;
        let mut padded = vec![0.0; 4 * nx * ny];
        for r in 0..ny {
            padded[r * cols..r * cols + nx].copy_from_slice(&v.as_slice()[r * nx..(r + 1) * nx]);
        }
        let spectrum: Vec<Complex64> = emb
            .fft
            .forward_real(&padded)
            .into_iter()
            .zip(&emb.eigenvalues)
            .map(|(z, l)| z * *l)
            .collect();
        let full = emb.fft.inverse_real(spectrum);
        let mut out = DVector::zeros(nx * ny);
        for r in 0..ny {
            out.as_mut_slice()[r * nx..(r + 1) * nx].copy_from_slice(&full[r * cols..r * cols + nx]);
        }
        out
    }
}

impl LinearOperator for CovarianceOperator {
    fn nrows(&self) -> usize {
        self.geom.len()
    }

    fn ncols(&self) -> usize {
        self.geom.len()
    }

    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.embedding {
            Some(emb) => self.apply_embedded(emb, x),
            None => self.apply_dense(x),
        }
    }

    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matvec(y)
    }
}

/// `Q v` with a dimension check.
pub fn cov_matvec(q: &CovarianceOperator, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(q.ncols(), v.len())?;
    Ok(q.matvec(v))
}
