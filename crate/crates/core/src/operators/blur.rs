use nalgebra::DVector;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridGeometry, LinearOperator};
use crate::error::{check_len, Error, Result};
use crate::fft2::Fft2;

/// Gaussian point spread function parameters. `sigma1` and `chi1` refer to the
/// row direction, `sigma2` and `chi2` to the column direction; widths are in
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub chi1: f64,
    pub chi2: f64,
}

impl PsfParams {
    /// PSF centered at the grid midpoint `(rows / 2, cols / 2)`.
    pub fn centered(sigma1: f64, sigma2: f64, geom: GridGeometry) -> Self {
        Self {
            sigma1,
            sigma2,
            chi1: (geom.ny / 2) as f64,
            chi2: (geom.nx / 2) as f64,
        }
    }

    fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return Err(Error::invalid("sigma1", format!("must be positive, got {}", self.sigma1)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", format!("must be positive, got {}", self.sigma2)));
        }
        if !(0.0..=(rows as f64 - 1.0)).contains(&self.chi1) {
            return Err(Error::invalid("chi1", format!("center row {} outside PSF grid", self.chi1)));
        }
        if !(0.0..=(cols as f64 - 1.0)).contains(&self.chi2) {
            return Err(Error::invalid("chi2", format!("center column {} outside PSF grid", self.chi2)));
        }
        Ok(())
    }
}

/// Evaluate the Gaussian PSF on a `rows x cols` grid (row-major), scaled so
/// the entries sum to one.
pub fn gaussian_psf(params: &PsfParams, rows: usize, cols: usize) -> Result<Vec<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::DegenerateGeometry("PSF grid must be nonempty".into()));
    }
    params.validate(rows, cols)?;
    let mut psf = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let di = (i as f64 - params.chi1) / params.sigma1;
        for j in 0..cols {
            let dj = (j as f64 - params.chi2) / params.sigma2;
            psf.push((-0.5 * di * di - 0.5 * dj * dj).exp());
        }
    }
    let total: f64 = psf.iter().sum();
    psf.iter_mut().for_each(|v| *v /= total);
    Ok(psf)
}

/// Spatially invariant blur with periodic boundary conditions, applied as a
/// circular convolution in the Fourier domain.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    geom: GridGeometry,
    fft: Fft2,
    transfer: Vec<Complex64>,
}

impl BlurOperator {
    pub fn gaussian(geom: GridGeometry, sigma1: f64, sigma2: f64) -> Result<Self> {
        let params = PsfParams::centered(sigma1, sigma2, geom);
        let psf = gaussian_psf(&params, geom.ny, geom.nx)?;
        Self::from_psf(geom, &psf, geom.ny / 2, geom.nx / 2)
    }

    /// Build from an explicit image-sized PSF whose center pixel is
    /// `(center_row, center_col)`.
    pub fn from_psf(
        geom: GridGeometry,
        psf: &[f64],
        center_row: usize,
        center_col: usize,
    ) -> Result<Self> {
        check_len(geom.len(), psf.len())?;
        if center_row >= geom.ny || center_col >= geom.nx {
            return Err(Error::invalid("psf center", "outside the grid"));
        }
        // Circularly shift the PSF so its center lands on pixel (0, 0).
        let mut kernel = vec![0.0; geom.len()];
        for i in 0..geom.ny {
            let si = (i + geom.ny - center_row) % geom.ny;
            for j in 0..geom.nx {
                let sj = (j + geom.nx - center_col) % geom.nx;
                kernel[geom.index(si, sj)] = psf[geom.index(i, j)];
            }
        }
        let fft = Fft2::new(geom.ny, geom.nx);
        let transfer = fft.forward_real(&kernel);
        Ok(Self {
            geom,
            fft,
            transfer,
        })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geom
    }

    fn convolve(&self, x: &DVector<f64>, adjoint: bool) -> DVector<f64> {
        let mut spec = self.fft.forward_real(x.as_slice());
        for (s, h) in spec.iter_mut().zip(&self.transfer) {
            *s *= if adjoint { h.conj() } else { *h };
        }
        DVector::from_vec(self.fft.inverse_real(spec))
    }
}

impl LinearOperator for BlurOperator {
    fn nrows(&self) -> usize {
        self.geom.len()
    }
    fn ncols(&self) -> usize {
        self.geom.len()
    }
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        self.convolve(x, false)
    }
    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64> {
        self.convolve(y, true)
    }
}
