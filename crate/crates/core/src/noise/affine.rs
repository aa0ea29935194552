use nalgebra::DVector;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::operators::GridGeometry;
use crate::rng::Rng;

/// Rotation about the image center, then isotropic scaling, then a shift
/// given as a fraction of the grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotation_deg: f64,
    pub scale: f64,
    pub shift_x: f64,
    pub shift_y: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        rotation_deg: 0.0,
        scale: 1.0,
        shift_x: 0.0,
        shift_y: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AffineRanges {
    pub max_rotation_deg: f64,
    pub max_shift: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for AffineRanges {
    fn default() -> Self {
        Self {
            max_rotation_deg: 20.0,
            max_shift: 0.05,
            scale_min: 0.9,
            scale_max: 1.1,
        }
    }
}

impl AffineRanges {
    pub fn draw(&self, rng: &mut Rng) -> AffineParams {
        let sym = |rng: &mut Rng, half: f64| {
            if half > 0.0 {
                rng.random_range(-half..=half)
            } else {
                0.0
            }
        };
        let rotation_deg = sym(rng, self.max_rotation_deg);
        let scale = if self.scale_max > self.scale_min {
            rng.random_range(self.scale_min..=self.scale_max)
        } else {
            self.scale_min
        };
        let shift_x = sym(rng, self.max_shift);
        let shift_y = sym(rng, self.max_shift);
        AffineParams {
            rotation_deg,
            scale,
            shift_x,
            shift_y,
        }
    }
}

/// Warp `image` by `params` with bilinear interpolation; samples falling
/// outside the grid read as zero.
pub fn apply_affine(image: &DVector<f64>, geom: GridGeometry, params: &AffineParams) -> DVector<f64> {
    let (nx, ny) = (geom.nx as f64, geom.ny as f64);
    let (cx, cy) = ((nx - 1.0) / 2.0, (ny - 1.0) / 2.0);
    let (sin, cos) = params.rotation_deg.to_radians().sin_cos();
    let (tx, ty) = (params.shift_x * nx, params.shift_y * ny);
    let pixel = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= geom.ny as isize || c >= geom.nx as isize {
            0.0
        } else {
            image[geom.index(r as usize, c as usize)]
        }
    };
    DVector::from_fn(geom.len(), |i, _| {
        let (r, c) = ((i / geom.nx) as f64, (i % geom.nx) as f64);
        // Invert output = s R p + t.
        let (px, py) = ((c - cx - tx) / params.scale, (r - cy - ty) / params.scale);
        let sx = cos * px + sin * py + cx;
        let sy = -sin * px + cos * py + cy;
        let (x0, y0) = (sx.floor(), sy.floor());
        let (fx, fy) = (sx - x0, sy - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        (1.0 - fy) * ((1.0 - fx) * pixel(y0, x0) + fx * pixel(y0, x0 + 1))
            + fy * ((1.0 - fx) * pixel(y0 + 1, x0) + fx * pixel(y0 + 1, x0 + 1))
    })
}

pub fn random_affine_transform(
    image: &DVector<f64>,
    geom: GridGeometry,
    ranges: &AffineRanges,
    rng: &mut Rng,
) -> (DVector<f64>, AffineParams) {
    let params = ranges.draw(rng);
    (apply_affine(image, geom, &params), params)
}
