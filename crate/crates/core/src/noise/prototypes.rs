//! Synthetic ground-truth generators.
//!
//! `blob_prototype` draws piecewise-constant "satellite-like" objects: a body,
//! two panels on a boom, and an optional dish, on a zero background.
//! `smooth_prototype` draws smooth media as a positive background plus a sum
//! of randomized Gaussian bumps.

use nalgebra::DVector;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::operators::GridGeometry;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrototypeKind {
    Blobs,
    Smooth,
}

impl PrototypeKind {
    pub fn generate(self, geom: GridGeometry, rng: &mut Rng) -> DVector<f64> {
        match self {
            PrototypeKind::Blobs => blob_prototype(geom, rng),
            PrototypeKind::Smooth => smooth_prototype(geom, rng),
        }
    }
}

pub fn blob_prototype(geom: GridGeometry, rng: &mut Rng) -> DVector<f64> {
    let mut img = DVector::zeros(geom.len());
    let cx = rng.random_range(0.42..0.58);
    let cy = rng.random_range(0.42..0.58);
    let angle: f64 = rng.random_range(-0.6..0.6);
    let (sin, cos) = angle.sin_cos();

    let body_w = rng.random_range(0.10..0.18);
    let body_h = rng.random_range(0.14..0.24);
    let body_val = rng.random_range(0.7..1.0);
    let panel_len = rng.random_range(0.12..0.2);
    let panel_h = rng.random_range(0.05..0.1);
    let panel_val = rng.random_range(0.35..0.6);
    let boom = rng.random_range(0.01..0.03);
    let has_dish = rng.random_bool(0.6);
    let dish_r = rng.random_range(0.04..0.07);
    let dish_val = rng.random_range(0.5..0.9);

    for i in 0..geom.len() {
        let (x, y) = geom.point(i);
        // Object frame.
        let (dx, dy) = (x - cx, y - cy);
        let u = cos * dx + sin * dy;
        let v = -sin * dx + cos * dy;
        let mut val = 0.0;
        let half_span = body_w / 2.0 + 0.02 + panel_len;
        if u.abs() <= half_span && v.abs() <= boom / 2.0 {
            val = panel_val * 0.8;
        }
        let pu = u.abs() - (body_w / 2.0 + 0.02);
        if (0.0..=panel_len).contains(&pu) && v.abs() <= panel_h / 2.0 {
            val = panel_val;
        }
        if u.abs() <= body_w / 2.0 && v.abs() <= body_h / 2.0 {
            val = body_val;
        }
        if has_dish {
            let (du, dv) = (u, v - body_h / 2.0 - dish_r * 0.6);
            if du * du + dv * dv <= dish_r * dish_r {
                val = dish_val;
            }
        }
        img[i] = val;
    }
    img
}

pub fn smooth_prototype(geom: GridGeometry, rng: &mut Rng) -> DVector<f64> {
    let n_bumps = rng.random_range(3..=6);
    let background = rng.random_range(0.2..0.4);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            (
                rng.random_range(0.15..0.85),
                rng.random_range(0.15..0.85),
                rng.random_range(0.08..0.25),
                rng.random_range(-0.5..1.0),
            )
        })
        .collect();
    DVector::from_fn(geom.len(), |i, _| {
        let (x, y) = geom.point(i);
        background
            + bumps
                .iter()
                .map(|&(bx, by, w, a)| a * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * w * w)).exp())
                .sum::<f64>()
    })
}
