//! Sample-covariance (SC) baseline: choose kernel hyperparameters so that
//! `Q(beta)` matches the sample covariance of the training images in a
//! randomized Frobenius norm.

use nalgebra::DVector;
use rand::Rng as _;
use serde::Serialize;

use super::OidBounds;
use crate::error::{Error, Result};
use crate::kernels::{CovarianceOperator, KernelFamily, KernelSpec, Representation};
use crate::linalg::mean_of;
use crate::noise::TrainingSet;
use crate::operators::{GridGeometry, LinearOperator};
use crate::optim::nelder_mead;
use crate::rng::Rng;
use crate::surrogate::{Bounds, Scale};

/// Rademacher probes `xi` and the sample covariance applied to each.
#[derive(Debug, Clone)]
pub struct ScProbes {
    pub xi: Vec<DVector<f64>>,
    pub qhat_xi: Vec<DVector<f64>>,
}

impl ScProbes {
    /// Draw `m` probes and apply the centered sample covariance of the
    /// ground-truth images of `set` without forming it.
    pub fn new(set: &TrainingSet, m: usize, rng: &mut Rng) -> Result<Self> {
        let j = set.len();
        if j < 2 {
            return Err(Error::NotEnoughSamples { needed: 2, got: j });
        }
        if m == 0 {
            return Err(Error::invalid("probes", "need at least one probe vector"));
        }
        let xs: Vec<&DVector<f64>> = set.samples.iter().map(|s| &s.x_true).collect();
        let mean = mean_of(&xs).expect("nonempty");
        let dev: Vec<DVector<f64>> = xs.iter().map(|x| *x - &mean).collect();
        let n = mean.len();
        let xi: Vec<DVector<f64>> = (0..m)
            .map(|_| DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }))
            .collect();
        let qhat_xi = xi
            .iter()
            .map(|v| {
                let mut acc = DVector::zeros(n);
                for d in &dev {
                    acc.axpy(d.dot(v), d, 1.0);
                }
                acc / (j - 1) as f64
            })
            .collect();
        Ok(Self { xi, qhat_xi })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

/// Per-probe terms `||(Q(beta) - Qhat) xi_i||^2`.
pub fn sc_probe_terms(
    kernel: KernelSpec,
    geom: GridGeometry,
    probes: &ScProbes,
    repr: Representation,
) -> Result<Vec<f64>> {
    let q = CovarianceOperator::new(kernel, geom, repr)?;
    Ok(probes
        .xi
        .iter()
        .zip(&probes.qhat_xi)
        .map(|(xi, qx)| (q.matvec(xi) - qx).norm_squared())
        .collect())
}

/// Hutchinson estimate of `||Q(beta) - Qhat||_F^2`.
pub fn sc_objective(kernel: KernelSpec, geom: GridGeometry, probes: &ScProbes, repr: Representation) -> Result<f64> {
    let terms = sc_probe_terms(kernel, geom, probes, repr)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScFit {
    pub kernel: KernelSpec,
    pub objective: f64,
}

fn reflect(u: f64) -> f64 {
    let r = u.rem_euclid(2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

fn kernel_box(family: KernelFamily, b: &OidBounds) -> Result<Bounds> {
    b.validate()?;
    match family {
        KernelFamily::SquaredExponential => Bounds::new(vec![b.sqexp_beta.0], vec![b.sqexp_beta.1], vec![Scale::Linear]),
        KernelFamily::Matern => Bounds::new(
            vec![b.matern_nu.0, b.matern_length.0],
            vec![b.matern_nu.1, b.matern_length.1],
            vec![Scale::Linear; 2],
        ),
    }
}

/// Fit the hyperparameters of `family` to the sample covariance of the
/// training images with `m` Rademacher probes. A coarse grid over the box
/// seeds a Nelder-Mead search that works in the unit cube and reflects at
/// its faces.
pub fn sc_fit(
    set: &TrainingSet,
    family: KernelFamily,
    m: usize,
    bounds: &OidBounds,
    repr: Representation,
    rng: &mut Rng,
) -> Result<ScFit> {
    let probes = ScProbes::new(set, m, rng)?;
    let bx = kernel_box(family, bounds)?;
    let geom = set.geom;
    let f = |u: &[f64]| {
        let u: Vec<f64> = u.iter().map(|&v| reflect(v)).collect();
        family
            .with_params(&bx.from_unit(&u))
            .and_then(|k| sc_objective(k, geom, &probes, repr))
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::INFINITY)
    };

    let dim = family.n_params();
    let per_axis: usize = if dim == 1 { 25 } else { 8 };
    let mut best = (vec![0.5; dim], f64::INFINITY);
    for idx in 0..per_axis.pow(dim as u32) {
        let mut rest = idx;
        let u: Vec<f64> = (0..dim)
            .map(|_| {
                let i = rest % per_axis;
                rest /= per_axis;
                (i as f64 + 0.5) / per_axis as f64
            })
            .collect();
        let v = f(&u);
        if v < best.1 {
            best = (u, v);
        }
    }

    let step = 0.5 / per_axis as f64;
    let mut simplex = vec![best.0.clone()];
    for d in 0..dim {
        let mut p = best.0.clone();
        p[d] += if p[d] + step <= 1.0 { step } else { -step };
        simplex.push(p);
    }
    let (u, v) = nelder_mead(f, simplex, 1e-10, 400);
    let u_final = if v <= best.1 { u } else { best.0 };
    let u_final: Vec<f64> = u_final.iter().map(|&x| reflect(x)).collect();
    let kernel = family.with_params(&bx.from_unit(&u_final))?;
    Ok(ScFit {
        kernel,
        objective: v.min(best.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_stays_in_unit_interval() {
        for (u, r) in [(0.3, 0.3), (1.2, 0.8), (-0.25, 0.25), (2.5, 0.5), (1.0, 1.0)] {
            assert!((reflect(u) - r).abs() < 1e-15, "{u}");
        }
    }
}
