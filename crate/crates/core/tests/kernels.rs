use nalgebra::DVector;
use oid_core::kernels::{cov_matvec, CovarianceOperator, KernelSpec, Representation};
use oid_core::GridGeometry;
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.01f64..=0.5).prop_map(|beta| KernelSpec::SquaredExponential { beta }),
        (0.5f64..=15.0, 0.05f64..=0.7).prop_map(|(nu, length)| KernelSpec::Matern { nu, length }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn covariance_is_positive_semidefinite(kernel in kernel_strategy(), nx in 2usize..=12, ny in 2usize..=12) {
        let q = CovarianceOperator::new(kernel, GridGeometry::new(nx, ny).unwrap(), Representation::Dense).unwrap();
        let m = q.materialize();
        prop_assert!((&m - m.transpose()).amax() == 0.0);
        prop_assert!(m.diagonal().iter().all(|&d| d == 1.0));
        let min = m.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-8, "min eigenvalue {min}");
    }

    #[test]
    fn matvec_is_symmetric(kernel in kernel_strategy(), seed in 0u64..1000, embedded in any::<bool>()) {
        let geom = GridGeometry::new(9, 7).unwrap();
        let repr = if embedded { Representation::Embedded } else { Representation::Dense };
        let q = CovarianceOperator::new(kernel, geom, repr).unwrap();
        let u = DVector::from_fn(63, |i, _| ((i as u64 * 31 + seed) as f64).sin());
        let v = DVector::from_fn(63, |i, _| ((i as u64 * 17 + 3 * seed) as f64).cos());
        let lhs = cov_matvec(&q, &u).unwrap().dot(&v);
        let rhs = u.dot(&cov_matvec(&q, &v).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}
