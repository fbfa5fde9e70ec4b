use approx::assert_relative_eq;
use irls_core::linalg::{
    null_space_basis, orthogonality_defect, weighted_ls_solve, RealVector, SensingMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// A random full-rank m×N matrix with m in 4..=10, N in m+2..=16, plus a
/// positive weight vector and a right-hand side.
fn instance() -> impl Strategy<Value = (SensingMatrix, RealVector, RealVector)> {
    (4usize..=10)
        .prop_flat_map(|m| (Just(m), (m + 2).max(6)..=16))
        .prop_flat_map(|(m, n)| {
            (
                prop::collection::vec(-1.0f64..1.0, m * n),
                prop::collection::vec(-2.0f64..2.0, m),
                prop::collection::vec(0.05f64..20.0, n),
                Just((m, n)),
            )
        })
        .prop_filter_map("rank deficient", |(a, y, w, (m, n))| {
            let phi = SensingMatrix::from_row_major(m, n, &a).ok()?;
            Some((phi, RealVector::from_vec(y), RealVector::from_vec(w)))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weighted_solve_is_feasible_and_orthogonal((phi, y, w) in instance()) {
        let x = weighted_ls_solve(&phi, &y, &w).unwrap();
        let resid = (phi.apply(&x) - &y).norm();
        prop_assert!(resid <= 1e-9 * (1.0 + y.norm()), "residual {resid}");
        let basis = null_space_basis(&phi).unwrap();
        let defect = orthogonality_defect(&x, &w, &basis);
        prop_assert!(defect <= 1e-8, "defect {defect}");
    }

    #[test]
    fn weighted_solve_scale_equivariant((phi, y, w) in instance(), c in -50.0f64..50.0) {
        let x = weighted_ls_solve(&phi, &y, &w).unwrap();
        let xc = weighted_ls_solve(&phi, &(&y * c), &w).unwrap();
        let diff = (xc - &x * c).norm();
        prop_assert!(diff <= 1e-12 * (&x * c).norm().max(f64::MIN_POSITIVE), "diff {diff}");
    }

    #[test]
    fn weighted_solve_weight_scale_invariant((phi, y, w) in instance(), s in 0.01f64..100.0) {
        let x = weighted_ls_solve(&phi, &y, &w).unwrap();
        let xs = weighted_ls_solve(&phi, &y, &(&w * s)).unwrap();
        prop_assert!((xs - &x).norm() <= 1e-10 * x.norm());
    }

    #[test]
    fn null_space_basis_orthonormal_and_annihilated((phi, _y, _w) in instance()) {
        let b = null_space_basis(&phi).unwrap();
        let q = b.matrix();
        prop_assert_eq!(q.ncols(), phi.cols() - phi.rows());
        let gram = q.transpose() * q;
        let eye = DMatrix::<f64>::identity(q.ncols(), q.ncols());
        prop_assert!((gram - eye).amax() <= 1e-12);
        prop_assert!((phi.as_matrix() * q).amax() <= 1e-12 * phi.frobenius_norm().max(1.0));
    }
}

/// The weighted solve is the minimizer of Σ w_j z_j² over Φz = y; compare
/// with moving along random kernel directions.
#[test]
fn weighted_solve_minimizes_weighted_norm() {
    let phi = SensingMatrix::from_row_major(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 1.0, 1.0]).unwrap();
    let y = RealVector::from_vec(vec![1.0, -2.0]);
    let w = RealVector::from_vec(vec![1.0, 4.0, 0.25, 2.0]);
    let x = weighted_ls_solve(&phi, &y, &w).unwrap();
    let energy = |z: &RealVector| z.iter().zip(w.iter()).map(|(a, b)| a * a * b).sum::<f64>();
    let basis = null_space_basis(&phi).unwrap();
    for i in 0..50 {
        let t = (i as f64 - 25.0) / 10.0;
        let coords = RealVector::from_vec(vec![t, 0.3 * t - 0.1]);
        let z = &x + basis.combine(&coords);
        assert!(energy(&z) >= energy(&x) - 1e-12);
    }
    assert_relative_eq!((phi.apply(&x) - &y).norm(), 0.0, epsilon = 1e-12);
}
