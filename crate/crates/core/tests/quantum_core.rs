use num_complex::Complex64 as C64;
use proptest::prelude::*;

use roqj::linalg::{
    hermitian_eigendecomposition, orthogonal_complement, projector, BlochVector, DensityMatrix, HermitianOperator,
    LinalgError, Matrix, PureState,
};

fn hermitian(dim: usize, entries: &[f64]) -> Matrix {
    let mut k = 0;
    let mut rows = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        rows[i][i] = C64::new(entries[k], 0.0);
        k += 1;
        for j in (i + 1)..dim {
            let z = C64::new(entries[k], entries[k + 1]);
            k += 2;
            rows[i][j] = z;
            rows[j][i] = z.conj();
        }
    }
    Matrix::from_fn(dim, |i, j| rows[i][j])
}

fn check_decomposition(m: &Matrix) {
    let h = HermitianOperator::new(m.clone()).unwrap();
    let pairs = hermitian_eigendecomposition(&h);
    let dim = m.dim();
    assert_eq!(pairs.len(), dim);
    let scale = m.frobenius_norm().max(1.0);
    let mut rebuilt = Matrix::zeros(dim);
    for p in &pairs {
        let v = p.vector.amplitudes();
        rebuilt = &rebuilt + &Matrix::outer(v, v).scale_real(p.value);
    }
    assert!(rebuilt.max_abs_diff(m) < 1e-10 * scale, "reconstruction error {}", rebuilt.max_abs_diff(m));
    for (i, a) in pairs.iter().enumerate() {
        for (j, b) in pairs.iter().enumerate() {
            let ip = a.vector.inner(&b.vector).norm();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((ip - expected).abs() < 1e-10, "overlap {ip} between {i} and {j}");
        }
    }
    assert!(pairs.windows(2).all(|w| w[0].value >= w[1].value), "not sorted descending");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn qubit_eigendecomposition_reconstructs(e in prop::collection::vec(-5.0f64..5.0, 4)) {
        check_decomposition(&hermitian(2, &e));
    }

    #[test]
    fn four_level_eigendecomposition_reconstructs(e in prop::collection::vec(-5.0f64..5.0, 16)) {
        check_decomposition(&hermitian(4, &e));
    }

    #[test]
    fn bloch_round_trip_through_pure_states(z in -1.0f64..1.0, phi in 0.0f64..std::f64::consts::TAU) {
        let s = (1.0 - z * z).sqrt();
        let r = BlochVector::new(s * phi.cos(), s * phi.sin(), z);
        let back = r.to_pure_state().bloch().unwrap();
        prop_assert!((back.x - r.x).abs() < 1e-12 && (back.y - r.y).abs() < 1e-12 && (back.z - r.z).abs() < 1e-12);
    }

    #[test]
    fn bloch_round_trip_through_density_matrices(
        x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, shrink in 0.0f64..1.0,
    ) {
        let n = (x * x + y * y + z * z).sqrt().max(1.0);
        let r = BlochVector::new(shrink * x / n, shrink * y / n, shrink * z / n);
        let rho = DensityMatrix::from_bloch(&r);
        let back = rho.to_bloch().unwrap();
        prop_assert!((back.x - r.x).abs() < 1e-14 && (back.y - r.y).abs() < 1e-14 && (back.z - r.z).abs() < 1e-14);
        prop_assert!((rho.purity() - 0.5 * (1.0 + r.norm() * r.norm())).abs() < 1e-12);
    }

    #[test]
    fn gauge_fix_keeps_the_ray(re0 in -1.0f64..1.0, im0 in -1.0f64..1.0, re1 in -1.0f64..1.0, im1 in -1.0f64..1.0) {
        prop_assume!(re0.abs() + im0.abs() + re1.abs() + im1.abs() > 1e-3);
        let psi = PureState::normalized(&[C64::new(re0, im0), C64::new(re1, im1)]).unwrap();
        let fixed = psi.clone().gauge_fixed();
        prop_assert!((fixed.fidelity(&psi) - 1.0).abs() < 1e-12);
        let lead = fixed.amplitudes().iter().find(|a| a.norm() > 1e-12).unwrap();
        prop_assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
    }

    #[test]
    fn complement_spans_the_rest(v in prop::collection::vec(-1.0f64..1.0, 8)) {
        prop_assume!(v.iter().map(|x| x.abs()).sum::<f64>() > 1e-3);
        let amps: Vec<C64> = v.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        let psi = PureState::normalized(&amps).unwrap();
        let rest = orthogonal_complement(&psi);
        prop_assert_eq!(rest.len(), 3);
        let mut total = projector(&psi).unwrap().matrix().clone();
        for r in &rest {
            prop_assert!(r.inner(&psi).norm() < 1e-12);
            total = &total + &Matrix::outer(r.amplitudes(), r.amplitudes());
        }
        prop_assert!(total.max_abs_diff(&Matrix::identity(4)) < 1e-12);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let bad = Matrix::from_rows(&[&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)], &[C64::new(0.0, 1.0), C64::new(1.0, 0.0)]]);
    assert!(matches!(HermitianOperator::new(bad), Err(LinalgError::NonHermitianInput { .. })));
    assert!(matches!(PureState::new(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]), Err(LinalgError::NormalizationError { .. })));
    assert!(PureState::normalized(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).is_err());
    let negative = Matrix::from_rows(&[&[C64::new(1.5, 0.0), C64::new(0.0, 0.0)], &[C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]]);
    assert!(matches!(DensityMatrix::new(negative), Err(LinalgError::InvalidDensityMatrix { .. })));
}
