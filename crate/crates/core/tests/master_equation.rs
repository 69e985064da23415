use num_complex::Complex64 as C64;
use proptest::prelude::*;

use roqj::linalg::{pauli, projector, BlochVector, DensityMatrix, Matrix, PureState};
use roqj::master::{
    exact_solve, gauge_transform, generator_apply, reassemble_generator, GaugeTransformation, HamiltonianTerm,
    LindbladTerm, MasterEquationModel, MasterError, RateFn, TimeGrid,
};
use roqj::models::{driven_model, phase_covariant_model, PhaseCovariantRates};

fn enm() -> MasterEquationModel {
    phase_covariant_model(PhaseCovariantRates::eternally_non_markovian(), None)
}

#[test]
fn enm_matches_closed_form() {
    // gamma_+ = gamma_- = 1: z' = -2z; rho01' = -(1 - tanh t) rho01.
    let psi = PureState::normalized(&[C64::new(0.8, 0.0), C64::new(0.36, 0.48)]).unwrap();
    let r0 = psi.bloch().unwrap();
    let grid = TimeGrid::new(4.0, 1e-3, 500).unwrap();
    let sol = exact_solve(&enm(), &projector(&psi).unwrap(), &grid).unwrap();
    for (t, rho) in sol.times.iter().zip(&sol.states) {
        let r = rho.to_bloch().unwrap();
        let coherence = (-t).exp() * t.cosh();
        assert!((r.x - r0.x * coherence).abs() < 1e-10, "x at {t}");
        assert!((r.y - r0.y * coherence).abs() < 1e-10, "y at {t}");
        assert!((r.z - r0.z * (-2.0 * t).exp()).abs() < 1e-10, "z at {t}");
    }
}

#[test]
fn amplitude_damping_matches_closed_form() {
    let model = MasterEquationModel::new(
        2,
        vec![],
        vec![LindbladTerm { operator: pauli::sigma_minus(), rate: RateFn::constant(0.7) }],
    )
    .unwrap();
    let grid = TimeGrid::new(3.0, 1e-3, 300).unwrap();
    let sol = exact_solve(&model, &projector(&PureState::basis(2, 1)).unwrap(), &grid).unwrap();
    for (t, rho) in sol.times.iter().zip(&sol.states) {
        let z = rho.to_bloch().unwrap().z;
        assert!((z - (1.0 - 2.0 * (-0.7 * t).exp())).abs() < 1e-11);
    }
}

#[test]
fn fourth_order_convergence() {
    let model = driven_model(1.0, 1.0);
    let rho0 = projector(&PureState::plus()).unwrap();
    let at_end = |dt: f64| {
        let grid = TimeGrid::new(2.0, dt, 1).unwrap();
        exact_solve(&model, &rho0, &grid).unwrap().states.last().unwrap().matrix().clone()
    };
    let (a, b, c) = (at_end(0.05), at_end(0.025), at_end(0.0125));
    let ratio = a.max_abs_diff(&b) / b.max_abs_diff(&c);
    assert!((12.0..=20.0).contains(&ratio), "Richardson ratio {ratio}");
}

#[test]
fn exact_solution_stays_a_state() {
    let model = driven_model(1.0, 10.0);
    let grid = TimeGrid::new(5.0, 1e-3, 100).unwrap();
    let sol = exact_solve(&model, &projector(&PureState::basis(2, 0)).unwrap(), &grid).unwrap();
    for rho in &sol.states {
        let m = rho.matrix();
        assert!((m.trace().re - 1.0).abs() < 1e-10);
        assert!(m.hermiticity_defect() < 1e-14);
        assert!(rho.to_bloch().unwrap().norm() <= 1.0 + 1e-10);
    }
}

#[test]
fn oversized_step_is_rejected() {
    let model = driven_model(1.0, 10.0);
    let grid = TimeGrid::new(1.0, 0.5, 1).unwrap();
    let err = exact_solve(&model, &projector(&PureState::plus()).unwrap(), &grid).unwrap_err();
    assert!(matches!(err, MasterError::StepSizeError { .. }));
    assert!(TimeGrid::new(1.0, 0.0, 1).is_err());
    assert!(TimeGrid::new(1.0, 0.1, 0).is_err());
}

#[test]
fn tabulated_rates_interpolate_linearly() {
    let r = RateFn::Tabulated { times: vec![0.0, 1.0, 3.0], values: vec![1.0, -1.0, 3.0] };
    assert_eq!(r.eval(0.5), 0.0);
    assert_eq!(r.eval(2.0), 1.0);
    assert_eq!(r.eval(-1.0), 1.0);
    assert_eq!(r.eval(9.0), 3.0);
    let json = r#"{"kind": "sum", "terms": [{"kind": "constant", "value": 0.5}, {"kind": "tanh", "amplitude": -0.5, "scale": 1.0}]}"#;
    let parsed: RateFn = serde_json::from_str(json).unwrap();
    assert!((parsed.eval(0.3) - (0.5 - 0.5 * 0.3f64.tanh())).abs() < 1e-15);
}

fn random_qubit_model(v: &[f64]) -> MasterEquationModel {
    let h = Matrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => C64::new(v[0], 0.0),
        (1, 1) => C64::new(-v[0], 0.0),
        (0, 1) => C64::new(v[1], v[2]),
        _ => C64::new(v[1], -v[2]),
    });
    MasterEquationModel::new(
        2,
        vec![HamiltonianTerm { coefficient: RateFn::constant(1.0), operator: h }],
        vec![
            LindbladTerm { operator: pauli::sigma_plus(), rate: RateFn::constant(v[3]) },
            LindbladTerm { operator: pauli::sigma_minus(), rate: RateFn::constant(v[4]) },
            LindbladTerm { operator: pauli::sigma_z(), rate: RateFn::constant(v[5]) },
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gauge_transformations_leave_the_generator_unchanged(
        model_params in prop::collection::vec(-2.0f64..2.0, 6),
        c in prop::collection::vec(-3.0f64..3.0, 8),
        bloch in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let model = random_qubit_model(&model_params);
        let c = Matrix::from_fn(2, |i, j| C64::new(c[2 * (2 * i + j)], c[2 * (2 * i + j) + 1]));
        let n = (bloch[0].powi(2) + bloch[1].powi(2) + bloch[2].powi(2)).sqrt().max(1.0);
        let rho = DensityMatrix::from_bloch(&BlochVector::new(bloch[0] / n, bloch[1] / n, bloch[2] / n));
        let (j, k) = gauge_transform(&model, &GaugeTransformation::constant(c), 0.3, &rho);
        let lhs = reassemble_generator(&j, &k, &rho);
        let rhs = generator_apply(&model, 0.3, &rho);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12, "difference {}", lhs.max_abs_diff(&rhs));
    }

    #[test]
    fn generator_is_trace_free_and_hermitian(
        model_params in prop::collection::vec(-2.0f64..2.0, 6),
        bloch in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let model = random_qubit_model(&model_params);
        let n = (bloch[0].powi(2) + bloch[1].powi(2) + bloch[2].powi(2)).sqrt().max(1.0);
        let rho = DensityMatrix::from_bloch(&BlochVector::new(bloch[0] / n, bloch[1] / n, bloch[2] / n));
        let l = generator_apply(&model, 0.0, &rho);
        prop_assert!(l.trace().norm() < 1e-13);
        prop_assert!(l.hermiticity_defect() < 1e-13);
    }
}
