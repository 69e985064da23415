use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roqj::linalg::{pauli, projector, DensityMatrix, Matrix, PureState};
use roqj::master::{generator_apply, LindbladTerm, MasterEquationModel, RateFn, TimeGrid};
use roqj::models::{driven_model, phase_covariant_model, DrivenPolicy, PhaseCovariantRates, PoleJumpPolicy};
use roqj::unravel::{
    build_rate_operator, psi_roqj_step, run_ensemble, w_operator, waiting_time_jump_sampler, EnsembleOptions,
    Method, PhiPolicy, PolicyContext, RateOperatorResult, StepEvent,
};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn enm() -> MasterEquationModel {
    phase_covariant_model(PhaseCovariantRates::eternally_non_markovian(), None)
}

fn decay(rate: f64) -> MasterEquationModel {
    MasterEquationModel::new(2, vec![], vec![LindbladTerm { operator: pauli::sigma_minus(), rate: RateFn::constant(rate) }])
        .unwrap()
}

/// psi - i dt K_eff psi, the unnormalized no-jump state after one Euler step.
fn no_jump(ro: &RateOperatorResult, psi: &PureState, dt: f64) -> Vec<C64> {
    let k = psi.apply(ro.k_eff.matrix());
    psi.amplitudes().iter().zip(&k).map(|(p, kp)| p - I * dt * kp).collect()
}

/// Exact average of one unraveling step, without sampling.
fn one_step_average(ro: &RateOperatorResult, psi: &PureState, dt: f64) -> Matrix {
    let v = no_jump(ro, psi, dt);
    let mut avg = Matrix::outer(&v, &v);
    for p in &ro.eigenpairs {
        let u = p.vector.amplitudes();
        avg = &avg + &Matrix::outer(u, u).scale_real(dt * p.value);
    }
    avg
}

fn first_order_defect(model: &MasterEquationModel, policy: &PhiPolicy, ctx: &PolicyContext, psi: &PureState, t: f64, dt: f64) -> f64 {
    let ro = build_rate_operator(model, t, psi, policy, ctx).unwrap();
    let rho = projector(psi).unwrap();
    let euler = rho.matrix() + &generator_apply(model, t, &rho).scale_real(dt);
    one_step_average(&ro, psi, dt).max_abs_diff(&euler)
}

#[test]
fn one_step_average_reproduces_the_generator() {
    let psi = PureState::from_angles(0.6, 0.4);
    let ctx = PolicyContext { mixing_lambda: 0.3, initial_theta: 0.6, ..PolicyContext::default() };
    let cases: Vec<(MasterEquationModel, PhiPolicy)> = vec![
        (enm(), PhiPolicy::Zero),
        (enm(), PhiPolicy::Orthogonal { c11: None }),
        (enm(), PhiPolicy::builtin(PoleJumpPolicy::default())),
        (driven_model(1.0, 2.0), PhiPolicy::builtin(DrivenPolicy::default())),
    ];
    for (model, policy) in &cases {
        let e1 = first_order_defect(model, policy, &ctx, &psi, 0.7, 1e-2);
        let e2 = first_order_defect(model, policy, &ctx, &psi, 0.7, 5e-3);
        assert!(e1 < 1e-3, "{policy:?}: defect {e1}");
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "{policy:?}: halving ratio {ratio}");
    }
}

#[test]
fn no_jump_norm_loss_is_the_total_rate() {
    let ctx = PolicyContext { mixing_lambda: 0.7, ..PolicyContext::default() };
    let policy = PhiPolicy::builtin(PoleJumpPolicy::default());
    for k in 1..10 {
        let psi = PureState::from_angles(0.15 * k as f64, 0.3 * k as f64);
        let ro = build_rate_operator(&enm(), 1.3, &psi, &policy, &ctx).unwrap();
        for dt in [1e-3, 1e-4] {
            let v = no_jump(&ro, &psi, dt);
            let loss = 1.0 - v.iter().map(|a| a.norm_sqr()).sum::<f64>();
            assert!((loss - dt * ro.trace_r).abs() < 10.0 * dt * dt * (1.0 + ro.trace_r * ro.trace_r));
        }
        let spectrum: f64 = ro.eigenpairs.iter().map(|p| p.value).sum();
        assert!((spectrum - ro.trace_r).abs() < 1e-12);
    }
}

#[test]
fn sampled_steps_match_the_exact_average() {
    let model = driven_model(1.0, 2.0);
    let policy = PhiPolicy::builtin(DrivenPolicy::default());
    let ctx = PolicyContext::default();
    let psi = PureState::from_angles(0.5, 0.2);
    let dt = 0.02;
    let n = 40_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mean = Matrix::zeros(2);
    let mut jumps = 0;
    for _ in 0..n {
        let (next, ev, _) = psi_roqj_step(&model, &policy, &ctx, 0.0, &psi, dt, &mut rng).unwrap();
        if matches!(ev, StepEvent::Jump { .. }) {
            jumps += 1;
        }
        mean = &mean + &Matrix::outer(next.amplitudes(), next.amplitudes());
    }
    let mean = mean.scale_real(1.0 / n as f64);
    let ro = build_rate_operator(&model, 0.0, &psi, &policy, &ctx).unwrap();
    let mut exact = one_step_average(&ro, &psi, dt);
    exact = exact.scale_real(1.0 / exact.trace().re);
    // Entries are bounded by one, so 5 / sqrt(n) is a loose five-sigma bound.
    assert!(mean.max_abs_diff(&exact) < 5.0 / (n as f64).sqrt(), "diff {}", mean.max_abs_diff(&exact));
    let p = dt * ro.trace_r;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((jumps as f64 - n as f64 * p).abs() < 5.0 * sigma, "{jumps} jumps, expected {}", n as f64 * p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn orthogonal_rate_operator_matches_w(theta in 0.05f64..1.5, phi in 0.0f64..std::f64::consts::TAU, t in 0.0f64..3.0) {
        let model = driven_model(1.0, 2.0);
        let psi = PureState::from_angles(theta, phi);
        let ro = build_rate_operator(&model, t, &psi, &PhiPolicy::Orthogonal { c11: None }, &PolicyContext::default()).unwrap();
        let w = w_operator(&model, t, &psi).unwrap();
        prop_assert!(ro.r.matrix().max_abs_diff(w.matrix()) < 1e-12);
        prop_assert!(psi.apply(ro.r.matrix()).iter().all(|a| a.norm() < 1e-12));
    }

    #[test]
    fn zero_policy_rates_are_the_jump_image(theta in 0.0f64..1.57, phi in 0.0f64..std::f64::consts::TAU) {
        let model = driven_model(1.0, 2.0);
        let psi = PureState::from_angles(theta, phi);
        let ro = build_rate_operator(&model, 0.0, &psi, &PhiPolicy::Zero, &PolicyContext::default()).unwrap();
        let gamma = psi.expectation(&model.gamma_operator(0.0).into_matrix()).re;
        prop_assert!((ro.trace_r - gamma).abs() < 1e-12);
        prop_assert!(ro.min_eigenvalue() >= -1e-12);
    }
}

/// Kolmogorov-Smirnov distance between a sample and Exp(rate).
fn ks_exponential(mut xs: Vec<f64>, rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn waiting_times_are_exponential() {
    let rate = 1.5;
    let model = decay(rate);
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ctx = PolicyContext::default();
    let excited = PureState::basis(2, 1);
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        let jump = waiting_time_jump_sampler(&model, &PhiPolicy::Zero, &ctx, &excited, 0.0, 30.0, 1e-3, &mut rng)
            .unwrap()
            .expect("jumps well before the horizon");
        assert!(jump.target.fidelity(&PureState::basis(2, 0)) > 1.0 - 1e-12);
        times.push(jump.t);
    }
    let d = ks_exponential(times, rate);
    // Critical value at the 1% level.
    assert!(d < 1.628 / (n as f64).sqrt(), "KS distance {d}");
}

fn pole_run(workers: usize, n_traj: usize) -> roqj::unravel::EnsembleResult {
    let psi0 = PureState::from_angles(std::f64::consts::FRAC_PI_4, 0.0);
    let ctx = PolicyContext { initial_theta: std::f64::consts::FRAC_PI_4, mixing_lambda: 0.5, ..PolicyContext::default() };
    let grid = TimeGrid::new(2.0, 1e-3, 100).unwrap();
    let options = EnsembleOptions { n_traj, base_seed: 42, workers, ..EnsembleOptions::default() };
    let policy = PhiPolicy::builtin(PoleJumpPolicy::default());
    run_ensemble(&enm(), Method::PsiRoqj, &policy, &ctx, &psi0, &grid, &options).unwrap()
}

#[test]
fn ensembles_do_not_depend_on_the_worker_count() {
    let a = pole_run(1, 300);
    let b = pole_run(8, 300);
    assert_eq!(a.jump_count_total, b.jump_count_total);
    assert_eq!(a.cumulative_jumps, b.cumulative_jumps);
    for (x, y) in a.bloch_estimate.iter().zip(&b.bloch_estimate) {
        assert_eq!(x.components().map(f64::to_bits), y.components().map(f64::to_bits));
    }
    for (x, y) in a.stderr.iter().zip(&b.stderr) {
        assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));
    }
}

#[test]
fn occupations_are_a_distribution() {
    let run = pole_run(1, 200);
    assert_eq!(run.label_names, ["0", "1", "det"]);
    let occ = run.occupations.as_ref().unwrap();
    let entropy = run.entropy.as_ref().unwrap();
    for (p, h) in occ.iter().zip(entropy) {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x >= 0.0));
        assert!(*h >= 0.0 && *h <= (3.0f64).log2() + 1e-12);
    }
    assert_eq!(entropy[0], 0.0);
    assert!(run.cumulative_jumps.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*run.cumulative_jumps.last().unwrap(), run.jump_count_total);
}

#[test]
fn a_single_trajectory_has_zero_entropy() {
    let run = pole_run(1, 1);
    assert!(run.entropy.unwrap().iter().all(|h| *h == 0.0));
    assert!(run.stderr.iter().all(|s| s.iter().all(|x| *x == 0.0)));
}

#[test]
fn mcwf_ensemble_follows_amplitude_damping() {
    let model = decay(1.0);
    let grid = TimeGrid::new(2.0, 1e-3, 250).unwrap();
    let options = EnsembleOptions { n_traj: 4000, base_seed: 9, ..EnsembleOptions::default() };
    let psi0 = PureState::basis(2, 1);
    let run = run_ensemble(&model, Method::Mcwf, &PhiPolicy::Zero, &PolicyContext::default(), &psi0, &grid, &options)
        .unwrap();
    for ((t, r), se) in run.times.iter().zip(&run.bloch_estimate).zip(&run.stderr) {
        let z = 1.0 - 2.0 * (-t).exp();
        assert!((r.z - z).abs() < 5.0 * se[2] + 2e-3, "z at {t}: {} vs {z}", r.z);
    }
}

#[test]
fn empty_ensembles_and_bad_states_are_rejected() {
    let grid = TimeGrid::new(1.0, 1e-3, 10).unwrap();
    let options = EnsembleOptions { n_traj: 0, ..EnsembleOptions::default() };
    let psi0 = PureState::basis(2, 0);
    assert!(run_ensemble(&enm(), Method::PsiRoqj, &PhiPolicy::Zero, &PolicyContext::default(), &psi0, &grid, &options).is_err());
    let qutrit = PureState::basis(3, 0);
    assert!(build_rate_operator(&enm(), 0.0, &qutrit, &PhiPolicy::Zero, &PolicyContext::default()).is_err());
    let rho = DensityMatrix::maximally_mixed(2);
    assert!(generator_apply(&enm(), 0.0, &rho).trace().norm() < 1e-15);
}
