//! Phase covariant qubit dynamics and the policies built for them.

use serde::{Deserialize, Serialize};

use crate::linalg::{pauli, Amplitudes, PureState, C64};
use crate::master::{
    HamiltonianTerm, LindbladTerm, MasterEquationModel, ModelLayout, PhaseCovariantSnapshot, RateFn, Snapshot,
};
use crate::numeric::NumericPolicy;
use crate::unravel::{EffectiveLabel, PhiRule, PolicyContext, UnravelError};

/// Rates of sigma_+ (|0> -> |1>), sigma_- (|1> -> |0>) and sigma_z.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseCovariantRates {
    pub gamma_plus: RateFn,
    pub gamma_minus: RateFn,
    pub gamma_z: RateFn,
}

impl PhaseCovariantRates {
    /// gamma_+ = gamma_- = 1, gamma_z = -tanh(t)/2: P-divisible at all
    /// times but never CP-divisible.
    pub fn eternally_non_markovian() -> Self {
        Self {
            gamma_plus: RateFn::constant(1.0),
            gamma_minus: RateFn::constant(1.0),
            gamma_z: RateFn::Tanh { amplitude: -0.5, scale: 1.0 },
        }
    }

    /// gamma_+ = e^{-t/2}, gamma_- = e^{-t/4}, gamma_z = (kappa/2) e^{-3t/8} cos 2t.
    /// P-divisibility fails for kappa > 1.
    pub fn oscillating_dephasing(kappa: f64) -> Self {
        Self {
            gamma_plus: RateFn::Exp { amplitude: 1.0, decay: 0.5 },
            gamma_minus: RateFn::Exp { amplitude: 1.0, decay: 0.25 },
            gamma_z: RateFn::DampedCos { amplitude: 0.5 * kappa, decay: 0.375, frequency: 2.0 },
        }
    }

    /// gamma_+ = gamma_- = e^{-t/4} [kappa + (1 - kappa) e^{-t/4} cos 2t] / 2,
    /// gamma_z = 1/2.
    pub fn oscillating_decay(kappa: f64) -> Self {
        let gamma = RateFn::Sum {
            terms: vec![
                RateFn::Exp { amplitude: 0.5 * kappa, decay: 0.25 },
                RateFn::DampedCos { amplitude: 0.5 * (1.0 - kappa), decay: 0.5, frequency: 2.0 },
            ],
        };
        Self { gamma_plus: gamma.clone(), gamma_minus: gamma, gamma_z: RateFn::constant(0.5) }
    }

    pub fn at(&self, t: f64) -> PhaseCovariantSnapshot {
        PhaseCovariantSnapshot {
            gamma_plus: self.gamma_plus.eval(t),
            gamma_minus: self.gamma_minus.eval(t),
            gamma_z: self.gamma_z.eval(t),
        }
    }
}

/// Lindblad terms (sigma_+, gamma_+), (sigma_-, gamma_-), (sigma_z, gamma_z)
/// and H = h_z(t) sigma_z.
pub fn phase_covariant_model(rates: PhaseCovariantRates, h_z: Option<RateFn>) -> MasterEquationModel {
    let hamiltonian = h_z
        .map(|c| vec![HamiltonianTerm { coefficient: c, operator: pauli::sigma_z() }])
        .unwrap_or_default();
    let terms = vec![
        LindbladTerm { operator: pauli::sigma_plus(), rate: rates.gamma_plus },
        LindbladTerm { operator: pauli::sigma_minus(), rate: rates.gamma_minus },
        LindbladTerm { operator: pauli::sigma_z(), rate: rates.gamma_z },
    ];
    MasterEquationModel::new(2, hamiltonian, terms)
        .expect("Pauli operators are valid")
        .with_layout(ModelLayout::PhaseCovariant, "phase_covariant")
}

/// d rho/dt = gamma(t) (sigma_z rho sigma_z - rho).
pub fn pure_dephasing_model(gamma: RateFn) -> MasterEquationModel {
    MasterEquationModel::new(2, vec![], vec![LindbladTerm { operator: pauli::sigma_z(), rate: gamma }])
        .expect("Pauli operators are valid")
        .with_layout(ModelLayout::PureDephasing, "pure_dephasing")
}

pub(crate) fn rates_of(snap: &Snapshot) -> Result<PhaseCovariantSnapshot, UnravelError> {
    snap.phase_covariant
        .ok_or_else(|| UnravelError::PolicyError("policy requires a phase covariant qubit model".into()))
}

pub(crate) fn require_phase_covariant(model: &MasterEquationModel) -> Result<(), UnravelError> {
    match model.layout() {
        ModelLayout::PhaseCovariant | ModelLayout::PureDephasing => Ok(()),
        ModelLayout::Generic => {
            Err(UnravelError::PolicyError(format!("model `{}` is not phase covariant", model.name())))
        }
    }
}

/// Admissible interval for the |1> component of Phi at a state with
/// |<0|psi>| = alpha, and the interval shrunk by 2 epsilon at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiBounds {
    pub lb: f64,
    pub ub: f64,
    pub shrunk_lb: f64,
    pub shrunk_ub: f64,
}

impl PhiBounds {
    pub fn valid(&self) -> bool {
        self.shrunk_ub >= self.shrunk_lb
    }

    /// lambda = 1 gives the shrunk lower bound, lambda = 0 the upper one.
    pub fn mix(&self, lambda: f64) -> f64 {
        lambda * self.shrunk_lb + (1.0 - lambda) * self.shrunk_ub
    }
}

/// Bounds on phi_1 keeping both eigenvalues of R nonnegative. At the lower
/// bound the rate towards |1> vanishes (jumps only to |0>); at the upper
/// bound the rate towards |0> vanishes.
pub fn phi_bounds_ph_cov(alpha: f64, rates: &PhaseCovariantSnapshot, epsilon: f64) -> Result<PhiBounds, UnravelError> {
    let floor = NumericPolicy::default().amplitude_floor;
    let beta2 = (1.0 - alpha * alpha).max(0.0);
    let beta = beta2.sqrt();
    if !(alpha > floor) || !(beta > floor) {
        return Err(UnravelError::PoleState { amplitude: alpha.min(beta) });
    }
    let PhaseCovariantSnapshot { gamma_plus, gamma_minus, gamma_z } = *rates;
    let a2 = alpha * alpha;
    let lb = -a2 * gamma_plus / beta - gamma_z * beta;
    let ub = beta2 * beta * gamma_minus / a2 + 3.0 * beta * gamma_z;
    Ok(PhiBounds { lb, ub, shrunk_lb: lb + 2.0 * epsilon, shrunk_ub: ub - 2.0 * epsilon })
}

/// Phi with real |1> component phi_1 for psi = alpha e^{i a}|0> + beta e^{i b}|1>:
/// alpha (2 gamma_z - phi_1 / beta) e^{i a}|0> + phi_1 e^{i b}|1>.
pub fn pole_phi(psi: &PureState, gamma_z: f64, phi1: f64) -> Result<Amplitudes, UnravelError> {
    let a0 = psi.amplitudes()[0];
    let a1 = psi.amplitudes()[1];
    let alpha = a0.norm();
    let beta = a1.norm();
    let floor = NumericPolicy::default().amplitude_floor;
    if alpha <= floor || beta <= floor {
        return Err(UnravelError::PoleState { amplitude: alpha.min(beta) });
    }
    let p0 = a0 / alpha;
    let p1 = a1 / beta;
    Ok(Amplitudes::from_slice(&[p0 * (alpha * (2.0 * gamma_z - phi1 / beta)), p1 * phi1]))
}

fn pole_labels() -> Vec<EffectiveLabel> {
    vec![EffectiveLabel::new("0", PureState::basis(2, 0)), EffectiveLabel::new("1", PureState::basis(2, 1))]
}

fn pm_labels() -> Vec<EffectiveLabel> {
    vec![EffectiveLabel::new("+", PureState::plus()), EffectiveLabel::new("-", PureState::minus())]
}

/// Jumps only to |0> and |1>, with phi_1 = lambda lb + (1 - lambda) ub taken
/// from `ctx.mixing_lambda` and the interval shrunk by `ctx.epsilon_shrink`.
#[derive(Clone, Debug)]
pub struct PoleJumpPolicy {
    labels: Vec<EffectiveLabel>,
}

impl Default for PoleJumpPolicy {
    fn default() -> Self {
        Self { labels: pole_labels() }
    }
}

impl PhiRule for PoleJumpPolicy {
    fn name(&self) -> &str {
        "pole"
    }

    fn phi(&self, _: &MasterEquationModel, snap: &Snapshot, psi: &PureState, ctx: &PolicyContext) -> Result<Amplitudes, UnravelError> {
        let rates = rates_of(snap)?;
        let bounds = phi_bounds_ph_cov(psi.amplitudes()[0].norm(), &rates, ctx.epsilon_shrink)?;
        pole_phi(psi, rates.gamma_z, bounds.mix(ctx.mixing_lambda))
    }

    fn labels(&self) -> &[EffectiveLabel] {
        &self.labels
    }

    fn check_model(&self, model: &MasterEquationModel) -> Result<(), UnravelError> {
        require_phase_covariant(model)
    }
}

/// Pole jumps with the branch fixed by the initial angle: the lower bound
/// when `initial_theta >= theta_bar`, the upper bound otherwise.
#[derive(Clone, Debug)]
pub struct ThetaSwitchPolicy {
    labels: Vec<EffectiveLabel>,
}

impl Default for ThetaSwitchPolicy {
    fn default() -> Self {
        Self { labels: pole_labels() }
    }
}

impl ThetaSwitchPolicy {
    pub fn branch_phi(bounds: &PhiBounds, ctx: &PolicyContext) -> f64 {
        if ctx.initial_theta >= ctx.theta_bar {
            bounds.shrunk_lb
        } else {
            bounds.shrunk_ub
        }
    }
}

impl PhiRule for ThetaSwitchPolicy {
    fn name(&self) -> &str {
        "theta_switch"
    }

    fn phi(&self, _: &MasterEquationModel, snap: &Snapshot, psi: &PureState, ctx: &PolicyContext) -> Result<Amplitudes, UnravelError> {
        let rates = rates_of(snap)?;
        let bounds = phi_bounds_ph_cov(psi.amplitudes()[0].norm(), &rates, ctx.epsilon_shrink)?;
        pole_phi(psi, rates.gamma_z, Self::branch_phi(&bounds, ctx))
    }

    fn labels(&self) -> &[EffectiveLabel] {
        &self.labels
    }

    fn check_model(&self, model: &MasterEquationModel) -> Result<(), UnravelError> {
        require_phase_covariant(model)
    }
}

/// Coordinates in the |+>, |-> basis with <+|psi> real and nonnegative:
/// returns (b = <+|psi>, a = <-|psi>, phase) with psi = phase (b|+> + a|->).
pub fn pm_coordinates(psi: &PureState) -> (f64, C64, C64) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let [p0, p1] = [psi.amplitudes()[0], psi.amplitudes()[1]];
    let plus = (p0 + p1) * h;
    let minus = (p0 - p1) * h;
    let phase = if plus.norm() > 1e-14 {
        plus / plus.norm()
    } else if minus.norm() > 0.0 {
        minus / minus.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    (plus.norm(), minus * phase.conj(), phase)
}

/// phase (c_plus |+> + c_minus |->) in the computational basis.
pub(crate) fn from_pm(c_plus: C64, c_minus: C64, phase: C64) -> Amplitudes {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Amplitudes::from_slice(&[phase * (c_plus + c_minus) * h, phase * (c_plus - c_minus) * h])
}

pub(crate) fn equal_decay_rate(rates: &PhaseCovariantSnapshot) -> Result<f64, UnravelError> {
    let g = rates.gamma_plus;
    if (g - rates.gamma_minus).abs() > 1e-12 * g.abs().max(1.0) {
        return Err(UnravelError::PolicyError(format!(
            "policy needs gamma_+ = gamma_-, got {g} and {}",
            rates.gamma_minus
        )));
    }
    Ok(g)
}

/// Jumps only to |+> and |->: Phi = 2 (gamma - gamma_z) <+|psi> |+>.
#[derive(Clone, Debug)]
pub struct PlusMinusPolicy {
    labels: Vec<EffectiveLabel>,
}

impl Default for PlusMinusPolicy {
    fn default() -> Self {
        Self { labels: pm_labels() }
    }
}

impl PhiRule for PlusMinusPolicy {
    fn name(&self) -> &str {
        "pm_enm"
    }

    fn phi(&self, _: &MasterEquationModel, snap: &Snapshot, psi: &PureState, _: &PolicyContext) -> Result<Amplitudes, UnravelError> {
        let rates = rates_of(snap)?;
        let gamma = equal_decay_rate(&rates)?;
        let (b, a, phase) = pm_coordinates(psi);
        if a.im.abs() > 1e-9 {
            return Err(UnravelError::GaugeError { imag: a.im });
        }
        let c_plus = C64::new(2.0 * (gamma - rates.gamma_z) * b, 0.0);
        Ok(from_pm(c_plus, C64::new(0.0, 0.0), phase))
    }

    fn labels(&self) -> &[EffectiveLabel] {
        &self.labels
    }

    fn check_model(&self, model: &MasterEquationModel) -> Result<(), UnravelError> {
        require_phase_covariant(model)
    }
}

/// Rates towards |-> and |+> as affine functions of u = a phi_-, where
/// a = <-|psi> and b = <+|psi> are real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlusMinusBounds {
    pub u_lb: f64,
    pub u_ub: f64,
}

pub fn pm_bounds(a: f64, b: f64, gamma: f64, gamma_z: f64) -> Result<PlusMinusBounds, UnravelError> {
    let floor = NumericPolicy::default().amplitude_floor;
    if a.abs() < floor {
        return Err(UnravelError::DegenerateAmplitude { amplitude: a.abs() });
    }
    if b.abs() < floor {
        return Err(UnravelError::DegenerateAmplitude { amplitude: b.abs() });
    }
    let (a2, b2) = (a * a, b * b);
    let u_lb = -(0.5 * gamma + gamma_z * b2);
    let u_ub = a2 / b2 * (0.5 * gamma + gamma_z * a2 + 2.0 * b2 * (gamma - gamma_z));
    Ok(PlusMinusBounds { u_lb, u_ub })
}

/// Jumps only to |+> and |-> for equal but possibly negative decay rates:
/// Phi = (b/a) [2 a (gamma - gamma_z) - phi_-] |+> + phi_- |->, with
/// a phi_- = lambda u_lb + (1 - lambda) u_ub.
#[derive(Clone, Debug)]
pub struct PlusMinusNonDivisiblePolicy {
    labels: Vec<EffectiveLabel>,
}

impl Default for PlusMinusNonDivisiblePolicy {
    fn default() -> Self {
        Self { labels: pm_labels() }
    }
}

impl PhiRule for PlusMinusNonDivisiblePolicy {
    fn name(&self) -> &str {
        "pm_nonp"
    }

    fn phi(&self, _: &MasterEquationModel, snap: &Snapshot, psi: &PureState, ctx: &PolicyContext) -> Result<Amplitudes, UnravelError> {
        let rates = rates_of(snap)?;
        let gamma = equal_decay_rate(&rates)?;
        let (b, a, phase) = pm_coordinates(psi);
        if a.im.abs() > 1e-9 {
            return Err(UnravelError::GaugeError { imag: a.im });
        }
        let a = a.re;
        let bounds = pm_bounds(a, b, gamma, rates.gamma_z)?;
        let u = ctx.mixing_lambda * bounds.u_lb + (1.0 - ctx.mixing_lambda) * bounds.u_ub;
        let phi_minus = u / a;
        let phi_plus = (b / a) * (2.0 * a * (gamma - rates.gamma_z) - phi_minus);
        Ok(from_pm(C64::new(phi_plus, 0.0), C64::new(phi_minus, 0.0), phase))
    }

    fn labels(&self) -> &[EffectiveLabel] {
        &self.labels
    }

    fn check_model(&self, model: &MasterEquationModel) -> Result<(), UnravelError> {
        require_phase_covariant(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh_unchecked;
    use crate::unravel::{rate_operator_at, PhiPolicy};

    fn snap_for(rates: PhaseCovariantRates, t: f64) -> (MasterEquationModel, Snapshot) {
        let m = phase_covariant_model(rates, None);
        let s = m.snapshot(t);
        (m, s)
    }

    #[test]
    fn bounds_at_equator_for_enm_start() {
        let rates = PhaseCovariantSnapshot { gamma_plus: 1.0, gamma_minus: 1.0, gamma_z: 0.0 };
        let b = phi_bounds_ph_cov(std::f64::consts::FRAC_1_SQRT_2, &rates, 0.0).unwrap();
        assert!((b.lb + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((b.ub - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(phi_bounds_ph_cov(1.0, &rates, 0.0), Err(UnravelError::PoleState { .. })));
        assert!(matches!(phi_bounds_ph_cov(0.0, &rates, 0.0), Err(UnravelError::PoleState { .. })));
    }

    #[test]
    fn lower_bound_silences_jumps_to_one() {
        let (m, s) = snap_for(PhaseCovariantRates::eternally_non_markovian(), 0.8);
        let psi = PureState::from_angles(0.6, 0.4);
        let rates = s.phase_covariant.unwrap();
        let b = phi_bounds_ph_cov(psi.amplitudes()[0].norm(), &rates, 0.0).unwrap();
        for (phi1, silent) in [(b.lb, 1usize), (b.ub, 0usize)] {
            let phi = pole_phi(&psi, rates.gamma_z, phi1).unwrap();
            let r = rate_operator_at(&m, &s, &psi, phi);
            assert!(r.r.matrix()[(0, 1)].norm() < 1e-14);
            assert!(r.r.matrix()[(silent, silent)].re.abs() < 1e-13);
        }
    }

    #[test]
    fn post_jump_rate_from_ground_state() {
        let (m, s) = snap_for(PhaseCovariantRates::eternally_non_markovian(), 1.0);
        let zero = PureState::basis(2, 0);
        let phi = PhiPolicy::post_jump_phi(&m, &s, &zero);
        let gz = s.phase_covariant.unwrap().gamma_z;
        assert!((phi[0].re + gz).abs() < 1e-15);
        let r = rate_operator_at(&m, &s, &zero, phi);
        assert!((r.r.matrix()[(1, 1)].re - 1.0).abs() < 1e-10);
        assert!(r.r.matrix()[(0, 0)].re.abs() < 1e-15);
        let (m0, s0) = snap_for(
            PhaseCovariantRates {
                gamma_plus: RateFn::constant(1.0),
                gamma_minus: RateFn::constant(1.0),
                gamma_z: RateFn::constant(0.0),
            },
            0.0,
        );
        assert!(PhiPolicy::post_jump_phi(&m0, &s0, &zero).iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn plus_minus_policy_examples() {
        let (m, s) = snap_for(PhaseCovariantRates::eternally_non_markovian(), 0.0);
        let ctx = PolicyContext::default();
        let phi = PlusMinusPolicy::default().phi(&m, &s, &PureState::plus(), &ctx).unwrap();
        let expected = PureState::plus();
        for (x, y) in phi.iter().zip(expected.amplitudes()) {
            assert!((x - y * 2.0).norm() < 1e-15);
        }
        let phi = PlusMinusPolicy::default().phi(&m, &s, &PureState::minus(), &ctx).unwrap();
        assert!(phi.iter().all(|x| x.norm() < 1e-15));
        let (m, s) = snap_for(PhaseCovariantRates::eternally_non_markovian(), 0.7);
        let psi = PureState::normalized(&[C64::new(0.9, 0.0), C64::new(0.2, 0.0)]).unwrap();
        let phi = PlusMinusPolicy::default().phi(&m, &s, &psi, &ctx).unwrap();
        let r = rate_operator_at(&m, &s, &psi, phi);
        let off = r.r.matrix().sandwich(PureState::plus().amplitudes(), PureState::minus().amplitudes());
        assert!(off.norm() < 1e-14);
    }

    #[test]
    fn plus_minus_gauge_error() {
        let (m, s) = snap_for(PhaseCovariantRates::eternally_non_markovian(), 0.3);
        let psi = PureState::from_angles(0.5, 0.7);
        let err = PlusMinusPolicy::default().phi(&m, &s, &psi, &PolicyContext::default()).unwrap_err();
        assert!(matches!(err, UnravelError::GaugeError { .. }));
    }

    #[test]
    fn non_divisible_pm_bounds_saturate() {
        let (m, s) = snap_for(PhaseCovariantRates::oscillating_decay(0.25), 1.4);
        let psi = PureState::normalized(&[C64::new(0.95, 0.0), C64::new(0.3, 0.0)]).unwrap();
        for (lambda, silent) in [(1.0, 1usize), (0.0, 0usize)] {
            let ctx = PolicyContext { mixing_lambda: lambda, ..Default::default() };
            let phi = PlusMinusNonDivisiblePolicy::default().phi(&m, &s, &psi, &ctx).unwrap();
            let r = rate_operator_at(&m, &s, &psi, phi);
            let basis = [PureState::plus(), PureState::minus()];
            let off = r.r.matrix().sandwich(basis[0].amplitudes(), basis[1].amplitudes());
            assert!(off.norm() < 1e-13);
            let rate = r.r.matrix().sandwich(basis[silent].amplitudes(), basis[silent].amplitudes()).re;
            assert!(rate.abs() < 1e-13, "lambda {lambda}: {rate}");
        }
        // phi_- = 2 a (gamma - gamma_z) makes Phi parallel to |->
        let rates = s.phase_covariant.unwrap();
        let (b, a, _) = pm_coordinates(&psi);
        let u = 2.0 * a.re * a.re * (rates.gamma_plus - rates.gamma_z);
        let phi_plus = (b / a.re) * (2.0 * a.re * (rates.gamma_plus - rates.gamma_z) - u / a.re);
        assert!(phi_plus.abs() < 1e-15);
    }

    #[test]
    fn non_divisible_pm_degenerate_amplitude() {
        let (m, s) = snap_for(PhaseCovariantRates::oscillating_decay(0.25), 1.0);
        let err = PlusMinusNonDivisiblePolicy::default()
            .phi(&m, &s, &PureState::plus(), &PolicyContext::default())
            .unwrap_err();
        assert!(matches!(err, UnravelError::DegenerateAmplitude { .. }));
    }

    #[test]
    fn theta_switch_branches() {
        let b = PhiBounds { lb: -1.0, ub: 2.0, shrunk_lb: -0.5, shrunk_ub: 1.5 };
        let at = |theta| PolicyContext { initial_theta: theta, theta_bar: 1.3, ..Default::default() };
        assert_eq!(ThetaSwitchPolicy::branch_phi(&b, &at(1.3)), -0.5);
        assert_eq!(ThetaSwitchPolicy::branch_phi(&b, &at(1.29)), 1.5);
        let (m, s) = snap_for(PhaseCovariantRates::oscillating_dephasing(1.2), 0.0);
        let err = ThetaSwitchPolicy::default().phi(&m, &s, &PureState::basis(2, 0), &at(0.0)).unwrap_err();
        assert!(matches!(err, UnravelError::PoleState { .. }));
    }

    #[test]
    fn rate_examples() {
        let osc = PhaseCovariantRates::oscillating_dephasing(4.0).at(std::f64::consts::FRAC_PI_2);
        let t = std::f64::consts::FRAC_PI_2;
        assert!((osc.gamma_z - 2.0 * (-3.0 * t / 8.0).exp() * (2.0 * t).cos()).abs() < 1e-15);
        let dec = PhaseCovariantRates::oscillating_decay(0.25).at(1.0);
        let expected = 0.5 * (-0.25f64).exp() * (0.25 + 0.75 * (-0.25f64).exp() * 2.0f64.cos());
        assert!((dec.gamma_plus - expected).abs() < 1e-15);
        assert_eq!(dec.gamma_z, 0.5);
        let enm = PhaseCovariantRates::eternally_non_markovian().at(2.0);
        assert!((enm.gamma_z + 0.5 * 2.0f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn shrunk_interval_eigen_check() {
        let (gp, gm) = (0.8, 0.5);
        let eps = 0.02;
        let gz = -0.2;
        let rates = PhaseCovariantSnapshot { gamma_plus: gp, gamma_minus: gm, gamma_z: gz };
        let m = phase_covariant_model(
            PhaseCovariantRates {
                gamma_plus: RateFn::constant(gp),
                gamma_minus: RateFn::constant(gm),
                gamma_z: RateFn::constant(gz),
            },
            None,
        );
        let s = m.snapshot(0.0);
        for k in 1..20 {
            let alpha = k as f64 / 20.0;
            let psi = PureState::from_angles(alpha.acos(), 0.0);
            let b = phi_bounds_ph_cov(alpha, &rates, eps).unwrap();
            for phi1 in [b.lb, b.ub] {
                let r = rate_operator_at(&m, &s, &psi, pole_phi(&psi, gz, phi1).unwrap());
                let eig = eigh_unchecked(r.r.matrix());
                assert!(eig.iter().map(|e| e.value.abs()).fold(f64::INFINITY, f64::min) < 1e-12);
            }
            if b.valid() {
                for phi1 in [b.shrunk_lb, b.mix(0.5), b.shrunk_ub] {
                    let r = rate_operator_at(&m, &s, &psi, pole_phi(&psi, gz, phi1).unwrap());
                    assert!(r.min_eigenvalue() > 0.0, "alpha {alpha}, phi1 {phi1}");
                }
            }
        }
    }
}
