//! The eternally non-Markovian dissipator with a transverse drive H = beta sigma_x.

use crate::linalg::{pauli, Amplitudes, PureState, C64};
use crate::master::{HamiltonianTerm, LindbladTerm, MasterEquationModel, ModelLayout, RateFn, Snapshot};
use crate::numeric::NumericPolicy;
use crate::unravel::{EffectiveLabel, PhiRule, PolicyContext, UnravelError};

use super::phase_covariant::{equal_decay_rate, from_pm, pm_coordinates, rates_of, require_phase_covariant};

/// gamma_+ = gamma_- = gamma, gamma_z = -(gamma/2) tanh(gamma t), H = beta sigma_x.
pub fn driven_model(gamma: f64, beta: f64) -> MasterEquationModel {
    let hamiltonian = if beta != 0.0 {
        vec![HamiltonianTerm { coefficient: RateFn::constant(beta), operator: pauli::sigma_x() }]
    } else {
        vec![]
    };
    let terms = vec![
        LindbladTerm { operator: pauli::sigma_plus(), rate: RateFn::constant(gamma) },
        LindbladTerm { operator: pauli::sigma_minus(), rate: RateFn::constant(gamma) },
        LindbladTerm { operator: pauli::sigma_z(), rate: RateFn::Tanh { amplitude: -0.5 * gamma, scale: gamma } },
    ];
    MasterEquationModel::new(2, hamiltonian, terms)
        .expect("Pauli operators are valid")
        .with_layout(ModelLayout::PhaseCovariant, "driven")
}

/// Admissible range of xi = 2 Re(phi_- conj(a)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiBounds {
    pub lb: f64,
    pub ub: f64,
}

/// Bounds on xi for psi = phase (b|+> + a|->), b real. At the lower bound
/// the rate towards |-> vanishes, at the upper bound the rate towards |+>.
pub fn xi_bounds(a: C64, b: f64, gamma: f64, gamma_z: f64) -> Result<XiBounds, UnravelError> {
    let floor = NumericPolicy::default().amplitude_floor;
    if a.norm() < floor {
        return Err(UnravelError::DegenerateAmplitude { amplitude: a.norm() });
    }
    if b < floor {
        return Err(UnravelError::DegenerateAmplitude { amplitude: b });
    }
    let a_abs2 = a.norm_sqr();
    let b2 = b * b;
    let re_a2 = (a * a).re;
    let lb = -gamma - 2.0 * gamma_z * b2;
    let ub = (a_abs2 * (gamma + 2.0 * gamma_z * a_abs2) + 2.0 * b2 * (gamma * (re_a2 + a_abs2) - 2.0 * gamma_z * re_a2)) / b2;
    Ok(XiBounds { lb, ub })
}

/// Jumps only to |+> and |->, independently of the drive. The free
/// parameter xi sits at `lb + xi_selector (ub - lb)`.
#[derive(Clone, Debug)]
pub struct DrivenPolicy {
    labels: Vec<EffectiveLabel>,
}

impl Default for DrivenPolicy {
    fn default() -> Self {
        Self {
            labels: vec![EffectiveLabel::new("+", PureState::plus()), EffectiveLabel::new("-", PureState::minus())],
        }
    }
}

impl DrivenPolicy {
    /// Phi in the |+>, |-> basis for the gauge-fixed coordinates.
    pub fn components(a: C64, b: f64, gamma: f64, gamma_z: f64, xi: f64) -> (C64, C64) {
        let phi_minus = a * (0.5 * xi / a.norm_sqr());
        let phi_plus = (b / a.conj()) * (C64::new(gamma * 2.0 * a.re, 0.0) - a * (2.0 * gamma_z) - phi_minus.conj());
        (phi_plus, phi_minus)
    }
}

impl PhiRule for DrivenPolicy {
    fn name(&self) -> &str {
        "driven"
    }

    fn phi(&self, _: &MasterEquationModel, snap: &Snapshot, psi: &PureState, ctx: &PolicyContext) -> Result<Amplitudes, UnravelError> {
        let rates = rates_of(snap)?;
        let gamma = equal_decay_rate(&rates)?;
        let (b, a, phase) = pm_coordinates(psi);
        let bounds = xi_bounds(a, b, gamma, rates.gamma_z)?;
        let scale = bounds.lb.abs().max(bounds.ub.abs()).max(1.0);
        if bounds.ub < bounds.lb - 1e-10 * scale {
            return Err(UnravelError::PolicyError(format!(
                "empty xi interval [{}, {}] at t = {}",
                bounds.lb, bounds.ub, snap.t
            )));
        }
        let xi = bounds.lb + ctx.xi_selector * (bounds.ub - bounds.lb);
        let (phi_plus, phi_minus) = Self::components(a, b, gamma, rates.gamma_z, xi);
        Ok(from_pm(phi_plus, phi_minus, phase))
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
    use crate::master::effective_hamiltonian;
    use crate::unravel::rate_operator_at;

    #[test]
    fn undriven_reduces_to_enm() {
        let m = driven_model(1.0, 0.0);
        assert!(m.hamiltonian_terms().is_empty());
        let (gp, gm, gz) = m.phase_covariant_rates(1.5).unwrap();
        assert_eq!((gp, gm), (1.0, 1.0));
        assert!((gz + 0.5 * 1.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn driven_effective_hamiltonian_at_zero() {
        let m = driven_model(1.0, 10.0);
        let k = effective_hamiltonian(&m, 0.0).0;
        let expected = &pauli::sigma_x().scale_real(10.0) - &m.gamma_operator(0.0).matrix().scale(C64::new(0.0, 0.5));
        assert!(k.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn xi_bounds_saturate_rates() {
        let m = driven_model(1.0, 10.0);
        let s = m.snapshot(0.9);
        let gz = s.phase_covariant.unwrap().gamma_z;
        let psi = PureState::normalized(&[C64::new(0.8, 0.1), C64::new(-0.2, 0.5)]).unwrap();
        let (b, a, phase) = pm_coordinates(&psi);
        let bounds = xi_bounds(a, b, 1.0, gz).unwrap();
        assert!(bounds.ub >= bounds.lb);
        let plus = PureState::plus();
        let minus = PureState::minus();
        for (xi, silent) in [(bounds.lb, &minus), (bounds.ub, &plus)] {
            let (pp, pm) = DrivenPolicy::components(a, b, 1.0, gz, xi);
            let r = rate_operator_at(&m, &s, &psi, from_pm(pp, pm, phase));
            let off = r.r.matrix().sandwich(plus.amplitudes(), minus.amplitudes());
            assert!(off.norm() < 1e-13, "off-diagonal {off}");
            let rate = r.r.matrix().sandwich(silent.amplitudes(), silent.amplitudes()).re;
            assert!(rate.abs() < 1e-13, "rate {rate}");
        }
    }

    #[test]
    fn degenerate_amplitude() {
        let err = xi_bounds(C64::new(0.0, 0.0), 1.0, 1.0, -0.1).unwrap_err();
        assert!(matches!(err, UnravelError::DegenerateAmplitude { .. }));
    }
}
