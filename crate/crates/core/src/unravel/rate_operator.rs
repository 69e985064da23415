use crate::linalg::{eigh_unchecked, Amplitudes, EigenPair, HermitianOperator, Matrix, NonHermitianOperator, PureState, I};
use crate::master::{MasterEquationModel, Snapshot};

use super::policy::{jump_expectation, jump_of_projector, project_out, PhiPolicy, PolicyContext};
use super::UnravelError;

/// R_psi = J[P_psi] + (|Phi><psi| + |psi><Phi|)/2 together with its
/// spectrum and the state-dependent effective Hamiltonian.
#[derive(Clone, Debug)]
pub struct RateOperatorResult {
    pub r: HermitianOperator,
    /// Sorted by descending eigenvalue.
    pub eigenpairs: Vec<EigenPair>,
    /// K - (i/2) |Phi><psi|, which acts on psi as K psi - (i/2) Phi.
    pub k_eff: NonHermitianOperator,
    pub trace_r: f64,
    pub phi: Amplitudes,
}

impl RateOperatorResult {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenpairs.last().map(|p| p.value).unwrap_or(0.0)
    }
}

pub(crate) fn rate_matrix(model: &MasterEquationModel, snap: &Snapshot, psi: &PureState, phi: &[crate::linalg::C64]) -> Matrix {
    let mut r = jump_of_projector(model, snap, psi);
    let cross = Matrix::outer(phi, psi.amplitudes());
    r += &(&cross + &cross.adjoint()).scale_real(0.5);
    r.hermitian_part()
}

/// Rate operator for an explicitly given Phi at a frozen instant.
pub fn rate_operator_at(model: &MasterEquationModel, snap: &Snapshot, psi: &PureState, phi: Amplitudes) -> RateOperatorResult {
    let r = rate_matrix(model, snap, psi, &phi);
    let eigenpairs = eigh_unchecked(&r);
    let trace_r = r.trace().re;
    let c_psi = Matrix::outer(&phi, psi.amplitudes());
    let k_eff = &snap.k - &c_psi.scale(I * 0.5);
    RateOperatorResult {
        r: HermitianOperator::symmetrized(&r),
        eigenpairs,
        k_eff: NonHermitianOperator(k_eff),
        trace_r,
        phi,
    }
}

/// Builds R for the policy at time t. After a jump, policies that declare
/// an effective ensemble use the post-jump transformation.
pub fn build_rate_operator(
    model: &MasterEquationModel,
    t: f64,
    psi: &PureState,
    policy: &PhiPolicy,
    ctx: &PolicyContext,
) -> Result<RateOperatorResult, UnravelError> {
    check_state(model, psi)?;
    let snap = model.snapshot(t);
    let phi = if ctx.has_jumped && !policy.labels().is_empty() {
        PhiPolicy::post_jump_phi(model, &snap, psi)
    } else {
        policy.evaluate(model, &snap, psi, ctx)?
    };
    Ok(rate_operator_at(model, &snap, psi, phi))
}

pub(crate) fn check_state(model: &MasterEquationModel, psi: &PureState) -> Result<(), UnravelError> {
    if psi.dim() != model.dim() {
        return Err(crate::linalg::LinalgError::DimensionError { expected: model.dim(), found: psi.dim() }.into());
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(crate::linalg::LinalgError::NormalizationError { norm }.into());
    }
    Ok(())
}

/// Phi = c11 psi - 2 (1 - P) J[P] psi. The induced R has psi as an
/// eigenvector with eigenvalue <J> + Re c11 and coincides with the projected
/// jump image on the complement.
pub fn orthogonal_jump_phi(
    model: &MasterEquationModel,
    t: f64,
    psi: &PureState,
    c11: f64,
) -> Result<Amplitudes, UnravelError> {
    check_state(model, psi)?;
    orthogonal_phi_snapshot(model, &model.snapshot(t), psi, c11)
}

pub(crate) fn orthogonal_phi_snapshot(
    model: &MasterEquationModel,
    snap: &Snapshot,
    psi: &PureState,
    c11: f64,
) -> Result<Amplitudes, UnravelError> {
    let bound = -jump_expectation(model, snap, psi);
    if c11 < bound - 1e-12 * bound.abs().max(1.0) {
        return Err(UnravelError::ConstraintError { c11, bound });
    }
    let jp = jump_of_projector(model, snap, psi);
    let q = project_out(psi, &psi.apply(&jp));
    Ok(psi.amplitudes().iter().zip(&q).map(|(p, x)| p * c11 - x * 2.0).collect())
}

/// W_psi = (1 - P) J[P] (1 - P).
pub fn w_operator(model: &MasterEquationModel, t: f64, psi: &PureState) -> Result<HermitianOperator, UnravelError> {
    check_state(model, psi)?;
    Ok(HermitianOperator::symmetrized(&w_matrix(model, &model.snapshot(t), psi)))
}

pub(crate) fn w_matrix(model: &MasterEquationModel, snap: &Snapshot, psi: &PureState) -> Matrix {
    let d = model.dim();
    let p = Matrix::outer(psi.amplitudes(), psi.amplitudes());
    let q = &Matrix::identity(d) - &p;
    let jp = jump_image(model, snap, &p);
    &(&q * &jp) * &q
}

fn jump_image(model: &MasterEquationModel, snap: &Snapshot, p: &Matrix) -> Matrix {
    crate::master::jump_image(model, &snap.rates, p)
}
