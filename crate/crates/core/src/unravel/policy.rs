use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{inner, Amplitudes, Matrix, PureState, C64};
use crate::master::{jump_image, GaugeTransformation, MasterEquationModel, Snapshot};

use super::UnravelError;

/// Per-trajectory knobs read by the built-in policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyContext {
    /// Polar angle of the initial state cos(theta)|0> + sin(theta)|1>.
    pub initial_theta: f64,
    /// Position of the free parameter between its lower (1) and upper (0) bound.
    pub mixing_lambda: f64,
    /// Margin kept away from both bounds.
    pub epsilon_shrink: f64,
    /// Initial angle at which the switching policy changes branch.
    pub theta_bar: f64,
    /// Position of the free parameter between its lower (0) and upper (1) bound.
    pub xi_selector: f64,
    /// Set once the trajectory has jumped.
    pub has_jumped: bool,
}

impl Default for PolicyContext {
    fn default() -> Self {
        Self {
            initial_theta: 0.0,
            mixing_lambda: 0.0,
            epsilon_shrink: 0.0,
            theta_bar: 1.3,
            xi_selector: 0.5,
            has_jumped: false,
        }
    }
}

impl PolicyContext {
    pub fn validate(&self) -> Result<(), UnravelError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(UnravelError::PolicyError(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("mixing_lambda", self.mixing_lambda)?;
        unit("xi_selector", self.xi_selector)?;
        if !(self.epsilon_shrink >= 0.0) {
            return Err(UnravelError::PolicyError(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon_shrink
            )));
        }
        Ok(())
    }
}

/// A named member of a finite effective ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveLabel {
    pub name: String,
    pub state: PureState,
}

impl EffectiveLabel {
    pub fn new(name: &str, state: PureState) -> Self {
        Self { name: name.to_string(), state }
    }
}

/// A state-dependent rule psi -> Phi. Rules that keep all jump targets in
/// a finite set declare that set through [`PhiRule::labels`]; the labels
/// must form an orthonormal basis in which the rate operator is diagonal.
pub trait PhiRule: Send + Sync {
    fn name(&self) -> &str;

    fn phi(
        &self,
        model: &MasterEquationModel,
        snap: &Snapshot,
        psi: &PureState,
        ctx: &PolicyContext,
    ) -> Result<Amplitudes, UnravelError>;

    fn labels(&self) -> &[EffectiveLabel] {
        &[]
    }

    /// Rejects models the rule was not derived for.
    fn check_model(&self, _model: &MasterEquationModel) -> Result<(), UnravelError> {
        Ok(())
    }
}

#[derive(Clone)]
pub enum PhiPolicy {
    /// Phi = 0: the plain rate operator J[P].
    Zero,
    /// Arbitrary user function (psi, t) -> Phi.
    Explicit(Arc<dyn Fn(&PureState, f64) -> Amplitudes + Send + Sync>),
    /// Phi = C(t) psi with a state-independent C.
    COperator(GaugeTransformation),
    /// Orthogonal jumps: psi is an eigenvector of R with the rest of the
    /// spectrum equal to the projected jump image. `None` picks the
    /// coefficient that reproduces the W operator exactly.
    Orthogonal { c11: Option<f64> },
    Builtin(Arc<dyn PhiRule>),
}

impl fmt::Debug for PhiPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl PhiPolicy {
    pub fn builtin(rule: impl PhiRule + 'static) -> Self {
        PhiPolicy::Builtin(Arc::new(rule))
    }

    pub fn explicit(f: impl Fn(&PureState, f64) -> Amplitudes + Send + Sync + 'static) -> Self {
        PhiPolicy::Explicit(Arc::new(f))
    }

    pub fn name(&self) -> String {
        match self {
            PhiPolicy::Zero => "zero".into(),
            PhiPolicy::Explicit(_) => "explicit".into(),
            PhiPolicy::COperator(_) => "c_operator".into(),
            PhiPolicy::Orthogonal { c11: None } => "orthogonal".into(),
            PhiPolicy::Orthogonal { c11: Some(c) } => format!("orthogonal(c11={c})"),
            PhiPolicy::Builtin(rule) => rule.name().to_string(),
        }
    }

    pub fn labels(&self) -> &[EffectiveLabel] {
        match self {
            PhiPolicy::Builtin(rule) => rule.labels(),
            _ => &[],
        }
    }

    pub fn check_model(&self, model: &MasterEquationModel) -> Result<(), UnravelError> {
        let labels = self.labels();
        if !labels.is_empty() {
            if labels.len() != model.dim() {
                return Err(UnravelError::PolicyError(format!(
                    "policy declares {} labels for a {}-dimensional model",
                    labels.len(),
                    model.dim()
                )));
            }
            for (i, a) in labels.iter().enumerate() {
                for (j, b) in labels.iter().enumerate() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (a.state.inner(&b.state).norm() - target).abs() > 1e-12 {
                        return Err(UnravelError::PolicyError("declared labels are not orthonormal".into()));
                    }
                }
            }
        }
        match self {
            PhiPolicy::Builtin(rule) => rule.check_model(model),
            _ => Ok(()),
        }
    }

    /// Phi for a state on the deterministic (not yet labelled) branch.
    pub fn evaluate(
        &self,
        model: &MasterEquationModel,
        snap: &Snapshot,
        psi: &PureState,
        ctx: &PolicyContext,
    ) -> Result<Amplitudes, UnravelError> {
        let phi = match self {
            PhiPolicy::Zero => Amplitudes::from_elem(C64::new(0.0, 0.0), psi.dim()),
            PhiPolicy::Explicit(f) => f(psi, snap.t),
            PhiPolicy::COperator(c) => psi.apply(c.c_operator(snap.t).matrix()),
            PhiPolicy::Orthogonal { c11 } => {
                let c11 = match c11 {
                    Some(c) => *c,
                    None => -jump_expectation(model, snap, psi),
                };
                super::rate_operator::orthogonal_phi_snapshot(model, snap, psi, c11)?
            }
            PhiPolicy::Builtin(rule) => rule.phi(model, snap, psi, ctx)?,
        };
        if phi.len() != psi.dim() {
            return Err(UnravelError::PolicyError(format!(
                "Phi has length {} for a {}-dimensional state",
                phi.len(),
                psi.dim()
            )));
        }
        if !phi.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
            return Err(UnravelError::PolicyError(format!("non-finite Phi at t = {}", snap.t)));
        }
        Ok(phi)
    }

    /// Phi for a labelled state: -<psi|J[P]|psi> psi, which makes the
    /// label an eigenvector of R with eigenvalue zero.
    pub fn post_jump_phi(model: &MasterEquationModel, snap: &Snapshot, psi: &PureState) -> Amplitudes {
        let j = jump_expectation(model, snap, psi);
        psi.amplitudes().iter().map(|a| a * (-j)).collect()
    }
}

/// <psi|J[P_psi]|psi> = sum_a gamma_a |<psi|L_a|psi>|^2.
pub(crate) fn jump_expectation(model: &MasterEquationModel, snap: &Snapshot, psi: &PureState) -> f64 {
    model
        .terms()
        .iter()
        .zip(&snap.rates)
        .map(|(term, r)| r * term.operator.sandwich(psi.amplitudes(), psi.amplitudes()).norm_sqr())
        .sum()
}

/// J_t[P_psi] from a snapshot.
pub(crate) fn jump_of_projector(model: &MasterEquationModel, snap: &Snapshot, psi: &PureState) -> Matrix {
    let p = Matrix::outer(psi.amplitudes(), psi.amplitudes());
    jump_image(model, &snap.rates, &p)
}

/// Component of v orthogonal to psi.
pub(crate) fn project_out(psi: &PureState, v: &[C64]) -> Amplitudes {
    let c = inner(psi.amplitudes(), v);
    v.iter().zip(psi.amplitudes()).map(|(x, p)| x - c * p).collect()
}
