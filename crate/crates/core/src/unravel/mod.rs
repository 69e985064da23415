//! Jump unravelings: rate operators, single steps, trajectories, ensembles.

mod ensemble;
mod policy;
mod rate_operator;
mod step;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{BlochVector, LinalgError, PureState};
use crate::master::MasterError;

pub use ensemble::{run_ensemble, EnsembleOptions, EnsembleResult, RealizationSample};
pub use policy::{EffectiveLabel, PhiPolicy, PhiRule, PolicyContext};
pub use rate_operator::{
    build_rate_operator, orthogonal_jump_phi, rate_operator_at, w_operator, RateOperatorResult,
};
pub use step::{mcwf_step, psi_roqj_step, w_roqj_step, StepEvent};
pub use trajectory::{
    deterministic_path, probe_positivity, run_trajectory, waiting_time_jump_sampler, DeterministicPath,
    EventKind, TrajectoryEvent, TrajectoryRecord, WaitingTimeJump,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Jumps along the Lindblad operators; needs nonnegative rates.
    Mcwf,
    /// Orthogonal jumps to the eigenstates of the projected jump image.
    WRoqj,
    /// Rate operator with a state-independent gauge C(t).
    RRoqj,
    /// Rate operator with a state-dependent transformation Phi.
    PsiRoqj,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mcwf => "mcwf",
            Method::WRoqj => "w_roqj",
            Method::RRoqj => "r_roqj",
            Method::PsiRoqj => "psi_roqj",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mcwf" => Ok(Method::Mcwf),
            "w_roqj" => Ok(Method::WRoqj),
            "r_roqj" => Ok(Method::RRoqj),
            "psi_roqj" => Ok(Method::PsiRoqj),
            other => Err(format!("unknown method `{other}` (expected mcwf, w_roqj, r_roqj or psi_roqj)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// One uniform draw per step compared with the step jump probability.
    #[default]
    Bernoulli,
    /// Norm-decay sampling: jump once the accumulated survival falls below a draw.
    WaitingTime,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnravelError {
    #[error("negative jump rate {min_eigenvalue:.6e} at t = {t} for state with Bloch vector {bloch:?}")]
    PositivityViolation { t: f64, bloch: Option<BlochVector>, state: PureState, min_eigenvalue: f64 },
    #[error("Lindblad rate {rate:.6e} of term {term} is negative at t = {t}")]
    NegativeRateError { t: f64, term: usize, rate: f64 },
    #[error("total jump probability {total:.6} exceeds one at t = {t}")]
    ProbabilityOverflow { t: f64, total: f64 },
    #[error("policy error: {0}")]
    PolicyError(String),
    #[error("c11 = {c11} is below the admissible bound {bound}")]
    ConstraintError { c11: f64, bound: f64 },
    #[error("state is at a pole (amplitude {amplitude:.3e}); the bounds diverge there")]
    PoleState { amplitude: f64 },
    #[error("amplitude {amplitude:.3e} is too small to divide by")]
    DegenerateAmplitude { amplitude: f64 },
    #[error("expected a real amplitude after gauge fixing, imaginary part {imag:.3e}")]
    GaugeError { imag: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Master(#[from] MasterError),
}

impl UnravelError {
    pub(crate) fn violation(t: f64, state: &PureState, min_eigenvalue: f64) -> Self {
        UnravelError::PositivityViolation { t, bloch: state.bloch().ok(), state: state.clone(), min_eigenvalue }
    }
}
