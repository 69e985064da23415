//! JSON run configuration and the model and policy zoo it addresses.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, PureState, C64};
use crate::master::{GaugeTransformation, MasterEquationModel, RateFn, TimeGrid};
use crate::models::{
    driven_model, phase_covariant_model, pure_dephasing_model, DrivenPolicy, PhaseCovariantRates,
    PlusMinusNonDivisiblePolicy, PlusMinusPolicy, PoleJumpPolicy, ThetaSwitchPolicy,
};
use crate::numeric::NumericPolicy;
use crate::unravel::{EnsembleOptions, Method, PhiPolicy, PolicyContext, Sampling};

use super::HarnessError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub method: Method,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    pub grid: TimeGrid,
    pub ensemble: EnsembleConfig,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub numeric: NumericPolicy,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub domain: DomainSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", content = "parameters", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// gamma_+ = gamma_- = 1, gamma_z = -tanh(t)/2.
    Enm,
    Driven { gamma: f64, beta: f64 },
    OscillatingDephasing { kappa: f64 },
    OscillatingDecay { kappa: f64 },
    PureDephasing { gamma: RateFn },
    PhaseCovariant {
        gamma_plus: RateFn,
        gamma_minus: RateFn,
        gamma_z: RateFn,
        #[serde(default)]
        h_z: Option<RateFn>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<MasterEquationModel, HarnessError> {
        let model = match self {
            ModelConfig::Enm => phase_covariant_model(PhaseCovariantRates::eternally_non_markovian(), None),
            ModelConfig::Driven { gamma, beta } => {
                if !(*gamma > 0.0) || !beta.is_finite() {
                    return Err(HarnessError::config("model.parameters", "driven model needs gamma > 0 and finite beta"));
                }
                driven_model(*gamma, *beta)
            }
            ModelConfig::OscillatingDephasing { kappa } => {
                phase_covariant_model(PhaseCovariantRates::oscillating_dephasing(*kappa), None)
            }
            ModelConfig::OscillatingDecay { kappa } => {
                phase_covariant_model(PhaseCovariantRates::oscillating_decay(*kappa), None)
            }
            ModelConfig::PureDephasing { gamma } => {
                validate_rate("model.parameters.gamma", gamma)?;
                pure_dephasing_model(gamma.clone())
            }
            ModelConfig::PhaseCovariant { gamma_plus, gamma_minus, gamma_z, h_z } => {
                validate_rate("model.parameters.gamma_plus", gamma_plus)?;
                validate_rate("model.parameters.gamma_minus", gamma_minus)?;
                validate_rate("model.parameters.gamma_z", gamma_z)?;
                if let Some(h) = h_z {
                    validate_rate("model.parameters.h_z", h)?;
                }
                let rates = PhaseCovariantRates {
                    gamma_plus: gamma_plus.clone(),
                    gamma_minus: gamma_minus.clone(),
                    gamma_z: gamma_z.clone(),
                };
                phase_covariant_model(rates, h_z.clone())
            }
        };
        Ok(model)
    }
}

fn validate_rate(path: &str, rate: &RateFn) -> Result<(), HarnessError> {
    rate.validate().map_err(|e| HarnessError::config(path, &e.to_string()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub name: String,
    #[serde(default)]
    pub parameters: PolicyParameters,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParameters {
    pub mixing_lambda: f64,
    pub theta_bar: f64,
    pub xi_selector: f64,
    pub epsilon: f64,
    /// Eigenvalue offset of psi for the orthogonal policy; omitted gives the
    /// value that reproduces the W operator unraveling.
    pub c11: Option<f64>,
    /// Constant gauge operator for `c_operator`, rows of [re, im] pairs.
    pub c: Option<Vec<Vec<[f64; 2]>>>,
}

impl Default for PolicyParameters {
    fn default() -> Self {
        let ctx = PolicyContext::default();
        Self {
            mixing_lambda: ctx.mixing_lambda,
            theta_bar: ctx.theta_bar,
            xi_selector: ctx.xi_selector,
            epsilon: ctx.epsilon_shrink,
            c11: None,
            c: None,
        }
    }
}

/// Names accepted in `policy.name`.
pub const POLICY_NAMES: &[&str] =
    &["zero", "orthogonal", "c_operator", "pole", "theta_switch", "pm_enm", "pm_nonp", "driven"];

impl PolicyConfig {
    pub fn build(&self) -> Result<PhiPolicy, HarnessError> {
        let p = &self.parameters;
        let policy = match self.name.as_str() {
            "zero" => PhiPolicy::Zero,
            "orthogonal" => PhiPolicy::Orthogonal { c11: p.c11 },
            "c_operator" => {
                let rows = p.c.as_ref().ok_or_else(|| HarnessError::missing("policy.parameters", "c"))?;
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(HarnessError::config("policy.parameters.c", "gauge operator must be a square matrix"));
                }
                let m = Matrix::from_fn(n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
                PhiPolicy::COperator(GaugeTransformation::constant(m))
            }
            "pole" => PhiPolicy::builtin(PoleJumpPolicy::default()),
            "theta_switch" => PhiPolicy::builtin(ThetaSwitchPolicy::default()),
            "pm_enm" => PhiPolicy::builtin(PlusMinusPolicy::default()),
            "pm_nonp" => PhiPolicy::builtin(PlusMinusNonDivisiblePolicy::default()),
            "driven" => PhiPolicy::builtin(DrivenPolicy::default()),
            other => {
                return Err(HarnessError::config(
                    "policy.name",
                    &format!("unknown policy `{other}` (expected one of {})", POLICY_NAMES.join(", ")),
                ))
            }
        };
        Ok(policy)
    }

    /// Trajectory context for a run starting from `psi0`.
    pub fn context(&self, psi0: &PureState) -> PolicyContext {
        let a = psi0.amplitudes();
        let initial_theta = if a.len() == 2 { a[1].norm().atan2(a[0].norm()) } else { 0.0 };
        PolicyContext {
            initial_theta,
            mixing_lambda: self.parameters.mixing_lambda,
            epsilon_shrink: self.parameters.epsilon,
            theta_bar: self.parameters.theta_bar,
            xi_selector: self.parameters.xi_selector,
            has_jumped: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    /// cos(theta)|0> + e^{i phi} sin(theta)|1>.
    Angles {
        theta: f64,
        #[serde(default)]
        phi: f64,
    },
    /// Complex amplitudes as [re, im] pairs, normalized on load.
    Amplitudes { amplitudes: Vec<[f64; 2]> },
}

impl InitialState {
    pub fn build(&self, dim: usize) -> Result<PureState, HarnessError> {
        let psi = match self {
            InitialState::Angles { theta, phi } => {
                if dim != 2 {
                    return Err(HarnessError::config("initial_state", "angles describe qubit states only"));
                }
                PureState::from_angles(*theta, *phi)
            }
            InitialState::Amplitudes { amplitudes } => {
                if amplitudes.len() != dim {
                    return Err(HarnessError::config(
                        "initial_state.amplitudes",
                        &format!("expected {dim} amplitudes, found {}", amplitudes.len()),
                    ));
                }
                let amps: Vec<C64> = amplitudes.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                PureState::normalized(&amps).map_err(|e| HarnessError::config("initial_state.amplitudes", &e.to_string()))?
            }
        };
        Ok(psi)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub base_seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub sampling: Sampling,
    /// Trajectories whose sampled states go to realizations.csv.
    #[serde(default)]
    pub record_realizations: usize,
}

fn one() -> usize {
    1
}

impl EnsembleConfig {
    pub fn options(&self, tolerances: NumericPolicy) -> EnsembleOptions {
        EnsembleOptions {
            n_traj: self.n_traj,
            base_seed: self.base_seed,
            workers: self.workers,
            sampling: self.sampling,
            record_realizations: self.record_realizations,
            tolerances,
        }
    }
}

/// Grid of the kappa scan; the model section must name `oscillating_dephasing`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub kappas: Vec<f64>,
    /// Explicit angles; when absent, `n_theta + 1` angles cover [0, pi/2].
    #[serde(default)]
    pub thetas: Option<Vec<f64>>,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    /// Trajectories per cell on top of the exhaustive probe.
    #[serde(default)]
    pub n_traj: usize,
}

fn default_n_theta() -> usize {
    30
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    /// Bloch-sphere points per time for the domain fraction.
    pub samples: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { samples: 2000 }
    }
}

impl RunConfig {
    /// Parses a config document, reporting schema violations with the path
    /// of the offending field.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::config(&path, &e.inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<(Self, Vec<u8>), HarnessError> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| HarnessError::config(".", "config file is not valid UTF-8"))?;
        Ok((Self::from_json(text)?, bytes))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.grid.validate().map_err(|e| HarnessError::config("grid", &e.to_string()))?;
        if self.ensemble.n_traj == 0 {
            return Err(HarnessError::config("ensemble.n_traj", "must be at least 1"));
        }
        if !POLICY_NAMES.contains(&self.policy.name.as_str()) {
            return Err(HarnessError::config(
                "policy.name",
                &format!("unknown policy `{}` (expected one of {})", self.policy.name, POLICY_NAMES.join(", ")),
            ));
        }
        let p = &self.policy.parameters;
        for (name, v) in [("mixing_lambda", p.mixing_lambda), ("xi_selector", p.xi_selector)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(HarnessError::config(&format!("policy.parameters.{name}"), "must lie in [0, 1]"));
            }
        }
        if !(p.epsilon >= 0.0) {
            return Err(HarnessError::config("policy.parameters.epsilon", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn initial_state(&self, dim: usize) -> Result<PureState, HarnessError> {
        self.initial_state.as_ref().ok_or_else(|| HarnessError::missing(".", "initial_state"))?.build(dim)
    }
}
