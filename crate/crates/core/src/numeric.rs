//! Tolerances shared by every layer of the engine.
//!
//! All thresholds live in one record so a run configuration can override
//! them in one place. The defaults are the values the test-suite is pinned to.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericPolicy {
    /// Max |A_ij - conj(A_ji)| accepted for a Hermitian operator.
    pub hermitian: f64,
    /// Max | ||psi|| - 1 | accepted for a normalized state.
    pub normalization: f64,
    /// Max |tr rho - 1| accepted for a density matrix.
    pub trace: f64,
    /// Most negative eigenvalue accepted for a density matrix.
    pub min_eigenvalue: f64,
    /// Rate-operator eigenvalues in (-positivity_clip, 0) are clipped to zero;
    /// anything below is a positivity violation.
    pub positivity_clip: f64,
    /// Slack used by the positivity-domain membership tests.
    pub domain: f64,
    /// Two eigenvalues closer than this (relative to the spectral scale) are
    /// treated as degenerate.
    pub degeneracy: f64,
    /// A state whose infidelity with a declared label state is below this is
    /// identified with the label.
    pub label_infidelity: f64,
    /// Amplitudes below this are treated as exactly zero by the policies that
    /// divide by them.
    pub amplitude_floor: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            hermitian: 1e-12,
            normalization: 1e-12,
            trace: 1e-10,
            min_eigenvalue: 1e-9,
            positivity_clip: 1e-10,
            domain: 1e-12,
            degeneracy: 1e-14,
            label_infidelity: 1e-12,
            amplitude_floor: 1e-8,
        }
    }
}
