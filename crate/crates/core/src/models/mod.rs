//! Concrete qubit dynamics and the jump policies that unravel them.

mod driven;
mod phase_covariant;
mod scan;

pub use driven::{driven_model, xi_bounds, DrivenPolicy, XiBounds};
pub use phase_covariant::{
    phase_covariant_model, phi_bounds_ph_cov, pm_bounds, pm_coordinates, pole_phi, pure_dephasing_model, PhaseCovariantRates,
    PhiBounds, PlusMinusBounds, PlusMinusNonDivisiblePolicy, PlusMinusPolicy, PoleJumpPolicy, ThetaSwitchPolicy,
};
pub use scan::{kappa_scan, scan_cell, theta_grid, KappaScanConfig, KappaScanResult};
