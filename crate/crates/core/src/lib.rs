//! Quantum-jump unravelings of time-local qubit master equations.
//!
//! The crate is organised bottom-up: [`linalg`] provides small dense complex
//! algebra, [`master`] describes the master equation and integrates it
//! exactly, [`divisibility`] analyses where positive jump rates can exist,
//! [`unravel`] runs the stochastic engines, [`models`] holds the concrete
//! dynamics and jump policies, and [`harness`] drives experiments from a
//! configuration file.

pub mod linalg;
pub mod master;
pub mod numeric;
pub mod divisibility;
pub mod unravel;
pub mod models;
pub mod harness;

pub use linalg::{BlochVector, DensityMatrix, HermitianOperator, LinalgError, Matrix, NonHermitianOperator, PureState, C64};
pub use master::{MasterEquationModel, MasterError, RateFn, TimeGrid};
pub use numeric::NumericPolicy;
