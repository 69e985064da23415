//! Time-local master equations in Lindblad form with possibly negative
//! rates, the jump/drift split, the C-gauge, and an RK4 reference solver.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::linalg::{
    DensityMatrix, HermitianOperator, LinalgError, Matrix, NonHermitianOperator, I,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MasterError {
    #[error("time step {dt} exceeds the stability limit {limit:.3e}")]
    StepSizeError { dt: f64, limit: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Scalar function of time: a decay rate or a Hamiltonian coefficient.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFn {
    Constant { value: f64 },
    /// amplitude * exp(-decay t)
    Exp { amplitude: f64, decay: f64 },
    /// amplitude * tanh(scale t)
    Tanh { amplitude: f64, scale: f64 },
    /// amplitude * exp(-decay t) cos(frequency t)
    DampedCos { amplitude: f64, decay: f64, frequency: f64 },
    Sum { terms: Vec<RateFn> },
    /// Piecewise-linear interpolation; constant extrapolation outside.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Constant { value } => write!(f, "Constant({value})"),
            RateFn::Exp { amplitude, decay } => write!(f, "Exp({amplitude}, {decay})"),
            RateFn::Tanh { amplitude, scale } => write!(f, "Tanh({amplitude}, {scale})"),
            RateFn::DampedCos { amplitude, decay, frequency } => {
                write!(f, "DampedCos({amplitude}, {decay}, {frequency})")
            }
            RateFn::Sum { terms } => f.debug_list().entries(terms).finish(),
            RateFn::Tabulated { times, .. } => write!(f, "Tabulated({} samples)", times.len()),
            RateFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl RateFn {
    pub fn constant(value: f64) -> Self {
        RateFn::Constant { value }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RateFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RateFn::Constant { value } => *value,
            RateFn::Exp { amplitude, decay } => amplitude * (-decay * t).exp(),
            RateFn::Tanh { amplitude, scale } => amplitude * (scale * t).tanh(),
            RateFn::DampedCos { amplitude, decay, frequency } => {
                amplitude * (-decay * t).exp() * (frequency * t).cos()
            }
            RateFn::Sum { terms } => terms.iter().map(|r| r.eval(t)).sum(),
            RateFn::Tabulated { times, values } => interpolate(times, values, t),
            RateFn::Custom(f) => f(t),
        }
    }

    pub fn validate(&self) -> Result<(), MasterError> {
        match self {
            RateFn::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(MasterError::InvalidModel(
                        "tabulated rate needs equally many (nonzero) times and values".into(),
                    ));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(MasterError::InvalidModel(
                        "tabulated rate times must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            RateFn::Sum { terms } => terms.iter().try_for_each(RateFn::validate),
            _ => Ok(()),
        }
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] + w * (values[k + 1] - values[k])
}

/// One dissipator term gamma(t) (L rho L† - {L†L, rho}/2).
#[derive(Clone, Debug)]
pub struct LindbladTerm {
    pub operator: Matrix,
    pub rate: RateFn,
}

/// One Hamiltonian term f(t) M with M Hermitian.
#[derive(Clone, Debug)]
pub struct HamiltonianTerm {
    pub coefficient: RateFn,
    pub operator: Matrix,
}

/// Which known structure the Lindblad terms follow. Policies that rely on a
/// particular operator layout check this tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelLayout {
    Generic,
    /// Terms are exactly (sigma_+, gamma_+), (sigma_-, gamma_-), (sigma_z, gamma_z).
    PhaseCovariant,
    /// A single (sigma_z, gamma) term: phase covariant with gamma_+ = gamma_- = 0.
    PureDephasing,
}

#[derive(Clone, Debug)]
pub struct MasterEquationModel {
    dim: usize,
    hamiltonian: Vec<HamiltonianTerm>,
    terms: Vec<LindbladTerm>,
    layout: ModelLayout,
    name: String,
}

impl MasterEquationModel {
    pub fn new(
        dim: usize,
        hamiltonian: Vec<HamiltonianTerm>,
        terms: Vec<LindbladTerm>,
    ) -> Result<Self, MasterError> {
        if dim == 0 {
            return Err(MasterError::InvalidModel("dimension must be positive".into()));
        }
        for h in &hamiltonian {
            if h.operator.dim() != dim {
                return Err(LinalgError::DimensionError { expected: dim, found: h.operator.dim() }.into());
            }
            HermitianOperator::new(h.operator.clone())?;
            h.coefficient.validate()?;
        }
        for term in &terms {
            if term.operator.dim() != dim {
                return Err(LinalgError::DimensionError { expected: dim, found: term.operator.dim() }.into());
            }
            if !term.operator.is_finite() {
                return Err(LinalgError::NonFinite.into());
            }
            term.rate.validate()?;
        }
        Ok(Self { dim, hamiltonian, terms, layout: ModelLayout::Generic, name: "custom".into() })
    }

    pub(crate) fn with_layout(mut self, layout: ModelLayout, name: &str) -> Self {
        self.layout = layout;
        self.name = name.to_string();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[LindbladTerm] {
        &self.terms
    }

    pub fn hamiltonian_terms(&self) -> &[HamiltonianTerm] {
        &self.hamiltonian
    }

    pub fn layout(&self) -> ModelLayout {
        self.layout
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rates(&self, t: f64) -> SmallVec<[f64; 4]> {
        self.terms.iter().map(|term| term.rate.eval(t)).collect()
    }

    pub fn hamiltonian(&self, t: f64) -> HermitianOperator {
        let mut h = Matrix::zeros(self.dim);
        for term in &self.hamiltonian {
            h += &term.operator.scale_real(term.coefficient.eval(t));
        }
        HermitianOperator::symmetrized(&h)
    }

    /// Gamma(t) = sum_a gamma_a L_a† L_a.
    pub fn gamma_operator(&self, t: f64) -> HermitianOperator {
        let mut g = Matrix::zeros(self.dim);
        for term in &self.terms {
            let l = &term.operator;
            g += &(&l.adjoint() * l).scale_real(term.rate.eval(t));
        }
        HermitianOperator::symmetrized(&g)
    }

    /// (gamma_+, gamma_-, gamma_z) when the model has the phase covariant layout.
    pub fn phase_covariant_rates(&self, t: f64) -> Option<(f64, f64, f64)> {
        let p = phase_covariant_from(self.layout, &self.rates(t))?;
        Some((p.gamma_plus, p.gamma_minus, p.gamma_z))
    }

    /// Everything the trajectory engines need at one instant.
    pub fn snapshot(&self, t: f64) -> Snapshot {
        let rates = self.rates(t);
        let h = self.hamiltonian(t).into_matrix();
        let mut gamma = Matrix::zeros(self.dim);
        for (term, &r) in self.terms.iter().zip(&rates) {
            let l = &term.operator;
            gamma += &(&l.adjoint() * l).scale_real(r);
        }
        let gamma = gamma.hermitian_part();
        let k = &h - &gamma.scale(I * 0.5);
        let phase_covariant = phase_covariant_from(self.layout, &rates);
        Snapshot { t, rates, h, gamma, k, phase_covariant }
    }
}

fn phase_covariant_from(layout: ModelLayout, rates: &[f64]) -> Option<PhaseCovariantSnapshot> {
    match layout {
        ModelLayout::PhaseCovariant => {
            Some(PhaseCovariantSnapshot { gamma_plus: rates[0], gamma_minus: rates[1], gamma_z: rates[2] })
        }
        ModelLayout::PureDephasing => Some(PhaseCovariantSnapshot { gamma_plus: 0.0, gamma_minus: 0.0, gamma_z: rates[0] }),
        ModelLayout::Generic => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseCovariantSnapshot {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_z: f64,
}

/// Model data frozen at time t.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    /// gamma_a(t) in term order.
    pub rates: SmallVec<[f64; 4]>,
    pub h: Matrix,
    pub gamma: Matrix,
    /// K = H - i Gamma / 2
    pub k: Matrix,
    pub phase_covariant: Option<PhaseCovariantSnapshot>,
}

/// State-independent gauge operator C(t).
#[derive(Clone)]
pub struct GaugeTransformation {
    c: Arc<dyn Fn(f64) -> Matrix + Send + Sync>,
}

impl fmt::Debug for GaugeTransformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GaugeTransformation")
    }
}

impl GaugeTransformation {
    pub fn new(c: impl Fn(f64) -> Matrix + Send + Sync + 'static) -> Self {
        Self { c: Arc::new(c) }
    }

    pub fn constant(c: Matrix) -> Self {
        Self::new(move |_| c.clone())
    }

    pub fn c_operator(&self, t: f64) -> NonHermitianOperator {
        NonHermitianOperator((self.c)(t))
    }
}

/// J_t[rho] = sum_a gamma_a L_a rho L_a†.
pub fn jump_apply(model: &MasterEquationModel, t: f64, rho: &DensityMatrix) -> Matrix {
    jump_image(model, &model.rates(t), rho.matrix())
}

pub(crate) fn jump_image(model: &MasterEquationModel, rates: &[f64], rho: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(model.dim);
    for (term, &r) in model.terms.iter().zip(rates) {
        if r != 0.0 {
            out += &rho.conjugate_by(&term.operator).scale_real(r);
        }
    }
    out
}

/// K(t) = H(t) - (i/2) Gamma(t).
pub fn effective_hamiltonian(model: &MasterEquationModel, t: f64) -> NonHermitianOperator {
    NonHermitianOperator(model.snapshot(t).k)
}

/// The right-hand side of the master equation.
pub fn generator_apply(model: &MasterEquationModel, t: f64, rho: &DensityMatrix) -> Matrix {
    generator_matrix(model, &model.snapshot(t), rho.matrix())
}

pub(crate) fn generator_matrix(model: &MasterEquationModel, snap: &Snapshot, rho: &Matrix) -> Matrix {
    // J[rho] - i (K rho - rho K†)
    let j = jump_image(model, &snap.rates, rho);
    let k_rho = &snap.k * rho;
    let drift = &k_rho - &k_rho.adjoint();
    &j - &drift.scale(I)
}

/// Transformed pair (J'_t[rho], K'(t)) under the gauge C.
pub fn gauge_transform(
    model: &MasterEquationModel,
    gauge: &GaugeTransformation,
    t: f64,
    rho: &DensityMatrix,
) -> (Matrix, NonHermitianOperator) {
    let snap = model.snapshot(t);
    let c = gauge.c_operator(t).0;
    let rho = rho.matrix();
    let j = jump_image(model, &snap.rates, rho);
    let c_rho = &c * rho;
    let shift = (&c_rho + &c_rho.adjoint()).scale_real(0.5);
    let k_prime = &snap.k - &c.scale(I * 0.5);
    (&j + &shift, NonHermitianOperator(k_prime))
}

/// Reassembles J' - i(K' rho - rho K'†).
pub fn reassemble_generator(j_prime: &Matrix, k_prime: &NonHermitianOperator, rho: &DensityMatrix) -> Matrix {
    let k_rho = k_prime.matrix() * rho.matrix();
    let drift = &k_rho - &k_rho.adjoint();
    j_prime - &drift.scale(I)
}

/// Uniform simulation grid with a coarser output cadence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub output_stride: usize,
}

fn one() -> usize {
    1
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64, output_stride: usize) -> Result<Self, MasterError> {
        let grid = Self { t_max, dt, output_stride };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), MasterError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(MasterError::InvalidGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(MasterError::InvalidGrid(format!("t_max must be nonnegative, got {}", self.t_max)));
        }
        if self.output_stride == 0 {
            return Err(MasterError::InvalidGrid("output_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    #[inline]
    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Step indices at which output is recorded (always includes 0 and the last step).
    pub fn output_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.output_stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        steps
    }

    pub fn output_times(&self) -> Vec<f64> {
        self.output_steps().into_iter().map(|k| self.time(k)).collect()
    }
}

/// Exact (RK4) density-matrix trajectory on the output grid.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

/// Largest dt accepted by [`exact_solve`] for this model and window.
pub fn stability_limit(model: &MasterEquationModel, grid: &TimeGrid) -> f64 {
    let n = grid.n_steps();
    let mut worst = 0.0f64;
    for k in 0..=n {
        let t = grid.time(k);
        let scale = model.gamma_operator(t).spectral_norm() + model.hamiltonian(t).spectral_norm();
        worst = worst.max(scale);
    }
    if worst == 0.0 {
        f64::INFINITY
    } else {
        0.1 / worst
    }
}

/// Classical fourth-order Runge-Kutta with fixed dt, symmetrized every step.
pub fn exact_solve(
    model: &MasterEquationModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<ExactSolution, MasterError> {
    grid.validate()?;
    if rho0.dim() != model.dim {
        return Err(LinalgError::DimensionError { expected: model.dim, found: rho0.dim() }.into());
    }
    let limit = stability_limit(model, grid);
    if grid.dt > limit {
        return Err(MasterError::StepSizeError { dt: grid.dt, limit });
    }
    let dt = grid.dt;
    let n = grid.n_steps();
    let outputs = grid.output_steps();
    let mut next_out = 0;
    let mut times = Vec::with_capacity(outputs.len());
    let mut states = Vec::with_capacity(outputs.len());
    let mut rho = rho0.matrix().clone();
    let f = |t: f64, r: &Matrix| generator_matrix(model, &model.snapshot(t), r);
    for step in 0..=n {
        if next_out < outputs.len() && outputs[next_out] == step {
            times.push(grid.time(step));
            states.push(DensityMatrix::from_matrix_unchecked(rho.clone()));
            next_out += 1;
        }
        if step == n {
            break;
        }
        let t = grid.time(step);
        let k1 = f(t, &rho);
        let k2 = f(t + 0.5 * dt, &(&rho + &k1.scale_real(0.5 * dt)));
        let k3 = f(t + 0.5 * dt, &(&rho + &k2.scale_real(0.5 * dt)));
        let k4 = f(t + dt, &(&rho + &k3.scale_real(dt)));
        let mut incr = &k1 + &k4;
        incr += &(&k2 + &k3).scale_real(2.0);
        rho = (&rho + &incr.scale_real(dt / 6.0)).hermitian_part();
        if !rho.is_finite() {
            return Err(LinalgError::NonFinite.into());
        }
    }
    Ok(ExactSolution { times, states })
}

/// tr(A rho) for a Hermitian observable, real part.
pub fn expectation(rho: &DensityMatrix, observable: &Matrix) -> f64 {
    (observable * rho.matrix()).trace().re
}
