//! P-divisibility tests and the positivity domain: the set of pure states at
//! which some rate operator with nonnegative eigenvalues exists.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{orthogonal_complement, restricted_eigen, BlochVector, LinalgError, Matrix, PureState};
use crate::master::{jump_image, ExactSolution, MasterEquationModel};
use crate::numeric::NumericPolicy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivisibilityError {
    #[error("basis is not orthonormal (Gram deviation {deviation:.3e})")]
    BasisError { deviation: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// min_{i != j} sum_a gamma_a |<phi_i|L_a|phi_j>|^2 over the given basis.
/// A negative value certifies that the dynamics is not P-divisible at t.
pub fn p_div_witness(model: &MasterEquationModel, t: f64, basis: &[PureState]) -> Result<f64, DivisibilityError> {
    let d = model.dim();
    if basis.len() != d {
        return Err(LinalgError::DimensionError { expected: d, found: basis.len() }.into());
    }
    let mut deviation = 0.0f64;
    for (i, u) in basis.iter().enumerate() {
        if u.dim() != d {
            return Err(LinalgError::DimensionError { expected: d, found: u.dim() }.into());
        }
        for (j, v) in basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((u.inner(v) - target).norm());
        }
    }
    if deviation > 1e-10 {
        return Err(DivisibilityError::BasisError { deviation });
    }
    let rates = model.rates(t);
    let mut best = f64::INFINITY;
    for (i, u) in basis.iter().enumerate() {
        for (j, v) in basis.iter().enumerate() {
            if i == j {
                continue;
            }
            let s: f64 = model
                .terms()
                .iter()
                .zip(&rates)
                .map(|(term, r)| r * term.operator.sandwich(u.amplitudes(), v.amplitudes()).norm_sqr())
                .sum();
            best = best.min(s);
        }
    }
    Ok(best)
}

/// P-divisibility of a phase covariant qubit generator from its three rates.
pub fn phase_covariant_p_div(gamma_plus: f64, gamma_minus: f64, gamma_z: f64) -> bool {
    gamma_plus >= 0.0 && gamma_minus >= 0.0 && gamma_z >= -0.5 * (gamma_plus * gamma_minus).sqrt()
}

/// Smallest eigenvalue of (1 - P) J_t[P] (1 - P) on the complement of psi.
pub fn positivity_witness(model: &MasterEquationModel, t: f64, psi: &PureState) -> f64 {
    witness_with_rates(model, &model.rates(t), psi)
}

pub(crate) fn witness_with_rates(model: &MasterEquationModel, rates: &[f64], psi: &PureState) -> f64 {
    let p = Matrix::outer(psi.amplitudes(), psi.amplitudes());
    let jp = jump_image(model, rates, &p);
    if psi.dim() == 2 {
        let perp = psi.qubit_orthogonal();
        return jp.sandwich(perp.amplitudes(), perp.amplitudes()).re;
    }
    let complement = orthogonal_complement(psi);
    restricted_eigen(&jp, &complement).last().map(|e| e.value).unwrap_or(f64::INFINITY)
}

pub fn in_positivity_domain(model: &MasterEquationModel, t: f64, psi: &PureState) -> bool {
    positivity_witness(model, t, psi) >= -NumericPolicy::default().domain
}

/// The ratio 4 gamma_z / |gamma| for the dephasing-dominated family
/// gamma_+ = gamma_- = gamma < 0, gamma_z > 0, together with a Bloch height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainQuery {
    pub z: f64,
    pub g: f64,
}

impl DomainQuery {
    /// Half-width of the admissible band |z| <= sqrt((g - 2)/(g + 2)), or
    /// `None` when the band is empty (g < 2).
    pub fn band_halfwidth(g: f64) -> Option<f64> {
        (g >= 2.0).then(|| ((g - 2.0) / (g + 2.0)).sqrt())
    }

    pub fn in_band(&self) -> bool {
        match Self::band_halfwidth(self.g) {
            Some(w) => self.z.abs() <= w,
            None => false,
        }
    }
}

/// Four times the phase covariant witness as a polynomial in z = <sigma_z>:
/// D = g+ + g- + 4 gz + 2 z (g+ - g-) + z^2 (g+ + g- - 4 gz).
/// Returns D and whether the state lies in the positivity domain.
pub fn phase_covariant_domain(gamma_plus: f64, gamma_minus: f64, gamma_z: f64, z: f64) -> (f64, bool) {
    let d = gamma_plus + gamma_minus + 4.0 * gamma_z
        + 2.0 * z * (gamma_plus - gamma_minus)
        + z * z * (gamma_plus + gamma_minus - 4.0 * gamma_z);
    (d, d >= -NumericPolicy::default().domain)
}

/// Deterministic, nearly uniform Bloch-sphere sample.
pub fn fibonacci_sphere(m: usize) -> Vec<BlochVector> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            BlochVector::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposable {
    Yes,
    No,
    Inconclusive,
}

impl Decomposable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decomposable::Yes => "yes",
            Decomposable::No => "no",
            Decomposable::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionsRow {
    pub t: f64,
    pub domain_fraction: f64,
    /// Some pair of orthogonal states lies in the domain.
    pub basis_ok: bool,
    /// rho(t) is a mixture of domain states.
    pub decomposable: Decomposable,
}

/// Evaluates the two necessary conditions for a positive unraveling along an
/// exact trajectory, using `samples` Bloch-sphere points per time.
pub fn necessary_conditions_report(
    model: &MasterEquationModel,
    exact: &ExactSolution,
    samples: usize,
) -> Result<Vec<ConditionsRow>, DivisibilityError> {
    if model.dim() != 2 {
        return Err(LinalgError::DimensionError { expected: 2, found: model.dim() }.into());
    }
    let sphere = fibonacci_sphere(samples.max(1));
    let states: Vec<PureState> = sphere.iter().map(|b| b.to_pure_state()).collect();
    let blochs: Vec<BlochVector> =
        exact.states.iter().map(|rho| rho.to_bloch()).collect::<Result<_, _>>()?;
    let rows = exact
        .times
        .par_iter()
        .zip(blochs.par_iter())
        .map(|(&t, r)| conditions_at(model, t, r, &sphere, &states))
        .collect();
    Ok(rows)
}

const AXES: [[f64; 3]; 6] =
    [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];

fn conditions_at(
    model: &MasterEquationModel,
    t: f64,
    r: &BlochVector,
    sphere: &[BlochVector],
    states: &[PureState],
) -> ConditionsRow {
    let rates = model.rates(t);
    let tol = NumericPolicy::default().domain;
    let inside = |b: &BlochVector| witness_with_rates(model, &rates, &b.to_pure_state()) >= -tol;
    let members: Vec<usize> = states
        .iter()
        .enumerate()
        .filter(|(_, s)| witness_with_rates(model, &rates, s) >= -tol)
        .map(|(i, _)| i)
        .collect();
    let domain_fraction = members.len() as f64 / sphere.len() as f64;
    // Axis points are probed on top of the sample.
    let points: Vec<BlochVector> = members
        .iter()
        .map(|&i| sphere[i])
        .chain(AXES.iter().map(|a| BlochVector::new(a[0], a[1], a[2])).filter(|b| inside(b)))
        .collect();
    let antipode = |b: &BlochVector| BlochVector::new(-b.x, -b.y, -b.z);
    let basis_ok = points.iter().any(|b| inside(&antipode(b)));

    let decomposable = if points.is_empty() {
        Decomposable::No
    } else if r.norm() > 1.0 - 1e-9 {
        if inside(r) {
            Decomposable::Yes
        } else {
            Decomposable::No
        }
    } else if points.iter().any(|p| chord_endpoint(p, r).is_some_and(|q| inside(&q))) {
        Decomposable::Yes
    } else {
        Decomposable::Inconclusive
    };
    ConditionsRow { t, domain_fraction, basis_ok, decomposable }
}

/// Second intersection of the line from the surface point p through the
/// interior point r with the unit sphere.
fn chord_endpoint(p: &BlochVector, r: &BlochVector) -> Option<BlochVector> {
    let d = [r.x - p.x, r.y - p.y, r.z - p.z];
    let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if dd < 1e-24 {
        return None;
    }
    // |p + s d|^2 = 1 has roots 0 and s = -2 p.d / |d|^2
    let s = -2.0 * (p.x * d[0] + p.y * d[1] + p.z * d[2]) / dd;
    (s > 1.0).then(|| BlochVector::new(p.x + s * d[0], p.y + s * d[1], p.z + s * d[2]))
}
