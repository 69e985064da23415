//! Small dense complex linear algebra: states, operators, density matrices.
//!
//! Everything here is dimension-generic, but the storage is inline for
//! qubits so that the trajectory hot loop never touches the allocator.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use smallvec::SmallVec;
use thiserror::Error;

use crate::numeric::NumericPolicy;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Amplitude storage; inline up to a qubit.
pub type Amplitudes = SmallVec<[C64; 2]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NonHermitianInput { deviation: f64 },
    #[error("state is not normalized (norm {norm})")]
    NormalizationError { norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionError { expected: usize, found: usize },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("non-finite entry")]
    NonFinite,
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Row-major square complex matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: SmallVec<[C64; 4]>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<_> = (0..self.dim)
            .map(|i| &self.data[i * self.dim..(i + 1) * self.dim])
            .collect();
        f.debug_struct("Matrix").field("dim", &self.dim).field("rows", &rows).finish()
    }
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: SmallVec::from_elem(ZERO, dim * dim) }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let mut data = SmallVec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self { dim, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut data = SmallVec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "ragged matrix rows");
            data.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self { dim, data }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = SmallVec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// |u><v|
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        debug_assert_eq!(u.len(), v.len());
        let dim = u.len();
        Self::from_fn(dim, |i, j| u[i] * v[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Amplitudes {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.data[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// <u|A|v>
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        let av = self.mul_vec(v);
        u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest |A_ij - conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// (A + A†)/2
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// AB - BA
    pub fn commutator(&self, other: &Matrix) -> Self {
        &(self * other) - &(other * self)
    }

    /// AB + BA
    pub fn anticommutator(&self, other: &Matrix) -> Self {
        &(self * other) + &(other * self)
    }

    /// A rho A†
    pub fn conjugate_by(&self, a: &Matrix) -> Self {
        &(a * self) * &a.adjoint()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        Matrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        Matrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix { dim: self.dim, data: self.data.iter().map(|a| -a).collect() }
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        Matrix::from_fn(d, |i, j| (0..d).map(|k| self[(i, k)] * rhs[(k, j)]).sum())
    }
}

/// Pauli and ladder operators in the convention sigma_z|0> = |0>,
/// sigma_+ = |1><0|.
pub mod pauli {
    use super::*;

    pub fn sigma_x() -> Matrix {
        Matrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn sigma_y() -> Matrix {
        Matrix::from_rows(&[&[ZERO, -I], &[I, ZERO]])
    }

    pub fn sigma_z() -> Matrix {
        Matrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    /// |1><0|
    pub fn sigma_plus() -> Matrix {
        Matrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]])
    }

    /// |0><1|
    pub fn sigma_minus() -> Matrix {
        Matrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
    }
}

// ---------------------------------------------------------------------------
// Pure states
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Amplitudes,
}

impl PureState {
    /// Validates normalization against the default policy.
    pub fn new(amplitudes: &[C64]) -> Result<Self, LinalgError> {
        let state = Self { amplitudes: amplitudes.iter().copied().collect() };
        if !state.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let norm = state.norm();
        if (norm - 1.0).abs() > NumericPolicy::default().normalization {
            return Err(LinalgError::NormalizationError { norm });
        }
        Ok(state)
    }

    /// Normalizes arbitrary amplitudes.
    pub fn normalized(amplitudes: &[C64]) -> Result<Self, LinalgError> {
        let mut state = Self { amplitudes: amplitudes.iter().copied().collect() };
        state.normalize()?;
        Ok(state)
    }

    pub(crate) fn from_amplitudes_unchecked(amplitudes: Amplitudes) -> Self {
        Self { amplitudes }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes: Amplitudes = SmallVec::from_elem(ZERO, dim);
        amplitudes[index] = ONE;
        Self { amplitudes }
    }

    /// (|0> + |1>)/sqrt(2)
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amplitudes: SmallVec::from_slice(&[C64::new(h, 0.0), C64::new(h, 0.0)]) }
    }

    /// (|0> - |1>)/sqrt(2)
    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amplitudes: SmallVec::from_slice(&[C64::new(h, 0.0), C64::new(-h, 0.0)]) }
    }

    /// cos(theta)|0> + e^{i phi} sin(theta)|1>
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            amplitudes: SmallVec::from_slice(&[
                C64::new(theta.cos(), 0.0),
                C64::from_polar(theta.sin(), phi),
            ]),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<(), LinalgError> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(LinalgError::ZeroVector);
        }
        for a in self.amplitudes.iter_mut() {
            *a /= norm;
        }
        Ok(())
    }

    /// Multiplies by a global phase so that the first nonzero amplitude is
    /// real and nonnegative.
    pub fn fix_gauge(&mut self) {
        fix_gauge(&mut self.amplitudes);
    }

    pub fn gauge_fixed(mut self) -> Self {
        self.fix_gauge();
        self
    }

    /// <self|other>
    pub fn inner(&self, other: &PureState) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// |<self|other>|^2
    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn apply(&self, op: &Matrix) -> Amplitudes {
        op.mul_vec(&self.amplitudes)
    }

    pub fn expectation(&self, op: &Matrix) -> C64 {
        op.sandwich(&self.amplitudes, &self.amplitudes)
    }

    /// Bloch vector of the projector; qubits only.
    pub fn bloch(&self) -> Result<BlochVector, LinalgError> {
        if self.dim() != 2 {
            return Err(LinalgError::DimensionError { expected: 2, found: self.dim() });
        }
        let (a, b) = (self.amplitudes[0], self.amplitudes[1]);
        let off = a * b.conj();
        Ok(BlochVector { x: 2.0 * off.re, y: -2.0 * off.im, z: a.norm_sqr() - b.norm_sqr() })
    }

    /// Orthogonal complement of a qubit state, (-conj(b), conj(a)).
    pub fn qubit_orthogonal(&self) -> PureState {
        debug_assert_eq!(self.dim(), 2);
        let (a, b) = (self.amplitudes[0], self.amplitudes[1]);
        PureState { amplitudes: SmallVec::from_slice(&[-b.conj(), a.conj()]) }
    }
}

pub(crate) fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub(crate) fn vec_norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

pub(crate) fn fix_gauge(amps: &mut [C64]) {
    let scale = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    let Some(lead) = amps.iter().find(|a| a.norm() > 1e-14 * scale).copied() else {
        return;
    };
    let phase = lead.conj() / lead.norm();
    for a in amps.iter_mut() {
        *a *= phase;
    }
    // The leading amplitude is exactly real afterwards.
    if let Some(first) = amps.iter_mut().find(|a| a.norm() > 1e-14 * scale) {
        first.im = 0.0;
    }
}

/// Lexicographic order on gauge-fixed vectors: larger real parts first, then
/// larger imaginary parts, component by component.
fn lexicographic_desc(u: &[C64], v: &[C64]) -> Ordering {
    for (a, b) in u.iter().zip(v) {
        match b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

// ---------------------------------------------------------------------------
// Operator newtypes
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(Matrix);

impl HermitianOperator {
    pub fn new(matrix: Matrix) -> Result<Self, LinalgError> {
        Self::with_tolerance(matrix, NumericPolicy::default().hermitian)
    }

    pub fn with_tolerance(matrix: Matrix, tol: f64) -> Result<Self, LinalgError> {
        let deviation = matrix.hermiticity_defect();
        if !matrix.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        if deviation > tol {
            return Err(LinalgError::NonHermitianInput { deviation });
        }
        Ok(Self(matrix))
    }

    /// Takes the Hermitian part without checking.
    pub fn symmetrized(matrix: &Matrix) -> Self {
        Self(matrix.hermitian_part())
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn eigen(&self) -> Vec<EigenPair> {
        eigh_unchecked(&self.0)
    }

    /// Largest |eigenvalue|.
    pub fn spectral_norm(&self) -> f64 {
        self.eigen().iter().map(|p| p.value.abs()).fold(0.0, f64::max)
    }
}

/// General square operator; K(t), C(t) and friends.
#[derive(Clone, Debug, PartialEq)]
pub struct NonHermitianOperator(pub Matrix);

impl NonHermitianOperator {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// (A + A†)/2
    pub fn hermitian_part(&self) -> Matrix {
        self.0.hermitian_part()
    }

    /// (A - A†)/2
    pub fn anti_hermitian_part(&self) -> Matrix {
        Matrix::from_fn(self.0.dim(), |i, j| (self.0[(i, j)] - self.0[(j, i)].conj()) * 0.5)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix);

impl DensityMatrix {
    pub fn new(matrix: Matrix) -> Result<Self, LinalgError> {
        Self::with_policy(matrix, &NumericPolicy::default())
    }

    pub fn with_policy(matrix: Matrix, tol: &NumericPolicy) -> Result<Self, LinalgError> {
        let h = HermitianOperator::with_tolerance(matrix, tol.hermitian)?;
        let tr = h.matrix().trace().re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(LinalgError::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = h.eigen().last().map(|p| p.value).unwrap_or(0.0);
        if min < -tol.min_eigenvalue {
            return Err(LinalgError::InvalidDensityMatrix(format!("minimal eigenvalue {min:e}")));
        }
        Ok(Self(h.0))
    }

    pub(crate) fn from_matrix_unchecked(matrix: Matrix) -> Self {
        Self(matrix)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(Matrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn to_bloch(&self) -> Result<BlochVector, LinalgError> {
        if self.dim() != 2 {
            return Err(LinalgError::DimensionError { expected: 2, found: self.dim() });
        }
        let m = &self.0;
        Ok(BlochVector {
            x: 2.0 * m[(0, 1)].re,
            y: -2.0 * m[(0, 1)].im,
            z: (m[(0, 0)] - m[(1, 1)]).re,
        })
    }

    pub fn from_bloch(r: &BlochVector) -> Self {
        let half = 0.5;
        Self(Matrix::from_rows(&[
            &[C64::new(half * (1.0 + r.z), 0.0), C64::new(half * r.x, -half * r.y)],
            &[C64::new(half * r.x, half * r.y), C64::new(half * (1.0 - r.z), 0.0)],
        ]))
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

/// Bloch vector (x, y, z) of a qubit density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// The pure state pointing along this (unit) direction.
    pub fn to_pure_state(&self) -> PureState {
        let n = self.norm();
        let z = if n > 0.0 { (self.z / n).clamp(-1.0, 1.0) } else { 1.0 };
        let theta = 0.5 * z.acos();
        let phi = self.y.atan2(self.x);
        PureState::from_angles(theta, phi)
    }
}

/// P_psi = |psi><psi|.
pub fn projector(psi: &PureState) -> Result<DensityMatrix, LinalgError> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > NumericPolicy::default().normalization {
        return Err(LinalgError::NormalizationError { norm });
    }
    Ok(DensityMatrix(Matrix::outer(psi.amplitudes(), psi.amplitudes())))
}

// ---------------------------------------------------------------------------
// Eigendecomposition
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: PureState,
}

/// Eigenpairs of a Hermitian matrix sorted by descending eigenvalue.
///
/// Qubits use the closed form; larger dimensions go through nalgebra's
/// Hermitian solver. Eigenvectors are gauge fixed and degenerate pairs are
/// ordered lexicographically, so the output is a deterministic function of
/// the input bits.
pub fn hermitian_eigendecomposition(a: &HermitianOperator) -> Vec<EigenPair> {
    eigh_unchecked(a.matrix())
}

/// Same as [`hermitian_eigendecomposition`] but validates Hermiticity first.
pub fn try_hermitian_eigendecomposition(a: &Matrix) -> Result<Vec<EigenPair>, LinalgError> {
    let h = HermitianOperator::new(a.clone())?;
    Ok(hermitian_eigendecomposition(&h))
}

pub(crate) fn eigh_unchecked(a: &Matrix) -> Vec<EigenPair> {
    match a.dim() {
        0 => Vec::new(),
        1 => vec![EigenPair { value: a[(0, 0)].re, vector: PureState::basis(1, 0) }],
        2 => eigh_2x2(a),
        _ => eigh_general(a),
    }
}

fn eigh_2x2(m: &Matrix) -> Vec<EigenPair> {
    let a = m[(0, 0)].re;
    let c = m[(1, 1)].re;
    // average of the two off-diagonal estimates keeps roundoff symmetric
    let b = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let radius = half_diff.hypot(b.norm());
    let scale = a.abs().max(c.abs()).max(b.norm()).max(f64::MIN_POSITIVE);
    if radius <= NumericPolicy::default().degeneracy * scale {
        return vec![
            EigenPair { value: mean, vector: PureState::basis(2, 0) },
            EigenPair { value: mean, vector: PureState::basis(2, 1) },
        ];
    }
    let hi = mean + radius;
    let lo = mean - radius;
    // Two algebraically equivalent null vectors of (A - hi); take the one
    // with less cancellation.
    let mut top: Amplitudes = if half_diff >= 0.0 {
        SmallVec::from_slice(&[C64::new(radius + half_diff, 0.0), b.conj()])
    } else {
        SmallVec::from_slice(&[b, C64::new(radius - half_diff, 0.0)])
    };
    let n = vec_norm_sqr(&top).sqrt();
    for x in top.iter_mut() {
        *x /= n;
    }
    let mut bottom: Amplitudes = SmallVec::from_slice(&[-top[1].conj(), top[0].conj()]);
    fix_gauge(&mut top);
    fix_gauge(&mut bottom);
    vec![
        EigenPair { value: hi, vector: PureState::from_amplitudes_unchecked(top) },
        EigenPair { value: lo, vector: PureState::from_amplitudes_unchecked(bottom) },
    ]
}

fn eigh_general(m: &Matrix) -> Vec<EigenPair> {
    let d = m.dim();
    let h = m.hermitian_part();
    let dm = nalgebra::DMatrix::<C64>::from_fn(d, d, |i, j| h[(i, j)]);
    let eig = nalgebra::SymmetricEigen::new(dm);
    let mut pairs: Vec<EigenPair> = (0..d)
        .map(|k| {
            let mut v: Amplitudes = eig.eigenvectors.column(k).iter().copied().collect();
            let n = vec_norm_sqr(&v).sqrt();
            for x in v.iter_mut() {
                *x /= n;
            }
            fix_gauge(&mut v);
            EigenPair { value: eig.eigenvalues[k], vector: PureState::from_amplitudes_unchecked(v) }
        })
        .collect();
    sort_pairs(&mut pairs);
    pairs
}

fn sort_pairs(pairs: &mut [EigenPair]) {
    let scale = pairs.iter().map(|p| p.value.abs()).fold(f64::MIN_POSITIVE, f64::max);
    let tie = NumericPolicy::default().degeneracy.max(1e-12) * scale;
    pairs.sort_by(|p, q| {
        if (p.value - q.value).abs() <= tie {
            lexicographic_desc(p.vector.amplitudes(), q.vector.amplitudes())
        } else {
            q.value.total_cmp(&p.value)
        }
    });
}

/// Orthonormal basis of the complement of `psi` (Gram-Schmidt against the
/// computational basis).
pub fn orthogonal_complement(psi: &PureState) -> Vec<PureState> {
    let d = psi.dim();
    if d == 2 {
        return vec![psi.qubit_orthogonal().gauge_fixed()];
    }
    let mut basis: Vec<Amplitudes> = vec![psi.amplitudes().iter().copied().collect()];
    for k in 0..d {
        let mut v: Amplitudes = SmallVec::from_elem(ZERO, d);
        v[k] = ONE;
        for u in &basis {
            let c = inner(u, &v);
            for (x, y) in v.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
        let n = vec_norm_sqr(&v).sqrt();
        if n > 1e-8 {
            for x in v.iter_mut() {
                *x /= n;
            }
            basis.push(v);
        }
        if basis.len() == d {
            break;
        }
    }
    basis
        .into_iter()
        .skip(1)
        .map(|mut v| {
            fix_gauge(&mut v);
            PureState::from_amplitudes_unchecked(v)
        })
        .collect()
}

/// Eigenpairs of Q A Q restricted to span(basis), mapped back to the full
/// space. `basis` must be orthonormal.
pub fn restricted_eigen(a: &Matrix, basis: &[PureState]) -> Vec<EigenPair> {
    let k = basis.len();
    if k == 1 {
        let v = &basis[0];
        return vec![EigenPair { value: a.sandwich(v.amplitudes(), v.amplitudes()).re, vector: v.clone() }];
    }
    let sub = Matrix::from_fn(k, |i, j| a.sandwich(basis[i].amplitudes(), basis[j].amplitudes()));
    let mut pairs: Vec<EigenPair> = eigh_unchecked(&sub)
        .into_iter()
        .map(|p| {
            let d = basis[0].dim();
            let mut v: Amplitudes = SmallVec::from_elem(ZERO, d);
            for (coef, b) in p.vector.amplitudes().iter().zip(basis) {
                for (x, y) in v.iter_mut().zip(b.amplitudes()) {
                    *x += coef * y;
                }
            }
            fix_gauge(&mut v);
            EigenPair { value: p.value, vector: PureState::from_amplitudes_unchecked(v) }
        })
        .collect();
    sort_pairs(&mut pairs);
    pairs
}
