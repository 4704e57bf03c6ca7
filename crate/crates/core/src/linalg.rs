//! Dense complex linear algebra kernels.
//!
//! Everything here works on small dense matrices (`n` up to a few dozen).
//! Hermitian eigenproblems go through nalgebra's symmetric eigensolver; all
//! the spectral constructions used by the rest of the crate (eigenphases of
//! unitaries, spectral projections, Fredholm-pair indices, pencil zeros) are
//! built on top of it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Clustering tolerance for the real-part eigenvalues when diagonalizing a
/// unitary matrix.
const UNITARY_CLUSTER_TOL: f64 = 1e-8;

pub const DEFAULT_HERM_TOL: f64 = 1e-10;
pub const DEFAULT_UNIT_TOL: f64 = 1e-8;
pub const DEFAULT_PROJ_TOL: f64 = 1e-9;
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;
pub const DEFAULT_ONE_TOL: f64 = 1e-6;
pub const DEFAULT_ID_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("empty matrix")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian: defect {defect:e} exceeds {tol:e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("matrix is not unitary: defect {defect:e} exceeds {tol:e}")]
    NotUnitary { defect: f64, tol: f64 },
    #[error("matrix is not an orthogonal projection: defect {defect:e} exceeds {tol:e}")]
    NotProjection { defect: f64, tol: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("eigenvalues within {tol:e} of zero: {eigenvalues:?}")]
    KernelAtZero { eigenvalues: Vec<f64>, tol: f64 },
    #[error("singular matrix: smallest |eigenvalue| {min_abs:e}")]
    SingularMatrix { min_abs: f64 },
    #[error("Fredholm index mismatch: kernel count {kernel_count} vs trace {trace}")]
    IndexMismatch { kernel_count: i64, trace: f64 },
    #[error("function undefined at eigenvalue {at}")]
    DomainViolation { at: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(LinalgError::Empty);
    }
    Ok(m.nrows())
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `(M − M†)/(2i)`, the Hermitian "imaginary part" of a square matrix.
pub fn anti_hermitian_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * C64::new(0.0, -0.5)
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Smallest singular value of a square matrix.
pub fn min_singular_value(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Inverse through LU with partial pivoting.
pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    check_square(m)?;
    m.clone()
        .lu()
        .try_inverse()
        .ok_or(LinalgError::SingularMatrix { min_abs: 0.0 })
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Solves a tridiagonal system by forward elimination and back substitution
/// (no pivoting). `sub[i]` couples rows `i+1` and `i`, `sup[i]` rows `i` and `i+1`.
pub fn solve_tridiagonal(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = diag.len();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = diag[i] - sub[i - 1] * c[i - 1];
        }
        if pivot.norm() == 0.0 {
            return Err(LinalgError::SingularMatrix { min_abs: 0.0 });
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = if i == 0 {
            rhs[0] / pivot
        } else {
            (rhs[i] - sub[i - 1] * d[i - 1]) / pivot
        };
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    entries: CMatrix,
    herm_tol: f64,
}

/// Eigen-decomposition of a Hermitian matrix: ascending values, orthonormal
/// eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_tolerance(entries, DEFAULT_HERM_TOL)
    }

    /// Validates `max |m_ij − conj(m_ji)| ≤ herm_tol` and stores the exact
    /// Hermitian part.
    pub fn with_tolerance(entries: CMatrix, herm_tol: f64) -> Result<Self> {
        check_square(&entries)?;
        let defect = max_abs(&(&entries - entries.adjoint()));
        if defect > herm_tol {
            return Err(LinalgError::NotHermitian {
                defect,
                tol: herm_tol,
            });
        }
        Ok(Self {
            entries: hermitian_part(&entries),
            herm_tol,
        })
    }

    /// Takes the Hermitian part of an arbitrary square matrix without checking.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        Self {
            entries: hermitian_part(m),
            herm_tol: DEFAULT_HERM_TOL,
        }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let entries = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self {
            entries,
            herm_tol: DEFAULT_HERM_TOL,
        }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = C64::new(x, 0.0);
            }
        }
        Self::new(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n),
            herm_tol: DEFAULT_HERM_TOL,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: CMatrix::zeros(n, n),
            herm_tol: DEFAULT_HERM_TOL,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }

    pub fn herm_tol(&self) -> f64 {
        self.herm_tol
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: self.entries.scale(s),
            herm_tol: self.herm_tol,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            entries: &self.entries + &other.entries,
            herm_tol: self.herm_tol,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            entries: &self.entries - &other.entries,
            herm_tol: self.herm_tol,
        }
    }

    /// `self + t·other`
    pub fn add_scaled(&self, t: f64, other: &Self) -> Self {
        Self {
            entries: &self.entries + other.entries.scale(t),
            herm_tol: self.herm_tol,
        }
    }

    pub fn trace(&self) -> f64 {
        trace(&self.entries).re
    }

    pub fn eig(&self) -> HermitianEigen {
        eig_hermitian(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_hermitian(self).values
    }
}

/// Hermitian eigen-decomposition with ascending eigenvalues.
pub fn eig_hermitian(m: &HermitianMatrix) -> HermitianEigen {
    let n = m.dim();
    let decomposition = m.entries.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomposition.eigenvalues[a].total_cmp(&decomposition.eigenvalues[b]));
    let values = order
        .iter()
        .map(|&k| decomposition.eigenvalues[k])
        .collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| decomposition.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// `V diag(d) V†` for an eigenbasis `V`.
fn reassemble(vectors: &CMatrix, diag: &[C64]) -> CMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (j, d) in diag.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= *d;
        }
    }
    scaled * vectors.adjoint()
}

/// `f(M)` for a real function on the spectrum.
pub fn apply_scalar_function(
    m: &HermitianMatrix,
    f: impl Fn(f64) -> f64,
) -> Result<HermitianMatrix> {
    let eig = m.eig();
    let mut mapped = Vec::with_capacity(eig.values.len());
    for &x in &eig.values {
        let y = f(x);
        if !y.is_finite() {
            return Err(LinalgError::DomainViolation { at: x });
        }
        mapped.push(C64::new(y, 0.0));
    }
    Ok(HermitianMatrix::from_hermitian_part(&reassemble(
        &eig.vectors,
        &mapped,
    )))
}

/// `f(M)` for a complex-valued function of a Hermitian matrix (the result is
/// normal, not Hermitian).
pub fn apply_complex_function(m: &HermitianMatrix, f: impl Fn(f64) -> C64) -> Result<CMatrix> {
    let eig = m.eig();
    let mut mapped = Vec::with_capacity(eig.values.len());
    for &x in &eig.values {
        let y = f(x);
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(LinalgError::DomainViolation { at: x });
        }
        mapped.push(y);
    }
    Ok(reassemble(&eig.vectors, &mapped))
}

/// Square root of a positive semidefinite matrix; eigenvalues down to
/// `-psd_tol` are clipped to zero.
pub fn psd_sqrt(m: &HermitianMatrix, psd_tol: f64) -> Result<HermitianMatrix> {
    let eig = m.eig();
    if let Some(&min) = eig.values.first() {
        if min < -psd_tol {
            return Err(LinalgError::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
    }
    let roots: Vec<C64> = eig
        .values
        .iter()
        .map(|&x| C64::new(x.max(0.0).sqrt(), 0.0))
        .collect();
    Ok(HermitianMatrix::from_hermitian_part(&reassemble(
        &eig.vectors,
        &roots,
    )))
}

/// Determinant by LU elimination with partial pivoting.
pub fn det_complex(m: &CMatrix) -> C64 {
    assert_eq!(m.nrows(), m.ncols(), "determinant of a non-square matrix");
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    entries: CMatrix,
    unit_tol: f64,
}

impl UnitaryMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_tolerance(entries, DEFAULT_UNIT_TOL)
    }

    pub fn with_tolerance(entries: CMatrix, unit_tol: f64) -> Result<Self> {
        let n = check_square(&entries)?;
        let defect = max_abs(&(&entries * entries.adjoint() - CMatrix::identity(n, n)));
        if !(defect <= unit_tol) {
            return Err(LinalgError::NotUnitary {
                defect,
                tol: unit_tol,
            });
        }
        Ok(Self { entries, unit_tol })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n),
            unit_tol: DEFAULT_UNIT_TOL,
        }
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        let n = phases.len();
        let entries = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::from_polar(1.0, phases[i])
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self {
            entries,
            unit_tol: DEFAULT_UNIT_TOL,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }

    pub fn det(&self) -> C64 {
        det_complex(&self.entries)
    }

    /// `U W U†` for a unitary `U`.
    pub fn conjugate_by(&self, u: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix {
            entries: &u.entries * &self.entries * u.entries.adjoint(),
            unit_tol: self.unit_tol,
        }
    }

    pub fn eigenphases(&self, id_tol: f64) -> Vec<f64> {
        eigenphases(self, id_tol)
    }
}

/// Maps an angle to `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = theta.rem_euclid(two_pi);
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

/// Eigenphases in `(0, 2π)` of a unitary matrix, ascending, multiplicities
/// preserved. Eigenvalues within `id_tol` of 1 are dropped.
///
/// `W` is normal, so it is diagonalized by first diagonalizing
/// `Re W = (W + W†)/2` and then `Im W` inside each eigenspace of `Re W`.
pub fn eigenphases(w: &UnitaryMatrix, id_tol: f64) -> Vec<f64> {
    let m = &w.entries;
    let re = HermitianMatrix::from_hermitian_part(m);
    let im = HermitianMatrix::from_hermitian_part(&anti_hermitian_part(m));
    let re_eig = re.eig();
    let n = m.nrows();

    let mut basis: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && re_eig.values[end] - re_eig.values[end - 1] <= UNITARY_CLUSTER_TOL {
            end += 1;
        }
        let block = re_eig.vectors.columns(start, end - start).into_owned();
        if end - start == 1 {
            basis.push(block.column(0).into_owned());
        } else {
            let compressed = block.adjoint() * im.entries() * &block;
            let inner = HermitianMatrix::from_hermitian_part(&compressed).eig();
            let rotated = &block * &inner.vectors;
            for k in 0..rotated.ncols() {
                basis.push(rotated.column(k).into_owned());
            }
        }
        start = end;
    }

    let mut phases: Vec<f64> = basis
        .iter()
        .filter_map(|v| {
            let z = (v.adjoint() * m * v)[(0, 0)];
            if (z - C64::new(1.0, 0.0)).norm() <= id_tol {
                return None;
            }
            let mut theta = wrap_phase(z.arg());
            if theta == 0.0 {
                theta = f64::MIN_POSITIVE;
            }
            Some(theta)
        })
        .collect();
    phases.sort_by(f64::total_cmp);
    phases
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    entries: CMatrix,
    proj_tol: f64,
}

impl ProjectionMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_tolerance(entries, DEFAULT_PROJ_TOL)
    }

    pub fn with_tolerance(entries: CMatrix, proj_tol: f64) -> Result<Self> {
        check_square(&entries)?;
        let idem = max_abs(&(&entries * &entries - &entries));
        let herm = max_abs(&(&entries - entries.adjoint()));
        let defect = idem.max(herm);
        if !(defect <= proj_tol) {
            return Err(LinalgError::NotProjection {
                defect,
                tol: proj_tol,
            });
        }
        Ok(Self { entries, proj_tol })
    }

    /// Orthogonal projection onto the span of the given orthonormal columns.
    pub fn onto_columns(columns: &CMatrix) -> Self {
        Self {
            entries: columns * columns.adjoint(),
            proj_tol: DEFAULT_PROJ_TOL,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: CMatrix::zeros(n, n),
            proj_tol: DEFAULT_PROJ_TOL,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn rank(&self) -> usize {
        trace(&self.entries).re.round().max(0.0) as usize
    }
}

/// Spectral projection onto the negative eigenvalues, `E_M((−∞, 0))`.
///
/// Fails with `KernelAtZero` when an eigenvalue lies in `(−zero_tol, zero_tol)`.
pub fn xi_projection(m: &HermitianMatrix, zero_tol: f64) -> Result<ProjectionMatrix> {
    let eig = m.eig();
    let near_zero: Vec<f64> = eig
        .values
        .iter()
        .copied()
        .filter(|x| x.abs() < zero_tol)
        .collect();
    if !near_zero.is_empty() {
        return Err(LinalgError::KernelAtZero {
            eigenvalues: near_zero,
            tol: zero_tol,
        });
    }
    let negative = eig.values.iter().take_while(|&&x| x < 0.0).count();
    let columns = eig.vectors.columns(0, negative).into_owned();
    Ok(ProjectionMatrix::onto_columns(&columns))
}

/// Index of a pair of projections, `dim Ker(P−Q−I) − dim Ker(P−Q+I)`.
///
/// In finite dimensions this equals `trace(P − Q)`; both are computed and
/// must agree.
pub fn fredholm_index(p: &ProjectionMatrix, q: &ProjectionMatrix, one_tol: f64) -> Result<i64> {
    if p.dim() != q.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let diff = HermitianMatrix::from_hermitian_part(&(&p.entries - &q.entries));
    let values = diff.eigenvalues();
    let plus = values
        .iter()
        .filter(|&&x| (x - 1.0).abs() <= one_tol)
        .count() as i64;
    let minus = values
        .iter()
        .filter(|&&x| (x + 1.0).abs() <= one_tol)
        .count() as i64;
    let kernel_count = plus - minus;
    let tr = diff.trace();
    if (tr - tr.round()).abs() > 1e-6 || tr.round() as i64 != kernel_count {
        return Err(LinalgError::IndexMismatch {
            kernel_count,
            trace: tr,
        });
    }
    Ok(kernel_count)
}

/// Real couplings `s ∈ (lo, hi]` with `dim Ker(M + sB) > 0`, with multiplicities.
///
/// Uses the reduced Hermitian problem on `Ran B`: `M + sB` is singular iff
/// `−1/s` is an eigenvalue of `B^{1/2} M⁻¹ B^{1/2}`, with equal multiplicity.
pub fn pencil_real_zeros(
    m: &HermitianMatrix,
    b: &HermitianMatrix,
    interval: (f64, f64),
) -> Result<Vec<(f64, usize)>> {
    if m.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.dim(),
            found: b.dim(),
        });
    }
    let scale = max_abs(m.entries()).max(max_abs(b.entries())).max(1.0);
    let eig = m.eig();
    let min_abs = eig
        .values
        .iter()
        .map(|x| x.abs())
        .fold(f64::INFINITY, f64::min);
    if min_abs <= 1e-10 * scale {
        return Err(LinalgError::SingularMatrix { min_abs });
    }
    let root_b = psd_sqrt(b, 1e-10 * scale)?;
    let inv: Vec<C64> = eig.values.iter().map(|&x| C64::new(1.0 / x, 0.0)).collect();
    let m_inv = reassemble(&eig.vectors, &inv);
    let reduced =
        HermitianMatrix::from_hermitian_part(&(root_b.entries() * m_inv * root_b.entries()));
    let kappas = reduced.eigenvalues();
    let kappa_scale = kappas.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let (lo, hi) = interval;
    let edge = 1e-12 * scale;
    let mut zeros: Vec<f64> = kappas
        .iter()
        .filter(|k| k.abs() > 1e-12 * kappa_scale)
        .map(|&k| -1.0 / k)
        .filter(|&s| s > lo + edge && s <= hi + edge)
        .collect();
    zeros.sort_by(f64::total_cmp);

    let mut grouped: Vec<(f64, usize)> = Vec::new();
    for s in zeros {
        match grouped.last_mut() {
            Some((last, count)) if (s - *last).abs() <= 1e-9 * s.abs().max(1.0) => *count += 1,
            _ => grouped.push((s, 1)),
        }
    }
    Ok(grouped)
}

/// l_p exponent for sequence and Schatten norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Norm {
    One,
    Two,
    Inf,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::One, Norm::Two, Norm::Inf];

    pub fn of<I: IntoIterator<Item = f64>>(self, values: I) -> f64 {
        let iter = values.into_iter().map(f64::abs);
        match self {
            Norm::One => iter.sum(),
            Norm::Two => iter.map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Inf => iter.fold(0.0, f64::max),
        }
    }
}

/// Schatten norm of a Hermitian matrix.
pub fn schatten_norm(m: &HermitianMatrix, p: Norm) -> f64 {
    p.of(m.eigenvalues())
}

/// Non-negative eigenvalues of `A` and of `−A`, each listed in decreasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSequencePair {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl EigenSequencePair {
    /// `‖Λ(A1) − Λ(A2)‖_p` with both sequences zero-padded to common length.
    pub fn distance(&self, other: &Self, p: Norm) -> f64 {
        let padded_diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
            let len = a.len().max(b.len());
            (0..len)
                .map(|k| a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0))
                .collect()
        };
        let mut diffs = padded_diff(&self.pos, &other.pos);
        diffs.extend(padded_diff(&self.neg, &other.neg));
        p.of(diffs)
    }
}

pub fn eigenvalue_sequences(a: &HermitianMatrix) -> EigenSequencePair {
    let values = a.eigenvalues();
    let mut pos: Vec<f64> = values.iter().copied().filter(|&x| x >= 0.0).collect();
    let mut neg: Vec<f64> = values.iter().map(|&x| -x).filter(|&x| x >= 0.0).collect();
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    EigenSequencePair { pos, neg }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eig_of_diagonal_is_sorted() {
        let m = HermitianMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]);
        assert_eq!(m.eigenvalues(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eig_of_pauli_x() {
        let m = HermitianMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let eig = m.eig();
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let v = eig.vectors.column(0);
        // (1, -1)/sqrt 2 up to a phase
        assert!((v[0] + v[1]).norm() < 1e-12);
        assert!((v[0].norm() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eig_residual_random_seed_7() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_hermitian(&mut rng, 8, 1.0);
        let eig = m.eig();
        let norm = op_norm(m.entries());
        for k in 0..8 {
            let v = eig.vectors.column(k);
            let r = m.entries() * v - v * c(eig.values[k], 0.0);
            assert!(r.norm() < 1e-8 * norm.max(1.0));
        }
        let gram = eig.vectors.adjoint() * &eig.vectors - CMatrix::identity(8, 8);
        assert!(max_abs(&gram) < 1e-8);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m =
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigenphases_identity_is_empty() {
        for n in 1..5 {
            assert!(UnitaryMatrix::identity(n)
                .eigenphases(DEFAULT_ID_TOL)
                .is_empty());
        }
    }

    #[test]
    fn eigenphases_diagonal() {
        let w = UnitaryMatrix::from_phases(&[PI / 2.0, 0.0, PI]);
        let phases = w.eigenphases(DEFAULT_ID_TOL);
        assert_eq!(phases.len(), 2);
        assert!((phases[0] - PI / 2.0).abs() < 1e-12);
        assert!((phases[1] - PI).abs() < 1e-12);
    }

    #[test]
    fn eigenphases_scalar_scattering_value() {
        // S = 1 - 2i (1 + i)^{-1} = -i
        let s = c(1.0, 0.0) - c(0.0, 2.0) / c(1.0, 1.0);
        let w = UnitaryMatrix::new(CMatrix::from_element(1, 1, s)).unwrap();
        let phases = w.eigenphases(DEFAULT_ID_TOL);
        assert_eq!(phases.len(), 1);
        assert!((phases[0] - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn eigenphases_of_conjugate_pair_cluster() {
        // e^{±iθ} share a real part; the cluster must be split by Im W.
        let w = UnitaryMatrix::from_phases(&[1.0, 2.0 * PI - 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(&mut rng, 3);
        let phases = w.conjugate_by(&u).eigenphases(DEFAULT_ID_TOL);
        assert_eq!(phases.len(), 3);
        assert!((phases[0] - 1.0).abs() < 1e-8);
        assert!((phases[1] - 1.0).abs() < 1e-8);
        assert!((phases[2] - (2.0 * PI - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn eigenphases_conjugation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..7 {
            let w = random_unitary(&mut rng, n);
            let u = random_unitary(&mut rng, n);
            let a = w.eigenphases(DEFAULT_ID_TOL);
            let b = w.conjugate_by(&u).eigenphases(DEFAULT_ID_TOL);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn rejects_non_unitary() {
        let m = CMatrix::from_element(1, 1, c(1.1, 0.0));
        assert!(matches!(
            UnitaryMatrix::new(m),
            Err(LinalgError::NotUnitary { .. })
        ));
    }

    #[test]
    fn xi_projection_cases() {
        let p = xi_projection(
            &HermitianMatrix::from_real_diagonal(&[-1.0, 2.0]),
            DEFAULT_ZERO_TOL,
        )
        .unwrap();
        let expected =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(max_abs(&(p.entries() - expected)) < 1e-14);

        let p = xi_projection(
            &HermitianMatrix::from_real_diagonal(&[1.0, 2.0]),
            DEFAULT_ZERO_TOL,
        )
        .unwrap();
        assert_eq!(p.rank(), 0);
        assert!(max_abs(p.entries()) == 0.0);

        let m = HermitianMatrix::from_real_rows(&[&[0.5, 1.0], &[1.0, 0.5]]).unwrap();
        let p = xi_projection(&m, DEFAULT_ZERO_TOL).unwrap();
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)],
        );
        assert!(max_abs(&(p.entries() - expected)) < 1e-12);
    }

    #[test]
    fn xi_projection_reports_kernel() {
        let err =
            xi_projection(&HermitianMatrix::from_real_diagonal(&[0.0, 2.0]), 1e-10).unwrap_err();
        assert!(matches!(err, LinalgError::KernelAtZero { .. }));
    }

    #[test]
    fn xi_projection_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random_hermitian(&mut rng, 5, 1.0);
            let p1 = xi_projection(&m, DEFAULT_ZERO_TOL).unwrap();
            let p2 = xi_projection(&m.scale(2.0), DEFAULT_ZERO_TOL).unwrap();
            assert!(max_abs(&(p1.entries() - p2.entries())) < 1e-10);
        }
    }

    #[test]
    fn fredholm_index_examples() {
        let d = |v: &[f64]| {
            ProjectionMatrix::new(HermitianMatrix::from_real_diagonal(v).into_inner()).unwrap()
        };
        let p = d(&[1.0, 1.0, 0.0]);
        assert_eq!(fredholm_index(&p, &p, DEFAULT_ONE_TOL).unwrap(), 0);
        assert_eq!(
            fredholm_index(&p, &d(&[1.0, 0.0, 0.0]), DEFAULT_ONE_TOL).unwrap(),
            1
        );
        assert_eq!(
            fredholm_index(&d(&[1.0, 0.0]), &d(&[0.0, 1.0]), DEFAULT_ONE_TOL).unwrap(),
            0
        );
    }

    #[test]
    fn apply_scalar_function_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_hermitian(&mut rng, 4, 1.0);
        let same = apply_scalar_function(&m, |x| x).unwrap();
        assert!(max_abs(&(same.entries() - m.entries())) < 1e-12);

        let d = HermitianMatrix::from_real_diagonal(&[0.0, 2.0]);
        let f = apply_scalar_function(&d, |x| -1.0 / (x - 3.0)).unwrap();
        assert!((f.entries()[(0, 0)].re - 1.0 / 3.0).abs() < 1e-14);
        assert!((f.entries()[(1, 1)].re - 1.0).abs() < 1e-14);
        assert!(f.entries()[(0, 1)].norm() < 1e-14);

        let err = apply_scalar_function(&d, |x| 1.0 / x).unwrap_err();
        assert_eq!(err, LinalgError::DomainViolation { at: 0.0 });
    }

    #[test]
    fn trace_of_function_difference_matches_eigenvalue_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h0 = random_hermitian(&mut rng, 6, 1.0);
        let h = h0.add(&random_hermitian(&mut rng, 6, 0.5));
        let f = |x: f64| x.sin() + x * x;
        let lhs = apply_scalar_function(&h, f).unwrap().trace()
            - apply_scalar_function(&h0, f).unwrap().trace();
        let rhs: f64 = h.eigenvalues().iter().map(|&x| f(x)).sum::<f64>()
            - h0.eigenvalues().iter().map(|&x| f(x)).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(det_complex(&CMatrix::identity(3, 3)), c(1.0, 0.0));
        let swap =
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((det_complex(&swap) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn determinant_matches_eigenvalue_product() {
        // Oracle: a normal matrix U diag(d) U† has determinant Π d.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        use rand::Rng;
        for _ in 0..10 {
            let u = random_unitary(&mut rng, 5);
            let d: Vec<C64> = (0..5)
                .map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let m = reassemble(u.entries(), &d);
            let expected: C64 = d.iter().product();
            let got = det_complex(&m);
            assert!((got - expected).norm() < 1e-8 * expected.norm());
        }
    }

    #[test]
    fn pencil_examples() {
        let m = HermitianMatrix::from_real_diagonal(&[-1.0, 1.0]);
        let zeros = pencil_real_zeros(&m, &HermitianMatrix::identity(2), (0.0, 2.0)).unwrap();
        assert_eq!(zeros.len(), 1);
        assert!((zeros[0].0 - 1.0).abs() < 1e-12);
        assert_eq!(zeros[0].1, 1);

        let zeros = pencil_real_zeros(
            &m,
            &HermitianMatrix::zeros(2),
            (f64::NEG_INFINITY, f64::INFINITY),
        )
        .unwrap();
        assert!(zeros.is_empty());

        let singular = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
        assert!(matches!(
            pencil_real_zeros(&singular, &HermitianMatrix::identity(2), (0.0, 1.0)),
            Err(LinalgError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn pencil_matches_determinant_scan() {
        use crate::random::random_psd;
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..5 {
            let m = random_hermitian(&mut rng, 4, 1.0);
            let b = random_psd(&mut rng, 4, 2);
            let zeros = pencil_real_zeros(&m, &b, (-3.0, 3.0)).unwrap();
            // det(M + sB) is real for Hermitian arguments; count sign changes on a grid
            let det_at = |s: f64| det_complex(m.add_scaled(s, &b).entries()).re;
            let step = 1e-4;
            let mut changes = Vec::new();
            let mut s = -3.0;
            let mut prev = det_at(s);
            while s < 3.0 {
                let next_s = s + step;
                let next = det_at(next_s);
                if prev.signum() != next.signum() {
                    changes.push(0.5 * (s + next_s));
                }
                prev = next;
                s = next_s;
            }
            let simple: Vec<f64> = zeros.iter().filter(|z| z.1 % 2 == 1).map(|z| z.0).collect();
            assert_eq!(simple.len(), changes.len(), "{zeros:?} vs {changes:?}");
            for (a, b) in simple.iter().zip(&changes) {
                assert!((a - b).abs() < 2.0 * step);
            }
        }
    }

    #[test]
    fn eigenvalue_sequence_examples() {
        let pair = eigenvalue_sequences(&HermitianMatrix::from_real_diagonal(&[2.0, -3.0, 1.0]));
        assert_eq!(pair.pos, vec![2.0, 1.0]);
        assert_eq!(pair.neg, vec![3.0]);
        let pair = eigenvalue_sequences(&HermitianMatrix::zeros(2));
        assert_eq!(pair.pos, vec![0.0, 0.0]);
        assert!(pair.neg.iter().all(|&x| x == 0.0));
    }
}
