//! Operator models: a free Hamiltonian `H0` known through its sandwiched
//! resolvent `T(z) = G(H0 − z)⁻¹G†`, a factored perturbation `G†JG`, and
//! boundary values of `T` on the real axis.

mod dense;
mod lattice;
mod moebius;

pub use dense::DenseModel;
pub use lattice::{lattice_green, zeta, HalfLineModel};
pub use moebius::{pushforward, MoebiusMap, PushedModel};

use thiserror::Error;

use crate::linalg::{
    self, anti_hermitian_part, max_abs, min_singular_value, CMatrix, HermitianMatrix, LinalgError,
    UnitaryMatrix, C64,
};

/// Relative threshold below which `J⁻¹ + T` counts as singular.
pub const DEFAULT_INV_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("J is not invertible: smallest |eigenvalue| {min_abs:e}")]
    SingularJ { min_abs: f64 },
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("z = {z} is on the real axis")]
    RealArgument { z: C64 },
    #[error("boundary value undefined at λ = {lambda}: {reason}")]
    BoundaryUndefined { lambda: f64, reason: String },
    #[error("λ = {lambda} is a threshold of the lattice spectrum")]
    BranchAtThreshold { lambda: f64 },
    #[error("resolvent identity residual {residual:e}")]
    ResolventIdentityViolation { residual: f64 },
    #[error("Green's function recurrence residual {residual:e}")]
    RecurrenceViolation { residual: f64 },
    #[error("z = {z} is within 1e-12 of an eigenvalue")]
    PoleHit { z: C64 },
    #[error("J⁻¹ + T is not invertible at {at}: smallest singular value {min_singular:e}")]
    NonInvertibleSymbol { at: C64, min_singular: f64 },
    #[error("transformation not admissible: {0}")]
    AdmissibilityViolation(String),
    #[error("pushforward identity residual {residual:e}")]
    PushforwardIdentityViolation { residual: f64 },
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Where the spectrum of `H0` lives.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumInfo {
    /// Eigenvalues of a finite matrix.
    Points(Vec<f64>),
    /// A band of absolutely continuous spectrum.
    Interval(f64, f64),
}

impl SpectrumInfo {
    pub fn hull(&self) -> (f64, f64) {
        match self {
            SpectrumInfo::Points(p) => (
                p.iter().copied().fold(f64::INFINITY, f64::min),
                p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            SpectrumInfo::Interval(a, b) => (*a, *b),
        }
    }
}

/// Provider of the sandwiched resolvent and its boundary values.
///
/// The general weighted form `G(|H0|+I)^{-1/2} · (|H0|+I)(H0−z)⁻¹ · (|H0|+I)^{-1/2}G†`
/// collapses to `G(H0 − z)⁻¹G†` for bounded `H0`, which is all we ship.
pub trait ResolventModel: Send + Sync {
    fn rank(&self) -> usize;
    fn j(&self) -> &HermitianMatrix;
    fn j_inv(&self) -> &HermitianMatrix;
    /// `T(z)` for `Im z ≠ 0`.
    fn t_at(&self, z: C64) -> Result<CMatrix>;
    /// `T(λ + i0)`.
    fn boundary_t(&self, lambda: f64) -> Result<CMatrix>;
    fn spectrum_info(&self) -> SpectrumInfo;
    /// Rough operator scale `‖H0‖ + ‖G†JG‖`, used to size search windows.
    fn scale(&self) -> f64;
    fn as_dense(&self) -> Option<&DenseModel> {
        None
    }
}

/// Boundary data `A = Re T(λ+i0)`, `B = Im T(λ+i0)` together with `J⁻¹`.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub a: HermitianMatrix,
    pub b: HermitianMatrix,
    pub j_inv: HermitianMatrix,
}

impl BoundaryData {
    /// Splits `T` into real and imaginary parts; `B` is clipped to be positive
    /// semidefinite after checking that it is so within `1e-10`.
    pub fn from_t(t: &CMatrix, j_inv: &HermitianMatrix) -> Result<Self> {
        let a = HermitianMatrix::from_hermitian_part(t);
        let b = HermitianMatrix::from_hermitian_part(&anti_hermitian_part(t));
        let b = clip_psd(&b, 1e-10 * max_abs(t).max(1.0))?;
        Ok(Self {
            a,
            b,
            j_inv: j_inv.clone(),
        })
    }

    pub fn rank(&self) -> usize {
        self.j_inv.dim()
    }

    /// `J⁻¹ + A + iB`.
    pub fn symbol(&self) -> CMatrix {
        self.j_inv.entries() + self.a.entries() + self.b.entries() * C64::new(0.0, 1.0)
    }

    /// `J⁻¹ + A + tB`.
    pub fn pencil(&self, t: f64) -> HermitianMatrix {
        self.j_inv.add(&self.a).add_scaled(t, &self.b)
    }

    pub fn is_gap(&self) -> bool {
        max_abs(self.b.entries()) == 0.0
    }

    /// `S = I − 2i B^{1/2}(J⁻¹ + A + iB)⁻¹B^{1/2}`.
    pub fn scattering(&self, at: C64, inv_tol: f64) -> Result<UnitaryMatrix> {
        let r = self.rank();
        if self.is_gap() {
            return Ok(UnitaryMatrix::identity(r));
        }
        let symbol = self.symbol();
        let min_singular = min_singular_value(&symbol);
        if min_singular <= inv_tol * max_abs(&symbol).max(1.0) {
            return Err(ModelError::NonInvertibleSymbol { at, min_singular });
        }
        let inv = linalg::inverse(&symbol)?;
        let root = linalg::psd_sqrt(&self.b, f64::INFINITY)?;
        let s =
            CMatrix::identity(r, r) - root.entries() * inv * root.entries() * C64::new(0.0, 2.0);
        Ok(UnitaryMatrix::new(s)?)
    }
}

fn clip_psd(b: &HermitianMatrix, tol: f64) -> Result<HermitianMatrix> {
    let eig = b.eig();
    if eig.values.iter().all(|&x| x >= 0.0) {
        return Ok(b.clone());
    }
    if eig.values[0] < -tol {
        return Err(LinalgError::NotPositiveSemidefinite {
            min_eigenvalue: eig.values[0],
        }
        .into());
    }
    if eig.values.iter().all(|&x| x.abs() <= tol) {
        return Ok(HermitianMatrix::zeros(b.dim()));
    }
    Ok(linalg::apply_scalar_function(b, |x| x.max(0.0))?)
}

pub fn boundary_data<M: ResolventModel + ?Sized>(model: &M, lambda: f64) -> Result<BoundaryData> {
    BoundaryData::from_t(&model.boundary_t(lambda)?, model.j_inv())
}

/// Data `(A(z), B(z), J⁻¹)` at a point of the upper half-plane.
pub fn data_at<M: ResolventModel + ?Sized>(model: &M, z: C64) -> Result<BoundaryData> {
    if z.im <= 0.0 {
        return Err(ModelError::RealArgument { z });
    }
    BoundaryData::from_t(&model.t_at(z)?, model.j_inv())
}

/// `S(z)` for `Im z > 0`.
pub fn s_of_z<M: ResolventModel + ?Sized>(model: &M, z: C64) -> Result<UnitaryMatrix> {
    data_at(model, z)?.scattering(z, DEFAULT_INV_TOL)
}

/// `S(λ + i0)`.
pub fn s_at_boundary<M: ResolventModel + ?Sized>(model: &M, lambda: f64) -> Result<UnitaryMatrix> {
    boundary_data(model, lambda)?.scattering(C64::new(lambda, 0.0), DEFAULT_INV_TOL)
}

/// Validates `J` and returns `J⁻¹`.
pub(crate) fn invert_j(j: &HermitianMatrix, j_inv_tol: f64) -> Result<HermitianMatrix> {
    let eig = j.eig();
    let min_abs = eig
        .values
        .iter()
        .map(|x| x.abs())
        .fold(f64::INFINITY, f64::min);
    if min_abs <= j_inv_tol {
        return Err(ModelError::SingularJ { min_abs });
    }
    Ok(linalg::apply_scalar_function(j, |x| 1.0 / x)?)
}

/// Any of the shipped models.
#[derive(Clone, Debug)]
pub enum Model {
    Dense(DenseModel),
    HalfLine(HalfLineModel),
    Pushed(PushedModel),
}

impl Model {
    fn inner(&self) -> &dyn ResolventModel {
        match self {
            Model::Dense(m) => m,
            Model::HalfLine(m) => m,
            Model::Pushed(m) => m,
        }
    }
}

impl ResolventModel for Model {
    fn rank(&self) -> usize {
        self.inner().rank()
    }
    fn j(&self) -> &HermitianMatrix {
        self.inner().j()
    }
    fn j_inv(&self) -> &HermitianMatrix {
        self.inner().j_inv()
    }
    fn t_at(&self, z: C64) -> Result<CMatrix> {
        self.inner().t_at(z)
    }
    fn boundary_t(&self, lambda: f64) -> Result<CMatrix> {
        self.inner().boundary_t(lambda)
    }
    fn spectrum_info(&self) -> SpectrumInfo {
        self.inner().spectrum_info()
    }
    fn scale(&self) -> f64 {
        self.inner().scale()
    }
    fn as_dense(&self) -> Option<&DenseModel> {
        match self {
            Model::Dense(m) => Some(m),
            _ => None,
        }
    }
}

impl From<DenseModel> for Model {
    fn from(m: DenseModel) -> Self {
        Model::Dense(m)
    }
}

impl From<HalfLineModel> for Model {
    fn from(m: HalfLineModel) -> Self {
        Model::HalfLine(m)
    }
}

impl From<PushedModel> for Model {
    fn from(m: PushedModel) -> Self {
        Model::Pushed(m)
    }
}

/// Largest deviation from the Herglotz symmetry `T(z̄) = T(z)†`.
pub fn herglotz_symmetry_defect<M: ResolventModel + ?Sized>(model: &M, z: C64) -> Result<f64> {
    let t = model.t_at(z)?;
    let t_conj = model.t_at(z.conj())?;
    Ok(max_abs(&(t_conj - t.adjoint())))
}
