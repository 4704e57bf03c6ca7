use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{invert_j, ModelError, ResolventModel, Result, SpectrumInfo};
use crate::linalg::{
    self, apply_complex_function, max_abs, op_norm, CMatrix, HermitianMatrix, LinalgError,
    UnitaryMatrix, C64,
};

const RESOLVENT_IDENTITY_TOL: f64 = 1e-9;
const POLE_TOL: f64 = 1e-12;

/// Finite-dimensional model `H = H0 + G†JG` with `G` an `r×n` matrix.
#[derive(Clone, Debug)]
pub struct DenseModel {
    h0: HermitianMatrix,
    g: CMatrix,
    j: HermitianMatrix,
    j_inv: HermitianMatrix,
    h: HermitianMatrix,
    h0_eigenvalues: Vec<f64>,
    h_eigenvalues: Vec<f64>,
}

impl DenseModel {
    pub fn new(h0: HermitianMatrix, g: CMatrix, j: HermitianMatrix) -> Result<Self> {
        Self::with_j_tolerance(h0, g, j, 1e-10)
    }

    pub fn with_j_tolerance(
        h0: HermitianMatrix,
        g: CMatrix,
        j: HermitianMatrix,
        j_inv_tol: f64,
    ) -> Result<Self> {
        if g.ncols() != h0.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: h0.dim(),
                found: g.ncols(),
            }
            .into());
        }
        if g.nrows() != j.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: j.dim(),
                found: g.nrows(),
            }
            .into());
        }
        let j_inv = invert_j(&j, j_inv_tol)?;
        let h = build_h(&h0, &g, &j);
        let model = Self {
            h0_eigenvalues: h0.eigenvalues(),
            h_eigenvalues: h.eigenvalues(),
            h0,
            g,
            j,
            j_inv,
            h,
        };
        model.verify_resolvent_identity()?;
        Ok(model)
    }

    /// Model given directly by `H0` and `V = G†JG` in factored form, with `G = I`.
    pub fn from_full_perturbation(h0: HermitianMatrix, j: HermitianMatrix) -> Result<Self> {
        let n = h0.dim();
        Self::new(h0, CMatrix::identity(n, n), j)
    }

    pub fn h0(&self) -> &HermitianMatrix {
        &self.h0
    }

    pub fn h(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn h0_eigenvalues(&self) -> &[f64] {
        &self.h0_eigenvalues
    }

    pub fn h_eigenvalues(&self) -> &[f64] {
        &self.h_eigenvalues
    }

    /// `(H0 − z)⁻¹` by LU.
    pub fn free_resolvent(&self, z: C64) -> Result<CMatrix> {
        Ok(linalg::inverse(&shifted(self.h0.entries(), z))?)
    }

    /// `(H − z)⁻¹` by LU.
    pub fn resolvent(&self, z: C64) -> Result<CMatrix> {
        Ok(linalg::inverse(&shifted(self.h.entries(), z))?)
    }

    /// `‖(H−z)⁻¹ − (H0−z)⁻¹ + (G(H0−z̄)⁻¹)†(J⁻¹+T(z))⁻¹G(H0−z)⁻¹‖_max`.
    pub fn resolvent_identity_residual(&self, z: C64) -> Result<f64> {
        let r0 = self.free_resolvent(z)?;
        let r0_bar = self.free_resolvent(z.conj())?;
        let r = self.resolvent(z)?;
        let t = &self.g * &r0 * self.g.adjoint();
        let middle = linalg::inverse(&(self.j_inv.entries() + t))?;
        let correction = (&self.g * r0_bar).adjoint() * middle * (&self.g * &r0);
        Ok(max_abs(&(r - r0 + correction)))
    }

    fn verify_resolvent_identity(&self) -> Result<()> {
        let (lo, hi) = self.spectral_hull();
        let width = (hi - lo).max(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0x005e_edb8);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let re = rng.gen_range(lo - 0.5 * width..hi + 0.5 * width);
            let im = rng.gen_range(0.1..2.0) * width * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            worst = worst.max(self.resolvent_identity_residual(C64::new(re, im))?);
        }
        if !(worst < RESOLVENT_IDENTITY_TOL) {
            return Err(ModelError::ResolventIdentityViolation { residual: worst });
        }
        Ok(())
    }

    /// Smallest interval containing the spectra of `H0` and `H`.
    pub fn spectral_hull(&self) -> (f64, f64) {
        let lo = self.h0_eigenvalues[0].min(self.h_eigenvalues[0]);
        let hi = self.h0_eigenvalues[self.dim() - 1].max(self.h_eigenvalues[self.dim() - 1]);
        (lo, hi)
    }

    fn check_pole(&self, z: C64) -> Result<()> {
        let hit = self
            .h0_eigenvalues
            .iter()
            .chain(&self.h_eigenvalues)
            .any(|&x| (C64::new(x, 0.0) - z).norm() < POLE_TOL);
        if hit {
            return Err(ModelError::PoleHit { z });
        }
        Ok(())
    }

    /// `M(z) = (H − z̄)(H − z)⁻¹ (H0 − z)(H0 − z̄)⁻¹` by functional calculus.
    pub fn m_of_z(&self, z: C64) -> Result<UnitaryMatrix> {
        self.check_pole(z)?;
        let zb = z.conj();
        let left = apply_complex_function(&self.h, |x| (x - zb) / (x - z))?;
        let right = apply_complex_function(&self.h0, |x| (x - z) / (x - zb))?;
        Ok(UnitaryMatrix::with_tolerance(left * right, 1e-9)?)
    }

    /// `M(z)` through the factorization
    /// `I − (z − z̄)(G(H0−z̄)⁻¹)†(J⁻¹+T(z))⁻¹G(H0−z)⁻¹(I − (z − z̄)(H0−z̄)⁻¹)`.
    pub fn m_of_z_factored(&self, z: C64) -> Result<CMatrix> {
        self.check_pole(z)?;
        let n = self.dim();
        let dz = z - z.conj();
        let r0 = self.free_resolvent(z)?;
        let r0_bar = self.free_resolvent(z.conj())?;
        let t = &self.g * &r0 * self.g.adjoint();
        let middle = linalg::inverse(&(self.j_inv.entries() + t))?;
        let outer = CMatrix::identity(n, n) - &r0_bar * dz;
        Ok(CMatrix::identity(n, n)
            - (&self.g * r0_bar).adjoint() * middle * (&self.g * r0) * outer * dz)
    }
}

fn shifted(m: &CMatrix, z: C64) -> CMatrix {
    let n = m.nrows();
    m - CMatrix::identity(n, n) * z
}

/// `H = H0 + G†JG`.
pub fn build_h(h0: &HermitianMatrix, g: &CMatrix, j: &HermitianMatrix) -> HermitianMatrix {
    let v = g.adjoint() * j.entries() * g;
    HermitianMatrix::from_hermitian_part(&(h0.entries() + v))
}

impl ResolventModel for DenseModel {
    fn rank(&self) -> usize {
        self.j.dim()
    }

    fn j(&self) -> &HermitianMatrix {
        &self.j
    }

    fn j_inv(&self) -> &HermitianMatrix {
        &self.j_inv
    }

    fn t_at(&self, z: C64) -> Result<CMatrix> {
        if z.im == 0.0 {
            return Err(ModelError::RealArgument { z });
        }
        let shifted = shifted(self.h0.entries(), z);
        let solved = shifted
            .lu()
            .solve(&self.g.adjoint())
            .ok_or(LinalgError::SingularMatrix { min_abs: 0.0 })?;
        Ok(&self.g * solved)
    }

    fn boundary_t(&self, lambda: f64) -> Result<CMatrix> {
        let scale = self.scale();
        if let Some(&x) = self
            .h0_eigenvalues
            .iter()
            .find(|&&x| (x - lambda).abs() <= 1e-9 * scale)
        {
            return Err(ModelError::BoundaryUndefined {
                lambda,
                reason: format!("eigenvalue {x} of H0"),
            });
        }
        let shifted = shifted(self.h0.entries(), C64::new(lambda, 0.0));
        let solved = shifted
            .lu()
            .solve(&self.g.adjoint())
            .ok_or(LinalgError::SingularMatrix { min_abs: 0.0 })?;
        // real resolvent off the spectrum: A = T(λ), B = 0
        Ok(linalg::hermitian_part(&(&self.g * solved)))
    }

    fn spectrum_info(&self) -> SpectrumInfo {
        SpectrumInfo::Points(self.h0_eigenvalues.clone())
    }

    fn scale(&self) -> f64 {
        let h0 = self
            .h0_eigenvalues
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        1.0 + h0 + op_norm(&self.g).powi(2) * op_norm(self.j.entries())
    }

    fn as_dense(&self) -> Option<&DenseModel> {
        Some(self)
    }
}

impl PartialEq for DenseModel {
    fn eq(&self, other: &Self) -> bool {
        self.h0 == other.h0 && self.g == other.g && self.j == other.j
    }
}
