use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lattice::truncated_chain_solve;
use super::{DenseModel, HalfLineModel, Model, ModelError, ResolventModel, Result, SpectrumInfo};
use crate::linalg::{
    self, apply_scalar_function, fredholm_index, max_abs, op_norm, xi_projection, CMatrix,
    HermitianMatrix, C64, DEFAULT_ONE_TOL,
};

const IDENTITY_TOL: f64 = 1e-10;
const FUNCTIONAL_CALCULUS_TOL: f64 = 1e-9;

/// Increasing Möbius maps used for the invariance principle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MoebiusMap {
    /// `f(x) = a·x + b`, `a > 0`.
    Affine { a: f64, b: f64 },
    /// `f(x) = −(x − λ0)⁻¹`.
    InverseShift { lambda0: f64 },
}

impl MoebiusMap {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            MoebiusMap::Affine { a, b } => a * x + b,
            MoebiusMap::InverseShift { lambda0 } => -1.0 / (x - lambda0),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            MoebiusMap::Affine { a, .. } => a,
            MoebiusMap::InverseShift { lambda0 } => 1.0 / ((x - lambda0) * (x - lambda0)),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            MoebiusMap::Affine { a, b } => (y - b) / a,
            MoebiusMap::InverseShift { lambda0 } => lambda0 - 1.0 / y,
        }
    }

    pub fn apply_complex(&self, z: C64) -> C64 {
        match *self {
            MoebiusMap::Affine { a, b } => z * a + b,
            MoebiusMap::InverseShift { lambda0 } => -(z - lambda0).inv(),
        }
    }

    pub fn inverse_complex(&self, w: C64) -> C64 {
        match *self {
            MoebiusMap::Affine { a, b } => (w - b) / a,
            MoebiusMap::InverseShift { lambda0 } => C64::new(lambda0, 0.0) - w.inv(),
        }
    }

    /// Image of an interval not containing the pole.
    pub fn image(&self, lo: f64, hi: f64) -> (f64, f64) {
        (self.apply(lo), self.apply(hi))
    }

    /// Whether `x` and `λ0` are separated, i.e. `f` is finite and increasing near `x`.
    pub fn is_regular_at(&self, x: f64) -> bool {
        match *self {
            MoebiusMap::Affine { a, .. } => a > 0.0,
            MoebiusMap::InverseShift { lambda0 } => x != lambda0,
        }
    }
}

/// Factored pair for `(f(H0), f(H))` expressed through the original model:
/// `T̃(w) = T(f⁻¹(w)) − C` with `C = 0` for affine maps and `C = T(λ0)`
/// for inverse shifts, and `J̃⁻¹ = J⁻¹ + C`.
#[derive(Clone, Debug)]
pub struct PushedModel {
    base: Box<Model>,
    map: MoebiusMap,
    offset: CMatrix,
    j: HermitianMatrix,
    j_inv: HermitianMatrix,
}

impl PushedModel {
    pub fn base(&self) -> &Model {
        &self.base
    }

    pub fn map(&self) -> MoebiusMap {
        self.map
    }
}

impl ResolventModel for PushedModel {
    fn rank(&self) -> usize {
        self.j.dim()
    }

    fn j(&self) -> &HermitianMatrix {
        &self.j
    }

    fn j_inv(&self) -> &HermitianMatrix {
        &self.j_inv
    }

    fn t_at(&self, w: C64) -> Result<CMatrix> {
        if w.im == 0.0 {
            return Err(ModelError::RealArgument { z: w });
        }
        Ok(self.base.t_at(self.map.inverse_complex(w))? - &self.offset)
    }

    fn boundary_t(&self, mu: f64) -> Result<CMatrix> {
        if let MoebiusMap::InverseShift { .. } = self.map {
            if mu == 0.0 {
                // f⁻¹(0) = ∞ and T vanishes there
                return Ok(-self.offset.clone());
            }
        }
        Ok(self.base.boundary_t(self.map.inverse(mu))? - &self.offset)
    }

    fn spectrum_info(&self) -> SpectrumInfo {
        match self.base.spectrum_info() {
            SpectrumInfo::Points(p) => {
                SpectrumInfo::Points(p.iter().map(|&x| self.map.apply(x)).collect())
            }
            SpectrumInfo::Interval(a, b) => {
                let (fa, fb) = self.map.image(a, b);
                SpectrumInfo::Interval(fa, fb)
            }
        }
    }

    fn scale(&self) -> f64 {
        let (lo, hi) = self.spectrum_info().hull();
        1.0 + lo.abs().max(hi.abs()) + op_norm(&self.offset) + op_norm(self.j.entries())
    }
}

/// Checks the admissibility of `f` for a model: `a > 0`, or `λ0` outside the
/// convex hull of `σ(H0) ∪ σ(H)` with `J⁻¹ + T(λ0)` invertible.
fn check_admissible(model: &Model, map: &MoebiusMap) -> Result<()> {
    match *map {
        MoebiusMap::Affine { a, .. } => {
            if !(a > 0.0) || !a.is_finite() {
                return Err(ModelError::AdmissibilityViolation(format!(
                    "affine slope {a} is not positive"
                )));
            }
        }
        MoebiusMap::InverseShift { lambda0 } => {
            let (lo, hi) = model.spectrum_info().hull();
            let margin = 1e-6 * model.scale();
            if lambda0 > lo - margin && lambda0 < hi + margin {
                return Err(ModelError::AdmissibilityViolation(format!(
                    "λ0 = {lambda0} inside the spectral hull [{lo}, {hi}] of H0"
                )));
            }
            if let Some(dense) = model.as_dense() {
                let (lo, hi) = dense.spectral_hull();
                if lambda0 > lo - margin && lambda0 < hi + margin {
                    return Err(ModelError::AdmissibilityViolation(format!(
                        "λ0 = {lambda0} inside the spectral hull [{lo}, {hi}] of H0 and H"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// `C` with `T̃(w) = T(f⁻¹(w)) − C`, and `J̃⁻¹ = J⁻¹ + C`.
fn offset_and_j(
    model: &Model,
    map: &MoebiusMap,
) -> Result<(CMatrix, HermitianMatrix, HermitianMatrix)> {
    match *map {
        MoebiusMap::Affine { .. } => Ok((
            CMatrix::zeros(model.rank(), model.rank()),
            model.j().clone(),
            model.j_inv().clone(),
        )),
        MoebiusMap::InverseShift { lambda0 } => {
            let t0 = model.boundary_t(lambda0)?;
            let j_inv = HermitianMatrix::from_hermitian_part(&(model.j_inv().entries() + &t0));
            let symbol_scale = max_abs(j_inv.entries()).max(1.0);
            let eig = j_inv.eigenvalues();
            let min_abs = eig.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
            if min_abs <= 1e-9 * symbol_scale {
                return Err(ModelError::AdmissibilityViolation(format!(
                    "J⁻¹ + T(λ0) is singular: λ0 is an eigenvalue of H (|eig| = {min_abs:e})"
                )));
            }
            // eigenvalues of H beyond λ0 show up as a nonzero index
            let zero_tol = 1e-10 * symbol_scale;
            let index = fredholm_index(
                &xi_projection(model.j_inv(), zero_tol)?,
                &xi_projection(&j_inv, zero_tol)?,
                DEFAULT_ONE_TOL,
            )?;
            if index != 0 {
                return Err(ModelError::AdmissibilityViolation(format!(
                    "H has {} eigenvalue(s) beyond λ0 = {lambda0}",
                    index.abs()
                )));
            }
            let j = linalg::apply_scalar_function(&j_inv, |x| 1.0 / x)?;
            Ok((t0, j, j_inv))
        }
    }
}

/// Ten deterministic sample points `w` off the real axis, on both sides.
fn sample_points(map: &MoebiusMap, scale: f64, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|k| {
            // sample the original variable and map it, so both sides stay well conditioned
            let z = C64::new(rng.gen_range(-scale..scale), rng.gen_range(0.5..2.0));
            let z = if k % 2 == 0 { z } else { z.conj() };
            map.apply_complex(z)
        })
        .collect()
}

/// Exact factored pair for `(f(H0), f(H))`.
///
/// Dense models are re-assembled from `f(H0)`, `G̃`, `J̃` and checked against
/// `T(f⁻¹(w)) − C` at ten points and against `f(H)` from the functional
/// calculus. Lattice models are wrapped and checked against a truncated chain.
pub fn pushforward(model: &Model, map: MoebiusMap) -> Result<Model> {
    check_admissible(model, &map)?;
    let (offset, j, j_inv) = offset_and_j(model, &map)?;
    let pushed = PushedModel {
        base: Box::new(model.clone()),
        map,
        offset,
        j,
        j_inv,
    };
    match model {
        Model::Dense(dense) => Ok(Model::Dense(push_dense(dense, &pushed)?)),
        Model::HalfLine(lattice) => {
            verify_against_truncated_chain(lattice, &pushed)?;
            Ok(Model::Pushed(pushed))
        }
        Model::Pushed(_) => {
            let base_scale = model.scale();
            let mut worst: f64 = 0.0;
            for w in sample_points(&map, base_scale, 17) {
                let direct = pushed.t_at(w)?;
                let base_point = map.inverse_complex(w);
                let expected = model.t_at(base_point)? - &pushed.offset;
                worst = worst.max(max_abs(&(direct - expected)));
            }
            if !(worst < IDENTITY_TOL) {
                return Err(ModelError::PushforwardIdentityViolation { residual: worst });
            }
            Ok(Model::Pushed(pushed))
        }
    }
}

fn push_dense(dense: &DenseModel, pushed: &PushedModel) -> Result<DenseModel> {
    let n = dense.dim();
    let f = |x: f64| pushed.map.apply(x);
    let f_h0 = apply_scalar_function(dense.h0(), f)?;
    let g_tilde = match pushed.map {
        MoebiusMap::Affine { a, .. } => dense.g() * C64::new(a.sqrt(), 0.0),
        MoebiusMap::InverseShift { lambda0 } => {
            let shifted = dense.h0().entries() - CMatrix::identity(n, n) * C64::new(lambda0, 0.0);
            dense.g() * linalg::inverse(&shifted)?
        }
    };
    let new = DenseModel::new(f_h0.clone(), g_tilde, pushed.j.clone())?;

    // T̃(w) computed from the new matrices equals T(f⁻¹(w)) − C
    let mut worst: f64 = 0.0;
    for w in sample_points(&pushed.map, dense.scale(), 11) {
        let direct = new.t_at(w)?;
        let through_base = pushed.t_at(w)?;
        let scale = max_abs(&direct).max(1.0);
        worst = worst.max(max_abs(&(direct - through_base)) / scale);
    }
    if !(worst < IDENTITY_TOL) {
        return Err(ModelError::PushforwardIdentityViolation { residual: worst });
    }

    // f(H) from the functional calculus equals f(H0) + G̃†J̃G̃
    let f_h = apply_scalar_function(dense.h(), f)?;
    let defect = max_abs(&(f_h.entries() - new.h().entries()));
    if !(defect < FUNCTIONAL_CALCULUS_TOL) {
        return Err(ModelError::PushforwardIdentityViolation { residual: defect });
    }
    Ok(new)
}

/// Sites `1..=len` of the truncated chain used as an independent oracle.
fn truncated_pushed_t(
    lattice: &HalfLineModel,
    map: &MoebiusMap,
    w: C64,
    len: usize,
) -> Result<CMatrix> {
    let k = lattice.sites().len();
    let r = lattice.weights().nrows();
    let mut columns = CMatrix::zeros(k, r);
    let zero = C64::new(0.0, 0.0);
    for col in 0..r {
        // G̃† e_col for G = W·E on the chain
        let mut rhs = vec![zero; len];
        for (a, &site) in lattice.sites().iter().enumerate() {
            rhs[site - 1] = lattice.weights()[(col, a)].conj();
        }
        let solved = match *map {
            MoebiusMap::Affine { a, b } => {
                // G̃(aH0 + b − w)⁻¹G̃† with G̃ = √a·G: the factors of a cancel
                truncated_chain_solve(len, (w - b) / a, &rhs)?
            }
            MoebiusMap::InverseShift { lambda0 } => {
                // (f(H0) − w)⁻¹ = −w⁻¹(λ0 − H0)(H0 − z)⁻¹ with z = λ0 − 1/w, and G̃ = G(H0 − λ0)⁻¹
                let z = C64::new(lambda0, 0.0) - w.inv();
                let first = truncated_chain_solve(len, z, &rhs)?;
                let second = truncated_chain_solve(len, C64::new(lambda0, 0.0), &first)?;
                second.into_iter().map(|x| -x / w).collect()
            }
        };
        for (a, &site) in lattice.sites().iter().enumerate() {
            columns[(a, col)] = solved[site - 1];
        }
    }
    Ok(lattice.weights() * columns)
}

fn verify_against_truncated_chain(lattice: &HalfLineModel, pushed: &PushedModel) -> Result<()> {
    let len = lattice.max_site() + 400;
    let mut worst: f64 = 0.0;
    for w in sample_points(&pushed.map, 2.0, 23) {
        let wrapped = pushed.t_at(w)?;
        let truncated = truncated_pushed_t(lattice, &pushed.map, w, len)?;
        let scale = max_abs(&wrapped).max(1.0);
        worst = worst.max(max_abs(&(wrapped - truncated)) / scale);
    }
    if !(worst < IDENTITY_TOL) {
        return Err(ModelError::PushforwardIdentityViolation { residual: worst });
    }
    Ok(())
}
