use super::{invert_j, ModelError, ResolventModel, Result, SpectrumInfo};
use crate::linalg::{op_norm, CMatrix, HermitianMatrix, LinalgError, C64};

/// Root of `ζ + 1/ζ = z` with `|ζ| < 1`; on `(−2, 2)` the boundary value from
/// the upper half-plane, `ζ = λ/2 − i·sqrt(1 − λ²/4)`.
pub fn zeta(z: C64) -> Result<C64> {
    if z.im == 0.0 {
        let lambda = z.re;
        if lambda.abs() < 2.0 {
            return Ok(C64::new(
                0.5 * lambda,
                -(1.0 - 0.25 * lambda * lambda).sqrt(),
            ));
        }
        if lambda.abs() == 2.0 {
            return Err(ModelError::BranchAtThreshold { lambda });
        }
        let big = 0.5 * (lambda + lambda.signum() * (lambda * lambda - 4.0).sqrt());
        return Ok(C64::new(1.0 / big, 0.0));
    }
    let s = (z * z - 4.0).sqrt();
    let r1 = 0.5 * (z + s);
    let r2 = 0.5 * (z - s);
    let big = if r1.norm() >= r2.norm() { r1 } else { r2 };
    Ok(big.inv())
}

/// Green's function `(H0 − z)⁻¹(n, m)` of the Dirichlet half-line Laplacian
/// `(Hu)(n) = u(n+1) + u(n−1)`, `u(0) = 0`:
/// `G(n, m; z) = (ζ^{|n−m|} − ζ^{n+m}) / (ζ − 1/ζ)`.
pub fn lattice_green(n: usize, m: usize, z: C64) -> Result<C64> {
    let zeta = zeta(z)?;
    Ok(green_from_zeta(n, m, zeta))
}

fn green_from_zeta(n: usize, m: usize, zeta: C64) -> C64 {
    let near = zeta.powu(n.abs_diff(m) as u32);
    let far = zeta.powu((n + m) as u32);
    (near - far) / (zeta - zeta.inv())
}

/// Half-line lattice Laplacian with a perturbation supported on finitely many
/// sites: `G = W·E`, where `E` picks the site values and `W` is `r×k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfLineModel {
    sites: Vec<usize>,
    weights: CMatrix,
    j: HermitianMatrix,
    j_inv: HermitianMatrix,
}

impl HalfLineModel {
    pub fn new(sites: Vec<usize>, weights: CMatrix, j: HermitianMatrix) -> Result<Self> {
        if sites.is_empty() {
            return Err(ModelError::InvalidPerturbation("no sites".into()));
        }
        if sites.contains(&0) {
            return Err(ModelError::InvalidPerturbation(
                "sites must be positive".into(),
            ));
        }
        let mut sorted = sites.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sites.len() {
            return Err(ModelError::InvalidPerturbation(
                "sites must be distinct".into(),
            ));
        }
        if weights.ncols() != sites.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: sites.len(),
                found: weights.ncols(),
            }
            .into());
        }
        if weights.nrows() != j.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: j.dim(),
                found: weights.nrows(),
            }
            .into());
        }
        let j_inv = invert_j(&j, 1e-10)?;
        let model = Self {
            sites,
            weights,
            j,
            j_inv,
        };
        model.verify_recurrence()?;
        Ok(model)
    }

    /// Rank-one perturbation `j·w²·δ_site`.
    pub fn rank_one(site: usize, weight: f64, j: f64) -> Result<Self> {
        Self::new(
            vec![site],
            CMatrix::from_element(1, 1, C64::new(weight, 0.0)),
            HermitianMatrix::from_real_diagonal(&[j]),
        )
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn weights(&self) -> &CMatrix {
        &self.weights
    }

    pub fn max_site(&self) -> usize {
        self.sites.iter().copied().max().unwrap_or(0)
    }

    fn t_from_zeta(&self, zeta: C64) -> CMatrix {
        let k = self.sites.len();
        let g = CMatrix::from_fn(k, k, |a, b| {
            green_from_zeta(self.sites[a], self.sites[b], zeta)
        });
        &self.weights * g * self.weights.adjoint()
    }

    /// Checks `G(n+1,m) + G(n−1,m) − zG(n,m) = δ_{nm}` with `G(0,m) = 0` on the
    /// support, off the axis and on the boundary.
    fn verify_recurrence(&self) -> Result<()> {
        let points = [
            C64::new(1.7, 0.3),
            C64::new(-0.4, 0.05),
            C64::new(0.3, 0.0),
            C64::new(-2.6, 0.0),
        ];
        let mut worst: f64 = 0.0;
        for &z in &points {
            let zeta = zeta(z)?;
            for &m in &self.sites {
                for n in 1..=self.max_site() + 1 {
                    let below = if n == 1 {
                        C64::new(0.0, 0.0)
                    } else {
                        green_from_zeta(n - 1, m, zeta)
                    };
                    let lhs =
                        green_from_zeta(n + 1, m, zeta) + below - z * green_from_zeta(n, m, zeta);
                    let delta = if n == m { 1.0 } else { 0.0 };
                    worst = worst.max((lhs - delta).norm());
                }
                worst = worst.max(green_from_zeta(0, m, zeta).norm());
            }
        }
        if !(worst < 1e-12) {
            return Err(ModelError::RecurrenceViolation { residual: worst });
        }
        Ok(())
    }
}

impl ResolventModel for HalfLineModel {
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
        Ok(self.t_from_zeta(zeta(z)?))
    }

    fn boundary_t(&self, lambda: f64) -> Result<CMatrix> {
        let t = self.t_from_zeta(zeta(C64::new(lambda, 0.0))?);
        if lambda.abs() > 2.0 {
            return Ok(crate::linalg::hermitian_part(&t));
        }
        Ok(t)
    }

    fn spectrum_info(&self) -> SpectrumInfo {
        SpectrumInfo::Interval(-2.0, 2.0)
    }

    fn scale(&self) -> f64 {
        3.0 + op_norm(&self.weights).powi(2) * op_norm(self.j.entries())
    }
}

/// Tridiagonal `(H0 − z)` of the half-line chain truncated to sites `1..=len`.
pub fn truncated_chain_solve(len: usize, z: C64, rhs: &[C64]) -> Result<Vec<C64>> {
    let one = C64::new(1.0, 0.0);
    let off = vec![one; len - 1];
    let diag = vec![-z; len];
    Ok(crate::linalg::solve_tridiagonal(&off, &diag, &off, rhs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{boundary_data, herglotz_symmetry_defect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn green_symmetry_and_recurrence() {
        let z = C64::new(1.7, 0.3);
        for n in 1..=6 {
            for m in 1..=6 {
                let a = lattice_green(n, m, z).unwrap();
                let b = lattice_green(m, n, z).unwrap();
                assert!((a - b).norm() < 1e-15);
                let below = if n == 1 {
                    C64::new(0.0, 0.0)
                } else {
                    lattice_green(n - 1, m, z).unwrap()
                };
                let lhs = lattice_green(n + 1, m, z).unwrap() + below - z * a;
                let delta = if n == m { 1.0 } else { 0.0 };
                assert!((lhs - delta).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn threshold_is_rejected() {
        assert!(matches!(
            zeta(C64::new(2.0, 0.0)),
            Err(ModelError::BranchAtThreshold { .. })
        ));
        assert!(matches!(
            zeta(C64::new(-2.0, 0.0)),
            Err(ModelError::BranchAtThreshold { .. })
        ));
    }

    #[test]
    fn zeta_branch() {
        for &z in &[
            C64::new(0.3, 0.01),
            C64::new(-3.0, 1.0),
            C64::new(5.0, -0.2),
        ] {
            let zeta = zeta(z).unwrap();
            assert!(zeta.norm() < 1.0);
            assert!((zeta + zeta.inv() - z).norm() < 1e-13);
        }
        let outside = zeta(C64::new(2.5, 0.0)).unwrap();
        assert!((outside.re - 0.5).abs() < 1e-15 && outside.im == 0.0);
    }

    #[test]
    fn site_one_at_zero_energy() {
        let model = HalfLineModel::rank_one(1, 1.0, 1.0).unwrap();
        let data = boundary_data(&model, 0.0).unwrap();
        assert!(data.a.entries()[(0, 0)].norm() < 1e-15);
        assert!((data.b.entries()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_values_are_limits_from_above() {
        // Richardson extrapolation of T(λ + iη) over η ∈ {1e-2, 1e-3, 1e-4}
        let model = HalfLineModel::rank_one(1, 1.0, 1.0).unwrap();
        let lambda = 0.0;
        let t = |eta: f64| model.t_at(C64::new(lambda, eta)).unwrap()[(0, 0)];
        let (t1, t2, t3) = (t(1e-2), t(1e-3), t(1e-4));
        let r12 = (t2 * 10.0 - t1) / 9.0;
        let r23 = (t3 * 10.0 - t2) / 9.0;
        let extrapolated = (r23 * 100.0 - r12) / 99.0;
        let exact = model.boundary_t(lambda).unwrap()[(0, 0)];
        assert!((extrapolated - exact).norm() < 1e-6);
    }

    #[test]
    fn imaginary_part_is_positive_on_the_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let model = HalfLineModel::new(
            vec![1, 3, 4],
            crate::random::random_complex_matrix(&mut rng, 2, 3),
            HermitianMatrix::from_real_diagonal(&[1.0, -1.0]),
        )
        .unwrap();
        for _ in 0..100 {
            let lambda = rng.gen_range(-1.999..1.999);
            let b = boundary_data(&model, lambda).unwrap().b;
            assert!(b.eigenvalues()[0] >= -1e-10);
        }
        assert!(herglotz_symmetry_defect(&model, C64::new(0.4, 0.3)).unwrap() < 1e-12);
    }

    #[test]
    fn boundary_values_are_continuous() {
        let model = HalfLineModel::rank_one(2, 0.7, -1.0).unwrap();
        let mut prev = model.boundary_t(-1.999).unwrap()[(0, 0)];
        let mut lambda = -1.998;
        while lambda < 1.999 {
            let cur = model.boundary_t(lambda).unwrap()[(0, 0)];
            assert!((cur - prev).norm() < 0.1);
            prev = cur;
            lambda += 1e-3;
        }
    }

    #[test]
    fn truncated_chain_matches_closed_form() {
        let z = C64::new(0.3, 0.01);
        let len = 2000;
        let mut rhs = vec![C64::new(0.0, 0.0); len];
        rhs[0] = C64::new(1.0, 0.0);
        let column = truncated_chain_solve(len, z, &rhs).unwrap();
        let exact = lattice_green(1, 1, z).unwrap();
        assert!((column[0] - exact).norm() < 1e-6);
    }

    #[test]
    fn truncated_chain_near_the_axis() {
        // at Im z = 1e-3 the truncation error decays like |ζ|^{2N} ≈ exp(−N·1e-3)
        let z = C64::new(0.3, 1e-3);
        let len = 20_000;
        let mut rhs = vec![C64::new(0.0, 0.0); len];
        rhs[0] = C64::new(1.0, 0.0);
        let column = truncated_chain_solve(len, z, &rhs).unwrap();
        let exact = lattice_green(1, 1, z).unwrap();
        assert!((column[0] - exact).norm() < 1e-6);
    }

    #[test]
    fn rejects_bad_supports() {
        let w = CMatrix::from_element(1, 2, C64::new(1.0, 0.0));
        let j = HermitianMatrix::identity(1);
        assert!(HalfLineModel::new(vec![2, 2], w.clone(), j.clone()).is_err());
        assert!(HalfLineModel::new(vec![0, 2], w, j).is_err());
    }
}
