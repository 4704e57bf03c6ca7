use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::mu::{jump_phases, sample_interval, MuFunction};
use super::{EngineError, Result};
use crate::linalg::{
    det_complex, fredholm_index, max_abs, xi_projection, CMatrix, HermitianMatrix, LinalgError,
    UnitaryMatrix, C64, DEFAULT_ONE_TOL,
};
use crate::models::{boundary_data, s_at_boundary, BoundaryData, ResolventModel};

/// `ξ = −(1/2π) ∫ μ(θ) dθ`.
pub fn ssf_from_mu(mu: &MuFunction) -> f64 {
    // `+ 0.0` turns −0 into 0
    -mu.step.integral() / TAU + 0.0
}

fn xi(m: &HermitianMatrix) -> std::result::Result<crate::linalg::ProjectionMatrix, LinalgError> {
    xi_projection(m, 1e-10 * max_abs(m.entries()).max(1.0))
}

/// `ξ = −(1/π) ∫ index(Ξ(J⁻¹), Ξ(J⁻¹ + A + tB)) dt/(1 + t²)`, integrated
/// exactly over the intervals between the points `t_j = cot(θ_j/2)` given by
/// the eigenphases `θ_j` of `S(λ + i0)`.
pub fn ssf_index_integral_from_data(data: &BoundaryData, at: C64) -> Result<f64> {
    let phases = jump_phases(data, at)?;
    let reference = xi(&data.j_inv)?;
    let index_at = |t: f64| -> std::result::Result<i64, LinalgError> {
        fredholm_index(&reference, &xi(&data.pencil(t))?, DEFAULT_ONE_TOL)
    };
    // θ ↦ cot(θ/2) is decreasing, so θ = 0 is t = +∞ and θ = 2π is t = −∞
    let mut edges = Vec::with_capacity(phases.len() + 2);
    edges.push(f64::INFINITY);
    edges.extend(phases.iter().map(|&(theta, _)| 1.0 / (0.5 * theta).tan()));
    edges.push(f64::NEG_INFINITY);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        // finite stand-ins for unbounded intervals
        let (a, b) = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            (true, false) => (lo, lo + 2.0 * lo.abs().max(1.0)),
            (false, true) => (hi - 2.0 * hi.abs().max(1.0), hi),
            (false, false) => (-1.0, 1.0),
        };
        let value = sample_interval(a, b, index_at)?;
        total -= value as f64 * (atan_ext(hi) - atan_ext(lo)) / PI;
    }
    Ok(total)
}

fn atan_ext(t: f64) -> f64 {
    if t == f64::INFINITY {
        FRAC_PI_2
    } else if t == f64::NEG_INFINITY {
        -FRAC_PI_2
    } else {
        t.atan()
    }
}

pub fn ssf_index_integral<M: ResolventModel + ?Sized>(model: &M, lambda: f64) -> Result<f64> {
    ssf_index_integral_from_data(&boundary_data(model, lambda)?, C64::new(lambda, 0.0))
}

/// `S(λ + i0)`.
pub fn scattering_matrix<M: ResolventModel + ?Sized>(
    model: &M,
    lambda: f64,
) -> Result<UnitaryMatrix> {
    Ok(s_at_boundary(model, lambda)?)
}

/// `D(z) = det(I + J T(z))`; real `z` means the boundary value from above.
pub fn perturbation_determinant<M: ResolventModel + ?Sized>(model: &M, z: C64) -> Result<C64> {
    let t = if z.im == 0.0 {
        model.boundary_t(z.re)?
    } else {
        model.t_at(z)?
    };
    let r = model.rank();
    Ok(det_complex(
        &(CMatrix::identity(r, r) + model.j().entries() * t),
    ))
}

/// `|det S(λ + i0) − e^{−2πiξ}|`.
pub fn birman_krein_defect<M: ResolventModel + ?Sized>(
    model: &M,
    lambda: f64,
    xi: f64,
) -> Result<f64> {
    let det = scattering_matrix(model, lambda)?.det();
    Ok((det - C64::from_polar(1.0, -TAU * xi)).norm())
}

/// Parameters of the continuous-argument tracking of `D(λ + iy)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetConfig {
    /// Starting height in units of `1 + scale`.
    pub y_max_factor: f64,
    /// Geometric ratio between consecutive heights.
    pub ratio: f64,
    /// Last positive height in units of `scale`; the boundary value follows.
    pub y_min_factor: f64,
    /// Required `|D − 1|` at the starting height.
    pub anchor_tol: f64,
    /// Times the starting height may be multiplied by 10.
    pub max_escalations: u32,
    /// Bisection depth when consecutive arguments differ by more than `π/2`.
    pub max_refine: u32,
}

impl Default for DetConfig {
    fn default() -> Self {
        Self {
            y_max_factor: 1e3,
            ratio: 0.8,
            y_min_factor: 1e-10,
            anchor_tol: 1e-6,
            max_escalations: 8,
            max_refine: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetRow {
    pub y: f64,
    pub re: f64,
    pub im: f64,
    /// Continuous argument of `D` along the path.
    pub arg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetTrace {
    pub lambda: f64,
    pub rows: Vec<DetRow>,
    /// `arg D(λ + i0) / π`.
    pub xi: f64,
}

struct Tracker<'a, M: ?Sized> {
    model: &'a M,
    lambda: f64,
    cfg: &'a DetConfig,
    rows: Vec<DetRow>,
}

impl<M: ResolventModel + ?Sized> Tracker<'_, M> {
    fn eval(&self, y: f64) -> Result<C64> {
        let d = perturbation_determinant(self.model, C64::new(self.lambda, y))?;
        if d.norm() == 0.0 || !d.re.is_finite() || !d.im.is_finite() {
            return Err(EngineError::EigenvalueAtLambda {
                lambda: self.lambda,
            });
        }
        Ok(d)
    }

    /// Moves the tracked argument from height `y_hi` (value `d_hi`, argument
    /// `arg_hi`) to `y_lo`, bisecting while the phase step exceeds `π/2`.
    fn step(
        &mut self,
        y_hi: f64,
        d_hi: C64,
        arg_hi: f64,
        y_lo: f64,
        d_lo: C64,
        depth: u32,
    ) -> Result<f64> {
        let delta = (d_lo / d_hi).arg();
        if delta.abs() <= FRAC_PI_2 {
            let arg = arg_hi + delta;
            self.rows.push(DetRow {
                y: y_lo,
                re: d_lo.re,
                im: d_lo.im,
                arg,
            });
            return Ok(arg);
        }
        if depth >= self.cfg.max_refine {
            return Err(EngineError::UnwindFailure { y: y_lo });
        }
        let y_mid = if y_lo > 0.0 {
            (y_lo * y_hi).sqrt()
        } else {
            0.25 * y_hi
        };
        let d_mid = self.eval(y_mid)?;
        let arg_mid = self.step(y_hi, d_hi, arg_hi, y_mid, d_mid, depth + 1)?;
        self.step(y_mid, d_mid, arg_mid, y_lo, d_lo, depth + 1)
    }
}

/// Tracks `arg D(λ + iy)` from a height where `D ≈ 1` down to the boundary
/// value, recording every sample.
pub fn determinant_trace<M: ResolventModel + ?Sized>(
    model: &M,
    lambda: f64,
    cfg: &DetConfig,
) -> Result<DetTrace> {
    let scale = model.scale();
    let mut tracker = Tracker {
        model,
        lambda,
        cfg,
        rows: Vec::new(),
    };
    let mut y = cfg.y_max_factor * (1.0 + scale);
    let mut d = tracker.eval(y)?;
    let mut escalations = 0;
    while (d - 1.0).norm() >= cfg.anchor_tol {
        if escalations >= cfg.max_escalations {
            return Err(EngineError::AnchorNotReached {
                y_max: y,
                defect: (d - 1.0).norm(),
            });
        }
        y *= 10.0;
        d = tracker.eval(y)?;
        escalations += 1;
    }
    let mut arg = d.arg();
    tracker.rows.push(DetRow {
        y,
        re: d.re,
        im: d.im,
        arg,
    });
    let y_min = cfg.y_min_factor * scale;
    while y > y_min {
        let y_next = (y * cfg.ratio).max(y_min);
        let d_next = tracker.eval(y_next)?;
        arg = tracker.step(y, d, arg, y_next, d_next, 0)?;
        y = y_next;
        d = d_next;
    }
    let d_bdry = perturbation_determinant(model, C64::new(lambda, 0.0))?;
    if d_bdry.norm() <= 1e-12 * (1.0 + scale) {
        return Err(EngineError::EigenvalueAtLambda { lambda });
    }
    arg = tracker.step(y, d, arg, 0.0, d_bdry, 0)?;
    Ok(DetTrace {
        lambda,
        rows: tracker.rows,
        xi: arg / PI,
    })
}

/// `ξ(λ) = arg D(λ + i0) / π` with the argument continued from `D(λ + i∞) = 1`.
pub fn ssf_via_determinant<M: ResolventModel + ?Sized>(
    model: &M,
    lambda: f64,
    cfg: &DetConfig,
) -> Result<f64> {
    Ok(determinant_trace(model, lambda, cfg)?.xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HalfLineModel;

    fn scalar(a: f64, b: f64, j: f64) -> BoundaryData {
        BoundaryData {
            a: HermitianMatrix::from_real_diagonal(&[a]),
            b: HermitianMatrix::from_real_diagonal(&[b]),
            j_inv: HermitianMatrix::from_real_diagonal(&[1.0 / j]),
        }
    }

    #[test]
    fn scalar_index_integrals() {
        let at = C64::new(0.0, 0.0);
        let xi = |a, b, j| ssf_index_integral_from_data(&scalar(a, b, j), at).unwrap();
        assert!((xi(0.0, 1.0, 1.0) - 0.25).abs() < 1e-12);
        assert!((xi(0.0, 1.0, -1.0) + 0.25).abs() < 1e-12);
        let expected = (2.0f64 / 3.0).atan() / PI;
        assert!((xi(0.5, 1.0, 1.0) - expected).abs() < 1e-12);
        assert!((expected - 0.187167).abs() < 1e-6);
    }

    #[test]
    fn jump_at_half_turn() {
        // J⁻¹ + A + tB = t, S = −1
        let data = scalar(-1.0, 1.0, 1.0);
        let xi = ssf_index_integral_from_data(&data, C64::new(0.0, 0.0)).unwrap();
        assert!((xi - 0.5).abs() < 1e-12, "{xi}");
    }

    #[test]
    fn lattice_determinant_matches_closed_form() {
        let model = HalfLineModel::rank_one(1, 1.0, 1.0).unwrap();
        let xi = ssf_via_determinant(&model, 0.0, &DetConfig::default()).unwrap();
        assert!((xi - 0.25).abs() < 1e-9, "{xi}");
        let bk = birman_krein_defect(&model, 0.0, xi).unwrap();
        assert!(bk < 1e-9);
    }
}
