use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{EngineError, Result};
use crate::circle_flow::{
    spectral_flow, CircleStepFunction, FlowConfig, FlowError, Jump, SpectrumClass, UnitaryPath,
};
use crate::linalg::{
    fredholm_index, max_abs, xi_projection, HermitianMatrix, LinalgError, ProjectionMatrix,
    UnitaryMatrix, C64, DEFAULT_ID_TOL, DEFAULT_ONE_TOL,
};
use crate::models::{
    boundary_data, s_of_z, BoundaryData, ModelError, ResolventModel, DEFAULT_INV_TOL,
};

/// Eigenphases closer than this are one jump of `μ`.
const PHASE_CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMethod {
    Flow,
    Index,
}

/// `μ(·; λ)` as a step function of `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuFunction {
    pub lambda: f64,
    #[serde(flatten)]
    pub step: CircleStepFunction,
    pub method: MuMethod,
    /// Eigenphases of `S(λ + i0)`.
    #[serde(skip)]
    pub scattering_phases: Vec<f64>,
}

impl MuFunction {
    pub fn value_at(&self, theta: f64) -> i64 {
        self.step.value_at(theta)
    }
}

/// Relative zero tolerance for `Ξ` of a Hermitian matrix.
fn zero_tol(m: &HermitianMatrix) -> f64 {
    1e-10 * max_abs(m.entries()).max(1.0)
}

fn xi(m: &HermitianMatrix) -> std::result::Result<ProjectionMatrix, LinalgError> {
    xi_projection(m, zero_tol(m))
}

/// Distinct eigenphases of `S` built from the boundary data, each with its
/// multiplicity; phases within `1e-8` are merged.
pub fn jump_phases(data: &BoundaryData, at: C64) -> Result<Vec<(f64, usize)>> {
    let s = data.scattering(at, DEFAULT_INV_TOL)?;
    Ok(cluster_phases(&s.eigenphases(DEFAULT_ID_TOL)))
}

fn cluster_phases(phases: &[f64]) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut cluster: Vec<f64> = Vec::new();
    let mut flush = |cluster: &mut Vec<f64>| {
        if !cluster.is_empty() {
            let mean = cluster.iter().sum::<f64>() / cluster.len() as f64;
            out.push((mean, cluster.len()));
            cluster.clear();
        }
    };
    for &p in phases {
        if let Some(&last) = cluster.last() {
            if p - last > PHASE_CLUSTER_TOL {
                flush(&mut cluster);
            }
        }
        cluster.push(p);
    }
    flush(&mut cluster);
    out
}

/// Evaluates `f` at the given fraction of `(lo, hi)`, moving the point when
/// the `Ξ` argument has a kernel; three attempts in total.
pub(crate) fn sample_interval<T>(
    lo: f64,
    hi: f64,
    mut f: impl FnMut(f64) -> std::result::Result<T, LinalgError>,
) -> Result<T> {
    let mut last = 0.5 * (lo + hi);
    for frac in [0.5, 0.381_966, 0.618_034] {
        last = lo + frac * (hi - lo);
        match f(last) {
            Ok(v) => return Ok(v),
            Err(LinalgError::KernelAtZero { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(EngineError::KernelAtZero { theta: last })
}

/// `μ(θ) = index(Ξ(J⁻¹), Ξ(J⁻¹ + A + cot(θ/2)B))` assembled from its values
/// on the intervals between eigenphases of `S(λ + i0)`.
pub fn mu_from_data(data: &BoundaryData, at: C64) -> Result<(CircleStepFunction, Vec<f64>)> {
    let phases = jump_phases(data, at)?;
    let reference = xi(&data.j_inv)?;
    let index_at = |theta: f64| -> std::result::Result<i64, LinalgError> {
        let cot = 1.0 / (0.5 * theta).tan();
        fredholm_index(&reference, &xi(&data.pencil(cot))?, DEFAULT_ONE_TOL)
    };
    let mut edges = Vec::with_capacity(phases.len() + 2);
    edges.push(0.0);
    edges.extend(phases.iter().map(|p| p.0));
    edges.push(TAU);
    let values = edges
        .windows(2)
        .map(|w| sample_interval(w[0], w[1], index_at))
        .collect::<Result<Vec<i64>>>()?;
    let jumps = phases.iter().enumerate().map(|(k, &(theta, _))| Jump {
        theta,
        m: values[k] - values[k + 1],
    });
    let step = CircleStepFunction::new(values[phases.len()], jumps);
    let flat = phases
        .iter()
        .flat_map(|&(p, m)| std::iter::repeat_n(p, m))
        .collect();
    Ok((step, flat))
}

pub fn mu_via_index<M: ResolventModel + ?Sized>(model: &M, lambda: f64) -> Result<MuFunction> {
    let data = boundary_data(model, lambda)?;
    let (step, scattering_phases) = mu_from_data(&data, C64::new(lambda, 0.0))?;
    Ok(MuFunction {
        lambda,
        step,
        method: MuMethod::Index,
        scattering_phases,
    })
}

/// Which unitary family is followed from `λ + i∞` down to `λ + i0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowRoute {
    /// The `r×r` family `S(z)`.
    Scattering,
    /// The `n×n` family `M(z)`, dense models only.
    Unitary,
}

/// `t ↦ U(λ + i(1 − t)/t)` for `U = S` or `U = M`.
pub struct ResolventPath<'a, M: ?Sized> {
    pub model: &'a M,
    pub lambda: f64,
    pub route: FlowRoute,
    pub end_class: SpectrumClass,
}

impl<M: ResolventModel + ?Sized> ResolventPath<'_, M> {
    pub fn height(t: f64) -> f64 {
        (1.0 - t) / t
    }
}

impl<M: ResolventModel + ?Sized> UnitaryPath for ResolventPath<'_, M> {
    fn eval(&self, t: f64) -> std::result::Result<UnitaryMatrix, FlowError> {
        let z = C64::new(self.lambda, Self::height(t));
        let result = match self.route {
            FlowRoute::Scattering => s_of_z(self.model, z),
            FlowRoute::Unitary => match self.model.as_dense() {
                Some(dense) => dense.m_of_z(z),
                None => Err(ModelError::InvalidPerturbation(
                    "M-path needs a dense model".into(),
                )),
            },
        };
        result.map_err(|e| match e {
            ModelError::Linalg(source) => FlowError::Sample { t, source },
            other => FlowError::Evaluation {
                t,
                message: other.to_string(),
            },
        })
    }

    fn start_limit(&self) -> Option<SpectrumClass> {
        Some(SpectrumClass::empty())
    }

    fn end_limit(&self) -> Option<SpectrumClass> {
        Some(self.end_class.clone())
    }
}

/// Spectral flow of `t ↦ S(λ + i(1 − t)/t)` (or of `M`), from the empty
/// class at `t → 0` to the class of the boundary value at `t → 1`.
pub fn mu_via_flow<M: ResolventModel + ?Sized>(
    model: &M,
    lambda: f64,
    cfg: &FlowConfig,
    route: FlowRoute,
) -> Result<MuFunction> {
    let data = boundary_data(model, lambda)?;
    let at = C64::new(lambda, 0.0);
    let s = data.scattering(at, DEFAULT_INV_TOL)?;
    let scattering_phases = s.eigenphases(cfg.id_tol);
    let end_class = match route {
        FlowRoute::Scattering => SpectrumClass::new(scattering_phases.iter().copied()),
        FlowRoute::Unitary => {
            if model.as_dense().is_none() || !data.is_gap() {
                return Err(EngineError::NotDense);
            }
            // off both spectra M(λ) = I
            SpectrumClass::empty()
        }
    };
    let path = ResolventPath {
        model,
        lambda,
        route,
        end_class,
    };
    let step = spectral_flow(&path, cfg)?.merged_within(PHASE_CLUSTER_TOL);
    Ok(MuFunction {
        lambda,
        step,
        method: MuMethod::Flow,
        scattering_phases,
    })
}
