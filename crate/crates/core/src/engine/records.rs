use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mu::{mu_via_flow, FlowRoute};
use super::oracles::counting_ssf_oracle;
use super::ssf::{
    birman_krein_defect, ssf_from_mu, ssf_index_integral, ssf_via_determinant, DetConfig,
};
use super::EngineError;
use crate::circle_flow::FlowConfig;
use crate::models::{boundary_data, pushforward, Model, MoebiusMap, ResolventModel};

/// Largest accepted `|xi_mu − xi_index|` before the record is flagged.
const MU_INDEX_TOL: f64 = 1e-9;

/// One row of a `ξ(λ)` sweep. Quantities that could not be computed are
/// `None` and the reason is listed in `flags`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsfRecord {
    pub lambda: f64,
    pub xi_det: Option<f64>,
    pub xi_mu: Option<f64>,
    pub xi_index: Option<f64>,
    pub xi_oracle: Option<i64>,
    pub bk_defect: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsfConfig {
    pub flow: FlowConfig,
    pub det: DetConfig,
    pub route: FlowRoute,
    /// When set, `xi_det` is computed for `(f(H), f(H0))` at `f(λ)`.
    pub transform: Option<MoebiusMap>,
    /// Worker threads for sweeps; `0` or `1` runs serially.
    pub jobs: usize,
}

impl Default for SsfConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            det: DetConfig::default(),
            route: FlowRoute::Scattering,
            transform: None,
            jobs: 1,
        }
    }
}

fn push_flag(flags: &mut Vec<String>, e: &EngineError) {
    let flag = e.flag();
    if !flags.contains(&flag) {
        flags.push(flag);
    }
}

fn keep<T>(flags: &mut Vec<String>, r: Result<T, EngineError>) -> Option<T> {
    r.map_err(|e| push_flag(flags, &e)).ok()
}

pub fn compute_record(model: &Model, lambda: f64, cfg: &SsfConfig) -> SsfRecord {
    let mut flags = Vec::new();
    // exceptional points are reported once and skipped
    if let Err(e) = boundary_data(model, lambda) {
        push_flag(&mut flags, &e.into());
        return SsfRecord {
            lambda,
            xi_det: None,
            xi_mu: None,
            xi_index: None,
            xi_oracle: None,
            bk_defect: None,
            flags,
        };
    }
    let xi_index = keep(&mut flags, ssf_index_integral(model, lambda));
    let xi_mu = keep(
        &mut flags,
        mu_via_flow(model, lambda, &cfg.flow, cfg.route).map(|mu| ssf_from_mu(&mu)),
    );
    let xi_det = match cfg.transform {
        None => keep(&mut flags, ssf_via_determinant(model, lambda, &cfg.det)),
        Some(map) => keep(
            &mut flags,
            pushforward(model, map)
                .map_err(EngineError::from)
                .and_then(|pushed| ssf_via_determinant(&pushed, map.apply(lambda), &cfg.det)),
        ),
    };
    let xi_oracle = model
        .as_dense()
        .and_then(|dense| keep(&mut flags, counting_ssf_oracle(dense, lambda)));
    let bk_defect =
        xi_index.and_then(|xi| keep(&mut flags, birman_krein_defect(model, lambda, xi)));
    if let (Some(a), Some(b)) = (xi_mu, xi_index) {
        if (a - b).abs() > MU_INDEX_TOL {
            push_flag(&mut flags, &EngineError::MethodDisagreement { lambda });
        }
    }
    SsfRecord {
        lambda,
        xi_det,
        xi_mu,
        xi_index,
        xi_oracle,
        bk_defect,
        flags,
    }
}

/// One record per `λ`, in input order; parallel when `cfg.jobs > 1`.
pub fn sweep(model: &Model, lambdas: &[f64], cfg: &SsfConfig) -> Vec<SsfRecord> {
    if cfg.jobs <= 1 {
        return lambdas
            .iter()
            .map(|&l| compute_record(model, l, cfg))
            .collect();
    }
    match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
    {
        Ok(pool) => pool.install(|| {
            lambdas
                .par_iter()
                .map(|&l| compute_record(model, l, cfg))
                .collect()
        }),
        Err(_) => lambdas
            .iter()
            .map(|&l| compute_record(model, l, cfg))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMatrix, HermitianMatrix};
    use crate::models::{DenseModel, HalfLineModel};

    #[test]
    fn dense_diagonal_record() {
        let model: Model = DenseModel::new(
            HermitianMatrix::from_real_diagonal(&[0.0, 2.0]),
            CMatrix::identity(2, 2),
            HermitianMatrix::identity(2),
        )
        .unwrap()
        .into();
        let r = compute_record(&model, 0.5, &SsfConfig::default());
        assert!(r.flags.is_empty(), "{:?}", r.flags);
        assert_eq!(r.xi_oracle, Some(1));
        assert!((r.xi_det.unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(r.xi_mu, Some(1.0));
        assert_eq!(r.xi_index, Some(1.0));

        let on_eigenvalue = compute_record(&model, 0.0, &SsfConfig::default());
        assert_eq!(on_eigenvalue.flags, vec!["BoundaryUndefined".to_string()]);
        assert_eq!(on_eigenvalue.xi_index, None);
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let model: Model = HalfLineModel::rank_one(2, 0.8, 1.0).unwrap().into();
        let lambdas: Vec<f64> = (0..12).map(|k| -1.8 + 0.3 * k as f64).collect();
        let serial = sweep(&model, &lambdas, &SsfConfig::default());
        let parallel = sweep(
            &model,
            &lambdas,
            &SsfConfig {
                jobs: 4,
                ..SsfConfig::default()
            },
        );
        assert_eq!(serial, parallel);
    }
}
