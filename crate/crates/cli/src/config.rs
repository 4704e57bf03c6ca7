use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssf_core::circle_flow::FlowConfig;
use ssf_core::engine::DetConfig;
use ssf_core::linalg::{CMatrix, HermitianMatrix, C64};
use ssf_core::models::{DenseModel, HalfLineModel, Model, MoebiusMap, ResolventModel};

use crate::CliError;

/// A complex number as it appears in config files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

pub type MatrixSpec = Vec<Vec<Complex>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Dense { h0: MatrixSpec },
    HalflineLaplacian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingSpec {
    Matrix(MatrixSpec),
    Sites {
        sites: Vec<usize>,
        weights: MatrixSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub g: CouplingSpec,
    pub j: MatrixSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaGrid {
    Range { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

impl LambdaGrid {
    /// Inclusive grid; a single point is `start`.
    pub fn points(&self) -> Vec<f64> {
        match self {
            LambdaGrid::List(v) => v.clone(),
            LambdaGrid::Range { start, stop, count } => {
                if *count == 1 {
                    return vec![*start];
                }
                let step = (stop - start) / (*count - 1) as f64;
                (0..*count).map(|k| start + step * k as f64).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSettings {
    pub eps_gap: f64,
    pub max_depth: u32,
    /// Starting height of the determinant tracking; scaled default if absent.
    pub y_max: Option<f64>,
    /// Ratio between consecutive heights of the determinant tracking.
    pub grid_ratio: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        let flow = FlowConfig::default();
        Self {
            eps_gap: flow.eps_gap,
            max_depth: flow.max_depth,
            y_max: None,
            grid_ratio: DetConfig::default().ratio,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

fn default_theta_samples() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub transform: Option<MoebiusMap>,
    #[serde(default)]
    pub lambda_grid: Option<LambdaGrid>,
    #[serde(default = "default_theta_samples")]
    pub theta_samples: usize,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn to_matrix(name: &str, rows: &MatrixSpec) -> Result<CMatrix, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(invalid(format!("{name} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(format!("{name} has rows of different lengths")));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, k| {
        C64::new(rows[i][k].re, rows[i][k].im)
    }))
}

fn to_hermitian(name: &str, rows: &MatrixSpec) -> Result<HermitianMatrix, CliError> {
    let m = to_matrix(name, rows)?;
    if !m.is_square() {
        return Err(invalid(format!("{name} is not square")));
    }
    HermitianMatrix::new(m).map_err(|e| invalid(format!("{name}: {e}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(LambdaGrid::Range { start, stop, count }) = &self.lambda_grid {
            if *count < 1 {
                return Err(invalid("lambda_grid.count must be at least 1"));
            }
            if !(start < stop) {
                return Err(invalid("lambda_grid.start must be below lambda_grid.stop"));
            }
        }
        if let Some(LambdaGrid::List(v)) = &self.lambda_grid {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("lambda_grid contains a non-finite value"));
            }
        }
        if !(self.flow.eps_gap > 0.0) {
            return Err(invalid("flow.eps_gap must be positive"));
        }
        if !(self.flow.grid_ratio > 0.0 && self.flow.grid_ratio < 1.0) {
            return Err(invalid("flow.grid_ratio must lie in (0, 1)"));
        }
        if let Some(y) = self.flow.y_max {
            if !(y > 0.0) {
                return Err(invalid("flow.y_max must be positive"));
            }
        }
        if self.theta_samples == 0 {
            return Err(invalid("theta_samples must be at least 1"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model, CliError> {
        let j = to_hermitian("perturbation.j", &self.perturbation.j)?;
        let model: Model = match (&self.model, &self.perturbation.g) {
            (ModelSpec::Dense { h0 }, CouplingSpec::Matrix(g)) => {
                let h0 = to_hermitian("model.h0", h0)?;
                let g = to_matrix("perturbation.g", g)?;
                DenseModel::new(h0, g, j)
                    .map_err(|e| invalid(e.to_string()))?
                    .into()
            }
            (ModelSpec::HalflineLaplacian, CouplingSpec::Sites { sites, weights }) => {
                let w = to_matrix("perturbation.g.weights", weights)?;
                HalfLineModel::new(sites.clone(), w, j)
                    .map_err(|e| invalid(e.to_string()))?
                    .into()
            }
            (ModelSpec::Dense { .. }, _) => {
                return Err(invalid("a dense model needs perturbation.g as a matrix"))
            }
            (ModelSpec::HalflineLaplacian, _) => {
                return Err(invalid(
                    "a half-line model needs perturbation.g = {sites, weights}",
                ))
            }
        };
        if let Some(map) = self.transform {
            // surfaces a pole inside the spectrum as a configuration error
            ssf_core::models::pushforward(&model, map)
                .map_err(|e| invalid(format!("transform: {e}")))?;
        }
        Ok(model)
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            eps_gap: self.flow.eps_gap,
            max_depth: self.flow.max_depth,
            ..FlowConfig::default()
        }
    }

    pub fn det_config(&self, model: &Model) -> DetConfig {
        let mut det = DetConfig {
            ratio: self.flow.grid_ratio,
            ..DetConfig::default()
        };
        if let Some(y) = self.flow.y_max {
            det.y_max_factor = y / (1.0 + model.scale());
        }
        det
    }
}
