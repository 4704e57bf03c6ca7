//! The headline quantities: `μ(θ; λ)` by spectral flow and by the index
//! formula, `ξ(λ)` by three constructions, and the oracles and defect checks
//! that tie them to eigenvalue counting.

mod mu;
mod oracles;
mod records;
mod ssf;

pub use mu::{
    jump_phases, mu_from_data, mu_via_flow, mu_via_index, FlowRoute, MuFunction, MuMethod,
    ResolventPath,
};
pub use oracles::{
    counting_ssf_oracle, gap_mu_relation_defect, invariance_defect, invariance_theta_samples,
    selfadjoint_spectral_flow, trace_formula_defect, validate_admissible_map, ConditionReport,
    OrderedJump, RealStepFunction, SelfAdjointFamily, TestFunction,
};
pub use records::{compute_record, sweep, SsfConfig, SsfRecord};
pub use ssf::{
    birman_krein_defect, determinant_trace, perturbation_determinant, scattering_matrix,
    ssf_from_mu, ssf_index_integral, ssf_index_integral_from_data, ssf_via_determinant, DetConfig,
    DetRow, DetTrace,
};

use thiserror::Error;

use crate::circle_flow::FlowError;
use crate::linalg::LinalgError;
use crate::models::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("Ξ argument singular near θ = {theta} after repeated re-sampling")]
    KernelAtZero { theta: f64 },
    #[error("μ by flow and by index disagree at λ = {lambda}")]
    MethodDisagreement { lambda: f64 },
    #[error("argument tracking failed near y = {y:e}")]
    UnwindFailure { y: f64 },
    #[error("|D − 1| = {defect:e} at y = {y_max:e} after escalation")]
    AnchorNotReached { y_max: f64, defect: f64 },
    #[error("λ = {lambda} is an eigenvalue")]
    EigenvalueAtLambda { lambda: f64 },
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("operation requires a dense model")]
    NotDense,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
}

pub type Result<T> = std::result::Result<T, EngineError>;

impl EngineError {
    /// Short marker used in the `flags` column of sweep records.
    pub fn flag(&self) -> String {
        match self {
            EngineError::Model(e) => match e {
                ModelError::BoundaryUndefined { .. } => "BoundaryUndefined",
                ModelError::BranchAtThreshold { .. } => "BranchAtThreshold",
                ModelError::NonInvertibleSymbol { .. } => "NonInvertibleSymbol",
                ModelError::PoleHit { .. } => "PoleHit",
                ModelError::AdmissibilityViolation(_) => "AdmissibilityViolation",
                ModelError::Linalg(LinalgError::KernelAtZero { .. }) => "KernelAtZero",
                _ => "ModelError",
            },
            EngineError::Linalg(LinalgError::KernelAtZero { .. })
            | EngineError::KernelAtZero { .. } => "KernelAtZero",
            EngineError::Linalg(_) => "LinalgError",
            EngineError::Flow(FlowError::RefinementLimitExceeded { .. }) => {
                "RefinementLimitExceeded"
            }
            EngineError::Flow(FlowError::EndpointDivergence { .. }) => "EndpointDivergence",
            EngineError::Flow(_) => "FlowError",
            EngineError::MethodDisagreement { .. } => "MethodDisagreement",
            EngineError::UnwindFailure { .. } => "UnwindFailure",
            EngineError::AnchorNotReached { .. } => "AnchorNotReached",
            EngineError::EigenvalueAtLambda { .. } => "EigenvalueAtLambda",
            EngineError::InvalidTestFunction(_) => "InvalidTestFunction",
            EngineError::NotDense => "NotDense",
            EngineError::InvalidWindow(_) => "InvalidWindow",
        }
        .to_string()
    }
}
