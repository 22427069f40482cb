use thiserror::Error;

/// Errors raised anywhere in the membrane pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("quadrature order {0} out of range (1..=6)")]
    QuadratureOrder(usize),

    #[error("degenerate surface frame (det a = {det:e}, scale {scale:e})")]
    DegenerateFrame { det: f64, scale: f64 },

    #[error("curvature components were not computed for this frame")]
    MissingCurvature,

    #[error("non-positive area stretch J = {0:e}")]
    NonPositiveStretch(f64),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("stress tensor not symmetrizable (discriminant {0:e})")]
    NonSymmetrizableStress(f64),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid load case: {0}")]
    InvalidLoad(String),

    #[error("ambiguous closest-point projection: {0}")]
    AmbiguousProjection(String),

    #[error("singular bordered system: {0}")]
    SingularSystem(String),

    #[error("Newton iteration failed: {0}")]
    Divergence(String),

    #[error("load step failed after exhausting substeps at load value {value}: {reason}")]
    StepFailure { value: f64, reason: String },

    #[error("invalid reference input: {0}")]
    InvalidReference(String),

    #[error("invalid scenario: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
