use streetbase_geom::GeomError;
use thiserror::Error;

use crate::store::FeatureId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("{0} not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("feature {layer}#{id} changed since it was read")]
    ConcurrentModification { layer: String, id: FeatureId },
    #[error("invalid feature for layer {layer}: {message}")]
    Validation { layer: String, message: String },
    #[error("{layer}: {message}")]
    Rejected { layer: String, message: String },
    #[error("trigger cascade exceeded depth limit {limit}")]
    CyclicTrigger { limit: usize },
    #[error("misconfigured: {0}")]
    Misconfigured(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("ambiguous edit: {0}")]
    AmbiguousEdit(String),
    #[error("not on road: {0}")]
    NotOnRoad(String),
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl EngineError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Geometry(GeomError::OutOfRange { .. }) => "out_of_range",
            EngineError::Geometry(_) => "invalid_geometry",
            EngineError::NotFound(_) => "not_found",
            EngineError::Conflict(_) => "conflict",
            EngineError::ConcurrentModification { .. } => "concurrent_modification",
            EngineError::Validation { .. } => "validation",
            EngineError::Rejected { .. } => "rejected",
            EngineError::CyclicTrigger { .. } => "cyclic_trigger",
            EngineError::Misconfigured(_) => "misconfigured",
            EngineError::Unsupported(_) => "unsupported",
            EngineError::AmbiguousEdit(_) => "ambiguous_edit",
            EngineError::NotOnRoad(_) => "not_on_road",
            EngineError::Parse { .. } => "parse_error",
            EngineError::Io { .. } => "io_error",
        }
    }

    pub fn layer(&self) -> Option<&str> {
        match self {
            EngineError::ConcurrentModification { layer, .. }
            | EngineError::Validation { layer, .. }
            | EngineError::Rejected { layer, .. } => Some(layer),
            _ => None,
        }
    }

    pub fn feature(&self) -> Option<FeatureId> {
        match self {
            EngineError::ConcurrentModification { id, .. } => Some(*id),
            _ => None,
        }
    }

    pub(crate) fn rejected(layer: &str, message: impl Into<String>) -> Self {
        EngineError::Rejected {
            layer: layer.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(layer: &str, message: impl Into<String>) -> Self {
        EngineError::Validation {
            layer: layer.to_string(),
            message: message.into(),
        }
    }
}
