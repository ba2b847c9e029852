use std::path::PathBuf;

use crate::graph::VariableKey;

/// Errors produced by the simulator and its estimation back end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate pointing geometry at plan step {step}: {reason}")]
    DegeneratePlanStep { step: usize, reason: String },

    #[error("landmark is behind the camera (depth {depth:.3e} m)")]
    BehindCamera { depth: f64 },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("unknown variable {0}")]
    UnknownVariable(VariableKey),

    #[error("information matrix is singular or indefinite (pivot {pivot} of {dim})")]
    SingularInformation { pivot: usize, dim: usize },

    #[error("normal equations are rank deficient: null-space dimension {null_space_dim}")]
    RankDeficient { null_space_dim: usize },

    #[error("no candidate produced an informative plan ({candidates} evaluated)")]
    NoInformativePlan { candidates: usize },

    #[error("degenerate scene: only {observed} landmarks observed (need at least {required})")]
    DegenerateScene { observed: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
