use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bump geometry: {reason}")]
    Geometry { reason: String },

    #[error("invalid bump shape: {reason}")]
    Shape { reason: String },

    #[error("domain error: {reason}")]
    Domain { reason: String },

    #[error("spectral parameter inside the central gap: lambda = {lambda} requires |lambda| > 1")]
    GapParameter { lambda: f64 },

    #[error("kappa = 0 lies in the central gap")]
    ZeroKappa,

    #[error("degenerate solution: the zero vector has no Pruefer representation")]
    DegenerateSolution,

    #[error("singular parameter: lambda = H - 1 (coefficient 1 + lambda - H vanishes)")]
    SingularParameter,

    #[error("transfer matrix inconsistent: det = {det} deviates from 1 by more than {tol}")]
    InconsistentMatrix { det: f64, tol: f64 },

    #[error("integration failed: {reason}")]
    Integration { reason: String },

    #[error(
        "distance selection failed after {doublings} doublings: best gap {best_gap} > tol {tol}"
    )]
    SelectionFailure {
        doublings: u32,
        best_gap: f64,
        tol: f64,
    },

    #[error("construction aborted at stage {stage}: {source}")]
    ConstructionAborted {
        stage: usize,
        #[source]
        source: Box<Error>,
        completed: Vec<crate::construction::ConstructionStage>,
    },

    #[error("growth schedule error: {reason}")]
    Schedule { reason: String },

    #[error("channel configuration error: {reason}")]
    ChannelConfig { reason: String },

    #[error("resolvent parameter must have a nonzero imaginary part")]
    ResolventParameter,

    #[error("config error in field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(reason: impl Into<String>) -> Self {
        Error::Domain {
            reason: reason.into(),
        }
    }

    pub(crate) fn geometry(reason: impl Into<String>) -> Self {
        Error::Geometry {
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(reason: impl Into<String>) -> Self {
        Error::Shape {
            reason: reason.into(),
        }
    }

    pub(crate) fn integration(reason: impl Into<String>) -> Self {
        Error::Integration {
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
