use thiserror::Error;

use crate::model::NodePath;

/// A violated invariant on generator, kernel or sampler parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("d must be at least 1, got {0}")]
    Dimension(usize),
    #[error("alpha0 must be positive, got {0}")]
    Alpha0(f64),
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("gamma must be positive, got {0}")]
    Gamma(f64),
    #[error("p must be positive, got {0}")]
    P(f64),
    #[error("q must be positive, got {0}")]
    Q(f64),
    #[error("sigma bounds must satisfy 0 <= sigma_min < sigma_max, got sigma_min={min}, sigma_max={max}")]
    SigmaBounds { min: f64, max: f64 },
    #[error("max_depth must be at least 1, got {0}")]
    MaxDepth(usize),
    #[error("beta shape parameter must be positive, got {0}")]
    BetaShape(f64),
    #[error("gaussian sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("scale must be positive in every dimension, got {value} in dimension {dim}")]
    Scale { dim: usize, value: f64 },
    #[error("replicate count must be at least 1")]
    Replicates,
    #[error("insertion point must lie strictly inside (0, 1), got {0}")]
    Insertion(f64),
}

impl ParamError {
    /// Name of the offending field.
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::Dimension(_) => "d",
            ParamError::Alpha0(_) => "alpha0",
            ParamError::Lambda(_) => "lambda",
            ParamError::Gamma(_) => "gamma",
            ParamError::P(_) => "p",
            ParamError::Q(_) => "q",
            ParamError::SigmaBounds { .. } => "sigma_min/sigma_max",
            ParamError::MaxDepth(_) => "max_depth",
            ParamError::BetaShape(_) => "shape",
            ParamError::NegativeSigma(_) => "sigma",
            ParamError::Scale { .. } => "scale",
            ParamError::Replicates => "replicates",
            ParamError::Insertion(_) => "insertion",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("descent below {path} would exceed max_depth={max_depth}")]
    DepthLimit { max_depth: usize, path: NodePath },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("inconsistent input: {0}")]
    Consistency(String),
    #[error("cannot aggregate an empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
