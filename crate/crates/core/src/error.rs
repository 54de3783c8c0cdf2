use thiserror::Error;

use crate::manifold::Point;
use crate::optim::RgdTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    #[error("point violates manifold constraints: {0}")]
    InvalidPoint(String),

    #[error("outside the domain of the operation: {0}")]
    Domain(String),

    #[error("domain error at point {index}: {source}")]
    DomainAt {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("Frechet mean did not converge after {iterations} iterations (tangent mean norm {residual:.3e})")]
    MeanNoConvergence {
        iterations: usize,
        residual: f64,
        last: Box<Point>,
    },

    #[error("gradient descent did not converge after {} iterations", trace.grad_norms.len())]
    RgdNoConvergence { trace: Box<RgdTrace> },

    #[error("objective returned a non-finite value at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("SVM solver did not converge (final KKT gap {gap:.3e})")]
    SvmNoConvergence { gap: f64 },

    #[error("degenerate neighborhood at point {0}: reconstruction Gram matrix is singular")]
    DegenerateNeighborhood(usize),

    #[error("neighbor graph is disconnected; component sizes {0:?}")]
    DisconnectedGraph(Vec<usize>),

    #[error("no positive eigenvalues in the centered Gram matrix")]
    NoPositiveSpectrum,

    #[error("no training neighbor with positive kernel weight")]
    NoNeighbors,

    #[error("scatter matrix is singular even after regularization")]
    SingularScatter,

    #[error("unknown dataset kind '{0}'")]
    UnknownKind(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("label column '{0}' not found")]
    MissingLabelColumn(String),

    #[error("class {class} has {count} samples; at least 2 are required")]
    ClassTooSmall { class: usize, count: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, index: usize) -> Self {
        match self {
            Error::DomainAt { .. } => self,
            other => Error::DomainAt {
                index,
                source: Box::new(other),
            },
        }
    }
}
