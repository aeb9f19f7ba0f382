use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FmplError {
    #[error("input error: {0}")]
    Input(String),

    #[error("non-numeric cell {value:?} at row {row}, column {col}")]
    NonNumeric { row: usize, col: usize, value: String },

    #[error("ragged table: row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },

    #[error("column {col} is constant and cannot be standardized")]
    ConstantColumn { col: usize },

    #[error("submatrix on nodes {subset:?} is not positive definite")]
    NotPositiveDefinite { subset: Vec<usize> },

    #[error("node {node}: blanket of size {size} needs n >= {}, have n = {n}", size + 2)]
    BlanketTooLarge { node: usize, size: usize, n: usize },

    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<FmplError>,
    },

    #[error("{} node(s) failed; first: {}", errors.len(), errors[0])]
    Nodes { errors: Vec<FmplError> },

    #[error("parent sets contain a directed cycle through node {node}")]
    Cycle { node: usize },

    #[error("dimension mismatch: expected p = {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("did not converge within {max_iter} iterations (residual {residual:.3e})")]
    NotConverged { max_iter: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl FmplError {
    /// Wraps the error with the index of the node being processed.
    pub fn at_node(self, node: usize) -> Self {
        match self {
            FmplError::Node { .. } => self,
            other => FmplError::Node { node, source: Box::new(other) },
        }
    }

    /// Process exit code: 2 input error, 3 numerical failure, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            FmplError::Node { source, .. } => source.exit_code(),
            FmplError::Nodes { errors } => errors.first().map_or(2, FmplError::exit_code),
            FmplError::NotPositiveDefinite { .. } | FmplError::BlanketTooLarge { .. } => 3,
            FmplError::NotConverged { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, FmplError>;
