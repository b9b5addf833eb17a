use thiserror::Error;

/// Errors produced by matrix validation, tracking and clustering.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected square with {expected} ids")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("asymmetric matrix: |w[{i}][{j}] - w[{j}][{i}]| = {delta:.3e} exceeds tolerance")]
    AsymmetricMatrix { i: usize, j: usize, delta: f64 },
    #[error("negative dissimilarity {value} at ({i}, {j})")]
    NegativeDissimilarity { i: usize, j: usize, value: f64 },
    #[error("dissimilarity diagonal entry {value} at index {i} is not zero")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("duplicate object id {0:?}")]
    DuplicateId(String),
    #[error("non-finite entry {value} at ({i}, {j})")]
    NonFiniteEntry { i: usize, j: usize, value: f64 },
    #[error("no objects shared between the previous and current step")]
    EmptyIntersection,
    #[error("forgetting factor {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("object ids do not match: {0}")]
    IdMismatch(String),
    #[error("proximity kinds do not match: {previous} followed by {current}")]
    KindMismatch {
        previous: &'static str,
        current: &'static str,
    },
    #[error("operation requires a {expected} matrix, got {got}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("k = {k} is outside the valid range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("empty candidate range for the number of clusters")]
    EmptyRange,
    #[error("matrix is not positive semidefinite: pivot {pivot:.3e} at index {index}")]
    NotPsd { index: usize, pivot: f64 },
    #[error("eigensolver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("assignment weight matrix is not square")]
    NonSquare,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("label {label} is outside the {k} declared clusters")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
