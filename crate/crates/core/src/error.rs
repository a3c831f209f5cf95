use thiserror::Error;

/// Errors raised while parsing, validating or evaluating operators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("function `{name}` expects {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: String },

    #[error("invalid spec at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("conjugator C is not orthogonal (max |C^T C - I| = {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("point {0:?} lies on a coordinate hyperplane")]
    Hyperplane(Vec<f64>),

    #[error("eigenvalue a_{axis}(u) vanishes at node {node} (u = {u}) where K(u) != 0")]
    ZeroEigenvalue { node: usize, axis: usize, u: f64 },

    #[error("non-integrable singularity on [{a}, {b}]: refinement did not converge within depth {depth}")]
    NonIntegrable { a: f64, b: f64, depth: usize },

    #[error("non-finite integrand value at node {node}")]
    NonFinite { node: usize },

    #[error("dilation family is not positive definite (node {node} has sign class {class:#b})")]
    NotPositiveDefinite { node: usize, class: usize },

    #[error("conjugator mismatch between composed operators")]
    ConjugatorMismatch,

    #[error("symbol is singular at s = {s:?} (|det| = {det:e})")]
    Singular { s: Vec<f64>, det: f64 },

    #[error("symbol matrix failed the normality check (defect {defect:e})")]
    NotNormal { defect: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
