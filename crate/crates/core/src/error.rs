use thiserror::Error;

use crate::verify::MetricWitness;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("not a number: {0:?}")]
    BadNumber(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("matrix is not symmetric at pair ({0}, {1})")]
    Asymmetric(String, String),
    #[error("nonzero diagonal entry for {0}")]
    NonZeroDiagonal(String),
    #[error("negative distance between {0} and {1}")]
    Negative(String, String),
    #[error("duplicate label {0}")]
    DuplicateLabel(String),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("label sets differ")]
    LabelMismatch,
    #[error("invalid constrained instance: {0}")]
    InvalidInstance(String),
    #[error("{n} elements exceed the exact solver limit of {limit}")]
    ExactLimit { n: usize, limit: usize },
    #[error("{n} elements exceed the limit of {limit} for {what}")]
    TooLarge { what: &'static str, n: usize, limit: usize },
    #[error("not an ultrametric: {0}")]
    NotUltrametric(MetricWitness),
    #[error("not a tree metric: {0}")]
    NotTreeMetric(MetricWitness),
    #[error("not a constrained ultrametric: {0}")]
    NotConstrained(MetricWitness),
    #[error("tree is not {alpha}-restricted at element {element}")]
    NotAlphaRestricted { alpha: String, element: String },
    #[error("all distances from {0} are zero")]
    Degenerate(String),
    #[error("fitted tree lacks the clustering structure: {0}")]
    Structure(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
