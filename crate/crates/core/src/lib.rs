//! L0 fitting of tree metrics and ultrametrics.
//!
//! The cost of a fit is the number of pairs on which it disagrees with the
//! input. Tree fitting reduces to constrained ultrametric fitting around
//! each anchor element, which in turn reduces to plain ultrametric fitting
//! through any [`UltrametricFitter`]. All arithmetic is exact.

pub mod constrained;
pub mod error;
pub mod exec;
pub mod instances;
pub mod matrix;
pub mod problem;
pub mod report;
pub mod tree;
pub mod treefit;
pub mod ultrafit;
pub mod value;
pub mod verify;

pub use constrained::{fit_constrained, fit_constrained_exact, squeeze, squeeze_ultrametric};
pub use error::{Error, Result};
pub use exec::Execution;
pub use matrix::{l0_distance, DistanceMatrix, Labels};
pub use problem::{ConstrainedInstance, TreeMetricMatrix, UltrametricMatrix};
pub use report::{Certificate, FitReport};
pub use tree::{matrix_to_tree, parse_newick, serialize_newick, ultrametric_to_dendrogram, ExplicitTree};
pub use treefit::{alpha_restrict, centroid_quasimetric, fit_tree, restricted_instance, CentroidQuasimetric};
pub use ultrafit::{
    fit_ultrametric_exact, fit_ultrametric_heuristic, solve, SolverKind, UltraSolverSpec, UltrametricFitter,
};
pub use value::Value;
pub use verify::{check_constrained, check_tree_metric, check_ultrametric, MetricWitness, WitnessKind};
