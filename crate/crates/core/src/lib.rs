//! Shapley-value valuation of binary classifiers in voting ensembles.
//!
//! Every labeled data point defines a weighted voting game among the
//! classifiers: model `j` votes with weight `P(correct label | model j) / m`
//! and a coalition wins when its summed weight reaches the cutoff. Points the
//! ensemble gets wrong are valued through the dual game, which attributes the
//! misclassification instead. [`valuation::troupe`] solves every point's game
//! and averages the per-point values conditionally on the outcome.

pub mod error;
pub mod experiments;
pub mod game;
pub mod gaussian;
pub mod io;
pub mod solvers;
pub mod valuation;

pub use error::{Error, Result};
pub use game::{score_point, weight_moments, GameOutcome, PredictionDataset, SimplifiedGame, WeightMoments};
pub use solvers::{
    compare_solvers, emc_shapley, exact_shapley, mc_shapley, mle_shapley, solve, ShapleyVector, SolverConfig, SolverTag,
};
pub use valuation::{
    average_conditional, emc_error_bound, error_bound, required_sample_size, shapley_entropy, troupe, PointValuation,
    ValuationReport,
};
