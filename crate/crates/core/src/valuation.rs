//! Dataset-level valuation: one game per labeled point (or its dual when the
//! ensemble misclassifies the point), conditional averages, Shapley entropy
//! and the sample-size calculators.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PredictionDataset, SimplifiedGame};
use crate::solvers::{solve, ShapleyVector, SolverConfig, SolverTag};

/// Version tag carried by every JSON artifact.
pub const SCHEMA: &str = "ensemble-shapley/1";

/// Shapley vectors of one data point. Exactly one of the two can be nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointValuation {
    pub index: usize,
    pub classified: bool,
    pub ensemble_shapley: ShapleyVector,
    pub dual_shapley: ShapleyVector,
}

impl PointValuation {
    fn normalized(&self) -> Self {
        Self {
            index: self.index,
            classified: self.classified,
            ensemble_shapley: self.ensemble_shapley.normalized(),
            dual_shapley: self.dual_shapley.normalized(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Averaged conditional Shapley vectors. Empty conditions are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalAverages {
    pub avg_positive: Option<Vec<f64>>,
    pub avg_negative: Option<Vec<f64>>,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Averages ensemble vectors over classified points and dual vectors over
/// misclassified points, summing in ascending point order.
pub fn average_conditional(valuations: &[PointValuation]) -> Result<ConditionalAverages> {
    let first = valuations.first().ok_or(Error::EmptyDataset)?;
    let m = first.ensemble_shapley.len();
    let mut positive = vec![0.0; m];
    let mut negative = vec![0.0; m];
    let (mut n_positive, mut n_negative) = (0, 0);
    let mut ordered: Vec<&PointValuation> = valuations.iter().collect();
    ordered.sort_by_key(|p| p.index);
    for point in ordered {
        let (acc, count, vector) = if point.classified {
            (&mut positive, &mut n_positive, &point.ensemble_shapley)
        } else {
            (&mut negative, &mut n_negative, &point.dual_shapley)
        };
        if vector.len() != m {
            return Err(Error::LengthMismatch {
                what: "shapley vector",
                expected: m,
                found: vector.len(),
            });
        }
        acc.iter_mut().zip(&vector.values).for_each(|(a, v)| *a += v);
        *count += 1;
    }
    let mean = |sum: Vec<f64>, count: usize| {
        (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect::<Vec<_>>())
    };
    Ok(ConditionalAverages {
        avg_positive: mean(positive, n_positive),
        avg_negative: mean(negative, n_negative),
        n_positive,
        n_negative,
    })
}

/// Entropy (natural log) of a nonnegative vector after rescaling it to a
/// distribution. Lies in `[0, ln m]`.
pub fn shapley_entropy(phi_bar: &[f64]) -> Result<f64> {
    if let Some(index) = phi_bar.iter().position(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::NegativeComponent {
            index,
            value: phi_bar[index],
        });
    }
    let total: f64 = phi_bar.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::UndefinedEntropy);
    }
    let entropy: f64 = phi_bar
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    // + 0.0 turns a -0.0 from a single unit component into 0.0
    Ok(entropy.clamp(0.0, (phi_bar.len() as f64).ln()) + 0.0)
}

/// Averages and entropies for one variant (raw or normalized) of the point vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSummary {
    pub avg_positive: Option<Vec<f64>>,
    pub avg_negative: Option<Vec<f64>>,
    pub entropy_positive: Option<f64>,
    pub entropy_negative: Option<f64>,
}

impl ConditionalSummary {
    fn from_averages(avg: &ConditionalAverages) -> Self {
        let entropy = |v: &Option<Vec<f64>>| v.as_deref().and_then(|v| shapley_entropy(v).ok());
        Self {
            entropy_positive: entropy(&avg.avg_positive),
            entropy_negative: entropy(&avg.avg_negative),
            avg_positive: avg.avg_positive.clone(),
            avg_negative: avg.avg_negative.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAndNormalized {
    pub raw: ConditionalSummary,
    pub normalized: ConditionalSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub cutoff: f64,
    pub stability: f64,
    pub permutations: usize,
    pub seed: u64,
    pub normalize: bool,
}

/// Dataset-level valuation summary. The top-level averages and entropies are
/// the variant selected by `config.normalize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationReport {
    pub schema: String,
    pub model_ids: Vec<String>,
    pub solver: SolverTag,
    pub config: RunEcho,
    pub n_points: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub avg_positive: Option<Vec<f64>>,
    pub avg_negative: Option<Vec<f64>>,
    pub entropy_positive: Option<f64>,
    pub entropy_negative: Option<f64>,
    pub raw_and_normalized: RawAndNormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    pub points: Vec<PointValuation>,
    pub report: ValuationReport,
}

/// Values one data point: solve its ensemble game when the grand coalition
/// wins, otherwise solve the dual game. Vectors are raw (unnormalized).
pub fn value_point(
    weights: Vec<f64>,
    index: usize,
    cutoff: f64,
    solver: SolverTag,
    config: &SolverConfig,
) -> Result<PointValuation> {
    let m = weights.len();
    let game = SimplifiedGame::new(weights, cutoff)?;
    let raw = config.raw();
    let zeros = ShapleyVector::zeros(m, solver, false);
    if game.outcome().won {
        Ok(PointValuation {
            index,
            classified: true,
            ensemble_shapley: solve(&game, solver, &raw, index as u64)?,
            dual_shapley: zeros,
        })
    } else {
        Ok(PointValuation {
            index,
            classified: false,
            ensemble_shapley: zeros,
            dual_shapley: solve(&game.dualize(), solver, &raw, index as u64)?,
        })
    }
}

/// Runs the full pipeline with parallel per-point solving.
pub fn troupe(dataset: &PredictionDataset, cutoff: f64, config: &SolverConfig, solver: SolverTag) -> Result<Valuation> {
    troupe_with(dataset, cutoff, config, solver, Execution::Parallel)
}

pub fn troupe_with(
    dataset: &PredictionDataset,
    cutoff: f64,
    config: &SolverConfig,
    solver: SolverTag,
    execution: Execution,
) -> Result<Valuation> {
    config.validate()?;
    if !(0.0..=1.0).contains(&cutoff) {
        return Err(Error::CutoffOutOfRange(cutoff));
    }
    let n = dataset.n_points();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let one = |i: usize| value_point(dataset.point_weights(i), i, cutoff, solver, config);
    let raw_points: Vec<PointValuation> = match execution {
        Execution::Sequential => (0..n).map(one).collect::<Result<_>>()?,
        Execution::Parallel => (0..n).into_par_iter().map(one).collect::<Result<_>>()?,
    };
    let normalized_points: Vec<PointValuation> = raw_points.iter().map(PointValuation::normalized).collect();

    let raw_avg = average_conditional(&raw_points)?;
    let norm_avg = average_conditional(&normalized_points)?;
    let variants = RawAndNormalized {
        raw: ConditionalSummary::from_averages(&raw_avg),
        normalized: ConditionalSummary::from_averages(&norm_avg),
    };
    let chosen = if config.normalize {
        &variants.normalized
    } else {
        &variants.raw
    };
    let report = ValuationReport {
        schema: SCHEMA.to_string(),
        model_ids: dataset.model_ids().to_vec(),
        solver,
        config: RunEcho {
            cutoff,
            stability: config.stability,
            permutations: config.permutations,
            seed: config.seed,
            normalize: config.normalize,
        },
        n_points: n,
        n_positive: raw_avg.n_positive,
        n_negative: raw_avg.n_negative,
        avg_positive: chosen.avg_positive.clone(),
        avg_negative: chosen.avg_negative.clone(),
        entropy_positive: chosen.entropy_positive,
        entropy_negative: chosen.entropy_negative,
        raw_and_normalized: variants,
    };
    let points = if config.normalize {
        normalized_points
    } else {
        raw_points
    };
    Ok(Valuation { points, report })
}

/// Inputs of the concentration-bound calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParameters {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

impl BoundParameters {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidParameter("n and m must be positive".into()));
        }
        check_epsilon(self.epsilon)?;
        check_alpha(self.alpha)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Tail probability bound on the deviation of the average approximation
/// error: `2 exp(-sqrt(n^2 m eps^4 pi / 8))`. Values above 1 are vacuous.
pub fn error_bound(n: usize, m: usize, epsilon: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("n and m must be positive".into()));
    }
    check_epsilon(epsilon)?;
    let (n, m) = (n as f64, m as f64);
    Ok(2.0 * (-(n * n * m * epsilon.powi(4) * PI / 8.0).sqrt()).exp())
}

/// Smallest `n` with `n >= sqrt(8 ln^2(alpha/2) / (eps^4 m pi))`.
pub fn required_sample_size(m: usize, epsilon: f64, alpha: f64) -> Result<u64> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    check_epsilon(epsilon)?;
    check_alpha(alpha)?;
    let log = (alpha / 2.0).ln();
    let n = (8.0 * log * log / (epsilon.powi(4) * m as f64 * PI)).sqrt();
    Ok(n.ceil() as u64)
}

/// Per-game EMC approximation error bound `sqrt(8 / (m pi))`.
pub fn emc_error_bound(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    Ok((8.0 / (m as f64 * PI)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema: String,
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub required_n: u64,
    pub bound_at_required_n: f64,
    pub emc_error_bound: f64,
    /// Bound at a caller-supplied `n`, if any.
    pub n: Option<usize>,
    pub bound_at_n: Option<f64>,
    pub vacuous_at_n: Option<bool>,
}

pub fn bound_report(m: usize, epsilon: f64, alpha: f64, n: Option<usize>) -> Result<BoundReport> {
    let required_n = required_sample_size(m, epsilon, alpha)?;
    let bound_at_required_n = error_bound(required_n as usize, m, epsilon)?;
    let bound_at_n = n.map(|n| error_bound(n, m, epsilon)).transpose()?;
    Ok(BoundReport {
        schema: SCHEMA.to_string(),
        m,
        epsilon,
        alpha,
        required_n,
        bound_at_required_n,
        emc_error_bound: emc_error_bound(m)?,
        n,
        bound_at_n,
        vacuous_at_n: bound_at_n.map(|b| b > 1.0),
    })
}
