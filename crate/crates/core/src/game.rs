//! Labeled prediction data, individual model weights and the simplified
//! (cutoff, weight vector) form of ensemble games and their duals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `sum(w) <= 1` for weights that were produced by
/// floating point division.
const SUM_SLACK: f64 = 1e-12;

/// Positive-class probabilities of `m` classifiers on `n` labeled points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDataset {
    model_ids: Vec<String>,
    labels: Vec<u8>,
    probabilities: Vec<Vec<f64>>,
}

impl PredictionDataset {
    /// Builds a dataset, checking shapes, binary labels and the probability range.
    pub fn new(probabilities: Vec<Vec<f64>>, labels: Vec<u8>, model_ids: Vec<String>) -> Result<Self> {
        let m = model_ids.len();
        if probabilities.is_empty() || m == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != probabilities.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: probabilities.len(),
                found: labels.len(),
            });
        }
        for (row, (probs, &label)) in probabilities.iter().zip(&labels).enumerate() {
            if probs.len() != m {
                return Err(Error::RaggedRow {
                    row: row + 1,
                    expected: m,
                    found: probs.len(),
                });
            }
            if label > 1 {
                return Err(Error::NonBinaryLabel {
                    row: row + 1,
                    value: label.to_string(),
                });
            }
            if let Some(column) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::ProbabilityOutOfRange {
                    row: row + 1,
                    column: column + 1,
                    value: probs[column],
                });
            }
        }
        Ok(Self {
            model_ids,
            labels,
            probabilities,
        })
    }

    /// Same as [`PredictionDataset::new`] with models named `p_1..p_m`.
    pub fn with_default_ids(probabilities: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let m = probabilities.first().map_or(0, Vec::len);
        Self::new(probabilities, labels, default_model_ids(m))
    }

    pub fn n_points(&self) -> usize {
        self.labels.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[Vec<f64>] {
        &self.probabilities
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probabilities[i]
    }

    /// Individual model weights of point `i`.
    pub fn point_weights(&self, i: usize) -> Vec<f64> {
        // rows were validated on construction
        score_point(&self.probabilities[i], self.labels[i]).expect("validated row")
    }
}

/// `p_1, ..., p_m`
pub fn default_model_ids(m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("p_{j}")).collect()
}

/// Converts positive-class probabilities into individual model weights:
/// `p_j / m` for a positive label and `(1 - p_j) / m` for a negative one.
///
/// Errors name the offending (1-based) column.
pub fn score_point(probabilities: &[f64], label: u8) -> Result<Vec<f64>> {
    let m = probabilities.len();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    if label > 1 {
        return Err(Error::NonBinaryLabel {
            row: 1,
            value: label.to_string(),
        });
    }
    let scale = m as f64;
    probabilities
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange {
                    row: 1,
                    column: j + 1,
                    value: p,
                });
            }
            Ok(if label == 1 { p / scale } else { (1.0 - p) / scale })
        })
        .collect()
}

/// Value of the grand coalition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub won: bool,
    pub total_weight: f64,
}

/// An ensemble game in simplified form: a cutoff and one weight per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedGame {
    cutoff: f64,
    weights: Vec<f64>,
}

impl SimplifiedGame {
    /// Validates `0 <= w_j <= 1/m`, `sum(w) <= 1` and `0 <= cutoff <= 1`.
    pub fn new(weights: Vec<f64>, cutoff: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(0.0..=1.0).contains(&cutoff) {
            return Err(Error::CutoffOutOfRange(cutoff));
        }
        let bound = 1.0 / weights.len() as f64;
        if let Some(index) = weights.iter().position(|w| !(0.0..=bound).contains(w)) {
            return Err(Error::WeightOutOfBounds {
                index,
                value: weights[index],
                bound,
            });
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + SUM_SLACK {
            return Err(Error::WeightSumExceedsOne(total));
        }
        Ok(Self { cutoff, weights })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_players(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Coalition value: 1 when the weight reaches the cutoff (inclusive).
    pub fn wins(&self, coalition_weight: f64) -> bool {
        coalition_weight >= self.cutoff
    }

    pub fn outcome(&self) -> GameOutcome {
        let total_weight = self.total_weight();
        GameOutcome {
            won: self.wins(total_weight),
            total_weight,
        }
    }

    /// `v(S)` for a coalition given as a bit mask over player indices.
    pub fn value_of(&self, coalition: u64) -> f64 {
        let weight: f64 = self
            .weights
            .iter()
            .enumerate()
            .filter(|(j, _)| coalition >> j & 1 == 1)
            .map(|(_, w)| w)
            .sum();
        if self.wins(weight) {
            1.0
        } else {
            0.0
        }
    }

    /// The dual game `(1 - cutoff, [1/m - w_1, ..., 1/m - w_m])`.
    pub fn dualize(&self) -> SimplifiedGame {
        let share = 1.0 / self.weights.len() as f64;
        SimplifiedGame {
            cutoff: 1.0 - self.cutoff,
            weights: self.weights.iter().map(|w| share - w).collect(),
        }
    }

    pub fn moments(&self) -> WeightMoments {
        weight_moments(&self.weights)
    }
}

/// Population mean and variance of a weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMoments {
    pub mean: f64,
    pub variance: f64,
}

impl WeightMoments {
    /// Moments of the dual weights: the mean reflects around `1/(2m)` and the
    /// variance is unchanged.
    pub fn dual(&self, m: usize) -> WeightMoments {
        WeightMoments {
            mean: 1.0 / m as f64 - self.mean,
            variance: self.variance,
        }
    }
}

/// Mean and population variance (divisor `m`).
pub fn weight_moments(weights: &[f64]) -> WeightMoments {
    let m = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / m;
    let variance = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / m;
    WeightMoments { mean, variance }
}
