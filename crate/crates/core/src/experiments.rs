//! Desk-scale studies: synthetic ensembles, adversarial noise injection,
//! forward ensemble selection by Shapley ordering, ranking metrics and
//! runtime sweeps.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{default_model_ids, PredictionDataset};
use crate::solvers::{SolverConfig, SolverTag};
use crate::valuation::{troupe, troupe_with, Execution, SCHEMA};

/// ChaCha stream of the synthetic noise of model `j` is `j + 1`; stream 0
/// holds the labels.
const SYNTHETIC_STREAM: u64 = 1;
/// Corruption noise of model `j` lives on stream `CORRUPTION_STREAM + j`, so
/// it never replays the synthetic noise drawn with the same seed.
const CORRUPTION_STREAM: u64 = 1 << 32;

/// Uniform noise addressed by (point, model): each model owns a ChaCha stream
/// and point `i` reads the `i`-th draw of it, so the value at a cell never
/// depends on how much noise other cells consumed.
fn noise_column(seed: u64, stream: u64, n: usize) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(move |_| rng.gen::<f64>())
}

/// Recipe for a synthetic ensemble whose model `j` mixes a label signal with
/// uniform noise at ratio `quality_mix[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_points: usize,
    pub quality_mix: Vec<f64>,
    pub base_signal: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn m_models(&self) -> usize {
        self.quality_mix.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 || self.quality_mix.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(j) = self.quality_mix.iter().position(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidParameter(format!(
                "noise ratio {} of model {} is outside [0, 1]",
                self.quality_mix[j],
                j + 1
            )));
        }
        if !(self.base_signal > 0.5 && self.base_signal <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "base signal must lie in (0.5, 1], got {}",
                self.base_signal
            )));
        }
        Ok(())
    }
}

/// `p_ij = (1 - l_j) b_i + l_j u_ij` with `b_i = s` on positives, `1 - s` on
/// negatives and `u_ij ~ U(0, 1)`. Labels are fair coin flips.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PredictionDataset> {
    spec.validate()?;
    let n = spec.n_points;
    let mut label_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    label_rng.set_stream(0);
    let labels: Vec<u8> = (0..n).map(|_| u8::from(label_rng.gen::<bool>())).collect();
    let mut rows = vec![Vec::with_capacity(spec.m_models()); n];
    for (j, &lambda) in spec.quality_mix.iter().enumerate() {
        for (i, u) in noise_column(spec.seed, SYNTHETIC_STREAM + j as u64, n).enumerate() {
            let base = if labels[i] == 1 {
                spec.base_signal
            } else {
                1.0 - spec.base_signal
            };
            rows[i].push(((1.0 - lambda) * base + lambda * u).clamp(0.0, 1.0));
        }
    }
    PredictionDataset::new(rows, labels, default_model_ids(spec.m_models()))
}

/// Replaces each adversarial column by `(1 - r) p + r u` with `u ~ U(0, 1)`.
pub fn corrupt(dataset: &PredictionDataset, adversarial: &[usize], ratio: f64, seed: u64) -> Result<PredictionDataset> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!(
            "noise ratio {ratio} is outside [0, 1]"
        )));
    }
    let m = dataset.n_models();
    if let Some(&bad) = adversarial.iter().find(|&&j| j >= m) {
        return Err(Error::InvalidParameter(format!(
            "model index {bad} out of range for {m} models"
        )));
    }
    let mut rows = dataset.probabilities().to_vec();
    for &j in adversarial {
        for (i, u) in noise_column(seed, CORRUPTION_STREAM + j as u64, rows.len()).enumerate() {
            let p = rows[i][j];
            rows[i][j] = ((1.0 - ratio) * p + ratio * u).clamp(0.0, 1.0);
        }
    }
    PredictionDataset::new(rows, dataset.labels().to_vec(), dataset.model_ids().to_vec())
}

/// Rank-based (Mann-Whitney) AUC; tied scores contribute one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end+1 share their average
        let avg_rank = (start + end + 2) as f64 / 2.0;
        let positives = order[start..=end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum += avg_rank * positives as f64;
        start = end + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

fn accuracy(scores: &[f64], labels: &[u8], cutoff: f64) -> f64 {
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| u8::from(s >= cutoff) == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Ensemble probability of every point using the models in `members`,
/// averaged in ascending model order.
fn ensemble_scores(dataset: &PredictionDataset, members: &[usize]) -> Vec<f64> {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let k = sorted.len() as f64;
    dataset
        .probabilities()
        .iter()
        .map(|row| sorted.iter().map(|&j| row[j]).sum::<f64>() / k)
        .collect()
}

/// Accuracy and AUC of the averaged-probability ensemble of `members`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScore {
    pub accuracy: f64,
    pub auc: Option<f64>,
}

pub fn score_ensemble(dataset: &PredictionDataset, members: &[usize], cutoff: f64) -> EnsembleScore {
    let scores = ensemble_scores(dataset, members);
    EnsembleScore {
        accuracy: accuracy(&scores, dataset.labels(), cutoff),
        auc: auc(&scores, dataset.labels()).ok(),
    }
}

/// Model indices by descending value; ties keep ascending index order.
pub fn shapley_ordering(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Scores of every prefix `1..=m` of `ordering`.
pub fn evaluate_ordering(dataset: &PredictionDataset, ordering: &[usize], cutoff: f64) -> Vec<EnsembleScore> {
    (1..=ordering.len())
        .map(|k| score_ensemble(dataset, &ordering[..k], cutoff))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub schema: String,
    pub shapley: Vec<f64>,
    pub ordering: Vec<usize>,
    /// Entry `k - 1` scores the top-`k` subensemble.
    pub subensemble_scores: Vec<EnsembleScore>,
}

impl SelectionTrace {
    pub fn mean_auc(&self) -> Option<f64> {
        mean_auc(&self.subensemble_scores)
    }
}

pub fn mean_auc(scores: &[EnsembleScore]) -> Option<f64> {
    let aucs: Option<Vec<f64>> = scores.iter().map(|s| s.auc).collect();
    aucs.map(|a| a.iter().sum::<f64>() / a.len() as f64)
}

/// Ranks models by their average Shapley value in correctly classified
/// points of `valuation_split`, then scores growing top-`k` subensembles on
/// `test_split`.
pub fn forward_selection(
    valuation_split: &PredictionDataset,
    test_split: &PredictionDataset,
    cutoff: f64,
    config: &SolverConfig,
    solver: SolverTag,
) -> Result<SelectionTrace> {
    if valuation_split.n_models() != test_split.n_models() {
        return Err(Error::LengthMismatch {
            what: "test split models",
            expected: valuation_split.n_models(),
            found: test_split.n_models(),
        });
    }
    let report = troupe(valuation_split, cutoff, config, solver)?.report;
    let shapley = report
        .avg_positive
        .ok_or_else(|| Error::InvalidParameter("no correctly classified points in the valuation split".into()))?;
    let ordering = shapley_ordering(&shapley);
    let subensemble_scores = evaluate_ordering(test_split, &ordering, cutoff);
    Ok(SelectionTrace {
        schema: SCHEMA.to_string(),
        shapley,
        ordering,
        subensemble_scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub mean: f64,
    pub standard_error: f64,
}

impl GroupStat {
    /// Mean of `values` and its standard error `sd / sqrt(len)` (sample sd).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let standard_error = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, standard_error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialRow {
    pub ratio: f64,
    pub adversarial: GroupStat,
    pub honest: GroupStat,
    /// `sqrt(se_adv^2 + se_honest^2)`
    pub pooled_standard_error: f64,
    pub n_positive: usize,
}

impl AdversarialRow {
    /// Honest minus adversarial mean, in pooled standard errors.
    pub fn separation(&self) -> f64 {
        (self.honest.mean - self.adversarial.mean) / self.pooled_standard_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialStudy {
    pub schema: String,
    pub adversarial_models: Vec<usize>,
    pub rows: Vec<AdversarialRow>,
}

/// The first half of the models (10 of 20 by default).
pub fn default_adversarial_set(m: usize) -> Vec<usize> {
    (0..m / 2).collect()
}

/// For every noise ratio: corrupt the adversarial columns, value the ensemble
/// and summarize the average Shapley values in correct classifications per group.
pub fn adversarial_study(
    dataset: &PredictionDataset,
    adversarial: &[usize],
    ratios: &[f64],
    cutoff: f64,
    config: &SolverConfig,
    solver: SolverTag,
) -> Result<AdversarialStudy> {
    let m = dataset.n_models();
    let mut is_adversarial = vec![false; m];
    for &j in adversarial {
        *is_adversarial
            .get_mut(j)
            .ok_or_else(|| Error::InvalidParameter(format!("model index {j} out of range for {m} models")))? = true;
    }
    if is_adversarial.iter().all(|&a| a) || is_adversarial.iter().all(|&a| !a) {
        return Err(Error::InvalidParameter(
            "both the adversarial and the honest group must be non-empty".into(),
        ));
    }
    let rows = ratios
        .iter()
        .map(|&ratio| {
            let corrupted = corrupt(dataset, adversarial, ratio, config.seed)?;
            let report = troupe(&corrupted, cutoff, config, solver)?.report;
            let phi = report.avg_positive.ok_or_else(|| {
                Error::InvalidParameter(format!("no correctly classified points at noise ratio {ratio}"))
            })?;
            let group = |wanted: bool| -> Vec<f64> {
                phi.iter()
                    .zip(&is_adversarial)
                    .filter(|(_, &a)| a == wanted)
                    .map(|(&v, _)| v)
                    .collect()
            };
            let adversarial = GroupStat::of(&group(true));
            let honest = GroupStat::of(&group(false));
            Ok(AdversarialRow {
                ratio,
                pooled_standard_error: adversarial.standard_error.hypot(honest.standard_error),
                adversarial,
                honest,
                n_positive: report.n_positive,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut adversarial_models = adversarial.to_vec();
    adversarial_models.sort_unstable();
    adversarial_models.dedup();
    Ok(AdversarialStudy {
        schema: SCHEMA.to_string(),
        adversarial_models,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub m: usize,
    pub solver: SolverTag,
    pub runs: usize,
    pub mean_seconds: f64,
    pub per_point_seconds: f64,
}

/// Noise ratios spread evenly over `[0, 0.9]`, used by the runtime sweep.
pub fn graded_quality_mix(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    (0..m).map(|j| 0.9 * j as f64 / (m - 1) as f64).collect()
}

/// Mean single-threaded pipeline wall time over `runs` repetitions for every
/// `(n, m)` size and solver, on synthetic ensembles. One untimed warm-up run
/// precedes each cell.
pub fn runtime_sweep(
    sizes: &[(usize, usize)],
    solvers: &[SolverTag],
    config: &SolverConfig,
    runs: usize,
) -> Result<Vec<TimingRow>> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &(n, m) in sizes {
        let dataset = generate_synthetic(&SyntheticSpec {
            n_points: n,
            quality_mix: graded_quality_mix(m),
            base_signal: 0.8,
            seed: config.seed,
        })?;
        for &solver in solvers {
            std::hint::black_box(troupe_with(&dataset, 0.5, config, solver, Execution::Sequential)?);
            let mut total = 0.0;
            for _ in 0..runs {
                let start = Instant::now();
                let valuation = troupe_with(&dataset, 0.5, config, solver, Execution::Sequential)?;
                total += start.elapsed().as_secs_f64();
                std::hint::black_box(valuation);
            }
            let mean_seconds = total / runs as f64;
            rows.push(TimingRow {
                n,
                m,
                solver,
                runs,
                mean_seconds,
                per_point_seconds: mean_seconds / n as f64,
            });
        }
    }
    Ok(rows)
}
