//! Exact and approximate Shapley values of ensemble games.
//!
//! * [`exact_shapley`] enumerates every coalition with factorial weights.
//! * [`mc_shapley`] averages marginal contributions over sampled join orders.
//! * [`mle_shapley`] evaluates the multilinear extension under a Gaussian
//!   model of the individual weights.
//! * [`emc_shapley`] sums, over coalition sizes, the probability that a model
//!   is the pivotal voter when coalition weight is modeled as Gaussian.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::SimplifiedGame;
use crate::gaussian::normal_interval;

/// Largest player count [`exact_shapley`] accepts by default.
pub const DEFAULT_EXACT_LIMIT: usize = 20;

/// Denominator floor for percentage errors against a (near) zero exact value.
pub const APE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    Exact,
    Mc,
    Mle,
    Emc,
}

impl SolverTag {
    pub const ALL: [SolverTag; 4] = [SolverTag::Exact, SolverTag::Mc, SolverTag::Mle, SolverTag::Emc];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverTag::Exact => "exact",
            SolverTag::Mc => "mc",
            SolverTag::Mle => "mle",
            SolverTag::Emc => "emc",
        }
    }
}

impl fmt::Display for SolverTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(SolverTag::Exact),
            "mc" => Ok(SolverTag::Mc),
            "mle" => Ok(SolverTag::Mle),
            "emc" | "troupe" => Ok(SolverTag::Emc),
            other => Err(Error::InvalidConfig(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sampled permutations (MC only).
    pub permutations: usize,
    /// Variance floor `delta`.
    pub stability: f64,
    pub seed: u64,
    /// Scale approximate values to sum to one when their sum is positive.
    pub normalize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            permutations: 1000,
            stability: 1e-9,
            seed: 42,
            normalize: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::InvalidConfig("permutations must be at least 1".into()));
        }
        if !self.stability.is_finite() || self.stability < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "stability delta must be a finite nonnegative number, got {}",
                self.stability
            )));
        }
        Ok(())
    }

    pub fn raw(mut self) -> Self {
        self.normalize = false;
        self
    }
}

/// One Shapley value per model of a single game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyVector {
    pub values: Vec<f64>,
    pub solver: SolverTag,
    pub normalized: bool,
}

impl ShapleyVector {
    pub fn zeros(m: usize, solver: SolverTag, normalized: bool) -> Self {
        Self {
            values: vec![0.0; m],
            solver,
            normalized,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Rescaled copy summing to one; all-zero vectors stay zero.
    pub fn normalized(&self) -> Self {
        Self {
            values: normalize_values(self.values.clone()),
            solver: self.solver,
            normalized: true,
        }
    }
}

fn normalize_values(mut values: Vec<f64>) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
    values
}

fn finish(values: Vec<f64>, solver: SolverTag, normalize: bool) -> ShapleyVector {
    if normalize {
        ShapleyVector {
            values: normalize_values(values),
            solver,
            normalized: true,
        }
    } else {
        ShapleyVector {
            values,
            solver,
            normalized: false,
        }
    }
}

/// Exact Shapley values of an arbitrary characteristic function given as a
/// table `values[mask]` over all `2^m` coalitions.
pub fn shapley_from_table(m: usize, values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), 1usize << m, "table must hold 2^m coalition values");
    // |S|! (m - |S| - 1)! / m! = 1 / (m * C(m - 1, |S|))
    let mut coefficients = Vec::with_capacity(m);
    let mut binom = 1.0_f64;
    for s in 0..m {
        coefficients.push(1.0 / (m as f64 * binom));
        binom = binom * (m - 1 - s) as f64 / (s + 1) as f64;
    }
    (0..m)
        .map(|j| {
            let bit = 1usize << j;
            let mut phi = 0.0;
            for mask in 0..values.len() {
                if mask & bit != 0 {
                    continue;
                }
                let marginal = values[mask | bit] - values[mask];
                if marginal != 0.0 {
                    phi += coefficients[mask.count_ones() as usize] * marginal;
                }
            }
            phi
        })
        .collect()
}

/// Exact values by subset enumeration, refusing games above [`DEFAULT_EXACT_LIMIT`] players.
pub fn exact_shapley(game: &SimplifiedGame) -> Result<ShapleyVector> {
    exact_shapley_with_limit(game, DEFAULT_EXACT_LIMIT)
}

pub fn exact_shapley_with_limit(game: &SimplifiedGame, limit: usize) -> Result<ShapleyVector> {
    let m = game.n_players();
    if m > limit || m >= usize::BITS as usize {
        return Err(Error::TooManyPlayers { players: m, limit });
    }
    let weights = game.weights();
    let mut sums = vec![0.0_f64; 1 << m];
    for mask in 1..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + weights[low];
    }
    let mut table: Vec<f64> = sums.iter().map(|&w| if game.wins(w) { 1.0 } else { 0.0 }).collect();
    // the grand coalition's value is the game outcome, whatever the summation order
    table[sums.len() - 1] = if game.outcome().won { 1.0 } else { 0.0 };
    Ok(ShapleyVector {
        values: shapley_from_table(m, &table),
        solver: SolverTag::Exact,
        normalized: false,
    })
}

/// Net pivot counts over `permutations` sampled join orders drawn from
/// `ChaCha8(seed)` on stream `stream`.
///
/// The last model of every order closes the grand coalition, whose value is
/// taken from [`SimplifiedGame::outcome`], so each order's marginals telescope
/// to exactly `v(M) - v(empty)` and the counts sum to that times `permutations`.
pub fn mc_pivot_counts(game: &SimplifiedGame, permutations: usize, seed: u64, stream: u64) -> Vec<i64> {
    let m = game.n_players();
    let weights = game.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut order: Vec<usize> = (0..m).collect();
    let mut counts = vec![0_i64; m];
    let empty_wins = game.wins(0.0);
    let grand_wins = game.outcome().won;
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut weight = 0.0;
        let mut previous = empty_wins;
        for (position, &j) in order.iter().enumerate() {
            weight += weights[j];
            let current = if position + 1 == m {
                grand_wins
            } else {
                game.wins(weight)
            };
            counts[j] += i64::from(current) - i64::from(previous);
            previous = current;
        }
    }
    counts
}

/// Monte Carlo permutation estimate on stream 0.
pub fn mc_shapley(game: &SimplifiedGame, config: &SolverConfig) -> Result<ShapleyVector> {
    mc_shapley_stream(game, config, 0)
}

/// Monte Carlo estimate drawing from an explicit RNG stream, so callers
/// solving many games can give each one an independent, schedule-free stream.
pub fn mc_shapley_stream(game: &SimplifiedGame, config: &SolverConfig, stream: u64) -> Result<ShapleyVector> {
    config.validate()?;
    let p = config.permutations as f64;
    let values = mc_pivot_counts(game, config.permutations, config.seed, stream)
        .into_iter()
        .map(|c| c as f64 / p)
        .collect();
    Ok(finish(values, SolverTag::Mc, config.normalize))
}

fn floored_variance(variance: f64, stability: f64) -> Result<f64> {
    let v = variance.max(stability);
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::DegenerateVariance)
    }
}

/// Multilinear-extension approximation:
/// `Phi(gamma; mu, nu') - Phi(gamma - w_j; mu, nu')` with `nu' = max(nu, delta)`
/// and `mu`, `nu` the moments of the individual weights.
pub fn mle_shapley(game: &SimplifiedGame, config: &SolverConfig) -> Result<ShapleyVector> {
    config.validate()?;
    let moments = game.moments();
    let variance = floored_variance(moments.variance, config.stability)?;
    let cutoff = game.cutoff();
    let values = game
        .weights()
        .iter()
        .map(|w| normal_interval(cutoff - w, cutoff, moments.mean, variance))
        .collect();
    Ok(finish(values, SolverTag::Mle, config.normalize))
}

/// Expected-marginal-contributions approximation.
///
/// For every coalition size `k - 1` the coalition weight is modeled as
/// `Normal((k - 1) mu, max((k - 1) nu, delta))`; model `j` is pivotal when that
/// weight falls in `[gamma - w_j, gamma)`. The empty coalition (`k = 1`) has
/// weight exactly zero. The value is the average of the `m` pivot
/// probabilities, costing `O(m)` per model and `O(m^2)` per game.
pub fn emc_shapley(game: &SimplifiedGame, config: &SolverConfig) -> Result<ShapleyVector> {
    config.validate()?;
    let m = game.n_players();
    let moments = game.moments();
    if m > 1 && moments.variance <= 0.0 && config.stability <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let cutoff = game.cutoff();
    let values = game
        .weights()
        .iter()
        .map(|&w| {
            let lo = cutoff - w;
            let mut total = if lo <= 0.0 && 0.0 < cutoff { 1.0 } else { 0.0 };
            for size in 1..m {
                let size = size as f64;
                let variance = (size * moments.variance).max(config.stability);
                total += normal_interval(lo, cutoff, size * moments.mean, variance);
            }
            total / m as f64
        })
        .collect();
    Ok(finish(values, SolverTag::Emc, config.normalize))
}

/// Runs `solver` on `game`. `stream` only affects the MC solver.
pub fn solve(game: &SimplifiedGame, solver: SolverTag, config: &SolverConfig, stream: u64) -> Result<ShapleyVector> {
    match solver {
        SolverTag::Exact => {
            let exact = exact_shapley(game)?;
            Ok(if config.normalize { exact.normalized() } else { exact })
        }
        SolverTag::Mc => mc_shapley_stream(game, config, stream),
        SolverTag::Mle => mle_shapley(game, config),
        SolverTag::Emc => emc_shapley(game, config),
    }
}

/// Absolute percentage errors `|estimate - exact| / max(|exact|, floor) * 100`
/// and whether the floor was used for each model.
pub fn percentage_errors(estimate: &[f64], exact: &[f64]) -> (Vec<f64>, Vec<bool>) {
    estimate
        .iter()
        .zip(exact)
        .map(|(e, x)| {
            let floored = x.abs() < APE_FLOOR;
            ((e - x).abs() / x.abs().max(APE_FLOOR) * 100.0, floored)
        })
        .unzip()
}

/// Errors of one approximate solver against the exact values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverErrors {
    pub solver: SolverTag,
    pub values: Vec<f64>,
    pub absolute_percentage_error: Vec<f64>,
    pub floored: Vec<bool>,
    /// Mean APE over models whose exact value is above the floor; absent when
    /// every exact value is floored.
    pub mean_ape: Option<f64>,
    pub mean_absolute_error: f64,
}

impl SolverErrors {
    pub fn against(solver: SolverTag, values: Vec<f64>, exact: &[f64]) -> Self {
        let (ape, floored) = percentage_errors(&values, exact);
        let kept: Vec<f64> = ape.iter().zip(&floored).filter(|(_, &f)| !f).map(|(a, _)| *a).collect();
        let mean_ape = (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64);
        let mean_absolute_error =
            values.iter().zip(exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / exact.len() as f64;
        Self {
            solver,
            values,
            absolute_percentage_error: ape,
            floored,
            mean_ape,
            mean_absolute_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverComparison {
    pub cutoff: f64,
    pub weights: Vec<f64>,
    pub won: bool,
    pub exact: Vec<f64>,
    pub exact_floored: Vec<bool>,
    pub solvers: Vec<SolverErrors>,
}

/// Percentage-error table of the MC, MLE and EMC solvers against exact enumeration.
pub fn compare_solvers(game: &SimplifiedGame, config: &SolverConfig) -> Result<SolverComparison> {
    let exact = exact_shapley(game)?.values;
    let solvers = [SolverTag::Mc, SolverTag::Mle, SolverTag::Emc]
        .into_iter()
        .map(|tag| Ok(SolverErrors::against(tag, solve(game, tag, config, 0)?.values, &exact)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolverComparison {
        cutoff: game.cutoff(),
        weights: game.weights().to_vec(),
        won: game.outcome().won,
        exact_floored: exact.iter().map(|x| x.abs() < APE_FLOOR).collect(),
        exact,
        solvers,
    })
}
