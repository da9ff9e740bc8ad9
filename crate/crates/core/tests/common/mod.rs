#![allow(dead_code)]

use ensemble_shapley::SimplifiedGame;
use rand::Rng;

/// Weights uniform in `[0, 1/m]`, cutoff uniform in `[0, 1]`.
pub fn random_game(rng: &mut impl Rng, m: usize) -> SimplifiedGame {
    let share = 1.0 / m as f64;
    let weights = (0..m).map(|_| rng.gen::<f64>() * share).collect();
    SimplifiedGame::new(weights, rng.gen()).unwrap()
}

/// A random game whose grand coalition wins: cutoff uniform in `[0, w(M)]`.
pub fn random_won_game(rng: &mut impl Rng, m: usize) -> SimplifiedGame {
    loop {
        let game = random_game(rng, m);
        if game.outcome().won {
            return game;
        }
    }
}

/// Shapley values as the average marginal contribution over all `m!` join
/// orders (Heap's algorithm). Coalition values are recomputed from scratch
/// for every prefix, independent of the subset-table path.
pub fn permutation_oracle(game: &SimplifiedGame) -> Vec<f64> {
    let m = game.n_players();
    let mut order: Vec<usize> = (0..m).collect();
    let mut totals = vec![0.0; m];
    let mut count = 0usize;
    let mut visit = |order: &[usize]| {
        let mut mask = 0u64;
        let mut previous = game.value_of(0);
        for (position, &j) in order.iter().enumerate() {
            mask |= 1 << j;
            let current = if position + 1 == m {
                if game.outcome().won {
                    1.0
                } else {
                    0.0
                }
            } else {
                game.value_of(mask)
            };
            totals[j] += current - previous;
            previous = current;
        }
        count += 1;
    };
    let mut c = vec![0usize; m];
    visit(&order);
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            visit(&order);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    totals.iter().map(|t| t / count as f64).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
