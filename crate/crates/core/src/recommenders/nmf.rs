//! Non-negative matrix factorization fitted on observed entries only.
//!
//! Minimizes `Σ_obs (r_ui − p_u·q_i)² + reg·(‖P‖² + ‖Q‖²)` with
//! multiplicative updates
//!
//! ```text
//! p_uf ← p_uf · Σ_i q_if r_ui / (Σ_i q_if r̂_ui + reg · p_uf)
//! q_if ← q_if · Σ_u p_uf r_ui / (Σ_u p_uf r̂_ui + reg · q_if)
//! ```
//!
//! where sums run over observed cells. Factors stay non-negative because
//! every update multiplies by a ratio of non-negative terms. One epoch
//! updates all of `P` from the current `Q`, then all of `Q` from the new `P`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{RecommenderConfig, RecommenderError};
use crate::dataset::InteractionMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub objective: f64,
    pub min_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfState {
    pub factors: usize,
    /// Row-major users x factors.
    pub user_factors: Vec<f64>,
    /// Row-major items x factors.
    pub item_factors: Vec<f64>,
    pub initial_objective: f64,
    /// One entry per epoch, in training order.
    pub trace: Vec<EpochStats>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn init_factors(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| loop {
            let x: f64 = rng.gen();
            if x > 0.0 {
                break x * scale;
            }
        })
        .collect()
}

/// One multiplicative half-step: refreshes every row of `target` against
/// the fixed `other` factors. `cells[r]` lists `(index into other, rating)`.
fn update_block(
    target: &mut [f64],
    other: &[f64],
    cells: &[Vec<(usize, f64)>],
    factors: usize,
    reg: f64,
) {
    target
        .par_chunks_mut(factors)
        .zip(cells.par_iter())
        .for_each(|(row, observed)| {
            let mut num = vec![0.0; factors];
            let mut den = vec![0.0; factors];
            for &(j, rating) in observed {
                let col = &other[j * factors..(j + 1) * factors];
                let predicted = dot(row, col);
                for f in 0..factors {
                    num[f] += col[f] * rating;
                    den[f] += col[f] * predicted;
                }
            }
            for f in 0..factors {
                let denom = den[f] + reg * row[f];
                if denom > 0.0 {
                    row[f] *= num[f] / denom;
                }
            }
        });
}

impl NmfState {
    pub fn fit(
        matrix: &InteractionMatrix,
        config: &RecommenderConfig,
    ) -> Result<Self, RecommenderError> {
        let f = config.factors;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scale = 1.0 / (f as f64).sqrt();
        let mut state = Self {
            factors: f,
            user_factors: init_factors(&mut rng, matrix.num_users() * f, scale),
            item_factors: init_factors(&mut rng, matrix.num_items() * f, scale),
            initial_objective: 0.0,
            trace: Vec::with_capacity(config.epochs),
        };
        state.initial_objective = state.objective(matrix, config.reg);

        let by_user: Vec<Vec<(usize, f64)>> = matrix
            .rows()
            .iter()
            .map(|row| row.iter().map(|e| (e.item, e.value)).collect())
            .collect();
        let by_item = matrix.columns();

        for _ in 0..config.epochs {
            update_block(
                &mut state.user_factors,
                &state.item_factors,
                &by_user,
                f,
                config.reg,
            );
            update_block(
                &mut state.item_factors,
                &state.user_factors,
                &by_item,
                f,
                config.reg,
            );
            let stats = EpochStats {
                objective: state.objective(matrix, config.reg),
                min_factor: state.min_factor(),
            };
            state.trace.push(stats);
        }

        let last = state.final_objective();
        if last > state.initial_objective {
            return Err(RecommenderError::ObjectiveIncreased {
                initial: state.initial_objective,
                last,
            });
        }
        Ok(state)
    }

    pub fn user_vector(&self, user: usize) -> &[f64] {
        &self.user_factors[user * self.factors..(user + 1) * self.factors]
    }

    pub fn item_vector(&self, item: usize) -> &[f64] {
        &self.item_factors[item * self.factors..(item + 1) * self.factors]
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.user_vector(user), self.item_vector(item))
    }

    pub fn score_row(&self, user: usize, n_items: usize) -> Vec<f64> {
        (0..n_items).map(|i| self.score(user, i)).collect()
    }

    /// Squared error over observed cells plus the L2 penalty.
    pub fn objective(&self, matrix: &InteractionMatrix, reg: f64) -> f64 {
        let err: f64 = matrix
            .rows()
            .iter()
            .enumerate()
            .map(|(u, row)| {
                row.iter()
                    .map(|e| {
                        let d = e.value - self.score(u, e.item);
                        d * d
                    })
                    .sum::<f64>()
            })
            .sum();
        let penalty = dot(&self.user_factors, &self.user_factors)
            + dot(&self.item_factors, &self.item_factors);
        err + reg * penalty
    }

    pub fn final_objective(&self) -> f64 {
        self.trace
            .last()
            .map_or(self.initial_objective, |s| s.objective)
    }

    pub fn min_factor(&self) -> f64 {
        self.user_factors
            .iter()
            .chain(&self.item_factors)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}
