//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use fairtail::popularity::PopularityTable;
use fairtail::{build_matrix, InteractionMatrix, InteractionRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random matrix with every user and item present at least once.
pub fn random_matrix(users: usize, items: usize, density: f64, seed: u64) -> InteractionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recs = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if rng.gen_bool(density) || i == u % items || u == i % users {
                recs.push(InteractionRecord::new(
                    format!("u{u}"),
                    format!("i{i}"),
                    rng.gen_range(1..=9),
                ));
            }
        }
    }
    build_matrix(&recs).unwrap()
}

pub fn dense(matrix: &InteractionMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; matrix.num_items()]; matrix.num_users()];
    for (u, row) in matrix.rows().iter().enumerate() {
        for e in row {
            d[u][e.item] = e.value;
        }
    }
    d
}

/// Dense O(U²·I) user-based KNN.
pub struct BruteKnn {
    pub ratings: Vec<Vec<f64>>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl BruteKnn {
    pub fn new(matrix: &InteractionMatrix, k: usize) -> Self {
        let r = dense(matrix);
        let users = r.len();
        let items = r[0].len();
        let norm = |u: usize| (0..items).map(|i| r[u][i] * r[u][i]).sum::<f64>().sqrt();
        let mut neighbors = Vec::with_capacity(users);
        for u in 0..users {
            let mut sims = Vec::new();
            for v in 0..users {
                if v == u {
                    continue;
                }
                let mut dot = 0.0;
                for (a, b) in r[u].iter().zip(&r[v]) {
                    dot += a * b;
                }
                let s = (dot / (norm(u) * norm(v))).clamp(0.0, 1.0);
                if s > 0.0 {
                    sims.push((v, s));
                }
            }
            sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            sims.truncate(k);
            neighbors.push(sims);
        }
        Self {
            ratings: r,
            neighbors,
        }
    }

    pub fn predict(&self, u: usize, i: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &(v, s) in &self.neighbors[u] {
            if self.ratings[v][i] > 0.0 {
                num += s * self.ratings[v][i];
                den += s;
            }
        }
        if den > 0.0 {
            return num / den;
        }
        let col: Vec<f64> = self
            .ratings
            .iter()
            .map(|row| row[i])
            .filter(|&x| x > 0.0)
            .collect();
        if !col.is_empty() {
            return col.iter().sum::<f64>() / col.len() as f64;
        }
        let all: Vec<f64> = self
            .ratings
            .iter()
            .flatten()
            .copied()
            .filter(|&x| x > 0.0)
            .collect();
        all.iter().sum::<f64>() / all.len() as f64
    }

    pub fn top_n(&self, u: usize, n: usize, exclude_seen: bool) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> = (0..self.ratings[u].len())
            .filter(|&i| !(exclude_seen && self.ratings[u][i] > 0.0))
            .map(|i| (i, self.predict(u, i)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(n);
        scored
    }
}

/// Scans every prefix length of the popularity ordering from scratch.
/// Returns (head, mid, tail) as sorted provider sets, or None if a group is empty.
pub fn brute_partition(
    table: &PopularityTable,
    beta1: f64,
    beta2: f64,
) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let counts = table.counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // selection sort: descending count, ascending index
    for a in 0..order.len() {
        let mut best = a;
        for b in a + 1..order.len() {
            let (x, y) = (order[b], order[best]);
            if counts[x] > counts[y] || (counts[x] == counts[y] && x < y) {
                best = b;
            }
        }
        order.swap(a, best);
    }
    let total: u64 = counts.iter().sum();
    let share_of_prefix =
        |len: usize| order[..len].iter().map(|&p| counts[p]).sum::<u64>() as f64 / total as f64;
    let head_len = (1..=order.len()).find(|&l| share_of_prefix(l) >= beta1)?;
    let mid_len = (head_len..=order.len()).find(|&l| share_of_prefix(l) >= beta2)?;
    let mut head = order[..head_len].to_vec();
    let mut mid = order[head_len..mid_len].to_vec();
    let mut tail = order[mid_len..].to_vec();
    if head.is_empty() || mid.is_empty() || tail.is_empty() {
        return None;
    }
    head.sort_unstable();
    mid.sort_unstable();
    tail.sort_unstable();
    Some((head, mid, tail))
}

pub fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Upper-tail p-value of Pearson's chi-square statistic against a uniform expectation.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}
