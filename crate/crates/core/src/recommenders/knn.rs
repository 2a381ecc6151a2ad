//! User-based collaborative filtering with cosine similarity.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::RecommenderError;
use crate::dataset::{Entry, InteractionMatrix};

fn norm(row: &[Entry]) -> f64 {
    row.iter().map(|e| e.value * e.value).sum::<f64>().sqrt()
}

fn sparse_dot(a: &[Entry], b: &[Entry]) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].item.cmp(&b[j].item) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                dot += a[i].value * b[j].value;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

fn cosine(dot: f64, norm_u: f64, norm_v: f64) -> f64 {
    (dot / (norm_u * norm_v)).clamp(0.0, 1.0)
}

/// Cosine similarity of two users' rating vectors, missing entries as zero.
pub fn similarity(matrix: &InteractionMatrix, u: usize, v: usize) -> Result<f64, RecommenderError> {
    let n = matrix.num_users();
    if u >= n || v >= n {
        return Err(RecommenderError::IndexOutOfRange {
            user: u.max(v),
            item: 0,
        });
    }
    let (ru, rv) = (matrix.row(u), matrix.row(v));
    let (nu, nv) = (norm(ru), norm(rv));
    if nu == 0.0 {
        return Err(RecommenderError::ZeroVector(u));
    }
    if nv == 0.0 {
        return Err(RecommenderError::ZeroVector(v));
    }
    Ok(cosine(sparse_dot(ru, rv), nu, nv))
}

/// Each user's k most similar users (similarity > 0), most similar first,
/// ties by ascending user index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnState {
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub item_means: Vec<Option<f64>>,
    pub global_mean: f64,
}

impl KnnState {
    pub fn fit(matrix: &InteractionMatrix, k: usize) -> Result<Self, RecommenderError> {
        let n_users = matrix.num_users();
        if n_users < 2 {
            return Err(RecommenderError::InsufficientData(format!(
                "UserKNN needs at least 2 users, got {n_users}"
            )));
        }
        let norms: Vec<f64> = matrix.rows().iter().map(|r| norm(r)).collect();
        if let Some(u) = norms.iter().position(|&x| x == 0.0) {
            return Err(RecommenderError::ZeroVector(u));
        }
        let columns = matrix.columns();

        let neighbors = (0..n_users)
            .into_par_iter()
            .map(|u| {
                // Accumulating column by column in ascending item order adds
                // the same terms in the same order as `sparse_dot`.
                let mut dots = vec![0.0f64; n_users];
                let mut seen = vec![false; n_users];
                let mut touched = Vec::new();
                for e in matrix.row(u) {
                    for &(v, value) in &columns[e.item] {
                        if v == u {
                            continue;
                        }
                        if !seen[v] {
                            seen[v] = true;
                            touched.push(v);
                        }
                        dots[v] += e.value * value;
                    }
                }
                let mut sims: Vec<(usize, f64)> = touched
                    .into_iter()
                    .map(|v| (v, cosine(dots[v], norms[u], norms[v])))
                    .filter(|&(_, s)| s > 0.0)
                    .collect();
                sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                sims.truncate(k);
                sims
            })
            .collect();

        let mut sums = vec![0.0; matrix.num_items()];
        let mut counts = vec![0usize; matrix.num_items()];
        for e in matrix.rows().iter().flatten() {
            sums[e.item] += e.value;
            counts[e.item] += 1;
        }
        let item_means = sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect();
        Ok(Self {
            neighbors,
            item_means,
            global_mean: matrix.value_sum() / matrix.nnz() as f64,
        })
    }

    fn fallback(&self, item: usize) -> f64 {
        self.item_means[item].unwrap_or(self.global_mean)
    }

    /// Similarity-weighted mean of the neighbors who rated `item`.
    pub fn score(&self, matrix: &InteractionMatrix, user: usize, item: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &(v, sim) in &self.neighbors[user] {
            if let Some(r) = matrix.value(v, item) {
                num += sim * r;
                den += sim;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            self.fallback(item)
        }
    }

    pub fn score_row(&self, matrix: &InteractionMatrix, user: usize) -> Vec<f64> {
        let n_items = matrix.num_items();
        let mut num = vec![0.0; n_items];
        let mut den = vec![0.0; n_items];
        for &(v, sim) in &self.neighbors[user] {
            for e in matrix.row(v) {
                num[e.item] += sim * e.value;
                den[e.item] += sim;
            }
        }
        (0..n_items)
            .map(|i| {
                if den[i] > 0.0 {
                    num[i] / den[i]
                } else {
                    self.fallback(i)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_matrix, InteractionRecord};

    fn dense(rows: &[&[u64]]) -> InteractionMatrix {
        let mut recs = Vec::new();
        for (u, row) in rows.iter().enumerate() {
            for (i, &c) in row.iter().enumerate() {
                if c > 0 {
                    recs.push(InteractionRecord::new(format!("u{u}"), format!("i{i}"), c));
                }
            }
        }
        build_matrix(&recs).unwrap()
    }

    #[test]
    fn cosine_cases() {
        let m = dense(&[&[5, 3, 0], &[5, 3, 4], &[5, 3, 0], &[0, 0, 2]]);
        let expected = 34.0 / (34f64.sqrt() * 50f64.sqrt());
        assert!((similarity(&m, 0, 1).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.8246).abs() < 1e-4);
        assert_eq!(similarity(&m, 0, 2).unwrap(), 1.0);
        assert_eq!(similarity(&m, 0, 3).unwrap(), 0.0);
        assert_eq!(similarity(&m, 1, 0).unwrap(), similarity(&m, 0, 1).unwrap());
    }

    #[test]
    fn needs_two_users() {
        let m = dense(&[&[1, 2]]);
        assert!(matches!(
            KnnState::fit(&m, 5),
            Err(RecommenderError::InsufficientData(_))
        ));
    }

    #[test]
    fn single_neighbor_prediction_is_its_rating() {
        // u0 and u1 share i0; only u1 rated i1.
        let m = dense(&[&[2, 0], &[3, 4]]);
        let s = KnnState::fit(&m, 40).unwrap();
        assert_eq!(s.neighbors[0], vec![(1, 1.0 * 3.0 * 2.0 / (2.0 * 5.0))]);
        assert_eq!(s.score(&m, 0, 1), 4.0);
    }

    #[test]
    fn falls_back_to_item_mean() {
        // u2 shares nothing with u0, so u0's neighbors never rated i2.
        let m = dense(&[&[1, 1, 0], &[2, 0, 0], &[0, 0, 6], &[0, 0, 2]]);
        let s = KnnState::fit(&m, 40).unwrap();
        assert_eq!(s.score(&m, 0, 2), 4.0);
        let row = s.score_row(&m, 0);
        for (i, &x) in row.iter().enumerate() {
            assert_eq!(x, s.score(&m, 0, i));
        }
    }

    #[test]
    fn neighbor_lists_truncate_to_k() {
        let m = dense(&[&[1, 1, 1], &[1, 0, 0], &[1, 1, 0], &[0, 0, 1]]);
        let s = KnnState::fit(&m, 2).unwrap();
        assert_eq!(s.neighbors[0].len(), 2);
        assert_eq!(s.neighbors[0][0].0, 2);
    }
}
