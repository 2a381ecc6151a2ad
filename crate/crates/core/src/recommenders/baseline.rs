use crate::dataset::InteractionMatrix;

/// Global, per-user and per-item rating means.
#[derive(Debug, Clone, PartialEq)]
pub struct UserItemAvgState {
    pub global_mean: f64,
    pub user_means: Vec<f64>,
    pub item_means: Vec<f64>,
}

fn mean(sum: f64, n: usize, fallback: f64) -> f64 {
    if n == 0 {
        fallback
    } else {
        sum / n as f64
    }
}

impl UserItemAvgState {
    pub fn fit(matrix: &InteractionMatrix) -> Self {
        let global_mean = matrix.value_sum() / matrix.nnz() as f64;
        let user_means = matrix
            .rows()
            .iter()
            .map(|row| mean(row.iter().map(|e| e.value).sum(), row.len(), global_mean))
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
            .map(|(s, c)| mean(s, c, global_mean))
            .collect();
        Self {
            global_mean,
            user_means,
            item_means,
        }
    }

    /// `μ + (ū − μ) + (ī − μ)`
    pub fn score(&self, user: usize, item: usize) -> f64 {
        let mu = self.global_mean;
        mu + (self.user_means[user] - mu) + (self.item_means[item] - mu)
    }

    pub fn score_row(&self, user: usize) -> Vec<f64> {
        (0..self.item_means.len())
            .map(|i| self.score(user, i))
            .collect()
    }
}

/// Items ranked by total raw play count.
#[derive(Debug, Clone, PartialEq)]
pub struct MostPopState {
    scores: Vec<f64>,
    ranking: Vec<usize>,
}

impl MostPopState {
    pub fn fit(matrix: &InteractionMatrix) -> Self {
        let counts = matrix.item_counts();
        let mut ranking: Vec<usize> = (0..counts.len()).collect();
        ranking.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        Self {
            scores: counts.iter().map(|&c| c as f64).collect(),
            ranking,
        }
    }

    pub fn score(&self, item: usize) -> f64 {
        self.scores[item]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// All items, most played first, ties by ascending index.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }
}
