//! The five audited algorithms behind one fit / score / recommend contract.

mod baseline;
mod knn;
mod nmf;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::InteractionMatrix;
use crate::seed;

pub use baseline::{MostPopState, UserItemAvgState};
pub use knn::{similarity, KnnState};
pub use nmf::{EpochStats, NmfState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommenderError {
    #[error("invalid recommender config: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("index out of range: user {user}, item {item}")]
    IndexOutOfRange { user: usize, item: usize },
    #[error("{0} does not define a score")]
    ScoreUndefined(Algorithm),
    #[error("user {0} has no interactions")]
    ZeroVector(usize),
    #[error("NMF objective increased during training ({initial} -> {last})")]
    ObjectiveIncreased { initial: f64, last: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "UserKNN")]
    UserKnn,
    #[serde(rename = "NMF")]
    Nmf,
    UserItemAvg,
    MostPop,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::UserKnn,
        Algorithm::Nmf,
        Algorithm::UserItemAvg,
        Algorithm::MostPop,
        Algorithm::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::UserKnn => "UserKNN",
            Self::Nmf => "NMF",
            Self::UserItemAvg => "UserItemAvg",
            Self::MostPop => "MostPop",
            Self::Random => "Random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "userknn" => Ok(Self::UserKnn),
            "nmf" => Ok(Self::Nmf),
            "useritemavg" => Ok(Self::UserItemAvg),
            "mostpop" => Ok(Self::MostPop),
            "random" => Ok(Self::Random),
            other => Err(format!(
                "unknown algorithm `{other}` (userknn|nmf|useritemavg|mostpop|random)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommenderConfig {
    pub algorithm: Algorithm,
    /// Neighborhood size for UserKNN.
    pub k: usize,
    /// Latent dimension for NMF.
    pub factors: usize,
    pub epochs: usize,
    pub reg: f64,
    pub seed: u64,
    /// Recommendation list length.
    pub n: usize,
    pub exclude_seen: bool,
    /// Lets MostPop honor `exclude_seen`; off by default so every user gets
    /// the same global list.
    pub mostpop_exclude_seen: bool,
}

impl RecommenderConfig {
    pub const DEFAULT_K: usize = 40;
    pub const DEFAULT_FACTORS: usize = 15;
    pub const DEFAULT_EPOCHS: usize = 50;
    pub const DEFAULT_REG: f64 = 0.06;
    pub const DEFAULT_N: usize = 10;

    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            k: Self::DEFAULT_K,
            factors: Self::DEFAULT_FACTORS,
            epochs: Self::DEFAULT_EPOCHS,
            reg: Self::DEFAULT_REG,
            seed: 0,
            n: Self::DEFAULT_N,
            exclude_seen: true,
            mostpop_exclude_seen: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<(), RecommenderError> {
        let bad = |msg: &str| Err(RecommenderError::InvalidConfig(msg.to_owned()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.factors == 0 {
            return bad("factors must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.reg.is_finite() && self.reg >= 0.0) {
            return bad("reg must be a non-negative number");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        Ok(())
    }

    fn excludes_seen(&self) -> bool {
        match self.algorithm {
            Algorithm::MostPop => self.exclude_seen && self.mostpop_exclude_seen,
            _ => self.exclude_seen,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    UserKnn(KnnState),
    Nmf(NmfState),
    UserItemAvg(UserItemAvgState),
    MostPop(MostPopState),
    Random { seed: u64 },
}

/// A trained model. Immutable; scoring and recommending only read it.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    algorithm: Algorithm,
    train: Arc<InteractionMatrix>,
    state: ModelState,
}

pub fn fit(
    config: &RecommenderConfig,
    matrix: &InteractionMatrix,
) -> Result<FittedModel, RecommenderError> {
    config.validate()?;
    if matrix.nnz() == 0 {
        return Err(RecommenderError::InsufficientData("matrix is empty".into()));
    }
    let state = match config.algorithm {
        Algorithm::UserKnn => ModelState::UserKnn(KnnState::fit(matrix, config.k)?),
        Algorithm::Nmf => ModelState::Nmf(NmfState::fit(matrix, config)?),
        Algorithm::UserItemAvg => ModelState::UserItemAvg(UserItemAvgState::fit(matrix)),
        Algorithm::MostPop => ModelState::MostPop(MostPopState::fit(matrix)),
        Algorithm::Random => ModelState::Random { seed: config.seed },
    };
    Ok(FittedModel {
        algorithm: config.algorithm,
        train: Arc::new(matrix.clone()),
        state,
    })
}

/// One ranked slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub item: usize,
    pub score: f64,
}

/// Descending score, ascending item index on ties.
fn rank_order(a: &Recommendation, b: &Recommendation) -> Ordering {
    b.score.total_cmp(&a.score).then(a.item.cmp(&b.item))
}

fn top_n(mut candidates: Vec<Recommendation>, n: usize) -> Vec<Recommendation> {
    if candidates.len() > n {
        candidates.select_nth_unstable_by(n - 1, rank_order);
        candidates.truncate(n);
    }
    candidates.sort_by(rank_order);
    candidates
}

impl FittedModel {
    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn training_matrix(&self) -> &InteractionMatrix {
        &self.train
    }

    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn score(&self, user: usize, item: usize) -> Result<f64, RecommenderError> {
        if user >= self.train.num_users() || item >= self.train.num_items() {
            return Err(RecommenderError::IndexOutOfRange { user, item });
        }
        match &self.state {
            ModelState::UserKnn(s) => Ok(s.score(&self.train, user, item)),
            ModelState::Nmf(s) => Ok(s.score(user, item)),
            ModelState::UserItemAvg(s) => Ok(s.score(user, item)),
            ModelState::MostPop(s) => Ok(s.score(item)),
            ModelState::Random { .. } => Err(RecommenderError::ScoreUndefined(self.algorithm)),
        }
    }

    /// Scores of every item for `user`, bit-identical to calling `score`
    /// item by item.
    fn score_row(&self, user: usize) -> Vec<f64> {
        match &self.state {
            ModelState::UserKnn(s) => s.score_row(&self.train, user),
            ModelState::Nmf(s) => s.score_row(user, self.train.num_items()),
            ModelState::UserItemAvg(s) => s.score_row(user),
            ModelState::MostPop(s) => s.scores().to_vec(),
            ModelState::Random { .. } => unreachable!("Random has no scores"),
        }
    }

    fn candidates(&self, user: usize, exclude_seen: bool) -> Vec<usize> {
        let n_items = self.train.num_items();
        if !exclude_seen {
            return (0..n_items).collect();
        }
        let mut seen = self.train.row(user).iter().map(|e| e.item).peekable();
        (0..n_items)
            .filter(|&i| {
                if seen.peek() == Some(&i) {
                    seen.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    /// Ranked list for one user. Shorter than `config.n` only when fewer
    /// candidates exist.
    pub fn recommend(&self, user: usize, config: &RecommenderConfig) -> Vec<Recommendation> {
        let n = config.n;
        let exclude = config.excludes_seen();
        match &self.state {
            ModelState::MostPop(s) => s
                .ranking()
                .iter()
                .filter(|&&i| !(exclude && self.train.contains(user, i)))
                .take(n)
                .map(|&item| Recommendation {
                    item,
                    score: s.scores()[item],
                })
                .collect(),
            ModelState::Random { seed } => {
                let candidates = self.candidates(user, exclude);
                let amount = n.min(candidates.len());
                let mut rng = seed::stream(*seed, user as u64);
                index::sample(&mut rng, candidates.len(), amount)
                    .into_iter()
                    .enumerate()
                    .map(|(pos, idx)| Recommendation {
                        item: candidates[idx],
                        score: (amount - pos) as f64,
                    })
                    .collect()
            }
            _ => {
                let scores = self.score_row(user);
                let candidates = self
                    .candidates(user, exclude)
                    .into_iter()
                    .map(|item| Recommendation {
                        item,
                        score: scores[item],
                    })
                    .collect();
                top_n(candidates, n)
            }
        }
    }

    /// Lists for every user, computed in parallel.
    pub fn recommend_all(&self, config: &RecommenderConfig) -> RecommendationSet {
        let lists = (0..self.num_users())
            .into_par_iter()
            .map(|u| self.recommend(u, config))
            .collect();
        RecommendationSet { n: config.n, lists }
    }

    pub fn recommend_all_serial(&self, config: &RecommenderConfig) -> RecommendationSet {
        let lists = (0..self.num_users())
            .map(|u| self.recommend(u, config))
            .collect();
        RecommendationSet { n: config.n, lists }
    }
}

/// Per-user ranked top-N lists, indexed by user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSet {
    pub n: usize,
    pub lists: Vec<Vec<Recommendation>>,
}

impl RecommendationSet {
    pub fn num_users(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, user: usize) -> &[Recommendation] {
        &self.lists[user]
    }

    pub fn total_slots(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_slots() == 0
    }

    /// `user<TAB>rank<TAB>item<TAB>score` lines, ranks starting at 1.
    pub fn to_tsv(&self, matrix: &InteractionMatrix) -> String {
        let mut out = String::new();
        for (u, list) in self.lists.iter().enumerate() {
            for (rank, rec) in list.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    matrix.user_id(u),
                    rank + 1,
                    matrix.item_id(rec.item),
                    rec.score
                ));
            }
        }
        out
    }
}
