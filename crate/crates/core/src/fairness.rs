//! Group Average Popularity (GAP), its relative change between training
//! data and recommendations, and the multi-algorithm audit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{scale_ratings, InteractionMatrix, ItemProviderMap, ScalingScheme};
use crate::popularity::{
    compute_popularity, partition_long_tail, recommendation_popularity, Boundaries, Group,
    GroupPartition, PopularityError, PopularityTable,
};
use crate::recommenders::{fit, Algorithm, RecommenderConfig, RecommenderError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FairnessError {
    #[error("cannot average over an empty group")]
    EmptyGroup,
    #[error("data-side GAP is zero, relative change undefined")]
    ZeroBaseGap,
    #[error("provider {0} is not in the popularity table")]
    UnknownProvider(usize),
    #[error("invalid audit config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Popularity(#[from] PopularityError),
    #[error("{algorithm}: {source}")]
    Recommender {
        algorithm: Algorithm,
        source: RecommenderError,
    },
}

/// Mean share φ over the members of `group`.
pub fn gap(group: &[usize], table: &PopularityTable) -> Result<f64, FairnessError> {
    if group.is_empty() {
        return Err(FairnessError::EmptyGroup);
    }
    let mut events = 0u64;
    for &p in group {
        if p >= table.len() {
            return Err(FairnessError::UnknownProvider(p));
        }
        events += table.count(p);
    }
    // Σ φ = Σ count / total; summing integers first keeps group shares exact.
    Ok(events as f64 / table.total() as f64 / group.len() as f64)
}

/// `(gap_rec − gap_data) / gap_data`. Positive means the group is
/// over-promoted relative to the data, −1 means it was never recommended.
pub fn delta_gap(gap_rec: f64, gap_data: f64) -> Result<f64, FairnessError> {
    if gap_data == 0.0 {
        return Err(FairnessError::ZeroBaseGap);
    }
    Ok((gap_rec - gap_data) / gap_data)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ProviderMapMode {
    Identity,
    Explicit { source: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub algorithms: Vec<RecommenderConfig>,
    pub boundaries: Boundaries,
    pub scaling: ScalingScheme,
    pub provider_map: ProviderMapMode,
    pub seed: u64,
    pub n: usize,
}

impl AuditConfig {
    /// Default hyperparameters for each algorithm, seed 0, n = 10.
    pub fn new(algorithms: &[Algorithm]) -> Self {
        let n = RecommenderConfig::DEFAULT_N;
        Self {
            algorithms: algorithms
                .iter()
                .map(|&a| RecommenderConfig::new(a))
                .collect(),
            boundaries: Boundaries::default(),
            scaling: ScalingScheme::Raw,
            provider_map: ProviderMapMode::Identity,
            seed: 0,
            n,
        }
    }

    /// Sets the master seed and propagates it to every algorithm.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        for a in &mut self.algorithms {
            a.seed = seed;
        }
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        for a in &mut self.algorithms {
            a.n = n;
        }
        self
    }

    pub fn with_boundaries(mut self, boundaries: Boundaries) -> Self {
        self.boundaries = boundaries;
        self
    }

    pub fn validate(&self) -> Result<(), FairnessError> {
        if self.algorithms.is_empty() {
            return Err(FairnessError::InvalidConfig(
                "no algorithms selected".into(),
            ));
        }
        self.boundaries.validate()?;
        for a in &self.algorithms {
            a.validate().map_err(|source| FairnessError::Recommender {
                algorithm: a.algorithm,
                source,
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCell {
    pub group: Group,
    pub size: usize,
    pub gap_data: f64,
    pub gap_rec: f64,
    pub delta_gap: f64,
}

/// Not part of the GAP metric itself; shows how much of the catalog an
/// algorithm reaches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Fraction of providers recommended at least once.
    pub coverage: f64,
    pub recommended_providers: usize,
    pub total_slots: u64,
    pub n: usize,
    pub seed: u64,
    pub boundaries: Boundaries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub cells: Vec<GapCell>,
    pub diagnostics: Diagnostics,
}

impl AlgorithmReport {
    pub fn cell(&self, group: Group) -> &GapCell {
        self.cells
            .iter()
            .find(|c| c.group == group)
            .expect("every group has a cell")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: Group,
    pub size: usize,
    pub data_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub config: AuditConfig,
    pub num_users: usize,
    pub num_items: usize,
    pub num_providers: usize,
    pub groups: Vec<GroupSummary>,
    pub algorithms: Vec<AlgorithmReport>,
}

impl GapReport {
    pub fn algorithm(&self, algorithm: Algorithm) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }

    pub fn delta(&self, algorithm: Algorithm, group: Group) -> Option<f64> {
        self.algorithm(algorithm).map(|a| a.cell(group).delta_gap)
    }

    pub fn cell_count(&self) -> usize {
        self.algorithms.iter().map(|a| a.cells.len()).sum()
    }

    /// `algorithm,group,gap_data,gap_rec,delta_gap`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,group,gap_data,gap_rec,delta_gap\n");
        for a in &self.algorithms {
            for c in &a.cells {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    a.algorithm, c.group, c.gap_data, c.gap_rec, c.delta_gap
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

/// GAP on both sides and ΔGAP for each group of `partition`.
pub fn gap_cells(
    partition: &GroupPartition,
    data: &PopularityTable,
    recs: &PopularityTable,
) -> Result<Vec<GapCell>, FairnessError> {
    Group::ALL
        .into_iter()
        .map(|group| {
            let members = partition.members(group);
            let gap_data = gap(members, data)?;
            let gap_rec = gap(members, recs)?;
            Ok(GapCell {
                group,
                size: members.len(),
                gap_data,
                gap_rec,
                delta_gap: delta_gap(gap_rec, gap_data)?,
            })
        })
        .collect()
}

/// Fits every configured algorithm on the scaled matrix and reports GAP and
/// ΔGAP per popularity group. Popularity always uses raw event counts.
pub fn audit(
    matrix: &InteractionMatrix,
    map: &ItemProviderMap,
    config: &AuditConfig,
) -> Result<GapReport, FairnessError> {
    config.validate()?;
    let ratings = scale_ratings(matrix, config.scaling);
    let data = compute_popularity(matrix, map);
    let partition = partition_long_tail(&data, config.boundaries)?;

    let algorithms = config
        .algorithms
        .par_iter()
        .map(|rc| {
            let wrap = |source| FairnessError::Recommender {
                algorithm: rc.algorithm,
                source,
            };
            let model = fit(rc, &ratings).map_err(wrap)?;
            let recs = model.recommend_all(rc);
            let rec_table = recommendation_popularity(&recs, map)?;
            let recommended = rec_table.counts().iter().filter(|&&c| c > 0).count();
            Ok(AlgorithmReport {
                algorithm: rc.algorithm,
                cells: gap_cells(&partition, &data, &rec_table)?,
                diagnostics: Diagnostics {
                    coverage: recommended as f64 / map.num_providers() as f64,
                    recommended_providers: recommended,
                    total_slots: rec_table.total(),
                    n: rc.n,
                    seed: rc.seed,
                    boundaries: config.boundaries,
                },
            })
        })
        .collect::<Result<Vec<_>, FairnessError>>()?;

    let groups = Group::ALL
        .into_iter()
        .map(|group| {
            let members = partition.members(group);
            let events: u64 = members.iter().map(|&p| data.count(p)).sum();
            GroupSummary {
                group,
                size: members.len(),
                data_share: events as f64 / data.total() as f64,
            }
        })
        .collect();

    Ok(GapReport {
        config: config.clone(),
        num_users: matrix.num_users(),
        num_items: matrix.num_items(),
        num_providers: map.num_providers(),
        groups,
        algorithms,
    })
}
