//! Provider popularity shares and the Head / Mid / Tail split.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{InteractionMatrix, ItemProviderMap};
use crate::recommenders::RecommendationSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopularityError {
    #[error("invalid boundaries ({0}, {1}): need 0 < beta1 < beta2 < 1")]
    InvalidBoundaries(f64, f64),
    #[error("degenerate partition: {head} head / {mid} mid / {tail} tail providers")]
    DegeneratePartition {
        head: usize,
        mid: usize,
        tail: usize,
    },
    #[error("popularity table has zero total")]
    EmptyTable,
    #[error("partitioning requires a data-side popularity table")]
    WrongSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Data,
    Recommendations,
}

/// Per-provider counts and their shares `φ = count / total`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityTable {
    side: Side,
    counts: Vec<u64>,
    shares: Vec<f64>,
    total: u64,
}

impl PopularityTable {
    pub fn from_counts(side: Side, counts: Vec<u64>) -> Result<Self, PopularityError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(PopularityError::EmptyTable);
        }
        let shares = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            side,
            counts,
            shares,
            total,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn count(&self, provider: usize) -> u64 {
        self.counts[provider]
    }

    pub fn share(&self, provider: usize) -> f64 {
        self.shares[provider]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Providers by descending count, ascending index on ties.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        order
    }

    /// Rows of the rank/count/share listing, most popular first.
    pub fn ranked_rows(&self) -> Vec<RankedProvider> {
        let mut cumulative = 0u64;
        self.ranking()
            .into_iter()
            .enumerate()
            .map(|(pos, provider)| {
                cumulative += self.counts[provider];
                RankedProvider {
                    rank: pos + 1,
                    provider,
                    count: self.counts[provider],
                    share: self.shares[provider],
                    cumulative_share: cumulative as f64 / self.total as f64,
                }
            })
            .collect()
    }

    /// The same shares over counts multiplied by `factor`.
    pub fn rescaled(&self, factor: u64) -> Result<Self, PopularityError> {
        Self::from_counts(self.side, self.counts.iter().map(|c| c * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedProvider {
    pub rank: usize,
    pub provider: usize,
    pub count: u64,
    pub share: f64,
    pub cumulative_share: f64,
}

/// Data-side popularity: total raw play events of each provider's items.
pub fn compute_popularity(matrix: &InteractionMatrix, map: &ItemProviderMap) -> PopularityTable {
    let mut counts = vec![0u64; map.num_providers()];
    for (item, c) in matrix.item_counts().into_iter().enumerate() {
        counts[map.provider_of(item)] += c;
    }
    PopularityTable::from_counts(Side::Data, counts).expect("matrix counts are positive")
}

/// Recommendation-side popularity: list slots taken by each provider's items.
pub fn recommendation_popularity(
    recs: &RecommendationSet,
    map: &ItemProviderMap,
) -> Result<PopularityTable, PopularityError> {
    let mut counts = vec![0u64; map.num_providers()];
    for rec in recs.lists.iter().flatten() {
        counts[map.provider_of(rec.item)] += 1;
    }
    PopularityTable::from_counts(Side::Recommendations, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "High-P")]
    High,
    #[serde(rename = "Mid-P")]
    Mid,
    #[serde(rename = "Low-P")]
    Low,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::High, Group::Mid, Group::Low];

    pub fn name(self) -> &'static str {
        match self {
            Self::High => "High-P",
            Self::Mid => "Mid-P",
            Self::Low => "Low-P",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Group::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown group `{s}`"))
    }
}

/// Cumulative-share cutting points `(beta1, beta2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for Boundaries {
    fn default() -> Self {
        Self {
            beta1: 0.3,
            beta2: 0.7,
        }
    }
}

impl Boundaries {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self, PopularityError> {
        let b = Self { beta1, beta2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PopularityError> {
        if 0.0 < self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0 {
            Ok(())
        } else {
            Err(PopularityError::InvalidBoundaries(self.beta1, self.beta2))
        }
    }
}

/// Disjoint provider groups covering the catalog. Members are listed in
/// popularity order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    pub head: Vec<usize>,
    pub mid: Vec<usize>,
    pub tail: Vec<usize>,
    pub boundaries: Boundaries,
    assignment: Vec<Group>,
}

impl GroupPartition {
    pub fn members(&self, group: Group) -> &[usize] {
        match group {
            Group::High => &self.head,
            Group::Mid => &self.mid,
            Group::Low => &self.tail,
        }
    }

    pub fn group_of(&self, provider: usize) -> Group {
        self.assignment[provider]
    }

    pub fn num_providers(&self) -> usize {
        self.assignment.len()
    }
}

/// Splits providers at the shortest popularity-ordered prefix reaching
/// `beta1` of all events (head) and the shortest continuation reaching
/// `beta2` (mid). Everything else is tail.
pub fn partition_long_tail(
    table: &PopularityTable,
    boundaries: Boundaries,
) -> Result<GroupPartition, PopularityError> {
    boundaries.validate()?;
    if table.side() != Side::Data {
        return Err(PopularityError::WrongSide);
    }
    let order = table.ranking();
    let total = table.total() as f64;
    let mut head_end = None;
    let mut mid_end = None;
    let mut cumulative = 0u64;
    for (pos, &p) in order.iter().enumerate() {
        cumulative += table.count(p);
        let share = cumulative as f64 / total;
        if head_end.is_none() {
            if share >= boundaries.beta1 {
                head_end = Some(pos + 1);
                if share >= boundaries.beta2 {
                    mid_end = Some(pos + 1);
                    break;
                }
            }
        } else if share >= boundaries.beta2 {
            mid_end = Some(pos + 1);
            break;
        }
    }
    let head_end = head_end.unwrap_or(order.len());
    let mid_end = mid_end.unwrap_or(order.len());

    let head = order[..head_end].to_vec();
    let mid = order[head_end..mid_end].to_vec();
    let tail = order[mid_end..].to_vec();
    if head.is_empty() || mid.is_empty() || tail.is_empty() {
        return Err(PopularityError::DegeneratePartition {
            head: head.len(),
            mid: mid.len(),
            tail: tail.len(),
        });
    }
    let mut assignment = vec![Group::Low; order.len()];
    for &p in &head {
        assignment[p] = Group::High;
    }
    for &p in &mid {
        assignment[p] = Group::Mid;
    }
    Ok(GroupPartition {
        head,
        mid,
        tail,
        boundaries,
        assignment,
    })
}
