//! Interaction data: parsing, interning, rating scaling, provider mapping
//! and a seeded Zipf generator for long-tail fixtures.

use std::collections::hash_map::Entry as MapEntry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: malformed line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: count must be positive, got {count}")]
    NonPositiveCount { line: usize, count: i64 },
    #[error("dataset contains no interactions")]
    EmptyDataset,
    #[error("item `{0}` has no provider in the provider map")]
    UnmappedItem(String),
    #[error("item `{item}` is mapped to both `{first}` and `{second}`")]
    ConflictingMapping {
        item: String,
        first: String,
        second: String,
    },
    #[error("invalid record #{index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// One aggregated (user, item) interaction with its number of events.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InteractionRecord {
    pub user: String,
    pub item: String,
    pub count: u64,
}

impl InteractionRecord {
    pub fn new(user: impl Into<String>, item: impl Into<String>, count: u64) -> Self {
        Self {
            user: user.into(),
            item: item.into(),
            count,
        }
    }
}

/// Column layout of an interactions file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dialect {
    pub delimiter: char,
    pub user_column: usize,
    pub item_column: usize,
    pub count_column: usize,
}

impl Default for Dialect {
    fn default() -> Self {
        Self {
            delimiter: '\t',
            user_column: 0,
            item_column: 1,
            count_column: 2,
        }
    }
}

impl Dialect {
    fn columns(&self) -> usize {
        1 + self
            .user_column
            .max(self.item_column)
            .max(self.count_column)
    }
}

/// Yields `(1-based line number, content)` for every non-blank, non-comment line.
fn data_lines(source: &str) -> impl Iterator<Item = (usize, &str)> {
    source.lines().enumerate().filter_map(|(idx, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((idx + 1, line))
        }
    })
}

/// Parses interaction lines, summing the counts of repeated (user, item) pairs.
///
/// Records come back in order of first appearance of each pair.
pub fn parse_interactions(
    source: &str,
    dialect: &Dialect,
) -> Result<Vec<InteractionRecord>, DatasetError> {
    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let expected = dialect.columns();

    for (line, content) in data_lines(source) {
        let fields: Vec<&str> = content.split(dialect.delimiter).collect();
        if fields.len() != expected {
            return Err(DatasetError::MalformedLine {
                line,
                reason: format!("expected {} columns, found {}", expected, fields.len()),
            });
        }
        let user = fields[dialect.user_column].trim();
        let item = fields[dialect.item_column].trim();
        if user.is_empty() || item.is_empty() {
            return Err(DatasetError::MalformedLine {
                line,
                reason: "empty user or item identifier".into(),
            });
        }
        let raw_count = fields[dialect.count_column].trim();
        let count: i64 = raw_count.parse().map_err(|_| DatasetError::MalformedLine {
            line,
            reason: format!("count `{raw_count}` is not an integer"),
        })?;
        if count <= 0 {
            return Err(DatasetError::NonPositiveCount { line, count });
        }
        let count = count as u64;

        match index.entry((user.to_owned(), item.to_owned())) {
            MapEntry::Occupied(slot) => records[*slot.get()].count += count,
            MapEntry::Vacant(slot) => {
                slot.insert(records.len());
                records.push(InteractionRecord::new(user, item, count));
            }
        }
    }
    Ok(records)
}

/// Serializes records in the interactions file format.
pub fn write_interactions(records: &[InteractionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.user);
        out.push('\t');
        out.push_str(&r.item);
        out.push('\t');
        out.push_str(&r.count.to_string());
        out.push('\n');
    }
    out
}

/// A stored matrix cell. `value` is the rating seen by the algorithms,
/// `count` the raw number of events it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub item: usize,
    pub value: f64,
    pub count: u64,
}

/// Immutable sparse user x item matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    users: Vec<String>,
    items: Vec<String>,
    rows: Vec<Vec<Entry>>,
}

/// Builds the matrix, interning users and items in first-appearance order.
pub fn build_matrix(records: &[InteractionRecord]) -> Result<InteractionMatrix, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut users = Vec::new();
    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut items = Vec::new();
    let mut item_index: HashMap<&str, usize> = HashMap::new();
    let mut cells: Vec<BTreeMap<usize, u64>> = Vec::new();

    for (index, r) in records.iter().enumerate() {
        if r.user.is_empty() || r.item.is_empty() {
            return Err(DatasetError::InvalidRecord {
                index,
                reason: "empty identifier".into(),
            });
        }
        if r.count == 0 {
            return Err(DatasetError::InvalidRecord {
                index,
                reason: "count must be at least 1".into(),
            });
        }
        let u = *user_index.entry(r.user.as_str()).or_insert_with(|| {
            users.push(r.user.clone());
            cells.push(BTreeMap::new());
            users.len() - 1
        });
        let i = *item_index.entry(r.item.as_str()).or_insert_with(|| {
            items.push(r.item.clone());
            items.len() - 1
        });
        *cells[u].entry(i).or_insert(0) += r.count;
    }

    let rows = cells
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(item, count)| Entry {
                    item,
                    value: count as f64,
                    count,
                })
                .collect()
        })
        .collect();
    Ok(InteractionMatrix { users, items, rows })
}

impl InteractionMatrix {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Number of stored (user, item) cells.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.users[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.items[item]
    }

    /// Row of `user`, sorted by item index.
    pub fn row(&self, user: usize) -> &[Entry] {
        &self.rows[user]
    }

    pub fn rows(&self) -> &[Vec<Entry>] {
        &self.rows
    }

    pub fn value(&self, user: usize, item: usize) -> Option<f64> {
        let row = &self.rows[user];
        row.binary_search_by_key(&item, |e| e.item)
            .ok()
            .map(|pos| row[pos].value)
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.rows[user]
            .binary_search_by_key(&item, |e| e.item)
            .is_ok()
    }

    /// Total raw events per item.
    pub fn item_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.items.len()];
        for e in self.rows.iter().flatten() {
            counts[e.item] += e.count;
        }
        counts
    }

    pub fn total_count(&self) -> u64 {
        self.rows.iter().flatten().map(|e| e.count).sum()
    }

    pub fn value_sum(&self) -> f64 {
        self.rows.iter().flatten().map(|e| e.value).sum()
    }

    /// Column view: for each item, `(user, value)` pairs in ascending user order.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.items.len()];
        for (u, row) in self.rows.iter().enumerate() {
            for e in row {
                cols[e.item].push((u, e.value));
            }
        }
        cols
    }

    fn map_values(&self, mut f: impl FnMut(&[Entry]) -> Vec<f64>) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let values = f(row);
                row.iter()
                    .zip(values)
                    .map(|(e, value)| Entry { value, ..*e })
                    .collect()
            })
            .collect();
        Self {
            users: self.users.clone(),
            items: self.items.clone(),
            rows,
        }
    }
}

/// How raw counts become ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingScheme {
    #[default]
    Raw,
    /// `ln(1 + count)`
    Log,
    /// Affine map of each user's counts onto `[1, 1000]`.
    MinMax,
}

impl FromStr for ScalingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Self::Raw),
            "log" => Ok(Self::Log),
            "minmax" | "per-user-minmax" => Ok(Self::MinMax),
            other => Err(format!("unknown scaling scheme `{other}` (raw|log|minmax)")),
        }
    }
}

impl fmt::Display for ScalingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::Log => "log",
            Self::MinMax => "minmax",
        })
    }
}

pub const MINMAX_LOW: f64 = 1.0;
pub const MINMAX_HIGH: f64 = 1000.0;

/// Rescales ratings from raw counts. Support and raw counts are untouched.
pub fn scale_ratings(matrix: &InteractionMatrix, scheme: ScalingScheme) -> InteractionMatrix {
    match scheme {
        ScalingScheme::Raw => matrix.map_values(|row| row.iter().map(|e| e.count as f64).collect()),
        ScalingScheme::Log => {
            matrix.map_values(|row| row.iter().map(|e| (e.count as f64).ln_1p()).collect())
        }
        ScalingScheme::MinMax => matrix.map_values(|row| {
            let lo = row.iter().map(|e| e.count).min().unwrap_or(0);
            let hi = row.iter().map(|e| e.count).max().unwrap_or(0);
            if lo == hi {
                return vec![MINMAX_HIGH; row.len()];
            }
            let span = (hi - lo) as f64;
            row.iter()
                .map(|e| {
                    let t = (e.count - lo) as f64 / span;
                    (MINMAX_LOW + t * (MINMAX_HIGH - MINMAX_LOW)).clamp(MINMAX_LOW, MINMAX_HIGH)
                })
                .collect()
        }),
    }
}

/// Total map from item index to provider index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemProviderMap {
    item_provider: Vec<usize>,
    providers: Vec<String>,
}

impl ItemProviderMap {
    /// Every item is its own provider.
    pub fn identity(matrix: &InteractionMatrix) -> Self {
        Self {
            item_provider: (0..matrix.num_items()).collect(),
            providers: matrix.items().to_vec(),
        }
    }

    pub fn num_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_provider.len()
    }

    pub fn provider_of(&self, item: usize) -> usize {
        self.item_provider[item]
    }

    pub fn providers(&self) -> &[String] {
        &self.providers
    }

    pub fn provider_id(&self, provider: usize) -> &str {
        &self.providers[provider]
    }
}

/// Reads `item<TAB>provider` lines. Lines for items absent from `matrix`
/// are ignored, so every interned provider owns at least one matrix item.
pub fn load_provider_map(
    source: &str,
    matrix: &InteractionMatrix,
) -> Result<ItemProviderMap, DatasetError> {
    let item_index: HashMap<&str, usize> = matrix
        .items()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut assigned: Vec<Option<usize>> = vec![None; matrix.num_items()];
    let mut providers: Vec<String> = Vec::new();
    let mut provider_index: HashMap<String, usize> = HashMap::new();

    for (line, content) in data_lines(source) {
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.len() != 2 {
            return Err(DatasetError::MalformedLine {
                line,
                reason: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let (item, provider) = (fields[0].trim(), fields[1].trim());
        if item.is_empty() || provider.is_empty() {
            return Err(DatasetError::MalformedLine {
                line,
                reason: "empty item or provider identifier".into(),
            });
        }
        let Some(&i) = item_index.get(item) else {
            continue;
        };
        match assigned[i] {
            Some(p) if providers[p] != provider => {
                return Err(DatasetError::ConflictingMapping {
                    item: item.to_owned(),
                    first: providers[p].clone(),
                    second: provider.to_owned(),
                });
            }
            Some(_) => {}
            None => {
                let p = *provider_index
                    .entry(provider.to_owned())
                    .or_insert_with(|| {
                        providers.push(provider.to_owned());
                        providers.len() - 1
                    });
                assigned[i] = Some(p);
            }
        }
    }

    let item_provider = assigned
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| DatasetError::UnmappedItem(matrix.item_id(i).to_owned())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ItemProviderMap {
        item_provider,
        providers,
    })
}

/// Parameters of the Zipf interaction generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub events_per_user: u64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.num_users == 0 {
            return Err(DatasetError::InvalidParameter(
                "num_users must be positive".into(),
            ));
        }
        if self.num_items == 0 {
            return Err(DatasetError::InvalidParameter(
                "num_items must be positive".into(),
            ));
        }
        if self.events_per_user == 0 {
            return Err(DatasetError::InvalidParameter(
                "events_per_user must be positive".into(),
            ));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent > 0.0) {
            return Err(DatasetError::InvalidParameter(
                "zipf_exponent must be a positive finite number".into(),
            ));
        }
        Ok(())
    }
}

/// Inverse-CDF sampler over ranks `0..n` with `P(rank) ∝ (rank + 1)^-s`.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    pub fn new(n: usize, exponent: f64) -> Self {
        assert!(n > 0, "Zipf table needs at least one rank");
        let weights: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-exponent)).collect();
        let norm: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / norm;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Self { cdf }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn probability(&self, rank: usize) -> f64 {
        if rank == 0 {
            self.cdf[0]
        } else {
            self.cdf[rank] - self.cdf[rank - 1]
        }
    }

    /// Maps `u ∈ [0, 1)` to the first rank whose cumulative mass exceeds it.
    pub fn rank_for(&self, u: f64) -> usize {
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.rank_for(rng.gen::<f64>())
    }
}

/// Draws `events_per_user` Zipf-distributed items per user and aggregates
/// them into counts. Users are `u{index}`, items `i{rank}` with `i0` the
/// most probable. Each user draws from its own seeded stream.
pub fn generate_synthetic(
    config: &SyntheticConfig,
) -> Result<Vec<InteractionRecord>, DatasetError> {
    config.validate()?;
    let table = ZipfTable::new(config.num_items, config.zipf_exponent);
    let per_user: Vec<Vec<InteractionRecord>> = (0..config.num_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = seed::stream(config.seed, u as u64);
            let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
            for _ in 0..config.events_per_user {
                *counts.entry(table.sample(&mut rng)).or_insert(0) += 1;
            }
            let user = format!("u{u}");
            counts
                .into_iter()
                .map(|(rank, count)| {
                    InteractionRecord::new(user.clone(), format!("i{rank}"), count)
                })
                .collect()
        })
        .collect();
    Ok(per_user.into_iter().flatten().collect())
}
