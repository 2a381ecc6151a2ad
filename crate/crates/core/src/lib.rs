//! Provider-side popularity bias audits for top-N recommenders.
//!
//! Interaction data is loaded into an [`InteractionMatrix`], providers are
//! split into High-P / Mid-P / Low-P groups by cumulative play share, and
//! each recommender's lists are compared against the data through the
//! Group Average Popularity of every group.

pub mod cli;
pub mod dataset;
pub mod fairness;
pub mod popularity;
pub mod recommenders;
pub mod seed;

pub use dataset::{
    build_matrix, generate_synthetic, load_provider_map, parse_interactions, scale_ratings,
    Dialect, InteractionMatrix, InteractionRecord, ItemProviderMap, ScalingScheme, SyntheticConfig,
};
pub use fairness::{audit, delta_gap, gap, AuditConfig, GapReport};
pub use popularity::{
    compute_popularity, partition_long_tail, recommendation_popularity, Boundaries, Group,
    GroupPartition, PopularityTable,
};
pub use recommenders::{
    fit, similarity, Algorithm, FittedModel, RecommendationSet, RecommenderConfig,
};
