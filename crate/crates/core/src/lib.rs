//! Implicit-feedback recommender training with memory-aware user filtering.
//!
//! The crate trains user/item embeddings by block-wise sequential pairwise
//! ranking (SNAPE), estimates the long-memory parameter of every user's
//! embedding trajectory with the GPH log-periodogram regression, removes
//! users that are not both stationary and long-range dependent, and retrains
//! on the survivors (MOSAIC). A bootstrap-sampled BPR trainer is provided as
//! the baseline, and MAP@K / NDCG@K evaluate all of them on a fixed split.

pub mod data;
pub mod eval;
pub mod memory;
pub mod model;
pub mod parallel;
pub mod pipeline;
pub mod synth;
pub mod trainer;

pub use data::{
    build_blocks, dataset_stats, parse_interactions, temporal_split, Block, DataError, DatasetStats,
    Feedback, Interaction, InteractionLog, PositiveRule, Schema, SplitDataset,
};
pub use eval::{average_precision_at_k, map_at_k, ndcg_at_k, rank_for_user, RankedList};
pub use memory::{
    classify_user, gph_estimate, periodogram, simulate_arfima, stationarity_test, MemoryConfig,
    MemoryError, MemoryEstimate, MemoryReport, Verdict,
};
pub use model::{LatentModel, ModelError};
pub use parallel::Execution;
pub use pipeline::{filter_users, run_mosaic, MosaicConfig, MosaicOutput, PipelineError, PipelineReport};
pub use synth::{generate_cohort, Cohort, CohortConfig};
pub use trainer::{train_bpr, train_snape, TrainConfig, TrainError, Trajectory};

/// Interned user id, dense in `0..n_users`.
pub type UserId = u32;
/// Interned item id, dense in `0..n_items`.
pub type ItemId = u32;
