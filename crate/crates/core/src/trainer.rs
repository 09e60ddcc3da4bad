//! SNAPE block-sequential training with trajectory recording, and the
//! bootstrap-sampled BPR baseline.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{user_blocks, Block, InteractionLog};
use crate::model::{LatentModel, ModelError};
use crate::{ItemId, UserId};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training log has no interactions")]
    EmptyTrain,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite update at user {user}, block {block}, epoch {epoch}")]
    NonFiniteUpdate { user: UserId, block: usize, epoch: usize },
    #[error("non-finite update at BPR sample {sample}")]
    NonFiniteSample { sample: usize },
    #[error("no user has both a positive and a negative training interaction")]
    NoEligibleUsers,
    #[error("malformed trajectory record on line {line}: {message}")]
    MalformedTrajectory { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim_k: usize,
    pub reg_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Blocks between trajectory snapshots.
    pub snapshot_every: usize,
    /// Triplets drawn by the BPR baseline.
    pub bpr_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim_k: 4,
            reg_lambda: 0.01,
            learning_rate: 0.05,
            epochs: 1,
            seed: 0,
            snapshot_every: 1,
            bpr_samples: 1_000_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.dim_k == 0 {
            return bad("dim_k must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return bad("reg_lambda must be non-negative and finite");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1");
        }
        Ok(())
    }
}

/// Copies of one user's embedding taken after its block updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub user: UserId,
    pub dim_k: usize,
    pub snapshots: Vec<Vec<f64>>,
    /// Snapshot count at the end of each epoch.
    #[serde(skip)]
    pub epoch_boundaries: Vec<usize>,
}

impl Trajectory {
    pub fn new(user: UserId, dim_k: usize) -> Self {
        Self {
            user,
            dim_k,
            snapshots: Vec::new(),
            epoch_boundaries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// The time series of one embedding coordinate.
    pub fn component(&self, d: usize) -> Vec<f64> {
        self.snapshots.iter().map(|s| s[d]).collect()
    }
}

/// One JSON object per line: `{"user":..,"dim_k":..,"snapshots":[[..],..]}`.
pub fn write_trajectories<W: Write>(trajectories: &[Trajectory], mut w: W) -> Result<(), TrainError> {
    for t in trajectories {
        serde_json::to_writer(&mut w, t).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories<R: BufRead>(r: R) -> Result<Vec<Trajectory>, TrainError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trajectory = serde_json::from_str(&line).map_err(|e| TrainError::MalformedTrajectory {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if t.snapshots.iter().any(|s| s.len() != t.dim_k) {
            return Err(TrainError::MalformedTrajectory {
                line: idx + 1,
                message: format!("snapshot length differs from dim_k {}", t.dim_k),
            });
        }
        out.push(t);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SnapeOutput {
    pub model: LatentModel,
    /// Indexed by user id; users without blocks have empty trajectories.
    pub trajectories: Vec<Trajectory>,
    /// Block updates applied in each epoch.
    pub blocks_per_epoch: Vec<usize>,
}

/// Mean block loss over all blocks, or `None` when there are no blocks.
pub fn mean_block_loss(model: &LatentModel, blocks: &[Vec<Block>]) -> Option<f64> {
    let (sum, n) = blocks
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), b| (s + model.block_loss(b), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Sequential SNAPE training.
///
/// Each epoch visits users in id order and each user's blocks in time order,
/// applying one gradient step per block and recording `U_u` every
/// `snapshot_every` of that user's blocks.
pub fn train_snape(train: &InteractionLog, cfg: &TrainConfig) -> Result<SnapeOutput, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let blocks = user_blocks(train);
    let model = LatentModel::init(train.n_users(), train.n_items(), cfg.dim_k, cfg.reg_lambda, cfg.seed);
    train_snape_on_blocks(model, &blocks, cfg)
}

/// SNAPE from a given starting model over precomputed per-user blocks.
pub fn train_snape_on_blocks(
    mut model: LatentModel,
    blocks: &[Vec<Block>],
    cfg: &TrainConfig,
) -> Result<SnapeOutput, TrainError> {
    cfg.validate()?;
    let k = model.dim_k();
    let mut trajectories: Vec<Trajectory> = (0..model.n_users())
        .map(|u| Trajectory::new(u as UserId, k))
        .collect();
    let mut processed = vec![0usize; model.n_users()];
    let mut blocks_per_epoch = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut count = 0usize;
        for (u, user_blocks) in blocks.iter().enumerate() {
            let user = u as UserId;
            for block in user_blocks {
                model.sgd_step(block, cfg.learning_rate).map_err(|e| match e {
                    ModelError::NonFiniteUpdate => TrainError::NonFiniteUpdate {
                        user,
                        block: block.index,
                        epoch,
                    },
                    other => TrainError::InvalidConfig(other.to_string()),
                })?;
                count += 1;
                processed[u] += 1;
                if processed[u] % cfg.snapshot_every == 0 {
                    trajectories[u].snapshots.push(model.user(user).to_vec());
                }
            }
        }
        for t in &mut trajectories {
            t.epoch_boundaries.push(t.snapshots.len());
        }
        blocks_per_epoch.push(count);
    }
    Ok(SnapeOutput {
        model,
        trajectories,
        blocks_per_epoch,
    })
}

struct Eligible {
    user: UserId,
    positives: Vec<ItemId>,
    negatives: Vec<ItemId>,
}

fn eligible_users(train: &InteractionLog) -> Vec<Eligible> {
    train
        .users()
        .filter_map(|user| {
            let (pos, neg): (Vec<&crate::data::Interaction>, Vec<_>) = train
                .user_sequence(user)
                .iter()
                .partition(|x| x.feedback.is_positive());
            (!pos.is_empty() && !neg.is_empty()).then(|| Eligible {
                user,
                positives: pos.iter().map(|x| x.item).collect(),
                negatives: neg.iter().map(|x| x.item).collect(),
            })
        })
        .collect()
}

/// Draws a triplet `(u, i+, i-)`: user uniform over eligible users, items
/// uniform over that user's positive and negative interactions.
fn sample_triplet(pool: &[Eligible], rng: &mut ChaCha8Rng) -> (UserId, ItemId, ItemId) {
    let e = &pool[rng.random_range(0..pool.len())];
    let i = e.positives[rng.random_range(0..e.positives.len())];
    let j = e.negatives[rng.random_range(0..e.negatives.len())];
    (e.user, i, j)
}

/// Bootstrap-sampled BPR baseline: `n_samples` single-triplet SGD steps on the
/// same regularized logistic loss.
pub fn train_bpr(train: &InteractionLog, cfg: &TrainConfig, n_samples: usize) -> Result<LatentModel, TrainError> {
    cfg.validate()?;
    let pool = eligible_users(train);
    if pool.is_empty() {
        return Err(TrainError::NoEligibleUsers);
    }
    let mut model = LatentModel::init(train.n_users(), train.n_items(), cfg.dim_k, cfg.reg_lambda, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    for sample in 0..n_samples {
        let (user, i, j) = sample_triplet(&pool, &mut rng);
        let block = Block {
            user,
            negatives: vec![j],
            positives: vec![i],
            index: 1,
        };
        model
            .sgd_step(&block, cfg.learning_rate)
            .map_err(|_| TrainError::NonFiniteSample { sample })?;
    }
    Ok(model)
}

/// Mean pairwise loss over `n` triplets drawn by the BPR sampler with `seed`.
pub fn sampled_triplet_loss(model: &LatentModel, train: &InteractionLog, n: usize, seed: u64) -> Option<f64> {
    let pool = eligible_users(train);
    if pool.is_empty() || n == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = (0..n)
        .map(|_| {
            let (u, i, j) = sample_triplet(&pool, &mut rng);
            model.pairwise_loss(u, i, j, crate::model::TripletLabel::Preferred)
        })
        .sum();
    Some(total / n as f64)
}
