//! Latent factor model, the regularized logistic pairwise loss and the block
//! ranking loss with its analytic gradient.

use std::io::{Read, Write};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::Block;
use crate::{ItemId, UserId};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"MOSAIC1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("update produced a non-finite parameter (learning rate too large?)")]
    NonFiniteUpdate,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Label of a triplet `(u, i, i')`: whether `u` prefers `i` over `i'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripletLabel {
    Preferred,
    NotPreferred,
}

impl TripletLabel {
    pub fn sign(self) -> f64 {
        match self {
            TripletLabel::Preferred => 1.0,
            TripletLabel::NotPreferred => -1.0,
        }
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

/// User embeddings `U` (`n_users x dim_k`) and item embeddings `V`
/// (`n_items x dim_k`), both row-major, plus the L2 weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    users: Vec<f64>,
    items: Vec<f64>,
    n_users: usize,
    n_items: usize,
    dim_k: usize,
    reg_lambda: f64,
}

/// Gradient of a block loss. Only the block's user row and item rows are present.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    pub user: UserId,
    pub user_grad: Vec<f64>,
    /// Sorted by item id, one entry per distinct item.
    pub item_grads: Vec<(ItemId, Vec<f64>)>,
}

impl LatentModel {
    /// Entries i.i.d. uniform on `[-1/(2k), 1/(2k)]`, users first, then items.
    pub fn init(n_users: usize, n_items: usize, dim_k: usize, reg_lambda: f64, seed: u64) -> Self {
        assert!(dim_k >= 1, "dim_k must be at least 1");
        let bound = 1.0 / (2.0 * dim_k as f64);
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = (0..n_users * dim_k).map(|_| dist.sample(&mut rng)).collect();
        let items = (0..n_items * dim_k).map(|_| dist.sample(&mut rng)).collect();
        Self {
            users,
            items,
            n_users,
            n_items,
            dim_k,
            reg_lambda,
        }
    }

    pub fn zeros(n_users: usize, n_items: usize, dim_k: usize, reg_lambda: f64) -> Self {
        assert!(dim_k >= 1, "dim_k must be at least 1");
        Self {
            users: vec![0.0; n_users * dim_k],
            items: vec![0.0; n_items * dim_k],
            n_users,
            n_items,
            dim_k,
            reg_lambda,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn reg_lambda(&self) -> f64 {
        self.reg_lambda
    }

    pub fn user(&self, u: UserId) -> &[f64] {
        let k = self.dim_k;
        &self.users[u as usize * k..(u as usize + 1) * k]
    }

    pub fn user_mut(&mut self, u: UserId) -> &mut [f64] {
        let k = self.dim_k;
        &mut self.users[u as usize * k..(u as usize + 1) * k]
    }

    pub fn item(&self, i: ItemId) -> &[f64] {
        let k = self.dim_k;
        &self.items[i as usize * k..(i as usize + 1) * k]
    }

    pub fn item_mut(&mut self, i: ItemId) -> &mut [f64] {
        let k = self.dim_k;
        &mut self.items[i as usize * k..(i as usize + 1) * k]
    }

    pub fn is_finite(&self) -> bool {
        self.users.iter().chain(&self.items).all(|v| v.is_finite())
    }

    /// `U_u . V_i`
    pub fn score(&self, u: UserId, i: ItemId) -> f64 {
        dot(self.user(u), self.item(i))
    }

    /// `log(1 + exp(-y U_u (V_i - V_i'))) + lambda (|U_u|^2 + |V_i|^2 + |V_i'|^2)`
    pub fn pairwise_loss(&self, u: UserId, i: ItemId, j: ItemId, y: TripletLabel) -> f64 {
        let margin = self.score(u, i) - self.score(u, j);
        let reg = sq_norm(self.user(u)) + sq_norm(self.item(i)) + sq_norm(self.item(j));
        softplus(-y.sign() * margin) + self.reg_lambda * reg
    }

    /// Mean pairwise loss over every (preferred, non-preferred) pair of the block.
    pub fn block_loss(&self, block: &Block) -> f64 {
        let u = block.user;
        let user = self.user(u);
        let user_reg = sq_norm(user);
        let pos: Vec<(f64, f64)> = block
            .positives
            .iter()
            .map(|&i| (dot(user, self.item(i)), sq_norm(self.item(i))))
            .collect();
        let neg: Vec<(f64, f64)> = block
            .negatives
            .iter()
            .map(|&j| (dot(user, self.item(j)), sq_norm(self.item(j))))
            .collect();
        let mut total = 0.0;
        for &(si, ri) in &pos {
            for &(sj, rj) in &neg {
                total += softplus(sj - si) + self.reg_lambda * (user_reg + ri + rj);
            }
        }
        total / block.n_pairs() as f64
    }

    /// Analytic gradient of [`block_loss`](Self::block_loss).
    ///
    /// Each vector accumulates one `2 lambda v` term per pair it appears in
    /// before the `1 / (|P| |N|)` averaging.
    pub fn block_gradient(&self, block: &Block) -> SparseGradient {
        let k = self.dim_k;
        let u = block.user;
        let user = self.user(u);
        let lambda = self.reg_lambda;
        let n_pos = block.positives.len();
        let n_neg = block.negatives.len();
        let scale = 1.0 / (n_pos * n_neg) as f64;

        let pos_scores: Vec<f64> = block.positives.iter().map(|&i| dot(user, self.item(i))).collect();
        let neg_scores: Vec<f64> = block.negatives.iter().map(|&j| dot(user, self.item(j))).collect();

        // sigma(-margin) summed over the partner side of each pair
        let mut pos_weight = vec![0.0; n_pos];
        let mut neg_weight = vec![0.0; n_neg];
        for (a, &si) in pos_scores.iter().enumerate() {
            for (b, &sj) in neg_scores.iter().enumerate() {
                let c = 1.0 / (1.0 + (si - sj).exp());
                pos_weight[a] += c;
                neg_weight[b] += c;
            }
        }

        let mut distinct: Vec<ItemId> = block.positives.iter().chain(&block.negatives).copied().collect();
        distinct.sort_unstable();
        distinct.dedup();
        let mut item_grads: Vec<(ItemId, Vec<f64>)> =
            distinct.iter().map(|&i| (i, vec![0.0; k])).collect();
        let slot = |i: ItemId| distinct.binary_search(&i).expect("block item");

        let mut user_grad: Vec<f64> = user.iter().map(|&x| 2.0 * lambda * x).collect();
        for (a, &i) in block.positives.iter().enumerate() {
            let v = self.item(i);
            let w = pos_weight[a] * scale;
            let g = &mut item_grads[slot(i)].1;
            for d in 0..k {
                user_grad[d] -= w * v[d];
                g[d] += -w * user[d] + 2.0 * lambda * n_neg as f64 * scale * v[d];
            }
        }
        for (b, &j) in block.negatives.iter().enumerate() {
            let v = self.item(j);
            let w = neg_weight[b] * scale;
            let g = &mut item_grads[slot(j)].1;
            for d in 0..k {
                user_grad[d] += w * v[d];
                g[d] += w * user[d] + 2.0 * lambda * n_pos as f64 * scale * v[d];
            }
        }
        SparseGradient {
            user: u,
            user_grad,
            item_grads,
        }
    }

    /// One gradient step on the block loss. The model is left untouched if any
    /// updated entry would be non-finite.
    pub fn sgd_step(&mut self, block: &Block, learning_rate: f64) -> Result<(), ModelError> {
        let grad = self.block_gradient(block);
        self.apply(&grad, learning_rate)
    }

    pub fn apply(&mut self, grad: &SparseGradient, learning_rate: f64) -> Result<(), ModelError> {
        let new_user: Vec<f64> = self
            .user(grad.user)
            .iter()
            .zip(&grad.user_grad)
            .map(|(x, g)| x - learning_rate * g)
            .collect();
        let new_items: Vec<Vec<f64>> = grad
            .item_grads
            .iter()
            .map(|(i, g)| {
                self.item(*i)
                    .iter()
                    .zip(g)
                    .map(|(x, g)| x - learning_rate * g)
                    .collect()
            })
            .collect();
        if !new_user.iter().chain(new_items.iter().flatten()).all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteUpdate);
        }
        self.user_mut(grad.user).copy_from_slice(&new_user);
        for ((i, _), row) in grad.item_grads.iter().zip(new_items) {
            self.item_mut(*i).copy_from_slice(&row);
        }
        Ok(())
    }

    /// Header `MOSAIC1`, `dim_k`, `n_users`, `n_items` (u64 LE), `reg_lambda`
    /// (f64 LE), then `U` and `V` row-major as f64 LE.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        for v in [self.dim_k, self.n_users, self.n_items] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&self.reg_lambda.to_le_bytes())?;
        for x in self.users.iter().chain(&self.items) {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self, ModelError> {
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(ModelError::Malformed("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8], ModelError> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let dim_k = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_users = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_items = u64::from_le_bytes(next(&mut r)?) as usize;
        let reg_lambda = f64::from_le_bytes(next(&mut r)?);
        if dim_k == 0 {
            return Err(ModelError::Malformed("dim_k is zero".into()));
        }
        let mut read_block = |len: usize| -> Result<Vec<f64>, ModelError> {
            let mut bytes = vec![0u8; len * 8];
            r.read_exact(&mut bytes)?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let users = read_block(n_users * dim_k)?;
        let items = read_block(n_items * dim_k)?;
        Ok(Self {
            users,
            items,
            n_users,
            n_items,
            dim_k,
            reg_lambda,
        })
    }
}
