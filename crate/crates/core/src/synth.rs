//! Synthetic cohorts with known memory ground truth.
//!
//! Every user browses sessions of `slate_size` items drawn from a shared
//! catalogue: the session's unclicked items come first, then its clicks, so each
//! session forms exactly one block. Persistent users click the items best
//! aligned with a taste vector whose coordinates drift as ARFIMA(0, d, 0)
//! processes around a fixed base taste. Erratic users click uniformly at random.
//! Users alternate persistent / erratic by id.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Feedback, Interaction, InteractionLog};
use crate::memory::{simulate_arfima, MemoryError};
use crate::{ItemId, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub persistent_users: usize,
    pub erratic_users: usize,
    pub n_items: usize,
    /// Dimension of the hidden taste space.
    pub taste_dim: usize,
    pub sessions: usize,
    pub slate_size: usize,
    pub clicks_per_session: usize,
    /// Memory parameter of the taste drift.
    pub memory: f64,
    /// Scale of the drift relative to the unit-variance base taste.
    pub drift_scale: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            persistent_users: 100,
            erratic_users: 100,
            n_items: 2000,
            taste_dim: 4,
            sessions: 5000,
            slate_size: 8,
            clicks_per_session: 3,
            memory: 0.4,
            drift_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub log: InteractionLog,
    /// Users generated with persistent (long-memory) behaviour.
    pub persistent: BTreeSet<UserId>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate_cohort(cfg: &CohortConfig) -> Result<Cohort, MemoryError> {
    if cfg.clicks_per_session == 0 || cfg.clicks_per_session >= cfg.slate_size || cfg.slate_size > cfg.n_items {
        return Err(MemoryError::InvalidParameter(
            "need 0 < clicks_per_session < slate_size <= n_items".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = cfg.taste_dim;
    let items: Vec<f64> = (0..cfg.n_items * r).map(|_| gaussian(&mut rng)).collect();
    let n_users = cfg.persistent_users + cfg.erratic_users;

    let mut interactions = Vec::with_capacity(n_users * cfg.sessions * cfg.slate_size);
    let mut persistent = BTreeSet::new();
    let (mut left_p, mut left_e) = (cfg.persistent_users, cfg.erratic_users);
    for u in 0..n_users {
        let user = u as UserId;
        let is_persistent = left_e == 0 || (left_p > 0 && u % 2 == 0);
        if is_persistent {
            left_p -= 1;
            persistent.insert(user);
        } else {
            left_e -= 1;
        }
        let user_seed: u64 = rng.random();
        let mut urng = ChaCha8Rng::seed_from_u64(user_seed);
        let base: Vec<f64> = (0..r).map(|_| gaussian(&mut urng)).collect();
        let drift: Vec<Vec<f64>> = if is_persistent {
            (0..r)
                .map(|c| simulate_arfima(cfg.sessions, cfg.memory, cfg.drift_scale, user_seed ^ (c as u64 + 1)))
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };

        let mut ts = 0i64;
        for t in 0..cfg.sessions {
            let slate: Vec<ItemId> = sample(&mut urng, cfg.n_items, cfg.slate_size)
                .into_iter()
                .map(|i| i as ItemId)
                .collect();
            let mut order: Vec<usize> = (0..cfg.slate_size).collect();
            if is_persistent {
                let taste: Vec<f64> = (0..r).map(|c| base[c] + drift[c][t]).collect();
                let affinity = |i: ItemId| -> f64 {
                    let w = &items[i as usize * r..(i as usize + 1) * r];
                    w.iter().zip(&taste).map(|(a, b)| a * b).sum()
                };
                order.sort_by(|&a, &b| affinity(slate[a]).total_cmp(&affinity(slate[b])));
            } else {
                // Fisher-Yates: clicks are unrelated to the items
                for a in (1..order.len()).rev() {
                    order.swap(a, urng.random_range(0..=a));
                }
            }
            let n_neg = cfg.slate_size - cfg.clicks_per_session;
            for (pos, &slot) in order.iter().enumerate() {
                interactions.push(Interaction {
                    user,
                    item: slate[slot],
                    timestamp: ts,
                    feedback: if pos < n_neg {
                        Feedback::Negative
                    } else {
                        Feedback::Positive
                    },
                });
                ts += 1;
            }
        }
    }
    let log = InteractionLog::from_interactions(
        interactions,
        (0..n_users).map(|u| format!("u{u}")).collect(),
        (0..cfg.n_items).map(|i| format!("i{i}")).collect(),
    );
    Ok(Cohort { log, persistent })
}

/// Writes the log as tab-separated `user item label timestamp` rows (label 1 = click).
pub fn write_tsv<W: Write>(log: &InteractionLog, mut w: W) -> std::io::Result<()> {
    for x in log.interactions() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            log.user_names()[x.user as usize],
            log.item_names()[x.item as usize],
            u8::from(x.feedback.is_positive()),
            x.timestamp
        )?;
    }
    w.flush()
}
