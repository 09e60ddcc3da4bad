//! Offline top-N evaluation: each user's test-period items are re-ranked by
//! the model and scored with MAP@K and NDCG@K against the clicked ones.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::data::InteractionLog;
use crate::model::LatentModel;
use crate::parallel::Execution;
use crate::{ItemId, UserId};

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub user: UserId,
    /// Descending score, ties broken by ascending item id.
    pub items: Vec<ItemId>,
    pub relevant: BTreeSet<ItemId>,
}

impl RankedList {
    fn hits(&self, k: usize) -> impl Iterator<Item = bool> + '_ {
        self.items.iter().take(k).map(|i| self.relevant.contains(i))
    }
}

/// Sorts the (deduplicated) candidates by `score(u, .)`.
pub fn rank_for_user(
    model: &LatentModel,
    user: UserId,
    candidates: &[ItemId],
    relevant: BTreeSet<ItemId>,
) -> RankedList {
    let mut scored: Vec<(f64, ItemId)> = candidates
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|&i| (model.score(user, i), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    RankedList {
        user,
        items: scored.into_iter().map(|(_, i)| i).collect(),
        relevant,
    }
}

/// `AP@K = sum_{j<=K} rel_j * precision@j / min(K, |relevant|)`; 0 without relevant items.
pub fn average_precision_at_k(r: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "K must be at least 1");
    if r.relevant.is_empty() {
        return 0.0;
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (j, hit) in r.hits(k).enumerate() {
        if hit {
            found += 1;
            sum += found as f64 / (j + 1) as f64;
        }
    }
    sum / k.min(r.relevant.len()) as f64
}

/// Binary-relevance NDCG@K with the ideal DCG truncated at `min(K, |relevant|)`.
pub fn ndcg_at_k(r: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "K must be at least 1");
    if r.relevant.is_empty() {
        return 0.0;
    }
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = r
        .hits(k)
        .enumerate()
        .filter(|(_, hit)| *hit)
        .map(|(pos, _)| discount(pos))
        .sum();
    let idcg: f64 = (0..k.min(r.relevant.len())).map(discount).sum();
    dcg / idcg
}

/// Mean AP@K over all lists; users without relevant items count as 0.
pub fn map_at_k(lists: &[RankedList], k: usize) -> f64 {
    assert!(!lists.is_empty(), "MAP needs at least one user");
    lists.iter().map(|r| average_precision_at_k(r, k)).sum::<f64>() / lists.len() as f64
}

pub fn mean_ndcg_at_k(lists: &[RankedList], k: usize) -> f64 {
    assert!(!lists.is_empty(), "NDCG needs at least one user");
    lists.iter().map(|r| ndcg_at_k(r, k)).sum::<f64>() / lists.len() as f64
}

/// Ranked lists for every user with test interactions: candidates are the
/// user's distinct test items, relevant ones those clicked at least once.
pub fn ranked_lists(model: &LatentModel, test: &InteractionLog, exec: Execution) -> Vec<RankedList> {
    let users: Vec<UserId> = test.users().filter(|&u| !test.user_sequence(u).is_empty()).collect();
    exec.map(&users, |&u| {
        let seq = test.user_sequence(u);
        let candidates: Vec<ItemId> = seq.iter().map(|x| x.item).collect();
        let relevant = seq
            .iter()
            .filter(|x| x.feedback.is_positive())
            .map(|x| x.item)
            .collect();
        rank_for_user(model, u, &candidates, relevant)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    #[serde(rename = "MAP")]
    Map,
    #[serde(rename = "NDCG")]
    Ndcg,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Map => "MAP",
            Metric::Ndcg => "NDCG",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub model: String,
    pub metric: Metric,
    pub k: usize,
    pub value: f64,
}

pub fn evaluate(model_name: &str, lists: &[RankedList], ks: &[usize]) -> Vec<MetricRow> {
    let mut rows = Vec::with_capacity(2 * ks.len());
    for metric in [Metric::Map, Metric::Ndcg] {
        for &k in ks {
            let value = match metric {
                Metric::Map => map_at_k(lists, k),
                Metric::Ndcg => mean_ndcg_at_k(lists, k),
            };
            rows.push(MetricRow {
                model: model_name.to_string(),
                metric,
                k,
                value,
            });
        }
    }
    rows
}

pub const METRICS_CSV_HEADER: &str = "model_name,metric,K,value";

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:.6}\n", r.model, r.metric.name(), r.k, r.value));
    }
    out
}

/// Per-user `user,metric,K,value` rows.
pub fn per_user_csv(lists: &[RankedList], ks: &[usize]) -> String {
    let mut out = String::from("user,metric,K,value\n");
    for r in lists {
        for &k in ks {
            out.push_str(&format!("{},MAP,{},{:.6}\n", r.user, k, average_precision_at_k(r, k)));
            out.push_str(&format!("{},NDCG,{},{:.6}\n", r.user, k, ndcg_at_k(r, k)));
        }
    }
    out
}
