use crate::data::{DataError, Interaction, InteractionLog};

/// Per-user temporal partition sharing one user set on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: InteractionLog,
    pub test: InteractionLog,
    pub split_ratio: f64,
    /// External ids of users dropped for having fewer than two interactions.
    pub dropped_users: Vec<String>,
}

/// `ceil(ratio * n)` that does not round up on floating-point noise
/// (`0.8 * 35` evaluates to `28.000000000000004`).
pub(crate) fn train_count(n: usize, ratio: f64) -> usize {
    let exact = ratio * n as f64;
    let nearest = exact.round();
    let cut = if (exact - nearest).abs() <= 1e-9 * (n as f64).max(1.0) {
        nearest
    } else {
        exact.ceil()
    };
    // keep one interaction for the test side
    (cut as usize).min(n - 1)
}

/// Splits every user's sequence into the oldest `ceil(ratio * n_u)` interactions
/// (train) and the remainder (test).
///
/// Users with a single interaction are dropped and user ids are re-interned
/// densely in their original order; item ids are unchanged. A user whose test
/// side would be empty gives its most recent interaction to the test side.
pub fn temporal_split(log: &InteractionLog, ratio: f64) -> Result<SplitDataset, DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::InvalidRatio(ratio));
    }
    let mut user_names = Vec::new();
    let mut dropped_users = Vec::new();
    let mut train: Vec<Interaction> = Vec::new();
    let mut test: Vec<Interaction> = Vec::new();

    for user in log.users() {
        let sequence = log.user_sequence(user);
        if sequence.len() < 2 {
            dropped_users.push(log.user_names()[user as usize].clone());
            continue;
        }
        let new_id = user_names.len() as u32;
        user_names.push(log.user_names()[user as usize].clone());
        let cut = train_count(sequence.len(), ratio);
        let relabel = |x: &Interaction| Interaction { user: new_id, ..*x };
        train.extend(sequence[..cut].iter().map(relabel));
        test.extend(sequence[cut..].iter().map(relabel));
    }
    if user_names.is_empty() {
        return Err(DataError::NothingToSplit);
    }
    let items = log.item_names().to_vec();
    Ok(SplitDataset {
        train: InteractionLog::from_interactions(train, user_names.clone(), items.clone()),
        test: InteractionLog::from_interactions(test, user_names, items),
        split_ratio: ratio,
        dropped_users,
    })
}
