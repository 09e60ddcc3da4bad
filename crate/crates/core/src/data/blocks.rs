use crate::data::{Feedback, Interaction, InteractionLog};
use crate::{ItemId, UserId};

/// A maximal run of non-preferred items followed by the maximal run of
/// preferred items that closes it. Both sides are non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub user: UserId,
    pub negatives: Vec<ItemId>,
    pub positives: Vec<ItemId>,
    /// 1-based ordinal within the user's sequence.
    pub index: usize,
}

impl Block {
    pub fn n_pairs(&self) -> usize {
        self.negatives.len() * self.positives.len()
    }
}

/// Run-length scan over one user's time-ordered interactions.
///
/// Leading positives (no preceding negatives) and trailing negatives (no
/// following positive) produce no block.
pub fn build_blocks(sequence: &[Interaction]) -> Vec<Block> {
    let mut blocks = Vec::new();
    let Some(first) = sequence.first() else {
        return blocks;
    };
    let user = first.user;
    let mut negatives: Vec<ItemId> = Vec::new();
    let mut positives: Vec<ItemId> = Vec::new();

    for x in sequence {
        debug_assert_eq!(x.user, user);
        match x.feedback {
            Feedback::Negative => {
                // positives are only collected after a negative run, so a
                // non-empty positive run here closes a complete block
                if !positives.is_empty() {
                    blocks.push(Block {
                        user,
                        negatives: std::mem::take(&mut negatives),
                        positives: std::mem::take(&mut positives),
                        index: blocks.len() + 1,
                    });
                }
                negatives.push(x.item);
            }
            Feedback::Positive => {
                if !negatives.is_empty() {
                    positives.push(x.item);
                }
            }
        }
    }
    if !negatives.is_empty() && !positives.is_empty() {
        blocks.push(Block {
            user,
            negatives,
            positives,
            index: blocks.len() + 1,
        });
    }
    blocks
}

/// Blocks of every user, indexed by user id.
pub fn user_blocks(log: &InteractionLog) -> Vec<Vec<Block>> {
    log.users().map(|u| build_blocks(log.user_sequence(u))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(labels: &str) -> Vec<Interaction> {
        labels
            .chars()
            .enumerate()
            .map(|(t, c)| Interaction {
                user: 0,
                item: t as ItemId + 1,
                timestamp: t as i64,
                feedback: if c == '+' {
                    Feedback::Positive
                } else {
                    Feedback::Negative
                },
            })
            .collect()
    }

    fn sides(blocks: &[Block]) -> Vec<(Vec<ItemId>, Vec<ItemId>)> {
        blocks
            .iter()
            .map(|b| (b.negatives.clone(), b.positives.clone()))
            .collect()
    }

    #[test]
    fn smallest_block() {
        let blocks = build_blocks(&seq("--+"));
        assert_eq!(sides(&blocks), [(vec![1, 2], vec![3])]);
        assert_eq!(blocks[0].index, 1);
    }

    #[test]
    fn one_sided_sequences_have_no_blocks() {
        assert!(build_blocks(&seq("+")).is_empty());
        assert!(build_blocks(&seq("--")).is_empty());
        assert!(build_blocks(&[]).is_empty());
    }

    #[test]
    fn interleaved_runs() {
        let blocks = build_blocks(&seq("-++-+-"));
        assert_eq!(sides(&blocks), [(vec![1], vec![2, 3]), (vec![4], vec![5])]);
        assert_eq!(blocks.iter().map(|b| b.index).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn leading_positives_are_dropped() {
        let blocks = build_blocks(&seq("++--+"));
        assert_eq!(sides(&blocks), [(vec![3, 4], vec![5])]);
    }
}
