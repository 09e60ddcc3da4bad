//! Interaction logs: parsing, interning, temporal splitting and block construction.

mod binary;
mod blocks;
mod split;
mod stats;

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{ItemId, UserId};

pub use binary::{read_normalized, write_normalized, NORMALIZED_MAGIC};
pub use blocks::{build_blocks, user_blocks, Block};
pub use split::{temporal_split, SplitDataset};
pub use stats::{dataset_stats, DatasetStats};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input contains no valid interaction rows ({skipped} rows skipped)")]
    EmptyInput { skipped: usize },
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("no user has two or more interactions; nothing to split")]
    NothingToSplit,
    #[error("malformed normalized interaction file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary implicit-feedback label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feedback {
    Positive,
    Negative,
}

impl Feedback {
    pub fn is_positive(self) -> bool {
        self == Feedback::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    /// Only used for ordering.
    pub timestamp: i64,
    pub feedback: Feedback,
}

/// Rule turning the raw feedback column into a binary label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PositiveRule {
    /// Numeric feedback `>= threshold` is positive (`rating>=4`).
    AtLeast(f64),
    /// Feedback equal to the given token is positive (`label==1`).
    Equals(String),
}

impl PositiveRule {
    /// Returns `None` when the raw value cannot be interpreted under this rule.
    pub fn apply(&self, raw: &str) -> Option<Feedback> {
        let raw = raw.trim();
        let positive = match self {
            PositiveRule::AtLeast(threshold) => raw.parse::<f64>().ok()? >= *threshold,
            PositiveRule::Equals(token) => raw == token,
        };
        Some(if positive {
            Feedback::Positive
        } else {
            Feedback::Negative
        })
    }
}

impl FromStr for PositiveRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(pos) = s.find(">=") {
            let value = s[pos + 2..].trim();
            value
                .parse::<f64>()
                .map(PositiveRule::AtLeast)
                .map_err(|_| format!("threshold `{value}` in rule `{s}` is not a number"))
        } else if let Some(pos) = s.find("==") {
            let value = s[pos + 2..].trim();
            if value.is_empty() {
                return Err(format!("rule `{s}` has an empty label"));
            }
            Ok(PositiveRule::Equals(value.to_string()))
        } else {
            Err(format!(
                "unrecognised positive rule `{s}` (expected e.g. `rating>=4` or `label==1`)"
            ))
        }
    }
}

impl TryFrom<String> for PositiveRule {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<PositiveRule> for String {
    fn from(rule: PositiveRule) -> Self {
        rule.to_string()
    }
}

impl fmt::Display for PositiveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositiveRule::AtLeast(t) => write!(f, "rating>={t}"),
            PositiveRule::Equals(l) => write!(f, "label=={l}"),
        }
    }
}

/// Column mapping for delimiter-separated interaction files. Column indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub delimiter: String,
    pub user_col: usize,
    pub item_col: usize,
    pub feedback_col: usize,
    pub timestamp_col: usize,
    pub has_header: bool,
    pub positive_rule: PositiveRule,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            delimiter: "\t".to_string(),
            user_col: 0,
            item_col: 1,
            feedback_col: 2,
            timestamp_col: 3,
            has_header: false,
            positive_rule: PositiveRule::AtLeast(4.0),
        }
    }
}

impl Schema {
    /// The MovieLens `ratings.dat` layout: `user::item::rating::timestamp`.
    pub fn movielens() -> Self {
        Self {
            delimiter: "::".to_string(),
            ..Self::default()
        }
    }

    fn max_col(&self) -> usize {
        self.user_col
            .max(self.item_col)
            .max(self.feedback_col)
            .max(self.timestamp_col)
    }
}

/// Time-ordered interactions grouped by user, with dense interned ids.
///
/// Users occupy `0..n_users` and items `0..n_items`, interned in order of first
/// appearance. Sequences are sorted by timestamp with the input order as tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionLog {
    interactions: Vec<Interaction>,
    offsets: Vec<usize>,
    user_names: Vec<String>,
    item_names: Vec<String>,
    skipped_rows: usize,
}

impl InteractionLog {
    /// Builds a log from interactions in input order. The sort is stable, so
    /// equal timestamps keep their relative order.
    pub fn from_interactions(
        mut interactions: Vec<Interaction>,
        user_names: Vec<String>,
        item_names: Vec<String>,
    ) -> Self {
        let n_users = user_names.len();
        debug_assert!(interactions
            .iter()
            .all(|x| (x.user as usize) < n_users && (x.item as usize) < item_names.len()));
        interactions.sort_by_key(|x| (x.user, x.timestamp));
        let mut offsets = vec![0usize; n_users + 1];
        for x in &interactions {
            offsets[x.user as usize + 1] += 1;
        }
        for u in 0..n_users {
            offsets[u + 1] += offsets[u];
        }
        Self {
            interactions,
            offsets,
            user_names,
            item_names,
            skipped_rows: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_names.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_names.len()
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    /// Rows skipped at parse time because they violated the schema.
    pub fn skipped_rows(&self) -> usize {
        self.skipped_rows
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    /// The time-ordered interactions of one user.
    pub fn user_sequence(&self, user: UserId) -> &[Interaction] {
        let u = user as usize;
        &self.interactions[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.n_users()).map(|u| u as UserId)
    }

    pub fn user_names(&self) -> &[String] {
        &self.user_names
    }

    pub fn item_names(&self) -> &[String] {
        &self.item_names
    }

    pub fn user_index(&self) -> HashMap<&str, UserId> {
        self.user_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as UserId))
            .collect()
    }

    pub fn item_index(&self) -> HashMap<&str, ItemId> {
        self.item_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as ItemId))
            .collect()
    }

    /// Users with at least one interaction.
    pub fn active_users(&self) -> usize {
        (0..self.n_users())
            .filter(|&u| self.offsets[u + 1] > self.offsets[u])
            .count()
    }

    /// Keeps only the interactions of users for which `keep` returns true.
    ///
    /// The id space is unchanged: excluded users remain addressable with empty
    /// sequences so that models trained on the result stay row-compatible.
    pub fn restrict_users(&self, mut keep: impl FnMut(UserId) -> bool) -> InteractionLog {
        let interactions = self
            .interactions
            .iter()
            .copied()
            .filter(|x| keep(x.user))
            .collect();
        InteractionLog::from_interactions(
            interactions,
            self.user_names.clone(),
            self.item_names.clone(),
        )
    }

    /// Items that occur at least once in the log.
    pub fn item_presence(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_items()];
        for x in &self.interactions {
            seen[x.item as usize] = true;
        }
        seen
    }
}

#[derive(Default)]
struct Interner {
    index: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.index.insert(name.to_string(), id);
        self.names.push(name.to_string());
        id
    }
}

/// Parses a delimiter-separated interaction stream.
///
/// Rows with missing columns, unparsable timestamps or feedback values that the
/// positive rule cannot interpret are skipped and counted. A first data row that
/// lacks a declared column is a schema error rather than a skipped row.
pub fn parse_interactions<R: BufRead>(reader: R, schema: &Schema) -> Result<InteractionLog, DataError> {
    if schema.delimiter.is_empty() {
        return Err(DataError::SchemaError {
            line: 0,
            message: "delimiter must not be empty".to_string(),
        });
    }
    let needed = schema.max_col() + 1;
    let mut users = Interner::default();
    let mut items = Interner::default();
    let mut interactions = Vec::new();
    let mut skipped = 0usize;
    let mut seen_data_row = false;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if idx == 0 && schema.has_header {
            continue;
        }
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter.as_str()).collect();
        if fields.len() < needed {
            if !seen_data_row {
                return Err(DataError::SchemaError {
                    line: line_no,
                    message: format!(
                        "schema declares column {} but the row has only {} columns",
                        needed - 1,
                        fields.len()
                    ),
                });
            }
            skipped += 1;
            continue;
        }
        seen_data_row = true;
        let user = fields[schema.user_col].trim();
        let item = fields[schema.item_col].trim();
        let Ok(timestamp) = fields[schema.timestamp_col].trim().parse::<i64>() else {
            skipped += 1;
            continue;
        };
        let Some(feedback) = schema.positive_rule.apply(fields[schema.feedback_col]) else {
            skipped += 1;
            continue;
        };
        if user.is_empty() || item.is_empty() {
            skipped += 1;
            continue;
        }
        interactions.push(Interaction {
            user: users.intern(user),
            item: items.intern(item),
            timestamp,
            feedback,
        });
    }

    if interactions.is_empty() {
        return Err(DataError::EmptyInput { skipped });
    }
    let mut log = InteractionLog::from_interactions(interactions, users.names, items.names);
    log.skipped_rows = skipped;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, schema: &Schema) -> Result<InteractionLog, DataError> {
        parse_interactions(text.as_bytes(), schema)
    }

    #[test]
    fn empty_stream_is_empty_input() {
        assert!(matches!(
            parse("", &Schema::default()),
            Err(DataError::EmptyInput { skipped: 0 })
        ));
    }

    #[test]
    fn toy_three_rows() {
        let text = "u1\ta\t1\t10\nu1\tb\t2\t11\nu1\tc\t5\t12\n";
        let log = parse(text, &Schema::default()).unwrap();
        assert_eq!(log.n_users(), 1);
        assert_eq!(log.n_items(), 3);
        let stats = dataset_stats(&log);
        assert_eq!(stats.avg_positives, 1.0);
        assert_eq!(stats.avg_negatives, 2.0);
    }

    #[test]
    fn missing_declared_column_is_schema_error() {
        let err = parse("u1\ta\t5\n", &Schema::default()).unwrap_err();
        assert!(matches!(err, DataError::SchemaError { line: 1, .. }), "{err}");
    }

    #[test]
    fn bad_rows_are_skipped_and_counted() {
        let text = "u1\ta\t5\t1\nu1\tb\t5\nu2\tc\tx\t3\nu2\td\t1\tnope\nu2\te\t1\t4\n";
        let log = parse(text, &Schema::default()).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.skipped_rows(), 3);
        assert_eq!(log.user_names(), ["u1", "u2"]);
        assert_eq!(log.item_names(), ["a", "e"]);
    }

    #[test]
    fn sorts_by_timestamp_with_input_order_tie_break() {
        let text = "u\ta\t5\t3\nu\tb\t1\t1\nu\tc\t5\t3\nu\td\t1\t2\n";
        let log = parse(text, &Schema::default()).unwrap();
        let items: Vec<_> = log.user_sequence(0).iter().map(|x| x.item).collect();
        // interned a=0 b=1 c=2 d=3
        assert_eq!(items, [1, 3, 0, 2]);
    }

    #[test]
    fn movielens_layout_and_label_rule() {
        let text = "1::1193::5::978300760\n1::661::3::978302109\n";
        let log = parse(text, &Schema::movielens()).unwrap();
        assert_eq!(log.len(), 2);
        let labels = Schema {
            delimiter: ",".into(),
            has_header: true,
            positive_rule: "label==1".parse().unwrap(),
            ..Schema::default()
        };
        let log = parse("user,item,click,ts\n7,9,1,5\n7,8,0,6\n", &labels).unwrap();
        let fb: Vec<_> = log.user_sequence(0).iter().map(|x| x.feedback).collect();
        assert_eq!(fb, [Feedback::Positive, Feedback::Negative]);
    }

    #[test]
    fn interning_is_deterministic() {
        let text = "b\tx\t5\t2\na\ty\t5\t1\nb\ty\t1\t3\n";
        let a = parse(text, &Schema::default()).unwrap();
        let b = parse(text, &Schema::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.user_names(), ["b", "a"]);
    }

    #[test]
    fn positive_rule_round_trips_through_strings() {
        for s in ["rating>=4", "label==1", "label==click"] {
            let rule: PositiveRule = s.parse().unwrap();
            assert_eq!(rule.to_string(), s);
        }
        assert!("rating>4".parse::<PositiveRule>().is_err());
        assert!(">=abc".parse::<PositiveRule>().is_err());
    }

    #[test]
    fn restrict_keeps_id_space() {
        let text = "u1\ta\t5\t1\nu2\tb\t1\t2\n";
        let log = parse(text, &Schema::default()).unwrap();
        let only = log.restrict_users(|u| u == 1);
        assert_eq!(only.n_users(), 2);
        assert_eq!(only.n_items(), 2);
        assert!(only.user_sequence(0).is_empty());
        assert_eq!(only.active_users(), 1);
        assert_eq!(only.item_presence(), [false, true]);
    }
}
