use serde::Serialize;

use crate::data::{build_blocks, InteractionLog};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    /// `1 - interactions / (users * items)`.
    pub sparsity: f64,
    pub avg_positives: f64,
    pub avg_negatives: f64,
    pub n_blocks: usize,
}

impl DatasetStats {
    pub const CSV_HEADER: &'static str =
        "n_users,n_items,n_interactions,sparsity,avg_positives,avg_negatives,n_blocks";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.4},{:.4},{}",
            self.n_users,
            self.n_items,
            self.n_interactions,
            self.sparsity,
            self.avg_positives,
            self.avg_negatives,
            self.n_blocks
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }
}

pub fn dataset_stats(log: &InteractionLog) -> DatasetStats {
    let n_users = log.n_users();
    let n_items = log.n_items();
    let n_interactions = log.len();
    let positives = log
        .interactions()
        .iter()
        .filter(|x| x.feedback.is_positive())
        .count();
    let negatives = n_interactions - positives;
    let n_blocks = log
        .users()
        .map(|u| build_blocks(log.user_sequence(u)).len())
        .sum();
    let cells = (n_users as f64) * (n_items as f64);
    DatasetStats {
        n_users,
        n_items,
        n_interactions,
        sparsity: if cells > 0.0 {
            1.0 - n_interactions as f64 / cells
        } else {
            0.0
        },
        avg_positives: positives as f64 / n_users.max(1) as f64,
        avg_negatives: negatives as f64 / n_users.max(1) as f64,
        n_blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_interactions, Schema};

    #[test]
    fn single_cell_is_dense() {
        let log = parse_interactions("u\ti\t5\t1\n".as_bytes(), &Schema::default()).unwrap();
        let s = dataset_stats(&log);
        assert_eq!(s.sparsity, 0.0);
        assert_eq!(s.n_blocks, 0);
    }

    #[test]
    fn csv_has_header_and_one_row() {
        let log = parse_interactions("u\ti\t1\t1\nu\tj\t5\t2\n".as_bytes(), &Schema::default()).unwrap();
        let csv = dataset_stats(&log).to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], DatasetStats::CSV_HEADER);
        assert_eq!(lines[1], "1,2,2,0.000000,1.0000,1.0000,1");
    }
}
