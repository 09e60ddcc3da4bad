//! MOSAIC: SNAPE on every user, memory-based user filter, SNAPE again on the survivors.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::InteractionLog;
use crate::memory::{classify_all, MemoryConfig, MemoryError, MemoryReport, Verdict};
use crate::model::LatentModel;
use crate::parallel::Execution;
use crate::trainer::{train_snape, TrainConfig, TrainError, Trajectory};
use crate::UserId;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no user survived the memory filter")]
    EmptyFilter(Box<FilteredOut>),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// What a run produced before the filter emptied the population.
#[derive(Debug)]
pub struct FilteredOut {
    pub report: PipelineReport,
    pub reports: Vec<MemoryReport>,
    pub stage1: LatentModel,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Keep users whose verdict is `StationaryLRD`.
    #[default]
    Memory,
    /// Keep everybody (audit mode: stage 2 must reproduce stage 1).
    PassAll,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MosaicConfig {
    pub train: TrainConfig,
    pub memory: MemoryConfig,
    pub filter: FilterMode,
    #[serde(skip)]
    pub execution: Execution,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub stage1: Duration,
    pub memory: Duration,
    pub stage2: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub total_users: usize,
    pub stationary_users: usize,
    pub stationary_lrd_users: usize,
    pub removed_users: usize,
    pub too_short_users: usize,
    pub stage1_blocks: usize,
    pub stage2_blocks: usize,
    /// Wall-clock timings; kept out of the serialized report so reruns stay byte-identical.
    #[serde(skip)]
    pub timings: StageTimings,
}

impl PipelineReport {
    fn from_reports(reports: &[MemoryReport], kept: usize) -> Self {
        let count = |f: &dyn Fn(Verdict) -> bool| reports.iter().filter(|r| f(r.verdict)).count();
        let total_users = reports.len();
        Self {
            total_users,
            stationary_users: count(&|v| matches!(v, Verdict::StationaryLRD | Verdict::StationaryShortMemory)),
            stationary_lrd_users: count(&|v| v == Verdict::StationaryLRD),
            removed_users: total_users - kept,
            too_short_users: count(&|v| v == Verdict::TooShort),
            stage1_blocks: 0,
            stage2_blocks: 0,
            timings: StageTimings::default(),
        }
    }
}

/// Users whose trajectory is stationary and long-range dependent in every component.
pub fn filter_users(reports: &[MemoryReport]) -> BTreeSet<UserId> {
    reports
        .iter()
        .filter(|r| r.verdict == Verdict::StationaryLRD)
        .map(|r| r.user)
        .collect()
}

/// Scoring model for the shared test set: stage-2 rows for surviving users
/// and for items seen in the filtered data, stage-1 rows for everything else.
pub fn compose_scoring_model(
    stage1: &LatentModel,
    stage2: &LatentModel,
    kept: &BTreeSet<UserId>,
    stage2_items: &[bool],
) -> LatentModel {
    let mut out = stage1.clone();
    for &u in kept {
        out.user_mut(u).copy_from_slice(stage2.user(u));
    }
    for (i, &present) in stage2_items.iter().enumerate() {
        if present {
            out.item_mut(i as u32).copy_from_slice(stage2.item(i as u32));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct MosaicOutput {
    pub stage1: LatentModel,
    pub stage2: LatentModel,
    pub scoring: LatentModel,
    pub trajectories: Vec<Trajectory>,
    pub reports: Vec<MemoryReport>,
    pub kept: BTreeSet<UserId>,
    pub report: PipelineReport,
}

pub fn run_mosaic(train: &InteractionLog, cfg: &MosaicConfig) -> Result<MosaicOutput, PipelineError> {
    let t0 = Instant::now();
    let stage1 = train_snape(train, &cfg.train)?;
    let t1 = Instant::now();

    let reports = classify_all(&stage1.trajectories, &cfg.memory, cfg.execution)?;
    let kept: BTreeSet<UserId> = match cfg.filter {
        FilterMode::Memory => filter_users(&reports),
        FilterMode::PassAll => train.users().collect(),
    };
    let mut report = PipelineReport::from_reports(&reports, kept.len());
    report.stage1_blocks = stage1.blocks_per_epoch.iter().sum();
    let t2 = Instant::now();

    if kept.is_empty() {
        report.timings = StageTimings {
            stage1: t1 - t0,
            memory: t2 - t1,
            stage2: Duration::ZERO,
        };
        return Err(PipelineError::EmptyFilter(Box::new(FilteredOut {
            report,
            reports,
            stage1: stage1.model,
            trajectories: stage1.trajectories,
        })));
    }

    let filtered = train.restrict_users(|u| kept.contains(&u));
    let stage2 = train_snape(&filtered, &cfg.train)?;
    let t3 = Instant::now();
    report.stage2_blocks = stage2.blocks_per_epoch.iter().sum();
    report.timings = StageTimings {
        stage1: t1 - t0,
        memory: t2 - t1,
        stage2: t3 - t2,
    };

    let scoring = compose_scoring_model(&stage1.model, &stage2.model, &kept, &filtered.item_presence());
    Ok(MosaicOutput {
        stage1: stage1.model,
        stage2: stage2.model,
        scoring,
        trajectories: stage1.trajectories,
        reports,
        kept,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::ComponentReport;

    fn report(user: UserId, verdict: Verdict) -> MemoryReport {
        MemoryReport {
            user,
            components: Vec::<ComponentReport>::new(),
            verdict,
        }
    }

    #[test]
    fn filter_keeps_exactly_lrd_users() {
        let all_lrd: Vec<_> = (0..5).map(|u| report(u, Verdict::StationaryLRD)).collect();
        assert_eq!(filter_users(&all_lrd), (0..5).collect());
        let none: Vec<_> = (0..5).map(|u| report(u, Verdict::NonStationary)).collect();
        assert!(filter_users(&none).is_empty());
        let mixed = vec![
            report(0, Verdict::StationaryShortMemory),
            report(1, Verdict::StationaryLRD),
            report(2, Verdict::TooShort),
            report(3, Verdict::StationaryLRD),
        ];
        assert_eq!(filter_users(&mixed), [1, 3].into_iter().collect());
        let r = PipelineReport::from_reports(&mixed, 2);
        assert_eq!((r.total_users, r.stationary_users, r.stationary_lrd_users, r.removed_users), (4, 3, 2, 2));
    }

    #[test]
    fn composition_takes_rows_from_the_right_stage() {
        let s1 = LatentModel::init(3, 4, 2, 0.0, 1);
        let s2 = LatentModel::init(3, 4, 2, 0.0, 2);
        let kept: BTreeSet<UserId> = [1].into_iter().collect();
        let m = compose_scoring_model(&s1, &s2, &kept, &[true, false, true, false]);
        assert_eq!(m.user(0), s1.user(0));
        assert_eq!(m.user(1), s2.user(1));
        assert_eq!(m.user(2), s1.user(2));
        assert_eq!(m.item(0), s2.item(0));
        assert_eq!(m.item(1), s1.item(1));
        assert_eq!(m.item(2), s2.item(2));
    }
}
