//! Spectral long-memory analysis of embedding trajectories.
//!
//! A user is kept by the filter only when every component of its trajectory
//! passes a unit-root test (rejecting non-stationarity) and has a GPH memory
//! estimate inside `(0, 1/2)`.

mod arfima;
mod spectral;
mod stationarity;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::Execution;
use crate::trainer::Trajectory;
use crate::UserId;

pub use arfima::{arfima_weights, simulate_arfima, truncation};
pub use spectral::{gph_estimate, gph_regressor, gph_std_error, max_frequency, periodogram, MemoryEstimate};
pub use stationarity::{critical_value, lag_order, stationarity_test, StationarityOutcome, MIN_STATIONARITY_LENGTH};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("frequency index {k} outside 1..=(N-1)/2 for N = {n}")]
    FrequencyOutOfRange { k: usize, n: usize },
    #[error("periodogram vanishes at frequency index {k}")]
    DegeneratePeriodogram { k: usize },
    #[error("series too short: need {needed}, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("unsupported significance level {0} (use 0.01, 0.05 or 0.10)")]
    InvalidLevel(f64),
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed memory report on line {line}: {message}")]
    MalformedReport { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How many Fourier frequencies the GPH regression uses for a series of length N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Bandwidth {
    /// `floor(sqrt(N))`
    Sqrt,
    /// `floor(N^a)`
    Power(f64),
    Fixed(usize),
}

impl Bandwidth {
    /// Bandwidth for length `n`, capped at the largest admissible frequency.
    pub fn frequencies(self, n: usize) -> usize {
        let m = match self {
            Bandwidth::Sqrt => (n as f64).sqrt().floor() as usize,
            Bandwidth::Power(a) => (n as f64).powf(a).floor() as usize,
            Bandwidth::Fixed(m) => m,
        };
        m.min(max_frequency(n))
    }
}

impl FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "sqrt" {
            return Ok(Bandwidth::Sqrt);
        }
        if let Some(a) = s.strip_prefix("power:") {
            let a: f64 = a.parse().map_err(|_| format!("bad exponent in `{s}`"))?;
            if !(a > 0.0 && a < 1.0) {
                return Err(format!("exponent in `{s}` must lie in (0, 1)"));
            }
            return Ok(Bandwidth::Power(a));
        }
        if let Some(m) = s.strip_prefix("fixed:") {
            return m.parse().map(Bandwidth::Fixed).map_err(|_| format!("bad count in `{s}`"));
        }
        Err(format!("unknown bandwidth rule `{s}` (sqrt, power:<a>, fixed:<m>)"))
    }
}

impl TryFrom<String> for Bandwidth {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Bandwidth> for String {
    fn from(b: Bandwidth) -> Self {
        b.to_string()
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Sqrt => f.write_str("sqrt"),
            Bandwidth::Power(a) => write!(f, "power:{a}"),
            Bandwidth::Fixed(m) => write!(f, "fixed:{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    /// Trajectories shorter than this are classified `TooShort`.
    pub min_length: usize,
    pub m_rule: Bandwidth,
    /// Significance level of the unit-root test.
    pub level: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            min_length: MIN_STATIONARITY_LENGTH,
            m_rule: Bandwidth::Sqrt,
            level: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    NonStationary,
    StationaryShortMemory,
    StationaryLRD,
    TooShort,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentReport {
    pub stationary: bool,
    /// Absent when the component is non-stationary or the estimate is undefined.
    pub estimate: Option<MemoryEstimate>,
}

impl ComponentReport {
    pub fn is_lrd(&self) -> bool {
        self.estimate
            .is_some_and(|e| e.d_hat > 0.0 && e.d_hat < 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryReport {
    pub user: UserId,
    pub components: Vec<ComponentReport>,
    pub verdict: Verdict,
}

#[derive(Serialize, Deserialize)]
struct ComponentRecord {
    stationary: bool,
    d_hat: Option<f64>,
    std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ReportRecord {
    user: UserId,
    verdict: Verdict,
    components: Vec<ComponentRecord>,
}

impl From<&MemoryReport> for ReportRecord {
    fn from(r: &MemoryReport) -> Self {
        ReportRecord {
            user: r.user,
            verdict: r.verdict,
            components: r
                .components
                .iter()
                .map(|c| ComponentRecord {
                    stationary: c.stationary,
                    d_hat: c.estimate.map(|e| e.d_hat),
                    std_error: c.estimate.map(|e| e.std_error),
                    m: c.estimate.map(|e| e.m),
                })
                .collect(),
        }
    }
}

/// Verdict from per-component results.
pub fn verdict_of(components: &[ComponentReport]) -> Verdict {
    if components.iter().any(|c| !c.stationary) {
        Verdict::NonStationary
    } else if !components.is_empty() && components.iter().all(ComponentReport::is_lrd) {
        Verdict::StationaryLRD
    } else {
        Verdict::StationaryShortMemory
    }
}

/// Tests each component of the trajectory for stationarity and, when it
/// passes, estimates its memory parameter with `m = m_rule(N)` frequencies.
pub fn classify_user(traj: &Trajectory, cfg: &MemoryConfig) -> Result<MemoryReport, MemoryError> {
    // surface configuration mistakes instead of folding them into verdicts
    critical_value(cfg.level)?;
    let n = traj.len();
    let too_short = MemoryReport {
        user: traj.user,
        components: Vec::new(),
        verdict: Verdict::TooShort,
    };
    if n < cfg.min_length.max(MIN_STATIONARITY_LENGTH) {
        return Ok(too_short);
    }
    let m = cfg.m_rule.frequencies(n);
    let mut components = Vec::with_capacity(traj.dim_k);
    for d in 0..traj.dim_k {
        let series = traj.component(d);
        let outcome = stationarity_test(&series, cfg.level)?;
        let estimate = if outcome.stationary {
            match gph_estimate(&series, m) {
                Ok(e) => Some(e),
                Err(MemoryError::DegeneratePeriodogram { .. } | MemoryError::TooShort { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        components.push(ComponentReport {
            stationary: outcome.stationary,
            estimate,
        });
    }
    let verdict = verdict_of(&components);
    Ok(MemoryReport {
        user: traj.user,
        components,
        verdict,
    })
}

/// Classifies every trajectory; output order follows input order.
pub fn classify_all(
    trajectories: &[Trajectory],
    cfg: &MemoryConfig,
    exec: Execution,
) -> Result<Vec<MemoryReport>, MemoryError> {
    exec.map(trajectories, |t| classify_user(t, cfg)).into_iter().collect()
}

/// JSON Lines: `{"user":..,"verdict":..,"components":[{"stationary":..,"d_hat":..,"std_error":..,"m":..}]}`.
pub fn write_reports<W: Write>(reports: &[MemoryReport], mut w: W) -> Result<(), MemoryError> {
    for r in reports {
        serde_json::to_writer(&mut w, &ReportRecord::from(r)).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports<R: BufRead>(r: R) -> Result<Vec<MemoryReport>, MemoryError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ReportRecord = serde_json::from_str(&line).map_err(|e| MemoryError::MalformedReport {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let components = rec
            .components
            .into_iter()
            .map(|c| ComponentReport {
                stationary: c.stationary,
                estimate: match (c.d_hat, c.std_error) {
                    (Some(d_hat), Some(std_error)) => Some(MemoryEstimate {
                        d_hat,
                        std_error,
                        m: c.m.unwrap_or(0),
                    }),
                    _ => None,
                },
            })
            .collect();
        out.push(MemoryReport {
            user: rec.user,
            components,
            verdict: rec.verdict,
        });
    }
    Ok(out)
}

/// Memory estimates of users whose components are all stationary, as
/// `user,component,d_hat` CSV rows.
pub fn d_hat_csv(reports: &[MemoryReport]) -> String {
    let mut out = String::from("user,component,d_hat\n");
    for r in reports {
        if !matches!(r.verdict, Verdict::StationaryLRD | Verdict::StationaryShortMemory) {
            continue;
        }
        for (c, comp) in r.components.iter().enumerate() {
            if let Some(e) = comp.estimate {
                out.push_str(&format!("{},{},{}\n", r.user, c, e.d_hat));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trajectory(components: Vec<Vec<f64>>) -> Trajectory {
        let n = components[0].len();
        Trajectory {
            user: 7,
            dim_k: components.len(),
            snapshots: (0..n).map(|t| components.iter().map(|c| c[t]).collect()).collect(),
            epoch_boundaries: vec![n],
        }
    }

    #[test]
    fn bandwidth_rules() {
        assert_eq!(Bandwidth::Sqrt.frequencies(1024), 32);
        assert_eq!(Bandwidth::Sqrt.frequencies(1000), 31);
        assert_eq!(Bandwidth::Fixed(64).frequencies(4096), 64);
        assert_eq!(Bandwidth::Fixed(64).frequencies(40), 19);
        assert_eq!(Bandwidth::Power(0.5).frequencies(4096), 64);
        for s in ["sqrt", "fixed:12", "power:0.6"] {
            assert_eq!(s.parse::<Bandwidth>().unwrap().to_string(), s);
        }
        assert!("power:1.5".parse::<Bandwidth>().is_err());
    }

    #[test]
    fn short_trajectory_is_too_short() {
        let t = trajectory(vec![vec![0.1; 20]]);
        let r = classify_user(&t, &MemoryConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::TooShort);
        assert!(r.components.is_empty());
    }

    #[test]
    fn any_random_walk_component_makes_user_non_stationary() {
        let lrd = simulate_arfima(512, 0.3, 1.0, 1).unwrap();
        let walk: Vec<f64> = simulate_arfima(512, 0.0, 1.0, 2)
            .unwrap()
            .iter()
            .scan(0.0, |s, e| {
                *s += e;
                Some(*s)
            })
            .collect();
        let t = trajectory(vec![lrd.clone(), lrd, walk]);
        let r = classify_user(&t, &MemoryConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NonStationary);
        assert!(r.components[2].estimate.is_none());
    }

    #[test]
    fn constant_component_is_short_memory() {
        let noise = simulate_arfima(256, 0.0, 1.0, 3).unwrap();
        let t = trajectory(vec![noise, vec![1.0; 256]]);
        let r = classify_user(&t, &MemoryConfig::default()).unwrap();
        assert!(r.components[1].stationary);
        assert!(r.components[1].estimate.is_none());
        assert_ne!(r.verdict, Verdict::StationaryLRD);
    }

    #[test]
    fn verdict_rules() {
        let est = |d_hat| {
            Some(MemoryEstimate {
                d_hat,
                m: 10,
                std_error: gph_std_error(10),
            })
        };
        let c = |stationary, estimate| ComponentReport { stationary, estimate };
        assert_eq!(verdict_of(&[c(true, est(0.2)), c(true, est(0.4))]), Verdict::StationaryLRD);
        assert_eq!(verdict_of(&[c(true, est(0.2)), c(true, est(0.5))]), Verdict::StationaryShortMemory);
        assert_eq!(verdict_of(&[c(true, est(0.2)), c(true, est(0.0))]), Verdict::StationaryShortMemory);
        assert_eq!(verdict_of(&[c(true, est(0.2)), c(false, None)]), Verdict::NonStationary);
    }

    #[test]
    fn classification_is_deterministic_and_reports_round_trip() {
        let series: Vec<Vec<f64>> = (0..4).map(|s| simulate_arfima(300, 0.25, 1.0, s).unwrap()).collect();
        let t = trajectory(series);
        let cfg = MemoryConfig::default();
        let a = classify_user(&t, &cfg).unwrap();
        assert_eq!(a, classify_user(&t, &cfg).unwrap());

        let mut bytes = Vec::new();
        write_reports(std::slice::from_ref(&a), &mut bytes).unwrap();
        assert_eq!(read_reports(bytes.as_slice()).unwrap(), [a]);
    }

    #[test]
    fn bad_level_is_an_error() {
        let t = trajectory(vec![simulate_arfima(64, 0.1, 1.0, 0).unwrap()]);
        let cfg = MemoryConfig {
            level: 0.2,
            ..MemoryConfig::default()
        };
        assert!(matches!(classify_user(&t, &cfg), Err(MemoryError::InvalidLevel(_))));
    }
}
