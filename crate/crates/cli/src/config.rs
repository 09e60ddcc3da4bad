//! Run configuration: one TOML file with sections, overridden by
//! `MOSAIC_<SECTION>_<KEY>` environment variables and then by `--set section.key=value`.

use std::path::{Path, PathBuf};

use mosaic_core::memory::{critical_value, MemoryConfig};
use mosaic_core::pipeline::FilterMode;
use mosaic_core::{PositiveRule, Schema, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "MOSAIC_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("override `{0}` must look like section.key=value")]
    BadOverride(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub delimiter: String,
    pub user_col: usize,
    pub item_col: usize,
    pub feedback_col: usize,
    pub timestamp_col: usize,
    pub has_header: bool,
    pub positive_rule: PositiveRule,
    pub split_ratio: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = Schema::default();
        Self {
            delimiter: s.delimiter,
            user_col: s.user_col,
            item_col: s.item_col,
            feedback_col: s.feedback_col,
            timestamp_col: s.timestamp_col,
            has_header: s.has_header,
            positive_rule: s.positive_rule,
            split_ratio: 0.8,
        }
    }
}

impl DataConfig {
    pub fn schema(&self) -> Schema {
        Schema {
            delimiter: self.delimiter.clone(),
            user_col: self.user_col,
            item_col: self.item_col,
            feedback_col: self.feedback_col,
            timestamp_col: self.timestamp_col,
            has_header: self.has_header,
            positive_rule: self.positive_rule.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Also write per-user metric rows.
    pub per_user: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![5, 10],
            per_user: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub filter: FilterMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Seeds every random draw; copied into `train.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Sequential execution. Results are identical either way; this pins the schedule.
    pub deterministic: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("mosaic-out"),
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
    pub memory: MemoryConfig,
    pub eval: EvalConfig,
    pub pipeline: PipelineSection,
    pub run: RunSection,
}

const SECTIONS: [&str; 6] = ["data", "train", "memory", "eval", "pipeline", "run"];

/// Interprets an override value as a TOML literal, falling back to a plain string.
fn literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_key(table: &mut toml::Table, section: &str, key: &str, raw: &str) -> Result<(), ConfigError> {
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(sec) = entry else {
        return Err(ConfigError::Parse(format!("`{section}` is not a section")));
    };
    sec.insert(key.to_string(), literal(raw));
    Ok(())
}

impl RunConfig {
    #[cfg(test)]
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Self::from_table(table, std::iter::empty(), &[])
    }

    /// Loads `path` (defaults if absent), then applies environment and command-line overrides.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Self, ConfigError> {
        let table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        Self::from_table(table, env, overrides)
    }

    fn from_table(
        mut table: toml::Table,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Self, ConfigError> {
        let mut env: Vec<(String, String)> = env.into_iter().collect();
        env.sort();
        for (name, value) in env {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            let rest = rest.to_ascii_lowercase();
            let Some((section, key)) = rest.split_once('_') else { continue };
            if SECTIONS.contains(&section) {
                set_key(&mut table, section, key, &value)?;
            }
        }
        for o in overrides {
            let (path, value) = o.split_once('=').ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            let (section, key) = path.trim().split_once('.').ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            set_key(&mut table, section, key, value.trim())?;
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.train.seed = cfg.run.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return bad("eval.ks must be a non-empty list of values >= 1".into());
        }
        if !(self.data.split_ratio > 0.0 && self.data.split_ratio < 1.0) {
            return bad(format!("data.split_ratio must lie in (0, 1), got {}", self.data.split_ratio));
        }
        if self.data.delimiter.is_empty() {
            return bad("data.delimiter must not be empty".into());
        }
        if let Err(e) = self.train.validate() {
            return bad(e.to_string());
        }
        if critical_value(self.memory.level).is_err() {
            return bad(format!("memory.level must be 0.01, 0.05 or 0.10, got {}", self.memory.level));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mosaic_core::memory::Bandwidth;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.eval.ks, [5, 10]);
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[train]\ndim_k = 8\n[memory]\nm_rule = \"power:0.6\"\n[data]\ndelimiter = \"::\"\n";
        let env = vec![
            ("MOSAIC_TRAIN_LEARNING_RATE".to_string(), "0.5".to_string()),
            ("MOSAIC_RUN_SEED".to_string(), "7".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let table: toml::Table = text.parse().unwrap();
        let cfg = RunConfig::from_table(table, env, &["train.dim_k=3".into(), "data.positive_rule=label==1".into()]).unwrap();
        assert_eq!(cfg.train.dim_k, 3);
        assert_eq!(cfg.train.learning_rate, 0.5);
        assert_eq!((cfg.run.seed, cfg.train.seed), (7, 7));
        assert_eq!(cfg.memory.m_rule, Bandwidth::Power(0.6));
        assert_eq!(cfg.data.schema().delimiter, "::");
        assert_eq!(cfg.data.positive_rule, PositiveRule::Equals("1".into()));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml("[train]\ndimk = 3\n").is_err());
        assert!(RunConfig::from_toml("[eval]\nks = [0]\n").is_err());
        assert!(RunConfig::from_toml("[memory]\nlevel = 0.2\n").is_err());
        assert!(RunConfig::load(None, vec![], &["nodot=1".into()]).is_err());
    }
}
