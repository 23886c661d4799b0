//! TOML run configuration.
//!
//! Every key is optional and overrides the corresponding built-in default;
//! unknown keys are hard errors so a typo cannot silently fall back. The
//! `--seed` flag outranks the file's `seed`, which outranks the default 0.

use grfg::engine::{KPolicy, RunConfig, ThresholdPolicy};
use grfg::rl::TrainCadence;
use grfg::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub steps_per_epoch: Option<usize>,
    pub cv_folds: Option<usize>,
    pub reset_per_epoch: Option<bool>,
    pub cluster_threshold: Option<ClusterThreshold>,
    pub k_policy: Option<KPolicyValue>,
    #[serde(default)]
    pub info: InfoSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub forest: ForestSection,
}

/// `"median"` or a positive number.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ClusterThreshold {
    Named(String),
    Value(f64),
}

/// `"half-group-sum"` or a positive integer.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum KPolicyValue {
    Named(String),
    Value(usize),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoSection {
    pub n_bins: Option<usize>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub gamma: Option<f64>,
    pub epsilon_start: Option<f64>,
    pub epsilon_decay: Option<f64>,
    pub epsilon_floor: Option<f64>,
    pub hidden_dim: Option<usize>,
    pub replay_capacity: Option<usize>,
    pub batch_size: Option<usize>,
    pub train_cadence: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub bootstrap: Option<bool>,
}

pub fn parse_file_config(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
}

/// Merge the file config (if any) over the defaults and resolve the seed
/// precedence. `threads` comes from the environment, never the file.
pub fn build_run_config(
    file: Option<FileConfig>,
    seed_flag: Option<u64>,
    threads: usize,
) -> Result<RunConfig> {
    let mut cfg = RunConfig {
        threads,
        ..RunConfig::default()
    };
    let file = file.unwrap_or_default();

    if let Some(v) = file.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = file.steps_per_epoch {
        cfg.steps_per_epoch = v;
    }
    if let Some(v) = file.cv_folds {
        cfg.cv_folds = v;
    }
    if let Some(v) = file.reset_per_epoch {
        cfg.reset_per_epoch = v;
    }
    if let Some(v) = file.cluster_threshold {
        cfg.threshold_policy = match v {
            ClusterThreshold::Named(s) if s == "median" => ThresholdPolicy::Median,
            ClusterThreshold::Named(s) => {
                return Err(Error::Config(format!(
                    "cluster_threshold must be \"median\" or a number, got \"{s}\""
                )))
            }
            ClusterThreshold::Value(t) => ThresholdPolicy::Fixed(t),
        };
    }
    if let Some(v) = file.k_policy {
        cfg.k_policy = match v {
            KPolicyValue::Named(s) if s == "half-group-sum" => KPolicy::HalfGroupSum,
            KPolicyValue::Named(s) => {
                return Err(Error::Config(format!(
                    "k_policy must be \"half-group-sum\" or an integer, got \"{s}\""
                )))
            }
            KPolicyValue::Value(k) => KPolicy::Fixed(k),
        };
    }
    if let Some(v) = file.info.n_bins {
        cfg.info.n_bins = v;
    }
    if let Some(v) = file.info.epsilon {
        cfg.info.epsilon = v;
    }
    if let Some(v) = file.agent.gamma {
        cfg.agent.gamma = v;
    }
    if let Some(v) = file.agent.epsilon_start {
        cfg.agent.epsilon_start = v;
    }
    if let Some(v) = file.agent.epsilon_decay {
        cfg.agent.epsilon_decay = v;
    }
    if let Some(v) = file.agent.epsilon_floor {
        cfg.agent.epsilon_floor = v;
    }
    if let Some(v) = file.agent.hidden_dim {
        cfg.agent.hidden_dim = v;
    }
    if let Some(v) = file.agent.replay_capacity {
        cfg.agent.replay_capacity = v;
    }
    if let Some(v) = file.agent.batch_size {
        cfg.agent.batch_size = v;
    }
    if let Some(v) = file.agent.train_cadence {
        cfg.agent.train_cadence = match v.as_str() {
            "per-step" => TrainCadence::PerStep,
            "per-epoch" => TrainCadence::PerEpoch,
            other => {
                return Err(Error::Config(format!(
                    "train_cadence must be \"per-step\" or \"per-epoch\", got \"{other}\""
                )))
            }
        };
    }
    if let Some(v) = file.forest.n_trees {
        cfg.forest.n_trees = v;
    }
    if let Some(v) = file.forest.max_depth {
        cfg.forest.max_depth = v;
    }
    if let Some(v) = file.forest.min_samples_split {
        cfg.forest.min_samples_split = v;
    }
    if let Some(v) = file.forest.bootstrap {
        cfg.forest.bootstrap = v;
    }

    cfg.seed = seed_flag.or(file.seed).unwrap_or(0);
    Ok(cfg)
}
