//! The reconstruction loop.
//!
//! Each step clusters the working feature set into groups, lets the cascade
//! pick (group, operation, group), generates crossed columns, folds the
//! survivors into the working set, and scores the result with the downstream
//! forest. Rewards feed back asymmetrically: the first picker is paid the
//! standing utility of the set it acted on, the operation picker the utility
//! improvement, and the second picker the improvement plus the downstream
//! score, so later choices in the cascade carry more of the outcome.
//!
//! The working set persists across epochs unless `reset_per_epoch` is set.
//! Cross-validation folds are fixed once per run, and the forest is reseeded
//! identically for every evaluation, so scores are a pure function of the
//! feature set and runs are bit-for-bit reproducible from the master seed.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cluster::{m_clustering, m_clustering_auto, GroupPartition};
use crate::data::{stratified_kfold, DataTable, Task};
use crate::downstream::{evaluate_cv, ForestConfig, Metrics};
use crate::expr::{value_slices, Feature, Op};
use crate::generate::{default_k, generate_binary, generate_unary, postprocess};
use crate::info::{utility, InfoConfig};
use crate::rl::{AgentConfig, GroupAgent, GroupTransition, OpAgent, OpTransition, TrainCadence};
use crate::seeding::{derive_seed, stream};
use crate::staterep::{rep_feature_set, rep_operation, OP_REP_LEN, SET_REP_LEN};
use crate::{Error, Result};

/// How the clustering stop threshold is chosen at each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// Median of the current singleton distances, recomputed per clustering.
    Median,
    Fixed(f64),
}

/// How many crossed columns a binary operation emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KPolicy {
    /// `ceil((|C1| + |C2|) / 2)`, at least 1.
    HalfGroupSum,
    Fixed(usize),
}

/// Everything a run needs besides the data. One master seed drives named
/// substreams for folds, the three agents, the forest, and the random
/// baseline, so components stay decoupled but the whole run is reproducible.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub cv_folds: usize,
    pub reset_per_epoch: bool,
    pub threshold_policy: ThresholdPolicy,
    pub k_policy: KPolicy,
    pub threads: usize,
    pub info: InfoConfig,
    pub agent: AgentConfig,
    pub forest: ForestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            epochs: 30,
            steps_per_epoch: 15,
            cv_folds: 5,
            reset_per_epoch: false,
            threshold_policy: ThresholdPolicy::Median,
            k_policy: KPolicy::HalfGroupSum,
            threads: 1,
            info: InfoConfig::default(),
            agent: AgentConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

/// One step's bookkeeping. Group members are indices into the feature set as
/// it stood when the step's selections were made.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub group1: Vec<usize>,
    pub operation: String,
    pub group2: Vec<usize>,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub utility_before: f64,
    pub utility_after: f64,
    pub score: f64,
    pub feature_count: usize,
    pub best_so_far: f64,
}

/// Name and regeneration recipe of one feature in the winning set.
#[derive(Debug, Clone, Serialize)]
pub struct BestFeature {
    pub name: String,
    pub expression: String,
}

/// Full run transcript. `best_*` reflect the highest-scoring feature set
/// among the evaluated steps (earliest wins ties); the untouched original
/// set is not a contestant.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub policy: String,
    pub seed: u64,
    pub task: String,
    pub original_arity: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub records: Vec<StepRecord>,
    pub best_score: f64,
    pub best_features: Vec<BestFeature>,
    pub wall_clock_seconds: f64,
}

/// The trained cascade, in selection order.
pub struct CascadeAgents {
    pub group1: GroupAgent,
    pub op: OpAgent,
    pub group2: GroupAgent,
}

pub struct RunOutput {
    pub report: RunReport,
    /// The winning feature set with realized values.
    pub best_features: Vec<Feature>,
    /// Present after a learned run, absent after the random baseline.
    pub agents: Option<CascadeAgents>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    Grfg,
    Rdg,
}

impl Policy {
    fn name(self) -> &'static str {
        match self {
            Policy::Grfg => "grfg",
            Policy::Rdg => "rdg",
        }
    }
}

/// Run the learned cascade.
pub fn run_grfg(table: &DataTable, cfg: &RunConfig) -> Result<RunOutput> {
    run_policy(table, cfg, Policy::Grfg)
}

/// Run the random baseline: the same loop and rewards, but every selection
/// is uniform and nothing learns.
pub fn run_rdg(table: &DataTable, cfg: &RunConfig) -> Result<RunOutput> {
    run_policy(table, cfg, Policy::Rdg)
}

/// Score an explicit feature set exactly the way a run would: same fold
/// derivation, same forest seeding. A report's best score is reproducible
/// through this with the same master seed.
pub fn evaluate_feature_set(
    table: &DataTable,
    features: &[Feature],
    cfg: &RunConfig,
) -> Result<Metrics> {
    validate(cfg)?;
    let folds = stratified_kfold(table, cfg.cv_folds, derive_seed(cfg.seed, stream::FOLDS))?;
    let forest_cfg = forest_with_seed(cfg);
    evaluate_cv(
        features,
        table.target(),
        table.task(),
        &forest_cfg,
        &folds,
        cfg.threads.max(1),
    )
}

fn forest_with_seed(cfg: &RunConfig) -> ForestConfig {
    let mut f = cfg.forest.clone();
    f.seed = derive_seed(cfg.seed, stream::FOREST);
    f
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if cfg.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".to_string()));
    }
    if cfg.steps_per_epoch == 0 {
        return Err(Error::Config(
            "steps_per_epoch must be at least 1".to_string(),
        ));
    }
    if cfg.cv_folds < 2 {
        return Err(Error::Config("cv_folds must be at least 2".to_string()));
    }
    if cfg.info.n_bins == 0 {
        return Err(Error::Config("n_bins must be at least 1".to_string()));
    }
    let a = &cfg.agent;
    if !(0.0..=1.0).contains(&a.gamma) {
        return Err(Error::Config(format!(
            "gamma must be within [0, 1], got {}",
            a.gamma
        )));
    }
    if !(0.0..=1.0).contains(&a.epsilon_start) || !(0.0..=1.0).contains(&a.epsilon_floor) {
        return Err(Error::Config(
            "epsilon_start and epsilon_floor must be within [0, 1]".to_string(),
        ));
    }
    if !(a.epsilon_decay > 0.0 && a.epsilon_decay <= 1.0) {
        return Err(Error::Config(format!(
            "epsilon_decay must be within (0, 1], got {}",
            a.epsilon_decay
        )));
    }
    if a.hidden_dim == 0 {
        return Err(Error::Config("hidden_dim must be at least 1".to_string()));
    }
    if a.replay_capacity == 0 || a.batch_size == 0 {
        return Err(Error::Config(
            "replay_capacity and batch_size must be at least 1".to_string(),
        ));
    }
    if a.batch_size > a.replay_capacity {
        return Err(Error::Config(format!(
            "batch_size ({}) cannot exceed replay_capacity ({})",
            a.batch_size, a.replay_capacity
        )));
    }
    if cfg.forest.n_trees == 0 || cfg.forest.max_depth == 0 {
        return Err(Error::Config(
            "n_trees and max_depth must be at least 1".to_string(),
        ));
    }
    if let KPolicy::Fixed(0) = cfg.k_policy {
        return Err(Error::Config("fixed k must be at least 1".to_string()));
    }
    if let ThresholdPolicy::Fixed(t) = cfg.threshold_policy {
        // Negated form so NaN is rejected along with zero and negatives.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(t > 0.0) {
            return Err(Error::InvalidThreshold(t));
        }
    }
    Ok(())
}

fn cluster_features(
    features: &[Feature],
    y: &[f64],
    task: Task,
    cfg: &RunConfig,
    threads: usize,
) -> Result<GroupPartition> {
    let slices = value_slices(features);
    match cfg.threshold_policy {
        ThresholdPolicy::Median => {
            m_clustering_auto(&slices, y, &cfg.info, task, threads).map(|(p, _)| p)
        }
        ThresholdPolicy::Fixed(t) => m_clustering(&slices, y, &cfg.info, t, task, threads),
    }
}

fn group_reps(features: &[Feature], partition: &GroupPartition) -> Result<Vec<Vec<f64>>> {
    partition
        .groups
        .iter()
        .map(|g| {
            let cols: Vec<&[f64]> = g.iter().map(|&i| features[i].values.as_slice()).collect();
            rep_feature_set(&cols)
        })
        .collect()
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

fn run_policy(table: &DataTable, cfg: &RunConfig, policy: Policy) -> Result<RunOutput> {
    validate(cfg)?;
    let start = Instant::now();
    let threads = cfg.threads.max(1);
    let y = table.target();
    let task = table.task();

    let folds = stratified_kfold(table, cfg.cv_folds, derive_seed(cfg.seed, stream::FOLDS))?;
    let forest_cfg = forest_with_seed(cfg);

    let originals: Vec<Feature> = table
        .columns()
        .iter()
        .map(|(name, values)| Feature::original(name, values.clone()))
        .collect();
    let d0 = originals.len();

    let mut agents = match policy {
        Policy::Grfg => Some(CascadeAgents {
            group1: GroupAgent::new(
                SET_REP_LEN,
                SET_REP_LEN,
                &cfg.agent,
                derive_seed(cfg.seed, stream::AGENT_GROUP1),
            ),
            op: OpAgent::new(
                2 * SET_REP_LEN,
                Op::COUNT,
                &cfg.agent,
                derive_seed(cfg.seed, stream::AGENT_OP),
            ),
            group2: GroupAgent::new(
                2 * SET_REP_LEN + OP_REP_LEN,
                SET_REP_LEN,
                &cfg.agent,
                derive_seed(cfg.seed, stream::AGENT_GROUP2),
            ),
        }),
        Policy::Rdg => None,
    };
    let mut rdg_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, stream::RDG));

    // The epoch-reset baseline, computed once and cloned on demand.
    let u0 = utility(&value_slices(&originals), y, &cfg.info, task)?;
    let partition0 = cluster_features(&originals, y, task, cfg, threads)?;
    let reps0 = group_reps(&originals, &partition0)?;
    let state0 = rep_feature_set(&value_slices(&originals))?;

    let mut features = originals.clone();
    let mut u_prev = u0;
    let mut partition = partition0.clone();
    let mut cand_reps = reps0.clone();
    let mut state1 = state0.clone();
    let mut last_score: Option<f64> = None;

    let mut best_score = f64::NEG_INFINITY;
    let mut best_features = originals.clone();
    let mut records = Vec::with_capacity(cfg.epochs * cfg.steps_per_epoch);

    for epoch in 0..cfg.epochs {
        if cfg.reset_per_epoch && epoch > 0 {
            features = originals.clone();
            u_prev = u0;
            partition = partition0.clone();
            cand_reps = reps0.clone();
            state1 = state0.clone();
            last_score = None;
        }
        for step in 0..cfg.steps_per_epoch {
            let a1 = match agents.as_mut() {
                Some(c) => c.group1.choose(&state1, &cand_reps)?,
                None => rdg_rng.gen_range(0..cand_reps.len()),
            };
            let state2 = concat(&state1, &cand_reps[a1]);
            let op_idx = match agents.as_mut() {
                Some(c) => c.op.choose(&state2)?,
                None => rdg_rng.gen_range(0..Op::COUNT),
            };
            let operation = Op::ALL[op_idx];
            let op_rep = rep_operation(operation);
            let state3 = concat(&state2, &op_rep);
            let a2 = match agents.as_mut() {
                Some(c) => c.group2.choose(&state3, &cand_reps)?,
                None => rdg_rng.gen_range(0..cand_reps.len()),
            };

            let c1: Vec<Feature> = partition.groups[a1]
                .iter()
                .map(|&i| features[i].clone())
                .collect();
            let c2: Vec<Feature> = partition.groups[a2]
                .iter()
                .map(|&i| features[i].clone())
                .collect();
            let outcome = if operation.is_binary() {
                let k = match cfg.k_policy {
                    KPolicy::HalfGroupSum => default_k(c1.len(), c2.len()),
                    KPolicy::Fixed(k) => k,
                };
                generate_binary(operation, &c1, &c2, k)?
            } else {
                generate_unary(operation, &c1, &c2, y, &cfg.info, task)?
            };
            let next_features = postprocess(features.clone(), outcome, d0, y, &cfg.info, task)?;
            let changed = next_features.len() != features.len()
                || next_features
                    .iter()
                    .zip(&features)
                    .any(|(a, b)| a.name != b.name);

            // Unchanged sets keep their numbers; everything downstream is a
            // pure function of the feature set, so recomputing is waste.
            let u_new = if changed {
                utility(&value_slices(&next_features), y, &cfg.info, task)?
            } else {
                u_prev
            };
            let score = match last_score {
                Some(s) if !changed => s,
                _ => evaluate_cv(&next_features, y, task, &forest_cfg, &folds, threads)?.score,
            };

            let r1 = u_prev;
            let r2 = u_new - u_prev;
            let r3 = r2 + score;

            let (next_partition, next_reps, next_state1) = if changed {
                let p = cluster_features(&next_features, y, task, cfg, threads)?;
                let reps = group_reps(&next_features, &p)?;
                let s = rep_feature_set(&value_slices(&next_features))?;
                (p, reps, s)
            } else {
                (partition.clone(), cand_reps.clone(), state1.clone())
            };

            if let Some(c) = agents.as_mut() {
                c.group1.remember(GroupTransition {
                    state: state1.clone(),
                    action_rep: cand_reps[a1].clone(),
                    reward: r1,
                    next_state: next_state1.clone(),
                    next_candidates: next_reps.clone(),
                })?;
                let next_state2 = concat(&next_state1, &cand_reps[a1]);
                c.op.remember(OpTransition {
                    state: state2.clone(),
                    action: op_idx,
                    reward: r2,
                    next_state: next_state2.clone(),
                })?;
                let next_state3 = concat(&next_state2, &op_rep);
                c.group2.remember(GroupTransition {
                    state: state3.clone(),
                    action_rep: cand_reps[a2].clone(),
                    reward: r3,
                    next_state: next_state3,
                    next_candidates: next_reps.clone(),
                })?;
                if cfg.agent.train_cadence == TrainCadence::PerStep {
                    c.group1.train_step()?;
                    c.op.train_step()?;
                    c.group2.train_step()?;
                }
                c.group1.decay_epsilon();
                c.op.decay_epsilon();
                c.group2.decay_epsilon();
            }

            if score > best_score {
                best_score = score;
                best_features = next_features.clone();
            }
            records.push(StepRecord {
                epoch,
                step,
                group1: partition.groups[a1].clone(),
                operation: operation.name().to_string(),
                group2: partition.groups[a2].clone(),
                r1,
                r2,
                r3,
                utility_before: u_prev,
                utility_after: u_new,
                score,
                feature_count: next_features.len(),
                best_so_far: best_score,
            });

            features = next_features;
            u_prev = u_new;
            partition = next_partition;
            cand_reps = next_reps;
            state1 = next_state1;
            last_score = Some(score);
        }
        if let Some(c) = agents.as_mut() {
            if cfg.agent.train_cadence == TrainCadence::PerEpoch {
                c.group1.train_step()?;
                c.op.train_step()?;
                c.group2.train_step()?;
            }
        }
    }

    let report = RunReport {
        policy: policy.name().to_string(),
        seed: cfg.seed,
        task: task.as_str().to_string(),
        original_arity: d0,
        epochs: cfg.epochs,
        steps_per_epoch: cfg.steps_per_epoch,
        records,
        best_score,
        best_features: best_features
            .iter()
            .map(|f| BestFeature {
                name: f.name.clone(),
                expression: f.expr.render(),
            })
            .collect(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        report,
        best_features,
        agents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_table(n: usize) -> DataTable {
        let x0: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x1: Vec<f64> = (0..n).map(|i| ((i * 3) % 7) as f64).collect();
        let x2: Vec<f64> = (0..n).map(|i| ((i * i) % 5) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        DataTable::new(
            vec![
                ("x0".to_string(), x0),
                ("x1".to_string(), x1),
                ("x2".to_string(), x2),
            ],
            "y".to_string(),
            y,
            Task::Classification,
        )
        .unwrap()
    }

    fn small_cfg() -> RunConfig {
        RunConfig {
            seed: 7,
            epochs: 1,
            steps_per_epoch: 3,
            cv_folds: 3,
            agent: AgentConfig {
                hidden_dim: 8,
                batch_size: 2,
                replay_capacity: 8,
                ..AgentConfig::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn learned_run_is_deterministic() {
        let table = toy_table(30);
        let cfg = small_cfg();
        let a = run_grfg(&table, &cfg).unwrap();
        let b = run_grfg(&table, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report.records).unwrap(),
            serde_json::to_string(&b.report.records).unwrap()
        );
        assert_eq!(a.report.best_score, b.report.best_score);
        let names_a: Vec<&str> = a.best_features.iter().map(|f| f.name.as_str()).collect();
        let names_b: Vec<&str> = b.best_features.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names_a, names_b);
    }

    #[test]
    fn baseline_run_is_deterministic_and_untrained() {
        let table = toy_table(30);
        let cfg = small_cfg();
        let a = run_rdg(&table, &cfg).unwrap();
        let b = run_rdg(&table, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report.records).unwrap(),
            serde_json::to_string(&b.report.records).unwrap()
        );
        assert!(a.agents.is_none());
        assert_eq!(a.report.policy, "rdg");
    }

    #[test]
    fn records_satisfy_reward_and_size_invariants() {
        let table = toy_table(30);
        let mut cfg = small_cfg();
        cfg.epochs = 2;
        let out = run_grfg(&table, &cfg).unwrap();
        assert_eq!(out.report.records.len(), 6);
        let d0 = out.report.original_arity;
        let mut running_best = f64::NEG_INFINITY;
        for rec in &out.report.records {
            assert_eq!(rec.r1, rec.utility_before);
            assert_eq!(rec.r2, rec.utility_after - rec.utility_before);
            assert_eq!(rec.r3, rec.r2 + rec.score);
            assert!(rec.feature_count <= 2 * d0);
            assert!(rec.feature_count >= d0.min(rec.feature_count));
            if rec.score > running_best {
                running_best = rec.score;
            }
            assert_eq!(rec.best_so_far, running_best);
        }
        assert_eq!(out.report.best_score, running_best);
    }

    #[test]
    fn best_score_is_reproducible_from_best_features() {
        let table = toy_table(30);
        let cfg = small_cfg();
        let out = run_grfg(&table, &cfg).unwrap();
        let metrics = evaluate_feature_set(&table, &out.best_features, &cfg).unwrap();
        assert_eq!(metrics.score, out.report.best_score);
    }

    #[test]
    fn reset_per_epoch_restarts_from_the_original_set() {
        let table = toy_table(30);
        let mut cfg = small_cfg();
        cfg.epochs = 2;
        cfg.steps_per_epoch = 1;
        cfg.reset_per_epoch = true;
        let out = run_grfg(&table, &cfg).unwrap();
        let recs = &out.report.records;
        assert_eq!(recs[1].utility_before, recs[0].utility_before);
    }

    #[test]
    fn learned_run_returns_the_cascade() {
        let table = toy_table(30);
        let out = run_grfg(&table, &small_cfg()).unwrap();
        let cascade = out.agents.expect("cascade present");
        assert_eq!(cascade.op.n_actions(), Op::COUNT);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let table = toy_table(30);
        let mut cfg = small_cfg();
        cfg.epochs = 0;
        assert!(run_grfg(&table, &cfg).is_err());

        let mut cfg = small_cfg();
        cfg.cv_folds = 1;
        assert!(run_grfg(&table, &cfg).is_err());

        let mut cfg = small_cfg();
        cfg.agent.batch_size = 99;
        assert!(run_grfg(&table, &cfg).is_err());

        let mut cfg = small_cfg();
        cfg.k_policy = KPolicy::Fixed(0);
        assert!(run_grfg(&table, &cfg).is_err());

        let mut cfg = small_cfg();
        cfg.threshold_policy = ThresholdPolicy::Fixed(-1.0);
        assert!(matches!(
            run_grfg(&table, &cfg),
            Err(Error::InvalidThreshold(_))
        ));
    }
}
