//! The downstream evaluator: a small random forest scored under fixed folds.
//!
//! Feature quality is measured by what a capacity-limited learner can do with
//! the columns, nothing more. Classification is scored by F1 (positive class
//! for binary, macro average otherwise), regression by 1 - relative absolute
//! error. Everything is deterministic given the config seed: bootstrap draws,
//! per-split feature sampling, and tie-breaking all run on derived streams.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FoldSplit, Task};
use crate::expr::Feature;
use crate::parallel::par_map;
use crate::seeding::derive_seed;
use crate::{Error, Result};

/// Forest shape and sampling controls. `features_per_split` is always
/// `ceil(sqrt(m))` for the m columns being trained on.
#[derive(Debug, Clone)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 10,
            max_depth: 10,
            min_samples_split: 2,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Cross-validated score: the mean and the per-fold values behind it.
#[derive(Debug, Clone)]
pub struct Metrics {
    pub score: f64,
    pub fold_scores: Vec<f64>,
}

enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, columns: &[&[f64]], row: usize) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if columns[*feature][row] < *threshold {
                    left.predict(columns, row)
                } else {
                    right.predict(columns, row)
                }
            }
        }
    }
}

pub struct Forest {
    trees: Vec<Node>,
    task: Task,
    n_classes: usize,
}

impl Forest {
    pub fn predict_row(&self, columns: &[&[f64]], row: usize) -> f64 {
        match self.task {
            Task::Regression => {
                let sum: f64 = self.trees.iter().map(|t| t.predict(columns, row)).sum();
                sum / self.trees.len() as f64
            }
            Task::Classification => {
                let mut votes = vec![0usize; self.n_classes];
                for t in &self.trees {
                    votes[t.predict(columns, row) as usize] += 1;
                }
                argmax_count(&votes) as f64
            }
        }
    }

    pub fn predict_rows(&self, columns: &[&[f64]], rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| self.predict_row(columns, r)).collect()
    }
}

fn argmax_count(votes: &[usize]) -> usize {
    let mut best = 0;
    for i in 1..votes.len() {
        if votes[i] > votes[best] {
            best = i;
        }
    }
    best
}

struct TreeParams {
    max_depth: usize,
    min_samples_split: usize,
    features_per_split: usize,
    n_classes: usize,
    task: Task,
}

/// Train a forest on the given rows. Per-tree seeds derive from the config
/// seed and the tree index, so trees are independent of training order.
pub fn train_forest(
    columns: &[&[f64]],
    y: &[f64],
    rows: &[usize],
    task: Task,
    cfg: &ForestConfig,
) -> Result<Forest> {
    if columns.is_empty() {
        return Err(Error::EmptyInput("forest with no feature columns"));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("forest with no training rows"));
    }
    if cfg.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".to_string()));
    }
    let m = columns.len();
    let n_classes = match task {
        Task::Classification => rows.iter().map(|&r| y[r] as usize).max().unwrap_or(0) + 1,
        Task::Regression => 0,
    };
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split.max(2),
        features_per_split: (m as f64).sqrt().ceil() as usize,
        n_classes,
        task,
    };
    let trees = (0..cfg.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64));
            let tree_rows: Vec<usize> = if cfg.bootstrap {
                (0..rows.len())
                    .map(|_| rows[rng.gen_range(0..rows.len())])
                    .collect()
            } else {
                rows.to_vec()
            };
            build_node(columns, y, tree_rows, 0, &params, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        task,
        n_classes,
    })
}

fn leaf_value(y: &[f64], rows: &[usize], params: &TreeParams) -> f64 {
    match params.task {
        Task::Regression => rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64,
        Task::Classification => {
            let mut counts = vec![0usize; params.n_classes];
            for &r in rows {
                counts[y[r] as usize] += 1;
            }
            argmax_count(&counts) as f64
        }
    }
}

fn node_impurity(y: &[f64], rows: &[usize], params: &TreeParams) -> f64 {
    match params.task {
        Task::Classification => {
            let mut counts = vec![0usize; params.n_classes];
            for &r in rows {
                counts[y[r] as usize] += 1;
            }
            gini(&counts, rows.len())
        }
        Task::Regression => {
            let n = rows.len() as f64;
            let sum: f64 = rows.iter().map(|&r| y[r]).sum();
            let sum_sq: f64 = rows.iter().map(|&r| y[r] * y[r]).sum();
            (sum_sq / n - (sum / n) * (sum / n)).max(0.0)
        }
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn build_node(
    columns: &[&[f64]],
    y: &[f64],
    rows: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Node {
    let impurity = node_impurity(y, &rows, params);
    if depth >= params.max_depth || rows.len() < params.min_samples_split || impurity == 0.0 {
        return Node::Leaf(leaf_value(y, &rows, params));
    }

    // Sample the feature subset up front so the rng draw count per node is
    // fixed, then scan in ascending index order for deterministic ties.
    let mut candidates = rand::seq::index::sample(
        rng,
        columns.len(),
        params.features_per_split.min(columns.len()),
    )
    .into_vec();
    candidates.sort_unstable();

    let mut best: Option<BestSplit> = None;
    let mut sorted = rows.clone();
    for &f in &candidates {
        sorted.sort_by(|&a, &b| columns[f][a].total_cmp(&columns[f][b]).then(a.cmp(&b)));
        scan_feature(columns, y, f, &sorted, impurity, params, &mut best);
    }

    let Some(split) = best else {
        return Node::Leaf(leaf_value(y, &rows, params));
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| columns[split.feature][r] < split.threshold);
    if left_rows.is_empty() || right_rows.is_empty() {
        let rows: Vec<usize> = left_rows.into_iter().chain(right_rows).collect();
        return Node::Leaf(leaf_value(y, &rows, params));
    }
    let left = build_node(columns, y, left_rows, depth + 1, params, rng);
    let right = build_node(columns, y, right_rows, depth + 1, params, rng);
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Sweep midpoint thresholds over one feature's sorted rows, updating `best`.
/// Only strictly better gains replace the incumbent, so the lowest feature
/// index and threshold win ties.
fn scan_feature(
    columns: &[&[f64]],
    y: &[f64],
    feature: usize,
    sorted: &[usize],
    parent_impurity: f64,
    params: &TreeParams,
    best: &mut Option<BestSplit>,
) {
    let col = columns[feature];
    let n = sorted.len();
    let nf = n as f64;
    match params.task {
        Task::Classification => {
            let mut left_counts = vec![0usize; params.n_classes];
            let mut right_counts = vec![0usize; params.n_classes];
            for &r in sorted {
                right_counts[y[r] as usize] += 1;
            }
            for i in 1..n {
                let moved = sorted[i - 1];
                left_counts[y[moved] as usize] += 1;
                right_counts[y[moved] as usize] -= 1;
                let a = col[sorted[i - 1]];
                let b = col[sorted[i]];
                if a == b {
                    continue;
                }
                let weighted = (i as f64 / nf) * gini(&left_counts, i)
                    + ((n - i) as f64 / nf) * gini(&right_counts, n - i);
                let gain = parent_impurity - weighted;
                consider(best, feature, a, b, gain);
            }
        }
        Task::Regression => {
            let total_sum: f64 = sorted.iter().map(|&r| y[r]).sum();
            let total_sq: f64 = sorted.iter().map(|&r| y[r] * y[r]).sum();
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for i in 1..n {
                let v = y[sorted[i - 1]];
                left_sum += v;
                left_sq += v * v;
                let a = col[sorted[i - 1]];
                let b = col[sorted[i]];
                if a == b {
                    continue;
                }
                let nl = i as f64;
                let nr = (n - i) as f64;
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let var_l = (left_sq / nl - (left_sum / nl) * (left_sum / nl)).max(0.0);
                let var_r = (right_sq / nr - (right_sum / nr) * (right_sum / nr)).max(0.0);
                let gain = parent_impurity - (nl / nf) * var_l - (nr / nf) * var_r;
                consider(best, feature, a, b, gain);
            }
        }
    }
}

fn consider(best: &mut Option<BestSplit>, feature: usize, a: f64, b: f64, gain: f64) {
    if gain <= 0.0 {
        return;
    }
    if let Some(cur) = best {
        if gain <= cur.gain {
            return;
        }
    }
    // Midpoint threshold; if rounding lands on the lower value the split rule
    // `x < threshold` would leave the left side empty, so use the upper value.
    let mut threshold = (a + b) / 2.0;
    if threshold <= a {
        threshold = b;
    }
    *best = Some(BestSplit {
        feature,
        threshold,
        gain,
    });
}

/// F1 score. Binary label sets ({0,1} or a subset) score the positive class
/// 1; anything else macro-averages the per-class F1 over all labels present
/// in either vector. Zero denominators yield a per-class F1 of 0.
pub fn f1_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput("f1 of empty vectors"));
    }
    let mut classes: Vec<u64> = y_true
        .iter()
        .chain(y_pred.iter())
        .map(|&v| v as u64)
        .collect();
    classes.sort_unstable();
    classes.dedup();
    let binary = classes.iter().all(|&c| c <= 1);
    if binary {
        Ok(f1_of_class(y_true, y_pred, 1))
    } else {
        let sum: f64 = classes
            .iter()
            .map(|&c| f1_of_class(y_true, y_pred, c))
            .sum();
        Ok(sum / classes.len() as f64)
    }
}

fn f1_of_class(y_true: &[f64], y_pred: &[f64], class: u64) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let t_pos = t as u64 == class;
        let p_pos = p as u64 == class;
        match (t_pos, p_pos) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// `1 - sum|y - yhat| / sum|y - mean(y)|`. Errors when the true values are
/// constant (zero denominator).
pub fn one_minus_rae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput(
            "relative absolute error of empty vectors",
        ));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let denom: f64 = y_true.iter().map(|&t| (t - mean).abs()).sum();
    if denom == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let num: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(&t, &p)| (t - p).abs())
        .sum();
    Ok(1.0 - num / denom)
}

/// Score a feature set under fixed folds: train on each fold's training rows,
/// score its test rows, average. Fold `i` trains with seed `cfg.seed + i`.
pub fn evaluate_cv(
    features: &[Feature],
    y: &[f64],
    task: Task,
    cfg: &ForestConfig,
    folds: &FoldSplit,
    threads: usize,
) -> Result<Metrics> {
    if features.is_empty() {
        return Err(Error::EmptyInput("evaluation of empty feature set"));
    }
    let columns: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    let fold_scores: Vec<f64> = par_map(folds.folds.len(), threads, |i| {
        let fold = &folds.folds[i];
        let mut fold_cfg = cfg.clone();
        fold_cfg.seed = cfg.seed.wrapping_add(i as u64);
        let forest = train_forest(&columns, y, &fold.train, task, &fold_cfg)?;
        let preds = forest.predict_rows(&columns, &fold.test);
        let truth: Vec<f64> = fold.test.iter().map(|&r| y[r]).collect();
        match task {
            Task::Classification => f1_score(&truth, &preds),
            Task::Regression => one_minus_rae(&truth, &preds),
        }
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(Metrics { score, fold_scores })
}
