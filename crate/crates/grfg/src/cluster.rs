//! Group-wise agglomerative clustering of features.
//!
//! Start from singletons, repeatedly merge the closest pair of groups under
//! the relevance-vs-redundancy distance from [`crate::info::group_distance`],
//! and stop once the closest pair is farther apart than the stop threshold
//! (or one group remains). Distances are fully recomputed from the pairwise
//! MI matrix after every merge; there is no incremental update formula for
//! this distance.

use crate::data::Task;
use crate::info::{discretize, mutual_information, target_labels, InfoConfig};
use crate::parallel::par_map;
use crate::{Error, Result};

/// A partition of feature indices `0..m` into nonempty disjoint groups.
/// Canonical form: members sorted ascending, groups ordered by smallest
/// member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    pub groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Total members across groups.
    pub fn n_features(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }
}

/// Relevance vector and pairwise MI matrix, shared by the threshold default
/// and the clustering loop.
struct Precomputed {
    rels: Vec<f64>,
    mi: Vec<Vec<f64>>,
}

fn precompute(
    features: &[&[f64]],
    y: &[f64],
    cfg: &InfoConfig,
    task: Task,
    threads: usize,
) -> Result<Precomputed> {
    let labels: Vec<Vec<usize>> = features
        .iter()
        .map(|f| discretize(f, cfg.n_bins))
        .collect::<Result<_>>()?;
    let yl = target_labels(y, task, cfg)?;
    let m = features.len();
    let rels: Vec<f64> = labels
        .iter()
        .map(|l| mutual_information(l, &yl))
        .collect::<Result<_>>()?;
    // The matrix is symmetric with entries computed once and mirrored, so
    // both triangles are bitwise equal by construction.
    let rows: Vec<Result<Vec<f64>>> = par_map(m, threads, |i| {
        (i + 1..m)
            .map(|j| mutual_information(&labels[i], &labels[j]))
            .collect()
    });
    let mut mi = vec![vec![0.0; m]; m];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            let j = i + 1 + off;
            mi[i][j] = v;
            mi[j][i] = v;
        }
    }
    for (i, l) in labels.iter().enumerate() {
        mi[i][i] = mutual_information(l, l)?;
    }
    Ok(Precomputed { rels, mi })
}

/// Same arithmetic as [`crate::info::group_distance`], read off the
/// precomputed quantities: iterate `a` over `gi`, `b` over `gj`, in order.
fn distance(pre: &Precomputed, gi: &[usize], gj: &[usize], epsilon: f64) -> f64 {
    let mut sum = 0.0;
    for &a in gi {
        for &b in gj {
            sum += (pre.rels[a] - pre.rels[b]).abs() / (pre.mi[a][b] + epsilon);
        }
    }
    sum / (gi.len() * gj.len()) as f64
}

/// Median of all pairwise singleton distances; the default stop threshold.
/// Recomputed per invocation on whatever feature set is current. Degenerate
/// medians (all-identical features give 0) are lifted to the smallest
/// positive float so the threshold stays positive.
pub fn default_stop_threshold(
    features: &[&[f64]],
    y: &[f64],
    cfg: &InfoConfig,
    task: Task,
    threads: usize,
) -> Result<f64> {
    let pre = precompute(features, y, cfg, task, threads)?;
    Ok(median_singleton_distance(&pre, features.len(), cfg.epsilon))
}

fn median_singleton_distance(pre: &Precomputed, m: usize, epsilon: f64) -> f64 {
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            dists.push(distance(pre, &[i], &[j], epsilon));
        }
    }
    if dists.is_empty() {
        return f64::MIN_POSITIVE;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        (dists[mid - 1] + dists[mid]) / 2.0
    };
    median.max(f64::MIN_POSITIVE)
}

/// Cluster features with an explicit stop threshold.
pub fn m_clustering(
    features: &[&[f64]],
    y: &[f64],
    cfg: &InfoConfig,
    stop_threshold: f64,
    task: Task,
    threads: usize,
) -> Result<GroupPartition> {
    // Negated form so NaN is rejected along with zero and negatives.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(stop_threshold > 0.0) {
        return Err(Error::InvalidThreshold(stop_threshold));
    }
    if features.is_empty() {
        return Err(Error::EmptyInput("clustering of empty feature set"));
    }
    if features.len() == 1 {
        return Ok(GroupPartition {
            groups: vec![vec![0]],
        });
    }
    let pre = precompute(features, y, cfg, task, threads)?;
    Ok(cluster_loop(
        &pre,
        features.len(),
        stop_threshold,
        cfg.epsilon,
    ))
}

/// Cluster with the default threshold (median of initial singleton
/// distances). Returns the partition and the threshold that was used.
pub fn m_clustering_auto(
    features: &[&[f64]],
    y: &[f64],
    cfg: &InfoConfig,
    task: Task,
    threads: usize,
) -> Result<(GroupPartition, f64)> {
    if features.is_empty() {
        return Err(Error::EmptyInput("clustering of empty feature set"));
    }
    if features.len() == 1 {
        return Ok((
            GroupPartition {
                groups: vec![vec![0]],
            },
            f64::MIN_POSITIVE,
        ));
    }
    let pre = precompute(features, y, cfg, task, threads)?;
    let threshold = median_singleton_distance(&pre, features.len(), cfg.epsilon);
    let partition = cluster_loop(&pre, features.len(), threshold, cfg.epsilon);
    Ok((partition, threshold))
}

fn cluster_loop(pre: &Precomputed, m: usize, stop_threshold: f64, epsilon: f64) -> GroupPartition {
    let mut groups: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    while groups.len() > 1 {
        // Closest pair; ties go to the lexicographically lowest (i, j).
        let mut best = (0usize, 1usize);
        let mut best_d = f64::INFINITY;
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let d = distance(pre, &groups[i], &groups[j], epsilon);
                if d < best_d {
                    best_d = d;
                    best = (i, j);
                }
            }
        }
        if best_d > stop_threshold {
            break;
        }
        let merged = groups.remove(best.1);
        groups[best.0].extend(merged);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    GroupPartition { groups }
}
