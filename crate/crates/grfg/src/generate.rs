//! Crossing feature groups into new columns, and keeping the set small.
//!
//! Binary operations cross two groups pair-wise, preferring the most
//! dissimilar pairs by cosine similarity (similar columns combine into
//! redundant ones). Unary operations apply to every member of whichever group
//! is more relevant to the target. After generation the working set is capped
//! at twice the original arity by mutual-information selection.

use crate::data::Task;
use crate::expr::{apply_op, Feature, FeatureExpr, Op};
use crate::info::{group_relevance, relevance, InfoConfig};
use crate::{Error, Result};

/// Which generation rule produced the columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Binary op over the top-K most dissimilar cross pairs.
    BinaryCross,
    /// Unary op over every member of the more relevant group.
    UnaryRelevant,
}

/// The columns produced by one generation step.
#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub features: Vec<Feature>,
    pub scenario: Scenario,
}

/// Cosine similarity of two equal-length vectors; 0 when either norm is 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Default K for binary crossing: half the combined group size, rounded up,
/// at least 1.
pub fn default_k(c1_len: usize, c2_len: usize) -> usize {
    ((c1_len + c2_len).div_ceil(2)).max(1)
}

/// Cross two groups with a binary operation. All `|C1| x |C2|` pairs are
/// ranked by ascending cosine similarity (ties: lowest index pair), and the
/// `min(k, |C1| x |C2|)` most dissimilar become columns, the first group's
/// member always the left operand.
pub fn generate_binary(
    op: Op,
    c1: &[Feature],
    c2: &[Feature],
    k: usize,
) -> Result<GenerationOutcome> {
    if !op.is_binary() {
        return Err(Error::Internal(format!("generate_binary with {op}")));
    }
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::EmptyInput("binary generation with an empty group"));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".to_string()));
    }
    let mut ranked: Vec<(f64, usize, usize)> = Vec::with_capacity(c1.len() * c2.len());
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            ranked.push((cosine_similarity(&a.values, &b.values)?, i, j));
        }
    }
    ranked.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| x.1.cmp(&y.1))
            .then_with(|| x.2.cmp(&y.2))
    });
    ranked.truncate(k.min(ranked.len()));
    let features = ranked
        .into_iter()
        .map(|(_, i, j)| {
            let expr = FeatureExpr::binary(op, c1[i].expr.clone(), c2[j].expr.clone());
            let values = apply_op(op, &c1[i].values, Some(&c2[j].values))?;
            Ok(Feature::new(expr, values))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GenerationOutcome {
        features,
        scenario: Scenario::BinaryCross,
    })
}

/// Apply a unary operation to every member of the more relevant of the two
/// groups (ties keep the first).
pub fn generate_unary(
    op: Op,
    c1: &[Feature],
    c2: &[Feature],
    y: &[f64],
    cfg: &InfoConfig,
    task: Task,
) -> Result<GenerationOutcome> {
    if op.is_binary() {
        return Err(Error::Internal(format!("generate_unary with {op}")));
    }
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::EmptyInput("unary generation with an empty group"));
    }
    let v1: Vec<&[f64]> = c1.iter().map(|f| f.values.as_slice()).collect();
    let v2: Vec<&[f64]> = c2.iter().map(|f| f.values.as_slice()).collect();
    let r1 = group_relevance(&v1, y, cfg, task)?;
    let r2 = group_relevance(&v2, y, cfg, task)?;
    let chosen = if r2 > r1 { c2 } else { c1 };
    let features = chosen
        .iter()
        .map(|f| {
            let expr = FeatureExpr::unary(op, f.expr.clone());
            let values = apply_op(op, &f.values, None)?;
            Ok(Feature::new(expr, values))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GenerationOutcome {
        features,
        scenario: Scenario::UnaryRelevant,
    })
}

/// Keep the `k` features most relevant to the target. Ties keep the earlier
/// position; survivors stay in their original order.
pub fn kbest_select(
    features: Vec<Feature>,
    y: &[f64],
    cfg: &InfoConfig,
    task: Task,
    k: usize,
) -> Result<Vec<Feature>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".to_string()));
    }
    if features.len() <= k {
        return Ok(features);
    }
    let mut scored: Vec<(f64, usize)> = features
        .iter()
        .enumerate()
        .map(|(i, f)| Ok((relevance(&f.values, y, cfg, task)?, i)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.truncate(k);
    let mut keep: Vec<usize> = scored.into_iter().map(|(_, i)| i).collect();
    keep.sort_unstable();
    let mut keep_iter = keep.into_iter().peekable();
    Ok(features
        .into_iter()
        .enumerate()
        .filter(|(i, _)| {
            if keep_iter.peek() == Some(i) {
                keep_iter.next();
                true
            } else {
                false
            }
        })
        .map(|(_, f)| f)
        .collect())
}

/// Merge freshly generated columns into the working set: drop any new column
/// whose name duplicates an existing one or whose values are constant, then
/// cap the union at `2 * d0` by relevance selection.
pub fn postprocess(
    current: Vec<Feature>,
    outcome: GenerationOutcome,
    d0: usize,
    y: &[f64],
    cfg: &InfoConfig,
    task: Task,
) -> Result<Vec<Feature>> {
    let mut set = current;
    let mut names: std::collections::HashSet<String> = set.iter().map(|f| f.name.clone()).collect();
    for f in outcome.features {
        if names.contains(&f.name) {
            continue;
        }
        if is_constant(&f.values) {
            continue;
        }
        names.insert(f.name.clone());
        set.push(f);
    }
    let cap = 2 * d0;
    if set.len() > cap {
        set = kbest_select(set, y, cfg, task, cap)?;
    }
    Ok(set)
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}
