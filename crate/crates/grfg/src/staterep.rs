//! Fixed-length state vectors for the agents.
//!
//! A feature set of any width and height becomes 49 numbers: describe each
//! column with 7 order statistics, then describe each of the 7 resulting
//! rows with the same 7 statistics. Operations become a 14-long one-hot.
//!
//! Every statistic is computed on a sorted copy of its input, which makes the
//! representation bitwise invariant under both row and column permutation,
//! not merely invariant up to float summation order.

use crate::expr::Op;
use crate::{Error, Result};

/// Length of a feature-set (or group) representation: 7 statistics of 7
/// statistic rows.
pub const SET_REP_LEN: usize = 49;

/// Length of an operation representation: one-hot over the 14 operations.
pub const OP_REP_LEN: usize = Op::COUNT;

/// The 7 descriptive statistics of a vector, in order: count, population
/// standard deviation, minimum, maximum, first quartile, median, third
/// quartile. Quartiles interpolate linearly between order statistics.
fn stats7(v: &[f64]) -> [f64; 7] {
    debug_assert!(!v.is_empty());
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let clamp = |x: f64| x.clamp(-crate::expr::CLAMP_LIMIT, crate::expr::CLAMP_LIMIT);
    [
        clamp(n),
        clamp(var.sqrt()),
        clamp(sorted[0]),
        clamp(sorted[sorted.len() - 1]),
        clamp(quantile(&sorted, 0.25)),
        clamp(quantile(&sorted, 0.5)),
        clamp(quantile(&sorted, 0.75)),
    ]
}

/// Linear interpolation between closest ranks on a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Represent a feature set (or group) as 49 numbers. Stage 1 describes each
/// column, giving a 7 x m matrix; stage 2 describes each row of that matrix;
/// the 7 x 7 result is flattened row-major, so entries 0..7 describe the
/// counts row, 7..14 the standard deviations row, and so on.
pub fn rep_feature_set(features: &[&[f64]]) -> Result<Vec<f64>> {
    if features.is_empty() {
        return Err(Error::EmptyInput("representation of empty feature set"));
    }
    let n = features[0].len();
    if n == 0 {
        return Err(Error::EmptyInput("representation of zero-row features"));
    }
    for f in features {
        if f.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: f.len(),
            });
        }
    }
    let per_column: Vec<[f64; 7]> = features.iter().map(|f| stats7(f)).collect();
    let mut out = Vec::with_capacity(SET_REP_LEN);
    for stat in 0..7 {
        let row: Vec<f64> = per_column.iter().map(|s| s[stat]).collect();
        out.extend_from_slice(&stats7(&row));
    }
    Ok(out)
}

/// One-hot encoding of an operation, indexed by [`Op::index`].
pub fn rep_operation(op: Op) -> Vec<f64> {
    let mut v = vec![0.0; OP_REP_LEN];
    v[op.index()] = 1.0;
    v
}
