//! Mutual information and the measures built on it.
//!
//! Everything here is plug-in estimation on discretized columns: equal-width
//! bins, joint histogram, natural log. No bias correction, no smoothing. The
//! same estimator feeds feature-feature redundancy, feature-target relevance,
//! the set utility, and the group distance used by clustering, so all of them
//! agree on what "information" means.

use crate::data::Task;
use crate::{Error, Result};

/// Knobs for discretization and the distance denominator.
#[derive(Debug, Clone)]
pub struct InfoConfig {
    /// Equal-width bins per continuous column.
    pub n_bins: usize,
    /// Added to the redundancy denominator in the group distance so disjoint
    /// groups with zero mutual information stay finite.
    pub epsilon: f64,
}

impl Default for InfoConfig {
    fn default() -> Self {
        InfoConfig {
            n_bins: 20,
            epsilon: 1e-5,
        }
    }
}

/// Equal-width binning over `[min, max]` into labels `0..n_bins`. A constant
/// vector maps to all zeros.
pub fn discretize(v: &[f64], n_bins: usize) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Err(Error::EmptyInput("discretize on empty vector"));
    }
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be at least 1".to_string()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let width = hi - lo;
    if width == 0.0 {
        return Ok(vec![0; v.len()]);
    }
    Ok(v.iter()
        .map(|&x| {
            let t = (x - lo) / width;
            ((t * n_bins as f64) as usize).min(n_bins - 1)
        })
        .collect())
}

/// Plug-in mutual information of two label vectors, in nats.
///
/// Joint histogram, then `sum p(x,y) ln(p(x,y) / (p(x) p(y)))` over occupied
/// cells. Exactly zero when the joint factorizes exactly; tiny negative values
/// never occur because every term is computed from the same counts.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("mutual information of empty vectors"));
    }
    let amax = a.iter().max().unwrap() + 1;
    let bmax = b.iter().max().unwrap() + 1;
    let cells = amax * bmax;
    let need = cells + amax + bmax;

    // Joint counts, then the two marginals, in one buffer. Small alphabets
    // stay on the stack, and tiny ones (exhaustive sweeps over 3 labels call
    // this tens of millions of times) avoid zeroing the full 512 entries.
    let mut small: [u32; 64];
    let mut stack: [u32; 512];
    let mut heap: Vec<u32>;
    let counts: &mut [u32] = if need <= 64 {
        small = [0; 64];
        &mut small[..need]
    } else if need <= 512 {
        stack = [0; 512];
        &mut stack[..need]
    } else {
        heap = vec![0; need];
        &mut heap
    };
    for (&x, &y) in a.iter().zip(b) {
        counts[x * bmax + y] += 1;
        counts[cells + x] += 1;
        counts[cells + amax + y] += 1;
    }

    let n = a.len() as f64;
    let mut mi = 0.0;
    for x in 0..amax {
        let row = counts[cells + x];
        if row == 0 {
            continue;
        }
        for y in 0..bmax {
            let c = counts[x * bmax + y];
            if c == 0 {
                continue;
            }
            let col = counts[cells + amax + y];
            let p = c as f64 / n;
            mi += p * ((c as f64 * n) / (row as f64 * col as f64)).ln();
        }
    }
    Ok(mi)
}

/// Target labels for information measures: classification labels are used
/// raw, regression targets are discretized like any feature.
pub fn target_labels(y: &[f64], task: Task, cfg: &InfoConfig) -> Result<Vec<usize>> {
    match task {
        Task::Classification => {
            if y.is_empty() {
                return Err(Error::EmptyInput("target labels of empty vector"));
            }
            Ok(y.iter().map(|&v| v as usize).collect())
        }
        Task::Regression => discretize(y, cfg.n_bins),
    }
}

/// MI between a feature column and the target.
pub fn relevance(f: &[f64], y: &[f64], cfg: &InfoConfig, task: Task) -> Result<f64> {
    let fl = discretize(f, cfg.n_bins)?;
    let yl = target_labels(y, task, cfg)?;
    mutual_information(&fl, &yl)
}

/// Utility of a feature set: mean relevance minus mean pairwise redundancy,
/// the redundancy sum running over all ordered pairs including the diagonal.
///
/// `U(F|y) = -(1/|F|^2) sum_{i,j} MI(f_i, f_j) + (1/|F|) sum_i MI(f_i, y)`
pub fn utility(features: &[&[f64]], y: &[f64], cfg: &InfoConfig, task: Task) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::EmptyInput("utility of empty feature set"));
    }
    let labels: Vec<Vec<usize>> = features
        .iter()
        .map(|f| discretize(f, cfg.n_bins))
        .collect::<Result<_>>()?;
    let yl = target_labels(y, task, cfg)?;
    let m = features.len() as f64;
    let mut redundancy = 0.0;
    for a in &labels {
        for b in &labels {
            redundancy += mutual_information(a, b)?;
        }
    }
    let mut rel = 0.0;
    for a in &labels {
        rel += mutual_information(a, &yl)?;
    }
    Ok(-redundancy / (m * m) + rel / m)
}

/// Mean relevance of a group's members.
pub fn group_relevance(group: &[&[f64]], y: &[f64], cfg: &InfoConfig, task: Task) -> Result<f64> {
    if group.is_empty() {
        return Err(Error::EmptyInput("relevance of empty group"));
    }
    let yl = target_labels(y, task, cfg)?;
    let mut sum = 0.0;
    for f in group {
        let fl = discretize(f, cfg.n_bins)?;
        sum += mutual_information(&fl, &yl)?;
    }
    Ok(sum / group.len() as f64)
}

/// Distance between two feature groups: mean over cross pairs of
/// `|MI(f_i,y) - MI(f_j,y)| / (MI(f_i,f_j) + epsilon)`. Relevance difference
/// up top, redundancy below: similar usefulness and high mutual redundancy
/// pull groups together.
pub fn group_distance(
    ci: &[&[f64]],
    cj: &[&[f64]],
    y: &[f64],
    cfg: &InfoConfig,
    task: Task,
) -> Result<f64> {
    if ci.is_empty() || cj.is_empty() {
        return Err(Error::EmptyInput("distance of empty group"));
    }
    let yl = target_labels(y, task, cfg)?;
    let li: Vec<Vec<usize>> = ci
        .iter()
        .map(|f| discretize(f, cfg.n_bins))
        .collect::<Result<_>>()?;
    let lj: Vec<Vec<usize>> = cj
        .iter()
        .map(|f| discretize(f, cfg.n_bins))
        .collect::<Result<_>>()?;
    let ri: Vec<f64> = li
        .iter()
        .map(|l| mutual_information(l, &yl))
        .collect::<Result<_>>()?;
    let rj: Vec<f64> = lj
        .iter()
        .map(|l| mutual_information(l, &yl))
        .collect::<Result<_>>()?;
    let mut sum = 0.0;
    for (a, rel_a) in li.iter().zip(&ri) {
        for (b, rel_b) in lj.iter().zip(&rj) {
            let redundancy = mutual_information(a, b)?;
            sum += (rel_a - rel_b).abs() / (redundancy + cfg.epsilon);
        }
    }
    Ok(sum / (ci.len() * cj.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn discretize_examples() {
        assert_eq!(
            discretize(&[0.0, 1.0, 2.0, 3.0], 2).unwrap(),
            vec![0, 0, 1, 1]
        );
        assert_eq!(discretize(&[5.0, 5.0, 5.0], 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(discretize(&[0.0, 10.0], 4).unwrap(), vec![0, 3]);
    }

    #[test]
    fn discretize_bad_inputs() {
        assert!(matches!(discretize(&[], 2), Err(Error::EmptyInput(_))));
        assert!(matches!(discretize(&[1.0], 0), Err(Error::Config(_))));
    }

    #[test]
    fn mi_identical_binary_uniform_is_ln2() {
        let a = vec![0, 0, 1, 1];
        assert!((mutual_information(&a, &a).unwrap() - LN2).abs() < 1e-15);
    }

    #[test]
    fn mi_exactly_independent_is_zero() {
        let a = vec![0, 0, 1, 1];
        let b = vec![0, 1, 0, 1];
        assert_eq!(mutual_information(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn mi_pinned_value() {
        let a = vec![0, 0, 1, 1];
        let b = vec![0, 0, 0, 1];
        let mi = mutual_information(&a, &b).unwrap();
        assert!((mi - 0.215762).abs() < 1e-6);
        // Exact closed form: H(a) + H(b) - H(a,b).
        assert!((mi - 0.2157615543388357).abs() < 1e-15);
    }

    #[test]
    fn mi_length_mismatch() {
        assert!(matches!(
            mutual_information(&[0, 1], &[0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn relevance_perfectly_aligned_bins() {
        let f = [1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let cfg = InfoConfig {
            n_bins: 2,
            ..InfoConfig::default()
        };
        let r = relevance(&f, &y, &cfg, Task::Classification).unwrap();
        assert!((r - LN2).abs() < 1e-15);
    }

    #[test]
    fn utility_single_feature_equal_to_target() {
        // U = -MI(f,f) + MI(f,y) = -H(f) + H(f) = 0 when y == f.
        let f = [0.0, 0.0, 1.0, 1.0];
        let cfg = InfoConfig::default();
        let u = utility(&[&f], &f, &cfg, Task::Classification).unwrap();
        assert!(u.abs() < 1e-15);
    }

    #[test]
    fn utility_duplicated_feature_still_zero() {
        let f = [0.0, 0.0, 1.0, 1.0];
        let cfg = InfoConfig::default();
        let u = utility(&[&f, &f], &f, &cfg, Task::Classification).unwrap();
        assert!(u.abs() < 1e-15);
    }

    #[test]
    fn utility_irrelevant_feature_is_minus_entropy() {
        let f = [0.0, 0.0, 1.0, 1.0];
        let y = [0.0, 1.0, 0.0, 1.0];
        let cfg = InfoConfig::default();
        let u = utility(&[&f], &y, &cfg, Task::Classification).unwrap();
        assert!((u + LN2).abs() < 1e-15);
    }

    #[test]
    fn group_relevance_examples() {
        let cfg = InfoConfig::default();
        let f = [0.0, 0.0, 1.0, 1.0];
        let y_dep = [0.0, 0.0, 1.0, 1.0];
        let y_ind = [0.0, 1.0, 0.0, 1.0];
        let g = [1.0, 0.0, 1.0, 0.0]; // independent of y_dep
        let r = group_relevance(&[&f], &y_dep, &cfg, Task::Classification).unwrap();
        assert!((r - LN2).abs() < 1e-15);
        let r = group_relevance(&[&f], &y_ind, &cfg, Task::Classification).unwrap();
        assert_eq!(r, 0.0);
        let r = group_relevance(&[&f, &g], &y_dep, &cfg, Task::Classification).unwrap();
        assert!((r - LN2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn group_distance_identical_singletons_is_zero() {
        let cfg = InfoConfig::default();
        let f = [0.0, 1.0, 0.0, 1.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let d = group_distance(&[&f], &[&f], &y, &cfg, Task::Classification).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn group_distance_orthogonal_features() {
        // f == y, g independent of both: relevance gap ln 2, redundancy 0,
        // so the distance is ln2 / epsilon.
        let cfg = InfoConfig::default();
        let f = [0.0, 0.0, 1.0, 1.0];
        let g = [0.0, 1.0, 0.0, 1.0];
        let d = group_distance(&[&f], &[&g], &f, &cfg, Task::Classification).unwrap();
        assert!((d - LN2 / 1e-5).abs() < 1e-4);
        assert!((d - 69314.718).abs() < 1e-2);
    }

    #[test]
    fn group_distance_symmetric() {
        let cfg = InfoConfig::default();
        let f = [0.0, 0.5, 1.0, 0.25, 0.8, 0.1];
        let g = [1.0, 0.0, 0.5, 0.75, 0.2, 0.9];
        let h = [0.3, 0.3, 0.9, 0.1, 0.5, 0.7];
        let y = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let d1 = group_distance(&[&f, &g], &[&h], &y, &cfg, Task::Classification).unwrap();
        let d2 = group_distance(&[&h], &[&f, &g], &y, &cfg, Task::Classification).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
    }
}
