//! Dataset ingestion and cross-validation splits.
//!
//! A [`DataTable`] is columnar and immutable after load: unique sanitized
//! feature names, finite values, one target column, and a fixed task kind.
//! The CSV dialect is a strict RFC-4180 subset: comma separated, exactly one
//! header line, no quoted fields, `.` as the decimal separator, scientific
//! notation allowed. Missing values are rejected, not imputed.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// What the target column means, and therefore how runs are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Integer class labels in `{0..k-1}`, scored by F1.
    Classification,
    /// Real-valued target, scored by 1 - relative absolute error.
    Regression,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            other => Err(Error::Config(format!(
                "unknown task `{other}`, expected `classification` or `regression`"
            ))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Characters that may not appear in a column name because the expression
/// grammar claims them. Whitespace is reserved too.
pub const RESERVED_NAME_CHARS: [char; 7] = ['(', ')', '+', '-', '*', '/', ','];

fn is_reserved(c: char) -> bool {
    c.is_whitespace() || RESERVED_NAME_CHARS.contains(&c)
}

/// Replace reserved characters with `_`. Does not resolve collisions; the
/// loader does that by appending `_2`, `_3`, ...
pub fn sanitize_name(raw: &str) -> String {
    raw.chars()
        .map(|c| if is_reserved(c) { '_' } else { c })
        .collect()
}

/// A loaded dataset: feature columns, target, task. Immutable once built.
#[derive(Debug, Clone)]
pub struct DataTable {
    columns: Vec<(String, Vec<f64>)>,
    target_name: String,
    target: Vec<f64>,
    task: Task,
}

impl DataTable {
    /// Build a table from already-clean parts. Validates every invariant the
    /// loader guarantees: name hygiene and uniqueness, equal column lengths,
    /// finite values, and a well-formed target for the task.
    pub fn new(
        columns: Vec<(String, Vec<f64>)>,
        target_name: String,
        target: Vec<f64>,
        task: Task,
    ) -> Result<Self> {
        if columns.len() < 2 {
            return Err(Error::TooFewFeatures(columns.len()));
        }
        if target.is_empty() {
            return Err(Error::EmptyInput("table has no rows"));
        }
        let mut seen = HashSet::new();
        for (name, values) in &columns {
            if name.is_empty() || name.chars().any(is_reserved) {
                return Err(Error::Config(format!("invalid column name `{name}`")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
            if values.len() != target.len() {
                return Err(Error::LengthMismatch {
                    left: values.len(),
                    right: target.len(),
                });
            }
            if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCell {
                    line: bad + 2,
                    column: name.clone(),
                });
            }
        }
        if target_name.is_empty() || target_name.chars().any(is_reserved) {
            return Err(Error::Config(format!(
                "invalid target name `{target_name}`"
            )));
        }
        if seen.contains(&target_name) {
            return Err(Error::DuplicateColumn(target_name));
        }
        if let Some(bad) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCell {
                line: bad + 2,
                column: target_name.clone(),
            });
        }
        if task == Task::Classification {
            validate_class_labels(&target)?;
        }
        Ok(DataTable {
            columns,
            target_name,
            target,
            task,
        })
    }

    /// Load a CSV file. `target_name` is matched against the raw header before
    /// any sanitization.
    pub fn load_csv(path: &Path, target_name: &str, task: Task) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_csv(&text, target_name, task)
    }

    /// Parse CSV text. Split out from [`DataTable::load_csv`] so tests can
    /// exercise the format without touching the filesystem.
    pub fn parse_csv(text: &str, target_name: &str, task: Task) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
        let header = lines.next().ok_or(Error::EmptyInput("csv file is empty"))?;
        let raw_names: Vec<&str> = header.split(',').collect();
        let target_idx = raw_names
            .iter()
            .position(|n| *n == target_name)
            .ok_or_else(|| Error::MissingTarget(target_name.to_string()))?;

        // A raw header that repeats a name is a data error; a collision that
        // sanitization itself creates is repaired by suffixing.
        let mut raw_seen = HashSet::new();
        for raw in &raw_names {
            if !raw_seen.insert(*raw) {
                return Err(Error::DuplicateColumn(sanitize_name(raw)));
            }
        }
        let mut names: Vec<String> = Vec::with_capacity(raw_names.len());
        let mut taken = HashSet::new();
        for raw in &raw_names {
            let base = sanitize_name(raw);
            let mut name = base.clone();
            let mut suffix = 2;
            while !taken.insert(name.clone()) {
                name = format!("{base}_{suffix}");
                suffix += 1;
            }
            names.push(name);
        }

        let mut columns: Vec<(String, Vec<f64>)> = names
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(_, n)| (n.clone(), Vec::new()))
            .collect();
        let mut target: Vec<f64> = Vec::new();

        for (line_idx, line) in lines.enumerate() {
            let line_no = line_idx + 2; // 1-based, header is line 1
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != raw_names.len() {
                return Err(Error::RaggedRow {
                    line: line_no,
                    expected: raw_names.len(),
                    got: fields.len(),
                });
            }
            let mut col = 0;
            for (i, field) in fields.iter().enumerate() {
                let value =
                    f64::from_str(field.trim_matches(' ')).map_err(|_| Error::NonNumericCell {
                        line: line_no,
                        column: names[i].clone(),
                        value: (*field).to_string(),
                    })?;
                if !value.is_finite() {
                    return Err(Error::NonFiniteCell {
                        line: line_no,
                        column: names[i].clone(),
                    });
                }
                if i == target_idx {
                    target.push(value);
                } else {
                    columns[col].1.push(value);
                    col += 1;
                }
            }
        }

        if target.is_empty() {
            return Err(Error::EmptyInput("csv has a header but no data rows"));
        }
        let target_name = names[target_idx].clone();
        Self::new(columns, target_name, target, task)
    }

    /// Serialize with 17 significant digits, enough for f64 to round-trip
    /// bitwise through decimal.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (name, _) in &self.columns {
            out.push_str(name);
            out.push(',');
        }
        out.push_str(&self.target_name);
        out.push('\n');
        for row in 0..self.n_rows() {
            for (_, values) in &self.columns {
                out.push_str(&format_cell(values[row]));
                out.push(',');
            }
            out.push_str(&format_cell(self.target[row]));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    /// Number of original feature columns; the engine's size cap is twice this.
    pub fn original_arity(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[(String, Vec<f64>)] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn task(&self) -> Task {
        self.task
    }
}

/// One cell, 17 significant digits.
pub fn format_cell(v: f64) -> String {
    format!("{v:.16e}")
}

fn validate_class_labels(target: &[f64]) -> Result<()> {
    let mut distinct = HashSet::new();
    for &v in target {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::InvalidTarget(format!(
                "labels must be non-negative integers, found {v}"
            )));
        }
        distinct.insert(v as u64);
    }
    if distinct.len() < 2 {
        return Err(Error::InvalidTarget(
            "need at least 2 distinct class labels".to_string(),
        ));
    }
    Ok(())
}

/// Train/test index sets for one fold; both sorted ascending.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// A complete k-fold assignment. `stratified` is false when a class had fewer
/// members than folds and the split fell back to a plain shuffle.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub folds: Vec<Fold>,
    pub n_folds: usize,
    pub stratified: bool,
}

/// Split rows into `n_folds` stratified folds. Classification stratifies on
/// the class label; regression on `min(5, n/n_folds)` equal-frequency bins of
/// the target. Deterministic for a given seed.
pub fn stratified_kfold(table: &DataTable, n_folds: usize, seed: u64) -> Result<FoldSplit> {
    let n = table.n_rows();
    if n_folds < 2 {
        return Err(Error::Config(format!(
            "n_folds must be at least 2, got {n_folds}"
        )));
    }
    if n_folds > n {
        return Err(Error::FoldCount { n_folds, n_rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Strata as disjoint index lists; for classification a stratum per label,
    // for regression a stratum per rank bin of the target.
    let (strata, stratified) = match table.task() {
        Task::Classification => {
            let labels: Vec<u64> = table.target().iter().map(|&v| v as u64).collect();
            let mut distinct = labels.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let strata: Vec<Vec<usize>> = distinct
                .iter()
                .map(|&c| (0..n).filter(|&i| labels[i] == c).collect::<Vec<_>>())
                .collect();
            if strata.iter().any(|s| s.len() < n_folds) {
                (vec![(0..n).collect::<Vec<_>>()], false)
            } else {
                (strata, true)
            }
        }
        Task::Regression => {
            let bins = (n / n_folds).clamp(1, 5);
            let mut order: Vec<usize> = (0..n).collect();
            let target = table.target();
            order.sort_by(|&a, &b| target[a].total_cmp(&target[b]).then_with(|| a.cmp(&b)));
            let strata: Vec<Vec<usize>> = (0..bins)
                .map(|b| order[b * n / bins..(b + 1) * n / bins].to_vec())
                .collect();
            (strata, true)
        }
    };

    // Shuffle within each stratum and deal round-robin; the rolling offset
    // keeps fold sizes balanced across strata while per-stratum counts stay
    // within one of each other.
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    let mut offset = 0usize;
    for stratum in &strata {
        let mut members = stratum.clone();
        members.shuffle(&mut rng);
        for (i, &row) in members.iter().enumerate() {
            tests[(offset + i) % n_folds].push(row);
        }
        offset = (offset + stratum.len()) % n_folds;
    }

    let folds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let in_test: HashSet<usize> = test.iter().copied().collect();
            let train = (0..n).filter(|i| !in_test.contains(i)).collect();
            Fold { train, test }
        })
        .collect();
    Ok(FoldSplit {
        folds,
        n_folds,
        stratified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_csv() -> &'static str {
        "a,b,y\n1,2,0\n3,4,1\n5,6,0\n7,8,1\n"
    }

    #[test]
    fn loads_small_table() {
        let t = DataTable::parse_csv(toy_csv(), "y", Task::Classification).unwrap();
        assert_eq!(t.n_rows(), 4);
        assert_eq!(t.original_arity(), 2);
        assert_eq!(t.column("a").unwrap(), &[1.0, 3.0, 5.0, 7.0]);
        assert_eq!(t.target(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn sanitizes_reserved_characters() {
        let t = DataTable::parse_csv("f(1),y\n1,0\n2,1\n", "y", Task::Classification);
        // Only one feature column: rejected, but the name must have been
        // sanitized before any later stage saw it.
        assert!(matches!(t, Err(Error::TooFewFeatures(1))));
        let t =
            DataTable::parse_csv("f(1),b,y\n1,5,0\n2,6,1\n", "y", Task::Classification).unwrap();
        assert_eq!(t.columns()[0].0, "f_1_");
    }

    #[test]
    fn sanitization_collision_gets_suffix() {
        let t =
            DataTable::parse_csv("f(1),f_1_,y\n1,5,0.5\n2,6,1.5\n", "y", Task::Regression).unwrap();
        let names: Vec<&str> = t.columns().iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["f_1_", "f_1__2"]);
    }

    #[test]
    fn raw_duplicate_header_is_an_error() {
        let err =
            DataTable::parse_csv("a,a,y\n1,2,0\n3,4,1\n", "y", Task::Classification).unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(n) if n == "a"));
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let err =
            DataTable::parse_csv("a,b,y\n1,2,0\n1,abc,1\n", "y", Task::Classification).unwrap_err();
        match err {
            Error::NonNumericCell {
                line,
                column,
                value,
            } => {
                assert_eq!(line, 3);
                assert_eq!(column, "b");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_value_rejected() {
        let err =
            DataTable::parse_csv("a,b,y\n1,,0\n1,2,1\n", "y", Task::Classification).unwrap_err();
        assert!(matches!(err, Error::NonNumericCell { .. }));
    }

    #[test]
    fn non_finite_rejected() {
        let err =
            DataTable::parse_csv("a,b,y\n1,inf,0\n1,2,1\n", "y", Task::Classification).unwrap_err();
        assert!(matches!(err, Error::NonFiniteCell { line: 2, .. }));
    }

    #[test]
    fn ragged_row_rejected() {
        let err = DataTable::parse_csv("a,b,y\n1,2\n", "y", Task::Classification).unwrap_err();
        assert!(matches!(
            err,
            Error::RaggedRow {
                line: 2,
                expected: 3,
                got: 2
            }
        ));
    }

    #[test]
    fn missing_target_rejected() {
        let err = DataTable::parse_csv(toy_csv(), "z", Task::Classification).unwrap_err();
        assert!(matches!(err, Error::MissingTarget(n) if n == "z"));
    }

    #[test]
    fn scientific_notation_parses() {
        let t = DataTable::parse_csv(
            "a,b,y\n1e-3,2E4,0.5\n-1.5e2,6,2.25\n",
            "y",
            Task::Regression,
        )
        .unwrap();
        assert_eq!(t.column("a").unwrap(), &[1e-3, -1.5e2]);
        assert_eq!(t.column("b").unwrap(), &[2e4, 6.0]);
    }

    #[test]
    fn classification_target_must_be_integer_labels() {
        let err =
            DataTable::parse_csv("a,b,y\n1,2,0.5\n3,4,1\n", "y", Task::Classification).unwrap_err();
        assert!(matches!(err, Error::InvalidTarget(_)));
        let err =
            DataTable::parse_csv("a,b,y\n1,2,1\n3,4,1\n", "y", Task::Classification).unwrap_err();
        assert!(matches!(err, Error::InvalidTarget(_)));
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let t = DataTable::parse_csv(
            "a,b,y\n0.1,1.0000000000000002,0.30000000000000004\n-1e-300,2.5e300,7\n",
            "y",
            Task::Regression,
        )
        .unwrap();
        let text = t.to_csv_string();
        let back = DataTable::parse_csv(&text, "y", Task::Regression).unwrap();
        assert_eq!(t.column("a").unwrap(), back.column("a").unwrap());
        assert_eq!(t.column("b").unwrap(), back.column("b").unwrap());
        assert_eq!(t.target(), back.target());
    }

    #[test]
    fn stratified_fold_proportions_match() {
        // 10 rows, 2 classes of 5 each, 5 folds: every test fold holds one of
        // each class.
        let mut rows = String::from("a,b,y\n");
        for i in 0..10 {
            rows.push_str(&format!("{i},{},{}\n", i * 2, i % 2));
        }
        let t = DataTable::parse_csv(&rows, "y", Task::Classification).unwrap();
        let split = stratified_kfold(&t, 5, 3).unwrap();
        assert!(split.stratified);
        for fold in &split.folds {
            assert_eq!(fold.test.len(), 2);
            let classes: Vec<u64> = fold.test.iter().map(|&i| t.target()[i] as u64).collect();
            assert_eq!(classes.iter().filter(|&&c| c == 0).count(), 1);
            assert_eq!(classes.iter().filter(|&&c| c == 1).count(), 1);
        }
    }

    #[test]
    fn folds_partition_rows() {
        let mut rows = String::from("a,b,y\n");
        for i in 0..23 {
            rows.push_str(&format!(
                "{i},{},{}\n",
                i * 3 % 7,
                (i * 11 % 13) as f64 / 3.0
            ));
        }
        let t = DataTable::parse_csv(&rows, "y", Task::Regression).unwrap();
        let split = stratified_kfold(&t, 4, 9).unwrap();
        let mut seen = [false; 23];
        for fold in &split.folds {
            for &i in &fold.test {
                assert!(!seen[i], "row {i} in two test folds");
                seen[i] = true;
            }
            let mut union: Vec<usize> =
                fold.train.iter().chain(fold.test.iter()).copied().collect();
            union.sort_unstable();
            assert_eq!(union, (0..23).collect::<Vec<_>>());
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn small_class_falls_back_unstratified() {
        let t = DataTable::parse_csv(
            "a,b,y\n1,2,0\n3,4,0\n5,6,0\n7,8,1\n9,0,0\n",
            "y",
            Task::Classification,
        )
        .unwrap();
        let split = stratified_kfold(&t, 2, 0).unwrap();
        assert!(!split.stratified);
    }

    #[test]
    fn too_many_folds_rejected() {
        let t = DataTable::parse_csv(toy_csv(), "y", Task::Classification).unwrap();
        let err = stratified_kfold(&t, 5, 0).unwrap_err();
        assert!(matches!(
            err,
            Error::FoldCount {
                n_folds: 5,
                n_rows: 4
            }
        ));
    }

    #[test]
    fn kfold_deterministic() {
        let mut rows = String::from("a,b,y\n");
        for i in 0..40 {
            rows.push_str(&format!("{i},{},{}\n", i * 2, i % 4));
        }
        let t = DataTable::parse_csv(&rows, "y", Task::Classification).unwrap();
        let a = stratified_kfold(&t, 5, 11).unwrap();
        let b = stratified_kfold(&t, 5, 11).unwrap();
        for (fa, fb) in a.folds.iter().zip(&b.folds) {
            assert_eq!(fa.test, fb.test);
            assert_eq!(fa.train, fb.train);
        }
    }
}
