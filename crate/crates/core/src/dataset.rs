//! Dataset ingestion, validation, and leave-one-problem-out fold layout.
//!
//! A dataset couples a feature matrix (one row per benchmark problem) with
//! one target vector per algorithm. Inputs arrive as two CSV files keyed by
//! a `f_id` column; a JSON export mirrors the same schema.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated problem/feature/target bundle. Immutable after construction,
/// so it can be shared read-only across parallel fold workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    problem_ids: Vec<String>,
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    targets: BTreeMap<String, Vec<f64>>,
}

/// One leave-one-problem-out fold: a single held-out problem and the
/// ordered list of remaining training problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub test_problem: String,
    pub train_problems: Vec<String>,
}

impl Dataset {
    pub fn new(
        problem_ids: Vec<String>,
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
        targets: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let ds = Dataset { problem_ids, feature_names, features, targets };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.problem_ids.len();
        if n < 2 {
            return Err(Error::invalid_data("need >= 2 problems for LOPO"));
        }
        if self.features.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} problem ids",
                self.features.len(),
                n
            )));
        }
        let mut seen = HashSet::new();
        for id in &self.problem_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid_data(format!("duplicate problem id '{id}'")));
            }
        }
        let p = self.feature_names.len();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "row '{}' has {} features, header names {}",
                    self.problem_ids[i],
                    row.len(),
                    p
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid_data(format!(
                        "non-finite feature value at ({}, {})",
                        self.problem_ids[i], self.feature_names[j]
                    )));
                }
            }
        }
        for (algo, ys) in &self.targets {
            if ys.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "target '{algo}' has {} values for {} problems",
                    ys.len(),
                    n
                )));
            }
            for (i, y) in ys.iter().enumerate() {
                if !y.is_finite() {
                    return Err(Error::invalid_data(format!(
                        "non-finite target value at ({}, {})",
                        self.problem_ids[i], algo
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_problems(&self) -> usize {
        self.problem_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn problem_ids(&self) -> &[String] {
        &self.problem_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn position(&self, problem_id: &str) -> Option<usize> {
        self.problem_ids.iter().position(|id| id == problem_id)
    }

    pub fn algorithms(&self) -> Vec<&str> {
        self.targets.keys().map(|s| s.as_str()).collect()
    }

    pub fn target(&self, algorithm_id: &str) -> Option<&[f64]> {
        self.targets.get(algorithm_id).map(|v| v.as_slice())
    }

    pub fn targets(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.targets
    }

    /// Replaces one problem's feature row. Used by leakage tests to perturb
    /// a held-out row; re-validates so invariants keep holding.
    pub fn with_replaced_row(&self, problem_id: &str, row: Vec<f64>) -> Result<Dataset> {
        let idx = self
            .position(problem_id)
            .ok_or_else(|| Error::invalid_argument(format!("unknown problem id '{problem_id}'")))?;
        let mut features = self.features.clone();
        features[idx] = row;
        Dataset::new(
            self.problem_ids.clone(),
            self.feature_names.clone(),
            features,
            self.targets.clone(),
        )
    }
}

fn parse_cell(raw: &str, row_id: &str, col_name: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| {
        Error::invalid_data(format!("non-numeric value '{raw}' at ({row_id}, {col_name})"))
    })?;
    if !v.is_finite() {
        return Err(Error::invalid_data(format!(
            "non-finite value '{raw}' at ({row_id}, {col_name})"
        )));
    }
    Ok(v)
}

/// Reads a CSV keyed by a leading `f_id` column into (ids, column names,
/// row-major values). Lines starting with `#` are treated as comments.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("f_id") {
        return Err(Error::invalid_data(format!(
            "{}: first column must be named 'f_id'",
            path.display()
        )));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    if columns.is_empty() {
        return Err(Error::invalid_data(format!(
            "{}: no data columns after 'f_id'",
            path.display()
        )));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = record
            .get(0)
            .ok_or_else(|| Error::invalid_data(format!("{}: empty record", path.display())))?
            .to_string();
        if record.len() != columns.len() + 1 {
            return Err(Error::invalid_data(format!(
                "{}: row '{}' has {} cells, expected {}",
                path.display(),
                id,
                record.len(),
                columns.len() + 1
            )));
        }
        let mut row = Vec::with_capacity(columns.len());
        for (j, cell) in record.iter().skip(1).enumerate() {
            row.push(parse_cell(cell, &id, &columns[j])?);
        }
        ids.push(id);
        rows.push(row);
    }
    Ok((ids, columns, rows))
}

/// Loads and validates a dataset from a features CSV and a targets CSV,
/// both keyed by `f_id`. Target rows may appear in any order; they are
/// aligned to the feature file's problem order. Feature column order is
/// preserved from the file.
pub fn load_dataset(features_path: &Path, targets_path: &Path) -> Result<Dataset> {
    let (ids, feature_names, features) = read_table(features_path)?;
    let (target_ids, algo_names, target_rows) = read_table(targets_path)?;

    let mut by_id: BTreeMap<&str, &Vec<f64>> = BTreeMap::new();
    for (id, row) in target_ids.iter().zip(&target_rows) {
        if by_id.insert(id.as_str(), row).is_some() {
            return Err(Error::invalid_data(format!(
                "{}: duplicate problem id '{}'",
                targets_path.display(),
                id
            )));
        }
    }
    if target_ids.len() != ids.len() {
        return Err(Error::invalid_data(format!(
            "targets list {} problems, features list {}",
            target_ids.len(),
            ids.len()
        )));
    }

    let mut targets: BTreeMap<String, Vec<f64>> =
        algo_names.iter().map(|a| (a.clone(), Vec::with_capacity(ids.len()))).collect();
    for id in &ids {
        let row = by_id.get(id.as_str()).ok_or_else(|| {
            Error::invalid_data(format!(
                "{}: no target row for problem '{}'",
                targets_path.display(),
                id
            ))
        })?;
        for (a, algo) in algo_names.iter().enumerate() {
            targets.get_mut(algo).expect("algo key").push(row[a]);
        }
    }

    Dataset::new(ids, feature_names, features, targets)
}

fn format_row(id: &str, values: &[f64]) -> String {
    let mut line = String::from(id);
    for v in values {
        let _ = write!(line, ",{v}");
    }
    line.push('\n');
    line
}

/// Writes the dataset back to a features CSV and a targets CSV with the
/// same schema `load_dataset` reads. Values round-trip exactly.
pub fn write_dataset(dataset: &Dataset, features_path: &Path, targets_path: &Path) -> Result<()> {
    let mut feat = String::from("f_id");
    for name in dataset.feature_names() {
        feat.push(',');
        feat.push_str(name);
    }
    feat.push('\n');
    for (id, row) in dataset.problem_ids().iter().zip(dataset.features()) {
        feat.push_str(&format_row(id, row));
    }
    fs::write(features_path, feat)?;

    let algos: Vec<&str> = dataset.algorithms();
    let mut tgt = String::from("f_id");
    for a in &algos {
        tgt.push(',');
        tgt.push_str(a);
    }
    tgt.push('\n');
    for (i, id) in dataset.problem_ids().iter().enumerate() {
        let values: Vec<f64> = algos
            .iter()
            .map(|a| dataset.target(a).expect("validated target")[i])
            .collect();
        tgt.push_str(&format_row(id, &values));
    }
    fs::write(targets_path, tgt)?;
    Ok(())
}

/// log10 with an optional positive floor applied first. Without a floor,
/// nonpositive entries are an error; with a floor, `log10(max(raw, floor))`.
pub fn log_transform_targets(raw: &[f64], floor: Option<f64>) -> Result<Vec<f64>> {
    if let Some(eps) = floor {
        if !(eps > 0.0) {
            return Err(Error::invalid_argument(format!(
                "precision floor must be positive, got {eps}"
            )));
        }
    }
    raw.iter()
        .enumerate()
        .map(|(i, &v)| match floor {
            Some(eps) => Ok(v.max(eps).log10()),
            None if v > 0.0 => Ok(v.log10()),
            None => Err(Error::invalid_data(format!(
                "nonpositive precision {v} at index {i} and no floor configured"
            ))),
        })
        .collect()
}

/// Enumerates the LOPO folds in dataset order: every problem is the test
/// problem exactly once, with all remaining problems as training set.
pub fn lopo_folds(dataset: &Dataset) -> Vec<FoldSpec> {
    let ids = dataset.problem_ids();
    ids.iter()
        .enumerate()
        .map(|(i, test)| FoldSpec {
            test_problem: test.clone(),
            train_problems: ids
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, id)| id.clone())
                .collect(),
        })
        .collect()
}

/// Column indices with zero variance across the given rows, i.e. columns on
/// which every row carries the same value. Such columns make Pearson and
/// cosine degenerate and are dropped per fold.
pub fn zero_variance_columns(rows: &[Vec<f64>]) -> Vec<usize> {
    if rows.is_empty() {
        return Vec::new();
    }
    (0..rows[0].len())
        .filter(|&j| rows.iter().all(|r| r[j] == rows[0][j]))
        .collect()
}
