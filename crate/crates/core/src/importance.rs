//! Per-feature weight vectors for the weighted similarity measure.
//!
//! Two importance methods are provided: an unsupervised one that counts how
//! many problems change cluster when a feature is left out, and supervised
//! permutation importance measured as the error increase under per-feature
//! shuffling. Both normalize to nonnegative weights summing to 1, falling
//! back to uniform weights when every raw importance is zero — which makes
//! the weighted similarity degrade gracefully to the plain one.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::clustering::{agglomerate, cosine_distance_matrix, cut, disagreement_count, Linkage};
use crate::error::{Error, Result};
use crate::forest::{mae, predict_rows, Forest};
use crate::rng::rng_from;

/// Nonnegative per-feature weights summing to 1, aligned with a feature
/// portfolio (`feature_indices` are positions in the original feature list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub feature_indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn uniform(feature_indices: Vec<usize>) -> Self {
        let p = feature_indices.len();
        WeightVector { feature_indices, weights: vec![1.0 / p as f64; p] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Normalizes raw nonnegative importances into a weight vector:
/// `w_i = raw_i / Σ raw` when the sum is positive, uniform `1/p` otherwise.
pub fn normalize_weights(feature_indices: &[usize], raw: &[f64]) -> Result<WeightVector> {
    if feature_indices.len() != raw.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} indices for {} raw importances",
            feature_indices.len(),
            raw.len()
        )));
    }
    if raw.is_empty() {
        return Err(Error::invalid_argument("cannot normalize an empty weight vector"));
    }
    for (i, v) in raw.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::invalid_argument(format!("non-finite raw importance at {i}")));
        }
        if *v < 0.0 {
            return Err(Error::invalid_argument(format!(
                "negative raw importance {v} at {i}; clamp before normalizing"
            )));
        }
    }
    let total: f64 = raw.iter().sum();
    let weights = if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    };
    Ok(WeightVector { feature_indices: feature_indices.to_vec(), weights })
}

/// Clustering-based importance: cluster the training problems on the full
/// portfolio, then once per feature with that feature removed, and count on
/// how many problems the two clusterings differ (after optimal label
/// matching). The per-feature difference counts normalize into weights.
pub fn unsupervised_importance(
    x_train: &[Vec<f64>],
    feature_indices: &[usize],
    m: usize,
) -> Result<WeightVector> {
    let n = x_train.len();
    let p = feature_indices.len();
    if n < 2 || x_train.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch(format!(
            "training matrix must be n>=2 rows of {p} portfolio features"
        )));
    }
    if p < 2 {
        return Err(Error::invalid_argument("unsupervised importance needs >= 2 features"));
    }
    if m < 2 || m > n {
        return Err(Error::invalid_argument(format!(
            "cluster count {m} out of range [2, {n}]"
        )));
    }

    let baseline = cut(
        &agglomerate(&cosine_distance_matrix(x_train)?, Linkage::Average, "cosine")?,
        m,
    )?;
    let mut n_diff = Vec::with_capacity(p);
    for f in 0..p {
        let reduced: Vec<Vec<f64>> = x_train
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != f)
                    .map(|(_, v)| *v)
                    .collect()
            })
            .collect();
        let reclustered = cut(
            &agglomerate(&cosine_distance_matrix(&reduced)?, Linkage::Average, "cosine")?,
            m,
        )?;
        n_diff.push(disagreement_count(&baseline, &reclustered)? as f64);
    }
    normalize_weights(feature_indices, &n_diff)
}

/// Permutation importance: the mean increase in MAE over `n_repeats`
/// shuffles of each feature column. Negative raw importances are clamped to
/// zero before normalizing. Deterministic given the seed: each
/// (feature, repeat) pair shuffles with its own derived RNG stream.
pub fn permutation_importance(
    forest: &Forest,
    x: &[Vec<f64>],
    y: &[f64],
    feature_indices: &[usize],
    n_repeats: usize,
    seed: u64,
) -> Result<WeightVector> {
    if n_repeats < 1 {
        return Err(Error::invalid_argument("n_repeats must be >= 1"));
    }
    let p = forest.feature_count;
    if feature_indices.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} portfolio indices for a {p}-feature forest",
            feature_indices.len()
        )));
    }
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch(format!("rows must carry {p} features")));
    }
    let baseline_mae = mae(&predict_rows(forest, x)?, y)?;

    let n = x.len();
    let mut raw = Vec::with_capacity(p);
    for f in 0..p {
        let mut drop_sum = 0.0;
        for r in 0..n_repeats {
            let mut rng = rng_from(seed, (f * n_repeats + r) as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let shuffled: Vec<Vec<f64>> = x
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let mut q = row.clone();
                    q[f] = x[order[i]][f];
                    q
                })
                .collect();
            let shuffled_mae = mae(&predict_rows(forest, &shuffled)?, y)?;
            drop_sum += shuffled_mae - baseline_mae;
        }
        raw.push((drop_sum / n_repeats as f64).max(0.0));
    }
    normalize_weights(feature_indices, &raw)
}
