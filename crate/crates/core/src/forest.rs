//! Bagged regression trees.
//!
//! The ensemble serves both as the baseline performance predictor and as
//! the scoring model inside feature selection and permutation importance.
//! Training is deterministic given `(X, y, seed)`: per-tree seeds are
//! derived from the root seed with a splittable counter scheme, and rows
//! are bootstrap-sampled in a canonical order so that permuting the
//! training rows does not change the fitted model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until purity.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn as split candidates per node, in (0, 1].
    pub max_features: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: 1.0,
            bootstrap: true,
            seed: 1,
        }
    }
}

impl ForestParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::invalid_argument("n_trees must be >= 1"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid_argument("min_samples_leaf must be >= 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid_argument("min_samples_split must be >= 2"));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(Error::invalid_argument("max_features must be in (0, 1]"));
        }
        Ok(())
    }
}

/// A binary regression tree stored as parallel node arrays. `feature[i] < 0`
/// marks node `i` as a leaf; `value[i]` holds the node's training-target
/// mean either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub value: Vec<f64>,
}

impl Tree {
    fn new() -> Self {
        Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        }
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(-1);
        self.right.push(-1);
        self.value.push(value);
        self.feature.len() - 1
    }

    fn push_split(&mut self, feature: usize, threshold: f64, value: f64) -> usize {
        self.feature.push(feature as i64);
        self.threshold.push(threshold);
        self.left.push(-1);
        self.right.push(-1);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.value[node];
            }
            node = if x[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Per tree, the sorted original row indices that were out of bag.
    pub oob_masks: Vec<Vec<usize>>,
    pub params: ForestParams,
    pub feature_count: usize,
    pub n_rows: usize,
}

struct NodeStats {
    mean: f64,
    sse: f64,
    all_equal: bool,
}

fn node_stats(ys: &[f64]) -> NodeStats {
    let n = ys.len() as f64;
    let sum: f64 = ys.iter().sum();
    let mean = sum / n;
    let sse: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let all_equal = ys.iter().all(|y| *y == ys[0]);
    NodeStats { mean, sse, all_equal }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    /// canonical order: `canon[pos]` is the original row index
    canon: &'a [usize],
    params: &'a ForestParams,
    n_features: usize,
    tree: Tree,
    rng: rand_chacha::ChaCha8Rng,
}

impl<'a> TreeBuilder<'a> {
    /// Split candidates are drawn per node: all features when
    /// `max_features == 1`, otherwise a seeded random subset, re-sorted so
    /// that the lowest-index tie-break stays meaningful.
    fn candidate_features(&mut self) -> Vec<usize> {
        if self.params.max_features >= 1.0 {
            return (0..self.n_features).collect();
        }
        let k = ((self.params.max_features * self.n_features as f64).floor() as usize).max(1);
        let mut pool: Vec<usize> = (0..self.n_features).collect();
        for i in 0..k {
            let j = self.rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let mut chosen = pool[..k].to_vec();
        chosen.sort_unstable();
        chosen
    }

    /// Grows the subtree over `bag` (canonical positions, duplicates allowed,
    /// kept in canonical order) and returns the new node's index.
    fn grow(&mut self, bag: &[usize], depth: usize) -> usize {
        let ys: Vec<f64> = bag.iter().map(|&pos| self.y[self.canon[pos]]).collect();
        let stats = node_stats(&ys);

        let depth_reached = self.params.max_depth.map_or(false, |d| depth >= d);
        if bag.len() < self.params.min_samples_split || depth_reached || stats.all_equal {
            return self.tree.push_leaf(stats.mean);
        }

        // Best split: greedy SSE reduction; midpoint thresholds between
        // consecutive distinct values; ties in gain resolved toward the
        // lowest feature index, then the lowest threshold, by strict
        // improvement while scanning in ascending order.
        let mut best: Option<(f64, usize, f64)> = None;
        for f in self.candidate_features() {
            let mut pairs: Vec<(f64, f64)> = bag
                .iter()
                .map(|&pos| {
                    let row = self.canon[pos];
                    (self.x[row][f], self.y[row])
                })
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

            let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
            let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
            let n = pairs.len();
            let mut sum_l = 0.0;
            let mut sq_l = 0.0;
            for i in 0..n - 1 {
                sum_l += pairs[i].1;
                sq_l += pairs[i].1 * pairs[i].1;
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let n_l = i + 1;
                let n_r = n - n_l;
                if n_l < self.params.min_samples_leaf || n_r < self.params.min_samples_leaf {
                    continue;
                }
                let sse_l = sq_l - sum_l * sum_l / n_l as f64;
                let sum_r = total_sum - sum_l;
                let sse_r = (total_sq - sq_l) - sum_r * sum_r / n_r as f64;
                let gain = stats.sse - sse_l - sse_r;
                let lo = pairs[i].0;
                let hi = pairs[i + 1].0;
                let mut thr = lo + (hi - lo) / 2.0;
                if !(lo < thr && thr < hi) {
                    // adjacent representable values: fall back to the exact
                    // left boundary, which `x <= thr` still routes correctly
                    thr = lo;
                }
                if best.map_or(gain > 0.0, |(g, _, _)| gain > g) {
                    best = Some((gain, f, thr));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.tree.push_leaf(stats.mean);
        };

        let (left_bag, right_bag): (Vec<usize>, Vec<usize>) = bag
            .iter()
            .partition(|&&pos| self.x[self.canon[pos]][feature] <= threshold);
        let idx = self.tree.push_split(feature, threshold, stats.mean);
        let l = self.grow(&left_bag, depth + 1);
        let r = self.grow(&right_bag, depth + 1);
        self.tree.left[idx] = l as i64;
        self.tree.right[idx] = r as i64;
        idx
    }
}

fn check_matrix(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid_argument("need >= 2 training rows"));
    }
    let p = x[0].len();
    if p == 0 {
        return Err(Error::invalid_argument("need >= 1 feature column"));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} features, expected {p}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_data(format!("non-finite feature in row {i}")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_data("non-finite target value".to_string()));
    }
    Ok(p)
}

/// Canonical row order: rows sorted by feature values, then target. Bootstrap
/// draws index into this order, which makes the fit invariant under
/// permutations of the training rows.
fn canonical_order(x: &[Vec<f64>], y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        for (va, vb) in x[a].iter().zip(&x[b]) {
            match va.total_cmp(vb) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        y[a].total_cmp(&y[b])
    });
    order
}

pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    let p = check_matrix(x, y)?;
    let n = x.len();
    let canon = canonical_order(x, y);

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut oob_masks = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = rng_from(params.seed, t as u64);
        let bag: Vec<usize> = if params.bootstrap {
            let mut b: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            b.sort_unstable();
            b
        } else {
            (0..n).collect()
        };
        let mut in_bag = vec![false; n];
        for &pos in &bag {
            in_bag[pos] = true;
        }
        let mut oob: Vec<usize> = (0..n).filter(|&pos| !in_bag[pos]).map(|pos| canon[pos]).collect();
        oob.sort_unstable();

        let mut builder = TreeBuilder {
            x,
            y,
            canon: &canon,
            params,
            n_features: p,
            tree: Tree::new(),
            rng,
        };
        builder.grow(&bag, 0);
        trees.push(builder.tree);
        oob_masks.push(oob);
    }

    Ok(Forest { trees, oob_masks, params: params.clone(), feature_count: p, n_rows: n })
}

/// Ensemble prediction: the mean of the per-tree leaf values.
pub fn predict(forest: &Forest, x: &[f64]) -> Result<f64> {
    if x.len() != forest.feature_count {
        return Err(Error::DimensionMismatch(format!(
            "feature vector has {} entries, forest expects {}",
            x.len(),
            forest.feature_count
        )));
    }
    let sum: f64 = forest.trees.iter().map(|t| t.predict(x)).sum();
    Ok(sum / forest.trees.len() as f64)
}

pub fn predict_rows(forest: &Forest, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    x.iter().map(|row| predict(forest, row)).collect()
}

/// Out-of-bag MAE over the training matrix: each row is predicted only by
/// trees whose bootstrap sample excluded it. Rows that were in-bag for every
/// tree are skipped with a warning; it is an error if no row has coverage.
pub fn oob_mae(forest: &Forest, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    if !forest.params.bootstrap {
        return Err(Error::invalid_argument(
            "out-of-bag error requires bootstrap sampling",
        ));
    }
    if x.len() != forest.n_rows || x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "expected the {}-row training matrix",
            forest.n_rows
        )));
    }
    let n = x.len();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (tree, oob) in forest.trees.iter().zip(&forest.oob_masks) {
        for &row in oob {
            sums[row] += tree.predict(&x[row]);
            counts[row] += 1;
        }
    }
    let mut total = 0.0;
    let mut covered = 0usize;
    for i in 0..n {
        if counts[i] == 0 {
            log::warn!("row {i} was in-bag for every tree; skipped in OOB error");
            continue;
        }
        total += (y[i] - sums[i] / counts[i] as f64).abs();
        covered += 1;
    }
    if covered == 0 {
        return Err(Error::invalid_data(
            "no row was out of bag for any tree".to_string(),
        ));
    }
    Ok(total / covered as f64)
}

/// Mean absolute error between two equally long vectors.
pub fn mae(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} truth values",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid_argument("mae of empty vectors"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / predictions.len() as f64)
}
