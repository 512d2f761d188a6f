//! Deterministic synthetic datasets with planted structure.
//!
//! Generated problems form tight feature-space clusters with known labels,
//! nuisance columns that carry no separation, near-duplicate columns that
//! form a correlated clique, and optionally "deceptive" problems whose
//! feature vectors sit inside a cluster while their targets sit far away.
//! Every planted property is recorded in a manifest so tests can check
//! pipeline behavior without external data.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const FIXTURE_ALGORITHM: &str = "A1";

/// Target offset added to deceptive problems; large against any reasonable
/// within-cluster spread.
pub const DECEPTIVE_OFFSET: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_problems: usize,
    pub p_relevant: usize,
    pub p_nuisance: usize,
    /// Near-duplicate columns cloned (affinely, with tiny jitter) from the
    /// first nuisance column; together they form a correlated clique.
    pub n_correlated_copies: usize,
    pub n_clusters: usize,
    pub within_cluster_spread: f64,
    /// Fraction of problems whose target is displaced by
    /// [`DECEPTIVE_OFFSET`] while their features stay inside their cluster.
    pub deceptive_fraction: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_problems: 30,
            p_relevant: 3,
            p_nuisance: 10,
            n_correlated_copies: 3,
            n_clusters: 4,
            within_cluster_spread: 0.2,
            deceptive_fraction: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub algorithm_id: String,
    /// planted cluster label per problem, in dataset order
    pub cluster_labels: Vec<usize>,
    pub cluster_base_targets: Vec<f64>,
    pub relevant_columns: Vec<usize>,
    pub nuisance_columns: Vec<usize>,
    /// (duplicate column, source column) pairs
    pub duplicate_columns: Vec<(usize, usize)>,
    pub marker_column: Option<usize>,
    pub deceptive_problems: Vec<String>,
    pub deceptive_offset: f64,
    pub within_cluster_spread: f64,
}

fn validate(spec: &FixtureSpec) -> Result<()> {
    if spec.n_problems < 2 {
        return Err(Error::invalid_argument("fixture needs >= 2 problems"));
    }
    if spec.p_relevant < 1 {
        return Err(Error::invalid_argument("fixture needs >= 1 relevant feature"));
    }
    if spec.n_clusters < 1 || spec.n_clusters > spec.n_problems {
        return Err(Error::invalid_argument(format!(
            "cluster count {} inconsistent with {} problems",
            spec.n_clusters, spec.n_problems
        )));
    }
    if spec.n_clusters > spec.p_relevant + 1 {
        return Err(Error::invalid_argument(format!(
            "{} clusters need at least {} relevant features (one separating axis per \
             non-baseline cluster)",
            spec.n_clusters,
            spec.n_clusters - 1
        )));
    }
    if spec.n_correlated_copies > 0 && spec.p_nuisance < 1 {
        return Err(Error::invalid_argument(
            "correlated copies clone the first nuisance column; need p_nuisance >= 1",
        ));
    }
    if !(0.0..=1.0).contains(&spec.deceptive_fraction) {
        return Err(Error::invalid_argument("deceptive_fraction must lie in [0, 1]"));
    }
    if !(spec.within_cluster_spread >= 0.0 && spec.within_cluster_spread.is_finite()) {
        return Err(Error::invalid_argument("within_cluster_spread must be finite and >= 0"));
    }
    Ok(())
}

/// Generates the fixture dataset plus its ground-truth manifest. Fully
/// reproducible: the same spec yields byte-identical output.
///
/// Geometry: every cluster center sits at -3 on all relevant columns except
/// one per cluster, bumped to +15. Cross-cluster cosine similarity is
/// negative while within-cluster similarity stays above 0.99, and removing
/// any single relevant column makes two cluster centers coincide — which is
/// what gives the unsupervised importance its planted signal.
pub fn generate(spec: &FixtureSpec) -> Result<(Dataset, FixtureManifest)> {
    validate(spec)?;
    let mut rng = rng_from(spec.seed, 0);
    let n = spec.n_problems;
    let k = spec.n_clusters;

    let cluster_labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let n_deceptive = (spec.deceptive_fraction * n as f64).round() as usize;
    let deceptive: Vec<bool> =
        (0..n).map(|i| i >= n - n_deceptive).collect();
    let with_marker = n_deceptive > 0;

    let mut feature_names = Vec::new();
    let relevant_columns: Vec<usize> = (0..spec.p_relevant).collect();
    for j in 1..=spec.p_relevant {
        feature_names.push(format!("rel_{j}"));
    }
    let nuisance_columns: Vec<usize> =
        (spec.p_relevant..spec.p_relevant + spec.p_nuisance).collect();
    for j in 1..=spec.p_nuisance {
        feature_names.push(format!("nuis_{j}"));
    }
    let dup_start = spec.p_relevant + spec.p_nuisance;
    let duplicate_columns: Vec<(usize, usize)> =
        (0..spec.n_correlated_copies).map(|c| (dup_start + c, spec.p_relevant)).collect();
    for j in 1..=spec.n_correlated_copies {
        feature_names.push(format!("dup_{j}"));
    }
    let marker_column = with_marker.then(|| {
        feature_names.push("marker".to_string());
        dup_start + spec.n_correlated_copies
    });

    let base_targets: Vec<f64> = (0..k).map(|c| 1.0 + 2.0 * c as f64).collect();

    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut problem_ids = Vec::with_capacity(n);
    for i in 0..n {
        problem_ids.push(format!("f{}", i + 1));
        let cluster = cluster_labels[i];
        let mut row = Vec::with_capacity(feature_names.len());
        for j in 0..spec.p_relevant {
            let center = if cluster >= 1 && (cluster - 1) % spec.p_relevant == j {
                15.0
            } else {
                -3.0
            };
            row.push(center + 0.1 * rng.gen_range(-1.0..1.0));
        }
        for _ in 0..spec.p_nuisance {
            row.push(0.5 + 1e-3 * rng.gen_range(-1.0..1.0));
        }
        for _ in 0..spec.n_correlated_copies {
            let src = row[spec.p_relevant];
            row.push(0.5 * src + 1.0 + 1e-5 * rng.gen_range(-1.0..1.0));
        }
        if with_marker {
            let base = if deceptive[i] { 0.05 } else { 2e-4 };
            row.push(base + 1e-4 * rng.gen_range(0.0..1.0));
        }
        features.push(row);

        let noise = spec.within_cluster_spread * rng.gen_range(-0.5..0.5);
        let offset = if deceptive[i] { DECEPTIVE_OFFSET } else { 0.0 };
        targets.push(base_targets[cluster] + noise + offset);
    }

    let dataset = Dataset::new(
        problem_ids.clone(),
        feature_names,
        features,
        BTreeMap::from([(FIXTURE_ALGORITHM.to_string(), targets)]),
    )?;
    let manifest = FixtureManifest {
        algorithm_id: FIXTURE_ALGORITHM.to_string(),
        cluster_labels,
        cluster_base_targets: base_targets,
        relevant_columns,
        nuisance_columns,
        duplicate_columns,
        marker_column,
        deceptive_problems: problem_ids
            .iter()
            .zip(&deceptive)
            .filter(|&(_, d)| *d)
            .map(|(id, _)| id.clone())
            .collect(),
        deceptive_offset: DECEPTIVE_OFFSET,
        within_cluster_spread: spec.within_cluster_spread,
    };
    Ok((dataset, manifest))
}
