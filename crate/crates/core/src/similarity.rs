//! Plain and weighted cosine similarity, threshold neighbor selection, and
//! prediction calibration.
//!
//! The calibration step averages the model prediction with a
//! similarity-weighted mean of the true performances on training problems
//! whose similarity to the test problem clears a threshold. With no such
//! neighbor the model prediction is returned unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::WeightVector;

/// Vectors with a (weighted) norm below this are treated as zero-norm:
/// their cosine similarity is undefined.
pub const ZERO_NORM_EPS: f64 = 1e-15;

fn dot_and_norms(u: &[f64], v: &[f64]) -> Result<(f64, f64, f64)> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "cosine of {}- and {}-dimensional vectors",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::invalid_argument("cosine of empty vectors"));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    Ok((dot, nu, nv))
}

/// Cosine similarity in [-1, 1]. The denominator is computed as
/// `sqrt(|u|^2 * |v|^2)` so that the similarity of a vector with itself is
/// exactly 1.0; the result is clipped against rounding either way.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    let (dot, nu, nv) = dot_and_norms(u, v)?;
    if nu.sqrt() < ZERO_NORM_EPS || nv.sqrt() < ZERO_NORM_EPS {
        return Err(Error::ZeroNorm("cosine of a zero-norm vector".to_string()));
    }
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

/// Weighted cosine similarity: the cosine of the element-wise products
/// `w∘u` and `w∘v`, which is algebraically the ratio of `Σ w_i^2 u_i v_i`
/// over the product of the weighted norms.
pub fn weighted_cosine(u: &[f64], v: &[f64], w: &WeightVector) -> Result<f64> {
    if w.len() != u.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {}-dimensional vectors",
            w.len(),
            u.len()
        )));
    }
    let wu: Vec<f64> = u.iter().zip(w.weights()).map(|(a, wi)| wi * a).collect();
    let wv: Vec<f64> = v.iter().zip(w.weights()).map(|(b, wi)| wi * b).collect();
    match cosine(&wu, &wv) {
        Err(Error::ZeroNorm(_)) => Err(Error::ZeroNorm(
            "weighted vector has zero norm (weight mass only on zero coordinates)".to_string(),
        )),
        other => other,
    }
}

/// One selected training problem: its similarity to the test problem and
/// its normalized contribution to the calibration term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub id: String,
    pub similarity: f64,
    pub contribution: f64,
}

/// All training problems whose similarity clears `threshold`, sorted by
/// descending similarity. Contributions are `s_i / Σ s_j` and sum to 1
/// whenever the set is nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub entries: Vec<NeighborEntry>,
    pub threshold: f64,
}

impl NeighborSet {
    pub fn empty(threshold: f64) -> Self {
        NeighborSet { entries: Vec::new(), threshold }
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }
}

/// Selects the training problems whose (weighted) cosine similarity with
/// the test problem is at least `threshold`. `weights = None` is the
/// unweighted variant and runs through the same code path with uniform
/// weights. Pairs with a zero weighted norm are excluded with a warning
/// rather than failing the call.
pub fn select_neighbors(
    x_test: &[f64],
    x_train: &[Vec<f64>],
    train_ids: &[String],
    threshold: f64,
    weights: Option<&WeightVector>,
) -> Result<NeighborSet> {
    if !(threshold > -1.0 && threshold <= 1.0) {
        return Err(Error::invalid_argument(format!(
            "similarity threshold must lie in (-1, 1], got {threshold}"
        )));
    }
    if x_train.len() != train_ids.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} training rows vs {} ids",
            x_train.len(),
            train_ids.len()
        )));
    }
    let uniform;
    let w = match weights {
        Some(w) => w,
        None => {
            uniform = WeightVector::uniform((0..x_test.len()).collect());
            &uniform
        }
    };

    let mut entries: Vec<NeighborEntry> = Vec::new();
    for (row, id) in x_train.iter().zip(train_ids) {
        let s = match weighted_cosine(x_test, row, w) {
            Ok(s) => s,
            Err(Error::ZeroNorm(_)) => {
                log::warn!("similarity of '{id}' undefined (zero weighted norm); excluded");
                continue;
            }
            Err(e) => return Err(e),
        };
        if s >= threshold {
            entries.push(NeighborEntry { id: id.clone(), similarity: s, contribution: 0.0 });
        }
    }
    // stable sort: ties keep training order
    entries.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
    let total: f64 = entries.iter().map(|e| e.similarity).sum();
    if !entries.is_empty() {
        if total <= 0.0 {
            return Err(Error::invalid_argument(format!(
                "nonpositive similarity sum {total}; contributions undefined at threshold {threshold}"
            )));
        }
        for e in &mut entries {
            e.contribution = e.similarity / total;
        }
    }
    Ok(NeighborSet { entries, threshold })
}

/// The calibrated prediction: with neighbors, the midpoint of the model
/// prediction and the contribution-weighted mean of neighbor performances;
/// without neighbors, the model prediction itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPrediction {
    pub rf_prediction: f64,
    pub neighbors: NeighborSet,
    pub final_prediction: f64,
}

pub fn calibrate(
    rf_prediction: f64,
    neighbors: NeighborSet,
    y_train: &BTreeMap<String, f64>,
) -> Result<CalibratedPrediction> {
    if neighbors.entries.is_empty() {
        return Ok(CalibratedPrediction {
            rf_prediction,
            neighbors,
            final_prediction: rf_prediction,
        });
    }
    let mut weighted_mean = 0.0;
    for e in &neighbors.entries {
        let y = y_train
            .get(&e.id)
            .ok_or_else(|| Error::MissingTarget(e.id.clone()))?;
        weighted_mean += e.contribution * y;
    }
    Ok(CalibratedPrediction {
        rf_prediction,
        neighbors,
        final_prediction: (rf_prediction + weighted_mean) / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::normalize_weights;
    use rand::Rng;

    #[test]
    fn cosine_basics() {
        let u = vec![0.3, -1.7, 2.9];
        assert_eq!(cosine(&u, &u).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let got = cosine(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((got - 10.0 / 14.0).abs() < 1e-15, "{got}");
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn weighted_cosine_matches_hand_oracle() {
        // direct evaluation of the weighted similarity ratio as an oracle
        fn oracle(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
            let num: f64 = (0..u.len()).map(|i| w[i] * w[i] * u[i] * v[i]).sum();
            let du: f64 = (0..u.len()).map(|i| (w[i] * u[i]).powi(2)).sum();
            let dv: f64 = (0..u.len()).map(|i| (w[i] * v[i]).powi(2)).sum();
            num / (du.sqrt() * dv.sqrt())
        }
        let w = normalize_weights(&[0, 1], &[3.0, 1.0]).unwrap();
        assert_eq!(w.weights(), [0.75, 0.25]);
        let got = weighted_cosine(&[1.0, 2.0], &[2.0, 1.0], &w).unwrap();
        let want = oracle(&[1.0, 2.0], &[2.0, 1.0], &[0.75, 0.25]);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        let direct = cosine(&[0.75, 0.5], &[1.5, 0.25]).unwrap();
        assert!((got - direct).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_reduce_to_plain_cosine() {
        let mut rng = crate::rng::rng_from(23, 0);
        for _ in 0..100 {
            let p = rng.gen_range(2..20);
            let u: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let w = WeightVector::uniform((0..p).collect());
            let (Ok(plain), Ok(weighted)) = (cosine(&u, &v), weighted_cosine(&u, &v, &w)) else {
                continue;
            };
            assert!((plain - weighted).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_weight_on_positive_coordinate_gives_one() {
        let w = normalize_weights(&[0, 1, 2], &[0.0, 1.0, 0.0]).unwrap();
        let got = weighted_cosine(&[5.0, 2.0, -1.0], &[4.0, 7.0, 3.0], &w).unwrap();
        assert_eq!(got, 1.0);
    }

    #[test]
    fn positive_rescaling_invariance() {
        let mut rng = crate::rng::rng_from(29, 0);
        for _ in 0..50 {
            let u: Vec<f64> = (0..6).map(|_| rng.gen_range(0.1..3.0)).collect();
            let v: Vec<f64> = (0..6).map(|_| rng.gen_range(0.1..3.0)).collect();
            let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
            let w = normalize_weights(&(0..6).collect::<Vec<_>>(), &raw).unwrap();
            let alpha = rng.gen_range(0.01..100.0);
            let beta = rng.gen_range(0.01..100.0);
            let ua: Vec<f64> = u.iter().map(|x| alpha * x).collect();
            let vb: Vec<f64> = v.iter().map(|x| beta * x).collect();
            let base = weighted_cosine(&u, &v, &w).unwrap();
            let scaled = weighted_cosine(&ua, &vb, &w).unwrap();
            assert!((base - scaled).abs() < 1e-12, "{base} vs {scaled}");
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn exact_duplicate_is_selected_at_threshold_one() {
        let test = vec![0.4, 1.9, -0.7];
        let train = vec![vec![0.4, 1.9, -0.7], vec![1.0, 0.0, 0.0], vec![0.5, 1.8, -0.6]];
        let ns = select_neighbors(&test, &train, &ids(3), 1.0, None).unwrap();
        assert_eq!(ns.ids(), ["f1"]);
        assert_eq!(ns.entries[0].similarity, 1.0);
        assert_eq!(ns.entries[0].contribution, 1.0);
    }

    #[test]
    fn empty_set_when_nothing_clears_threshold() {
        let test = vec![1.0, 0.0];
        let train = vec![vec![0.0, 1.0], vec![-1.0, 0.1]];
        let ns = select_neighbors(&test, &train, &ids(2), 0.9, None).unwrap();
        assert_eq!(ns.k(), 0);
    }

    #[test]
    fn membership_matches_brute_force_scan() {
        let mut rng = crate::rng::rng_from(31, 0);
        let test: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let train: Vec<Vec<f64>> =
            (0..5).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let names = ids(5);
        let ns = select_neighbors(&test, &train, &names, 0.5, None).unwrap();
        let expected: Vec<&str> = {
            let mut sims: Vec<(&str, f64)> = train
                .iter()
                .zip(&names)
                .map(|(row, id)| (id.as_str(), cosine(&test, row).unwrap()))
                .filter(|&(_, s)| s >= 0.5)
                .collect();
            sims.sort_by(|a, b| b.1.total_cmp(&a.1));
            sims.iter().map(|&(id, _)| id).collect()
        };
        assert_eq!(ns.ids(), expected);
        if ns.k() > 0 {
            let total: f64 = ns.entries.iter().map(|e| e.contribution).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_is_monotone_in_threshold() {
        let mut rng = crate::rng::rng_from(37, 0);
        let test: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..2.0)).collect();
        let train: Vec<Vec<f64>> =
            (0..8).map(|_| (0..3).map(|_| rng.gen_range(0.1..2.0)).collect()).collect();
        let names = ids(8);
        let at = |t: f64| {
            select_neighbors(&test, &train, &names, t, None)
                .unwrap()
                .ids()
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
        };
        let s09 = at(0.9);
        let s07 = at(0.7);
        let s05 = at(0.5);
        assert!(s09.iter().all(|id| s07.contains(id)));
        assert!(s07.iter().all(|id| s05.contains(id)));
    }

    #[test]
    fn contributions_are_scale_free() {
        // multiplying all similarities by a positive constant cannot change
        // contributions; realized here by scaling the test vector, which
        // leaves every cosine unchanged
        let test = vec![1.0, 2.0, 0.5];
        let scaled: Vec<f64> = test.iter().map(|v| 3.7 * v).collect();
        let train = vec![vec![1.1, 1.9, 0.4], vec![0.9, 2.2, 0.6], vec![1.0, 1.0, 1.0]];
        let a = select_neighbors(&test, &train, &ids(3), 0.5, None).unwrap();
        let b = select_neighbors(&scaled, &train, &ids(3), 0.5, None).unwrap();
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            assert_eq!(ea.id, eb.id);
            assert!((ea.contribution - eb.contribution).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrate_examples() {
        let targets: BTreeMap<String, f64> = BTreeMap::from([
            ("f1".to_string(), 3.0),
            ("f2".to_string(), 2.0),
            ("f3".to_string(), 5.0),
        ]);

        let empty = calibrate(1.7, NeighborSet::empty(0.9), &targets).unwrap();
        assert_eq!(empty.final_prediction, 1.7);

        let one = NeighborSet {
            entries: vec![NeighborEntry {
                id: "f1".to_string(),
                similarity: 0.95,
                contribution: 1.0,
            }],
            threshold: 0.9,
        };
        assert_eq!(calibrate(1.0, one, &targets).unwrap().final_prediction, 2.0);

        let two = NeighborSet {
            entries: vec![
                NeighborEntry { id: "f2".to_string(), similarity: 0.9, contribution: 0.9 / 1.5 },
                NeighborEntry { id: "f3".to_string(), similarity: 0.6, contribution: 0.6 / 1.5 },
            ],
            threshold: 0.5,
        };
        let got = calibrate(1.0, two, &targets).unwrap();
        // F = (0.9*2 + 0.6*5)/1.5 = 3.2, final = (1 + 3.2)/2 = 2.1
        assert!((got.final_prediction - 2.1).abs() < 1e-12);

        let missing = NeighborSet {
            entries: vec![NeighborEntry {
                id: "f9".to_string(),
                similarity: 0.9,
                contribution: 1.0,
            }],
            threshold: 0.5,
        };
        assert!(matches!(calibrate(1.0, missing, &targets), Err(Error::MissingTarget(_))));
    }

    #[test]
    fn final_is_midpoint_of_model_and_neighbor_mean() {
        let mut rng = crate::rng::rng_from(41, 0);
        for _ in 0..50 {
            let rf = rng.gen_range(-5.0..5.0);
            let y1 = rng.gen_range(-5.0..5.0);
            let y2 = rng.gen_range(-5.0..5.0);
            let s1 = rng.gen_range(0.5..1.0);
            let s2 = rng.gen_range(0.5..1.0);
            let targets =
                BTreeMap::from([("a".to_string(), y1), ("b".to_string(), y2)]);
            let ns = NeighborSet {
                entries: vec![
                    NeighborEntry {
                        id: "a".to_string(),
                        similarity: s1,
                        contribution: s1 / (s1 + s2),
                    },
                    NeighborEntry {
                        id: "b".to_string(),
                        similarity: s2,
                        contribution: s2 / (s1 + s2),
                    },
                ],
                threshold: 0.5,
            };
            let got = calibrate(rf, ns, &targets).unwrap();
            let f = (s1 * y1 + s2 * y2) / (s1 + s2);
            assert!((got.final_prediction - (rf + f) / 2.0).abs() < 1e-12);
            let lo = rf.min(f);
            let hi = rf.max(f);
            assert!(got.final_prediction >= lo - 1e-12 && got.final_prediction <= hi + 1e-12);
        }
    }
}
