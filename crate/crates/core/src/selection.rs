//! Per-fold feature portfolio construction.
//!
//! Highly correlated features are grouped by enumerating maximal cliques of
//! the correlation graph; each group keeps the single member whose
//! one-feature forest scores the lowest out-of-bag MAE, and every ungrouped
//! feature is kept unconditionally.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forest::{fit, oob_mae, ForestParams};

/// Whether correlation-graph edges use `|r| > threshold` or the signed
/// `r > threshold`. Negative near-duplicates are equally redundant, so
/// absolute is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMode {
    Absolute,
    Signed,
}

impl FromStr for CorrelationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(CorrelationMode::Absolute),
            "signed" => Ok(CorrelationMode::Signed),
            other => Err(Error::invalid_argument(format!(
                "unknown correlation mode '{other}' (expected absolute|signed)"
            ))),
        }
    }
}

impl std::fmt::Display for CorrelationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CorrelationMode::Absolute => write!(f, "absolute"),
            CorrelationMode::Signed => write!(f, "signed"),
        }
    }
}

/// Simple undirected graph on feature indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl CorrelationGraph {
    fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.n]; self.n];
        for &(i, j) in &self.edges {
            adj[i][j] = true;
            adj[j][i] = true;
        }
        adj
    }
}

/// Sample Pearson correlation coefficient, clipped to [-1, 1].
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "pearson of {}- and {}-length vectors",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 2 {
        return Err(Error::invalid_argument("pearson needs >= 2 observations"));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut su = 0.0;
    let mut sv = 0.0;
    for (a, b) in u.iter().zip(v) {
        cov += (a - mu) * (b - mv);
        su += (a - mu) * (a - mu);
        sv += (b - mv) * (b - mv);
    }
    if su == 0.0 || sv == 0.0 {
        return Err(Error::ConstantInput(
            "pearson undefined for a constant vector".to_string(),
        ));
    }
    Ok((cov / (su * sv).sqrt()).clamp(-1.0, 1.0))
}

fn column(x: &[Vec<f64>], j: usize) -> Vec<f64> {
    x.iter().map(|row| row[j]).collect()
}

/// Builds the feature correlation graph over the training rows: an edge
/// joins every pair whose correlation exceeds `threshold` (absolute or
/// signed per `mode`). Constant columns must be dropped beforehand.
pub fn build_correlation_graph(
    x_train: &[Vec<f64>],
    threshold: f64,
    mode: CorrelationMode,
) -> Result<CorrelationGraph> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid_argument(format!(
            "correlation threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if x_train.len() < 2 {
        return Err(Error::invalid_argument("need >= 2 rows to correlate features"));
    }
    let p = x_train[0].len();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| column(x_train, j)).collect();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let r = pearson(&columns[i], &columns[j])?;
            let hit = match mode {
                CorrelationMode::Absolute => r.abs() > threshold,
                CorrelationMode::Signed => r > threshold,
            };
            if hit {
                edges.push((i, j));
            }
        }
    }
    Ok(CorrelationGraph { n: p, edges })
}

fn bron_kerbosch(
    adj: &[Vec<bool>],
    r: &mut Vec<usize>,
    p: Vec<usize>,
    x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        if r.len() >= 2 {
            out.push(r.clone());
        }
        return;
    }
    // pivot: vertex of P ∪ X with the most neighbors in P
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&v| adj[u][v]).count())
        .expect("nonempty P or X");
    let candidates: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();

    let mut p = p;
    let mut x = x;
    for v in candidates {
        let np: Vec<usize> = p.iter().copied().filter(|&w| adj[v][w]).collect();
        let nx: Vec<usize> = x.iter().copied().filter(|&w| adj[v][w]).collect();
        r.push(v);
        bron_kerbosch(adj, r, np, nx, out);
        r.pop();
        p.retain(|&w| w != v);
        x.push(v);
    }
}

/// All maximal cliques of size >= 2, each sorted ascending, the list
/// ordered by (smallest member, size, members).
pub fn correlated_groups(graph: &CorrelationGraph) -> Vec<Vec<usize>> {
    let adj = graph.adjacency();
    let mut out = Vec::new();
    let mut r = Vec::new();
    bron_kerbosch(&adj, &mut r, (0..graph.n).collect(), Vec::new(), &mut out);
    for clique in &mut out {
        clique.sort_unstable();
    }
    out.sort_by(|a, b| (a[0], a.len(), a).cmp(&(b[0], b.len(), b)));
    out
}

/// One correlated group with its chosen representative and per-member
/// out-of-bag MAE of a single-feature forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSelection {
    pub members: Vec<usize>,
    pub representative: usize,
    pub member_oob_mae: Vec<f64>,
}

/// The surviving feature subset for one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePortfolio {
    /// kept feature indices, ascending
    pub kept: Vec<usize>,
    pub groups: Vec<GroupSelection>,
}

/// Scores every group member with a one-feature forest and keeps the member
/// with the lowest out-of-bag MAE (ties: lowest feature index). Features in
/// no group are kept unconditionally; a feature in several groups is kept
/// iff it represents at least one of them.
pub fn select_representatives(
    groups: &[Vec<usize>],
    x_train: &[Vec<f64>],
    y_train: &[f64],
    params: &ForestParams,
) -> Result<FeaturePortfolio> {
    let p = x_train.first().map_or(0, |r| r.len());
    let mut grouped = vec![false; p];
    let mut representative = vec![false; p];
    let mut selections = Vec::with_capacity(groups.len());

    for members in groups {
        let mut maes = Vec::with_capacity(members.len());
        for &f in members {
            grouped[f] = true;
            let single: Vec<Vec<f64>> = x_train.iter().map(|row| vec![row[f]]).collect();
            let forest = fit(&single, y_train, params)?;
            maes.push(oob_mae(&forest, &single, y_train)?);
        }
        let mut best = 0usize;
        for i in 1..members.len() {
            if maes[i] < maes[best] {
                best = i;
            }
        }
        representative[members[best]] = true;
        selections.push(GroupSelection {
            members: members.clone(),
            representative: members[best],
            member_oob_mae: maes,
        });
    }

    let kept: Vec<usize> =
        (0..p).filter(|&f| !grouped[f] || representative[f]).collect();
    Ok(FeaturePortfolio { kept, groups: selections })
}

/// Full portfolio construction for one training fold: correlation graph,
/// maximal cliques of at least `min_group_size` members, then one
/// representative per group. Logs the documented exception when two kept
/// representatives of overlapping groups stay correlated.
pub fn build_portfolio(
    x_train: &[Vec<f64>],
    y_train: &[f64],
    threshold: f64,
    mode: CorrelationMode,
    min_group_size: usize,
    params: &ForestParams,
) -> Result<FeaturePortfolio> {
    let graph = build_correlation_graph(x_train, threshold, mode)?;
    let groups: Vec<Vec<usize>> = correlated_groups(&graph)
        .into_iter()
        .filter(|g| g.len() >= min_group_size.max(2))
        .collect();
    let portfolio = select_representatives(&groups, x_train, y_train, params)?;

    let adj = graph.adjacency();
    for (i, &a) in portfolio.kept.iter().enumerate() {
        for &b in &portfolio.kept[i + 1..] {
            if adj[a][b] {
                log::info!(
                    "kept features {a} and {b} stay correlated above {threshold} \
                     (representatives of overlapping groups)"
                );
            }
        }
    }
    Ok(portfolio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pearson_basics() {
        let u = vec![1.0, 2.0, 4.0, 3.0];
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        assert_eq!(pearson(&u, &u).unwrap(), 1.0);
        assert_eq!(pearson(&u, &neg).unwrap(), -1.0);
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &u[..3]),
            Err(Error::ConstantInput(_))
        ));

        // direct formula evaluation as the oracle
        let got = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        let want = 3.0 / (2.0_f64 * 14.0 / 3.0).sqrt();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.982).abs() < 1e-3);
    }

    #[test]
    fn graph_edges_match_brute_force() {
        let mut rng = crate::rng::rng_from(73, 0);
        // five engineered columns: 1 ~ 0 (affine), 3 ~ -2 (negated), 4 noise
        let x: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let a = rng.gen_range(-1.0..1.0);
                let c = rng.gen_range(-1.0..1.0);
                vec![
                    a,
                    2.0 * a + 0.3 + 1e-3 * rng.gen_range(-1.0..1.0),
                    c,
                    -c + 1e-3 * rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let graph = build_correlation_graph(&x, 0.9, CorrelationMode::Absolute).unwrap();

        let mut expected = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                let u: Vec<f64> = x.iter().map(|r| r[i]).collect();
                let v: Vec<f64> = x.iter().map(|r| r[j]).collect();
                if pearson(&u, &v).unwrap().abs() > 0.9 {
                    expected.push((i, j));
                }
            }
        }
        assert_eq!(graph.edges, expected);
        assert!(graph.edges.contains(&(0, 1)));
        assert!(graph.edges.contains(&(2, 3)));

        // signed mode drops the negative near-duplicate edge
        let signed = build_correlation_graph(&x, 0.9, CorrelationMode::Signed).unwrap();
        assert!(signed.edges.contains(&(0, 1)));
        assert!(!signed.edges.contains(&(2, 3)));
    }

    #[test]
    fn orthogonal_features_give_edgeless_graph() {
        let mut rng = crate::rng::rng_from(79, 0);
        let x: Vec<Vec<f64>> =
            (0..50).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let graph = build_correlation_graph(&x, 0.9, CorrelationMode::Absolute).unwrap();
        assert!(graph.edges.is_empty());
    }

    #[test]
    fn duplicated_column_forms_an_edge() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64, (i % 3) as f64]).collect();
        let graph = build_correlation_graph(&x, 0.9, CorrelationMode::Absolute).unwrap();
        assert_eq!(graph.edges, vec![(0, 1)]);
    }

    #[test]
    fn cliques_triangle_path_k4() {
        let triangle = CorrelationGraph { n: 3, edges: vec![(0, 1), (0, 2), (1, 2)] };
        assert_eq!(correlated_groups(&triangle), vec![vec![0, 1, 2]]);

        let path = CorrelationGraph { n: 3, edges: vec![(0, 1), (1, 2)] };
        assert_eq!(correlated_groups(&path), vec![vec![0, 1], vec![1, 2]]);

        let k4_plus_isolated = CorrelationGraph {
            n: 5,
            edges: vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        };
        assert_eq!(correlated_groups(&k4_plus_isolated), vec![vec![0, 1, 2, 3]]);
    }

    /// Exhaustive maximal-clique enumeration over all vertex subsets.
    pub(crate) fn cliques_brute_force(graph: &CorrelationGraph) -> Vec<Vec<usize>> {
        let adj = graph.adjacency();
        let n = graph.n;
        let is_clique = |members: &[usize]| {
            members
                .iter()
                .enumerate()
                .all(|(i, &a)| members[i + 1..].iter().all(|&b| adj[a][b]))
        };
        let mut cliques = Vec::new();
        for mask in 1u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
            if members.len() < 2 || !is_clique(&members) {
                continue;
            }
            let extendable = (0..n)
                .filter(|v| !members.contains(v))
                .any(|v| members.iter().all(|&m| adj[v][m]));
            if !extendable {
                cliques.push(members);
            }
        }
        cliques.sort_by(|a, b| (a[0], a.len(), a.clone()).cmp(&(b[0], b.len(), b.clone())));
        cliques
    }

    #[test]
    fn cliques_match_brute_force_on_random_graphs() {
        let mut rng = crate::rng::rng_from(83, 0);
        for _ in 0..40 {
            let n = rng.gen_range(2..=9);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_range(0.0..1.0) < 0.4 {
                        edges.push((i, j));
                    }
                }
            }
            let graph = CorrelationGraph { n, edges };
            assert_eq!(correlated_groups(&graph), cliques_brute_force(&graph));
        }
    }

    #[test]
    fn informative_member_wins_its_group() {
        let mut rng = crate::rng::rng_from(89, 0);
        let informative: Vec<f64> = (0..20).map(|i| i as f64 + 0.1 * rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<Vec<f64>> = informative
            .iter()
            .map(|&v| vec![rng.gen_range(-1.0..1.0), v])
            .collect();
        let y = informative.clone();
        let portfolio = select_representatives(
            &[vec![0, 1]],
            &x,
            &y,
            &ForestParams::default(),
        )
        .unwrap();
        assert_eq!(portfolio.groups[0].representative, 1);
        assert_eq!(portfolio.kept, vec![1]);
        assert!(portfolio.groups[0].member_oob_mae[1] < portfolio.groups[0].member_oob_mae[0]);
    }

    #[test]
    fn edgeless_graph_keeps_everything() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, (i * i % 7) as f64, (i % 3) as f64])
            .collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let portfolio = select_representatives(&[], &x, &y, &ForestParams::default()).unwrap();
        assert_eq!(portfolio.kept, vec![0, 1, 2]);
        assert!(portfolio.groups.is_empty());
    }

    #[test]
    fn two_disjoint_pairs_keep_two_representatives() {
        let mut rng = crate::rng::rng_from(97, 0);
        let x: Vec<Vec<f64>> = (0..15)
            .map(|i| {
                let a = i as f64;
                let b = rng.gen_range(-1.0..1.0);
                vec![
                    a,
                    2.0 * a + 1e-3 * rng.gen_range(-1.0..1.0),
                    b,
                    3.0 * b + 1e-3 * rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let y: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let portfolio = build_portfolio(
            &x,
            &y,
            0.9,
            CorrelationMode::Absolute,
            2,
            &ForestParams::default(),
        )
        .unwrap();
        assert_eq!(portfolio.groups.len(), 2);
        // one representative per pair plus the ungrouped noise feature
        assert_eq!(portfolio.kept.len(), 3);
        assert!(portfolio.kept.contains(&4));
    }
}
