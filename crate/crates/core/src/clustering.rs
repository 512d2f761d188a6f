//! Agglomerative hierarchical clustering over problem feature vectors,
//! cluster-count diagnostics, and clustering comparison.
//!
//! Average linkage is maintained with the Lance-Williams recurrence; merge
//! ties are broken by the lexicographically smallest cluster-id pair so the
//! dendrogram is identical across platforms and row orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::cosine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linkage {
    Average,
}

/// One agglomeration step. Cluster ids follow the usual stepwise
/// convention: leaves are `0..n`, the cluster formed by merge `i` gets id
/// `n + i`. `a < b` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
    pub metric: String,
    pub n_leaves: usize,
}

/// A flat clustering: `labels[i]` in `[0, m)`, every cluster nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub m: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, m: usize) -> Result<Self> {
        if labels.iter().any(|&l| l >= m) {
            return Err(Error::invalid_argument("cluster label out of range"));
        }
        for c in 0..m {
            if !labels.iter().any(|&l| l == c) {
                return Err(Error::invalid_argument(format!("cluster {c} is empty")));
            }
        }
        Ok(ClusterAssignment { labels, m })
    }
}

/// Pairwise cosine distances `1 - cos(x_i, x_j)` with an exactly zero
/// diagonal. Zero-norm rows are an error.
pub fn cosine_distance_matrix(x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = 1.0 - cosine(&x[i], &x[j])?;
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    Ok(d)
}

fn check_distance_matrix(d: &[Vec<f64>]) -> Result<()> {
    let n = d.len();
    if n < 2 {
        return Err(Error::invalid_argument("need >= 2 points to cluster"));
    }
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch("distance matrix is not square".to_string()));
        }
        if d[i][i] != 0.0 {
            return Err(Error::invalid_argument("distance matrix diagonal must be zero"));
        }
        for j in 0..n {
            if !d[i][j].is_finite() || d[i][j] != d[j][i] {
                return Err(Error::invalid_argument(
                    "distance matrix must be finite and symmetric",
                ));
            }
        }
    }
    Ok(())
}

/// Agglomerates `n` points into a stepwise dendrogram. Deterministic: among
/// minimum-distance pairs the lexicographically smallest active cluster-id
/// pair merges first.
pub fn agglomerate(d: &[Vec<f64>], linkage: Linkage, metric: &str) -> Result<Dendrogram> {
    check_distance_matrix(d)?;
    let n = d.len();

    // active cluster id -> (index into `dist`, member count)
    let mut active: Vec<(usize, usize)> = (0..n).map(|i| (i, 1)).collect();
    let mut ids: Vec<usize> = (0..n).collect();
    let mut dist: Vec<Vec<f64>> = d.to_vec();
    let mut merges = Vec::with_capacity(n - 1);

    let id_pair = |ids: &[usize], x: usize, y: usize| {
        let (p, q) = (ids[x], ids[y]);
        if p < q {
            (p, q)
        } else {
            (q, p)
        }
    };

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for ai in 0..active.len() {
            for bi in (ai + 1)..active.len() {
                let dv = dist[active[ai].0][active[bi].0];
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        dv < bd || (dv == bd && id_pair(&ids, ai, bi) < id_pair(&ids, ba, bb))
                    }
                };
                if better {
                    best = Some((dv, ai, bi));
                }
            }
        }
        let (dv, ai, bi) = best.expect("at least one active pair");
        let (ra, na) = active[ai];
        let (rb, nb) = active[bi];
        let merged_size = na + nb;
        let (a, b) = id_pair(&ids, ai, bi);
        merges.push(Merge { a, b, distance: dv, size: merged_size });

        // Lance-Williams update for average linkage, written into row ra
        for &(rk, _) in active.iter() {
            if rk == ra || rk == rb {
                continue;
            }
            let updated =
                (na as f64 * dist[ra][rk] + nb as f64 * dist[rb][rk]) / merged_size as f64;
            dist[ra][rk] = updated;
            dist[rk][ra] = updated;
        }
        active[ai] = (ra, merged_size);
        ids[ai] = n + step;
        active.remove(bi);
        ids.remove(bi);
    }

    Ok(Dendrogram { merges, linkage, metric: metric.to_string(), n_leaves: n })
}

/// Cuts the dendrogram into exactly `m` clusters: the flat clustering that
/// exists after the first `n - m` merges. Labels are assigned by first
/// occurrence in point order.
pub fn cut(dendrogram: &Dendrogram, m: usize) -> Result<ClusterAssignment> {
    let n = dendrogram.n_leaves;
    if m < 1 || m > n {
        return Err(Error::invalid_argument(format!(
            "cluster count {m} out of range [1, {n}]"
        )));
    }
    // union-find over stepwise ids
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (step, merge) in dendrogram.merges.iter().take(n - m).enumerate() {
        let ra = find(&mut parent, merge.a);
        let rb = find(&mut parent, merge.b);
        parent[ra] = n + step;
        parent[rb] = n + step;
    }
    let mut label_of_root: std::collections::HashMap<usize, usize> = Default::default();
    let mut labels = Vec::with_capacity(n);
    for point in 0..n {
        let root = find(&mut parent, point);
        let next = label_of_root.len();
        let label = *label_of_root.entry(root).or_insert(next);
        labels.push(label);
    }
    ClusterAssignment::new(labels, m)
}

/// Mean silhouette coefficient over all points; singleton clusters
/// contribute 0 for their lone member.
pub fn silhouette(d: &[Vec<f64>], assignment: &ClusterAssignment) -> Result<f64> {
    check_distance_matrix(d)?;
    let n = d.len();
    if assignment.labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} points",
            assignment.labels.len(),
            n
        )));
    }
    let m = assignment.m;
    if m < 2 {
        return Err(Error::invalid_argument("silhouette needs >= 2 clusters"));
    }
    let mut cluster_size = vec![0usize; m];
    for &l in &assignment.labels {
        cluster_size[l] += 1;
    }

    let mut total = 0.0;
    for i in 0..n {
        let own = assignment.labels[i];
        if cluster_size[own] == 1 {
            continue; // contributes 0
        }
        let mut sums = vec![0.0; m];
        for j in 0..n {
            if j != i {
                sums[assignment.labels[j]] += d[i][j];
            }
        }
        let a = sums[own] / (cluster_size[own] - 1) as f64;
        let b = (0..m)
            .filter(|&c| c != own && cluster_size[c] > 0)
            .map(|c| sums[c] / cluster_size[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Mean silhouette for each candidate cluster count in `[lo, hi]`, the
/// curve used to estimate the cluster count.
pub fn silhouette_curve(d: &[Vec<f64>], lo: usize, hi: usize) -> Result<Vec<(usize, f64)>> {
    let dendro = agglomerate(d, Linkage::Average, "precomputed")?;
    let mut out = Vec::new();
    for m in lo..=hi.min(d.len()) {
        let labels = cut(&dendro, m)?;
        out.push((m, silhouette(d, &labels)?));
    }
    Ok(out)
}

/// Minimum-cost assignment on a square cost matrix (Hungarian algorithm
/// with potentials). Returns `assigned[row] = col`.
fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[col] = row matched to col (1-based rows)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assigned = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assigned[p[j] - 1] = j - 1;
        }
    }
    assigned
}

/// The number of points on which two clusterings disagree after optimally
/// matching their (arbitrary) labels: `n` minus the maximum label-matching
/// agreement over the contingency table.
pub fn disagreement_count(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<usize> {
    if a.labels.len() != b.labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} labeled points",
            a.labels.len(),
            b.labels.len()
        )));
    }
    if a.m != b.m {
        return Err(Error::DimensionMismatch(format!(
            "cluster counts differ: {} vs {}",
            a.m, b.m
        )));
    }
    let m = a.m;
    let n = a.labels.len();
    let mut contingency = vec![vec![0i64; m]; m];
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        contingency[la][lb] += 1;
    }
    // maximize agreement = minimize negated counts
    let cost: Vec<Vec<i64>> = contingency.iter().map(|row| row.iter().map(|&c| -c).collect()).collect();
    let assigned = hungarian_min(&cost);
    let agreement: i64 = (0..m).map(|i| contingency[i][assigned[i]]).sum();
    Ok(n - agreement as usize)
}
