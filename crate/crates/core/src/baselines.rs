//! Reference designs and clusterings: Bernoulli, complete, and cluster
//! randomization, with spectral, hop-net, and greedy-modularity clusterings
//! feeding the latter. Closed-form design covariances accompany each design
//! so bounds can be evaluated without sampling.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::objective::{CovMode, DesignCovariance};
use crate::rng::substream;
use crate::rounding::Assignment;
use crate::spectra::SpectralBundle;

/// A partition of `[n]` into `k` nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub k: usize,
    pub method: String,
}

impl Clustering {
    pub fn new(labels: Vec<usize>, k: usize, method: impl Into<String>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        let mut seen = vec![false; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::invalid(format!("label {l} out of range for k = {k}")));
            }
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("every cluster must be nonempty"));
        }
        Ok(Clustering { labels, k, method: method.into() })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// CSV rows `unit,label`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path.as_ref())?;
        for (unit, label) in self.labels.iter().enumerate() {
            writeln!(file, "{unit},{label}")?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, n: usize) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let mut labels = vec![usize::MAX; n];
        for line in BufReader::new(file).lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let unit: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::parse(format!("bad row '{line}'")))?;
            let label: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::parse(format!("bad row '{line}'")))?;
            if unit >= n {
                return Err(Error::invalid(format!("unit {unit} out of range")));
            }
            labels[unit] = label;
        }
        if labels.iter().any(|&l| l == usize::MAX) {
            return Err(Error::parse("missing unit rows"));
        }
        let k = labels.iter().max().map(|m| m + 1).unwrap_or(0);
        Clustering::new(labels, k, "file")
    }
}

/// i.i.d. ±1 with `P(+1) = p`.
pub fn bernoulli_design(n: usize, p: f64, seed: u64) -> Result<Assignment> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p must be in (0,1)"));
    }
    let mut rng = substream(seed, "bernoulli");
    let x = DVector::from_fn(n, |_, _| if rng.random::<f64>() < p { 1.0 } else { -1.0 });
    Assignment::new(x, "bernoulli", seed)
}

/// Closed form: mean `(2p-1)·1`, covariance `4p(1-p)·I`.
pub fn bernoulli_covariance(n: usize, p: f64) -> Result<DesignCovariance> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p must be in (0,1)"));
    }
    let mean = DVector::from_element(n, 2.0 * p - 1.0);
    let cov = DMatrix::identity(n, n) * (4.0 * p * (1.0 - p));
    let second = &cov + &mean * mean.transpose();
    DesignCovariance::new(second, mean, CovMode::Exact)
}

/// Uniformly random subset of exactly `n1` treated units.
pub fn complete_design(n: usize, n1: usize, seed: u64) -> Result<Assignment> {
    if n1 == 0 || n1 >= n {
        return Err(Error::invalid(format!("n1 = {n1} must satisfy 0 < n1 < n = {n}")));
    }
    let mut rng = substream(seed, "complete");
    let mut units: Vec<usize> = (0..n).collect();
    units.shuffle(&mut rng);
    let mut x = DVector::from_element(n, -1.0);
    for &i in units.iter().take(n1) {
        x[i] = 1.0;
    }
    Assignment::new(x, "complete", seed)
}

/// Exact moments of complete randomization: hypergeometric pair
/// probabilities give `E[x_i x_j]` for `i ≠ j`; at `n1 = n/2` the covariance
/// is `(1 + 1/(n-1))I - 11ᵀ/(n-1)`.
pub fn complete_covariance(n: usize, n1: usize) -> Result<DesignCovariance> {
    if n1 == 0 || n1 >= n {
        return Err(Error::invalid(format!("n1 = {n1} must satisfy 0 < n1 < n = {n}")));
    }
    let nf = n as f64;
    let t = n1 as f64;
    let c = (n - n1) as f64;
    let mean_val = 2.0 * t / nf - 1.0;
    // P(++) , P(--), P(+-)+P(-+) over ordered pairs.
    let denom = nf * (nf - 1.0);
    let cross = (t * (t - 1.0) + c * (c - 1.0) - 2.0 * t * c) / denom;
    let mut second = DMatrix::from_element(n, n, cross);
    for i in 0..n {
        second[(i, i)] = 1.0;
    }
    DesignCovariance::new(second, DVector::from_element(n, mean_val), CovMode::Exact)
}

/// One Bernoulli(p) coin per cluster, broadcast to its members.
pub fn cluster_design(clustering: &Clustering, p: f64, seed: u64) -> Result<Assignment> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p must be in (0,1)"));
    }
    let mut rng = substream(seed, "cluster");
    let coins: Vec<f64> =
        (0..clustering.k).map(|_| if rng.random::<f64>() < p { 1.0 } else { -1.0 }).collect();
    let x = DVector::from_fn(clustering.n(), |i, _| coins[clustering.labels[i]]);
    Assignment::new(x, format!("cluster-{}", clustering.method), seed)
}

/// Closed form: second moment is 1 within clusters and `(2p-1)²` across;
/// covariance is `4p(1-p)` on within-cluster entries.
pub fn cluster_covariance(clustering: &Clustering, p: f64) -> Result<DesignCovariance> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p must be in (0,1)"));
    }
    let n = clustering.n();
    let cross = (2.0 * p - 1.0) * (2.0 * p - 1.0);
    let second = DMatrix::from_fn(n, n, |i, j| {
        if clustering.labels[i] == clustering.labels[j] {
            1.0
        } else {
            cross
        }
    });
    DesignCovariance::new(second, DVector::from_element(n, 2.0 * p - 1.0), CovMode::Exact)
}

/// Clustering algorithms for cluster randomization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterMethod {
    /// Rows of the bottom-k eigenvectors of `L_sym`, row-normalized, then
    /// k-means. `k = None` picks the largest eigengap among the first 10
    /// eigenvalues.
    Spectral { k: Option<usize> },
    /// Greedy hop-ball covering: repeatedly take the uncovered vertex of
    /// highest degree as a center and claim everything uncovered within
    /// `eps` hops.
    EpsilonNet { eps: usize },
    /// Local-move + aggregation modularity maximization with a seeded,
    /// deterministic vertex order.
    GreedyModularity,
}

pub fn compute_clusters(
    g: &WeightedGraph,
    bundle: &SpectralBundle,
    method: ClusterMethod,
    seed: u64,
) -> Result<Clustering> {
    match method {
        ClusterMethod::Spectral { k } => spectral_clusters(g, bundle, k, seed),
        ClusterMethod::EpsilonNet { eps } => epsilon_net_clusters(g, eps),
        ClusterMethod::GreedyModularity => greedy_modularity_clusters(g, seed),
    }
}

fn pick_k_by_eigengap(bundle: &SpectralBundle) -> usize {
    let vals = bundle.eigvals();
    let m = vals.len().min(10);
    let mut best_k = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 0..m.saturating_sub(1) {
        let gap = vals[i + 1] - vals[i];
        if gap > best_gap {
            best_gap = gap;
            best_k = i + 1;
        }
    }
    best_k.max(1)
}

fn spectral_clusters(
    g: &WeightedGraph,
    bundle: &SpectralBundle,
    k: Option<usize>,
    seed: u64,
) -> Result<Clustering> {
    let n = g.n();
    if g.total_weight() == 0.0 {
        return Err(Error::invalid("spectral clustering needs a nonempty graph"));
    }
    let k = k.unwrap_or_else(|| pick_k_by_eigengap(bundle));
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let (_, vecs) = crate::spectra::sym_eigen_sorted(bundle.lap_sym())?;
    let mut rows = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            rows[(i, j)] = vecs[(i, j)];
        }
        let norm = rows.row(i).norm();
        if norm > 1e-12 {
            let mut row = rows.row_mut(i);
            row /= norm;
        }
    }
    let labels = kmeans(&rows, k, 20, seed)?;
    Clustering::new(labels, k, "spectral")
}

// Lloyd iterations with k-means++ seeding; `restarts` independent runs keep
// the best inertia.
fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.nrows();
    let d = points.ncols();
    if k == 0 || k > n {
        return Err(Error::invalid("kmeans needs 1 <= k <= n"));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = substream(seed.wrapping_add(restart as u64), "kmeans");
        // k-means++ seeding.
        let mut centers = DMatrix::zeros(k, d);
        let first = rng.random_range(0..n);
        centers.set_row(0, &points.row(first));
        let mut dist2: Vec<f64> = (0..n)
            .map(|i| (points.row(i) - centers.row(0)).norm_squared())
            .collect();
        for c in 1..k {
            let total: f64 = dist2.iter().sum();
            let chosen = if total <= 0.0 {
                rng.random_range(0..n)
            } else {
                let mut t = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &w) in dist2.iter().enumerate() {
                    if t < w {
                        pick = i;
                        break;
                    }
                    t -= w;
                }
                pick
            };
            centers.set_row(c, &points.row(chosen));
            for i in 0..n {
                dist2[i] = dist2[i].min((points.row(i) - centers.row(c)).norm_squared());
            }
        }

        let mut labels = vec![0usize; n];
        let mut inertia = f64::INFINITY;
        for _ in 0..100 {
            let mut changed = false;
            let mut new_inertia = 0.0;
            for i in 0..n {
                let mut best_c = 0;
                let mut best_d = f64::INFINITY;
                for c in 0..k {
                    let d2 = (points.row(i) - centers.row(c)).norm_squared();
                    if d2 < best_d {
                        best_d = d2;
                        best_c = c;
                    }
                }
                if labels[i] != best_c {
                    labels[i] = best_c;
                    changed = true;
                }
                new_inertia += best_d;
            }
            let mut counts = vec![0usize; k];
            let mut sums: DMatrix<f64> = DMatrix::zeros(k, d);
            for i in 0..n {
                counts[labels[i]] += 1;
                for j in 0..d {
                    sums[(labels[i], j)] += points[(i, j)];
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for j in 0..d {
                        centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                    }
                } else {
                    // Re-seed an empty cluster at the farthest point.
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            let da = (points.row(a) - centers.row(labels[a])).norm_squared();
                            let db = (points.row(b) - centers.row(labels[b])).norm_squared();
                            da.total_cmp(&db)
                        })
                        .unwrap_or(0);
                    centers.set_row(c, &points.row(far));
                    changed = true;
                }
            }
            inertia = new_inertia;
            if !changed {
                break;
            }
        }
        // Compact labels so every cluster in [k'] is nonempty.
        let better = best.as_ref().map(|(b, _)| inertia < *b).unwrap_or(true);
        if better {
            best = Some((inertia, labels));
        }
    }
    let (_, labels) = best.expect("at least one restart");
    Ok(compact_labels(labels))
}

fn compact_labels(labels: Vec<usize>) -> Vec<usize> {
    let mut remap = std::collections::BTreeMap::new();
    let mut next = 0usize;
    labels
        .into_iter()
        .map(|l| {
            *remap.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}

fn epsilon_net_clusters(g: &WeightedGraph, eps: usize) -> Result<Clustering> {
    let n = g.n();
    let deg = g.degree_vector();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0usize;
    loop {
        // Highest-degree uncovered vertex becomes the next center.
        let center = (0..n)
            .filter(|&i| labels[i] == usize::MAX)
            .max_by(|&a, &b| deg[a].total_cmp(&deg[b]).then(b.cmp(&a)));
        let Some(center) = center else { break };
        labels[center] = next;
        // BFS out to eps hops, claiming uncovered vertices.
        let mut dist = vec![usize::MAX; n];
        dist[center] = 0;
        let mut queue = VecDeque::from([center]);
        while let Some(v) = queue.pop_front() {
            if dist[v] == eps {
                continue;
            }
            for u in 0..n {
                if g.weights()[(v, u)] > 0.0 && dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    if labels[u] == usize::MAX {
                        labels[u] = next;
                    }
                    queue.push_back(u);
                }
            }
        }
        next += 1;
    }
    Clustering::new(labels, next, "epsilon-net")
}

// Modularity of a labeling: Q = Σ_ij (W_ij - d_i d_j / 2m) δ(c_i,c_j) / 2m.
fn modularity_gain_tables(g: &WeightedGraph) -> (f64, DVector<f64>) {
    let deg = g.degree_vector();
    let two_m = deg.sum();
    (two_m, deg)
}

fn greedy_modularity_clusters(g: &WeightedGraph, seed: u64) -> Result<Clustering> {
    let n = g.n();
    let (two_m, _) = modularity_gain_tables(g);
    if two_m == 0.0 {
        // No edges: every unit is its own community.
        return Clustering::new((0..n).collect(), n, "greedy-modularity");
    }
    // Work on a shrinking aggregate graph; meta[i] lists the original units
    // inside aggregate node i.
    let mut w = g.weights().clone();
    let mut self_w: DVector<f64> = DVector::zeros(w.nrows());
    let mut meta: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    for _pass in 0..32 {
        let m = w.nrows();
        let mut labels: Vec<usize> = (0..m).collect();
        let mut deg: DVector<f64> = DVector::zeros(m);
        for i in 0..m {
            deg[i] = w.row(i).sum() + 2.0 * self_w[i];
        }
        let mut comm_deg = deg.clone();
        let mut order: Vec<usize> = (0..m).collect();
        let mut rng = substream(seed, "modularity-order");
        order.shuffle(&mut rng);

        let mut improved = true;
        let mut any_move = false;
        let mut sweeps = 0;
        while improved && sweeps < 64 {
            improved = false;
            sweeps += 1;
            for &v in &order {
                let current = labels[v];
                // Weight from v to each neighboring community.
                let mut to_comm: std::collections::BTreeMap<usize, f64> = Default::default();
                for u in 0..m {
                    if u != v && w[(v, u)] > 0.0 {
                        *to_comm.entry(labels[u]).or_insert(0.0) += w[(v, u)];
                    }
                }
                comm_deg[current] -= deg[v];
                let base = to_comm.get(&current).copied().unwrap_or(0.0);
                let mut best_comm = current;
                let mut best_gain = base - comm_deg[current] * deg[v] / two_m;
                for (&c, &wc) in &to_comm {
                    if c == current {
                        continue;
                    }
                    let gain = wc - comm_deg[c] * deg[v] / two_m;
                    if gain > best_gain + 1e-12 {
                        best_gain = gain;
                        best_comm = c;
                    }
                }
                comm_deg[best_comm] += deg[v];
                if best_comm != current {
                    labels[v] = best_comm;
                    improved = true;
                    any_move = true;
                }
            }
        }
        let labels = compact_labels(labels);
        let k = labels.iter().max().map(|l| l + 1).unwrap_or(1);
        if !any_move || k == m {
            let mut out = vec![0usize; n];
            for (agg, members) in meta.iter().enumerate() {
                for &unit in members {
                    out[unit] = labels[agg];
                }
            }
            return Clustering::new(compact_labels(out), k, "greedy-modularity");
        }
        // Aggregate.
        let mut new_w: DMatrix<f64> = DMatrix::zeros(k, k);
        let mut new_self: DVector<f64> = DVector::zeros(k);
        for i in 0..m {
            new_self[labels[i]] += self_w[i];
            for j in (i + 1)..m {
                if w[(i, j)] > 0.0 {
                    if labels[i] == labels[j] {
                        new_self[labels[i]] += w[(i, j)];
                    } else {
                        new_w[(labels[i], labels[j])] += w[(i, j)];
                        new_w[(labels[j], labels[i])] += w[(i, j)];
                    }
                }
            }
        }
        let mut new_meta: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (agg, members) in meta.iter().enumerate() {
            new_meta[labels[agg]].extend_from_slice(members);
        }
        w = new_w;
        self_w = new_self;
        meta = new_meta;
    }
    // Aggregation loop exits from within; reaching here means no
    // convergence within the pass cap.
    Err(Error::numerical("modularity aggregation did not converge"))
}

/// Modularity score of a clustering (weighted).
pub fn modularity(g: &WeightedGraph, clustering: &Clustering) -> f64 {
    let deg = g.degree_vector();
    let two_m = deg.sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let n = g.n();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if clustering.labels[i] == clustering.labels[j] {
                q += g.weights()[(i, j)] - deg[i] * deg[j] / two_m;
            }
        }
    }
    q / two_m
}
