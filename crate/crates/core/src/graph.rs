//! Weighted undirected graphs: construction, generators, edge-list IO.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::substream;

/// Symmetric weighted adjacency over `n` units with zero diagonal and
/// weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    w: DMatrix<f64>,
}

impl WeightedGraph {
    /// Build from an explicit weight matrix, validating the invariants.
    pub fn from_weight_matrix(w: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::dims(format!("weight matrix is {}x{}", n, w.ncols())));
        }
        if n < 2 {
            return Err(Error::invalid("need at least 2 units"));
        }
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let wij = w[(i, j)];
                if !(0.0..=1.0).contains(&wij) || !wij.is_finite() {
                    return Err(Error::invalid(format!("weight ({i},{j}) = {wij} outside [0,1]")));
                }
                if (wij - w[(j, i)]).abs() != 0.0 {
                    return Err(Error::invalid(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(WeightedGraph { n, w })
    }

    /// Build from an edge list `(i, j, w)`. Duplicate pairs (in either
    /// orientation) are rejected rather than summed.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("need at least 2 units"));
        }
        let mut w = DMatrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for &(i, j, wij) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at {i}")));
            }
            if !(0.0..=1.0).contains(&wij) || !wij.is_finite() {
                return Err(Error::invalid(format!("weight ({i},{j}) = {wij} outside [0,1]")));
            }
            let (a, b) = (i.min(j), i.max(j));
            if seen[a * n + b] {
                return Err(Error::invalid(format!("duplicate edge ({i},{j})")));
            }
            seen[a * n + b] = true;
            w[(a, b)] = wij;
            w[(b, a)] = wij;
        }
        Ok(WeightedGraph { n, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Edges with positive weight, each reported once with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.w[(i, j)] > 0.0 {
                    out.push((i, j, self.w[(i, j)]));
                }
            }
        }
        out
    }

    pub fn degree_vector(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.w.row(i).sum())
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().iter().map(|e| e.2).sum()
    }

    /// Graph Laplacian `L = D - W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let d = self.degree_vector();
        let mut l = -self.w.clone();
        for i in 0..self.n {
            l[(i, i)] = d[i];
        }
        l
    }

    /// Connected components under positive-weight connectivity, each sorted,
    /// ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.n];
        let mut components = Vec::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            comp[start] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for u in 0..self.n {
                    if self.w[(v, u)] > 0.0 && comp[u] == usize::MAX {
                        comp[u] = id;
                        stack.push(u);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Parse an edge-list CSV: rows `i,j,w` (0-indexed, `w` optional,
    /// defaulting to 1.0). Empty lines are skipped.
    pub fn load_edge_list(path: impl AsRef<Path>, n: usize) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::parse(format!("line {}: expected 'i,j[,w]', got '{line}'", lineno + 1)));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(format!("line {}: bad index '{}'", lineno + 1, fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(format!("line {}: bad index '{}'", lineno + 1, fields[1])))?;
            let w: f64 = if fields.len() == 3 {
                fields[2]
                    .parse()
                    .map_err(|_| Error::parse(format!("line {}: bad weight '{}'", lineno + 1, fields[2])))?
            } else {
                1.0
            };
            edges.push((i, j, w));
        }
        Self::from_edges(n, &edges)
    }

    /// Write the edge list in the same format; round-trips losslessly with
    /// [`WeightedGraph::load_edge_list`].
    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path.as_ref())?;
        for (i, j, w) in self.edges() {
            writeln!(file, "{i},{j},{w}")?;
        }
        Ok(())
    }
}

impl fmt::Display for WeightedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightedGraph(n={}, edges={})", self.n, self.edges().len())
    }
}

/// Random-graph families used in the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphModel {
    /// Erdős–Rényi with edge probability `p`.
    Er { p: f64 },
    /// Stochastic block model: memberships drawn from `membership_probs`,
    /// then Bernoulli edges at `p_in` within blocks and `p_out` across.
    Sbm {
        k: usize,
        membership_probs: Vec<f64>,
        p_in: f64,
        p_out: f64,
    },
    /// Preferential attachment over an Erdős–Rényi core of `n/10` nodes
    /// wired at probability `m0_init_er_p`.
    Ba { m0_init_er_p: f64 },
}

impl GraphModel {
    fn validate(&self) -> Result<()> {
        let prob = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} = {p} outside [0,1]")))
            }
        };
        match self {
            GraphModel::Er { p } => prob(*p, "p"),
            GraphModel::Sbm { k, membership_probs, p_in, p_out } => {
                if *k == 0 {
                    return Err(Error::invalid("k = 0"));
                }
                if membership_probs.len() != *k {
                    return Err(Error::invalid("membership_probs length != k"));
                }
                for &q in membership_probs {
                    prob(q, "membership prob")?;
                }
                let total: f64 = membership_probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("membership_probs sum to {total}, not 1")));
                }
                prob(*p_in, "p_in")?;
                prob(*p_out, "p_out")
            }
            GraphModel::Ba { m0_init_er_p } => prob(*m0_init_er_p, "m0_init_er_p"),
        }
    }
}

/// Generate a graph from `model`; bit-identical across runs for the same
/// `(model, n, seed)`.
pub fn generate_graph(model: &GraphModel, n: usize, seed: u64) -> Result<WeightedGraph> {
    model.validate()?;
    if n < 2 {
        return Err(Error::invalid("need at least 2 units"));
    }
    match model {
        GraphModel::Er { p } => {
            let mut rng = substream(seed, "gen-er");
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < *p {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            WeightedGraph::from_edges(n, &edges)
        }
        GraphModel::Sbm { membership_probs, p_in, p_out, .. } => {
            Ok(generate_sbm(n, membership_probs, *p_in, *p_out, seed)?.0)
        }
        GraphModel::Ba { m0_init_er_p } => generate_ba(n, *m0_init_er_p, seed),
    }
}

/// Stochastic block model, also returning the planted block labels.
pub fn generate_sbm(
    n: usize,
    membership_probs: &[f64],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(WeightedGraph, Vec<usize>)> {
    let mut rng = substream(seed, "gen-sbm");
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut lab = membership_probs.len() - 1;
        for (idx, &q) in membership_probs.iter().enumerate() {
            acc += q;
            if u < acc {
                lab = idx;
                break;
            }
        }
        labels.push(lab);
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok((WeightedGraph::from_edges(n, &edges)?, labels))
}

// Preferential attachment: each node beyond the ER core attaches one edge,
// choosing the endpoint with probability proportional to current degree
// (uniformly when the core is still edgeless).
fn generate_ba(n: usize, core_p: f64, seed: u64) -> Result<WeightedGraph> {
    let mut rng = substream(seed, "gen-ba");
    let core = (n / 10).max(2).min(n);
    let mut adj = vec![false; n * n];
    let mut deg = vec![0usize; n];
    let mut total_deg = 0usize;
    let add = |adj: &mut Vec<bool>, deg: &mut Vec<usize>, total: &mut usize, i: usize, j: usize| {
        if !adj[i * n + j] {
            adj[i * n + j] = true;
            adj[j * n + i] = true;
            deg[i] += 1;
            deg[j] += 1;
            *total += 2;
        }
    };
    for i in 0..core {
        for j in (i + 1)..core {
            if rng.random::<f64>() < core_p {
                add(&mut adj, &mut deg, &mut total_deg, i, j);
            }
        }
    }
    for v in core..n {
        let target = if total_deg == 0 {
            rng.random_range(0..v)
        } else {
            let mut t = rng.random_range(0..total_deg);
            let mut chosen = 0;
            for u in 0..v {
                if t < deg[u] {
                    chosen = u;
                    break;
                }
                t -= deg[u];
            }
            chosen
        };
        add(&mut adj, &mut deg, &mut total_deg, v, target);
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if adj[i * n + j] {
                edges.push((i, j, 1.0));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges)
}

/// Path graph with unit weights, handy in tests.
pub fn path_graph(n: usize) -> WeightedGraph {
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    WeightedGraph::from_edges(n, &edges).expect("valid path")
}

/// Complete graph with unit weights.
pub fn complete_graph(n: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j, 1.0));
        }
    }
    WeightedGraph::from_edges(n, &edges).expect("valid complete graph")
}
