//! Undirected sparse graphs, community sets, and k-hop contexts.
//!
//! Graphs are immutable after construction: node ids are remapped to
//! contiguous `0..n` at load time (ascending original-id order) and the
//! mapping is retained so outputs can be written in the original id space.

use crate::error::{Error, Result};
use crate::sparse::SparseSym;
use crate::tensor::{real, Real, Tensor};
use rand::Rng;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Immutable undirected graph with per-node features.
///
/// Invariants: neighbor lists are strictly sorted and duplicate-free, with
/// no self-loops; adjacency is symmetric; the feature matrix has one row
/// per node.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    feat_dim: usize,
    features: Vec<f64>,
    original_ids: Vec<u64>,
}

impl Graph {
    /// Build from undirected edges over `num_nodes` contiguous ids.
    /// Self-loops are dropped and duplicate edges collapsed.
    pub fn from_edges(num_nodes: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u as usize >= num_nodes || v as usize >= num_nodes {
                return Err(Error::data(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                continue;
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph {
            adj,
            feat_dim: 0,
            features: Vec::new(),
            original_ids: (0..num_nodes as u64).collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|l| l.len()).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    pub fn feature_row(&self, v: u32) -> &[f64] {
        let d = self.feat_dim;
        &self.features[v as usize * d..(v as usize + 1) * d]
    }

    /// Original id of an internal node.
    pub fn original_id(&self, v: u32) -> u64 {
        self.original_ids[v as usize]
    }

    /// Internal id for an original id, if present.
    pub fn internal_id(&self, original: u64) -> Option<u32> {
        self.original_ids
            .binary_search(&original)
            .ok()
            .map(|i| i as u32)
    }

    /// Replace the feature matrix (row count must equal `num_nodes`).
    pub fn with_features(mut self, feat_dim: usize, features: Vec<f64>) -> Result<Self> {
        if features.len() != self.num_nodes() * feat_dim {
            return Err(Error::data(format!(
                "feature matrix has {} values, expected {} x {}",
                features.len(),
                self.num_nodes(),
                feat_dim
            )));
        }
        self.feat_dim = feat_dim;
        self.features = features;
        Ok(self)
    }

    /// Feature matrix as a tensor in the requested precision.
    pub fn features_tensor<F: Real>(&self) -> Tensor<F> {
        let data = self.features.iter().map(|&x| real(x)).collect();
        Tensor::new(vec![self.num_nodes(), self.feat_dim], data).expect("row count invariant")
    }

    /// Parse a whitespace-delimited edge list (`u v` per line, `#` comments).
    /// Node ids are remapped to `0..n` in ascending original-id order.
    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut raw_edges: Vec<(u64, u64)> = Vec::new();
        let mut ids: Vec<u64> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (a, b) = (it.next(), it.next());
            if it.next().is_some() {
                return Err(Error::data(format!(
                    "{}:{}: expected two ids per line",
                    path.display(),
                    lineno + 1
                )));
            }
            let parse = |tok: Option<&str>| -> Result<u64> {
                let tok = tok.ok_or_else(|| {
                    Error::data(format!(
                        "{}:{}: expected two ids per line",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                tok.parse().map_err(|_| {
                    Error::data(format!(
                        "{}:{}: non-integer token {:?}",
                        path.display(),
                        lineno + 1,
                        tok
                    ))
                })
            };
            let (u, v) = (parse(a)?, parse(b)?);
            ids.push(u);
            ids.push(v);
            raw_edges.push((u, v));
        }
        ids.sort_unstable();
        ids.dedup();
        let index: HashMap<u64, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect();
        let edges: Vec<(u32, u32)> = raw_edges
            .iter()
            .map(|&(u, v)| (index[&u], index[&v]))
            .collect();
        let mut g = Graph::from_edges(ids.len(), &edges)?;
        g.original_ids = ids;
        Ok(g)
    }

    /// Parse a community file: one community per line, whitespace-delimited
    /// original node ids. Ids are remapped through this graph's mapping.
    pub fn load_communities(&self, path: impl AsRef<Path>) -> Result<Vec<Community>> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut out = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut members = Vec::new();
            for tok in line.split_whitespace() {
                let original: u64 = tok.parse().map_err(|_| {
                    Error::data(format!(
                        "{}:{}: non-integer token {:?}",
                        path.display(),
                        lineno + 1,
                        tok
                    ))
                })?;
                let id = self.internal_id(original).ok_or_else(|| {
                    Error::data(format!(
                        "{}:{}: node {} not present in graph",
                        path.display(),
                        lineno + 1,
                        original
                    ))
                })?;
                members.push(id);
            }
            let c = Community::new(members)?;
            if c.len() == 1 {
                log::warn!(
                    "{}:{}: singleton community accepted",
                    path.display(),
                    lineno + 1
                );
            }
            out.push(c);
        }
        if out.is_empty() {
            return Err(Error::data(format!(
                "{}: no communities found",
                path.display()
            )));
        }
        Ok(out)
    }

    /// Parse a dense per-node feature matrix: one whitespace-delimited row
    /// per node, rows in ascending original-id order.
    pub fn load_features(&self, path: impl AsRef<Path>) -> Result<(usize, Vec<f64>)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse().map_err(|_| {
                        Error::data(format!(
                            "{}:{}: non-numeric token {:?}",
                            path.display(),
                            lineno + 1,
                            tok
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        if rows.len() != self.num_nodes() {
            return Err(Error::data(format!(
                "{}: {} feature rows for {} nodes",
                path.display(),
                rows.len(),
                self.num_nodes()
            )));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::data(format!(
                "{}: ragged feature rows",
                path.display()
            )));
        }
        Ok((dim, rows.into_iter().flatten().collect()))
    }

    /// Replace features with 5-dim structural rows
    /// `[deg, max(DN), min(DN), mean(DN), std(DN)]` where `DN` is the
    /// multiset of neighbor degrees and `std` is the population standard
    /// deviation. Isolated nodes get all-zero rows.
    pub fn augment_features(&self) -> Graph {
        let n = self.num_nodes();
        let mut features = Vec::with_capacity(n * 5);
        for v in 0..n as u32 {
            let neigh = self.neighbors(v);
            if neigh.is_empty() {
                features.extend_from_slice(&[0.0; 5]);
                continue;
            }
            let degs: Vec<f64> = neigh.iter().map(|&u| self.degree(u) as f64).collect();
            let count = degs.len() as f64;
            let mut max = f64::NEG_INFINITY;
            let mut min = f64::INFINITY;
            let mut sum = 0.0;
            for &d in &degs {
                max = max.max(d);
                min = min.min(d);
                sum += d;
            }
            let mean = sum / count;
            let var = degs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / count;
            features.extend_from_slice(&[self.degree(v) as f64, max, min, mean, var.sqrt()]);
        }
        let mut g = self.clone();
        g.feat_dim = 5;
        g.features = features;
        g
    }

    /// BFS ball of radius `k` around `v` with all induced edges.
    /// `hop_cap` bounds how many neighbors each node expands (deviation
    /// knob for very dense hubs; `None` for all acceptance runs).
    pub fn ego_net(&self, v: u32, k: usize, hop_cap: Option<usize>) -> Result<Context> {
        if v as usize >= self.num_nodes() {
            return Err(Error::data(format!("node id {v} out of range")));
        }
        if k == 0 {
            return Err(Error::Usage("ego_net requires k >= 1".into()));
        }
        let mut dist: HashMap<u32, usize> = HashMap::new();
        dist.insert(v, 0);
        let mut frontier = vec![v];
        for hop in 0..k {
            let mut next = Vec::new();
            for &u in &frontier {
                let neigh = self.neighbors(u);
                let take = hop_cap.unwrap_or(neigh.len()).min(neigh.len());
                for &w in &neigh[..take] {
                    dist.entry(w).or_insert_with(|| {
                        next.push(w);
                        hop + 1
                    });
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        let mut nodes: Vec<u32> = dist.keys().copied().collect();
        nodes.sort_unstable();
        let in_ball: HashMap<u32, ()> = nodes.iter().map(|&u| (u, ())).collect();
        let mut edges = Vec::new();
        for &u in &nodes {
            for &w in self.neighbors(u) {
                if w > u && in_ball.contains_key(&w) {
                    edges.push((u, w));
                }
            }
        }
        Ok(Context {
            center: v,
            nodes,
            edges,
        })
    }

    /// Symmetric normalized adjacency with self-loops,
    /// `Â = D^{-1/2} (A + I) D^{-1/2}`.
    pub fn normalized_adjacency<F: Real>(&self) -> SparseSym<F> {
        let n = self.num_nodes();
        let deg1: Vec<f64> = (0..n).map(|v| self.adj[v].len() as f64 + 1.0).collect();
        let entry = |u: usize, w: usize| -> F { real(1.0 / (deg1[u] * deg1[w]).sqrt()) };
        let rows = (0..n)
            .map(|u| {
                let mut row: Vec<(u32, F)> = Vec::with_capacity(self.adj[u].len() + 1);
                let mut pushed_diag = false;
                for &w in &self.adj[u] {
                    if !pushed_diag && w as usize > u {
                        row.push((u as u32, entry(u, u)));
                        pushed_diag = true;
                    }
                    row.push((w, entry(u, w as usize)));
                }
                if !pushed_diag {
                    row.push((u as u32, entry(u, u)));
                }
                row
            })
            .collect();
        SparseSym::from_rows(rows)
    }

    /// Summary line used in logs.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{} nodes, {} edges, feat_dim {}",
            self.num_nodes(),
            self.num_edges(),
            self.feat_dim
        );
        s
    }
}

/// Non-empty set of node identifiers, stored sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Community {
    members: Vec<u32>,
}

impl Community {
    pub fn new(mut members: Vec<u32>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::data("empty community"));
        }
        Ok(Community { members })
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    pub fn contains(&self, v: u32) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    /// Size of the intersection with another community (both sorted).
    pub fn intersection_len(&self, other: &Community) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// Induced subgraph of a node's k-hop neighborhood with a center marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub center: u32,
    /// Ball members, sorted ascending (includes the center).
    pub nodes: Vec<u32>,
    /// Induced edges `(u, w)` with `u < w`, sorted lexicographically.
    pub edges: Vec<(u32, u32)>,
}

impl Context {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Position of a node within the sorted node list.
    pub fn local_index(&self, v: u32) -> Option<usize> {
        self.nodes.binary_search(&v).ok()
    }

    /// Normalized adjacency of the induced subgraph over local indices,
    /// with degrees computed inside the context.
    pub fn normalized_adjacency<F: Real>(&self) -> SparseSym<F> {
        let n = self.nodes.len();
        let mut local_adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(u, w) in &self.edges {
            let (lu, lw) = (
                self.local_index(u).expect("edge endpoint in ball"),
                self.local_index(w).expect("edge endpoint in ball"),
            );
            local_adj[lu].push(lw as u32);
            local_adj[lw].push(lu as u32);
        }
        for l in &mut local_adj {
            l.sort_unstable();
        }
        let deg1: Vec<f64> = local_adj.iter().map(|l| l.len() as f64 + 1.0).collect();
        let entry = |u: usize, w: usize| -> F { real(1.0 / (deg1[u] * deg1[w]).sqrt()) };
        let rows = (0..n)
            .map(|u| {
                let mut row: Vec<(u32, F)> = Vec::with_capacity(local_adj[u].len() + 1);
                let mut pushed_diag = false;
                for &w in &local_adj[u] {
                    if !pushed_diag && w as usize > u {
                        row.push((u as u32, entry(u, u)));
                        pushed_diag = true;
                    }
                    row.push((w, entry(u, w as usize)));
                }
                if !pushed_diag {
                    row.push((u as u32, entry(u, u)));
                }
                row
            })
            .collect();
        SparseSym::from_rows(rows)
    }

    /// Feature rows for the context nodes, in local-index order.
    pub fn features_tensor<F: Real>(&self, graph: &Graph) -> Tensor<F> {
        let d = graph.feat_dim();
        let mut data = Vec::with_capacity(self.nodes.len() * d);
        for &v in &self.nodes {
            data.extend(graph.feature_row(v).iter().map(|&x| real::<F>(x)));
        }
        Tensor::new(vec![self.nodes.len(), d], data).expect("feature rows")
    }
}

/// Randomly drop edges, keeping each independently with probability `rho`.
/// The node set and center are unchanged; deterministic given the stream.
pub fn corrupt_context(ctx: &Context, rho: f64, rng: &mut impl Rng) -> Result<Context> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Usage(format!(
            "remaining ratio must be in (0, 1], got {rho}"
        )));
    }
    let edges = ctx
        .edges
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < rho)
        .collect();
    Ok(Context {
        center: ctx.center,
        nodes: ctx.nodes.clone(),
        edges,
    })
}
