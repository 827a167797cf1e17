//! Gaussian-weighted kNN graphs and their combinatorial Laplacians.

mod kdtree;
mod laplacian;
mod sparse;

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kdtree::{Neighbor, NeighborIndex, BRUTE_FORCE_DIM};
pub use laplacian::{estimate_lambda_max, laplacian, top_eigenvalue, Laplacian, LANCZOS_MAX_STEPS, LANCZOS_TOL, SAFETY_FACTOR};
pub use sparse::CsrMatrix;

use crate::error::{MfdError, Result};
use crate::pointcloud::{format_f64, PointCloud};

/// Bandwidth `σ_D` of the Gaussian edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    /// Mean Euclidean length of the retained edges.
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaMode::Auto => f.write_str("auto"),
            SigmaMode::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for SigmaMode {
    type Err = MfdError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(SigmaMode::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(SigmaMode::Fixed(v)),
            _ => Err(MfdError::param("sigma", format!("expected `auto` or a positive number, got `{s}`"))),
        }
    }
}

/// Undirected weighted graph without self-loops; weights lie in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    adjacency: CsrMatrix,
    k: usize,
    sigma_d: f64,
    warnings: Vec<String>,
}

impl WeightedGraph {
    /// Builds a graph from an explicit undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(MfdError::VertexOutOfRange { vertex: i.max(j), n });
            }
            if i == j {
                return Err(MfdError::param("edges", format!("self-loop at vertex {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(MfdError::param("edges", format!("weight {w} on ({i},{j}) must be positive")));
            }
            if rows[i].iter().any(|&(c, _)| c == j) {
                return Err(MfdError::param("edges", format!("duplicate edge ({i},{j})")));
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        let mut g = WeightedGraph {
            adjacency: CsrMatrix::from_rows(rows),
            k: 0,
            sigma_d: f64::NAN,
            warnings: Vec::new(),
        };
        g.check_components();
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.dim()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Neighbour count used at construction (0 for explicit edge lists).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Gaussian bandwidth used at construction; 0 when every edge had zero
    /// length, NaN for explicit edge lists.
    pub fn sigma_d(&self) -> f64 {
        self.sigma_d
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency.get(i, j)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency.row(i)
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).map(|(_, w)| w).sum()
    }

    /// Edges as `(i, j, w)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_vertices())
            .flat_map(|i| {
                self.adjacency
                    .row(i)
                    .filter(move |&(j, _)| j > i)
                    .map(move |(j, w)| (i, j, w))
            })
            .collect()
    }

    /// Construction warnings (disconnected graph, zero-length edges).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Connected component label per vertex, labels in order of first vertex.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n_vertices();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            label[start] = next;
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.adjacency.row(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    fn check_components(&mut self) {
        let c = self.n_components();
        if c > 1 {
            let msg = format!("graph has {c} connected components; denoising acts on each separately");
            log::warn!("{msg}");
            self.warnings.push(msg);
        }
    }

    /// FNV-1a digest of the edge list (indices and weight bits).
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.n_vertices() as u64);
        for (i, j, w) in self.edges() {
            eat(i as u64);
            eat(j as u64);
            eat(w.to_bits());
        }
        h
    }

    /// Writes the edge list as CSV `i,j,weight` with `i < j`.
    pub fn write_edge_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "i,j,weight")?;
        for (i, j, w) in self.edges() {
            writeln!(out, "{i},{j},{}", format_f64(w))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Gaussian kNN graph: `w_ij = exp(−‖x_i − x_j‖² / 2σ_D²)` whenever `j` is
/// among the `k` nearest neighbours of `i` or vice versa.
pub fn build_knn_graph(pc: &PointCloud, k: usize, sigma_mode: SigmaMode) -> Result<WeightedGraph> {
    let n = pc.n_points();
    if n < 2 {
        return Err(MfdError::param("n", "a graph needs at least 2 points"));
    }
    if k == 0 || k > n - 1 {
        return Err(MfdError::param("k", format!("must be in 1..={} for {n} points, got {k}", n - 1)));
    }
    if let SigmaMode::Fixed(s) = sigma_mode {
        if !(s > 0.0 && s.is_finite()) {
            return Err(MfdError::param("sigma", format!("must be positive, got {s}")));
        }
    }
    let index = NeighborIndex::new(pc.coords());
    let knn = index.all_knn(k);

    // union symmetrisation
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, list) in knn.iter().enumerate() {
        for nb in list {
            rows[i].push((nb.index, nb.dist2));
            rows[nb.index].push((i, nb.dist2));
        }
    }
    rows.par_iter_mut().for_each(|r| {
        r.sort_by_key(|&(j, _)| j);
        r.dedup_by_key(|&mut (j, _)| j);
    });

    let mut warnings = Vec::new();
    let sigma_d = match sigma_mode {
        SigmaMode::Fixed(s) => s,
        SigmaMode::Auto => {
            let (sum, count) = rows
                .iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().filter(move |&&(j, _)| j > i))
                .fold((0.0, 0usize), |(s, c), &(_, d2)| (s + d2.sqrt(), c + 1));
            sum / count as f64
        }
    };
    if sigma_d == 0.0 {
        let msg = "all retained edges have zero length (coincident points); using unit weights".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let denom = 2.0 * sigma_d * sigma_d;
    let rows = rows
        .into_par_iter()
        .map(|r| {
            r.into_iter()
                .map(|(j, d2)| (j, if sigma_d == 0.0 { 1.0 } else { (-d2 / denom).exp() }))
                .collect()
        })
        .collect();
    let mut g = WeightedGraph {
        adjacency: CsrMatrix::from_rows(rows),
        k,
        sigma_d,
        warnings,
    };
    g.check_components();
    if g.edges().iter().any(|e| e.2 == 0.0) {
        // exp underflow: the bandwidth is far too small for the point spacing
        return Err(MfdError::param("sigma", "bandwidth too small: some edge weights underflow to 0"));
    }
    Ok(g)
}

fn bfs_levels(g: &WeightedGraph, source: usize, max_depth: usize) -> Vec<usize> {
    let mut depth = vec![usize::MAX; g.n_vertices()];
    depth[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        if depth[u] == max_depth {
            continue;
        }
        for (v, _) in g.neighbors(u) {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    depth
}

/// Vertices at shortest-path hop distance exactly `r` from `n`, ascending.
pub fn neighborhood(g: &WeightedGraph, n: usize, r: usize) -> Result<Vec<usize>> {
    if n >= g.n_vertices() {
        return Err(MfdError::VertexOutOfRange {
            vertex: n,
            n: g.n_vertices(),
        });
    }
    if r == 0 {
        return Err(MfdError::param("r", "hop count must be at least 1"));
    }
    Ok(bfs_levels(g, n, r)
        .into_iter()
        .enumerate()
        .filter(|&(_, d)| d == r)
        .map(|(v, _)| v)
        .collect())
}

/// Largest number of vertices exactly two hops from any vertex.
pub fn two_hop_max_degree(g: &WeightedGraph) -> usize {
    (0..g.n_vertices())
        .into_par_iter()
        .map(|v| {
            let mut seen = vec![v];
            let first: Vec<usize> = g.neighbors(v).map(|(u, _)| u).collect();
            seen.extend(&first);
            let mut second = Vec::new();
            for &u in &first {
                for (w, _) in g.neighbors(u) {
                    second.push(w);
                }
            }
            seen.sort_unstable();
            second.sort_unstable();
            second.dedup();
            second.retain(|w| seen.binary_search(w).is_err());
            second.len()
        })
        .max()
        .unwrap_or(0)
}
