//! Sparse similarity graphs and the symmetric normalized Laplacian.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense row-major feature matrix, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows < 2 {
            return Err(Error::invalid(format!(
                "feature matrix needs at least 2 rows, got {rows}"
            )));
        }
        if cols == 0 {
            return Err(Error::invalid("feature matrix has no columns"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(p) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature ({}, {}) is {}",
                p / cols,
                p % cols,
                data[p]
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {r} has {} columns, expected {cols}",
                rows[r].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.cols, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// `exp(-d² / σ²)`
    Gaussian { sigma: f64 },
    /// Zelnik-Manor/Perona local scaling with the scale of each vertex taken
    /// from the distance to its `m`-th nearest neighbor.
    LocalScaling { m: usize },
    /// Cosine similarity, clamped below at zero.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    /// Number of nearest neighbors `N` used to sparsify the graph.
    pub neighbors: usize,
}

impl WeightSpec {
    pub fn gaussian(neighbors: usize, sigma: f64) -> Self {
        WeightSpec {
            kind: WeightKind::Gaussian { sigma },
            neighbors,
        }
    }

    pub fn local_scaling(neighbors: usize, m: usize) -> Self {
        WeightSpec {
            kind: WeightKind::LocalScaling { m },
            neighbors,
        }
    }

    pub fn cosine(neighbors: usize) -> Self {
        WeightSpec {
            kind: WeightKind::Cosine,
            neighbors,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.neighbors == 0 {
            return Err(Error::invalid("number of neighbors must be at least 1"));
        }
        match self.kind {
            WeightKind::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::invalid(format!("gaussian sigma must be > 0, got {sigma}")))
            }
            WeightKind::LocalScaling { m: 0 } => Err(Error::invalid("local scaling index M must be at least 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    /// `1 - cos(x_i, x_j)`
    CosineDistance,
}

pub fn gaussian_weight(d: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    if !(d >= 0.0) {
        return Err(Error::invalid(format!("distance must be >= 0, got {d}")));
    }
    Ok((-(d * d) / (sigma * sigma)).exp())
}

/// `exp(-d² / sqrt(τ_i τ_j))` where each `τ` is a squared local scale.
pub fn local_scaling_weight(d: f64, tau_i: f64, tau_j: f64) -> Result<f64> {
    if !(tau_i > 0.0 && tau_j > 0.0) {
        return Err(Error::invalid(format!(
            "local scales must be positive (got {tau_i}, {tau_j}); duplicate points?"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::invalid(format!("distance must be >= 0, got {d}")));
    }
    Ok((-(d * d) / (tau_i * tau_j).sqrt()).exp())
}

pub fn cosine_weight(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((dot(x, y) / (nx * ny)).clamp(0.0, 1.0))
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Undirected graph with positive weights, each edge stored once with
/// `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeightGraph {
    n: usize,
    edges: Vec<Edge>,
    degrees: Vec<f64>,
    // CSR adjacency (both directions), neighbors in ascending order
    offsets: Vec<usize>,
    adj: Vec<(usize, f64)>,
}

impl SparseWeightGraph {
    /// Builds a graph from an edge list. Edges are canonicalized to `i < j`
    /// and sorted; duplicates, self-loops and non-positive weights are
    /// rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| {
                if e.i <= e.j {
                    e
                } else {
                    Edge {
                        i: e.j,
                        j: e.i,
                        w: e.w,
                    }
                }
            })
            .collect();
        for e in &edges {
            if e.j >= n {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::invalid(format!("self-edge at vertex {}", e.i)));
            }
            if !(e.w > 0.0 && e.w.is_finite()) {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) has invalid weight {}",
                    e.i, e.j, e.w
                )));
            }
        }
        edges.sort_by_key(|e| (e.i, e.j));
        if let Some(p) = edges.windows(2).find(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j)) {
            return Err(Error::invalid(format!(
                "duplicate edge ({}, {})",
                p[0].i, p[0].j
            )));
        }

        let mut counts = vec![0usize; n];
        let mut degrees = vec![0.0; n];
        for e in &edges {
            counts[e.i] += 1;
            counts[e.j] += 1;
            degrees[e.i] += e.w;
            degrees[e.j] += e.w;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + counts[v];
        }
        let mut fill = offsets[..n].to_vec();
        let mut adj = vec![(0, 0.0); offsets[n]];
        // Sorted edge order yields ascending neighbor order for every vertex.
        for e in &edges {
            adj[fill[e.i]] = (e.j, e.w);
            fill[e.i] += 1;
            adj[fill[e.j]] = (e.i, e.w);
            fill[e.j] += 1;
        }
        for v in 0..n {
            adj[offsets[v]..offsets[v + 1]].sort_by_key(|&(u, _)| u);
        }

        Ok(SparseWeightGraph {
            n,
            edges,
            degrees,
            offsets,
            adj,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Neighbors of `v` with edge weights, ascending by neighbor index.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.neighbors(i)
            .binary_search_by_key(&j, |&(u, _)| u)
            .map_or(0.0, |p| self.neighbors(i)[p].1)
    }

    /// SHA-256 of the vertex count and the exact edge list.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"graphseg-edges v1");
        h.update((self.n as u64).to_le_bytes());
        for e in &self.edges {
            h.update((e.i as u64).to_le_bytes());
            h.update((e.j as u64).to_le_bytes());
            h.update(e.w.to_bits().to_le_bytes());
        }
        hex(&h.finalize())
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "graphseg-edges v1 {}", self.n)?;
            for e in &self.edges {
                writeln!(out, "{} {} {:.17e}", e.i, e.j, e.w)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        if (parts.next(), parts.next()) != (Some("graphseg-edges"), Some("v1")) {
            return Err(parse_err(1, format!("bad header {header:?}")));
        }
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(1, "missing vertex count".into()))?;

        let mut edges = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = k + 2;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(lineno, format!("expected `i j w`, got {line:?}")));
            }
            let i: usize = f[0].parse().map_err(|_| parse_err(lineno, "bad i".into()))?;
            let j: usize = f[1].parse().map_err(|_| parse_err(lineno, "bad j".into()))?;
            let w: f64 = f[2].parse().map_err(|_| parse_err(lineno, "bad w".into()))?;
            if i >= j {
                return Err(parse_err(lineno, format!("edge must have i < j, got {i} {j}")));
            }
            edges.push(Edge { i, j, w });
        }
        SparseWeightGraph::from_edges(n, edges).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Distance under `metric`. Cosine distance of a zero vector is an error.
pub fn distance(metric: Metric, x: &[f64], y: &[f64]) -> Result<f64> {
    match metric {
        Metric::Euclidean => Ok(euclidean(x, y)),
        Metric::CosineDistance => {
            let (nx, ny) = (norm(x), norm(y));
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::invalid("cosine distance of a zero vector"));
            }
            Ok((1.0 - dot(x, y) / (nx * ny)).max(0.0))
        }
    }
}

/// The `k` nearest other rows of `i`, ascending by (distance, index).
fn nearest(features: &FeatureMatrix, metric: Metric, norms: &[f64], i: usize, k: usize) -> Vec<(f64, usize)> {
    let xi = features.row(i);
    let mut cand: Vec<(f64, usize)> = (0..features.nrows())
        .filter(|&j| j != i)
        .map(|j| {
            let d = match metric {
                Metric::Euclidean => euclidean(xi, features.row(j)),
                Metric::CosineDistance => {
                    (1.0 - dot(xi, features.row(j)) / (norms[i] * norms[j])).max(0.0)
                }
            };
            (d, j)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand
}

/// Union-symmetrized N-nearest-neighbor graph: `i` and `j` are connected if
/// either is among the other's `spec.neighbors` nearest points.
pub fn knn_graph(features: &FeatureMatrix, spec: &WeightSpec, metric: Metric) -> Result<SparseWeightGraph> {
    spec.validate()?;
    let n = features.nrows();
    if spec.neighbors >= n {
        return Err(Error::invalid(format!(
            "N={} nearest neighbors requires more than {} points",
            spec.neighbors, n
        )));
    }
    // the scale neighbour may lie beyond the N graph neighbours
    let search = match spec.kind {
        WeightKind::LocalScaling { m } if m >= n => {
            return Err(Error::invalid(format!("local scaling index M={m} requires more than {n} points")))
        }
        WeightKind::LocalScaling { m } => spec.neighbors.max(m),
        _ => spec.neighbors,
    };
    if spec.kind == WeightKind::Cosine && metric != Metric::CosineDistance {
        return Err(Error::invalid("cosine weights require the cosine distance metric"));
    }
    let norms: Vec<f64> = (0..n).map(|i| norm(features.row(i))).collect();
    if metric == Metric::CosineDistance {
        if let Some(i) = norms.iter().position(|&x| x == 0.0) {
            return Err(Error::invalid(format!("row {i} is a zero vector under cosine distance")));
        }
    }

    let lists: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(features, metric, &norms, i, search))
        .collect();

    let tau: Vec<f64> = match spec.kind {
        WeightKind::LocalScaling { m } => {
            let tau: Vec<f64> = lists.iter().map(|l| l[m - 1].0 * l[m - 1].0).collect();
            if let Some(v) = tau.iter().position(|&t| t <= 0.0) {
                return Err(Error::ZeroLocalScale { vertex: v, m });
            }
            tau
        }
        _ => Vec::new(),
    };

    let mut pairs: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l[..spec.neighbors].iter().map(move |&(_, j)| (i.min(j), i.max(j))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    let weights: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (xi, xj) = (features.row(i), features.row(j));
            match spec.kind {
                WeightKind::Gaussian { sigma } => gaussian_weight(distance(metric, xi, xj)?, sigma),
                WeightKind::LocalScaling { .. } => {
                    local_scaling_weight(distance(metric, xi, xj)?, tau[i], tau[j])
                }
                WeightKind::Cosine => cosine_weight(xi, xj),
            }
        })
        .collect();

    let mut edges = Vec::with_capacity(pairs.len());
    for (&(i, j), w) in pairs.iter().zip(weights) {
        let w = w?;
        // underflowed gaussian tails and clamped cosines carry no weight
        if w > 0.0 {
            edges.push(Edge { i, j, w });
        }
    }
    SparseWeightGraph::from_edges(n, edges)
}

/// `L_s = I - D^{-1/2} W D^{-1/2}` in CSR form.
#[derive(Debug, Clone)]
pub struct NormalizedLaplacian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    sqrt_degrees: Vec<f64>,
    graph_hash: String,
}

pub fn normalized_laplacian(graph: &SparseWeightGraph) -> Result<NormalizedLaplacian> {
    let n = graph.n_vertices();
    if let Some(v) = graph.degrees().iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedVertex(v));
    }
    let sqrt_degrees: Vec<f64> = graph.degrees().iter().map(|d| d.sqrt()).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n + 2 * graph.edges().len());
    let mut vals = Vec::with_capacity(cols.capacity());
    row_ptr.push(0);
    for i in 0..n {
        let mut diag_done = false;
        for &(j, w) in graph.neighbors(i) {
            if !diag_done && j > i {
                cols.push(i);
                vals.push(1.0);
                diag_done = true;
            }
            cols.push(j);
            vals.push(-w / (sqrt_degrees[i] * sqrt_degrees[j]));
        }
        if !diag_done {
            cols.push(i);
            vals.push(1.0);
        }
        row_ptr.push(cols.len());
    }
    Ok(NormalizedLaplacian {
        n,
        row_ptr,
        cols,
        vals,
        sqrt_degrees,
        graph_hash: graph.content_hash(),
    })
}

const PAR_MATVEC_MIN: usize = 8192;

impl NormalizedLaplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `sqrt(d_i)`, the kernel vector of `L_s`.
    pub fn sqrt_degrees(&self) -> &[f64] {
        &self.sqrt_degrees
    }

    /// Content hash of the graph this operator was built from.
    pub fn graph_hash(&self) -> &str {
        &self.graph_hash
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.vals[a..b])
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// `y = L_s x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        if self.n >= PAR_MATVEC_MIN {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    /// `L_s U` for a dense `N × K` matrix.
    pub fn apply_matrix(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(u.nrows(), u.ncols());
        let mut y = vec![0.0; self.n];
        for k in 0..u.ncols() {
            self.apply(u.column(k).as_slice(), &mut y);
            out.column_mut(k).copy_from_slice(&y);
        }
        out
    }

    /// `⟨u, L_s u⟩`
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.apply(u, &mut y);
        dot(u, &y)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[p])] = self.vals[p];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(points.len(), 1, points.to_vec()).unwrap()
    }

    #[test]
    fn gaussian_weight_values() {
        assert_eq!(gaussian_weight(0.0, 2.0).unwrap(), 1.0);
        assert!((gaussian_weight(1.5, 1.5).unwrap() - 0.36787944117144233).abs() < 1e-15);
        assert!(gaussian_weight(1.0, 1.0).unwrap() > gaussian_weight(1.1, 1.0).unwrap());
        assert!(gaussian_weight(1.0, 0.0).is_err());
    }

    #[test]
    fn local_scaling_weight_values() {
        assert_eq!(local_scaling_weight(0.0, 1.0, 4.0).unwrap(), 1.0);
        let r: f64 = 0.7;
        let w = local_scaling_weight(r, r * r, r * r).unwrap();
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(
            local_scaling_weight(0.3, 0.5, 2.0).unwrap(),
            local_scaling_weight(0.3, 2.0, 0.5).unwrap()
        );
        assert!(local_scaling_weight(0.3, 0.0, 2.0).is_err());
    }

    #[test]
    fn cosine_weight_values() {
        assert!((cosine_weight(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_weight(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_weight(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.7071067811865475).abs() < 1e-15);
        assert_eq!(cosine_weight(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.0);
        assert!(cosine_weight(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn knn_collinear_points() {
        let g = knn_graph(&line(&[0.0, 1.0, 3.0]), &WeightSpec::gaussian(1, 1.0), Metric::Euclidean).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        assert!((g.edges()[1].w - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn knn_full_neighborhood_is_complete() {
        let f = line(&[0.0, 0.5, 1.7, 2.0, 4.0]);
        let g = knn_graph(&f, &WeightSpec::gaussian(4, 2.0), Metric::Euclidean).unwrap();
        assert_eq!(g.edges().len(), 10);
    }

    #[test]
    fn knn_rejects_too_many_neighbors() {
        let f = line(&[0.0, 1.0, 2.0]);
        assert!(knn_graph(&f, &WeightSpec::gaussian(3, 1.0), Metric::Euclidean).is_err());
    }

    #[test]
    fn knn_duplicate_points_zero_scale() {
        let f = line(&[0.0, 0.0, 5.0, 6.0]);
        match knn_graph(&f, &WeightSpec::local_scaling(2, 1), Metric::Euclidean) {
            Err(Error::ZeroLocalScale { vertex, m }) => {
                assert_eq!((vertex, m), (0, 1));
            }
            other => panic!("expected ZeroLocalScale, got {other:?}"),
        }
    }

    #[test]
    fn cosine_weights_need_cosine_metric() {
        let f = line(&[1.0, 2.0, 3.0]);
        assert!(knn_graph(&f, &WeightSpec::cosine(1), Metric::Euclidean).is_err());
    }

    #[test]
    fn ties_break_toward_lower_index() {
        // point 1 is equidistant from 0 and 2
        let g = knn_graph(&line(&[0.0, 1.0, 2.0, 10.0]), &WeightSpec::gaussian(1, 1.0), Metric::Euclidean).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn two_vertex_laplacian() {
        for w in [0.1, 1.0, 7.5] {
            let g = SparseWeightGraph::from_edges(2, [Edge { i: 0, j: 1, w }]).unwrap();
            let l = normalized_laplacian(&g).unwrap().to_dense();
            assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        }
    }

    #[test]
    fn isolated_vertex_is_reported() {
        let g = SparseWeightGraph::from_edges(3, [Edge { i: 0, j: 2, w: 1.0 }]).unwrap();
        assert!(matches!(normalized_laplacian(&g), Err(Error::IsolatedVertex(1))));
    }

    #[test]
    fn sqrt_degree_is_in_kernel() {
        let f = FeatureMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.2],
            vec![0.3, 1.1],
            vec![2.0, 2.0],
            vec![1.5, 0.7],
        ])
        .unwrap();
        let g = knn_graph(&f, &WeightSpec::local_scaling(2, 2), Metric::Euclidean).unwrap();
        let l = normalized_laplacian(&g).unwrap();
        let mut y = vec![0.0; 5];
        l.apply(l.sqrt_degrees(), &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn from_edges_validation() {
        assert!(SparseWeightGraph::from_edges(2, [Edge { i: 1, j: 1, w: 1.0 }]).is_err());
        assert!(SparseWeightGraph::from_edges(2, [Edge { i: 0, j: 1, w: 0.0 }]).is_err());
        assert!(SparseWeightGraph::from_edges(2, [Edge { i: 0, j: 2, w: 1.0 }]).is_err());
        let dup = [Edge { i: 0, j: 1, w: 1.0 }, Edge { i: 1, j: 0, w: 2.0 }];
        assert!(SparseWeightGraph::from_edges(2, dup).is_err());
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = SparseWeightGraph::from_edges(
            4,
            [
                Edge { i: 0, j: 1, w: 0.1 },
                Edge { i: 2, j: 1, w: 1.0 / 3.0 },
                Edge { i: 0, j: 3, w: 2.5e-7 },
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.edges");
        g.write_edge_list(&p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("graphseg-edges v1 4\n0 1 "));
        let back = SparseWeightGraph::read_edge_list(&p).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.content_hash(), g.content_hash());
    }

    #[test]
    fn edge_list_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.edges");
        fs::write(&p, "graphseg-edges v1 3\n0 1 0.5\n2 1 0.5\n").unwrap();
        assert!(matches!(
            SparseWeightGraph::read_edge_list(&p),
            Err(Error::Parse { line: 3, .. })
        ));
        fs::write(&p, "graphseg-edges v2 3\n").unwrap();
        assert!(SparseWeightGraph::read_edge_list(&p).is_err());
    }
}
