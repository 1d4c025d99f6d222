//! Undirected graph data model: edge-list ingestion, degree statistics,
//! low-degree pruning and the normalized propagation operator.
//!
//! Graphs are immutable after construction and safe to share across workers.

use crate::dense::{DenseMatrix, Support};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Immutable undirected graph with contiguous node ids `0..n` and CSR
/// adjacency. No self-loops, no duplicate edges.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    /// Original external ids, indexed by node; `None` when nodes were created
    /// with numeric ids directly.
    labels: Option<Vec<String>>,
}

impl Graph {
    /// Build from an undirected edge set. Edges are deduplicated; both
    /// endpoints must be `< n` and distinct.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Graph(format!(
                    "edge ({a},{b}) references node >= {n}"
                )));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop at node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self::from_edge_set(n, &set, None))
    }

    fn from_edge_set(n: usize, set: &BTreeSet<(usize, usize)>, labels: Option<Vec<String>>) -> Self {
        let mut degree = vec![0usize; n];
        for &(a, b) in set {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; 2 * set.len()];
        for &(a, b) in set {
            neighbors[fill[a]] = b;
            fill[a] += 1;
            neighbors[fill[b]] = a;
            fill[b] += 1;
        }
        // BTreeSet iteration gives sorted (a, b); rows end up sorted except
        // for the mixed order of a<b and a>b inserts, so sort each row.
        let g = Self {
            n,
            offsets,
            neighbors,
            labels,
        };
        let mut g = g;
        for i in 0..n {
            let r = g.offsets[i]..g.offsets[i + 1];
            g.neighbors[r].sort_unstable();
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Undirected edges as `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .filter(move |&&b| a < b)
                .map(move |&b| (a, b))
        })
    }

    /// External label of a node (falls back to the numeric id).
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    /// Node id for an external label, if the graph retains a label map.
    pub fn node_by_label(&self, label: &str) -> Option<usize> {
        match &self.labels {
            Some(l) => l.iter().position(|x| x == label),
            None => label.parse::<usize>().ok().filter(|&i| i < self.n),
        }
    }

    /// Per-row attention support: neighbors plus (optionally) the node itself,
    /// column-sorted.
    pub fn attention_support(&self, include_self: bool) -> Support {
        let rows: Vec<Vec<usize>> = (0..self.n)
            .map(|i| {
                let mut cols: Vec<usize> = self.neighbors(i).to_vec();
                if include_self {
                    let pos = cols.binary_search(&i).unwrap_err();
                    cols.insert(pos, i);
                }
                cols
            })
            .collect();
        Support::from_rows(&rows)
    }
}

/// Symmetric sparse matrix in CSR form; entry `(i, j)` present iff `(j, i)`
/// is, with equal value.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix<F> {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<F>,
}

impl<F: Scalar> SparseSymMatrix<F> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[F]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => F::zero(),
        }
    }

    /// Entries of the upper triangle plus diagonal, `(i, j, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .filter(move |(&j, _)| j >= i)
                .map(move |(&j, &v)| (i, j, v))
        })
    }

    /// `self * x` for a dense matrix `x`.
    pub fn matmul(&self, x: &DenseMatrix<F>) -> Result<DenseMatrix<F>> {
        if x.rows() != self.n {
            return Err(Error::Dim(format!(
                "sparse matmul: {}x{} * {}x{}",
                self.n,
                self.n,
                x.rows(),
                x.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.n, x.cols());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let orow = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let xrow = x.row(j);
                for (o, &xv) in orow.iter_mut().zip(xrow) {
                    *o = *o + v * xv;
                }
            }
        }
        out.debug_check_finite();
        Ok(out)
    }

    /// `self * v` for a vector given as a slice.
    pub fn matvec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &a)| a * v[j]).sum()
            })
            .collect()
    }

    fn from_rows(n: usize, rows: Vec<Vec<(usize, F)>>) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        Self {
            n,
            offsets,
            cols,
            vals,
        }
    }
}

/// Degree-normalized propagation operator with self-loops:
/// `P[i][j] = a~[i][j] / sqrt(d~[i] * d~[j])` where `a~ = a + I`.
///
/// Entries are in `(0, 1]` and the spectrum lies in `[-1, 1]`.
pub fn propagation_matrix<F: Scalar>(g: &Graph) -> Result<SparseSymMatrix<F>> {
    if g.node_count() == 0 {
        return Err(Error::Graph("propagation_matrix: empty graph".into()));
    }
    let n = g.node_count();
    let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let rows = (0..n)
        .map(|i| {
            let mut cols: Vec<usize> = g.neighbors(i).to_vec();
            let pos = cols.binary_search(&i).unwrap_err();
            cols.insert(pos, i);
            cols.into_iter()
                .map(|j| (j, F::cast(1.0 / (deg[i] * deg[j]).sqrt())))
                .collect()
        })
        .collect();
    Ok(SparseSymMatrix::from_rows(n, rows))
}

/// Quadratic-form operator for the neighborhood proximity loss: for row
/// weights `w[i] = 1/deg(i)`, the loss equals `sum(X .* (M X))` with
/// `M = sum over edges (u,v) of (w[u]+w[v]) (e_u - e_v)(e_u - e_v)^T`.
pub fn proximity_operator<F: Scalar>(g: &Graph) -> SparseSymMatrix<F> {
    let n = g.node_count();
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let d = g.degree(i);
            if d == 0 {
                0.0
            } else {
                1.0 / d as f64
            }
        })
        .collect();
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, F)> = Vec::with_capacity(g.degree(i) + 1);
            let mut diag = 0.0;
            let mut pushed_diag = false;
            for &j in g.neighbors(i) {
                diag += w[i] + w[j];
            }
            for &j in g.neighbors(i) {
                if j > i && !pushed_diag {
                    row.push((i, F::cast(diag)));
                    pushed_diag = true;
                }
                row.push((j, F::cast(-(w[i] + w[j]))));
            }
            if !pushed_diag {
                row.push((i, F::cast(diag)));
            }
            row
        })
        .collect();
    SparseSymMatrix::from_rows(n, rows)
}

/// Summary statistics in the shape of a dataset table row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub avg_degree: f64,
    pub sparsity: f64,
    /// Set when `nodes < 2`, where sparsity is undefined and reported as 0.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub degenerate: bool,
}

pub fn graph_stats(g: &Graph) -> GraphStats {
    let n = g.node_count();
    let e = g.edge_count();
    let avg_degree = if n == 0 { 0.0 } else { 2.0 * e as f64 / n as f64 };
    let (sparsity, degenerate) = if n < 2 {
        (0.0, true)
    } else {
        (2.0 * e as f64 / (n as f64 * (n as f64 - 1.0)), false)
    };
    GraphStats {
        nodes: n,
        edges: e,
        avg_degree,
        sparsity,
        degenerate,
    }
}

/// Outcome of loading an edge list, with counts of dropped input lines.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Parse a whitespace-separated edge list. `#`-prefixed and blank lines are
/// ignored; string ids are relabeled to dense `0..n` in first-occurrence
/// order and retained as labels. Self-loop lines are dropped and counted.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_edge_list(BufReader::new(file), &path.display().to_string())
}

fn parse_edge_list(reader: impl BufRead, path: &str) -> Result<LoadedGraph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut self_loops = 0usize;
    let mut duplicates = 0usize;
    let intern = |tok: &str, labels: &mut Vec<String>, ids: &mut HashMap<String, usize>| {
        *ids.entry(tok.to_string()).or_insert_with(|| {
            labels.push(tok.to_string());
            labels.len() - 1
        })
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let (a, b) = match (toks.next(), toks.next(), toks.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    msg: format!("expected two node tokens, got {trimmed:?}"),
                })
            }
        };
        let ia = intern(a, &mut labels, &mut ids);
        let ib = intern(b, &mut labels, &mut ids);
        if ia == ib {
            self_loops += 1;
            continue;
        }
        if !edges.insert((ia.min(ib), ia.max(ib))) {
            duplicates += 1;
        }
    }
    let n = labels.len();
    Ok(LoadedGraph {
        graph: Graph::from_edge_set(n, &edges, Some(labels)),
        self_loops_dropped: self_loops,
        duplicates_dropped: duplicates,
    })
}

/// Write the graph as an edge list using external labels, one `a b` line per
/// edge, ascending.
pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (a, b) in g.edges() {
        writeln!(f, "{} {}", g.label(a), g.label(b))?;
    }
    f.flush()?;
    Ok(())
}

/// Remove all nodes whose degree in `g` is below `min_degree`, in a single
/// pass over the original degrees, and relabel survivors densely in order.
pub fn prune_low_degree(g: &Graph, min_degree: usize) -> Graph {
    let keep: Vec<usize> = (0..g.node_count())
        .filter(|&i| g.degree(i) >= min_degree)
        .collect();
    let mut remap = vec![usize::MAX; g.node_count()];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let edges: BTreeSet<(usize, usize)> = g
        .edges()
        .filter(|&(a, b)| remap[a] != usize::MAX && remap[b] != usize::MAX)
        .map(|(a, b)| (remap[a], remap[b]))
        .collect();
    let labels = keep.iter().map(|&i| g.label(i)).collect();
    Graph::from_edge_set(keep.len(), &edges, Some(labels))
}
