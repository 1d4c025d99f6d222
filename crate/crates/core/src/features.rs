//! Initial node features.
//!
//! The default initializer runs uniform random walks and trains a skip-gram
//! model with negative sampling over the walk corpus (DeepWalk-style).
//! Deterministic alternatives: dominant-eigenvector spectral features, seeded
//! Gaussian noise, or an externally supplied feature file.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{propagation_matrix, Graph};
use crate::scalar::Scalar;
use crate::seed;
use rand::Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// Feature initialization method.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMethod {
    /// Uniform random walks + skip-gram with negative sampling.
    WalkSkipgram,
    /// Dominant eigenvectors of the propagation operator.
    Spectral,
    /// Seeded Gaussian noise, std 1/sqrt(dim).
    Random,
    /// Load rows from a feature file.
    File(PathBuf),
}

/// Parameters of the initial feature pass.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureInitSpec {
    pub method: FeatureMethod,
    pub dim: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl FeatureInitSpec {
    pub fn new(method: FeatureMethod, dim: usize, seed: u64) -> Self {
        Self {
            method,
            dim,
            walks_per_node: 10,
            walk_length: 40,
            window: 5,
            negatives_per_positive: 5,
            epochs: 2,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("feature dim must be >= 1".into()));
        }
        if self.method == FeatureMethod::WalkSkipgram
            && (self.walks_per_node == 0
                || self.walk_length == 0
                || self.window == 0
                || self.epochs == 0)
        {
            return Err(Error::Config("walk parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Produce the `N x dim` initial feature matrix for a graph. Pure function of
/// `(g, spec)`.
pub fn init_features<F: Scalar>(g: &Graph, spec: &FeatureInitSpec) -> Result<DenseMatrix<F>> {
    spec.validate()?;
    if g.node_count() == 0 {
        return Err(Error::Graph("init_features: empty graph".into()));
    }
    match &spec.method {
        FeatureMethod::WalkSkipgram => Ok(walk_skipgram(g, spec)),
        FeatureMethod::Spectral => spectral_features(g, spec.dim),
        FeatureMethod::Random => {
            let mut rng = seed::rng(spec.seed, "feat-random", 0);
            let std = 1.0 / (spec.dim as f64).sqrt();
            Ok(DenseMatrix::gaussian(g.node_count(), spec.dim, std, &mut rng))
        }
        FeatureMethod::File(path) => load_feature_file(path, g.node_count(), spec.dim),
    }
}

/// Dominant eigenvectors of the propagation operator (tolerance 1e-8, at
/// most 1000 iterations).
///
/// Uses block power iteration with Rayleigh-Ritz extraction: the iterated
/// block is re-orthonormalized every sweep and rotated onto the eigenvectors
/// of the projected operator, which resolves clustered and exactly degenerate
/// eigenvalues that defeat one-vector-at-a-time deflation. Iteration runs on
/// the shifted operator `P + I` (same eigenvectors, nonnegative spectrum), so
/// columns come out ordered by descending eigenvalue of `P`. Column signs are
/// fixed so the largest-magnitude entry is positive.
pub fn spectral_features<F: Scalar>(g: &Graph, dim: usize) -> Result<DenseMatrix<F>> {
    let n = g.node_count();
    if dim >= n {
        return Err(Error::Config(format!(
            "spectral features need dim < n, got dim {dim} for {n} nodes"
        )));
    }
    let p = propagation_matrix::<f64>(g)?;
    const TOL: f64 = 1e-8;
    const MAX_ITERS: usize = 1000;
    // guard columns: convergence of the wanted Ritz vectors is then governed
    // by the gap to the spectrum beyond the enlarged block, which keeps
    // clustered eigenvalues at the cut from stalling the iteration
    let block = (dim + (dim / 2).max(4)).min(n);

    // fixed internal seed: spectral features are a pure function of (g, dim)
    let mut rng = seed::rng(0x0de5_1a6e, "spectral-init", dim as u64);
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    gram_schmidt(&mut q);

    let apply = |v: &[f64]| -> Vec<f64> {
        let mut w = p.matvec(v);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi += *vi;
        }
        w
    };

    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let mut z: Vec<Vec<f64>> = q.iter().map(|col| apply(col)).collect();
        gram_schmidt(&mut z);
        // projected operator T = Z^T (P+I) Z and its eigenvectors
        let w: Vec<Vec<f64>> = z.iter().map(|col| apply(col)).collect();
        let mut t = vec![0.0; block * block];
        for a in 0..block {
            for b in 0..block {
                t[a * block + b] = dot_f64(&z[a], &w[b]);
            }
        }
        let (theta, rot) = jacobi_sym_eig(&mut t, block);
        // Q = Z * rot, image = W * rot; residual_j = ||(P+I)q_j - theta_j q_j||_inf
        let mut new_q = vec![vec![0.0; n]; block];
        let mut image = vec![vec![0.0; n]; dim];
        for j in 0..block {
            for a in 0..block {
                let r = rot[a * block + j];
                if r == 0.0 {
                    continue;
                }
                for i in 0..n {
                    new_q[j][i] += r * z[a][i];
                    if j < dim {
                        image[j][i] += r * w[a][i];
                    }
                }
            }
        }
        // only the wanted columns must converge; guards may lag
        residual = (0..dim)
            .map(|j| {
                (0..n)
                    .map(|i| (image[j][i] - theta[j] * new_q[j][i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        q = new_q;
        if residual < TOL {
            let mut out = DenseMatrix::zeros(n, dim);
            for (j, col) in q.iter_mut().take(dim).enumerate() {
                fix_sign(col);
                for (i, &val) in col.iter().enumerate() {
                    out.set(i, j, F::cast(val));
                }
            }
            return Ok(out);
        }
    }
    Err(Error::NonConvergence {
        residual,
        iters: MAX_ITERS,
    })
}

fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt over a list of column vectors, in place.
fn gram_schmidt(cols: &mut [Vec<f64>]) {
    for j in 0..cols.len() {
        for k in 0..j {
            let d = dot_f64(&cols[j], &cols[k]);
            let prev = cols[k].clone();
            for (x, p) in cols[j].iter_mut().zip(&prev) {
                *x -= d * p;
            }
        }
        let norm = dot_f64(&cols[j], &cols[j]).sqrt();
        if norm < 1e-12 {
            // degenerate start; re-seed the column deterministically
            let mut rng = seed::rng(0x0de5_1a6e, "spectral-reseed", j as u64);
            for x in cols[j].iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
            let norm = dot_f64(&cols[j], &cols[j]).sqrt();
            for x in cols[j].iter_mut() {
                *x /= norm;
            }
        } else {
            for x in cols[j].iter_mut() {
                *x /= norm;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric `d x d` matrix stored
/// row-major. Returns eigenvalues (descending) and the rotation matrix whose
/// column `j` is the eigenvector for eigenvalue `j`.
fn jacobi_sym_eig(t: &mut [f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = t.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|p| ((p + 1)..d).map(move |q| (p, q)))
            .map(|(p, q)| t[p * d + q] * t[p * d + q])
            .sum();
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let tpq = t[p * d + q];
                if tpq.abs() < 1e-300 {
                    continue;
                }
                let tau = (t[q * d + q] - t[p * d + p]) / (2.0 * tpq);
                let tt = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + tt * tt).sqrt();
                let s = tt * c;
                for k in 0..d {
                    let (tkp, tkq) = (t[k * d + p], t[k * d + q]);
                    t[k * d + p] = c * tkp - s * tkq;
                    t[k * d + q] = s * tkp + c * tkq;
                }
                for k in 0..d {
                    let (tpk, tqk) = (t[p * d + k], t[q * d + k]);
                    t[p * d + k] = c * tpk - s * tqk;
                    t[q * d + k] = s * tpk + c * tqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| t[b * d + b].partial_cmp(&t[a * d + a]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| t[i * d + i]).collect();
    let mut rot = vec![0.0; d * d];
    for (new_j, &old_j) in order.iter().enumerate() {
        for k in 0..d {
            rot[k * d + new_j] = v[k * d + old_j];
        }
    }
    (vals, rot)
}

fn fix_sign(v: &mut [f64]) {
    let (mut best, mut best_abs) = (0usize, 0.0f64);
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Uniform-walk skip-gram with negative sampling.
fn walk_skipgram<F: Scalar>(g: &Graph, spec: &FeatureInitSpec) -> DenseMatrix<F> {
    let n = g.node_count();
    let dim = spec.dim;
    // word2vec-style init: input vectors small uniform, output vectors zero
    let mut rng = seed::rng(spec.seed, "skipgram-init", 0);
    let mut emb: Vec<f64> = (0..n * dim)
        .map(|_| (rng.random_range(0.0..1.0) - 0.5) / dim as f64)
        .collect();
    let mut ctx: Vec<f64> = vec![0.0; n * dim];
    let table = NegTable::from_degrees(g);

    let walks = generate_walks(g, spec);
    let total_centers =
        (spec.epochs * walks.iter().map(Vec::len).sum::<usize>()).max(1);
    let lr_start = 0.025f64;
    let lr_min = 1e-4f64;
    let mut seen = 0usize;
    let mut rng = seed::rng(spec.seed, "skipgram-train", 0);
    for _epoch in 0..spec.epochs {
        for walk in &walks {
            for (c, &center) in walk.iter().enumerate() {
                let lr = lr_min
                    .max(lr_start * (1.0 - seen as f64 / total_centers as f64));
                seen += 1;
                let lo = c.saturating_sub(spec.window);
                let hi = (c + spec.window + 1).min(walk.len());
                for t in lo..hi {
                    if t == c {
                        continue;
                    }
                    let context = walk[t];
                    train_pair(
                        &mut emb,
                        &mut ctx,
                        center,
                        context,
                        dim,
                        lr,
                        spec.negatives_per_positive,
                        &table,
                        &mut rng,
                    );
                }
            }
        }
    }
    let data = emb.into_iter().map(F::cast).collect();
    DenseMatrix::from_vec(n, dim, data)
}

fn generate_walks(g: &Graph, spec: &FeatureInitSpec) -> Vec<Vec<usize>> {
    let mut walks = Vec::with_capacity(g.node_count() * spec.walks_per_node);
    for start in 0..g.node_count() {
        for w in 0..spec.walks_per_node {
            let mut rng = seed::rng(spec.seed, "walk", (start * spec.walks_per_node + w) as u64);
            let mut walk = Vec::with_capacity(spec.walk_length);
            let mut cur = start;
            walk.push(cur);
            for _ in 1..spec.walk_length {
                let nbrs = g.neighbors(cur);
                if nbrs.is_empty() {
                    break;
                }
                cur = nbrs[rng.random_range(0..nbrs.len())];
                walk.push(cur);
            }
            walks.push(walk);
        }
    }
    walks
}

#[allow(clippy::too_many_arguments)]
fn train_pair(
    emb: &mut [f64],
    ctx: &mut [f64],
    center: usize,
    context: usize,
    dim: usize,
    lr: f64,
    negatives: usize,
    table: &NegTable,
    rng: &mut impl Rng,
) {
    let mut acc = vec![0.0; dim];
    for k in 0..=negatives {
        let (target, label) = if k == 0 {
            (context, 1.0)
        } else {
            (table.sample(rng), 0.0)
        };
        if k > 0 && target == context {
            continue;
        }
        let (u, v) = (&emb[center * dim..(center + 1) * dim], &ctx[target * dim..(target + 1) * dim]);
        let z: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let pred = 1.0 / (1.0 + (-z).exp());
        let step = (label - pred) * lr;
        for i in 0..dim {
            acc[i] += step * ctx[target * dim + i];
            ctx[target * dim + i] += step * emb[center * dim + i];
        }
    }
    for i in 0..dim {
        emb[center * dim + i] += acc[i];
    }
}

/// Cumulative unigram^0.75 table over node degrees.
struct NegTable {
    cum: Vec<f64>,
}

impl NegTable {
    fn from_degrees(g: &Graph) -> Self {
        let mut cum = Vec::with_capacity(g.node_count());
        let mut acc = 0.0;
        for i in 0..g.node_count() {
            acc += (g.degree(i) as f64).powf(0.75);
            cum.push(acc);
        }
        Self { cum }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let x = rng.random_range(0.0..self.total());
        match self
            .cum
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) | Err(i) => i.min(self.cum.len() - 1),
        }
    }
}

/// Write a feature matrix: header `N dim`, then one whitespace-separated row
/// per node; `with_ids` prepends the node's external label.
pub fn save_feature_file<F: Scalar>(
    m: &DenseMatrix<F>,
    g: &Graph,
    path: impl AsRef<Path>,
    with_ids: bool,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{} {}", m.rows(), m.cols())?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        if with_ids {
            writeln!(f, "{} {}", g.label(i), row.join(" "))?;
        } else {
            writeln!(f, "{}", row.join(" "))?;
        }
    }
    f.flush()?;
    Ok(())
}

fn load_feature_file<F: Scalar>(
    path: &Path,
    n: usize,
    dim: usize,
) -> Result<DenseMatrix<F>> {
    let f = std::fs::File::open(path)?;
    let mut lines = BufReader::new(f).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty feature file".into()))??;
    let mut toks = header.split_whitespace();
    let rows: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Config("feature file: bad header".into()))?;
    let cols: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Config("feature file: bad header".into()))?;
    if rows != n || cols != dim {
        return Err(Error::Config(format!(
            "feature file is {rows}x{cols}, expected {n}x{dim}"
        )));
    }
    let mut data = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        // optional leading id column
        let vals = if toks.len() == dim + 1 { &toks[1..] } else { &toks[..] };
        if vals.len() != dim {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                msg: format!("expected {dim} values, got {}", vals.len()),
            });
        }
        for tok in vals {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                msg: format!("bad value {tok:?}"),
            })?;
            data.push(F::cast(v));
        }
    }
    if data.len() != n * dim {
        return Err(Error::Config("feature file: wrong row count".into()));
    }
    Ok(DenseMatrix::from_vec(n, dim, data))
}
