//! Decoder and training objectives: edge reconstruction with negative
//! sampling, neighborhood proximity, and the cross-network mapping loss.

use crate::dense::{sigmoid_scalar, DenseMatrix};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::seed;
use crate::tape::{Binding, NodeId, Tape};
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeSet;
use std::sync::Arc;

/// Balanced reconstruction mask: all positive edges plus an equal number of
/// sampled non-edges (or all available non-edges, flagged, when the graph is
/// too dense). Pairs are stored with `i < j`.
#[derive(Clone, Debug)]
pub struct NegSampleMask {
    positives: Vec<(usize, usize)>,
    negatives: Vec<(usize, usize)>,
    pub imbalanced: bool,
    pub seed: u64,
}

impl NegSampleMask {
    pub fn positives(&self) -> &[(usize, usize)] {
        &self.positives
    }

    pub fn negatives(&self) -> &[(usize, usize)] {
        &self.negatives
    }

    /// All masked pairs, positives first.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.positives
            .iter()
            .chain(&self.negatives)
            .copied()
            .collect()
    }

    /// Reconstruction targets aligned with [`Self::pairs`]: 1 for edges,
    /// 0 for sampled non-edges.
    pub fn targets<F: Scalar>(&self) -> Vec<F> {
        let mut t = vec![F::one(); self.positives.len()];
        t.extend(vec![F::zero(); self.negatives.len()]);
        t
    }
}

/// Sample the balanced mask for one epoch. Non-edges are drawn without
/// replacement with probability proportional to `(deg(i) * deg(j))^0.75`
/// (independent degree-unigram draws for each endpoint), rejecting edges,
/// self pairs and duplicates. Deterministic per seed.
pub fn negative_sample(g: &Graph, sample_seed: u64) -> Result<NegSampleMask> {
    let e = g.edge_count();
    if e == 0 {
        return Err(Error::Graph("negative_sample: graph has no edges".into()));
    }
    let n = g.node_count();
    let positives: Vec<(usize, usize)> = g.edges().collect();
    let total_pairs = n * (n - 1) / 2;
    let available = total_pairs - e;

    if available <= e {
        // dense graph: every non-edge goes into the mask
        let mut negatives = Vec::with_capacity(available);
        for i in 0..n {
            for j in (i + 1)..n {
                if !g.has_edge(i, j) {
                    negatives.push((i, j));
                }
            }
        }
        let imbalanced = negatives.len() < e;
        return Ok(NegSampleMask {
            positives,
            negatives,
            imbalanced,
            seed: sample_seed,
        });
    }

    let mut rng = seed::rng(sample_seed, "neg-sample", 0);
    let cum: Vec<f64> = {
        let mut acc = 0.0;
        (0..n)
            .map(|i| {
                acc += (g.degree(i) as f64).powf(0.75);
                acc
            })
            .collect()
    };
    let total = *cum.last().unwrap();
    let mut draw = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let x = rng.random_range(0.0..total);
        match cum.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) | Err(i) => i.min(n - 1),
        }
    };
    let mut chosen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut attempts = 0usize;
    let max_attempts = 200 * e + 1000;
    while chosen.len() < e && attempts < max_attempts {
        attempts += 1;
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        if a == b {
            continue;
        }
        let p = (a.min(b), a.max(b));
        if g.has_edge(p.0, p.1) {
            continue;
        }
        chosen.insert(p);
    }
    if chosen.len() < e {
        // pathological density: fill deterministically from the remaining
        // non-edges
        'outer: for i in 0..n {
            for j in (i + 1)..n {
                if !g.has_edge(i, j) && chosen.insert((i, j)) && chosen.len() == e {
                    break 'outer;
                }
            }
        }
    }
    Ok(NegSampleMask {
        positives,
        negatives: chosen.into_iter().collect(),
        imbalanced: false,
        seed: sample_seed,
    })
}

/// Reconstructed link probabilities `sigmoid(x_i . x_j)` for the listed
/// pairs, clamped into the open interval (0, 1).
pub fn decode_edges<F: Scalar>(
    x: &DenseMatrix<F>,
    pairs: &[(usize, usize)],
) -> Result<Vec<F>> {
    let lo = F::min_positive_value();
    let hi = F::one() - F::epsilon() / F::cast(2.0);
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= x.rows() || j >= x.rows() {
                return Err(Error::Dim(format!(
                    "decode_edges: pair ({i},{j}) out of range for {} nodes",
                    x.rows()
                )));
            }
            let dot: F = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(&a, &b)| a * b)
                .sum();
            Ok(sigmoid_scalar(dot).max(lo).min(hi))
        })
        .collect()
}

/// Sum of squared errors between targets and predictions.
pub fn reconstruction_error<F: Scalar>(targets: &[F], preds: &[F]) -> F {
    targets
        .iter()
        .zip(preds)
        .map(|(&t, &p)| (t - p) * (t - p))
        .sum()
}

/// Reconstruction loss over the masked pairs only: `sum (a_ij - yhat_ij)^2`.
pub fn global_loss<F: Scalar>(g: &Graph, x: &DenseMatrix<F>, mask: &NegSampleMask) -> Result<F> {
    let pairs = mask.pairs();
    let preds = decode_edges(x, &pairs)?;
    let targets: Vec<F> = pairs
        .iter()
        .map(|&(i, j)| if g.has_edge(i, j) { F::one() } else { F::zero() })
        .collect();
    Ok(reconstruction_error(&targets, &preds))
}

/// Neighborhood proximity: `sum_i (1/|N_i|) sum_{j in N_i} ||x_i - x_j||^2`.
/// Nodes without neighbors contribute nothing.
pub fn local_loss<F: Scalar>(g: &Graph, x: &DenseMatrix<F>) -> F {
    let mut acc = F::zero();
    for i in 0..g.node_count() {
        let nbrs = g.neighbors(i);
        if nbrs.is_empty() {
            continue;
        }
        let w = F::one() / F::cast(nbrs.len() as f64);
        for &j in nbrs {
            let d: F = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            acc = acc + w * d;
        }
    }
    acc
}

/// Cross-network mapping MLP: two relu hidden layers and a linear output,
/// all of width `dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapperConfig {
    pub dim: usize,
}

impl MapperConfig {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    /// Register mapper blocks under `prefix.` (Xavier weights, zero biases).
    pub fn init_params<F: Scalar, R: Rng>(
        &self,
        params: &mut ParamSet<F>,
        prefix: &str,
        rng: &mut R,
    ) {
        let d = self.dim;
        for layer in 1..=3 {
            params.insert(
                format!("{prefix}.w{layer}"),
                DenseMatrix::glorot(d, d, rng),
            );
            params.insert(format!("{prefix}.b{layer}"), DenseMatrix::zeros(1, d));
        }
    }

    /// Forward on a tape; `x` holds one input per row.
    pub fn forward_on_tape<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        binding: &Binding,
        prefix: &str,
        x: NodeId,
    ) -> NodeId {
        let mut h = x;
        for layer in 1..=3 {
            let w = binding.id(&format!("{prefix}.w{layer}"));
            let b = binding.id(&format!("{prefix}.b{layer}"));
            let lin = tape.matmul(h, w);
            h = tape.add_row(lin, b);
            if layer < 3 {
                h = tape.relu(h);
            }
        }
        h
    }
}

/// Map embedding rows through the MLP.
pub fn mapper_forward<F: Scalar>(
    x: &DenseMatrix<F>,
    params: &ParamSet<F>,
    prefix: &str,
    cfg: &MapperConfig,
) -> Result<DenseMatrix<F>> {
    if x.cols() != cfg.dim {
        return Err(Error::Dim(format!(
            "mapper_forward: input is {}x{}, expected width {}",
            x.rows(),
            x.cols(),
            cfg.dim
        )));
    }
    let mut tape = Tape::new();
    let binding = Binding::bind(&mut tape, params);
    let xn = tape.constant(x.clone());
    let out = cfg.forward_on_tape(&mut tape, &binding, prefix, xn);
    Ok(tape.value(out).clone())
}

/// Sum of squared distances between mapped source-network embeddings and
/// their anchored target-network embeddings.
pub fn match_loss<F: Scalar>(
    anchors: &[(usize, usize)],
    x1: &DenseMatrix<F>,
    x2: &DenseMatrix<F>,
    params: &ParamSet<F>,
    prefix: &str,
    cfg: &MapperConfig,
) -> Result<F> {
    for &(i, k) in anchors {
        if i >= x1.rows() || k >= x2.rows() {
            return Err(Error::Dim(format!("match_loss: anchor ({i},{k}) out of range")));
        }
    }
    let mut src = DenseMatrix::zeros(anchors.len(), x1.cols());
    let mut dst = DenseMatrix::zeros(anchors.len(), x2.cols());
    for (r, &(i, k)) in anchors.iter().enumerate() {
        src.row_mut(r).copy_from_slice(x1.row(i));
        dst.row_mut(r).copy_from_slice(x2.row(k));
    }
    let mapped = mapper_forward(&src, params, prefix, cfg)?;
    Ok(mapped.sub(&dst).sum_sq())
}

/// Per-epoch loss terms and their weighted total.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LossBreakdown {
    pub global_sn1: f64,
    pub global_sn2: f64,
    pub local_sn1: f64,
    pub local_sn2: f64,
    #[serde(rename = "match")]
    pub matching: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Combine the five loss parts: `alpha * (g1 + g2) + beta * (l1 + l2) + match`.
pub fn total_loss(
    global_sn1: f64,
    global_sn2: f64,
    local_sn1: f64,
    local_sn2: f64,
    matching: f64,
    alpha: f64,
    beta: f64,
) -> LossBreakdown {
    LossBreakdown {
        global_sn1,
        global_sn2,
        local_sn1,
        local_sn2,
        matching,
        total: alpha * (global_sn1 + global_sn2) + beta * (local_sn1 + local_sn2) + matching,
        alpha,
        beta,
    }
}

/// Tape subgraph for the reconstruction loss of one network.
pub fn global_loss_on_tape<F: Scalar>(
    tape: &mut Tape<F>,
    emb: NodeId,
    mask: &NegSampleMask,
) -> NodeId {
    let pairs = Arc::new(mask.pairs());
    let dots = tape.pair_dots(emb, pairs);
    let preds = tape.sigmoid(dots);
    let targets = tape.constant(DenseMatrix::from_vec(
        mask.positives().len() + mask.negatives().len(),
        1,
        mask.targets(),
    ));
    let diff = tape.sub(targets, preds);
    tape.sum_sq(diff)
}

/// Tape subgraph for the proximity loss via the precomputed quadratic
/// operator: `sum(X .* (M X))`.
pub fn local_loss_on_tape<F: Scalar>(
    tape: &mut Tape<F>,
    emb: NodeId,
    prox: &Arc<crate::graph::SparseSymMatrix<F>>,
) -> NodeId {
    let mx = tape.spmm(prox, emb);
    let had = tape.hadamard(emb, mx);
    tape.sum(had)
}

/// Tape subgraph for the anchor mapping loss.
pub fn match_loss_on_tape<F: Scalar>(
    tape: &mut Tape<F>,
    binding: &Binding,
    mapper_prefix: &str,
    mapper: &MapperConfig,
    emb1: NodeId,
    emb2: NodeId,
    anchors: &Arc<Vec<(usize, usize)>>,
) -> NodeId {
    let src_idx: Arc<Vec<usize>> = Arc::new(anchors.iter().map(|&(i, _)| i).collect());
    let dst_idx: Arc<Vec<usize>> = Arc::new(anchors.iter().map(|&(_, k)| k).collect());
    let src = tape.gather_rows(emb1, src_idx);
    let dst = tape.gather_rows(emb2, dst_idx);
    let mapped = mapper.forward_on_tape(tape, binding, mapper_prefix, src);
    let diff = tape.sub(mapped, dst);
    tape.sum_sq(diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::proximity_operator;

    type M = DenseMatrix<f64>;

    #[test]
    fn decode_orthogonal_is_half() {
        let x = M::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = decode_edges(&x, &[(0, 1)]).unwrap();
        assert_eq!(y[0], 0.5);
    }

    #[test]
    fn decode_ln9_is_nine_tenths() {
        let d = (9.0f64).ln();
        let x = M::from_rows(&[vec![d, 0.0], vec![1.0, 0.0]]);
        let y = decode_edges(&x, &[(0, 1)]).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn decode_symmetric_and_in_open_interval() {
        let x = M::from_rows(&[vec![50.0, 2.0], vec![30.0, -1.0], vec![-40.0, 0.3]]);
        let fwd = decode_edges(&x, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let rev = decode_edges(&x, &[(1, 0), (2, 1), (2, 0)]).unwrap();
        for (a, b) in fwd.iter().zip(&rev) {
            assert_eq!(a, b);
            assert!(*a > 0.0 && *a < 1.0);
        }
    }

    fn path4() -> Graph {
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn negative_sample_deterministic_and_balanced() {
        let g = path4();
        let a = negative_sample(&g, 99).unwrap();
        let b = negative_sample(&g, 99).unwrap();
        assert_eq!(a.pairs(), b.pairs());
        assert_eq!(a.negatives().len(), g.edge_count());
        assert!(!a.imbalanced);
        for &(i, j) in a.negatives() {
            assert!(i < j && !g.has_edge(i, j));
        }
    }

    #[test]
    fn negative_sample_complete_graph_flags_imbalance() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let m = negative_sample(&g, 1).unwrap();
        assert_eq!(m.negatives().len(), 0);
        assert!(m.imbalanced);
    }

    #[test]
    fn negative_sample_requires_edges() {
        let g = Graph::from_edges(3, &[]).unwrap();
        assert!(negative_sample(&g, 0).is_err());
    }

    #[test]
    fn global_loss_single_edge_half_pred() {
        // zero embeddings: yhat = 0.5 exactly; one positive, no negatives
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let x = M::zeros(2, 3);
        let mask = NegSampleMask {
            positives: vec![(0, 1)],
            negatives: vec![],
            imbalanced: true,
            seed: 0,
        };
        let l = global_loss(&g, &x, &mask).unwrap();
        assert_eq!(l, 0.25);
    }

    #[test]
    fn reconstruction_error_zero_on_exact_match() {
        let t = vec![1.0, 0.0, 1.0];
        assert_eq!(reconstruction_error(&t, &t), 0.0);
        assert!(reconstruction_error(&t, &[0.9, 0.1, 0.8]) > 0.0);
    }

    #[test]
    fn local_loss_examples() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let x = M::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((local_loss(&g, &x) - 4.0).abs() < 1e-12);

        let same = M::from_rows(&[vec![0.4, 0.2], vec![0.4, 0.2]]);
        assert_eq!(local_loss(&g, &same), 0.0);

        let edgeless = Graph::from_edges(5, &[]).unwrap();
        assert_eq!(local_loss(&edgeless, &M::zeros(5, 2)), 0.0);
    }

    #[test]
    fn local_loss_matches_quadratic_operator_route() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        let x = M::gaussian(5, 3, 1.0, &mut seed::rng(4, "x", 0));
        let direct = local_loss(&g, &x);
        let prox = Arc::new(proximity_operator::<f64>(&g));
        let mut tape = Tape::new();
        let xn = tape.leaf(x.clone());
        let l = local_loss_on_tape(&mut tape, xn, &prox);
        assert!((tape.scalar_value(l) - direct).abs() < 1e-10);
    }

    fn mapper_fixture(dim: usize) -> (MapperConfig, ParamSet<f64>) {
        let cfg = MapperConfig::new(dim);
        let mut p = ParamSet::new();
        cfg.init_params(&mut p, "mapper", &mut seed::rng(5, "map", 0));
        (cfg, p)
    }

    #[test]
    fn mapper_zero_params_zero_output() {
        let (cfg, p) = mapper_fixture(4);
        let z = p.zeros_like();
        let x = M::gaussian(3, 4, 1.0, &mut seed::rng(6, "x", 0));
        let out = mapper_forward(&x, &z, "mapper", &cfg).unwrap();
        assert_eq!(out, M::zeros(3, 4));
    }

    #[test]
    fn mapper_identity_passthrough() {
        let (cfg, mut p) = mapper_fixture(3);
        for layer in 1..=3 {
            let w = p.get_mut(&format!("mapper.w{layer}")).unwrap();
            *w = M::from_rows(&[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ]);
        }
        let x = M::from_rows(&[vec![0.5, 2.0, 0.0]]);
        let out = mapper_forward(&x, &p, "mapper", &cfg).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn match_loss_exact_map_is_zero_and_hand_case() {
        let (cfg, mut p) = mapper_fixture(2);
        for layer in 1..=3 {
            let w = p.get_mut(&format!("mapper.w{layer}")).unwrap();
            *w = M::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        }
        let x1 = M::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        // targets equal to f(x1) = x1 -> zero loss
        let l = match_loss(&[(0, 0), (1, 1)], &x1, &x1, &p, "mapper", &cfg).unwrap();
        assert_eq!(l, 0.0);
        // single anchor, f out (1,0), target (0,1): squared distance 2
        let x2 = M::from_rows(&[vec![0.0, 1.0]]);
        let l = match_loss(&[(0, 0)], &x1, &x2, &p, "mapper", &cfg).unwrap();
        assert_eq!(l, 2.0);
    }

    #[test]
    fn total_loss_weighting() {
        let b = total_loss(1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 1.0);
        assert!((b.total - (10.0 * 3.0 + 7.0 + 5.0)).abs() < 1e-10);
        let only_match = total_loss(1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0);
        assert_eq!(only_match.total, 5.0);
        let zero = total_loss(0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 1.0);
        assert_eq!(zero.total, 0.0);
    }
}
