//! The network encoder: stacked aggregation layers with long skip
//! connections.
//!
//! Each layer combines two aggregators over the 1-hop neighborhood:
//!
//! * a **spectral** aggregator `P X W` using the degree-normalized
//!   propagation operator `P` (global topology), and
//! * an **attention** aggregator `A' X W` whose row-stochastic weights `A'`
//!   are learned from node-pair scores (local topology),
//!
//! added together (the combination weight is absorbed into the two weight
//! matrices) and passed through a relu. The final embedding concatenates all
//! layer outputs and applies a learned linear projection (jumping-knowledge
//! style); a sum combination is available behind a config flag.

use crate::dense::{DenseMatrix, Support};
use crate::error::{Error, Result};
use crate::graph::{propagation_matrix, Graph, SparseSymMatrix};
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::tape::{Binding, NodeId, Tape};
use rand::Rng;
use std::sync::Arc;

/// Which aggregation paths a layer runs. The single-path modes exist for the
/// aggregator ablations; the disabled path's weights are never created, which
/// is equivalent to zeroing and freezing them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggMode {
    Both,
    SpectralOnly,
    AttentionOnly,
}

/// How the per-layer outputs combine into the final embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipCombine {
    /// Concatenate all layer outputs and apply a learned projection.
    Concat,
    /// Elementwise sum of all layer outputs (all layers share `hidden_dim`).
    Sum,
}

/// Encoder architecture. Defaults follow the reference setup: 3 layers,
/// 64-dim inputs, 128-dim hidden/attention space, self edges in the
/// attention support, concatenating skip connections.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Attention projection width (`F`); scores use a `2F` vector.
    pub attn_dim: usize,
    pub layers: usize,
    pub mode: AggMode,
    pub skip: SkipCombine,
    /// Include each node in its own attention support.
    pub attention_self: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_dim: 64,
            hidden_dim: 128,
            attn_dim: 128,
            layers: 3,
            mode: AggMode::Both,
            skip: SkipCombine::Concat,
            attention_self: true,
        }
    }
}

impl EncoderConfig {
    pub fn with_dims(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            attn_dim: hidden_dim,
            ..Self::default()
        }
    }

    fn layer_in_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }

    /// Register freshly initialized parameter blocks under `prefix.`
    /// (Xavier-uniform weights).
    pub fn init_params<F: Scalar, R: Rng>(
        &self,
        params: &mut ParamSet<F>,
        prefix: &str,
        rng: &mut R,
    ) {
        for l in 0..self.layers {
            let c_in = self.layer_in_dim(l);
            if self.mode != AggMode::AttentionOnly {
                params.insert(
                    format!("{prefix}.layer{l}.w_spectral"),
                    DenseMatrix::glorot(c_in, self.hidden_dim, rng),
                );
            }
            if self.mode != AggMode::SpectralOnly {
                params.insert(
                    format!("{prefix}.layer{l}.w_attn"),
                    DenseMatrix::glorot(c_in, self.hidden_dim, rng),
                );
                params.insert(
                    format!("{prefix}.layer{l}.attn_proj"),
                    DenseMatrix::glorot(c_in, self.attn_dim, rng),
                );
                params.insert(
                    format!("{prefix}.layer{l}.attn_vec"),
                    DenseMatrix::glorot(2 * self.attn_dim, 1, rng),
                );
            }
        }
        if self.skip == SkipCombine::Concat {
            params.insert(
                format!("{prefix}.skip"),
                DenseMatrix::glorot(self.layers * self.hidden_dim, self.hidden_dim, rng),
            );
        }
    }

    /// Embedding width produced by [`encode`].
    pub fn output_dim(&self) -> usize {
        self.hidden_dim
    }
}

/// Per-graph constants reused across epochs: the propagation operator and
/// the attention support.
#[derive(Clone)]
pub struct GraphContext<F> {
    pub prop: Arc<SparseSymMatrix<F>>,
    pub support: Arc<Support>,
    pub n: usize,
}

impl<F: Scalar> GraphContext<F> {
    pub fn new(g: &Graph, attention_self: bool) -> Result<Self> {
        Ok(Self {
            prop: Arc::new(propagation_matrix(g)?),
            support: Arc::new(g.attention_support(attention_self)),
            n: g.node_count(),
        })
    }
}

/// Attention scores on the support entries: `score_k = relu(g_l . h_i + g_r . h_j)`
/// for entry `k = (i, j)`, with `h = X proj` and the `2F` vector split into
/// halves. Returns the pre-softmax node id.
fn attention_scores_on_tape<F: Scalar>(
    tape: &mut Tape<F>,
    x: NodeId,
    proj: NodeId,
    attn_vec: NodeId,
    support: &Arc<Support>,
) -> NodeId {
    let f = tape.value(proj).cols();
    let h = tape.matmul(x, proj);
    let g_left = tape.slice_rows(attn_vec, 0..f);
    let g_right = tape.slice_rows(attn_vec, f..2 * f);
    let s = tape.matmul(h, g_left);
    let t = tape.matmul(h, g_right);
    let e = tape.edge_scores(s, t, support);
    tape.relu(e)
}

/// Row-normalized attention on the support, as a tape node (`nnz x 1`).
fn attention_on_tape<F: Scalar>(
    tape: &mut Tape<F>,
    x: NodeId,
    proj: NodeId,
    attn_vec: NodeId,
    support: &Arc<Support>,
) -> NodeId {
    let scores = attention_scores_on_tape(tape, x, proj, attn_vec, support);
    tape.edge_softmax(scores, support)
}

struct LayerIds {
    w_spectral: Option<NodeId>,
    w_attn: Option<NodeId>,
    attn_proj: Option<NodeId>,
    attn_vec: Option<NodeId>,
}

fn layer_ids(binding: &Binding, prefix: &str, layer: usize) -> LayerIds {
    LayerIds {
        w_spectral: binding.try_id(&format!("{prefix}.layer{layer}.w_spectral")),
        w_attn: binding.try_id(&format!("{prefix}.layer{layer}.w_attn")),
        attn_proj: binding.try_id(&format!("{prefix}.layer{layer}.attn_proj")),
        attn_vec: binding.try_id(&format!("{prefix}.layer{layer}.attn_vec")),
    }
}

fn layer_on_tape<F: Scalar>(
    tape: &mut Tape<F>,
    ctx: &GraphContext<F>,
    ids: &LayerIds,
    x: NodeId,
) -> NodeId {
    let spectral = ids.w_spectral.map(|w| {
        let xw = tape.matmul(x, w);
        tape.spmm(&ctx.prop, xw)
    });
    let attention = ids.w_attn.map(|w| {
        let attn = attention_on_tape(
            tape,
            x,
            ids.attn_proj.expect("attention path needs attn_proj"),
            ids.attn_vec.expect("attention path needs attn_vec"),
            &ctx.support,
        );
        let xw = tape.matmul(x, w);
        tape.edge_aggregate(attn, xw, &ctx.support)
    });
    let combined = match (spectral, attention) {
        (Some(a), Some(b)) => tape.add(a, b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("layer with no aggregation path"),
    };
    tape.relu(combined)
}

/// Full encoder forward on a tape: stacked layers, then skip combination.
pub fn encode_on_tape<F: Scalar>(
    tape: &mut Tape<F>,
    cfg: &EncoderConfig,
    ctx: &GraphContext<F>,
    binding: &Binding,
    prefix: &str,
    x0: NodeId,
) -> NodeId {
    let mut h = x0;
    let mut layer_outputs = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let ids = layer_ids(binding, prefix, l);
        h = layer_on_tape(tape, ctx, &ids, h);
        layer_outputs.push(h);
    }
    match cfg.skip {
        SkipCombine::Concat => {
            let cat = tape.concat_cols(&layer_outputs);
            let skip = binding.id(&format!("{prefix}.skip"));
            tape.matmul(cat, skip)
        }
        SkipCombine::Sum => {
            let mut acc = layer_outputs[0];
            for &o in &layer_outputs[1..] {
                acc = tape.add(acc, o);
            }
            acc
        }
    }
}

/// Spectral aggregation `P (X W)`, pre-activation.
pub fn spectral_agg<F: Scalar>(
    prop: &SparseSymMatrix<F>,
    x: &DenseMatrix<F>,
    w: &DenseMatrix<F>,
) -> Result<DenseMatrix<F>> {
    if x.cols() != w.rows() || x.rows() != prop.dim() {
        return Err(Error::Dim(format!(
            "spectral_agg: P {}x{}, X {}x{}, W {}x{}",
            prop.dim(),
            prop.dim(),
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols()
        )));
    }
    prop.matmul(&crate::dense::matmul(x, w)?)
}

/// Row-stochastic attention weights on a support.
#[derive(Clone, Debug)]
pub struct AttentionMatrix<F> {
    support: Arc<Support>,
    /// `nnz x 1`, aligned with the support's entry order.
    values: DenseMatrix<F>,
}

impl<F: Scalar> AttentionMatrix<F> {
    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn values(&self) -> &DenseMatrix<F> {
        &self.values
    }

    /// Weight at `(i, j)`; zero off support.
    pub fn weight(&self, i: usize, j: usize) -> F {
        match self.support.find(i, j) {
            Some(k) => self.values.get(k, 0),
            None => F::zero(),
        }
    }

    pub fn row_sum(&self, i: usize) -> F {
        self.support
            .row_range(i)
            .map(|k| self.values.get(k, 0))
            .sum()
    }
}

/// Normalized attention weights for one layer: softmax over each node's
/// support of `relu(g . [proj^T x_i (+) proj^T x_j])`.
pub fn attention_weights<F: Scalar>(
    support: &Arc<Support>,
    x: &DenseMatrix<F>,
    proj: &DenseMatrix<F>,
    attn_vec: &DenseMatrix<F>,
) -> Result<AttentionMatrix<F>> {
    if proj.rows() != x.cols() {
        return Err(Error::Dim(format!(
            "attention_weights: X is {}x{}, proj {}x{}",
            x.rows(),
            x.cols(),
            proj.rows(),
            proj.cols()
        )));
    }
    if attn_vec.shape() != (2 * proj.cols(), 1) {
        return Err(Error::Dim(format!(
            "attention_weights: attention vector must be {}x1",
            2 * proj.cols()
        )));
    }
    if support.n_rows() != x.rows() {
        return Err(Error::Dim("attention_weights: support rows != N".into()));
    }
    let mut tape = Tape::new();
    let xn = tape.constant(x.clone());
    let pn = tape.constant(proj.clone());
    let gn = tape.constant(attn_vec.clone());
    let a = attention_on_tape(&mut tape, xn, pn, gn, support);
    Ok(AttentionMatrix {
        support: Arc::clone(support),
        values: tape.value(a).clone(),
    })
}

/// Attention aggregation `A' (X W)`, pre-activation.
pub fn attention_agg<F: Scalar>(
    attn: &AttentionMatrix<F>,
    x: &DenseMatrix<F>,
    w: &DenseMatrix<F>,
) -> Result<DenseMatrix<F>> {
    if x.cols() != w.rows() || attn.support.n_rows() != x.rows() {
        return Err(Error::Dim(format!(
            "attention_agg: X {}x{}, W {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols()
        )));
    }
    let xw = crate::dense::matmul(x, w)?;
    let mut out = DenseMatrix::zeros(x.rows(), w.cols());
    for i in 0..attn.support.n_rows() {
        for k in attn.support.row_range(i) {
            let a = attn.values.get(k, 0);
            let src = xw.row(attn.support.cols()[k]).to_vec();
            for (o, s) in out.row_mut(i).iter_mut().zip(src) {
                *o = *o + a * s;
            }
        }
    }
    Ok(out)
}

/// One full layer: `relu(spectral + attention)` per the layer's mode.
pub fn layer_forward<F: Scalar>(
    ctx: &GraphContext<F>,
    x: &DenseMatrix<F>,
    w_spectral: Option<&DenseMatrix<F>>,
    w_attn: Option<&DenseMatrix<F>>,
    attn_proj: Option<&DenseMatrix<F>>,
    attn_vec: Option<&DenseMatrix<F>>,
) -> Result<DenseMatrix<F>> {
    let spectral = w_spectral
        .map(|w| spectral_agg(&ctx.prop, x, w))
        .transpose()?;
    let attention = match (w_attn, attn_proj, attn_vec) {
        (Some(w), Some(p), Some(g)) => {
            let a = attention_weights(&ctx.support, x, p, g)?;
            Some(attention_agg(&a, x, w)?)
        }
        (None, _, _) => None,
        _ => return Err(Error::Config("attention path needs proj and vector".into())),
    };
    let combined = match (spectral, attention) {
        (Some(a), Some(b)) => a.add(&b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::Config("layer with no aggregation path".into())),
    };
    Ok(crate::dense::relu(&combined))
}

/// Encode a graph: run all layers and the skip combination. Pure function of
/// its inputs.
pub fn encode<F: Scalar>(
    g: &Graph,
    x0: &DenseMatrix<F>,
    params: &ParamSet<F>,
    prefix: &str,
    cfg: &EncoderConfig,
) -> Result<DenseMatrix<F>> {
    if x0.cols() != cfg.input_dim || x0.rows() != g.node_count() {
        return Err(Error::Dim(format!(
            "encode: features are {}x{}, expected {}x{}",
            x0.rows(),
            x0.cols(),
            g.node_count(),
            cfg.input_dim
        )));
    }
    let ctx = GraphContext::new(g, cfg.attention_self)?;
    let mut tape = Tape::new();
    let binding = Binding::bind(&mut tape, params);
    let x0n = tape.constant(x0.clone());
    let out = encode_on_tape(&mut tape, cfg, &ctx, &binding, prefix, x0n);
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    fn eye(n: usize) -> M {
        let mut m = M::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    fn two_node() -> Graph {
        Graph::from_edges(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn spectral_agg_identity_recovers_propagation() {
        let g = two_node();
        let p = propagation_matrix::<f64>(&g).unwrap();
        let out = spectral_agg(&p, &eye(2), &eye(2)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn spectral_agg_zero_weights() {
        let g = two_node();
        let p = propagation_matrix::<f64>(&g).unwrap();
        let out = spectral_agg(&p, &eye(2), &M::zeros(2, 2)).unwrap();
        assert_eq!(out, M::zeros(2, 2));
    }

    #[test]
    fn spectral_agg_edgeless_identity_propagation() {
        let g = Graph::from_edges(3, &[]).unwrap();
        let p = propagation_matrix::<f64>(&g).unwrap();
        let x = M::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let out = spectral_agg(&p, &x, &eye(2)).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn attention_uniform_for_identical_features() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let sup = Arc::new(g.attention_support(true));
        let x = M::from_rows(&vec![vec![0.3, 0.7]; 3]);
        let a = attention_weights(&sup, &x, &eye(2), &M::gaussian(4, 1, 1.0, &mut crate::seed::rng(1, "t", 0))).unwrap();
        for i in 0..3 {
            for &j in sup.row_cols(i) {
                assert!((a.weight(i, j) - 1.0 / 3.0).abs() < 1e-12);
            }
            assert!((a.row_sum(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_isolated_node_self_weight_one() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let sup = Arc::new(g.attention_support(true));
        let x = M::gaussian(3, 2, 1.0, &mut crate::seed::rng(2, "t", 0));
        let gvec = M::gaussian(4, 1, 1.0, &mut crate::seed::rng(3, "t", 0));
        let a = attention_weights(&sup, &x, &eye(2), &gvec).unwrap();
        assert!((a.weight(2, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn attention_contrived_two_node_row() {
        // phi(0,0) = 1, phi(0,1) = 0  ->  row 0 = softmax(1, 0)
        let g = two_node();
        let sup = Arc::new(g.attention_support(true));
        let x = M::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        // g_left = 0, g_right = (1, 0): phi(i, j) = x_j[0]
        let gvec = M::from_vec(4, 1, vec![0.0, 0.0, 1.0, 0.0]);
        let a = attention_weights(&sup, &x, &eye(2), &gvec).unwrap();
        assert!((a.weight(0, 0) - 0.7311).abs() < 1e-4);
        assert!((a.weight(0, 1) - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn attention_agg_identity_on_self_support() {
        let g = Graph::from_edges(2, &[]).unwrap();
        let sup = Arc::new(g.attention_support(true));
        let x = M::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let gvec = M::zeros(4, 1);
        let a = attention_weights(&sup, &x, &eye(2), &gvec).unwrap();
        let out = attention_agg(&a, &x, &eye(2)).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn attention_agg_uniform_two_node() {
        let g = two_node();
        let sup = Arc::new(g.attention_support(true));
        let x = M::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        // zero scores -> uniform (.5, .5) rows
        let a = attention_weights(&sup, &x, &eye(2), &M::zeros(4, 1)).unwrap();
        let out = attention_agg(&a, &x, &eye(2)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out.get(i, j) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn attention_agg_zero_weight_matrix() {
        let g = two_node();
        let sup = Arc::new(g.attention_support(true));
        let x = eye(2);
        let a = attention_weights(&sup, &x, &eye(2), &M::zeros(4, 1)).unwrap();
        let out = attention_agg(&a, &x, &M::zeros(2, 2)).unwrap();
        assert_eq!(out, M::zeros(2, 2));
    }

    #[test]
    fn layer_zero_weights_all_zero() {
        let g = two_node();
        let ctx = GraphContext::new(&g, true).unwrap();
        let x = eye(2);
        let out = layer_forward(
            &ctx,
            &x,
            Some(&M::zeros(2, 2)),
            Some(&M::zeros(2, 2)),
            Some(&eye(2)),
            Some(&M::zeros(4, 1)),
        )
        .unwrap();
        assert_eq!(out, M::zeros(2, 2));
    }

    #[test]
    fn layer_spectral_only_matches_component() {
        let g = two_node();
        let ctx = GraphContext::new(&g, true).unwrap();
        let x = M::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let w = M::from_rows(&[vec![1.0, 0.5], vec![-0.25, 1.0]]);
        let only = layer_forward(&ctx, &x, Some(&w), None, None, None).unwrap();
        let direct = crate::dense::relu(&spectral_agg(&ctx.prop, &x, &w).unwrap());
        assert_eq!(only, direct);
    }

    #[test]
    fn layer_identity_weights_hand_computed() {
        // X = I, all-identity weights, zero attention vector:
        // relu(P X + A' X) = relu([[.5,.5],[.5,.5]] + [[.5,.5],[.5,.5]]) = [[1,1],[1,1]]
        let g = two_node();
        let ctx = GraphContext::new(&g, true).unwrap();
        let out = layer_forward(
            &ctx,
            &eye(2),
            Some(&eye(2)),
            Some(&eye(2)),
            Some(&eye(2)),
            Some(&M::zeros(4, 1)),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out.get(i, j) - 1.0).abs() < 1e-15);
            }
        }
    }

    fn small_graph() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)]).unwrap()
    }

    #[test]
    fn encode_shape_and_purity() {
        let g = small_graph();
        let cfg = EncoderConfig::with_dims(4, 8);
        let mut params = ParamSet::<f64>::new();
        cfg.init_params(&mut params, "enc", &mut crate::seed::rng(7, "init", 0));
        let x0 = M::gaussian(6, 4, 0.5, &mut crate::seed::rng(8, "x0", 0));
        let a = encode(&g, &x0, &params, "enc", &cfg).unwrap();
        assert_eq!(a.shape(), (6, 8));
        let b = encode(&g, &x0, &params, "enc", &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_zero_params_zero_output() {
        let g = small_graph();
        let cfg = EncoderConfig::with_dims(4, 8);
        let mut params = ParamSet::<f64>::new();
        cfg.init_params(&mut params, "enc", &mut crate::seed::rng(7, "init", 0));
        let zeros = params.zeros_like();
        let x0 = M::gaussian(6, 4, 0.5, &mut crate::seed::rng(8, "x0", 0));
        let out = encode(&g, &x0, &zeros, "enc", &cfg).unwrap();
        assert_eq!(out, M::zeros(6, 8));
    }

    #[test]
    fn encode_rejects_wrong_input_dim() {
        let g = small_graph();
        let cfg = EncoderConfig::with_dims(4, 8);
        let mut params = ParamSet::<f64>::new();
        cfg.init_params(&mut params, "enc", &mut crate::seed::rng(7, "init", 0));
        let x0 = M::zeros(6, 5);
        assert!(encode(&g, &x0, &params, "enc", &cfg).is_err());
    }

    #[test]
    fn single_path_modes_match_zeroed_other_path() {
        // spectral-only params must reproduce a Both-mode encoder whose
        // attention weight matrices are zeroed (and vice versa)
        let g = small_graph();
        let x0 = M::gaussian(6, 4, 0.5, &mut crate::seed::rng(10, "x0", 0));

        let both_cfg = EncoderConfig {
            mode: AggMode::Both,
            ..EncoderConfig::with_dims(4, 8)
        };
        let mut both = ParamSet::<f64>::new();
        both_cfg.init_params(&mut both, "enc", &mut crate::seed::rng(11, "init", 0));

        // zero the attention output weights in the Both encoder
        let mut zeroed = both.clone();
        for l in 0..both_cfg.layers {
            let name = format!("enc.layer{l}.w_attn");
            let m = zeroed.get_mut(&name).unwrap();
            *m = M::zeros(m.rows(), m.cols());
        }
        let zeroed_out = encode(&g, &x0, &zeroed, "enc", &both_cfg).unwrap();

        // spectral-only encoder sharing the spectral + skip blocks
        let only_cfg = EncoderConfig {
            mode: AggMode::SpectralOnly,
            ..both_cfg.clone()
        };
        let mut only = ParamSet::<f64>::new();
        for (name, m) in both.iter() {
            if !name.contains("attn") {
                only.insert(name, m.clone());
            }
        }
        let only_out = encode(&g, &x0, &only, "enc", &only_cfg).unwrap();
        let diff = zeroed_out.sub(&only_out).max_abs();
        assert!(diff < 1e-14, "ablation mismatch {diff}");
    }

    #[test]
    fn encode_permutation_equivariant() {
        let g = small_graph();
        let n = g.node_count();
        let cfg = EncoderConfig::with_dims(4, 8);
        let mut params = ParamSet::<f64>::new();
        cfg.init_params(&mut params, "enc", &mut crate::seed::rng(13, "init", 0));
        let x0 = M::gaussian(n, 4, 0.5, &mut crate::seed::rng(14, "x0", 0));
        let base = encode(&g, &x0, &params, "enc", &cfg).unwrap();

        // permutation pi: new id of old node i is perm[i]
        let perm = vec![3, 0, 5, 1, 4, 2];
        let edges: Vec<(usize, usize)> = g.edges().map(|(a, b)| (perm[a], perm[b])).collect();
        let pg = Graph::from_edges(n, &edges).unwrap();
        let mut px = M::zeros(n, 4);
        for i in 0..n {
            px.row_mut(perm[i]).copy_from_slice(x0.row(i));
        }
        let pout = encode(&pg, &px, &params, "enc", &cfg).unwrap();
        for i in 0..n {
            for j in 0..8 {
                assert!(
                    (pout.get(perm[i], j) - base.get(i, j)).abs() < 1e-10,
                    "node {i} dim {j}"
                );
            }
        }
    }
}
