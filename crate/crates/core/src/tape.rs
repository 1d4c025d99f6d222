//! Reverse-mode automatic differentiation over matrix-valued nodes.
//!
//! A [`Tape`] is an append-only DAG: each method records one primitive and
//! eagerly computes its value. [`Tape::backward`] walks the nodes in reverse
//! creation order and accumulates vector-Jacobian products into every
//! trainable leaf. The primitive set is closed (an enum), so an unsupported
//! operation cannot be constructed at all, and every gradient here is covered
//! by the finite-difference harness in [`crate::gradcheck`].

use crate::dense::{self, DenseMatrix, Support};
use crate::graph::SparseSymMatrix;
use crate::scalar::Scalar;
use std::ops::Range;
use std::sync::Arc;

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<F: Scalar> {
    Leaf { trainable: bool },
    MatMul(NodeId, NodeId),
    Spmm(Arc<SparseSymMatrix<F>>, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Scale(F, NodeId),
    AddRow(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    RowSoftmax(NodeId, Arc<Support>),
    ConcatCols(Vec<NodeId>),
    SliceRows(NodeId, Range<usize>),
    GatherRows(NodeId, Arc<Vec<usize>>),
    PairDots(NodeId, Arc<Vec<(usize, usize)>>),
    EdgeScores(NodeId, NodeId, Arc<Support>),
    EdgeSoftmax(NodeId, Arc<Support>),
    EdgeAggregate(NodeId, NodeId, Arc<Support>),
    Sum(NodeId),
    SumSq(NodeId),
    Mean(NodeId),
}

struct Node<F: Scalar> {
    op: Op<F>,
    value: DenseMatrix<F>,
    needs_grad: bool,
}

/// Gradients of a scalar loss with respect to tape leaves.
pub struct Gradients<F> {
    grads: Vec<Option<DenseMatrix<F>>>,
}

impl<F: Scalar> Gradients<F> {
    /// Gradient w.r.t. a trainable leaf; zero matrix if the loss never
    /// touched it.
    pub fn wrt(&self, id: NodeId, shape: (usize, usize)) -> DenseMatrix<F> {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => DenseMatrix::zeros(shape.0, shape.1),
        }
    }
}

#[derive(Default)]
pub struct Tape<F: Scalar> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix<F> {
        &self.nodes[id.0].value
    }

    pub fn scalar_value(&self, id: NodeId) -> F {
        self.value(id).scalar_value()
    }

    fn push(&mut self, op: Op<F>, value: DenseMatrix<F>) -> NodeId {
        let needs_grad = match &op {
            Op::Leaf { trainable } => *trainable,
            other => self.inputs_of(other).iter().any(|i| self.nodes[i.0].needs_grad),
        };
        value.debug_check_finite();
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn inputs_of(&self, op: &Op<F>) -> Vec<NodeId> {
        match op {
            Op::Leaf { .. } => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Hadamard(a, b)
            | Op::AddRow(a, b)
            | Op::EdgeScores(a, b, _)
            | Op::EdgeAggregate(a, b, _) => vec![*a, *b],
            Op::Spmm(_, x)
            | Op::Scale(_, x)
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Softplus(x)
            | Op::RowSoftmax(x, _)
            | Op::SliceRows(x, _)
            | Op::GatherRows(x, _)
            | Op::PairDots(x, _)
            | Op::EdgeSoftmax(x, _)
            | Op::Sum(x)
            | Op::SumSq(x)
            | Op::Mean(x) => vec![*x],
            Op::ConcatCols(v) => v.clone(),
        }
    }

    /// Trainable input; gradients flow into it.
    pub fn leaf(&mut self, value: DenseMatrix<F>) -> NodeId {
        self.push(Op::Leaf { trainable: true }, value)
    }

    /// Constant input; backward skips everything that depends only on these.
    pub fn constant(&mut self, value: DenseMatrix<F>) -> NodeId {
        self.push(Op::Leaf { trainable: false }, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = dense::matmul(self.value(a), self.value(b)).expect("tape matmul shape");
        self.push(Op::MatMul(a, b), v)
    }

    pub fn spmm(&mut self, m: &Arc<SparseSymMatrix<F>>, x: NodeId) -> NodeId {
        let v = m.matmul(self.value(x)).expect("tape spmm shape");
        self.push(Op::Spmm(Arc::clone(m), x), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).sub(self.value(b));
        self.push(Op::Sub(a, b), v)
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).hadamard(self.value(b));
        self.push(Op::Hadamard(a, b), v)
    }

    pub fn scale(&mut self, c: F, x: NodeId) -> NodeId {
        let v = self.value(x).scale(c);
        self.push(Op::Scale(c, x), v)
    }

    /// Broadcast-add a `1 x d` row (bias) to every row of an `n x d` matrix.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let (xm, rm) = (self.value(x), self.value(row));
        assert_eq!(rm.rows(), 1, "add_row: bias must be 1 x d");
        assert_eq!(rm.cols(), xm.cols(), "add_row: width mismatch");
        let mut v = xm.clone();
        for i in 0..v.rows() {
            let r = rm.row(0).to_vec();
            for (o, b) in v.row_mut(i).iter_mut().zip(r) {
                *o = *o + b;
            }
        }
        self.push(Op::AddRow(x, row), v)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = dense::relu(self.value(x));
        self.push(Op::Relu(x), v)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = dense::sigmoid(self.value(x));
        self.push(Op::Sigmoid(x), v)
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let v = dense::softplus(self.value(x));
        self.push(Op::Softplus(x), v)
    }

    /// Row-wise masked softmax; rows sum to 1 on their support, 0 elsewhere.
    pub fn row_softmax(&mut self, x: NodeId, support: &Arc<Support>) -> NodeId {
        let v = dense::row_softmax(self.value(x), support).expect("tape row_softmax support");
        self.push(Op::RowSoftmax(x, Arc::clone(support)), v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let values: Vec<&DenseMatrix<F>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = dense::concat_cols(&values).expect("tape concat shape");
        self.push(Op::ConcatCols(parts.to_vec()), v)
    }

    pub fn slice_rows(&mut self, x: NodeId, range: Range<usize>) -> NodeId {
        let xm = self.value(x);
        assert!(range.end <= xm.rows(), "slice_rows out of range");
        let mut v = DenseMatrix::zeros(range.len(), xm.cols());
        for (out_i, src_i) in range.clone().enumerate() {
            v.row_mut(out_i).copy_from_slice(xm.row(src_i));
        }
        self.push(Op::SliceRows(x, range), v)
    }

    /// Select rows by index; duplicate indices are allowed.
    pub fn gather_rows(&mut self, x: NodeId, idx: Arc<Vec<usize>>) -> NodeId {
        let xm = self.value(x);
        let mut v = DenseMatrix::zeros(idx.len(), xm.cols());
        for (out_i, &src_i) in idx.iter().enumerate() {
            v.row_mut(out_i).copy_from_slice(xm.row(src_i));
        }
        self.push(Op::GatherRows(x, idx), v)
    }

    /// Column vector of row dot products `x[i] . x[j]` over the pair list.
    pub fn pair_dots(&mut self, x: NodeId, pairs: Arc<Vec<(usize, usize)>>) -> NodeId {
        let xm = self.value(x);
        let data: Vec<F> = pairs
            .iter()
            .map(|&(i, j)| dot(xm.row(i), xm.row(j)))
            .collect();
        let v = DenseMatrix::from_vec(pairs.len(), 1, data);
        self.push(Op::PairDots(x, pairs), v)
    }

    /// Per-entry scores `s[row_k] + t[col_k]` over the support entries;
    /// `s` and `t` are column vectors.
    pub fn edge_scores(&mut self, s: NodeId, t: NodeId, support: &Arc<Support>) -> NodeId {
        let (sm, tm) = (self.value(s), self.value(t));
        assert_eq!(sm.cols(), 1, "edge_scores: s must be a column");
        assert_eq!(tm.cols(), 1, "edge_scores: t must be a column");
        assert_eq!(sm.rows(), support.n_rows(), "edge_scores: row count");
        let mut data = Vec::with_capacity(support.nnz());
        for i in 0..support.n_rows() {
            for &j in support.row_cols(i) {
                data.push(sm.get(i, 0) + tm.get(j, 0));
            }
        }
        let v = DenseMatrix::from_vec(support.nnz(), 1, data);
        self.push(Op::EdgeScores(s, t, Arc::clone(support)), v)
    }

    /// Softmax over each support row's entries of an edge-value column.
    pub fn edge_softmax(&mut self, e: NodeId, support: &Arc<Support>) -> NodeId {
        let em = self.value(e);
        assert_eq!(em.shape(), (support.nnz(), 1), "edge_softmax shape");
        let mut out = vec![F::zero(); support.nnz()];
        for i in 0..support.n_rows() {
            let r = support.row_range(i);
            if r.is_empty() {
                continue;
            }
            let m = r
                .clone()
                .map(|k| em.get(k, 0))
                .fold(F::neg_infinity(), F::max);
            let mut z = F::zero();
            for k in r.clone() {
                let ev = (em.get(k, 0) - m).exp();
                out[k] = ev;
                z = z + ev;
            }
            for k in r {
                out[k] = out[k] / z;
            }
        }
        let v = DenseMatrix::from_vec(support.nnz(), 1, out);
        self.push(Op::EdgeSoftmax(e, Arc::clone(support)), v)
    }

    /// Weighted neighborhood sum: `out[i] = sum_k attn[k] * x[col_k]` over
    /// support entries `k` of row `i`.
    pub fn edge_aggregate(&mut self, attn: NodeId, x: NodeId, support: &Arc<Support>) -> NodeId {
        let (am, xm) = (self.value(attn), self.value(x));
        assert_eq!(am.shape(), (support.nnz(), 1), "edge_aggregate attn shape");
        let mut v = DenseMatrix::zeros(support.n_rows(), xm.cols());
        for i in 0..support.n_rows() {
            for k in support.row_range(i) {
                let a = am.get(k, 0);
                let src = xm.row(support.cols()[k]).to_vec();
                for (o, sv) in v.row_mut(i).iter_mut().zip(src) {
                    *o = *o + a * sv;
                }
            }
        }
        self.push(Op::EdgeAggregate(attn, x, Arc::clone(support)), v)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = DenseMatrix::scalar(self.value(x).sum());
        self.push(Op::Sum(x), v)
    }

    /// Squared Frobenius norm, as a scalar node.
    pub fn sum_sq(&mut self, x: NodeId) -> NodeId {
        let v = DenseMatrix::scalar(self.value(x).sum_sq());
        self.push(Op::SumSq(x), v)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let xm = self.value(x);
        let v = DenseMatrix::scalar(xm.sum() / F::cast(xm.len() as f64));
        self.push(Op::Mean(x), v)
    }

    /// Backpropagate from a scalar loss node. Returns per-leaf gradients.
    pub fn backward(&self, loss: NodeId) -> Gradients<F> {
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "backward requires a scalar loss node"
        );
        let mut grads: Vec<Option<DenseMatrix<F>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(DenseMatrix::scalar(F::one()));

        for k in (0..=loss.0).rev() {
            if !self.nodes[k].needs_grad {
                grads[k] = None;
                continue;
            }
            let g = match grads[k].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(k, &g, &mut grads);
            if matches!(self.nodes[k].op, Op::Leaf { .. }) {
                grads[k] = Some(g);
            }
        }
        Gradients { grads }
    }

    fn accum(&self, grads: &mut [Option<DenseMatrix<F>>], id: NodeId, delta: DenseMatrix<F>) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(g) => g.add_scaled(F::one(), &delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, k: usize, g: &DenseMatrix<F>, grads: &mut [Option<DenseMatrix<F>>]) {
        let node = &self.nodes[k];
        match &node.op {
            Op::Leaf { .. } => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].needs_grad {
                    let da = dense::matmul(g, &bv.transpose()).unwrap();
                    self.accum(grads, *a, da);
                }
                if self.nodes[b.0].needs_grad {
                    let db = dense::matmul(&av.transpose(), g).unwrap();
                    self.accum(grads, *b, db);
                }
            }
            Op::Spmm(m, x) => {
                // m is symmetric, so m^T g = m g
                let dx = m.matmul(g).unwrap();
                self.accum(grads, *x, dx);
            }
            Op::Add(a, b) => {
                self.accum(grads, *a, g.clone());
                self.accum(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accum(grads, *a, g.clone());
                self.accum(grads, *b, g.scale(-F::one()));
            }
            Op::Hadamard(a, b) => {
                self.accum(grads, *a, g.hadamard(self.value(*b)));
                self.accum(grads, *b, g.hadamard(self.value(*a)));
            }
            Op::Scale(c, x) => self.accum(grads, *x, g.scale(*c)),
            Op::AddRow(x, row) => {
                self.accum(grads, *x, g.clone());
                if self.nodes[row.0].needs_grad {
                    let mut dr = DenseMatrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, &gv) in dr.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o = *o + gv;
                        }
                    }
                    self.accum(grads, *row, dr);
                }
            }
            Op::Relu(x) => {
                let dx = g.zip_map(&node.value, |gv, v| if v > F::zero() { gv } else { F::zero() });
                self.accum(grads, *x, dx);
            }
            Op::Sigmoid(x) => {
                let dx = g.zip_map(&node.value, |gv, v| gv * v * (F::one() - v));
                self.accum(grads, *x, dx);
            }
            Op::Softplus(x) => {
                let dx = g.zip_map(self.value(*x), |gv, xv| gv * dense::sigmoid_scalar(xv));
                self.accum(grads, *x, dx);
            }
            Op::RowSoftmax(x, support) => {
                let s = &node.value;
                let mut dx = DenseMatrix::zeros(s.rows(), s.cols());
                for i in 0..support.n_rows() {
                    let cols = support.row_cols(i);
                    let dot: F = cols.iter().map(|&j| g.get(i, j) * s.get(i, j)).sum();
                    for &j in cols {
                        dx.set(i, j, s.get(i, j) * (g.get(i, j) - dot));
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    if self.nodes[p.0].needs_grad {
                        let mut dp = DenseMatrix::zeros(g.rows(), pc);
                        for i in 0..g.rows() {
                            dp.row_mut(i).copy_from_slice(&g.row(i)[off..off + pc]);
                        }
                        self.accum(grads, p, dp);
                    }
                    off += pc;
                }
            }
            Op::SliceRows(x, range) => {
                let xm = self.value(*x);
                let mut dx = DenseMatrix::zeros(xm.rows(), xm.cols());
                for (out_i, src_i) in range.clone().enumerate() {
                    dx.row_mut(src_i).copy_from_slice(g.row(out_i));
                }
                self.accum(grads, *x, dx);
            }
            Op::GatherRows(x, idx) => {
                let xm = self.value(*x);
                let mut dx = DenseMatrix::zeros(xm.rows(), xm.cols());
                for (out_i, &src_i) in idx.iter().enumerate() {
                    for (o, &gv) in dx.row_mut(src_i).iter_mut().zip(g.row(out_i)) {
                        *o = *o + gv;
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::PairDots(x, pairs) => {
                let xm = self.value(*x);
                let mut dx = DenseMatrix::zeros(xm.rows(), xm.cols());
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    let gv = g.get(k, 0);
                    let (ri, rj) = (xm.row(i).to_vec(), xm.row(j).to_vec());
                    for (o, &v) in dx.row_mut(i).iter_mut().zip(&rj) {
                        *o = *o + gv * v;
                    }
                    for (o, &v) in dx.row_mut(j).iter_mut().zip(&ri) {
                        *o = *o + gv * v;
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::EdgeScores(s, t, support) => {
                let n = support.n_rows();
                if self.nodes[s.0].needs_grad {
                    let mut ds = DenseMatrix::zeros(n, 1);
                    for (k, i) in support.entry_rows().enumerate() {
                        ds.set(i, 0, ds.get(i, 0) + g.get(k, 0));
                    }
                    self.accum(grads, *s, ds);
                }
                if self.nodes[t.0].needs_grad {
                    let tn = self.value(*t).rows();
                    let mut dt = DenseMatrix::zeros(tn, 1);
                    for (k, &j) in support.cols().iter().enumerate() {
                        dt.set(j, 0, dt.get(j, 0) + g.get(k, 0));
                    }
                    self.accum(grads, *t, dt);
                }
            }
            Op::EdgeSoftmax(e, support) => {
                let a = &node.value;
                let mut de = DenseMatrix::zeros(support.nnz(), 1);
                for i in 0..support.n_rows() {
                    let r = support.row_range(i);
                    let dot: F = r.clone().map(|k| g.get(k, 0) * a.get(k, 0)).sum();
                    for k in r {
                        de.set(k, 0, a.get(k, 0) * (g.get(k, 0) - dot));
                    }
                }
                self.accum(grads, *e, de);
            }
            Op::EdgeAggregate(attn, x, support) => {
                let (am, xm) = (self.value(*attn), self.value(*x));
                if self.nodes[attn.0].needs_grad {
                    let mut da = DenseMatrix::zeros(support.nnz(), 1);
                    for i in 0..support.n_rows() {
                        for k in support.row_range(i) {
                            da.set(k, 0, dot(g.row(i), xm.row(support.cols()[k])));
                        }
                    }
                    self.accum(grads, *attn, da);
                }
                if self.nodes[x.0].needs_grad {
                    let mut dx = DenseMatrix::zeros(xm.rows(), xm.cols());
                    for i in 0..support.n_rows() {
                        for k in support.row_range(i) {
                            let a = am.get(k, 0);
                            let j = support.cols()[k];
                            let grow = g.row(i).to_vec();
                            for (o, &gv) in dx.row_mut(j).iter_mut().zip(&grow) {
                                *o = *o + a * gv;
                            }
                        }
                    }
                    self.accum(grads, *x, dx);
                }
            }
            Op::Sum(x) => {
                let gv = g.scalar_value();
                let xm = self.value(*x);
                self.accum(grads, *x, xm.map(|_| gv));
            }
            Op::SumSq(x) => {
                let gv = g.scalar_value();
                let two = F::cast(2.0);
                let dx = self.value(*x).map(|v| two * gv * v);
                self.accum(grads, *x, dx);
            }
            Op::Mean(x) => {
                let xm = self.value(*x);
                let gv = g.scalar_value() / F::cast(xm.len() as f64);
                self.accum(grads, *x, xm.map(|_| gv));
            }
        }
    }
}

#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Parameter blocks bound to tape leaves, looked up by block name.
pub struct Binding {
    names: Vec<String>,
    ids: Vec<NodeId>,
}

impl Binding {
    /// Create one trainable leaf per block, in block order.
    pub fn bind<F: Scalar>(tape: &mut Tape<F>, params: &crate::params::ParamSet<F>) -> Self {
        let mut names = Vec::with_capacity(params.len());
        let mut ids = Vec::with_capacity(params.len());
        for (name, value) in params.iter() {
            names.push(name.to_string());
            ids.push(tape.leaf(value.clone()));
        }
        Self { names, ids }
    }

    /// Wrap pre-created leaves (e.g. from [`crate::gradcheck::value_and_grad`]).
    pub fn from_ids<F: Scalar>(params: &crate::params::ParamSet<F>, ids: &[NodeId]) -> Self {
        assert_eq!(params.len(), ids.len());
        Self {
            names: params.names().map(str::to_string).collect(),
            ids: ids.to_vec(),
        }
    }

    pub fn try_id(&self, name: &str) -> Option<NodeId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.ids[i])
    }

    pub fn id(&self, name: &str) -> NodeId {
        self.try_id(name)
            .unwrap_or_else(|| panic!("no parameter block named {name:?}"))
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn square_gradient() {
        // loss(w) = w^2 at w = 3 -> gradient 6
        let mut t = Tape::<f64>::new();
        let w = t.leaf(M::scalar(3.0));
        let sq = t.hadamard(w, w);
        let loss = t.sum(sq);
        assert_eq!(t.scalar_value(loss), 9.0);
        let g = t.backward(loss);
        assert_eq!(g.wrt(w, (1, 1)).scalar_value(), 6.0);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::<f64>::new();
        let s = t.leaf(M::scalar(0.0));
        let y = t.sigmoid(s);
        let loss = t.sum(y);
        let g = t.backward(loss);
        assert!((g.wrt(s, (1, 1)).scalar_value() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_block_gets_zero_gradient() {
        let mut t = Tape::<f64>::new();
        let w = t.leaf(M::scalar(2.0));
        let unused = t.leaf(M::from_rows(&[vec![5.0, 5.0]]));
        let loss = t.sum_sq(w);
        let g = t.backward(loss);
        assert_eq!(g.wrt(unused, (1, 2)), M::zeros(1, 2));
    }

    #[test]
    fn matmul_gradients() {
        // loss = sum(A B); dA = 1 B^T, dB = A^T 1
        let mut t = Tape::<f64>::new();
        let a = t.leaf(M::from_rows(&[vec![1.0, 2.0]]));
        let b = t.leaf(M::from_rows(&[vec![3.0], vec![4.0]]));
        let p = t.matmul(a, b);
        let loss = t.sum(p);
        assert_eq!(t.scalar_value(loss), 11.0);
        let g = t.backward(loss);
        assert_eq!(g.wrt(a, (1, 2)), M::from_rows(&[vec![3.0, 4.0]]));
        assert_eq!(g.wrt(b, (2, 1)), M::from_rows(&[vec![1.0], vec![2.0]]));
    }

    #[test]
    fn edge_softmax_rows_are_distributions() {
        let sup = Arc::new(Support::from_rows(&[vec![0, 1], vec![0, 1, 2]]));
        let mut t = Tape::<f64>::new();
        let e = t.leaf(M::from_vec(5, 1, vec![1.0, 0.0, 2.0, 2.0, 2.0]));
        let a = t.edge_softmax(e, &sup);
        let v = t.value(a);
        assert!((v.get(0, 0) + v.get(1, 0) - 1.0).abs() < 1e-15);
        assert!((v.get(2, 0) + v.get(3, 0) + v.get(4, 0) - 1.0).abs() < 1e-15);
        // row 0: softmax(1, 0)
        assert!((v.get(0, 0) - 0.7310585786300049).abs() < 1e-12);
    }

    #[test]
    fn gather_rows_accumulates_duplicates() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(M::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let gathered = t.gather_rows(x, Arc::new(vec![0, 0, 1]));
        let loss = t.sum(gathered);
        let g = t.backward(loss);
        assert_eq!(
            g.wrt(x, (2, 2)),
            M::from_rows(&[vec![2.0, 2.0], vec![1.0, 1.0]])
        );
    }

    #[test]
    fn pair_dots_values_and_symmetry() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(M::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]));
        let d = t.pair_dots(x, Arc::new(vec![(0, 1), (1, 0)]));
        let v = t.value(d);
        assert_eq!(v.get(0, 0), 1.0);
        assert_eq!(v.get(1, 0), v.get(0, 0));
    }
}
