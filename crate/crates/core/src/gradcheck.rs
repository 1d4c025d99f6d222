//! Gradient computation against a loss-builder closure, and the central
//! finite-difference harness that verifies it.
//!
//! The builder receives a fresh tape plus one trainable leaf per parameter
//! block (in block order) and returns the scalar loss node. The
//! finite-difference check re-runs the builder on perturbed copies of the
//! parameters, so it is independent of the backward pass it validates.

use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::seed;
use crate::tape::{NodeId, Tape};
use rand::seq::index::sample;

/// Scalar loss defined as a tape program over the parameter blocks.
pub trait LossBuilder<F: Scalar>: Fn(&mut Tape<F>, &[NodeId]) -> NodeId {}
impl<F: Scalar, T: Fn(&mut Tape<F>, &[NodeId]) -> NodeId> LossBuilder<F> for T {}

/// Evaluate the loss and its gradient w.r.t. every block.
pub fn value_and_grad<F: Scalar>(
    params: &ParamSet<F>,
    build: impl LossBuilder<F>,
) -> (F, ParamSet<F>) {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|(_, m)| tape.leaf(m.clone())).collect();
    let loss = build(&mut tape, &ids);
    let value = tape.scalar_value(loss);
    let grads = tape.backward(loss);
    let mut out = params.zeros_like();
    for ((name, p), id) in params.iter().zip(&ids) {
        *out.get_mut(name).unwrap() = grads.wrt(*id, p.shape());
    }
    (value, out)
}

/// Gradient of the loss w.r.t. every block.
pub fn grad<F: Scalar>(params: &ParamSet<F>, build: impl LossBuilder<F>) -> ParamSet<F> {
    value_and_grad(params, build).1
}

fn eval<F: Scalar>(params: &ParamSet<F>, build: &impl LossBuilder<F>) -> F {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|(_, m)| tape.leaf(m.clone())).collect();
    let loss = build(&mut tape, &ids);
    tape.scalar_value(loss)
}

/// Per-block and overall maximum relative error between analytic and central
/// finite-difference gradients.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_block: Vec<(String, f64)>,
    pub overall_max: f64,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn block_max(&self, name: &str) -> Option<f64> {
        self.per_block
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| *e)
    }
}

/// Minimum number of coordinates sampled per block when subsampling.
pub const MIN_COORDS_PER_BLOCK: usize = 32;

/// Compare analytic gradients against `(loss(p+eps) - loss(p-eps)) / (2 eps)`
/// coordinate-wise. Blocks larger than `MIN_COORDS_PER_BLOCK` are subsampled
/// (seeded, at least 32 coordinates); pass `exhaustive = true` to check every
/// coordinate. Relative error uses denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F: Scalar>(
    params: &ParamSet<F>,
    build: impl LossBuilder<F>,
    eps: f64,
    exhaustive: bool,
) -> GradCheckReport {
    assert!(eps > 0.0, "eps must be positive");
    let (_, analytic) = value_and_grad(params, &build);
    let eps_f = F::cast(eps);
    let mut per_block = Vec::new();
    let mut overall: f64 = 0.0;
    let mut checked = 0usize;
    for (name, block) in params.iter() {
        let len = block.len();
        let coords: Vec<usize> = if exhaustive || len <= MIN_COORDS_PER_BLOCK {
            (0..len).collect()
        } else {
            let mut rng = seed::rng(0x6f2c_91d5, name, len as u64);
            let mut v = sample(&mut rng, len, MIN_COORDS_PER_BLOCK).into_vec();
            v.sort_unstable();
            v
        };
        let mut block_max: f64 = 0.0;
        for &c in &coords {
            let mut plus = params.clone();
            let mut minus = params.clone();
            {
                let s = plus.get_mut(name).unwrap().as_mut_slice();
                s[c] = s[c] + eps_f;
            }
            {
                let s = minus.get_mut(name).unwrap().as_mut_slice();
                s[c] = s[c] - eps_f;
            }
            let lp = eval(&plus, &build).widen();
            let lm = eval(&minus, &build).widen();
            let numeric = (lp - lm) / (2.0 * eps);
            let a = analytic.get(name).unwrap().as_slice()[c].widen();
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let err = (a - numeric).abs() / denom;
            block_max = block_max.max(err);
            checked += 1;
        }
        overall = overall.max(block_max);
        per_block.push((name.to_string(), block_max));
    }
    GradCheckReport {
        per_block,
        overall_max: overall,
        coords_checked: checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{DenseMatrix, Support};
    use rand::Rng;
    use std::sync::Arc;

    type M = DenseMatrix<f64>;

    fn one_block(name: &str, m: M) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.insert(name, m);
        p
    }

    #[test]
    fn quadratic_is_exact_to_rounding() {
        let p = one_block("w", M::scalar(3.0));
        let report = finite_diff_check(
            &p,
            |t: &mut Tape<f64>, ids: &[NodeId]| t.sum_sq(ids[0]),
            1e-5,
            true,
        );
        assert!(report.overall_max < 1e-9, "err {}", report.overall_max);
    }

    #[test]
    fn constant_loss_zero_error() {
        let p = one_block("w", M::scalar(1.0));
        let report = finite_diff_check(
            &p,
            |t: &mut Tape<f64>, _ids: &[NodeId]| {
                let c = t.constant(M::scalar(4.0));
                t.sum(c)
            },
            1e-5,
            true,
        );
        assert_eq!(report.overall_max, 0.0);
    }

    #[test]
    fn grad_of_untouched_block_is_zero() {
        let mut p = ParamSet::new();
        p.insert("used", M::scalar(2.0));
        p.insert("unused", M::from_rows(&[vec![1.0, -1.0]]));
        let g = grad(&p, |t: &mut Tape<f64>, ids: &[NodeId]| t.sum_sq(ids[0]));
        assert_eq!(g.get("unused").unwrap(), &M::zeros(1, 2));
        assert_eq!(g.get("used").unwrap().scalar_value(), 4.0);
    }

    /// Entries bounded away from relu kinks so central differences are valid.
    fn rand_mat(rng: &mut impl Rng, r: usize, c: usize) -> M {
        let data = (0..r * c)
            .map(|_| {
                let mag = rng.random_range(0.1..1.1);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        M::from_vec(r, c, data)
    }

    fn rand_support(rng: &mut impl Rng, rows: usize, cols: usize) -> Arc<Support> {
        let mut sup = Vec::new();
        for i in 0..rows {
            let mut row: Vec<usize> = (0..cols).filter(|_| rng.random_bool(0.5)).collect();
            if row.is_empty() {
                row.push(i % cols);
            }
            sup.push(row);
        }
        Arc::new(Support::from_rows(&sup))
    }

    /// Every primitive participates in at least one of these builders; all
    /// must match finite differences at 1e-5 over 50 random seeds.
    #[test]
    fn all_primitives_match_finite_differences() {
        for seed_idx in 0..50u64 {
            let mut rng = crate::seed::rng(seed_idx, "gradcheck-prop", 0);
            let n = rng.random_range(2..=16);
            let k = rng.random_range(1..=16);
            let m = rng.random_range(1..=16);

            // dense chain: relu(A B + bias) -> sigmoid -> row_softmax -> concat
            let mut p = ParamSet::new();
            p.insert("a", rand_mat(&mut rng, n, k));
            p.insert("b", rand_mat(&mut rng, k, m));
            p.insert("bias", rand_mat(&mut rng, 1, m));
            let sup = rand_support(&mut rng, n, m);
            let sup2 = Arc::clone(&sup);
            let report = finite_diff_check(
                &p,
                move |t: &mut Tape<f64>, ids: &[NodeId]| {
                    let h0 = t.matmul(ids[0], ids[1]);
                    let h1 = t.add_row(h0, ids[2]);
                    let r = t.relu(h1);
                    let s = t.sigmoid(h1);
                    let sm = t.row_softmax(h1, &sup2);
                    let sp = t.softplus(h1);
                    let cat = t.concat_cols(&[r, s, sm, sp]);
                    let l1 = t.sum_sq(cat);
                    let l2 = t.mean(cat);
                    let diff = t.sub(r, s);
                    let had = t.hadamard(diff, diff);
                    let l3 = t.sum(had);
                    let l3s = t.scale(0.5, l3);
                    let t1 = t.add(l1, l2);
                    t.add(t1, l3s)
                },
                1e-5,
                false,
            );
            assert!(
                report.overall_max < 1e-5,
                "seed {seed_idx}: dense chain err {}",
                report.overall_max
            );

            // structural ops: gather/slice/pair_dots/edge ops
            let mut p2 = ParamSet::new();
            p2.insert("x", rand_mat(&mut rng, n, k));
            p2.insert("g", rand_mat(&mut rng, 2 * k, 1));
            let idx: Arc<Vec<usize>> = Arc::new((0..n + 2).map(|i| i % n).collect());
            let pairs: Arc<Vec<(usize, usize)>> = Arc::new(
                (0..n)
                    .map(|i| (i, (i + 1) % n))
                    .chain(std::iter::once((0, 0)))
                    .collect(),
            );
            let nsup = rand_support(&mut rng, n, n);
            let (idx2, pairs2, nsup2) = (Arc::clone(&idx), Arc::clone(&pairs), Arc::clone(&nsup));
            let kk = k;
            let report = finite_diff_check(
                &p2,
                move |t: &mut Tape<f64>, ids: &[NodeId]| {
                    let x = ids[0];
                    let gl = t.slice_rows(ids[1], 0..kk);
                    let gr = t.slice_rows(ids[1], kk..2 * kk);
                    let s = t.matmul(x, gl);
                    let tt = t.matmul(x, gr);
                    let e = t.edge_scores(s, tt, &nsup2);
                    let er = t.relu(e);
                    let a = t.edge_softmax(er, &nsup2);
                    let agg = t.edge_aggregate(a, x, &nsup2);
                    let gathered = t.gather_rows(agg, Arc::clone(&idx2));
                    let dots = t.pair_dots(agg, Arc::clone(&pairs2));
                    let ds = t.sigmoid(dots);
                    let l1 = t.sum_sq(gathered);
                    let l2 = t.sum_sq(ds);
                    t.add(l1, l2)
                },
                1e-5,
                false,
            );
            assert!(
                report.overall_max < 1e-5,
                "seed {seed_idx}: structural chain err {}",
                report.overall_max
            );
        }
    }
}
