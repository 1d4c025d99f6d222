//! Linkage-prediction evaluation: balanced true/false pair datasets from
//! held-out anchors, a single-layer classifier over concatenated mapped
//! embeddings, and accuracy/F1 over repeated runs.

use crate::adam::{adam_step, AdamState};
use crate::bench::{AnchorLinkSet, Split};
use crate::dense::{sigmoid_scalar, DenseMatrix};
use crate::error::{Error, Result};
use crate::loss::mapper_forward;
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::seed;
use crate::stats::mean_std;
use crate::tape::{Binding, Tape};
use crate::train::{TrainedModel, MAPPER_PREFIX};
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeSet;

/// Balanced classification dataset of `[f(x1_i) (+) x2_k]` rows.
#[derive(Clone, Debug)]
pub struct PairDataset<F> {
    pub vectors: DenseMatrix<F>,
    /// 1.0 for true identity links, 0.0 for sampled false links.
    pub labels: Vec<f64>,
    pub split: Split,
    /// The anchor pairs behind the positive rows (leakage instrumentation).
    pub positive_pairs: Vec<(usize, usize)>,
}

impl<F: Scalar> PairDataset<F> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Build the balanced dataset for one anchor split: one positive row per
/// anchor plus an equal number of uniformly sampled cross-network non-anchor
/// pairs (rejecting every known anchor pair, any split). Deterministic per
/// seed.
pub fn build_pair_dataset<F: Scalar>(
    split_anchors: &[(usize, usize)],
    all_anchors: &[(usize, usize)],
    model: &TrainedModel<F>,
    neg_seed: u64,
    split: Split,
) -> Result<PairDataset<F>> {
    if split_anchors.is_empty() {
        return Err(Error::Eval("empty anchor split".into()));
    }
    let (n1, n2) = (model.emb1.rows(), model.emb2.rows());
    let h = model.emb1.cols();
    let forbidden: BTreeSet<(usize, usize)> = all_anchors.iter().copied().collect();
    let needed = split_anchors.len();
    if n1 * n2 - forbidden.len() < needed {
        return Err(Error::Eval("too few possible negative pairs".into()));
    }

    let mut rng = seed::rng(neg_seed, "pair-neg", 0);
    let mut negatives: Vec<(usize, usize)> = Vec::with_capacity(needed);
    let mut taken: BTreeSet<(usize, usize)> = BTreeSet::new();
    while negatives.len() < needed {
        let p = (rng.random_range(0..n1), rng.random_range(0..n2));
        if forbidden.contains(&p) || !taken.insert(p) {
            continue;
        }
        negatives.push(p);
    }

    let rows = 2 * needed;
    let mut src = DenseMatrix::zeros(rows, h);
    for (r, &(i, _)) in split_anchors.iter().chain(&negatives).enumerate() {
        src.row_mut(r).copy_from_slice(model.emb1.row(i));
    }
    let mapped = mapper_forward(&src, &model.params, MAPPER_PREFIX, &model.mapper_cfg)?;
    let mut vectors = DenseMatrix::zeros(rows, 2 * h);
    let mut labels = Vec::with_capacity(rows);
    for (r, &(_, k)) in split_anchors.iter().chain(&negatives).enumerate() {
        vectors.row_mut(r)[..h].copy_from_slice(mapped.row(r));
        vectors.row_mut(r)[h..].copy_from_slice(model.emb2.row(k));
        labels.push(if r < needed { 1.0 } else { 0.0 });
    }
    Ok(PairDataset {
        vectors,
        labels,
        split,
        positive_pairs: split_anchors.to_vec(),
    })
}

/// Logistic unit over pair vectors.
#[derive(Clone, Debug)]
pub struct Classifier<F> {
    pub weights: DenseMatrix<F>,
    pub bias: DenseMatrix<F>,
}

impl<F: Scalar> Classifier<F> {
    /// Link probability per row.
    pub fn predict(&self, x: &DenseMatrix<F>) -> Result<Vec<F>> {
        let z = crate::dense::matmul(x, &self.weights)?;
        Ok((0..z.rows())
            .map(|r| sigmoid_scalar(z.get(r, 0) + self.bias.scalar_value()))
            .collect())
    }
}

/// Train the single-layer classifier: sigmoid output, cross-entropy loss,
/// 200 full-batch Adam steps. Weights start from a small seeded Xavier draw,
/// bias from zero; deterministic per seed.
pub fn train_classifier<F: Scalar>(pairs: &PairDataset<F>, cls_seed: u64) -> Result<Classifier<F>> {
    let dim = pairs.vectors.cols();
    let mut params = ParamSet::new();
    params.insert(
        "cls.w",
        DenseMatrix::glorot(dim, 1, &mut seed::rng(cls_seed, "cls-init", 0)),
    );
    params.insert("cls.b", DenseMatrix::zeros(1, 1));
    let mut adam = AdamState::new(&params, F::cast(0.01));

    let y = DenseMatrix::from_vec(
        pairs.len(),
        1,
        pairs.labels.iter().map(|&l| F::cast(l)).collect(),
    );
    for _ in 0..200 {
        let mut tape = Tape::new();
        let binding = Binding::bind(&mut tape, &params);
        let x = tape.constant(pairs.vectors.clone());
        let yn = tape.constant(y.clone());
        let w = binding.id("cls.w");
        let b = binding.id("cls.b");
        let z0 = tape.matmul(x, w);
        let z = tape.add_row(z0, b);
        // cross-entropy: mean(softplus(z) - y * z)
        let sp = tape.softplus(z);
        let yz = tape.hadamard(yn, z);
        let diff = tape.sub(sp, yz);
        let loss = tape.mean(diff);
        let grads = tape.backward(loss);
        let mut gset = params.zeros_like();
        for ((name, p), id) in params.iter().zip(binding.ids()) {
            *gset.get_mut(name).unwrap() = grads.wrt(*id, p.shape());
        }
        adam_step(&mut params, &gset, &mut adam)?;
    }
    Ok(Classifier {
        weights: params.get("cls.w").unwrap().clone(),
        bias: params.get("cls.b").unwrap().clone(),
    })
}

/// Metrics of one evaluation run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvalScores {
    pub accuracy: f64,
    /// Positive-class F1.
    pub f1: f64,
    /// Micro-averaged F1 over both classes (equals accuracy on single-label
    /// binary data; reported for completeness).
    pub micro_f1: f64,
}

pub(crate) fn scores_from_confusion(tp: usize, fp: usize, fn_: usize, tn: usize) -> EvalScores {
    let total = (tp + fp + fn_ + tn) as f64;
    let accuracy = (tp + tn) as f64 / total;
    let f1_den = 2 * tp + fp + fn_;
    let f1 = if f1_den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / f1_den as f64
    };
    // pooled over both classes: per-class TP counts every correct
    // prediction, per-class FP/FN every wrong one
    let pooled_tp = tp + tn;
    let pooled_fp = fp + fn_;
    let micro_f1 = 2.0 * pooled_tp as f64 / (2 * pooled_tp + pooled_fp + pooled_fp) as f64;
    EvalScores {
        accuracy,
        f1,
        micro_f1,
    }
}

/// Score a classifier on a pair dataset at threshold 0.5.
pub fn evaluate<F: Scalar>(cls: &Classifier<F>, pairs: &PairDataset<F>) -> Result<EvalScores> {
    if pairs.is_empty() {
        return Err(Error::Eval("empty test dataset".into()));
    }
    let probs = cls.predict(&pairs.vectors)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (p, &label) in probs.iter().zip(&pairs.labels) {
        let pred = p.widen() >= 0.5;
        match (pred, label == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(scores_from_confusion(tp, fp, fn_, tn))
}

/// Aggregated metrics over evaluation repeats.
#[derive(Clone, Debug, Serialize)]
pub struct EvalMetrics {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub micro_f1_mean: f64,
    pub micro_f1_std: f64,
    pub repeats: Vec<EvalScores>,
}

impl EvalMetrics {
    pub fn from_repeats(repeats: Vec<EvalScores>) -> Self {
        let acc: Vec<f64> = repeats.iter().map(|r| r.accuracy).collect();
        let f1: Vec<f64> = repeats.iter().map(|r| r.f1).collect();
        let mf1: Vec<f64> = repeats.iter().map(|r| r.micro_f1).collect();
        let (accuracy_mean, accuracy_std) = mean_std(&acc);
        let (f1_mean, f1_std) = mean_std(&f1);
        let (micro_f1_mean, micro_f1_std) = mean_std(&mf1);
        Self {
            accuracy_mean,
            accuracy_std,
            f1_mean,
            f1_std,
            micro_f1_mean,
            micro_f1_std,
            repeats,
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.repeats.iter().map(|r| r.accuracy).collect()
    }
}

/// Run the full protocol: per repeat, resample negative pairs for the train
/// and test splits, retrain the classifier and score the test pairs.
/// Deterministic per master seed.
pub fn repeat_eval<F: Scalar>(
    model: &TrainedModel<F>,
    anchors: &AnchorLinkSet,
    n_repeats: usize,
    master_seed: u64,
) -> Result<EvalMetrics> {
    let train_anchors = anchors.of_split(Split::Train);
    let test_anchors = anchors.of_split(Split::Test);
    if train_anchors.is_empty() || test_anchors.is_empty() {
        return Err(Error::Eval("need nonempty train and test splits".into()));
    }
    let all = anchors.all_pairs();
    let mut repeats = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let train_pairs = build_pair_dataset(
            &train_anchors,
            &all,
            model,
            seed::derive(master_seed, "eval-neg-train", r as u64),
            Split::Train,
        )?;
        let test_pairs = build_pair_dataset(
            &test_anchors,
            &all,
            model,
            seed::derive(master_seed, "eval-neg-test", r as u64),
            Split::Test,
        )?;
        let cls = train_classifier(&train_pairs, seed::derive(master_seed, "eval-cls", r as u64))?;
        repeats.push(evaluate(&cls, &test_pairs)?);
    }
    Ok(EvalMetrics::from_repeats(repeats))
}
