//! Semi-supervised joint training of both encoders and the cross-network
//! mapper over the combined loss, with per-epoch negative resampling,
//! validation-based early stopping and ablation configurations.

use crate::adam::{adam_step, AdamState};
use crate::dense::DenseMatrix;
use crate::encoder::{encode_on_tape, AggMode, EncoderConfig, GraphContext, SkipCombine};
use crate::error::{Error, Result};
use crate::features::{init_features, FeatureInitSpec, FeatureMethod};
use crate::graph::{proximity_operator, Graph, SparseSymMatrix};
use crate::loss::{
    global_loss_on_tape, local_loss_on_tape, match_loss, match_loss_on_tape, negative_sample,
    total_loss, LossBreakdown, MapperConfig, NegSampleMask,
};
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::seed;
use crate::tape::{Binding, NodeId, Tape};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const ENC1_PREFIX: &str = "enc1";
pub const ENC2_PREFIX: &str = "enc2";
pub const MAPPER_PREFIX: &str = "mapper";

/// Training variants: the loss ablations zero a weight, the aggregator
/// ablations drop one aggregation path entirely (equivalent to zeroing and
/// freezing its weights).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    /// Remove the neighborhood proximity term (beta = 0).
    NoLocal,
    /// Remove the reconstruction term (alpha = 0).
    NoGlobal,
    /// Remove both regularizers (alpha = beta = 0).
    NoReconstruction,
    /// Spectral aggregator only.
    GtaOnly,
    /// Attention aggregator only.
    LtaOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::NoLocal,
        Ablation::NoGlobal,
        Ablation::NoReconstruction,
        Ablation::GtaOnly,
        Ablation::LtaOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoLocal => "no_local",
            Ablation::NoGlobal => "no_global",
            Ablation::NoReconstruction => "no_reconstruction",
            Ablation::GtaOnly => "gta_only",
            Ablation::LtaOnly => "lta_only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation kind {s:?}")))
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Full training configuration. Defaults: alpha 10, beta 1, 1000 epochs,
/// Adam lr 0.01, early-stop patience 50, 64-dim walk features, 3-layer
/// encoder with 128-dim hidden space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub patience: usize,
    pub ablation: Ablation,
    pub feature_method: String,
    pub feature_file1: Option<String>,
    pub feature_file2: Option<String>,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub attention_self: bool,
    pub skip_sum: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 1.0,
            epochs: 1000,
            lr: 0.01,
            seed: 7,
            patience: 50,
            ablation: Ablation::Full,
            feature_method: "walk".into(),
            feature_file1: None,
            feature_file2: None,
            feature_dim: 64,
            hidden_dim: 128,
            layers: 3,
            attention_self: true,
            skip_sum: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Config("alpha and beta must be >= 0".into()));
        }
        if self.epochs == 0 || self.feature_dim == 0 || self.hidden_dim == 0 || self.layers == 0 {
            return Err(Error::Config("epochs and dimensions must be positive".into()));
        }
        match self.ablation {
            Ablation::NoLocal if self.beta != 0.0 => {
                Err(Error::Config("no_local requires beta = 0".into()))
            }
            Ablation::NoGlobal if self.alpha != 0.0 => {
                Err(Error::Config("no_global requires alpha = 0".into()))
            }
            Ablation::NoReconstruction if self.alpha != 0.0 || self.beta != 0.0 => {
                Err(Error::Config("no_reconstruction requires alpha = beta = 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            input_dim: self.feature_dim,
            hidden_dim: self.hidden_dim,
            attn_dim: self.hidden_dim,
            layers: self.layers,
            mode: match self.ablation {
                Ablation::GtaOnly => AggMode::SpectralOnly,
                Ablation::LtaOnly => AggMode::AttentionOnly,
                _ => AggMode::Both,
            },
            skip: if self.skip_sum {
                SkipCombine::Sum
            } else {
                SkipCombine::Concat
            },
            attention_self: self.attention_self,
        }
    }

    pub fn mapper_config(&self) -> MapperConfig {
        MapperConfig::new(self.hidden_dim)
    }

    fn feature_spec(&self, network: usize) -> Result<FeatureInitSpec> {
        let file = if network == 1 {
            &self.feature_file1
        } else {
            &self.feature_file2
        };
        let method = match self.feature_method.as_str() {
            "walk" => FeatureMethod::WalkSkipgram,
            "spectral" => FeatureMethod::Spectral,
            "random" => FeatureMethod::Random,
            "file" => FeatureMethod::File(
                file.clone()
                    .ok_or_else(|| {
                        Error::Config(format!("feature method 'file' needs a path for network {network}"))
                    })?
                    .into(),
            ),
            other => return Err(Error::Config(format!("unknown feature method {other:?}"))),
        };
        Ok(FeatureInitSpec::new(
            method,
            self.feature_dim,
            seed::derive(self.seed, "features", network as u64),
        ))
    }
}

/// Derive the configuration for an ablation variant.
pub fn make_ablation(cfg: &TrainConfig, kind: Ablation) -> TrainConfig {
    let mut out = cfg.clone();
    out.ablation = kind;
    match kind {
        Ablation::Full | Ablation::GtaOnly | Ablation::LtaOnly => {}
        Ablation::NoLocal => out.beta = 0.0,
        Ablation::NoGlobal => out.alpha = 0.0,
        Ablation::NoReconstruction => {
            out.alpha = 0.0;
            out.beta = 0.0;
        }
    }
    out
}

/// Everything constant across epochs that the combined loss graph needs.
pub struct LossInputs<'a, F: Scalar> {
    pub enc_cfg: &'a EncoderConfig,
    pub mapper_cfg: &'a MapperConfig,
    pub ctx1: &'a GraphContext<F>,
    pub ctx2: &'a GraphContext<F>,
    pub prox1: &'a Arc<SparseSymMatrix<F>>,
    pub prox2: &'a Arc<SparseSymMatrix<F>>,
    pub x1: &'a DenseMatrix<F>,
    pub x2: &'a DenseMatrix<F>,
    pub anchors_train: &'a Arc<Vec<(usize, usize)>>,
    pub alpha: f64,
    pub beta: f64,
}

/// Node ids of the combined loss graph parts.
pub struct LossNodes {
    pub total: NodeId,
    pub emb1: NodeId,
    pub emb2: NodeId,
    pub global1: Option<NodeId>,
    pub global2: Option<NodeId>,
    pub local1: Option<NodeId>,
    pub local2: Option<NodeId>,
    pub matching: NodeId,
}

/// Build the full weighted loss on a tape: both encoders, the (weighted)
/// reconstruction and proximity terms, and the anchor mapping term.
pub fn build_total_loss<F: Scalar>(
    tape: &mut Tape<F>,
    binding: &Binding,
    inputs: &LossInputs<'_, F>,
    mask1: Option<&NegSampleMask>,
    mask2: Option<&NegSampleMask>,
) -> LossNodes {
    let x1 = tape.constant(inputs.x1.clone());
    let x2 = tape.constant(inputs.x2.clone());
    let emb1 = encode_on_tape(tape, inputs.enc_cfg, inputs.ctx1, binding, ENC1_PREFIX, x1);
    let emb2 = encode_on_tape(tape, inputs.enc_cfg, inputs.ctx2, binding, ENC2_PREFIX, x2);

    let matching = match_loss_on_tape(
        tape,
        binding,
        MAPPER_PREFIX,
        inputs.mapper_cfg,
        emb1,
        emb2,
        inputs.anchors_train,
    );
    let mut total = matching;

    let (mut global1, mut global2) = (None, None);
    if inputs.alpha > 0.0 {
        let g1 = global_loss_on_tape(tape, emb1, mask1.expect("mask1 required when alpha > 0"));
        let g2 = global_loss_on_tape(tape, emb2, mask2.expect("mask2 required when alpha > 0"));
        let sum = tape.add(g1, g2);
        let weighted = tape.scale(F::cast(inputs.alpha), sum);
        total = tape.add(total, weighted);
        global1 = Some(g1);
        global2 = Some(g2);
    }
    let (mut local1, mut local2) = (None, None);
    if inputs.beta > 0.0 {
        let l1 = local_loss_on_tape(tape, emb1, inputs.prox1);
        let l2 = local_loss_on_tape(tape, emb2, inputs.prox2);
        let sum = tape.add(l1, l2);
        let weighted = tape.scale(F::cast(inputs.beta), sum);
        total = tape.add(total, weighted);
        local1 = Some(l1);
        local2 = Some(l2);
    }
    LossNodes {
        total,
        emb1,
        emb2,
        global1,
        global2,
        local1,
        local2,
        matching,
    }
}

/// One epoch's history entry.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(flatten)]
    pub losses: LossBreakdown,
    pub val_match: Option<f64>,
}

/// Result of a training run: trained blocks, best-epoch embeddings, the loss
/// history and optimizer state for exact resume.
#[derive(Clone, Debug)]
pub struct TrainedModel<F: Scalar> {
    pub params: ParamSet<F>,
    pub emb1: DenseMatrix<F>,
    pub emb2: DenseMatrix<F>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub enc_cfg: EncoderConfig,
    pub mapper_cfg: MapperConfig,
    pub adam: AdamState<F>,
}

impl<F: Scalar> TrainedModel<F> {
    /// Stable fingerprint of the trained blocks and embeddings.
    pub fn checksum(&self) -> String {
        let mut all = self.params.clone();
        all.insert("emb.x1", self.emb1.clone());
        all.insert("emb.x2", self.emb2.clone());
        let text = all.canonical_string();
        // djb2 over the canonical serialization
        let mut h: u64 = 5381;
        for b in text.bytes() {
            h = h.wrapping_mul(33) ^ u64::from(b);
        }
        format!("{h:016x}")
    }

    /// Checkpoint container: trained blocks plus embeddings and Adam moments.
    pub fn to_checkpoint(&self) -> ParamSet<F> {
        let mut all = self.params.clone();
        all.insert("emb.x1", self.emb1.clone());
        all.insert("emb.x2", self.emb2.clone());
        for (name, m) in self.params.iter() {
            all.insert(
                format!("adam.m.{name}"),
                self.adam.first_moment(name).expect("moment block").clone(),
            );
            all.insert(
                format!("adam.v.{name}"),
                self.adam.second_moment(name).expect("moment block").clone(),
            );
        }
        all.insert("adam.step", DenseMatrix::scalar(F::cast(self.adam.step as f64)));
        all
    }

    /// Rebuild from a checkpoint container written by [`Self::to_checkpoint`].
    pub fn from_checkpoint(
        container: &ParamSet<F>,
        enc_cfg: EncoderConfig,
        mapper_cfg: MapperConfig,
        lr: f64,
    ) -> Result<Self> {
        let mut params = ParamSet::new();
        for (name, m) in container.iter() {
            if !name.starts_with("emb.") && !name.starts_with("adam.") {
                params.insert(name, m.clone());
            }
        }
        let emb1 = container
            .get("emb.x1")
            .ok_or_else(|| Error::Checkpoint("missing emb.x1".into()))?
            .clone();
        let emb2 = container
            .get("emb.x2")
            .ok_or_else(|| Error::Checkpoint("missing emb.x2".into()))?
            .clone();
        let mut adam = AdamState::new(&params, F::cast(lr));
        adam.step = container
            .get("adam.step")
            .map(|m| m.scalar_value().widen() as u64)
            .unwrap_or(0);
        let mut m_set = params.zeros_like();
        let mut v_set = params.zeros_like();
        for (name, _) in params.iter() {
            if let (Some(m), Some(v)) = (
                container.get(&format!("adam.m.{name}")),
                container.get(&format!("adam.v.{name}")),
            ) {
                *m_set.get_mut(name).unwrap() = m.clone();
                *v_set.get_mut(name).unwrap() = v.clone();
            }
        }
        adam.restore_moments(m_set, v_set);
        Ok(Self {
            params,
            emb1,
            emb2,
            history: Vec::new(),
            best_epoch: 0,
            enc_cfg,
            mapper_cfg,
            adam,
        })
    }
}

fn check_finite_parts(parts: &[(&str, f64)], epoch: usize) -> Result<()> {
    for (term, v) in parts {
        if !v.is_finite() {
            return Err(Error::Diverged {
                epoch,
                term: (*term).to_string(),
            });
        }
    }
    Ok(())
}

/// Train both encoders and the mapper jointly (full batch). Each epoch
/// resamples negatives, runs the combined forward/backward pass and applies
/// one Adam step; the returned model is the best-validation snapshot.
/// Deterministic per `cfg.seed`.
pub fn train<F: Scalar>(
    g1: &Graph,
    g2: &Graph,
    anchors_train: &[(usize, usize)],
    anchors_val: &[(usize, usize)],
    cfg: &TrainConfig,
) -> Result<TrainedModel<F>> {
    train_from(g1, g2, anchors_train, anchors_val, cfg, None)
}

/// [`train`], optionally resuming from a checkpointed model's blocks and
/// optimizer state.
pub fn train_from<F: Scalar>(
    g1: &Graph,
    g2: &Graph,
    anchors_train: &[(usize, usize)],
    anchors_val: &[(usize, usize)],
    cfg: &TrainConfig,
    resume: Option<&TrainedModel<F>>,
) -> Result<TrainedModel<F>> {
    cfg.validate()?;
    if anchors_train.is_empty() {
        return Err(Error::Config("training anchors must be nonempty".into()));
    }
    for &(i, k) in anchors_train.iter().chain(anchors_val) {
        if i >= g1.node_count() || k >= g2.node_count() {
            return Err(Error::Config(format!("anchor ({i},{k}) out of range")));
        }
    }

    let enc_cfg = cfg.encoder_config();
    let mapper_cfg = cfg.mapper_config();
    let x1: DenseMatrix<F> = init_features(g1, &cfg.feature_spec(1)?)?;
    let x2: DenseMatrix<F> = init_features(g2, &cfg.feature_spec(2)?)?;

    let ctx1 = GraphContext::new(g1, enc_cfg.attention_self)?;
    let ctx2 = GraphContext::new(g2, enc_cfg.attention_self)?;
    let prox1 = Arc::new(proximity_operator::<F>(g1));
    let prox2 = Arc::new(proximity_operator::<F>(g2));
    let anchors = Arc::new(anchors_train.to_vec());

    let (mut params, mut adam) = match resume {
        Some(model) => (model.params.clone(), model.adam.clone()),
        None => {
            let mut p = ParamSet::new();
            enc_cfg.init_params(&mut p, ENC1_PREFIX, &mut seed::rng(cfg.seed, "init-enc", 1));
            enc_cfg.init_params(&mut p, ENC2_PREFIX, &mut seed::rng(cfg.seed, "init-enc", 2));
            mapper_cfg.init_params(&mut p, MAPPER_PREFIX, &mut seed::rng(cfg.seed, "init-map", 0));
            let adam = AdamState::new(&p, F::cast(cfg.lr));
            (p, adam)
        }
    };

    let needs_masks = cfg.alpha > 0.0;
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(f64, usize, ParamSet<F>, DenseMatrix<F>, DenseMatrix<F>, AdamState<F>)> =
        None;
    let mut stall = 0usize;

    for epoch in 0..cfg.epochs {
        let mask1 = if needs_masks {
            Some(negative_sample(g1, seed::derive(cfg.seed, "neg1", epoch as u64))?)
        } else {
            None
        };
        let mask2 = if needs_masks {
            Some(negative_sample(g2, seed::derive(cfg.seed, "neg2", epoch as u64))?)
        } else {
            None
        };

        let mut tape = Tape::new();
        let binding = Binding::bind(&mut tape, &params);
        let inputs = LossInputs {
            enc_cfg: &enc_cfg,
            mapper_cfg: &mapper_cfg,
            ctx1: &ctx1,
            ctx2: &ctx2,
            prox1: &prox1,
            prox2: &prox2,
            x1: &x1,
            x2: &x2,
            anchors_train: &anchors,
            alpha: cfg.alpha,
            beta: cfg.beta,
        };
        let nodes = build_total_loss(&mut tape, &binding, &inputs, mask1.as_ref(), mask2.as_ref());

        let part = |id: Option<NodeId>| id.map_or(0.0, |i| tape.scalar_value(i).widen());
        let breakdown = total_loss(
            part(nodes.global1),
            part(nodes.global2),
            part(nodes.local1),
            part(nodes.local2),
            tape.scalar_value(nodes.matching).widen(),
            cfg.alpha,
            cfg.beta,
        );
        check_finite_parts(
            &[
                ("global_sn1", breakdown.global_sn1),
                ("global_sn2", breakdown.global_sn2),
                ("local_sn1", breakdown.local_sn1),
                ("local_sn2", breakdown.local_sn2),
                ("match", breakdown.matching),
                ("total", breakdown.total),
            ],
            epoch,
        )?;

        // validation loss on the pre-step embeddings (same params the forward
        // pass used)
        let val_match = if anchors_val.is_empty() {
            None
        } else {
            Some(
                match_loss(
                    anchors_val,
                    tape.value(nodes.emb1),
                    tape.value(nodes.emb2),
                    &params,
                    MAPPER_PREFIX,
                    &mapper_cfg,
                )?
                .widen(),
            )
        };
        history.push(EpochRecord {
            epoch,
            losses: breakdown,
            val_match,
        });

        let tracked = val_match.unwrap_or(breakdown.total);
        let improved = best.as_ref().map_or(true, |(b, ..)| tracked < *b);
        if improved {
            best = Some((
                tracked,
                epoch,
                params.clone(),
                tape.value(nodes.emb1).clone(),
                tape.value(nodes.emb2).clone(),
                adam.clone(),
            ));
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }

        // gradient step
        let grads_by_id = tape.backward(nodes.total);
        let mut grads = params.zeros_like();
        for ((name, p), id) in params.iter().zip(binding.ids()) {
            *grads.get_mut(name).unwrap() = grads_by_id.wrt(*id, p.shape());
        }
        adam_step(&mut params, &grads, &mut adam)?;
        for (_, block) in params.iter() {
            if !block.is_finite() || block.max_abs().widen() > 1e100 {
                return Err(Error::Diverged {
                    epoch,
                    term: "parameters".into(),
                });
            }
        }
    }

    let (_, best_epoch, best_params, emb1, emb2, best_adam) =
        best.expect("at least one epoch ran");
    Ok(TrainedModel {
        params: best_params,
        emb1,
        emb2,
        history,
        best_epoch,
        enc_cfg,
        mapper_cfg,
        adam: best_adam,
    })
}
