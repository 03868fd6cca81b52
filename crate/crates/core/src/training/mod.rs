//! Adapter training: losses, gradients, SGD, and the training loops.
//!
//! Only adapter factors, adapter biases, and (in regression mode) the linear
//! head train; the backbone and the vocabulary head stay frozen. Each batch
//! builds a fresh gradient tape over the factored adapter path, so the dense
//! `d × d` update is never materialised during training.
//!
//! Two loss modes exist. `raft` scores a sample by the probability-weighted
//! label expectation read off the vocabulary head and penalises its squared
//! distance to the gold label. `regression` reads a scalar from a linear
//! head on the adapted embedding and penalises its squared error directly.
//!
//! [`train_all`] drives full runs: per-attribute mode trains the nine
//! adapters sequentially in canonical attribute order, shared mode trains
//! one adapter on the pooled (sample, attribute) stream. Both keep the
//! parameters from the epoch with the strictly lowest validation MSE.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FrozenSpec, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use crate::adapters::{AdapterError, AdapterMode, AdapterParams, AdapterRegistry};
use crate::backbone::Backbone;
use crate::dataset::{concat_comment_channel, jitter_features, Attribute, AttributeMap, DatasetError, Sample, SCORE_MAX, SCORE_MIN};
use crate::decoding::{rail_decode, regress_decode, DecodeError, RegressionHead, ScoreDistribution, VocabHead, SCORE_VALUES};
use crate::metrics::{report, MetricError, MetricReport, PredictionSet};
use crate::num::{tape::Tape, Matrix, NumError, Vector};
use crate::seed::rng_for;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("gold label {0} outside {min}..={max}", min = SCORE_MIN, max = SCORE_MAX)]
    InvalidGold(u8),
    #[error("training diverged ({scope}, epoch {epoch}, batch {batch}): loss is not finite")]
    Diverged { scope: String, epoch: usize, batch: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Which training objective drives the adapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Squared error of the probability-weighted label expectation.
    Raft,
    /// Squared error of a linear regression head on the adapted embedding.
    Regression,
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossMode::Raft => write!(f, "raft"),
            LossMode::Regression => write!(f, "regression"),
        }
    }
}

/// Full training configuration. Every field has a default, so a config file
/// may specify only what it overrides; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub adapter_mode: AdapterMode,
    pub loss_mode: LossMode,
    /// Embedding width `d` of the frozen backbone.
    pub embed_dim: usize,
    /// Adapter rank `r`.
    pub rank: usize,
    /// Adapter scale numerator; the update is scaled by `alpha / rank`.
    pub alpha: f64,
    pub learning_rate: f64,
    /// Momentum coefficient; 0 is plain SGD.
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Use the comment channel when the data provides one.
    pub use_comments: bool,
    /// Multiplicative feature jitter magnitude per epoch; 0 disables.
    pub jitter: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            adapter_mode: AdapterMode::PerAttribute,
            loss_mode: LossMode::Raft,
            embed_dim: 32,
            rank: 8,
            alpha: 16.0,
            learning_rate: 2e-5,
            momentum: 0.0,
            batch_size: 16,
            epochs: 30,
            seed: 7,
            use_comments: false,
            jitter: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.embed_dim < 2 {
            return Err(TrainError::Config(format!(
                "embed_dim must be at least 2 (one slot is reserved for attribute conditioning), got {}",
                self.embed_dim
            )));
        }
        if self.rank == 0 || self.rank > self.embed_dim {
            return Err(TrainError::Config(format!(
                "rank must satisfy 0 < rank <= embed_dim, got rank={} with embed_dim={}",
                self.rank, self.embed_dim
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(TrainError::Config(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(TrainError::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if !self.jitter.is_finite() || self.jitter < 0.0 {
            return Err(TrainError::Config(format!("jitter must be finite and >= 0, got {}", self.jitter)));
        }
        Ok(())
    }
}

/// Conditioning code for an attribute, evenly spaced over `[-1, 1]` in
/// canonical order. Written into the reserved last embedding slot so the
/// projection knows which rubric attribute it is scoring.
pub fn attribute_code(attr: Attribute) -> f64 {
    (attr.index() as f64 - 4.0) / 4.0
}

/// Returns `z` with its reserved last slot overwritten by the attribute
/// code. Applied identically in shared and per-attribute mode.
pub fn condition_embedding(z: &Vector, attr: Attribute) -> Vector {
    let mut out = z.clone();
    let last = out.len() - 1;
    out[last] = attribute_code(attr);
    out
}

/// Squared error between the probability-weighted label expectation and the
/// gold label.
pub fn raft_loss(dist: &ScoreDistribution, gold: u8) -> Result<f64, TrainError> {
    check_gold(gold)?;
    let diff = rail_decode(dist) - gold as f64;
    Ok(diff * diff)
}

/// Squared error between a raw regression prediction and the gold label.
pub fn regression_loss(pred: f64, gold: u8) -> Result<f64, TrainError> {
    check_gold(gold)?;
    let diff = pred - gold as f64;
    Ok(diff * diff)
}

fn check_gold(gold: u8) -> Result<(), TrainError> {
    if !(SCORE_MIN..=SCORE_MAX).contains(&gold) {
        return Err(TrainError::InvalidGold(gold));
    }
    Ok(())
}

/// The complete model: frozen backbone and vocabulary head, trainable
/// adapters and regression heads, plus the configuration that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub backbone: Backbone,
    pub vocab: VocabHead,
    pub adapters: AdapterRegistry,
    /// One regression head per adapter slot (zero-initialised; only trained
    /// in regression mode, but always present so checkpoints are uniform).
    pub heads: Vec<RegressionHead>,
    /// Image feature width the model was built for.
    pub d_img: usize,
    /// Comment channel width baked into the input (0 when comments are
    /// unused).
    pub d_cmt: usize,
    pub config: TrainConfig,
    /// Completed training epochs.
    pub epochs_trained: usize,
}

impl ModelState {
    /// Builds a fresh model for `d_img`-wide image features and an optional
    /// comment channel. All randomness derives from `config.seed`.
    pub fn init(d_img: usize, d_cmt: usize, config: TrainConfig) -> Result<ModelState, TrainError> {
        config.validate()?;
        if d_img == 0 {
            return Err(TrainError::Config("d_img must be positive".into()));
        }
        let d = config.embed_dim;
        let backbone = Backbone::init(d_img + d_cmt, d, config.seed)?;
        let vocab = VocabHead::init(d, config.seed)?;
        let adapters = AdapterRegistry::init(config.adapter_mode, d, config.rank, config.alpha, config.seed)?;
        let heads = (0..config.adapter_mode.slot_count()).map(|_| RegressionHead::init(d)).collect();
        Ok(ModelState {
            backbone,
            vocab,
            adapters,
            heads,
            d_img,
            d_cmt,
            config,
            epochs_trained: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d_img + self.d_cmt
    }

    /// Raw (unconditioned) embedding of a sample, including the comment
    /// channel when the model was built with one.
    pub fn embed(&self, sample: &Sample) -> Result<Vector, TrainError> {
        if sample.features.len() != self.d_img {
            return Err(TrainError::Dataset(DatasetError::Validation {
                id: sample.id.clone(),
                message: format!(
                    "feature width {} does not match the model's expected {}",
                    sample.features.len(),
                    self.d_img
                ),
            }));
        }
        let input = if self.d_cmt > 0 {
            concat_comment_channel(sample, self.d_cmt)?
        } else {
            sample.features.clone()
        };
        Ok(self.backbone.encode(&input)?)
    }

    /// Conditioned, adapted projection of an embedding for one attribute.
    pub fn hidden(&self, z: &Vector, attr: Attribute) -> Result<Vector, TrainError> {
        let z_cond = condition_embedding(z, attr);
        Ok(self.adapters.get(attr).adapted_projection(self.backbone.w0(), &z_cond)?)
    }

    /// Raw score prediction for an embedding under the configured loss mode:
    /// the probability-weighted label expectation for `raft`, the clamped
    /// regression output for `regression`.
    pub fn predict_from_embedding(&self, z: &Vector, attr: Attribute) -> Result<f64, TrainError> {
        let hidden = self.hidden(z, attr)?;
        match self.config.loss_mode {
            LossMode::Raft => {
                let logits = self.vocab.score_logits(&hidden)?;
                let dist = ScoreDistribution::from_logits(&logits)?;
                Ok(rail_decode(&dist))
            }
            LossMode::Regression => {
                let head = &self.heads[self.adapters.slot_index(attr)];
                Ok(regress_decode(head, &hidden)?)
            }
        }
    }

    /// Predicted score distribution for an embedding (raft decoding path).
    pub fn predict_distribution(&self, z: &Vector, attr: Attribute) -> Result<ScoreDistribution, TrainError> {
        let hidden = self.hidden(z, attr)?;
        let logits = self.vocab.score_logits(&hidden)?;
        Ok(ScoreDistribution::from_logits(&logits)?)
    }

    pub fn predict(&self, sample: &Sample, attr: Attribute) -> Result<f64, TrainError> {
        let z = self.embed(sample)?;
        self.predict_from_embedding(&z, attr)
    }
}

/// Raw predictions for every (sample, attribute) pair, aligned with golds.
pub fn predictions(state: &ModelState, samples: &[Sample]) -> Result<PredictionSet, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Dataset(DatasetError::Insufficient(
            "cannot predict on an empty sample collection".into(),
        )));
    }
    let embeddings: Vec<Vector> = samples.iter().map(|s| state.embed(s)).collect::<Result<_, _>>()?;
    let mut preds: Vec<Vec<f64>> = Vec::with_capacity(Attribute::COUNT);
    for attr in Attribute::ALL {
        let mut col = Vec::with_capacity(samples.len());
        for z in &embeddings {
            col.push(state.predict_from_embedding(z, attr)?);
        }
        preds.push(col);
    }
    let mut preds_iter = preds.into_iter();
    let pred_map = AttributeMap::from_fn(|_| preds_iter.next().expect("nine prediction columns"));
    let gold_map = AttributeMap::from_fn(|attr| samples.iter().map(|s| s.scores.get(attr)).collect());
    Ok(PredictionSet::new(pred_map, gold_map)?)
}

/// Full metric report of a model on a sample collection.
pub fn evaluate(state: &ModelState, samples: &[Sample]) -> Result<MetricReport, TrainError> {
    Ok(report(&predictions(state, samples)?)?)
}

/// Mean squared error of raw predictions for one attribute.
pub fn attribute_mse(state: &ModelState, samples: &[Sample], attr: Attribute) -> Result<f64, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Dataset(DatasetError::Insufficient(
            "cannot score an empty sample collection".into(),
        )));
    }
    let mut sum = 0.0;
    for sample in samples {
        let pred = state.predict(sample, attr)?;
        let diff = pred - sample.scores.get(attr) as f64;
        sum += diff * diff;
    }
    Ok(sum / samples.len() as f64)
}

/// Gradients of a batch loss with respect to one adapter slot (and, in
/// regression mode, its head).
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub a: Matrix,
    pub b: Matrix,
    pub bias: Vector,
    pub head_w: Option<Vector>,
    pub head_b: Option<f64>,
}

struct PairItem {
    z_cond: Vector,
    w0z: Vector,
    gold: f64,
}

/// Embeds and conditions every (sample index, attribute) pair. `jitter_epoch`
/// applies the configured per-epoch feature jitter (training only).
fn prepare_items(
    state: &ModelState,
    samples: &[Sample],
    pairs: &[(usize, Attribute)],
    jitter_epoch: Option<usize>,
) -> Result<Vec<PairItem>, TrainError> {
    let mut cache: std::collections::BTreeMap<usize, Vector> = std::collections::BTreeMap::new();
    let mut items = Vec::with_capacity(pairs.len());
    for &(idx, attr) in pairs {
        let sample = samples.get(idx).ok_or_else(|| {
            TrainError::Config(format!("pair references sample index {idx}, but only {} samples given", samples.len()))
        })?;
        if let std::collections::btree_map::Entry::Vacant(slot) = cache.entry(idx) {
            let z = match jitter_epoch {
                Some(epoch) if state.config.jitter > 0.0 => {
                    let seed = crate::seed::derive_seed(state.config.seed, &format!("train/jitter/{epoch}/{idx}"));
                    let jittered = jitter_features(sample, state.config.jitter, seed)?;
                    state.embed(&jittered)?
                }
                _ => state.embed(sample)?,
            };
            slot.insert(z);
        }
        let z_cond = condition_embedding(&cache[&idx], attr);
        let w0z = state.backbone.w0().matvec(&z_cond)?;
        let gold = sample.scores.get(attr);
        check_gold(gold)?;
        items.push(PairItem { z_cond, w0z, gold: gold as f64 });
    }
    Ok(items)
}

/// Builds the batch tape over one adapter slot and returns the mean loss,
/// optionally with gradients. The dense update is never formed: the tape
/// sees `W0·z` as a constant and the adapter only through its factors.
fn tape_step(
    state: &ModelState,
    slot: usize,
    items: &[PairItem],
    want_grads: bool,
) -> Result<(f64, Option<LossGradients>), TrainError> {
    let adapter = &state.adapters.slots()[slot];
    let head = &state.heads[slot];
    let mut tape = Tape::new();
    let a_id = tape.param_matrix(&adapter.a);
    let b_id = tape.param_matrix(&adapter.b);
    let bias_id = tape.param(adapter.bias.as_slice());
    let raft = state.config.loss_mode == LossMode::Raft;
    let vocab_id = raft.then(|| tape.constant_matrix(state.vocab.weights()));
    let head_ids = (!raft).then(|| (tape.param(head.w.as_slice()), tape.param_scalar(head.b)));

    let mut errors = Vec::with_capacity(items.len());
    for item in items {
        let z_id = tape.constant(item.z_cond.as_slice());
        let down = tape.matvec(a_id, z_id)?;
        let up = tape.matvec(b_id, down)?;
        let scaled = tape.scale(up, adapter.scaling());
        let base_id = tape.constant(item.w0z.as_slice());
        let pre = tape.add(base_id, scaled)?;
        let hidden = tape.add(pre, bias_id)?;
        let err = if let Some(vocab_id) = vocab_id {
            let logits = tape.matvec(vocab_id, hidden)?;
            let probs = tape.softmax(logits)?;
            let expectation = tape.weighted_sum(probs, &SCORE_VALUES)?;
            tape.squared_error(expectation, item.gold)?
        } else {
            let (w_id, b_id) = head_ids.expect("regression head ids");
            let raw = tape.dot(w_id, hidden)?;
            let pred = tape.add(raw, b_id)?;
            tape.squared_error(pred, item.gold)?
        };
        errors.push(err);
    }
    let loss_id = tape.mean(&errors)?;
    let loss = tape.value(loss_id)[0];
    if !want_grads {
        return Ok((loss, None));
    }
    let grads = tape.backward(loss_id)?;
    let out = LossGradients {
        a: grads.wrt_mat(a_id)?.clone(),
        b: grads.wrt_mat(b_id)?.clone(),
        bias: Vector::new(grads.wrt(bias_id)?.to_vec()),
        head_w: head_ids
            .map(|(w_id, _)| grads.wrt(w_id).map(|g| Vector::new(g.to_vec())))
            .transpose()?,
        head_b: head_ids.map(|(_, b_id)| grads.wrt(b_id).map(|g| g[0])).transpose()?,
    };
    Ok((loss, Some(out)))
}

fn single_slot(state: &ModelState, pairs: &[(usize, Attribute)]) -> Result<usize, TrainError> {
    let first = pairs
        .first()
        .ok_or_else(|| TrainError::Config("a batch must contain at least one pair".into()))?;
    let slot = state.adapters.slot_index(first.1);
    for &(_, attr) in pairs {
        if state.adapters.slot_index(attr) != slot {
            return Err(TrainError::Config(
                "a gradient batch must target a single adapter slot; in per-attribute mode all pairs must share one attribute".into(),
            ));
        }
    }
    Ok(slot)
}

/// Mean loss of a batch of (sample index, attribute) pairs under the current
/// parameters. All pairs must resolve to one adapter slot.
pub fn batch_loss(state: &ModelState, samples: &[Sample], pairs: &[(usize, Attribute)]) -> Result<f64, TrainError> {
    let slot = single_slot(state, pairs)?;
    let items = prepare_items(state, samples, pairs, None)?;
    Ok(tape_step(state, slot, &items, false)?.0)
}

/// Mean loss and its gradients for a batch of pairs sharing one adapter
/// slot. This is the exact quantity the SGD step consumes.
pub fn batch_gradients(
    state: &ModelState,
    samples: &[Sample],
    pairs: &[(usize, Attribute)],
) -> Result<(f64, LossGradients), TrainError> {
    let slot = single_slot(state, pairs)?;
    let items = prepare_items(state, samples, pairs, None)?;
    let (loss, grads) = tape_step(state, slot, &items, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

/// SGD velocity buffers for one adapter slot and its head.
struct Velocity {
    a: Matrix,
    b: Matrix,
    bias: Vector,
    head_w: Vector,
    head_b: f64,
}

impl Velocity {
    fn zeros(adapter: &AdapterParams, head: &RegressionHead) -> Velocity {
        Velocity {
            a: Matrix::zeros(adapter.a.rows(), adapter.a.cols()),
            b: Matrix::zeros(adapter.b.rows(), adapter.b.cols()),
            bias: Vector::zeros(adapter.bias.len()),
            head_w: Vector::zeros(head.w.len()),
            head_b: 0.0,
        }
    }
}

fn sgd_axis(params: &mut [f64], grads: &[f64], vel: &mut [f64], lr: f64, momentum: f64) {
    for ((p, g), v) in params.iter_mut().zip(grads).zip(vel) {
        *v = momentum * *v + *g;
        *p -= lr * *v;
    }
}

fn apply_update(
    adapter: &mut AdapterParams,
    head: &mut RegressionHead,
    grads: &LossGradients,
    vel: &mut Velocity,
    lr: f64,
    momentum: f64,
) {
    sgd_axis(adapter.a.data_mut(), grads.a.data(), vel.a.data_mut(), lr, momentum);
    sgd_axis(adapter.b.data_mut(), grads.b.data(), vel.b.data_mut(), lr, momentum);
    sgd_axis(adapter.bias.as_mut_slice(), grads.bias.as_slice(), vel.bias.as_mut_slice(), lr, momentum);
    if let Some(gw) = &grads.head_w {
        sgd_axis(head.w.as_mut_slice(), gw.as_slice(), vel.head_w.as_mut_slice(), lr, momentum);
    }
    if let Some(gb) = grads.head_b {
        vel.head_b = momentum * vel.head_b + gb;
        head.b -= lr * vel.head_b;
    }
}

/// One pass over a shuffled pair stream: seeded shuffle, fixed-size batches,
/// one SGD step per batch. Returns the sample-weighted mean batch loss.
fn epoch_pass(
    state: &mut ModelState,
    samples: &[Sample],
    base_pairs: &[(usize, Attribute)],
    scope: &str,
    epoch: usize,
    vel: &mut Velocity,
) -> Result<f64, TrainError> {
    let mut pairs = base_pairs.to_vec();
    let mut rng = rng_for(state.config.seed, &format!("train/shuffle/{scope}/{epoch}"));
    pairs.shuffle(&mut rng);

    let lr = state.config.learning_rate;
    let momentum = state.config.momentum;
    let mut loss_sum = 0.0;
    for (batch_idx, batch) in pairs.chunks(state.config.batch_size).enumerate() {
        let slot = single_slot(state, batch)?;
        let items = prepare_items(state, samples, batch, Some(epoch))?;
        let (loss, grads) = tape_step(state, slot, &items, true)?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { scope: scope.to_string(), epoch, batch: batch_idx });
        }
        let grads = grads.expect("gradients requested");
        let adapter = &mut state.adapters.slots_mut()[slot];
        apply_update(adapter, &mut state.heads[slot], &grads, vel, lr, momentum);
        loss_sum += loss * batch.len() as f64;
    }
    Ok(loss_sum / pairs.len() as f64)
}

/// One epoch of SGD for a single attribute (fresh momentum buffers).
/// `epoch` indexes the shuffle and jitter streams so successive calls see
/// different batch orders.
pub fn train_epoch(
    state: &mut ModelState,
    samples: &[Sample],
    attr: Attribute,
    epoch: usize,
) -> Result<f64, TrainError> {
    state.config.validate()?;
    if samples.is_empty() {
        return Err(TrainError::Dataset(DatasetError::Insufficient(
            "cannot train on an empty sample collection".into(),
        )));
    }
    let slot = state.adapters.slot_index(attr);
    let mut vel = Velocity::zeros(&state.adapters.slots()[slot], &state.heads[slot]);
    let pairs: Vec<(usize, Attribute)> = (0..samples.len()).map(|i| (i, attr)).collect();
    epoch_pass(state, samples, &pairs, attr.key(), epoch, &mut vel)
}

/// Best-epoch record for one trained slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestEpoch {
    pub epoch: usize,
    pub val_mse: f64,
}

/// Training trace for one adapter slot: per-epoch train losses, per-epoch
/// validation MSE, and the retained best epoch (absent when no epochs ran).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeTrainLog {
    /// `None` for the shared slot.
    pub attribute: Option<Attribute>,
    pub epoch_losses: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub best: Option<BestEpoch>,
}

/// Outcome of a full training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub logs: Vec<AttributeTrainLog>,
    /// Validation report of the final model, when every metric is defined
    /// (an untrained regression model predicts a constant, which has no
    /// defined rank correlation — that yields `None`, not an error).
    pub val_report: Option<MetricReport>,
}

/// Treats undefined-statistic errors as "no report"; real failures surface.
fn report_or_none(state: &ModelState, samples: &[Sample]) -> Result<Option<MetricReport>, TrainError> {
    fn undefined(e: &MetricError) -> bool {
        match e {
            MetricError::UndefinedCorrelation { .. } | MetricError::UndefinedAgreement(_) => true,
            MetricError::PerAttribute { source, .. } => undefined(source),
            _ => false,
        }
    }
    match evaluate(state, samples) {
        Ok(r) => Ok(Some(r)),
        Err(TrainError::Metric(e)) if undefined(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains one slot for the configured number of epochs with persistent
/// momentum, tracking validation MSE after every epoch and restoring the
/// parameters of the strictly best epoch.
fn train_slot(
    state: &mut ModelState,
    train: &[Sample],
    pairs: &[(usize, Attribute)],
    scope: &str,
    slot: usize,
    val_mse_of: impl Fn(&ModelState) -> Result<f64, TrainError>,
) -> Result<AttributeTrainLog, TrainError> {
    let mut vel = Velocity::zeros(&state.adapters.slots()[slot], &state.heads[slot]);
    let mut epoch_losses = Vec::with_capacity(state.config.epochs);
    let mut val_curve = Vec::with_capacity(state.config.epochs);
    let mut best: Option<(BestEpoch, AdapterParams, RegressionHead)> = None;
    for epoch in 0..state.config.epochs {
        let loss = epoch_pass(state, train, pairs, scope, epoch, &mut vel)?;
        epoch_losses.push(loss);
        let val_mse = val_mse_of(state)?;
        val_curve.push(val_mse);
        let improved = match &best {
            None => true,
            Some((record, _, _)) => val_mse < record.val_mse,
        };
        if improved {
            best = Some((
                BestEpoch { epoch, val_mse },
                state.adapters.slots()[slot].clone(),
                state.heads[slot].clone(),
            ));
        }
    }
    let best_record = best.map(|(record, adapter, head)| {
        state.adapters.slots_mut()[slot] = adapter;
        state.heads[slot] = head;
        record
    });
    Ok(AttributeTrainLog {
        attribute: state.adapters.slots()[slot].attribute,
        epoch_losses,
        val_mse: val_curve,
        best: best_record,
    })
}

/// Full training run. Per-attribute mode trains each adapter sequentially in
/// canonical order against its own attribute; shared mode trains the single
/// adapter on all (sample, attribute) pairs pooled and shuffled together.
/// Either way the parameters kept for each slot come from the epoch with the
/// strictly lowest validation MSE.
pub fn train_all(state: &mut ModelState, train: &[Sample], val: &[Sample]) -> Result<TrainSummary, TrainError> {
    state.config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Dataset(DatasetError::Insufficient(
            "training requires non-empty train and validation collections".into(),
        )));
    }
    let mut logs = Vec::new();
    match state.adapters.mode() {
        AdapterMode::PerAttribute => {
            for attr in Attribute::ALL {
                let pairs: Vec<(usize, Attribute)> = (0..train.len()).map(|i| (i, attr)).collect();
                let slot = state.adapters.slot_index(attr);
                let log = train_slot(state, train, &pairs, attr.key(), slot, |s| {
                    attribute_mse(s, val, attr)
                })?;
                logs.push(log);
            }
        }
        AdapterMode::Shared => {
            let pairs: Vec<(usize, Attribute)> = (0..train.len())
                .flat_map(|i| Attribute::ALL.iter().map(move |&attr| (i, attr)))
                .collect();
            let log = train_slot(state, train, &pairs, "shared", 0, |s| {
                let mut sum = 0.0;
                for attr in Attribute::ALL {
                    sum += attribute_mse(s, val, attr)?;
                }
                Ok(sum / Attribute::COUNT as f64)
            })?;
            logs.push(log);
        }
    }
    state.epochs_trained = state.config.epochs;
    let val_report = report_or_none(state, val)?;
    Ok(TrainSummary { logs, val_report })
}
