//! Checkpoint persistence.
//!
//! A checkpoint is one self-describing JSON document. Trainable parameters
//! (adapter slots and regression heads) are stored verbatim; the frozen
//! backbone and vocabulary head are stored as their seed plus a SHA-256
//! digest of their weights, and are reconstructed and verified on load.
//! JSON floats round-trip bit-exactly, so save → load → save reproduces the
//! file byte for byte.

use std::path::Path;

use super::{ModelState, TrainError};
use crate::adapters::{AdapterParams, AdapterRegistry};
use crate::backbone::Backbone;
use crate::decoding::{RegressionHead, VocabHead};
use crate::metrics::MetricReport;
use crate::training::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CHECKPOINT_FORMAT: &str = "artscore-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Identity of the frozen stack: enough to rebuild it (dimensions and seed)
/// and to prove the rebuild matches (weight digest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenSpec {
    pub d_img: usize,
    pub d_cmt: usize,
    pub embed_dim: usize,
    pub seed: u64,
    /// Hex SHA-256 over the backbone and vocabulary weights.
    pub digest: String,
}

/// On-disk model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub frozen: FrozenSpec,
    pub config: TrainConfig,
    pub epochs_trained: usize,
    pub adapters: Vec<AdapterParams>,
    pub heads: Vec<RegressionHead>,
    /// Validation report of the saved model, when every metric was defined.
    pub val_report: Option<MetricReport>,
}

/// SHA-256 over the frozen weights: dimensions, encoder, base projection,
/// and vocabulary head, all as little-endian bytes.
pub fn frozen_digest(backbone: &Backbone, vocab: &VocabHead) -> String {
    let mut hasher = Sha256::new();
    for dim in [backbone.input_dim() as u64, backbone.d() as u64] {
        hasher.update(dim.to_le_bytes());
    }
    let parts: [&[f64]; 4] = [
        backbone.encoder_w().data(),
        backbone.encoder_b().as_slice(),
        backbone.w0().data(),
        vocab.weights().data(),
    ];
    for part in parts {
        for v in part {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

impl Checkpoint {
    /// Captures a model (and optionally its validation report) as a
    /// serialisable document.
    pub fn from_state(state: &ModelState, val_report: Option<MetricReport>) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            frozen: FrozenSpec {
                d_img: state.d_img,
                d_cmt: state.d_cmt,
                embed_dim: state.backbone.d(),
                seed: state.config.seed,
                digest: frozen_digest(&state.backbone, &state.vocab),
            },
            config: state.config.clone(),
            epochs_trained: state.epochs_trained,
            adapters: state.adapters.slots().to_vec(),
            heads: state.heads.clone(),
            val_report,
        }
    }

    /// Rebuilds the model, reconstructing the frozen stack from its seed and
    /// verifying the weight digest.
    pub fn into_state(self) -> Result<(ModelState, Option<MetricReport>), TrainError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(TrainError::Checkpoint(format!(
                "unrecognised format '{}', expected '{CHECKPOINT_FORMAT}'",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(TrainError::Checkpoint(format!(
                "unsupported version {}, expected {CHECKPOINT_VERSION}",
                self.version
            )));
        }
        self.config.validate()?;
        if self.frozen.embed_dim != self.config.embed_dim {
            return Err(TrainError::Checkpoint(format!(
                "frozen embed_dim {} disagrees with config embed_dim {}",
                self.frozen.embed_dim, self.config.embed_dim
            )));
        }
        if self.frozen.seed != self.config.seed {
            return Err(TrainError::Checkpoint(format!(
                "frozen seed {} disagrees with config seed {}",
                self.frozen.seed, self.config.seed
            )));
        }
        if self.frozen.d_img == 0 {
            return Err(TrainError::Checkpoint("frozen d_img must be positive".into()));
        }
        let input_dim = self.frozen.d_img + self.frozen.d_cmt;
        let backbone = Backbone::init(input_dim, self.frozen.embed_dim, self.frozen.seed)?;
        let vocab = VocabHead::init(self.frozen.embed_dim, self.frozen.seed)?;
        let rebuilt = frozen_digest(&backbone, &vocab);
        if rebuilt != self.frozen.digest {
            return Err(TrainError::Checkpoint(format!(
                "frozen weight digest mismatch: stored {}, rebuilt {rebuilt}",
                self.frozen.digest
            )));
        }
        let adapters = AdapterRegistry::from_slots(self.config.adapter_mode, self.adapters)?;
        if adapters.d() != self.frozen.embed_dim {
            return Err(TrainError::Checkpoint(format!(
                "adapter embedding dimension {} disagrees with frozen embed_dim {}",
                adapters.d(),
                self.frozen.embed_dim
            )));
        }
        if self.heads.len() != self.config.adapter_mode.slot_count() {
            return Err(TrainError::Checkpoint(format!(
                "expected {} regression head(s), got {}",
                self.config.adapter_mode.slot_count(),
                self.heads.len()
            )));
        }
        for head in &self.heads {
            if head.w.len() != self.frozen.embed_dim {
                return Err(TrainError::Checkpoint(format!(
                    "regression head width {} disagrees with embed_dim {}",
                    head.w.len(),
                    self.frozen.embed_dim
                )));
            }
            if !(head.w.is_finite() && head.b.is_finite()) {
                return Err(TrainError::Checkpoint("regression head contains non-finite values".into()));
            }
        }
        let state = ModelState {
            backbone,
            vocab,
            adapters,
            heads: self.heads,
            d_img: self.frozen.d_img,
            d_cmt: self.frozen.d_cmt,
            config: self.config,
            epochs_trained: self.epochs_trained,
        };
        Ok((state, self.val_report))
    }
}

/// Writes the model as one JSON document. Equal states produce equal bytes.
pub fn save_checkpoint(
    state: &ModelState,
    val_report: Option<MetricReport>,
    path: &Path,
) -> Result<(), TrainError> {
    for slot in state.adapters.slots() {
        slot.validate()?;
    }
    for head in &state.heads {
        if !(head.w.is_finite() && head.b.is_finite()) {
            return Err(TrainError::Checkpoint("refusing to save non-finite regression head".into()));
        }
    }
    let doc = Checkpoint::from_state(state, val_report);
    let mut text = serde_json::to_string(&doc)
        .map_err(|e| TrainError::Checkpoint(format!("serialisation failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a checkpoint, rebuilding and verifying the frozen stack.
pub fn load_checkpoint(path: &Path) -> Result<(ModelState, Option<MetricReport>), TrainError> {
    let text = std::fs::read_to_string(path).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
    doc.into_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Attribute, ScoreMap, Sample};
    use crate::num::Vector;
    use crate::training::{train_epoch, LossMode};

    fn state_for_test(loss_mode: LossMode) -> ModelState {
        let config = TrainConfig {
            loss_mode,
            embed_dim: 6,
            rank: 2,
            alpha: 4.0,
            learning_rate: 0.05,
            batch_size: 4,
            epochs: 2,
            seed: 13,
            ..TrainConfig::default()
        };
        ModelState::init(5, 0, config).unwrap()
    }

    fn samples() -> Vec<Sample> {
        (0..8)
            .map(|i| Sample {
                id: format!("s{i}"),
                features: Vector::new((0..5).map(|j| ((i * 5 + j) as f64 * 0.37).sin()).collect()),
                scores: ScoreMap::uniform(1 + (i % 5) as u8),
                comment_features: None,
                grade: None,
                media: None,
            })
            .collect()
    }

    #[test]
    fn save_load_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut state = state_for_test(LossMode::Regression);
        train_epoch(&mut state, &samples(), Attribute::Realism, 0).unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        save_checkpoint(&state, None, &p1).unwrap();
        let (loaded, report) = load_checkpoint(&p1).unwrap();
        assert!(report.is_none());
        assert_eq!(loaded, state);
        save_checkpoint(&loaded, None, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn digest_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let state = state_for_test(LossMode::Raft);
        let path = dir.path().join("c.json");
        save_checkpoint(&state, None, &path).unwrap();
        let mut doc: Checkpoint = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        doc.frozen.digest = format!("{:0>64}", "feed");
        let err = doc.into_state().unwrap_err();
        assert!(matches!(err, TrainError::Checkpoint(ref m) if m.contains("digest mismatch")), "{err}");
    }

    #[test]
    fn tampered_structure_is_rejected() {
        let state = state_for_test(LossMode::Raft);
        let base = Checkpoint::from_state(&state, None);

        let mut wrong_format = base.clone();
        wrong_format.format = "something-else".into();
        assert!(wrong_format.into_state().is_err());

        let mut wrong_version = base.clone();
        wrong_version.version = 99;
        assert!(wrong_version.into_state().is_err());

        let mut missing_head = base.clone();
        missing_head.heads.pop();
        assert!(missing_head.into_state().is_err());

        let mut swapped = base.clone();
        swapped.adapters.swap(0, 1);
        assert!(swapped.into_state().is_err());

        let mut drifted_seed = base;
        drifted_seed.frozen.seed = drifted_seed.frozen.seed.wrapping_add(1);
        assert!(drifted_seed.into_state().is_err());
    }

    #[test]
    fn unknown_keys_in_the_document_are_rejected() {
        let state = state_for_test(LossMode::Raft);
        let doc = Checkpoint::from_state(&state, None);
        let mut value: serde_json::Value = serde_json::to_value(&doc).unwrap();
        value.as_object_mut().unwrap().insert("extra".into(), serde_json::json!(1));
        let parsed: Result<Checkpoint, _> = serde_json::from_value(value);
        assert!(parsed.is_err());
    }

    #[test]
    fn digest_distinguishes_frozen_stacks() {
        let a = state_for_test(LossMode::Raft);
        let mut other_cfg = a.config.clone();
        other_cfg.seed = 14;
        let b = ModelState::init(5, 0, other_cfg).unwrap();
        assert_ne!(frozen_digest(&a.backbone, &a.vocab), frozen_digest(&b.backbone, &b.vocab));
    }

    #[test]
    fn non_finite_parameters_refuse_to_save() {
        let dir = tempfile::tempdir().unwrap();
        let mut state = state_for_test(LossMode::Raft);
        state.adapters.slots_mut()[0].bias[0] = f64::NAN;
        let err = save_checkpoint(&state, None, &dir.path().join("bad.json")).unwrap_err();
        assert!(matches!(err, TrainError::Adapter(_)));
    }

    #[test]
    fn val_report_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut state = state_for_test(LossMode::Raft);
        let data = samples();
        train_epoch(&mut state, &data, Attribute::Realism, 0).unwrap();
        let report = crate::training::evaluate(&state, &data).unwrap();
        let path = dir.path().join("r.json");
        save_checkpoint(&state, Some(report.clone()), &path).unwrap();
        let (_, loaded) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, Some(report));
    }
}
