//! Ordinal score decoding.
//!
//! A hidden vector becomes a score one of two ways. The probabilistic path
//! projects it onto five score-token logits, softmaxes them, and reads out
//! the probability-weighted expected score — the minimum-Bayes-risk point
//! estimate under squared loss, which is what the squared-error training
//! loss optimizes. The direct path is a plain affine regression head. Both
//! report on the 1–5 scale; rounding to hard labels is half-up with
//! clamping.

use crate::dataset::{SCORE_MAX, SCORE_MIN};
use crate::num::{Matrix, NumError, Vector};
use crate::seed::rng_for;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of score labels.
pub const LABEL_COUNT: usize = (SCORE_MAX - SCORE_MIN + 1) as usize;

/// The numeric value of each score label, lowest first: `[1, 2, 3, 4, 5]`.
pub const SCORE_VALUES: [f64; LABEL_COUNT] = [1.0, 2.0, 3.0, 4.0, 5.0];

/// Errors from constructing or using the decoding types.
#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid score distribution: {0}")]
    InvalidDistribution(String),
    #[error("cannot round a NaN prediction to a label")]
    NanPrediction,
    #[error(transparent)]
    Num(#[from] NumError),
}

/// A probability distribution over the five score labels: non-negative,
/// finite, summing to 1 within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDistribution {
    probs: [f64; LABEL_COUNT],
}

impl ScoreDistribution {
    pub fn new(probs: [f64; LABEL_COUNT]) -> Result<Self, DecodeError> {
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(DecodeError::InvalidDistribution(
                "non-finite probability".to_string(),
            ));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(DecodeError::InvalidDistribution(
                "negative probability".to_string(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DecodeError::InvalidDistribution(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ScoreDistribution { probs })
    }

    /// Builds a distribution by softmaxing five logits.
    pub fn from_logits(logits: &Vector) -> Result<Self, DecodeError> {
        if logits.len() != LABEL_COUNT {
            return Err(DecodeError::InvalidDistribution(format!(
                "expected {LABEL_COUNT} logits, got {}",
                logits.len()
            )));
        }
        let probs = crate::num::softmax(logits.as_slice())?;
        ScoreDistribution::new(probs.try_into().expect("length checked"))
    }

    pub fn probs(&self) -> &[f64; LABEL_COUNT] {
        &self.probs
    }
}

/// Frozen projection from hidden vectors onto the five score-token logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabHead {
    weights: Matrix,
}

impl VocabHead {
    /// Seeded uniform init on `[-1/sqrt(d), 1/sqrt(d)]`, like the frozen
    /// backbone projection it sits behind.
    pub fn init(d: usize, seed: u64) -> Result<VocabHead, NumError> {
        if d == 0 {
            return Err(NumError::Contract {
                op: "VocabHead::init",
                detail: "hidden dimension must be positive".to_string(),
            });
        }
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = rng_for(seed, "decoding/vocab_head");
        let weights =
            Matrix::from_fn(LABEL_COUNT, d, |_, _| rng.random_range(-bound..=bound));
        Ok(VocabHead { weights })
    }

    pub fn new(weights: Matrix) -> Result<VocabHead, NumError> {
        if weights.rows() != LABEL_COUNT {
            return Err(NumError::Shape {
                op: "VocabHead::new",
                detail: format!("expected {LABEL_COUNT} rows, got {}", weights.rows()),
            });
        }
        Ok(VocabHead { weights })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights.cols()
    }

    /// The five score-token logits for a hidden vector.
    pub fn score_logits(&self, hidden: &Vector) -> Result<Vector, NumError> {
        self.weights.matvec(hidden)
    }
}

/// Expected score under the distribution: `Σ p(y) · y` over the five
/// labels. Always lands in `[1, 5]`.
pub fn rail_decode(dist: &ScoreDistribution) -> f64 {
    dist.probs
        .iter()
        .zip(SCORE_VALUES)
        .map(|(p, v)| p * v)
        .sum()
}

/// The most probable label; ties break toward the lower score.
pub fn argmax_decode(dist: &ScoreDistribution) -> u8 {
    let mut best = 0usize;
    for (i, p) in dist.probs.iter().enumerate() {
        if *p > dist.probs[best] {
            best = i;
        }
    }
    SCORE_MIN + best as u8
}

/// Trainable affine head for direct score regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionHead {
    pub w: Vector,
    pub b: f64,
}

impl RegressionHead {
    /// Zero weights with the bias at the scale midpoint, so an untrained
    /// head predicts 3.0 everywhere and training only has to learn the
    /// signal.
    pub fn init(d: usize) -> RegressionHead {
        RegressionHead { w: Vector::zeros(d), b: 3.0 }
    }

    /// Raw affine output `⟨w, h⟩ + b` — the value the loss sees.
    pub fn raw(&self, hidden: &Vector) -> Result<f64, NumError> {
        Ok(self.w.dot(hidden)? + self.b)
    }
}

/// Regression prediction clamped to the reporting scale `[1, 5]`. The
/// training loss uses [`RegressionHead::raw`]; clamping is for reporting
/// only.
pub fn regress_decode(head: &RegressionHead, hidden: &Vector) -> Result<f64, NumError> {
    Ok(head.raw(hidden)?.clamp(SCORE_MIN as f64, SCORE_MAX as f64))
}

/// Rounds a raw prediction to the nearest label, half-up (3.5 → 4), with
/// out-of-range values clamped into 1..=5. NaN is a contract error.
pub fn round_to_label(pred: f64) -> Result<u8, DecodeError> {
    if pred.is_nan() {
        return Err(DecodeError::NanPrediction);
    }
    let rounded = (pred + 0.5).floor();
    Ok(rounded.clamp(SCORE_MIN as f64, SCORE_MAX as f64) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(probs: [f64; 5]) -> ScoreDistribution {
        ScoreDistribution::new(probs).unwrap()
    }

    #[test]
    fn rail_uniform_is_midpoint() {
        let d = dist([0.2; 5]);
        assert!((rail_decode(&d) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rail_one_hot_recovers_the_label() {
        for k in 0..5 {
            let mut p = [0.0; 5];
            p[k] = 1.0;
            assert_eq!(rail_decode(&dist(p)), (k + 1) as f64);
        }
    }

    #[test]
    fn rail_split_mass_interpolates() {
        let d = dist([0.0, 0.0, 0.5, 0.5, 0.0]);
        assert!((rail_decode(&d) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn argmax_breaks_ties_toward_lower_score() {
        let d = dist([0.3, 0.3, 0.2, 0.1, 0.1]);
        assert_eq!(argmax_decode(&d), 1);
        let d = dist([0.1, 0.25, 0.3, 0.3, 0.05]);
        assert_eq!(argmax_decode(&d), 3);
    }

    #[test]
    fn distribution_validation_rejects_bad_inputs() {
        assert!(ScoreDistribution::new([0.5, 0.5, 0.1, 0.0, 0.0]).is_err()); // sums to 1.1
        assert!(ScoreDistribution::new([-0.1, 0.4, 0.4, 0.2, 0.1]).is_err());
        assert!(ScoreDistribution::new([f64::NAN, 0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn from_logits_round_trips_through_softmax() {
        let d = ScoreDistribution::from_logits(&Vector::new(vec![1.0, 0.0, -1.0, 2.0, 0.5]))
            .unwrap();
        let sum: f64 = d.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(ScoreDistribution::from_logits(&Vector::new(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn round_half_up_and_clamp() {
        assert_eq!(round_to_label(3.5).unwrap(), 4);
        assert_eq!(round_to_label(2.5).unwrap(), 3);
        assert_eq!(round_to_label(2.49).unwrap(), 2);
        assert_eq!(round_to_label(0.3).unwrap(), 1);
        assert_eq!(round_to_label(6.7).unwrap(), 5);
        assert_eq!(round_to_label(-2.0).unwrap(), 1);
        assert!(matches!(round_to_label(f64::NAN), Err(DecodeError::NanPrediction)));
    }

    #[test]
    fn vocab_head_init_is_bounded_and_deterministic() {
        let a = VocabHead::init(16, 7).unwrap();
        let b = VocabHead::init(16, 7).unwrap();
        assert_eq!(a, b);
        let bound = 1.0 / 4.0;
        assert!(a.weights().data().iter().all(|w| w.abs() <= bound));
        assert_ne!(a, VocabHead::init(16, 8).unwrap());
    }

    #[test]
    fn score_logits_have_label_count_entries() {
        let head = VocabHead::init(8, 3).unwrap();
        let logits = head.score_logits(&Vector::zeros(8)).unwrap();
        assert_eq!(logits.len(), LABEL_COUNT);
        assert!(head.score_logits(&Vector::zeros(9)).is_err());
    }

    #[test]
    fn regression_clamps_for_reporting_only() {
        let head = RegressionHead { w: Vector::new(vec![1.0]), b: 0.0 };
        let h = Vector::new(vec![6.2]);
        assert!((head.raw(&h).unwrap() - 6.2).abs() < 1e-12);
        assert!((regress_decode(&head, &h).unwrap() - 5.0).abs() < 1e-12);

        let low = Vector::new(vec![-3.0]);
        assert!((regress_decode(&head, &low).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn untrained_regression_head_predicts_midpoint() {
        let head = RegressionHead::init(4);
        let h = Vector::new(vec![0.4, -0.2, 1.0, 0.7]);
        assert_eq!(head.raw(&h).unwrap(), 3.0);
    }
}
