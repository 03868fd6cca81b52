//! Rubric-based artwork scoring with per-attribute low-rank adapters.
//!
//! The crate trains one small low-rank adapter per rubric attribute on top of
//! a frozen random-feature backbone, decodes 1–5 ordinal scores either as a
//! probability-weighted expectation over the five score tokens or through a
//! plain regression head, and ships the evaluation and analysis stack that
//! goes with that: rank/agreement metrics, adapter subspace overlap, gold
//! score correlations, and error breakdowns.
//!
//! Module map:
//!
//! * [`num`] — dense f64 vectors/matrices and a single-use reverse-mode tape
//!   covering exactly the ops the training graph needs.
//! * [`dataset`] — the nine-attribute sample schema, JSONL I/O, deterministic
//!   splits, and the synthetic corpus generator.
//! * [`backbone`] — the frozen encoder and frozen base projection.
//! * [`adapters`] — low-rank adapter parameters and the per-attribute /
//!   shared registry.
//! * [`decoding`] — score vocabulary head, expected-score and argmax
//!   decoding, regression decoding, label rounding.
//! * [`training`] — losses, SGD training loops, model state, checkpoints.
//! * [`metrics`] — correlation/accuracy/error metrics plus the two-rater
//!   agreement statistics (QWK, ICC(2,1), Krippendorff's alpha).
//! * [`analysis`] — adapter subspace overlap, score correlation matrices,
//!   and per-sample error analysis.

pub mod adapters;
pub mod analysis;
pub mod backbone;
pub mod dataset;
pub mod decoding;
pub mod metrics;
pub mod num;
pub mod seed;
pub mod training;

pub use dataset::{Attribute, Sample};
pub use num::{Matrix, Vector};
