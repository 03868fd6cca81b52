//! Evaluation metrics and the per-attribute metric report.
//!
//! Rank and linear correlation (SC/PC) and MSE are computed on raw
//! predictions; exact-match accuracy and quadratic-weighted kappa operate on
//! rounded labels. Degenerate inputs are never silently mapped to NaN:
//! correlations on constant inputs are errors, and the kappa-style
//! agreement statistics return explicitly flagged conventional values.

mod agreement;

pub use agreement::{icc21, krippendorff_alpha_interval, qwk, FlaggedValue};

use crate::dataset::{Attribute, AttributeMap, SCORE_MAX, SCORE_MIN};
use crate::decoding::round_to_label;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from metric computation.
#[derive(Debug, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("undefined correlation: {side} values are constant")]
    UndefinedCorrelation { side: &'static str },
    #[error("undefined agreement: {0}")]
    UndefinedAgreement(String),
    #[error("invalid label {0}: expected {SCORE_MIN}..={SCORE_MAX}")]
    InvalidLabel(u8),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("metric failed for '{attribute}': {source}")]
    PerAttribute {
        attribute: Attribute,
        #[source]
        source: Box<MetricError>,
    },
}

fn check_pair(x: &[f64], y: &[f64], min_n: usize) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min_n {
        return Err(MetricError::TooFew { need: min_n, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite("first input"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite("second input"));
    }
    Ok(())
}

fn check_labels(labels: &[u8]) -> Result<(), MetricError> {
    for &l in labels {
        if !(SCORE_MIN..=SCORE_MAX).contains(&l) {
            return Err(MetricError::InvalidLabel(l));
        }
    }
    Ok(())
}

/// Fractional (average) ranks, 1-based; tied values share the mean of the
/// rank positions they occupy.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) hold one tie group; mean 1-based rank.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = mean_rank;
        }
        i = j + 1;
    }
    out
}

/// Pearson correlation. Errors when either side is constant rather than
/// returning NaN.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 {
        return Err(MetricError::UndefinedCorrelation { side: "first" });
    }
    if vy == 0.0 {
        return Err(MetricError::UndefinedCorrelation { side: "second" });
    }
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson over fractional ranks. Inherits the
/// constant-input error behaviour of [`pearson`].
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y, 2)?;
    pearson(&ranks(x), &ranks(y))
}

/// Exact-match accuracy of rounded predictions against gold labels.
pub fn accuracy(preds: &[f64], golds: &[u8]) -> Result<f64, MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::TooFew { need: 1, got: 0 });
    }
    check_labels(golds)?;
    let mut hits = 0usize;
    for (p, g) in preds.iter().zip(golds) {
        let label = round_to_label(*p).map_err(|_| MetricError::NonFinite("predictions"))?;
        if label == *g {
            hits += 1;
        }
    }
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean squared error of raw (unrounded) predictions against gold labels.
pub fn mse(preds: &[f64], golds: &[u8]) -> Result<f64, MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::TooFew { need: 1, got: 0 });
    }
    check_labels(golds)?;
    if preds.iter().any(|p| !p.is_finite()) {
        return Err(MetricError::NonFinite("predictions"));
    }
    let sum: f64 = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| {
            let d = p - *g as f64;
            d * d
        })
        .sum();
    Ok(sum / preds.len() as f64)
}

/// Aligned raw predictions and gold labels for every attribute.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    golds: AttributeMap<Vec<u8>>,
    preds: AttributeMap<Vec<f64>>,
    n: usize,
}

impl PredictionSet {
    /// Validates that every attribute carries the same number of aligned
    /// (prediction, gold) pairs and that golds are legal labels.
    pub fn new(
        preds: AttributeMap<Vec<f64>>,
        golds: AttributeMap<Vec<u8>>,
    ) -> Result<PredictionSet, MetricError> {
        let n = preds.get(Attribute::Realism).len();
        for attr in Attribute::ALL {
            let p = preds.get(attr);
            let g = golds.get(attr);
            if p.len() != n {
                return Err(MetricError::LengthMismatch(p.len(), n));
            }
            if p.len() != g.len() {
                return Err(MetricError::LengthMismatch(p.len(), g.len()));
            }
            check_labels(g).map_err(|e| MetricError::PerAttribute {
                attribute: attr,
                source: Box::new(e),
            })?;
        }
        if n == 0 {
            return Err(MetricError::TooFew { need: 1, got: 0 });
        }
        Ok(PredictionSet { golds, preds, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn preds(&self, attr: Attribute) -> &[f64] {
        self.preds.get(attr)
    }

    pub fn golds(&self, attr: Attribute) -> &[u8] {
        self.golds.get(attr)
    }
}

/// One row of the metric report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sc: f64,
    pub pc: f64,
    pub acc: f64,
    pub mse: f64,
    pub qwk: f64,
    /// True when the QWK value came from a degenerate (both-constant) input.
    pub qwk_degenerate: bool,
}

/// Per-attribute metric rows plus their arithmetic average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_attribute: AttributeMap<MetricRow>,
    pub average: MetricRow,
}

impl MetricReport {
    /// Per-metric upper bound of two reports (e.g. two independent raters
    /// scored against the same golds): the better value of each cell, where
    /// better means larger for SC/PC/ACC/QWK and smaller for MSE.
    pub fn elementwise_best(&self, other: &MetricReport) -> MetricReport {
        let best = |a: &MetricRow, b: &MetricRow| MetricRow {
            sc: a.sc.max(b.sc),
            pc: a.pc.max(b.pc),
            acc: a.acc.max(b.acc),
            mse: a.mse.min(b.mse),
            qwk: a.qwk.max(b.qwk),
            qwk_degenerate: a.qwk_degenerate || b.qwk_degenerate,
        };
        MetricReport {
            per_attribute: self
                .per_attribute
                .map(|attr, row| best(row, other.per_attribute.get(attr))),
            average: best(&self.average, &other.average),
        }
    }
}

/// Computes SC/PC/ACC/MSE/QWK for every attribute plus the average row.
/// SC/PC/MSE see raw predictions; ACC/QWK see rounded labels. Failures are
/// tagged with the attribute that caused them.
pub fn report(p: &PredictionSet) -> Result<MetricReport, MetricError> {
    let tag = |attribute: Attribute| {
        move |source: MetricError| MetricError::PerAttribute {
            attribute,
            source: Box::new(source),
        }
    };
    let mut rows: Vec<MetricRow> = Vec::with_capacity(Attribute::COUNT);
    for attr in Attribute::ALL {
        let preds = p.preds(attr);
        let golds = p.golds(attr);
        let gold_f: Vec<f64> = golds.iter().map(|&g| g as f64).collect();
        let labels: Vec<u8> = preds
            .iter()
            .map(|&v| round_to_label(v).map_err(|_| MetricError::NonFinite("predictions")))
            .collect::<Result<_, _>>()
            .map_err(tag(attr))?;
        let row = MetricRow {
            sc: spearman(preds, &gold_f).map_err(tag(attr))?,
            pc: pearson(preds, &gold_f).map_err(tag(attr))?,
            acc: accuracy(preds, golds).map_err(tag(attr))?,
            mse: mse(preds, golds).map_err(tag(attr))?,
            qwk: 0.0,
            qwk_degenerate: false,
        };
        let kappa = qwk(&labels, golds).map_err(tag(attr))?;
        rows.push(MetricRow { qwk: kappa.value, qwk_degenerate: kappa.degenerate, ..row });
    }
    let count = rows.len() as f64;
    let average = MetricRow {
        sc: rows.iter().map(|r| r.sc).sum::<f64>() / count,
        pc: rows.iter().map(|r| r.pc).sum::<f64>() / count,
        acc: rows.iter().map(|r| r.acc).sum::<f64>() / count,
        mse: rows.iter().map(|r| r.mse).sum::<f64>() / count,
        qwk: rows.iter().map(|r| r.qwk).sum::<f64>() / count,
        qwk_degenerate: rows.iter().any(|r| r.qwk_degenerate),
    };
    Ok(MetricReport {
        per_attribute: AttributeMap::from_fn(|a| rows[a.index()]),
        average,
    })
}

/// Renders a report as CSV: header, one row per attribute in canonical
/// order, then the `average` row. Deterministic bytes for equal reports.
pub fn report_csv(report: &MetricReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["attribute", "sc", "pc", "acc", "mse", "qwk"])
        .expect("in-memory write");
    let mut write_row = |name: &str, row: &MetricRow| {
        w.write_record([
            name.to_string(),
            row.sc.to_string(),
            row.pc.to_string(),
            row.acc.to_string(),
            row.mse.to_string(),
            row.qwk.to_string(),
        ])
        .expect("in-memory write");
    };
    for (attr, row) in report.per_attribute.iter() {
        write_row(attr.key(), row);
    }
    write_row("average", &report.average);
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
