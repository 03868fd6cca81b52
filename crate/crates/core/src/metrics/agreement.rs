//! Chance-corrected agreement statistics for two raters on the 1–5 scale:
//! quadratic-weighted kappa, ICC(2,1), and interval-metric Krippendorff's
//! alpha.
//!
//! Where the textbook formulas are undefined because both raters are
//! constant, the statistics return the conventional values (1.0 when the
//! raters also agree, 0.0 for QWK when they disagree) with an explicit
//! degenerate flag instead of NaN.

use super::MetricError;
use crate::dataset::{SCORE_MAX, SCORE_MIN};

const K: usize = (SCORE_MAX - SCORE_MIN + 1) as usize;

/// A statistic value plus a flag marking that it came from a degenerate
/// input under a defined convention rather than from the general formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaggedValue {
    pub value: f64,
    pub degenerate: bool,
}

fn check_label_pair(a: &[u8], b: &[u8]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::TooFew { need: 1, got: 0 });
    }
    for &l in a.iter().chain(b) {
        if !(SCORE_MIN..=SCORE_MAX).contains(&l) {
            return Err(MetricError::InvalidLabel(l));
        }
    }
    Ok(())
}

/// Quadratic-weighted kappa between two label sequences.
///
/// Weights are `(i - j)² / (K - 1)²` over the 5×5 label grid; expected
/// counts come from the outer product of the marginals. When both sides are
/// constant the general formula degenerates: equal constants yield 1.0 and
/// different constants yield 0.0, both flagged.
pub fn qwk(a: &[u8], b: &[u8]) -> Result<FlaggedValue, MetricError> {
    check_label_pair(a, b)?;
    let n = a.len() as f64;

    let mut observed = [[0.0f64; K]; K];
    let mut row_marginal = [0.0f64; K];
    let mut col_marginal = [0.0f64; K];
    for (&x, &y) in a.iter().zip(b) {
        let i = (x - SCORE_MIN) as usize;
        let j = (y - SCORE_MIN) as usize;
        observed[i][j] += 1.0;
        row_marginal[i] += 1.0;
        col_marginal[j] += 1.0;
    }

    let degenerate = row_marginal.iter().filter(|&&m| m > 0.0).count() == 1
        && col_marginal.iter().filter(|&&m| m > 0.0).count() == 1;

    let denom_scale = ((K - 1) * (K - 1)) as f64;
    let mut observed_disagreement = 0.0;
    let mut expected_disagreement = 0.0;
    for i in 0..K {
        for j in 0..K {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / denom_scale;
            observed_disagreement += w * observed[i][j];
            expected_disagreement += w * row_marginal[i] * col_marginal[j] / n;
        }
    }

    if expected_disagreement == 0.0 {
        // Both constant at the same label: perfect but degenerate agreement.
        return Ok(FlaggedValue { value: 1.0, degenerate: true });
    }
    Ok(FlaggedValue {
        value: 1.0 - observed_disagreement / expected_disagreement,
        degenerate,
    })
}

/// ICC(2,1): two-way random effects, single measure, absolute agreement,
/// for exactly two raters.
///
/// Subjects and raters both enter the ANOVA as random effects; the statistic
/// is `(MSR - MSE) / (MSR + MSE + 2(MSC - MSE)/n)`. All-identical ratings
/// (zero total variance) are an undefined-agreement error.
pub fn icc21(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricError::TooFew { need: 2, got: n });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite("ratings"));
    }

    let nf = n as f64;
    let k = 2.0;
    let grand = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (nf * k);
    let mean_a = a.iter().sum::<f64>() / nf;
    let mean_b = b.iter().sum::<f64>() / nf;

    let mut ss_rows = 0.0;
    let mut ss_total = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let row_mean = (x + y) / 2.0;
        ss_rows += k * (row_mean - grand) * (row_mean - grand);
        ss_total += (x - grand) * (x - grand) + (y - grand) * (y - grand);
    }
    let ss_cols = nf * ((mean_a - grand) * (mean_a - grand) + (mean_b - grand) * (mean_b - grand));
    if ss_total == 0.0 {
        return Err(MetricError::UndefinedAgreement(
            "all ratings identical: zero total variance".to_string(),
        ));
    }
    // Guard tiny negative residuals from cancellation.
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);

    let ms_rows = ss_rows / (nf - 1.0);
    let ms_cols = ss_cols; // df = k - 1 = 1
    let ms_err = ss_err / (nf - 1.0); // df = (n - 1)(k - 1)

    let denom = ms_rows + (k - 1.0) * ms_err + k * (ms_cols - ms_err) / nf;
    if denom == 0.0 {
        return Err(MetricError::UndefinedAgreement(
            "zero denominator in ICC(2,1)".to_string(),
        ));
    }
    Ok((ms_rows - ms_err) / denom)
}

/// Interval-metric Krippendorff's alpha for two raters.
///
/// Built from the coincidence matrix: each unit contributes its ordered
/// label pairs, observed disagreement uses `(c - k)²`, and expected
/// disagreement comes from the pooled value frequencies. Zero expected
/// disagreement (every rating identical) returns 1.0 with the degenerate
/// flag.
pub fn krippendorff_alpha_interval(a: &[u8], b: &[u8]) -> Result<FlaggedValue, MetricError> {
    check_label_pair(a, b)?;
    let n_total = 2.0 * a.len() as f64;

    // Coincidence counts o[c][k] and pooled value frequencies.
    let mut coincidence = [[0.0f64; K]; K];
    let mut freq = [0.0f64; K];
    for (&x, &y) in a.iter().zip(b) {
        let i = (x - SCORE_MIN) as usize;
        let j = (y - SCORE_MIN) as usize;
        coincidence[i][j] += 1.0;
        coincidence[j][i] += 1.0;
        freq[i] += 1.0;
        freq[j] += 1.0;
    }

    let delta = |c: usize, k: usize| {
        let d = c as f64 - k as f64;
        d * d
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..K {
        for k in 0..K {
            observed += coincidence[c][k] * delta(c, k);
            expected += freq[c] * freq[k] * delta(c, k);
        }
    }
    let observed = observed / n_total;
    let expected = expected / (n_total * (n_total - 1.0));

    if expected == 0.0 {
        return Ok(FlaggedValue { value: 1.0, degenerate: true });
    }
    Ok(FlaggedValue { value: 1.0 - observed / expected, degenerate: false })
}
