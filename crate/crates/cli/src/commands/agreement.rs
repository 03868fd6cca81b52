use std::time::Instant;

use anyhow::Context;

use artscore::metrics::{icc21, krippendorff_alpha_interval, pearson, MetricError};
use artscore::Attribute;

use crate::commands::write_text;
use crate::manifest::{manifest_path, RunManifest};
use crate::ratings::load_ratings;
use crate::{AgreementArgs, UsageError};

/// How many offending ids an id-mismatch error names before truncating.
const MISMATCH_PREVIEW: usize = 10;

pub fn run(args: AgreementArgs, argv: Vec<String>, started: Instant) -> anyhow::Result<()> {
    let mut manifest = RunManifest::new(argv);
    manifest.input_file("ratings_a", &args.ratings_a)?;
    manifest.input_file("ratings_b", &args.ratings_b)?;

    let a = load_ratings(&args.ratings_a)?;
    let b = load_ratings(&args.ratings_b)?;

    let a_index = a.id_index();
    let b_index = b.id_index();
    let only_a: Vec<&str> =
        a.ids.iter().map(String::as_str).filter(|id| !b_index.contains_key(*id)).collect();
    let only_b: Vec<&str> =
        b.ids.iter().map(String::as_str).filter(|id| !a_index.contains_key(*id)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(UsageError(format!(
            "rating files cover different items: {} only in {} ({}); {} only in {} ({})",
            only_a.len(),
            args.ratings_a.display(),
            preview(&only_a),
            only_b.len(),
            args.ratings_b.display(),
            preview(&only_b),
        ))
        .into());
    }
    // Same id sets; align rater B's rows to rater A's order.
    let order: Vec<usize> = a.ids.iter().map(|id| b_index[id.as_str()]).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["attribute", "pc", "icc", "alpha", "alpha_degenerate"])
        .context("in-memory csv")?;
    for attr in Attribute::ALL {
        let xa: &[u8] = a.scores.get(attr);
        let xb: Vec<u8> = order.iter().map(|&i| b.scores.get(attr)[i]).collect();
        let fa: Vec<f64> = xa.iter().map(|&v| f64::from(v)).collect();
        let fb: Vec<f64> = xb.iter().map(|&v| f64::from(v)).collect();
        let pc = cell(pearson(&fa, &fb))?;
        let icc = cell(icc21(&fa, &fb))?;
        let alpha = krippendorff_alpha_interval(xa, &xb)?;
        w.write_record([
            attr.key().to_string(),
            pc,
            icc,
            alpha.value.to_string(),
            alpha.degenerate.to_string(),
        ])
        .context("in-memory csv")?;
    }
    let text = String::from_utf8(w.into_inner().context("in-memory csv")?)
        .context("csv is utf-8")?;
    write_text(&args.out, &text)?;
    manifest.output_file(&args.out)?;

    println!("agreement over {} items across 9 attributes", a.len());
    println!("wrote {}", args.out.display());

    manifest.write(&manifest_path(&args.out), started)?;
    Ok(())
}

/// A statistic cell: the value when defined, empty when the statistic is
/// undefined on this data (e.g. a rater gave one attribute a constant
/// score). Genuine errors still propagate.
fn cell(result: Result<f64, MetricError>) -> anyhow::Result<String> {
    match result {
        Ok(v) => Ok(v.to_string()),
        Err(MetricError::UndefinedCorrelation { .. } | MetricError::UndefinedAgreement(_)) => {
            Ok(String::new())
        }
        Err(e) => Err(e.into()),
    }
}

fn preview(ids: &[&str]) -> String {
    if ids.is_empty() {
        return "none".to_string();
    }
    let shown: Vec<&str> = ids.iter().take(MISMATCH_PREVIEW).copied().collect();
    let suffix = if ids.len() > MISMATCH_PREVIEW { ", ..." } else { "" };
    format!("{}{suffix}", shown.join(", "))
}
