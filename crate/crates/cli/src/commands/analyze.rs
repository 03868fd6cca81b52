use std::fs;
use std::time::Instant;

use anyhow::Context;

use artscore::adapters::AdapterMode;
use artscore::analysis::{
    correlation_csv, dimension_correlations, error_analysis, error_cases_csv, error_summary_csv,
    overlap_csv, overlap_matrix,
};
use artscore::training::{load_checkpoint, predictions};

use crate::commands::{check_model_dims, load_dataset, write_text};
use crate::manifest::RunManifest;
use crate::{AnalyzeArgs, UsageError};

pub fn run(args: AnalyzeArgs, argv: Vec<String>, started: Instant) -> anyhow::Result<()> {
    let mut manifest = RunManifest::new(argv);

    manifest.input_file("checkpoint", &args.checkpoint)?;
    let (state, _) = load_checkpoint(&args.checkpoint)?;
    if state.adapters.mode() != AdapterMode::PerAttribute {
        return Err(UsageError(
            "analysis needs a per-attribute checkpoint; this one holds a single shared adapter"
                .into(),
        )
        .into());
    }

    manifest.input_file("data", &args.data)?;
    let (samples, dims) = load_dataset(&args.data)?;
    check_model_dims(&state, &dims)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("create {}", args.out_dir.display()))?;

    let overlap = overlap_matrix(&state.adapters)?;
    let correlations = dimension_correlations(&samples)?;
    let preds = predictions(&state, &samples)?;
    let errors = error_analysis(&preds, &samples, args.threshold)?;

    let reports = [
        ("overlap.csv", overlap_csv(&overlap)),
        ("correlations.csv", correlation_csv(&correlations)),
        ("error_cases.csv", error_cases_csv(&errors)),
        ("error_summary.csv", error_summary_csv(&errors)),
    ];
    for (name, text) in &reports {
        let path = args.out_dir.join(name);
        write_text(&path, text)?;
        manifest.output_file(&path)?;
    }

    println!(
        "{} of {} samples have more than {} mispredicted attributes",
        errors.summary.high_error_cases, errors.summary.n_samples, args.threshold
    );
    println!("wrote {} reports to {}", reports.len(), args.out_dir.display());

    manifest.write(&args.out_dir.join("manifest.json"), started)?;
    Ok(())
}
