use std::time::Instant;

use artscore::metrics::report_csv;
use artscore::training::{evaluate, load_checkpoint};

use crate::commands::{check_model_dims, load_dataset, write_text};
use crate::manifest::{manifest_path, RunManifest};
use crate::EvalArgs;

pub fn run(args: EvalArgs, argv: Vec<String>, started: Instant) -> anyhow::Result<()> {
    let mut manifest = RunManifest::new(argv);

    manifest.input_file("checkpoint", &args.checkpoint)?;
    let (state, _) = load_checkpoint(&args.checkpoint)?;

    manifest.input_file("data", &args.data)?;
    let (samples, dims) = load_dataset(&args.data)?;
    check_model_dims(&state, &dims)?;

    let report = evaluate(&state, &samples)?;
    write_text(&args.out, &report_csv(&report))?;
    manifest.output_file(&args.out)?;

    let avg = &report.average;
    println!(
        "evaluated {} samples: sc {:.4} pc {:.4} acc {:.4} mse {:.4} qwk {:.4} (average)",
        samples.len(),
        avg.sc,
        avg.pc,
        avg.acc,
        avg.mse,
        avg.qwk
    );
    println!("wrote {}", args.out.display());

    manifest.write(&manifest_path(&args.out), started)?;
    Ok(())
}
