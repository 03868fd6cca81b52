use std::fs;
use std::time::Instant;

use anyhow::Context;

use artscore::dataset::{split, SplitSpec};
use artscore::metrics::report_csv;
use artscore::training::{save_checkpoint, train_all, ModelState, TrainConfig};

use crate::commands::{load_dataset, write_text};
use crate::manifest::{derived_path, manifest_path, sha256_bytes, RunManifest};
use crate::{TrainArgs, UsageError};

pub fn run(args: TrainArgs, argv: Vec<String>, started: Instant) -> anyhow::Result<()> {
    let mut manifest = RunManifest::new(argv);

    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("read config {}", path.display()))?;
            manifest.input("config_file", sha256_bytes(text.as_bytes()));
            toml::from_str::<TrainConfig>(&text)
                .map_err(anyhow::Error::from)
                .with_context(|| format!("invalid config {}", path.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(mode) = args.mode {
        config.adapter_mode = mode.into();
    }
    if let Some(loss) = args.loss {
        config.loss_mode = loss.into();
    }
    config.validate()?;
    let config_json = serde_json::to_string(&config).context("serialize effective config")?;
    manifest.input("config_effective", sha256_bytes(config_json.as_bytes()));
    manifest.seed("split", config.seed);
    manifest.seed("train", config.seed);

    manifest.input_file("data", &args.data)?;
    let (samples, dims) = load_dataset(&args.data)?;
    if config.use_comments && dims.d_cmt == 0 {
        return Err(UsageError(
            "config sets use_comments = true but the dataset has no comment features".into(),
        )
        .into());
    }
    let d_cmt = if config.use_comments { dims.d_cmt } else { 0 };

    let parts = split(&samples, &SplitSpec::standard(config.seed))?;
    let mut state = ModelState::init(dims.d_img, d_cmt, config.clone())?;
    let summary = train_all(&mut state, &parts.train, &parts.val)?;

    save_checkpoint(&state, summary.val_report.clone(), &args.out)?;
    manifest.output_file(&args.out)?;

    println!(
        "trained {} / {} on {} samples ({} validation) for {} epochs",
        config.adapter_mode,
        config.loss_mode,
        parts.train.len(),
        parts.val.len(),
        config.epochs
    );
    for log in &summary.logs {
        let name = log.attribute.map_or("shared", |a| a.key());
        match &log.best {
            Some(best) => {
                println!("  {name}: best epoch {} (val mse {:.4})", best.epoch, best.val_mse)
            }
            None => println!("  {name}: no epoch improved on the initial model"),
        }
    }

    let val_csv = derived_path(&args.out, ".val.csv");
    match &summary.val_report {
        Some(report) => {
            write_text(&val_csv, &report_csv(report))?;
            manifest.output_file(&val_csv)?;
            let avg = &report.average;
            println!(
                "validation average: sc {:.4} pc {:.4} acc {:.4} mse {:.4} qwk {:.4}",
                avg.sc, avg.pc, avg.acc, avg.mse, avg.qwk
            );
            println!("wrote {}", val_csv.display());
        }
        None => eprintln!(
            "warning: validation metrics are undefined on this run (constant predictions \
             or degenerate golds); skipping {}",
            val_csv.display()
        ),
    }
    println!("wrote {}", args.out.display());

    manifest.write(&manifest_path(&args.out), started)?;
    Ok(())
}
