//! `artscore` — rubric-based artwork scoring from the command line.
//!
//! Five subcommands cover the full workflow: `gen-data` (synthetic corpora),
//! `train` (per-attribute or shared low-rank adapters), `eval` (metric
//! report), `analyze` (adapter overlap, score correlations, error cases),
//! and `agreement` (two-rater statistics).
//!
//! Every run writes a manifest recording input digests, seeds, and output
//! digests. Result files are byte-identical across reruns with the same
//! inputs and seeds.
//!
//! Exit codes:
//!
//! * `0` — success
//! * `1` — I/O or other environmental failure
//! * `2` — usage or validation error (bad flags, malformed config or data,
//!   schema and dimension mismatches)
//! * `3` — numerical failure (divergence, non-finite values, statistics that
//!   are undefined on the given data)

mod commands;
mod manifest;
mod ratings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use artscore::adapters::{AdapterError, AdapterMode};
use artscore::analysis::AnalysisError;
use artscore::dataset::DEFAULT_NOISE_STD;
use artscore::dataset::DatasetError;
use artscore::decoding::DecodeError;
use artscore::metrics::MetricError;
use artscore::num::NumError;
use artscore::training::{LossMode, TrainError};

/// A request the tool refuses up front: bad flag combinations, malformed
/// inputs, schema violations. Always exits with code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser)]
#[command(
    name = "artscore",
    version,
    about = "Rubric-based artwork scoring: one low-rank adapter per attribute on a frozen backbone"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic nine-attribute artwork dataset (JSONL)
    GenData(GenDataArgs),
    /// Train low-rank adapters on a scored dataset and write a checkpoint
    Train(TrainArgs),
    /// Score a dataset with a checkpoint and write the metric report CSV
    Eval(EvalArgs),
    /// Adapter overlap, score correlations, and error cases for a trained checkpoint
    Analyze(AnalyzeArgs),
    /// Two-rater agreement statistics (Pearson, ICC(2,1), Krippendorff's alpha)
    Agreement(AgreementArgs),
}

/// How the synthetic generator lays out its attribute weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightScheme {
    /// Four rubric families; identical weights within a family, orthogonal
    /// across families.
    Clustered,
    /// Nine mutually orthogonal attribute weights.
    Orthogonal,
}

/// Adapter layout flag; mirrors the `adapter_mode` config key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Shared,
    #[value(alias = "per_attribute")]
    PerAttribute,
}

impl From<ModeArg> for AdapterMode {
    fn from(m: ModeArg) -> AdapterMode {
        match m {
            ModeArg::Shared => AdapterMode::Shared,
            ModeArg::PerAttribute => AdapterMode::PerAttribute,
        }
    }
}

/// Loss flag; mirrors the `loss_mode` config key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Raft,
    Regression,
}

impl From<LossArg> for LossMode {
    fn from(l: LossArg) -> LossMode {
        match l {
            LossArg::Raft => LossMode::Raft,
            LossArg::Regression => LossMode::Regression,
        }
    }
}

#[derive(clap::Args)]
pub struct GenDataArgs {
    /// Number of samples
    #[arg(long)]
    pub n: usize,
    /// Image-feature width
    #[arg(long)]
    pub d: usize,
    /// Std of the Gaussian noise on latent scores
    #[arg(long, default_value_t = DEFAULT_NOISE_STD)]
    pub noise_std: f64,
    /// Generator seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Attribute-weight layout
    #[arg(long, value_enum, default_value_t = WeightScheme::Clustered)]
    pub weights: WeightScheme,
    /// Comment-feature width (0 disables the comment channel)
    #[arg(long, default_value_t = 0)]
    pub d_cmt: usize,
    /// Fraction of samples that carry a comment vector
    #[arg(long, default_value_t = 0.0)]
    pub comment_frac: f64,
    /// Output dataset path (JSONL)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct TrainArgs {
    /// TOML training config; omitted keys take defaults, unknown keys are rejected
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scored dataset (JSONL); split 80/10/10 into train/val/test by the config seed
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint output path; `<out>.val.csv` and `<out>.manifest.json` land beside it
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config's master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's epoch count
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override the config's adapter mode
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Override the config's loss mode
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
}

#[derive(clap::Args)]
pub struct EvalArgs {
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset to score (JSONL)
    #[arg(long)]
    pub data: PathBuf,
    /// Metric report output path (CSV: one row per attribute plus an average row)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct AnalyzeArgs {
    /// Trained per-attribute checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset to analyze errors on (JSONL)
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for overlap.csv, correlations.csv, error_cases.csv, error_summary.csv
    #[arg(long)]
    pub out_dir: PathBuf,
    /// A sample is a high-error case when strictly more than this many
    /// attributes are mispredicted
    #[arg(long, default_value_t = 2)]
    pub threshold: usize,
}

#[derive(clap::Args)]
pub struct AgreementArgs {
    /// First rater's CSV (header: id plus the nine attribute keys)
    #[arg(long)]
    pub ratings_a: PathBuf,
    /// Second rater's CSV, covering exactly the same ids
    #[arg(long)]
    pub ratings_b: PathBuf,
    /// Agreement table output path (CSV)
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let started = Instant::now();
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::GenData(args) => commands::gen_data(args, argv, started),
        Command::Train(args) => commands::train(args, argv, started),
        Command::Eval(args) => commands::eval(args, argv, started),
        Command::Analyze(args) => commands::analyze(args, argv, started),
        Command::Agreement(args) => commands::agreement(args, argv, started),
    }
}

/// Maps an error chain onto the documented exit codes. The first cause in
/// the chain with a known classification wins.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return train_code(e);
        }
        if let Some(e) = cause.downcast_ref::<AnalysisError>() {
            return analysis_code(e);
        }
        if let Some(e) = cause.downcast_ref::<DatasetError>() {
            return dataset_code(e);
        }
        if let Some(e) = cause.downcast_ref::<MetricError>() {
            return metric_code(e);
        }
        if let Some(e) = cause.downcast_ref::<AdapterError>() {
            return adapter_code(e);
        }
        if let Some(e) = cause.downcast_ref::<DecodeError>() {
            return decode_code(e);
        }
        if let Some(e) = cause.downcast_ref::<NumError>() {
            return num_code(e);
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { 1 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    1
}

fn train_code(e: &TrainError) -> u8 {
    match e {
        TrainError::Diverged { .. } => 3,
        TrainError::InvalidGold(_) | TrainError::Config(_) | TrainError::Checkpoint(_) => 2,
        TrainError::Io { .. } => 1,
        TrainError::Num(n) => num_code(n),
        TrainError::Adapter(a) => adapter_code(a),
        TrainError::Dataset(d) => dataset_code(d),
        TrainError::Decode(d) => decode_code(d),
        TrainError::Metric(m) => metric_code(m),
    }
}

fn analysis_code(e: &AnalysisError) -> u8 {
    match e {
        AnalysisError::UndefinedOverlap(_) | AnalysisError::Convergence(_) => 3,
        AnalysisError::Contract(_) => 2,
        AnalysisError::Num(n) => num_code(n),
        AnalysisError::Adapter(a) => adapter_code(a),
        AnalysisError::Metric(m) => metric_code(m),
        AnalysisError::Dataset(d) => dataset_code(d),
    }
}

fn dataset_code(e: &DatasetError) -> u8 {
    match e {
        DatasetError::Io { .. } => 1,
        _ => 2,
    }
}

fn metric_code(e: &MetricError) -> u8 {
    match e {
        MetricError::UndefinedCorrelation { .. }
        | MetricError::UndefinedAgreement(_)
        | MetricError::NonFinite(_) => 3,
        MetricError::PerAttribute { source, .. } => metric_code(source),
        _ => 2,
    }
}

fn adapter_code(e: &AdapterError) -> u8 {
    match e {
        AdapterError::Num(n) => num_code(n),
        _ => 2,
    }
}

fn decode_code(e: &DecodeError) -> u8 {
    match e {
        DecodeError::Num(n) => num_code(n),
        // A malformed distribution or NaN prediction means the numbers went
        // bad upstream, not that the request was invalid.
        _ => 3,
    }
}

fn num_code(e: &NumError) -> u8 {
    match e {
        NumError::NonFinite { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::anyhow;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(exit_code(&anyhow!(UsageError("bad".into()))), 2);
        assert_eq!(exit_code(&anyhow!(TrainError::Config("x".into()))), 2);
        assert_eq!(
            exit_code(&anyhow!(DatasetError::Validation { id: "s".into(), message: "m".into() })),
            2
        );
        assert_eq!(exit_code(&anyhow!(AnalysisError::Contract("shared".into()))), 2);
        let toml_err = toml::from_str::<artscore::training::TrainConfig>("bogus_key = 1")
            .expect_err("unknown key must fail");
        assert_eq!(exit_code(&anyhow::Error::from(toml_err)), 2);
    }

    #[test]
    fn numerical_errors_exit_3() {
        assert_eq!(
            exit_code(&anyhow!(TrainError::Diverged {
                scope: "realism".into(),
                epoch: 1,
                batch: 0
            })),
            3
        );
        assert_eq!(exit_code(&anyhow!(AnalysisError::UndefinedOverlap("zero".into()))), 3);
        assert_eq!(
            exit_code(&anyhow!(MetricError::UndefinedCorrelation { side: "prediction" })),
            3
        );
        let nested = TrainError::Metric(MetricError::PerAttribute {
            attribute: artscore::Attribute::Realism,
            source: Box::new(MetricError::UndefinedCorrelation { side: "prediction" }),
        });
        assert_eq!(exit_code(&anyhow!(nested)), 3);
    }

    #[test]
    fn io_errors_exit_1() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(exit_code(&anyhow::Error::from(io)), 1);
        assert_eq!(
            exit_code(&anyhow!(DatasetError::Io {
                path: "x".into(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "gone"),
            })),
            1
        );
    }

    #[test]
    fn context_wrapping_preserves_the_classification() {
        use anyhow::Context;
        let err: anyhow::Result<()> =
            Err(anyhow!(TrainError::Diverged { scope: "shared".into(), epoch: 2, batch: 1 }))
                .context("while training");
        assert_eq!(exit_code(&err.unwrap_err()), 3);
    }
}
