use std::time::Instant;

use artscore::dataset::{
    default_weights, generate_synthetic, orthogonal_weights, save_jsonl, SyntheticSpec,
};

use crate::manifest::{manifest_path, RunManifest};
use crate::{GenDataArgs, WeightScheme};

pub fn run(args: GenDataArgs, argv: Vec<String>, started: Instant) -> anyhow::Result<()> {
    let attribute_weights = match args.weights {
        WeightScheme::Clustered => default_weights(args.d, args.seed)?,
        WeightScheme::Orthogonal => orthogonal_weights(args.d, args.seed)?,
    };
    let spec = SyntheticSpec {
        n_samples: args.n,
        d_img: args.d,
        attribute_weights,
        noise_std: args.noise_std,
        seed: args.seed,
        d_cmt: args.d_cmt,
        comment_frac: args.comment_frac,
    };
    let samples = generate_synthetic(&spec)?;
    save_jsonl(&args.out, &samples)?;
    println!("wrote {} samples to {}", samples.len(), args.out.display());

    let mut manifest = RunManifest::new(argv);
    manifest.seed("generator", args.seed);
    manifest.output_file(&args.out)?;
    manifest.write(&manifest_path(&args.out), started)?;
    Ok(())
}
