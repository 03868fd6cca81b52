//! Behavior tests for the `artscore` binary: artifact shapes, manifests,
//! determinism, and the documented exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn artscore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_artscore"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn artscore")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "unexpected exit\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Generates a small corpus in `dir` and returns its path.
fn small_corpus(dir: &Path, d: usize, seed: u64) -> PathBuf {
    let data = dir.join(format!("data-{d}-{seed}.jsonl"));
    let out = artscore(
        dir,
        &[
            "gen-data",
            "--n",
            "60",
            "--d",
            &d.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
            data.to_str().unwrap(),
        ],
    );
    assert_exit(&out, 0);
    data
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.toml");
    let base = "embed_dim = 8\nrank = 2\nalpha = 4.0\nlearning_rate = 0.1\nepochs = 1\nbatch_size = 16\nseed = 3\n";
    fs::write(&path, format!("{base}{extra}")).unwrap();
    path
}

#[test]
fn gen_data_is_byte_deterministic_and_writes_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();

    let args = ["gen-data", "--n", "60", "--d", "8", "--seed", "3", "--out", "data.jsonl"];
    assert_exit(&artscore(&a, &args), 0);
    assert_exit(&artscore(&b, &args), 0);

    let bytes_a = fs::read(a.join("data.jsonl")).unwrap();
    let bytes_b = fs::read(b.join("data.jsonl")).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b, "same seed must generate identical bytes");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("data.jsonl.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["tool"], "artscore");
    assert_eq!(manifest["seeds"]["generator"], 3);
    assert!(manifest["outputs"]["data.jsonl"].is_string());
    assert!(manifest["command"].as_array().unwrap().iter().any(|v| v == "gen-data"));
}

#[test]
fn train_writes_checkpoint_report_and_manifest_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = small_corpus(dir, 8, 3);
    let config = small_config(dir, "");

    let train = |out: &str| {
        let o = artscore(
            dir,
            &[
                "train",
                "--config",
                config.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--out",
                out,
            ],
        );
        assert_exit(&o, 0);
    };
    train("m1.json");
    train("m2.json");
    assert_eq!(
        fs::read(dir.join("m1.json")).unwrap(),
        fs::read(dir.join("m2.json")).unwrap(),
        "training must be deterministic for a fixed config"
    );

    let val_csv = fs::read_to_string(dir.join("m1.json.val.csv")).unwrap();
    assert!(val_csv.starts_with("attribute,sc,pc,acc,mse,qwk\n"));
    assert_eq!(val_csv.lines().count(), 11, "header + 9 attributes + average");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("m1.json.manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["inputs"]["data"].is_string());
    assert!(manifest["inputs"]["config_file"].is_string());
    assert!(manifest["inputs"]["config_effective"].is_string());
    assert_eq!(manifest["seeds"]["train"], 3);
    assert_eq!(manifest["checkpoint_format_version"], 1);
    assert!(manifest["outputs"]["m1.json"].is_string());
    assert!(manifest["outputs"]["m1.json.val.csv"].is_string());
}

#[test]
fn eval_report_is_stable_and_dimension_mismatch_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = small_corpus(dir, 8, 3);
    let config = small_config(dir, "");
    assert_exit(
        &artscore(
            dir,
            &[
                "train",
                "--config",
                config.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--out",
                "m.json",
            ],
        ),
        0,
    );

    let eval = |data: &str, out: &str| {
        artscore(dir, &["eval", "--checkpoint", "m.json", "--data", data, "--out", out])
    };
    assert_exit(&eval(data.to_str().unwrap(), "r1.csv"), 0);
    assert_exit(&eval(data.to_str().unwrap(), "r2.csv"), 0);
    assert_eq!(
        fs::read(dir.join("r1.csv")).unwrap(),
        fs::read(dir.join("r2.csv")).unwrap(),
        "re-evaluation must be byte-identical"
    );
    let report = fs::read_to_string(dir.join("r1.csv")).unwrap();
    assert_eq!(report.lines().count(), 11);

    // A dataset of the wrong width is refused up front, naming the field.
    let wide = small_corpus(dir, 10, 3);
    let out = eval(wide.to_str().unwrap(), "r3.csv");
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("d_img"), "stderr: {}", stderr(&out));
}

#[test]
fn config_and_flag_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = small_corpus(dir, 8, 3);

    // Unknown flag: clap's usage error.
    assert_exit(&artscore(dir, &["gen-data", "--bogus", "1"]), 2);

    // Unknown config key.
    let bad = dir.join("bad.toml");
    fs::write(&bad, "epochs = 1\nlerning_rate = 0.1\n").unwrap();
    let out = artscore(
        dir,
        &[
            "train",
            "--config",
            bad.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            "m.json",
        ],
    );
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("lerning_rate"), "stderr: {}", stderr(&out));

    // Invalid config value caught by validation.
    let negative = dir.join("negative.toml");
    fs::write(&negative, "learning_rate = -1.0\n").unwrap();
    let out = artscore(
        dir,
        &[
            "train",
            "--config",
            negative.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            "m.json",
        ],
    );
    assert_exit(&out, 2);

    // An empty generator request is a validation error.
    assert_exit(&artscore(dir, &["gen-data", "--n", "0", "--d", "8", "--out", "x.jsonl"]), 2);
}

#[test]
fn missing_input_files_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = artscore(dir, &["train", "--data", "no-such.jsonl", "--out", "m.json"]);
    assert_exit(&out, 1);
}

#[test]
fn divergent_training_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = small_corpus(dir, 8, 3);
    // Learning rate far beyond stability for the regression head.
    let huge = dir.join("huge.toml");
    fs::write(
        &huge,
        "embed_dim = 8\nrank = 2\nalpha = 4.0\nepochs = 40\nseed = 3\nloss_mode = \"regression\"\nlearning_rate = 1e6\n",
    )
    .unwrap();
    let out = artscore(
        dir,
        &[
            "train",
            "--config",
            huge.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            "m.json",
        ],
    );
    assert_exit(&out, 3);
}

#[test]
fn analyze_demands_a_trained_per_attribute_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = small_corpus(dir, 8, 3);
    let config = small_config(dir, "");

    // Shared-mode checkpoint: wrong shape for per-attribute analysis.
    assert_exit(
        &artscore(
            dir,
            &[
                "train",
                "--config",
                config.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--out",
                "shared.json",
                "--mode",
                "shared",
            ],
        ),
        0,
    );
    let out = artscore(
        dir,
        &[
            "analyze",
            "--checkpoint",
            "shared.json",
            "--data",
            data.to_str().unwrap(),
            "--out-dir",
            "a1",
        ],
    );
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("per-attribute"), "stderr: {}", stderr(&out));

    // Untrained adapters have no update subspace to compare.
    assert_exit(
        &artscore(
            dir,
            &[
                "train",
                "--config",
                config.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--out",
                "fresh.json",
                "--epochs",
                "0",
            ],
        ),
        0,
    );
    let out = artscore(
        dir,
        &[
            "analyze",
            "--checkpoint",
            "fresh.json",
            "--data",
            data.to_str().unwrap(),
            "--out-dir",
            "a2",
        ],
    );
    assert_exit(&out, 3);
}

#[test]
fn analyze_writes_all_four_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = small_corpus(dir, 8, 3);
    let config = small_config(dir, "");
    assert_exit(
        &artscore(
            dir,
            &[
                "train",
                "--config",
                config.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--out",
                "m.json",
                "--epochs",
                "2",
            ],
        ),
        0,
    );
    assert_exit(
        &artscore(
            dir,
            &[
                "analyze",
                "--checkpoint",
                "m.json",
                "--data",
                data.to_str().unwrap(),
                "--out-dir",
                "analysis",
                "--threshold",
                "2",
            ],
        ),
        0,
    );
    for name in ["overlap.csv", "correlations.csv", "error_cases.csv", "error_summary.csv", "manifest.json"] {
        assert!(dir.join("analysis").join(name).exists(), "missing {name}");
    }
    let overlap = fs::read_to_string(dir.join("analysis/overlap.csv")).unwrap();
    assert!(overlap.starts_with("attribute,realism,"));
    assert_eq!(overlap.lines().count(), 10, "header + 9 rows");
    let summary = fs::read_to_string(dir.join("analysis/error_summary.csv")).unwrap();
    assert!(summary.contains("\nthreshold,2\n"));
}

#[test]
fn agreement_matches_ids_and_lists_offenders() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let header = "id,realism,deformation,imagination,color_richness,color_contrast,line_combination,line_texture,picture_organization,transformation";

    // Identical ratings in a different row order: full agreement.
    fs::write(
        dir.join("a.csv"),
        format!("{header}\nitem-1,1,2,3,4,5,1,2,3,4\nitem-2,5,4,3,2,1,5,4,3,2\nitem-3,2,3,4,5,1,2,3,4,5\n"),
    )
    .unwrap();
    fs::write(
        dir.join("b.csv"),
        format!("{header}\nitem-3,2,3,4,5,1,2,3,4,5\nitem-1,1,2,3,4,5,1,2,3,4\nitem-2,5,4,3,2,1,5,4,3,2\n"),
    )
    .unwrap();
    let out = artscore(
        dir,
        &["agreement", "--ratings-a", "a.csv", "--ratings-b", "b.csv", "--out", "agree.csv"],
    );
    assert_exit(&out, 0);
    let table = fs::read_to_string(dir.join("agree.csv")).unwrap();
    assert!(table.starts_with("attribute,pc,icc,alpha,alpha_degenerate\n"));
    assert_eq!(table.lines().count(), 10);
    for line in table.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(&fields[1..], &["1", "1", "1", "false"], "line: {line}");
    }

    // Mismatched ids are refused, naming the offenders.
    fs::write(
        dir.join("c.csv"),
        format!("{header}\nitem-1,1,2,3,4,5,1,2,3,4\nitem-9,5,4,3,2,1,5,4,3,2\nitem-3,2,3,4,5,1,2,3,4,5\n"),
    )
    .unwrap();
    let out = artscore(
        dir,
        &["agreement", "--ratings-a", "a.csv", "--ratings-b", "c.csv", "--out", "x.csv"],
    );
    assert_exit(&out, 2);
    let err = stderr(&out);
    assert!(err.contains("item-2") && err.contains("item-9"), "stderr: {err}");
}
