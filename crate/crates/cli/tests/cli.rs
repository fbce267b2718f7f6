//! End-to-end tests of the `rvfldl` binary: every verb, the exit-code
//! contract, and the report schema published in `docs/report.schema.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rvfldl::rng::RandomStream;
use serde_json::{json, Value};

struct RunOutput {
    status: i32,
    stdout: String,
    stderr: String,
}

fn run_in(dir: &Path, args: &[&str]) -> RunOutput {
    let output = Command::new(env!("CARGO_BIN_EXE_rvfldl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("the binary runs");
    RunOutput {
        status: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn write_blob_csv(path: &Path, count: usize, dimension: usize, labeled: bool, seed: u64) {
    let mut stream = RandomStream::new(seed);
    let mut text = String::new();
    for j in 0..count {
        let class = j % 2;
        let center = if class == 1 { 2.0 } else { -2.0 };
        let noise = stream.standard_normals(dimension);
        for (i, n) in noise.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            let _ = write!(text, "{:.6}", center + 0.5 * n);
        }
        if labeled {
            let _ = write!(text, ",{class}");
        }
        text.push('\n');
    }
    fs::write(path, text).expect("fixture written");
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).expect("config written");
    path
}

fn train_section(k: usize, seed: u64) -> Value {
    json!({ "k": k, "runs_r": 2, "folds_t": 2, "master_seed": seed, "normalize": "off" })
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    serde_json::from_str(&fs::read_to_string(path).expect("schema file readable"))
        .expect("schema parses")
}

/// Checks an emitted report against the published schema: no unknown
/// keys, required keys present, and every value inside its declared
/// type, enum, and bounds.
fn validated_report(out_dir: &Path) -> Value {
    let text = fs::read_to_string(out_dir.join("report.json")).expect("report.json exists");
    let report: Value = serde_json::from_str(&text).expect("report parses");
    let schema = schema();
    let object = report.as_object().expect("report is an object");
    let properties = schema["properties"]
        .as_object()
        .expect("schema lists properties");
    if schema["additionalProperties"] == Value::Bool(false) {
        for key in object.keys() {
            assert!(
                properties.contains_key(key),
                "report key {key:?} is not in the schema"
            );
        }
    }
    for required in schema["required"]
        .as_array()
        .expect("schema lists required keys")
    {
        let key = required.as_str().unwrap();
        assert!(
            object.contains_key(key),
            "report misses required key {key:?}"
        );
    }
    for (key, value) in object {
        let rules = &properties[key.as_str()];
        match rules["type"].as_str().expect("property has a type") {
            "string" => assert!(value.is_string(), "{key} should be a string"),
            "integer" => assert!(
                value.is_i64() || value.is_u64(),
                "{key} should be an integer"
            ),
            "number" => assert!(value.is_number(), "{key} should be a number"),
            other => panic!("schema type {other} is not handled"),
        }
        if let Some(options) = rules["enum"].as_array() {
            assert!(
                options.contains(value),
                "{key} value {value} is outside the schema enum"
            );
        }
        if let Some(minimum) = rules["minimum"].as_f64() {
            assert!(
                value.as_f64().unwrap() >= minimum,
                "{key} = {value} is below {minimum}"
            );
        }
        if let Some(maximum) = rules["maximum"].as_f64() {
            assert!(
                value.as_f64().unwrap() <= maximum,
                "{key} = {value} is above {maximum}"
            );
        }
    }
    report
}

fn trained_dir(root: &Path, config_name: &str, out_name: &str) -> PathBuf {
    let result = run_in(root, &["train", "--config", config_name, "--out", out_name]);
    assert_eq!(result.status, 0, "train failed: {}", result.stderr);
    root.join(out_name)
}

#[test]
fn train_writes_model_and_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 80, 2, true, 11);
    write_config(
        dir.path(),
        "run.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 7),
        }),
    );
    let result = run_in(
        dir.path(),
        &["train", "--config", "run.json", "--out", "out"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    assert!(
        result.stdout.contains("report written"),
        "stdout: {}",
        result.stdout
    );
    assert!(dir.path().join("out/model.rvfldl").is_file());
    assert!(dir.path().join("out/meta.json").is_file());
    let report = validated_report(&dir.path().join("out"));
    assert_eq!(report["task"], "train-sup");
    assert_eq!(report["samples"], 80);
    assert_eq!(report["classes"], 2);
}

#[test]
fn missing_dataset_path_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "run.json",
        &json!({
            "task": "train-unsup",
            "train_images": "absent/train.csv",
            "train": train_section(4, 7),
        }),
    );
    let result = run_in(
        dir.path(),
        &["train", "--config", "run.json", "--out", "out"],
    );
    assert_eq!(result.status, 2, "stderr: {}", result.stderr);
    assert!(
        result.stderr.contains("absent/train.csv"),
        "the error should name the missing path: {}",
        result.stderr
    );
}

#[test]
fn same_seed_trains_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 2, true, 12);
    write_config(
        dir.path(),
        "run.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 21),
        }),
    );
    let first = trained_dir(dir.path(), "run.json", "out_a");
    let second = trained_dir(dir.path(), "run.json", "out_b");
    assert_eq!(
        fs::read(first.join("model.rvfldl")).unwrap(),
        fs::read(second.join("model.rvfldl")).unwrap(),
        "model files should be byte-identical"
    );
    assert_eq!(
        fs::read(first.join("report.json")).unwrap(),
        fs::read(second.join("report.json")).unwrap(),
        "reports should be byte-identical"
    );
}

#[test]
fn classify_blobs_reports_high_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 80, 2, true, 13);
    write_blob_csv(&dir.path().join("query.csv"), 40, 2, true, 14);
    write_config(
        dir.path(),
        "train.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 7),
        }),
    );
    write_config(
        dir.path(),
        "classify.json",
        &json!({
            "task": "classify",
            "train_images": "train.csv",
            "query_images": "query.csv",
            "query_labels": "query.csv",
            "model_in": "out/model.rvfldl",
        }),
    );
    trained_dir(dir.path(), "train.json", "out");
    let result = run_in(
        dir.path(),
        &["classify", "--config", "classify.json", "--out", "cls"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("cls"));
    assert!(
        report["accuracy"].as_f64().unwrap() >= 0.95,
        "blob accuracy should be at least 0.95, got {}",
        report["accuracy"]
    );
    let predictions = fs::read_to_string(dir.path().join("cls/predictions.csv")).unwrap();
    let mut lines = predictions.lines();
    assert_eq!(lines.next(), Some("index,predicted,score_0,score_1"));
    assert_eq!(lines.count(), 40, "one prediction row per query");
}

#[test]
fn argmax_classify_needs_no_training_set() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 80, 2, true, 15);
    write_blob_csv(&dir.path().join("query.csv"), 30, 2, true, 16);
    write_config(
        dir.path(),
        "train.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 7),
        }),
    );
    write_config(
        dir.path(),
        "classify.json",
        &json!({
            "task": "classify",
            "query_images": "query.csv",
            "query_labels": "query.csv",
            "model_in": "out/model.rvfldl",
        }),
    );
    trained_dir(dir.path(), "train.json", "out");
    let result = run_in(
        dir.path(),
        &[
            "classify",
            "--config",
            "classify.json",
            "--out",
            "cls",
            "--argmax",
        ],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("cls"));
    assert!(
        report["accuracy"].as_f64().unwrap() >= 0.95,
        "argmax accuracy should be at least 0.95, got {}",
        report["accuracy"]
    );
}

#[test]
fn query_dimension_mismatch_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 2, true, 17);
    write_blob_csv(&dir.path().join("query.csv"), 10, 5, false, 18);
    write_config(
        dir.path(),
        "train.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 7),
        }),
    );
    write_config(
        dir.path(),
        "classify.json",
        &json!({
            "task": "classify",
            "train_images": "train.csv",
            "query_images": "query.csv",
            "model_in": "out/model.rvfldl",
        }),
    );
    trained_dir(dir.path(), "train.json", "out");
    let result = run_in(
        dir.path(),
        &["classify", "--config", "classify.json", "--out", "cls"],
    );
    assert_eq!(result.status, 3, "stderr: {}", result.stderr);
    assert!(
        result.stderr.starts_with("error: data:"),
        "stderr: {}",
        result.stderr
    );
}

#[test]
fn unlabeled_query_omits_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 2, true, 19);
    write_blob_csv(&dir.path().join("query.csv"), 20, 2, false, 20);
    write_config(
        dir.path(),
        "train.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 7),
        }),
    );
    write_config(
        dir.path(),
        "classify.json",
        &json!({
            "task": "classify",
            "train_images": "train.csv",
            "query_images": "query.csv",
            "model_in": "out/model.rvfldl",
        }),
    );
    trained_dir(dir.path(), "train.json", "out");
    let result = run_in(
        dir.path(),
        &["classify", "--config", "classify.json", "--out", "cls"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("cls"));
    assert!(
        report.get("accuracy").is_none(),
        "no truth labels, no accuracy field"
    );
    assert!(dir.path().join("cls/predictions.csv").is_file());
}

#[test]
fn reconstruct_writes_ssim_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 4, false, 22);
    write_config(
        dir.path(),
        "train.json",
        &json!({
            "task": "train-unsup",
            "train_images": "train.csv",
            "train": train_section(4, 9),
        }),
    );
    write_config(
        dir.path(),
        "recon.json",
        &json!({
            "task": "reconstruct",
            "query_images": "train.csv",
            "model_in": "out/model.rvfldl",
            "write_pgm": true,
        }),
    );
    trained_dir(dir.path(), "train.json", "out");
    let result = run_in(
        dir.path(),
        &["reconstruct", "--config", "recon.json", "--out", "rec"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("rec"));
    assert!(
        report["mean_ssim"].as_f64().unwrap() >= 0.95,
        "mean SSIM should be at least 0.95, got {}",
        report["mean_ssim"]
    );
    assert_eq!(report["pgm_count"], 60);
    let ssim_rows = fs::read_to_string(dir.path().join("rec/ssim.csv")).unwrap();
    assert_eq!(
        ssim_rows.lines().count(),
        61,
        "header plus one row per image"
    );
    let pgm = fs::read(dir.path().join("rec/pgm/recon_00000.pgm")).unwrap();
    assert!(
        pgm.starts_with(b"P5\n2 2\n255\n"),
        "PGM header for a 2x2 image"
    );
    assert_eq!(
        pgm.len(),
        "P5\n2 2\n255\n".len() + 4,
        "four pixel bytes follow"
    );
}

#[test]
fn eval_reports_consistent_sparsity_ratio() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 4, true, 23);
    write_config(
        dir.path(),
        "train.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 9),
        }),
    );
    write_config(
        dir.path(),
        "eval.json",
        &json!({
            "task": "eval",
            "query_images": "train.csv",
            "query_labels": "train.csv",
            "model_in": "out/model.rvfldl",
        }),
    );
    trained_dir(dir.path(), "train.json", "out");
    let result = run_in(
        dir.path(),
        &["eval", "--config", "eval.json", "--out", "ev"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("ev"));
    let without = report["sparsity_without"].as_f64().unwrap();
    let with = report["sparsity_with"].as_f64().unwrap();
    let ratio = report["sparsity_ratio"].as_f64().unwrap();
    assert!(without > 0.0 && with > 0.0);
    assert!(
        (ratio - with / without).abs() <= 1e-12,
        "ratio {ratio} should equal {with}/{without}"
    );
    assert!(
        ratio <= 2.0,
        "enhancement should not double the active set, got {ratio}"
    );
    assert!(report["relative_reconstruction_error"].as_f64().unwrap() < 0.5);
}

#[test]
fn sweep_two_by_two_grid_has_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 2, true, 24);
    write_blob_csv(&dir.path().join("query.csv"), 30, 2, true, 25);
    write_config(
        dir.path(),
        "sweep.json",
        &json!({
            "task": "sweep",
            "train_images": "train.csv",
            "query_images": "query.csv",
            "query_labels": "query.csv",
            "train": { "k": 4, "runs_r": 1, "folds_t": 1, "master_seed": 7, "normalize": "off" },
            "sweep": { "mu1": [0.1, 0.2], "mu3": [0.05, 0.1], "seeds": [7, 8] },
        }),
    );
    let result = run_in(
        dir.path(),
        &["sweep", "--config", "sweep.json", "--out", "sw"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("sw"));
    assert_eq!(report["grid_points"], 4);
    let csv = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("mu1,mu2,mu3,degree,reg_c,accuracy_mean,accuracy_std")
    );
    assert_eq!(lines.count(), 4, "one data row per grid point");
}

#[test]
fn sweep_deduplicates_repeated_points() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 2, true, 26);
    write_blob_csv(&dir.path().join("query.csv"), 30, 2, true, 27);
    write_config(
        dir.path(),
        "sweep.json",
        &json!({
            "task": "sweep",
            "train_images": "train.csv",
            "query_images": "query.csv",
            "query_labels": "query.csv",
            "train": { "k": 4, "runs_r": 1, "folds_t": 1, "master_seed": 7, "normalize": "off" },
            "sweep": { "mu1": [0.2, 0.2, 0.1] },
        }),
    );
    let result = run_in(
        dir.path(),
        &["sweep", "--config", "sweep.json", "--out", "sw"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("sw"));
    assert_eq!(
        report["grid_points"], 2,
        "the repeated point should be dropped"
    );
    let csv = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "header plus two unique rows");
}

#[test]
fn sweep_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 60, 2, true, 28);
    write_blob_csv(&dir.path().join("query.csv"), 30, 2, true, 29);
    write_config(
        dir.path(),
        "sweep.json",
        &json!({
            "task": "sweep",
            "train_images": "train.csv",
            "query_images": "query.csv",
            "query_labels": "query.csv",
            "train": { "k": 4, "runs_r": 1, "folds_t": 1, "master_seed": 7, "normalize": "off" },
            "sweep": { "mu2": [] },
        }),
    );
    let result = run_in(
        dir.path(),
        &["sweep", "--config", "sweep.json", "--out", "sw"],
    );
    assert_eq!(result.status, 2, "stderr: {}", result.stderr);
    assert!(result.stderr.contains("mu2"), "stderr: {}", result.stderr);
}

#[test]
fn sweep_defaults_row_lands_in_top_half() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 80, 2, true, 30);
    write_blob_csv(&dir.path().join("query.csv"), 40, 2, true, 31);
    write_config(
        dir.path(),
        "sweep.json",
        &json!({
            "task": "sweep",
            "train_images": "train.csv",
            "query_images": "query.csv",
            "query_labels": "query.csv",
            "train": { "k": 4, "runs_r": 1, "folds_t": 1, "master_seed": 7, "normalize": "off" },
            "sweep": {
                "mu1": [0.002, 0.2, 60.0],
                "mu2": [0.2],
                "mu3": [0.001, 0.1, 80.0],
            },
        }),
    );
    let result = run_in(
        dir.path(),
        &["sweep", "--config", "sweep.json", "--out", "sw"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let csv = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    let rows: Vec<(f64, f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            (
                fields[0].parse().unwrap(),
                fields[2].parse().unwrap(),
                fields[5].parse().unwrap(),
            )
        })
        .collect();
    let defaults = rows
        .iter()
        .find(|(mu1, mu3, _)| *mu1 == 0.2 && *mu3 == 0.1)
        .expect("the defaults point is in the grid");
    let better = rows.iter().filter(|(_, _, acc)| *acc > defaults.2).count();
    assert!(
        better <= rows.len() / 2,
        "defaults accuracy {} should rank in the top half",
        defaults.2
    );
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "run.json",
        &json!({ "task": "eval", "query_images": "x.csv", "model_in": "m", "bogus": 3 }),
    );
    let result = run_in(
        dir.path(),
        &["eval", "--config", "run.json", "--out", "out"],
    );
    assert_eq!(result.status, 2, "stderr: {}", result.stderr);
    assert!(
        result.stderr.contains("unknown field"),
        "stderr: {}",
        result.stderr
    );
}

#[test]
fn task_verb_mismatch_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_csv(&dir.path().join("train.csv"), 20, 2, true, 32);
    write_config(
        dir.path(),
        "run.json",
        &json!({
            "task": "train-sup",
            "train_images": "train.csv",
            "train": train_section(4, 7),
        }),
    );
    let result = run_in(
        dir.path(),
        &["eval", "--config", "run.json", "--out", "out"],
    );
    assert_eq!(result.status, 2, "stderr: {}", result.stderr);
    assert!(
        result.stderr.contains("does not match"),
        "stderr: {}",
        result.stderr
    );
}

#[test]
fn missing_config_flag_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_in(dir.path(), &["train"]);
    assert_eq!(result.status, 2, "stderr: {}", result.stderr);
    assert!(
        result.stderr.contains("--config"),
        "stderr: {}",
        result.stderr
    );
}

#[test]
fn idx_dataset_trains_with_label_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut stream = RandomStream::new(33);
    let count = 24usize;
    let mut images = vec![0u8, 0, 8, 3];
    images.extend((count as u32).to_be_bytes());
    images.extend(2u32.to_be_bytes());
    images.extend(2u32.to_be_bytes());
    let mut labels = vec![0u8, 0, 8, 1];
    labels.extend((count as u32).to_be_bytes());
    for j in 0..count {
        let class = (j % 2) as u8;
        let base = if class == 1 { 200.0 } else { 40.0 };
        for _ in 0..4 {
            let pixel = base + 20.0 * stream.next_f64();
            images.push(pixel as u8);
        }
        labels.push(class);
    }
    fs::write(dir.path().join("train-images.idx3-ubyte"), images).unwrap();
    fs::write(dir.path().join("train-labels.idx1-ubyte"), labels).unwrap();
    write_config(
        dir.path(),
        "run.json",
        &json!({
            "task": "train-sup",
            "train_images": "train-images.idx3-ubyte",
            "train_labels": "train-labels.idx1-ubyte",
            "train": { "k": 3, "runs_r": 1, "folds_t": 1, "master_seed": 7, "normalize": "pixel" },
        }),
    );
    let result = run_in(
        dir.path(),
        &["train", "--config", "run.json", "--out", "out"],
    );
    assert_eq!(result.status, 0, "stderr: {}", result.stderr);
    let report = validated_report(&dir.path().join("out"));
    assert_eq!(report["samples"], 24);
    assert_eq!(report["classes"], 2);
}
