use std::path::Path;
use std::process::{Command, Output};

use hierda::cli::DatasetIndex;
use hierda::data::{parse_dataset, SymptomVocabulary};
use hierda::hierarchy::{build_hierarchy, compute_stats};
use hierda::mapfit::{log_sum_exp, FittedParams};

fn hierda(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierda"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const VOCAB: &str = "fever\ncough\nheadache\n";
const GOOD: &str = "obs_id,age_years,gender,label,fever,cough,headache
a1,34,female,1,1,1,0
a2,70,male,0,0,1,0
a3,3,female,1,1,0,1
a4,15,male,0,0,0,0
";

fn small_corpus(dir: &Path) {
    std::fs::write(dir.join("vocab.txt"), VOCAB).unwrap();
    std::fs::write(dir.join("site_a.csv"), GOOD).unwrap();
    // No headache column: filled with zeros and reported as a warning.
    std::fs::write(
        dir.join("site_b.csv"),
        "obs_id,age_group,gender,label,fever,cough\nb1,16-44,male,1,1,0\nb2,65+,female,0,0,1\n",
    )
    .unwrap();
}

#[test]
fn validate_well_formed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let out = hierda(
        dir.path(),
        &["validate", "--vocab", "vocab.txt", "cs:site_a.csv", "healthworker:site_b.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], true);
    for f in report["files"].as_array().unwrap() {
        assert!(f["errors"].as_array().unwrap().is_empty());
    }
    assert!(report["files"][1]["warnings"][0].as_str().unwrap().contains("headache"));
}

#[test]
fn validate_bad_row_names_file_and_row() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    std::fs::write(dir.path().join("bad.csv"), GOOD.replace("a2,70,male", "a2,seventy,male")).unwrap();
    let out = hierda(dir.path(), &["validate", "--vocab", "vocab.txt", "cs:site_a.csv", "cs:bad.csv"]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let err = report["files"][1]["errors"][0].as_str().unwrap();
    assert!(err.contains("bad.csv") && err.contains("row 3"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let missing_vocab = hierda(dir.path(), &["validate", "--vocab", "nope.txt", "cs:site_a.csv"]);
    assert_eq!(code(&missing_vocab), 2);
    let unknown_flag = hierda(dir.path(), &["fit", "--frobnicate"]);
    assert_eq!(code(&unknown_flag), 2);
    let bad_config = dir.path().join("bad_config.json");
    std::fs::write(&bad_config, r#"{"beta": 0.2, "betta": 1}"#).unwrap();
    let out = hierda(
        dir.path(),
        &["fit", "--config", "bad_config.json", "--target", "site_a", "--vocab", "vocab.txt", "cs:site_a.csv"],
    );
    assert_eq!(code(&out), 2);
}

fn synth_into(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", "data"];
    args.extend_from_slice(extra);
    let out = hierda(dir, &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fit_rejects_absent_target() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    let out = hierda(dir.path(), &["fit", "--target", "atlantis", "data/datasets.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("atlantis"));
}

#[test]
fn fit_with_zero_beta_recovers_smoothed_ppv() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    let out = hierda(
        dir.path(),
        &["fit", "--beta", "0.0", "--target", "hutterite", "--out", "model", "data/datasets.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fitted = FittedParams::from_json(&std::fs::read_to_string(dir.path().join("model/fitted.json")).unwrap()).unwrap();
    assert_eq!(fitted.config.beta, 0.0);

    // Source datasets enter whole, so their statistics can be recomputed from the files.
    let data = dir.path().join("data");
    let index: DatasetIndex = serde_json::from_str(&std::fs::read_to_string(data.join("datasets.json")).unwrap()).unwrap();
    let vocab = SymptomVocabulary::from_text(&std::fs::read_to_string(data.join("vocab.txt")).unwrap()).unwrap();
    let sources: Vec<_> = index
        .datasets
        .iter()
        .filter(|e| e.dataset_id != "hutterite")
        .map(|e| {
            let text = std::fs::read_to_string(data.join(&e.path)).unwrap();
            parse_dataset(&text, &vocab, &e.dataset_id, e.domain).unwrap().dataset
        })
        .collect();
    let stats = compute_stats(&build_hierarchy(&sources, &vocab).unwrap(), &sources).unwrap();
    for d in &sources {
        let id = format!("dataset:{}", d.dataset_id);
        let theta = fitted.params(&id).unwrap();
        let lse = log_sum_exp(theta).unwrap();
        let f = &stats[&id].ppv;
        let total: f64 = f.iter().map(|v| v + 1.0).sum();
        for (t, fj) in theta.iter().zip(f) {
            assert!(((t - lse).exp() - (fj + 1.0) / total).abs() < 1e-4);
        }
    }
}

#[test]
fn fit_is_deterministic_and_manifest_lists_inputs() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    for out in ["m1", "m2"] {
        let o = hierda(dir.path(), &["fit", "--target", "goviral", "--seed", "4", "--out", out, "data/datasets.json"]);
        assert_eq!(code(&o), 0);
    }
    for f in ["fitted.json", "model.json", "manifest.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("m1").join(f)).unwrap(),
            std::fs::read(dir.path().join("m2").join(f)).unwrap(),
            "{f}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("m1/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["config"]["target_dataset_id"], "goviral");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 6);
}

#[test]
fn synth_seed_flag_changes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, seed: &str| {
        let o = hierda(dir.path(), &["synth", "--seed", seed, "--out", out]);
        assert_eq!(code(&o), 0);
        std::fs::read(dir.path().join(out).join("goviral.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_ne!(a, run("c", "2"));
    for f in ["goviral.csv", "fluwatch.csv", "hongkong.csv", "hutterite.csv", "truth.json", "vocab.txt", "datasets.json", "manifest.json"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn synth_reports_bad_mixture_by_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let spec = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("benchmark/synth_spec.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&spec).unwrap();
    v["datasets"][2]["mixture"][0][0] = serde_json::json!(0.5);
    std::fs::write(dir.path().join("spec.json"), v.to_string()).unwrap();
    let out = hierda(dir.path(), &["synth", "--spec", "spec.json", "--out", "x"]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("hongkong"));
}

#[test]
fn shipped_spec_matches_builtin_benchmark() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("benchmark/synth_spec.json")).unwrap();
    assert_eq!(hierda::synth::SynthSpec::from_json(&text).unwrap(), hierda::synth::SynthSpec::benchmark());
}

#[test]
fn eval_is_byte_identical_across_reruns_and_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{"targets": ["fluwatch"], "methods": ["TARGET_ONLY", "HIER_P"], "proportions": [0.2], "seeds": [0, 1, 2, 3]}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (out, jobs) in [("e1", "1"), ("e2", "1"), ("e3", "4")] {
        let o = hierda(dir.path(), &["eval", "--spec", "exp.json", "--jobs", jobs, "--out", out, "data/datasets.json"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let files: Vec<Vec<u8>> = ["results.csv", "aggregates.csv", "table1.md", "manifest.json"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(out).join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn eval_with_unknown_target_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    std::fs::write(dir.path().join("exp.json"), r#"{"targets": ["nowhere"]}"#).unwrap();
    let o = hierda(dir.path(), &["eval", "--spec", "exp.json", "data/datasets.json"]);
    assert_eq!(code(&o), 2);
}
