use std::path::Path;
use std::process::{Command, Output};

use serkit::corpus::SynthSpec;

fn serkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serkit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run serkit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}\n{}\n{}", o.status.code(), stdout(&o), stderr(&o));
    stdout(&o)
}

fn tiny_spec() -> SynthSpec {
    SynthSpec {
        speakers: 4,
        clips_per_speaker: 8,
        min_duration_s: 0.5,
        max_duration_s: 1.0,
        ..SynthSpec::default()
    }
}

/// Tiny four-language corpus plus a config running one quick epoch.
fn workspace(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), serde_json::to_string(&tiny_spec()).unwrap()).unwrap();
    ok(serkit(&["synth", "--out", "corpora", "--spec", "spec.json"], dir.path()));
    let config = format!(
        r#"{{
        "corpora": [
            {{"id": "SYNTH:ased", "path": "corpora/ased"}},
            {{"id": "SYNTH:emodb", "path": "corpora/emodb"}},
            {{"id": "SYNTH:ravdess", "path": "corpora/ravdess"}},
            {{"id": "SYNTH:urdu", "path": "corpora/urdu"}}
        ],
        "train": {{"epochs": 1, "seeds": [11]}},
        "output_dir": "out"{extra}
    }}"#
    );
    std::fs::write(dir.path().join("c.json"), config).unwrap();
    dir
}

#[test]
fn scan_reports_counts_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = ok(serkit(&["scan", "--corpus", "urdu", "--root", "empty", "--out", "m.csv"], dir.path()));
    assert!(out.contains("0 clips"), "{out}");

    let bad = serkit(&["scan", "--corpus", "urdu", "--root", "missing"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("directory not found"), "{}", stderr(&bad));

    let unknown = serkit(&["scan", "--corpus", "klingon", "--root", "empty"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    std::fs::write(dir.path().join("spec.json"), serde_json::to_string(&tiny_spec()).unwrap()).unwrap();
    ok(serkit(&["synth", "--out", "c", "--spec", "spec.json"], dir.path()));
    let out = ok(serkit(&["scan", "--corpus", "SYNTH:urdu", "--root", "c/urdu", "--out", "u.csv"], dir.path()));
    assert!(out.contains("32 clips, 4 speakers"), "{out}");
    assert!(out.contains("| Duration (s) | Clips |"));
    let csv = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn synth_is_deterministic_and_validates_spec() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), serde_json::to_string(&tiny_spec()).unwrap()).unwrap();
    let hash = |out: &str| out.lines().find(|l| l.starts_with("tree sha256")).unwrap().to_string();
    let a = ok(serkit(&["--seed", "4", "synth", "--out", "a", "--spec", "spec.json"], dir.path()));
    let b = ok(serkit(&["--seed", "4", "synth", "--out", "a", "--spec", "spec.json"], dir.path()));
    assert_eq!(hash(&a), hash(&b));
    assert_eq!(a.lines().filter(|l| l.contains("32 clips")).count(), 4);
    let c = ok(serkit(&["--seed", "5", "synth", "--out", "a", "--spec", "spec.json"], dir.path()));
    assert_ne!(hash(&a), hash(&c));

    let mut spec = serde_json::to_value(tiny_spec()).unwrap();
    spec.as_object_mut().unwrap().remove("speakers");
    std::fs::write(dir.path().join("bad.json"), spec.to_string()).unwrap();
    let o = serkit(&["synth", "--out", "b", "--spec", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("speakers"), "{}", stderr(&o));

    let zero = SynthSpec {
        clips_per_speaker: 0,
        ..tiny_spec()
    };
    std::fs::write(dir.path().join("zero.json"), serde_json::to_string(&zero).unwrap()).unwrap();
    let o = serkit(&["synth", "--out", "b", "--spec", "zero.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("clips_per_speaker"), "{}", stderr(&o));
}

#[test]
fn features_reuse_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), serde_json::to_string(&tiny_spec()).unwrap()).unwrap();
    ok(serkit(&["synth", "--out", "c", "--spec", "spec.json"], dir.path()));
    let args = ["features", "--manifest", "c/ased/manifest.csv", "--cache", "cache"];
    let first = ok(serkit(&args, dir.path()));
    assert!(first.contains("32 clips: 32 computed, 0 cached"), "{first}");
    let records = walk_count(&dir.path().join("cache"));
    assert_eq!(records, 32);
    let warm = ok(serkit(&args, dir.path()));
    assert!(warm.contains("0 computed, 32 cached"), "{warm}");
    std::fs::write(dir.path().join("mfcc.json"), r#"{"n_mfcc": 13}"#).unwrap();
    let mut changed = args.to_vec();
    changed.extend(["--mfcc", "mfcc.json"]);
    let cold = ok(serkit(&changed, dir.path()));
    assert!(cold.contains("32 computed, 0 cached"), "{cold}");

    std::fs::write(dir.path().join("c/ased/neutral/spk00_s0_000.wav"), b"RIFFjunk").unwrap();
    let o = serkit(&["features", "--manifest", "c/ased/manifest.csv", "--cache", "cache2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spk00_s0_000"), "{}", stderr(&o));
}

fn walk_count(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk_count(&p)
            } else {
                1
            }
        })
        .sum()
}

#[test]
fn split_train_eval_pipeline() {
    let dir = workspace("");
    let d = dir.path();
    let out = ok(serkit(
        &["split", "--scenario", "mono", "--manifest", "corpora/ased/manifest.csv", "--out", "s.json"],
        d,
    ));
    assert!(out.contains("| Dataset | Train Positive |"), "{out}");
    ok(serkit(
        &[
            "split",
            "--scenario",
            "cross",
            "--manifest",
            "corpora/ased/manifest.csv",
            "--target",
            "corpora/urdu/manifest.csv",
            "--out",
            "x.json",
        ],
        d,
    ));
    let o = serkit(&["split", "--scenario", "cross", "--manifest", "corpora/ased/manifest.csv", "--out", "y.json"], d);
    assert_eq!(o.status.code(), Some(2));

    let out = ok(serkit(
        &["train", "--config", "c.json", "--split", "s.json", "--model", "VGGE", "--out", "m.ckpt"],
        d,
    ));
    assert!(out.contains("epoch   1"), "{out}");
    let out = ok(serkit(
        &["eval", "--config", "c.json", "--split", "s.json", "--checkpoint", "m.ckpt", "--out", "metrics.json"],
        d,
    ));
    assert!(out.contains("accuracy"), "{out}");
    let m: serkit::experiments::Metrics =
        serde_json::from_str(&std::fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    assert!(m.is_consistent());
}

#[test]
fn expt_cross_writes_tables_and_splits() {
    let dir = workspace("");
    let d = dir.path();
    let out = ok(serkit(&["--jobs", "2", "expt", "cross", "--config", "c.json"], d));
    assert!(out.contains("| Model | Training | Testing | Accuracy | F1-score |"));
    let results: serkit::experiments::ExperimentResults =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/results_cross.json")).unwrap()).unwrap();
    assert_eq!(results.table.rows.len(), 18);
    assert_eq!(results.config["train"]["epochs"], 1);
    assert!(d.join("out/cross.csv").exists() && d.join("out/report_cross.md").exists());
    let splits = std::fs::read_dir(d.join("out/splits")).unwrap().count();
    assert_eq!(splits, 6);

    let rendered = ok(serkit(&["report", "--results", "out/results_cross.json", "--out", "again"], d));
    assert_eq!(rendered, std::fs::read_to_string(d.join("out/report_cross.md")).unwrap());

    let mut tampered: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/results_cross.json")).unwrap()).unwrap();
    tampered["runs"][0]["metrics"]["accuracy"] = serde_json::json!(0.123);
    std::fs::write(d.join("bad.json"), tampered.to_string()).unwrap();
    let o = serkit(&["report", "--results", "bad.json"], d);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn protocol_and_config_errors_exit_2() {
    let dir = workspace(r#", "scenario": {"target": "SYNTH:ased", "combos": [["SYNTH:ased", "SYNTH:urdu"]]}"#);
    let d = dir.path();
    let o = serkit(&["expt", "multi", "--config", "c.json"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("protocol error"), "{}", stderr(&o));

    let cfg = std::fs::read_to_string(d.join("c.json")).unwrap();
    std::fs::write(d.join("typo.json"), cfg.replacen("\"output_dir\"", "\"outptu_dir\"", 1)).unwrap();
    let o = serkit(&["expt", "mono", "--config", "typo.json"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));

    std::fs::write(d.join("missing.json"), cfg.replacen("corpora/urdu", "corpora/nowhere", 1)).unwrap();
    let o = serkit(&["expt", "mono", "--config", "missing.json"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("directory not found"), "{}", stderr(&o));

    let o = serkit(&["expt", "bogus", "--config", "c.json"], d);
    assert_eq!(o.status.code(), Some(2));
    let o = serkit(&["frobnicate"], d);
    assert_eq!(o.status.code(), Some(2));
}
