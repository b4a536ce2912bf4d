use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cla"))
        .args(args)
        .env("CLA_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "synth",
        "--out",
        out,
        "--seed",
        "7",
        "--k-seen",
        "6",
        "--k-unseen",
        "3",
    ];
    args.extend_from_slice(extra);
    let o = cla(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("manifest.toml").to_str().unwrap().to_owned()
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, &["--noise", "0.4"]);
    synth(&b, &["--noise", "0.4"]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.contains_key("manifest.toml") && ta.contains_key("seen_features.bin"));
    assert_eq!(ta, tb);
}

#[test]
fn noiseless_evolution_logs_full_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("d"), &[]);
    let out = tmp.path().join("e");
    let o = cla(&[
        "evolve",
        "--manifest",
        &manifest,
        "--out",
        out.to_str().unwrap(),
        "--p",
        "50",
        "--delta",
        "0.1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("iteration="))
        .collect();
    assert_eq!(lines.len(), 2, "{text}");
    for l in lines {
        assert!(l.ends_with("top1=100.000"), "{l}");
    }
    for f in [
        "evolution.txt",
        "scores.bin",
        "labels.csv",
        "report.txt",
        "report.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn train_predict_evaluate_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    let manifest = synth(&data, &["--noise", "0.3"]);
    let before = tree(&data);
    let m = tmp.path().join("m");
    let p = tmp.path().join("p");
    let r = tmp.path().join("r");
    let o = cla(&[
        "train",
        "--manifest",
        &manifest,
        "--out",
        m.to_str().unwrap(),
        "--lambda",
        "10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("lambda=10.0000"), "{}", stdout(&o));
    let model = m.join("model.claz");
    let o = cla(&[
        "predict",
        "--manifest",
        &manifest,
        "--model",
        model.to_str().unwrap(),
        "--out",
        p.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cla(&[
        "evaluate",
        "--scores",
        p.join("scores.bin").to_str().unwrap(),
        "--truth",
        data.join("unseen_truth.csv").to_str().unwrap(),
        "--out",
        r.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(r.join("report.txt")).unwrap();
    assert!(report.contains("top1="), "{report}");
    let o = cla(&[
        "evaluate",
        "--predictions",
        p.join("labels.csv").to_str().unwrap(),
        "--classes",
        "3",
        "--truth",
        data.join("unseen_truth.csv").to_str().unwrap(),
        "--out",
        r.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(r.join("report.txt"))
            .unwrap()
            .lines()
            .find(|l| l.starts_with("top1=")),
        report.lines().find(|l| l.starts_with("top1="))
    );
    assert_eq!(tree(&data), before, "inputs must not change");
}

#[test]
fn tune_prints_the_whole_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(
        &tmp.path().join("d"),
        &["--noise", "0.3", "--samples-per-class", "8"],
    );
    let o = cla(&["tune", "--manifest", &manifest]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lambdas: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("lambda="))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(
        lambdas,
        [
            "0.00100000",
            "0.0100000",
            "0.100000",
            "1.00000",
            "10.0000",
            "100.000",
            "1000.00",
            "10000.0"
        ]
    );
    assert!(
        text.lines().any(|l| l.starts_with("chosen_lambda=")),
        "{text}"
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();

    let o = cla(&["synth", "--out", out, "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let o = cla(&["synth", "--out", out, "--k-unseen", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = cla(&[
        "train",
        "--manifest",
        "/nonexistent/manifest.toml",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));

    let manifest = synth(&tmp.path().join("d"), &[]);
    let o = cla(&[
        "evolve",
        "--manifest",
        &manifest,
        "--out",
        out,
        "--delta",
        "-1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = cla(&["evolve", "--manifest", &manifest, "--out", out, "--p", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = cla(&[
        "train",
        "--manifest",
        &manifest,
        "--out",
        out,
        "--lambda",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));

    fs::write(tmp.path().join("d/seen_features.bin"), b"CLAM").unwrap();
    let o = cla(&["train", "--manifest", &manifest, "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_cla"))
        .args(["synth", "--out", out])
        .env("CLA_LOG", "loud")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(cla(&["--help"]).status.code(), Some(0));
}
