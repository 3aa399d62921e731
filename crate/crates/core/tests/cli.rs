use std::path::Path;
use std::process::{Command, Output};

fn uncagg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uncagg"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = uncagg(dir, args);
    assert!(
        out.status.success(),
        "uncagg {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "synth", "--out-dir", "bench", "--n-iid", "5", "--n-ood", "5", "--height", "24", "--width", "24",
        "--seed", "3",
    ];
    args.extend(extra);
    ok(dir, &args);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(uncagg(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(uncagg(dir.path(), &["aggregate"]).status.code(), Some(2));
    assert_eq!(uncagg(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(uncagg(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = uncagg(dir.path(), &["aggregate", "--manifest", "nope.csv", "--strategies", "avg", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn aggregate_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    ok(dir.path(), &["aggregate", "--manifest", "bench/manifest.csv", "--strategies", "avg,plm:5,mor", "--out", "s.csv"]);
    let text = read(dir.path(), "s.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sample_id,avg,plm:5,mor");
    assert_eq!(lines.len(), 11);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
}

#[test]
fn mask_strategies_need_masks() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = uncagg(dir.path(), &["aggregate", "--manifest", "bench/manifest.csv", "--strategies", "bca", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bca"));
}

#[test]
fn job_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--mask-threshold", "0.5"]);
    let strategies = "avg,ata:0.5,aqa:0.9,bca,ica,qfr,mor,eds,ent";
    ok(dir.path(), &["aggregate", "--manifest", "bench/manifest.csv", "--strategies", strategies, "--out", "a.csv", "--jobs", "1"]);
    ok(dir.path(), &["aggregate", "--manifest", "bench/manifest.csv", "--strategies", strategies, "--out", "b.csv", "--jobs", "3"]);
    assert_eq!(read(dir.path(), "a.csv"), read(dir.path(), "b.csv"));
}

#[test]
fn gmm_pipeline_and_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    ok(d, &["aggregate", "--manifest", "bench/manifest.csv", "--strategies", "mor,eds,ent,avg", "--out", "s.csv"]);
    let fit = ok(d, &["gmm-fit", "--features", "s.csv", "--variant", "spa", "--kmax", "2", "--out", "m.json"]);
    assert!(String::from_utf8_lossy(&fit.stdout).contains("selected K="));
    let model: serde_json::Value = serde_json::from_str(&read(d, "m.json")).unwrap();
    assert_eq!(model["mu"][0].as_array().unwrap().len(), 3);

    ok(d, &["gmm-score", "--model", "m.json", "--features", "s.csv", "--out", "scored.csv"]);
    assert!(read(d, "scored.csv").lines().next().unwrap().ends_with(",nll"));

    ok(d, &["eval", "--scores", "scored.csv", "--manifest", "bench/manifest.csv", "--task", "ood", "--bootstrap", "20", "--out-prefix", "ood"]);
    let metrics = read(d, "ood_metrics.csv");
    assert!(metrics.starts_with("strategy,metric,estimate,mean,std"));
    for line in metrics.lines().skip(1) {
        let est: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&est), "{line}");
    }

    ok(d, &["rank", "--inputs", "ood_metrics.csv", "ood_metrics.csv", "--out-prefix", "r"]);
    let n = 5.0;
    for line in read(d, "r_ranks.csv").lines().skip(1) {
        let rank: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((1.0..=n).contains(&rank), "{line}");
    }
}

#[test]
fn failure_detection_with_risk_as_score_is_optimal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let manifest = read(d, "bench/manifest.csv");
    let mut lines = manifest.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (id_col, risk_col) = (
        header.iter().position(|h| *h == "sample_id").unwrap(),
        header.iter().position(|h| *h == "risk").unwrap(),
    );
    let mut scores = String::from("sample_id,oracle\n");
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        scores.push_str(&format!("{},{}\n", f[id_col], f[risk_col]));
    }
    std::fs::write(d.join("oracle.csv"), scores).unwrap();
    ok(d, &["eval", "--scores", "oracle.csv", "--manifest", "bench/manifest.csv", "--task", "fd", "--bootstrap", "10", "--out-prefix", "fd"]);
    let metrics = read(d, "fd_metrics.csv");
    let est: f64 = metrics.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(est.abs() < 1e-12, "{metrics}");
}

#[test]
fn gmm_fit_rejects_missing_feature_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f.csv"), "sample_id,mor,eds\na,0.1,0.2\nb,0.3,0.4\n").unwrap();
    let out = uncagg(dir.path(), &["gmm-fit", "--features", "f.csv", "--variant", "spa", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(4));
}
