use std::process::Command;

fn ohfs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ohfs"))
}

#[test]
fn generate_run_regret_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("s.txt");
    let status = ohfs()
        .args(["generate", "--drift", "shift", "--seed", "4", "--n-points", "80", "--noise", "0.1", "--dim", "3", "-o"])
        .arg(&stream)
        .status()
        .unwrap();
    assert!(status.success());

    let out = dir.path().join("run");
    let status = ohfs()
        .args(["run", "--sigma", "0.2", "--epsilon", "1e-3", "--n-g", "16", "--baseline", "-i"])
        .arg(&stream)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let p = report["learner"]["precision"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    let preds = std::fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 8 + 80);

    let status = ohfs()
        .args(["regret", "--sigma", "0.2", "--epsilon", "1e-3", "--n-g", "16", "-i"])
        .arg(&stream)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("regret.csv").exists());

    let status = ohfs()
        .args(["sweep", "--axis", "n_g", "--values", "4,8", "--sigma", "0.2", "-i"])
        .arg(&stream)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    assert_eq!(ohfs().arg("run").arg("-i").arg(&missing).status().unwrap().code(), Some(2));
    assert_eq!(ohfs().args(["sweep", "--axis", "sigma", "--values", "1", "-i", "x"]).status().unwrap().code(), Some(2));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "#ohfs-stream v1 d=2 k=2\n0,1,1,0.5\n").unwrap();
    assert_eq!(ohfs().arg("run").arg("-i").arg(&bad).status().unwrap().code(), Some(2));

    let ok = dir.path().join("ok.txt");
    std::fs::write(&ok, "#ohfs-stream v1 d=1 k=1\n0,1,1,0.5\n").unwrap();
    assert_eq!(ohfs().args(["run", "--epsilon", "2"]).arg("-i").arg(&ok).status().unwrap().code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // a chain of representatives hanging off the label; the repartition at
    // n_g = 3 cuts its tail loose, and with gamma 0 the tail is singular
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    let rows = ["0,1,1,0.0", "1,1,0,0.3", "2,1,0,0.6", "3,1,0,0.9", "4,1,0,1.2", "5,1,0,1.25", "6,1,0,1.26"];
    std::fs::write(&s, format!("#ohfs-stream v1 d=1 k=1\n{}\n", rows.join("\n"))).unwrap();
    let code = ohfs()
        .args(["run", "--sigma", "0.1", "--epsilon", "1e-3", "--gamma", "0", "--n-g", "3", "-i"])
        .arg(&s)
        .arg("--out-dir")
        .arg(dir.path())
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));
}

#[test]
fn oracle_check_small() {
    let out =
        ohfs().args(["oracle-check", "--graphs", "20", "--walk-graphs", "2", "--walks", "20000"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
