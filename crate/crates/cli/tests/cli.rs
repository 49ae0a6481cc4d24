use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn npgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npgm")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = npgm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, model: &str, pdim: &str, n: &str, seed: &str) {
    ok(&["simulate", "--model", model, "--p", pdim, "--n", n, "--seed", seed, "--output-dir", p(dir)]);
}

fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn vb_fit_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("x.csv");
    let text: String = (0..10).map(|i| format!("{},{},{}\n", i, (i * 7) % 10, (i * i) % 11)).collect();
    fs::write(&csv, format!("a,b,c\n{text}")).unwrap();
    let out = tmp.path().join("out");
    ok(&["fit", "--method", "vb", "--input", p(&csv), "--output-dir", p(&out)]);
    let adj = rows(&out.join("adjacency.csv"));
    assert_eq!(adj.len(), 3);
    assert!(adj.iter().all(|r| r.split(',').count() == 3));
    assert!(out.join("vlb_trace.csv").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn horseshoe_reports_bic_winner() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(&tmp.path().join("sim"), "ar2", "5", "40", "1");
    let out = tmp.path().join("fit");
    let data = tmp.path().join("sim/data.csv");
    ok(&["fit", "--method", "horseshoe", "--identity", "--burnin", "50", "--samples", "100", "--input", p(&data), "--output-dir", p(&out)]);
    let bic = rows(&out.join("bic.csv"));
    assert_eq!(bic[0], "c,k,minus_two_loglik,bic,selected");
    assert_eq!(bic.len(), 4);
    let chosen: Vec<&String> = bic[1..].iter().filter(|r| r.ends_with(",1")).collect();
    assert_eq!(chosen.len(), 1);
    let best = bic[1..]
        .iter()
        .map(|r| r.split(',').nth(3).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(chosen[0].split(',').nth(3).unwrap().parse::<f64>().unwrap(), best);
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "circle", "5", "30", "9");
    let data = sim.join("data.csv");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&["fit", "--method", "bg", "--burnin", "30", "--samples", "60", "--seed", "4", "--input", p(&data), "--output-dir", p(&out)]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["adjacency.csv", "omega.csv", "edges.txt", "manifest.json", "inclusion.csv", "theta.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "ar2", "4", "30", "2");
    let data = sim.join("data.csv");
    let a = tmp.path().join("a");
    ok(&["fit", "--method", "vb", "--seed", "11", "--no-rescale", "--identity", "--input", p(&data), "--output-dir", p(&a)]);
    let b = tmp.path().join("b");
    let manifest = a.join("manifest.json");
    ok(&["fit", "--settings", p(&manifest), "--input", p(&data), "--output-dir", p(&b)]);
    assert_eq!(fs::read(a.join("omega.csv")).unwrap(), fs::read(b.join("omega.csv")).unwrap());
}

#[test]
fn simulate_is_deterministic_and_counts_band() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    simulate(&a, "ar2", "8", "20", "5");
    simulate(&b, "ar2", "8", "20", "5");
    for f in ["data.csv", "omega_true.csv", "adjacency_true.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    assert_eq!(rows(&a.join("edges_true.txt")).len(), 2 * 8 - 3);
}

#[test]
fn circle_regime() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "circle", "25", "25", "0");
    let data = rows(&tmp.path().join("data.csv"));
    assert_eq!(data.len(), 25);
    assert_eq!(data[0].split(',').count(), 25);
    assert_eq!(rows(&tmp.path().join("edges_true.txt")).len(), 25);
}

#[test]
fn score_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "ar2", "6", "10", "0");
    let truth = tmp.path().join("adjacency_true.csv");
    let out = npgm(&["score", "--estimated", p(&truth), "--truth", p(&truth)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let one = "1.0000000000000000e0";
    assert_eq!(&row[4..7], &[one, one, one]);
}

#[test]
fn external_estimate_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "ar2", "4", "10", "0");
    // weighted, asymmetric-valued estimate from another tool with a header
    let est = tmp.path().join("est.csv");
    fs::write(&est, "V1,V2,V3,V4\n1,0.3,0,0\n0.2,1,0.1,0\n0,0.4,1,0\n0,0,0,1\n").unwrap();
    let out = npgm(&["score", "--estimated", p(&est), "--truth", p(&tmp.path().join("adjacency_true.csv"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_file_fails() {
    let out = npgm(&["score", "--estimated", "/nonexistent/a.csv", "--truth", "/nonexistent/b.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_csv_names_position() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    fs::write(&csv, "1,2\n3,x\n").unwrap();
    let out = npgm(&["fit", "--input", p(&csv), "--output-dir", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2, column 2"), "{err}");
    fs::write(&csv, "1,2\n3,inf\n").unwrap();
    let out = npgm(&["fit", "--input", p(&csv), "--output-dir", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_appends_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        "p = 4\nn = 40\nmethod = \"vb\"\ntransform = false\nreplications = 2\nseed = 3\n[model]\nkind = \"ar2\"\n",
    )
    .unwrap();
    let out = tmp.path().join("results.csv");
    ok(&["experiment", "--config", p(&cfg), "--output", p(&out)]);
    ok(&["experiment", "--config", p(&cfg), "--output", p(&out)]);
    let lines = rows(&out);
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("replication,seed"));
}

#[test]
fn tune_writes_probabilities() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(&tmp.path().join("sim"), "ar2", "4", "30", "0");
    let out = tmp.path().join("t");
    ok(&["tune", "--identity", "--input", p(&tmp.path().join("sim/data.csv")), "--output-dir", p(&out)]);
    // rows 2..4 with 1, 2, 3 predictors
    assert_eq!(rows(&out.join("rho.csv")).len(), 1 + 6);
    assert_eq!(rows(&out.join("tuning.csv")).len(), 1 + 4);
}
