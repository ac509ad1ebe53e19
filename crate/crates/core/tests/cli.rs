use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrplab"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(format!("{name}.json"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = run(bin()
            .args(["simulate", "--paths", "10", "--events", "4", "--seed", "7", "--model"])
            .arg(bundled("example16"))
            .arg("--out")
            .arg(out));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let ids: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.len(), 10);
    assert_eq!(text.lines().count(), 1 + 40);
    let manifest = json(&dir.path().join("a.csv.manifest.json"));
    assert_eq!(manifest["n_paths"], 10);
    assert_eq!(manifest["root_seed"], 7);
    assert_eq!(manifest["meta"]["expects_rejection"], true);
}

#[test]
fn malformed_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kernel\": {\"family\": \"exponential\"},\n \"mixing\": 3}").unwrap();
    let o = run(bin().args(["simulate", "--model"]).arg(&bad).arg("--out").arg(dir.path().join("x.csv")));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("mixing") && err.contains("line 2"), "{err}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn capacity_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["simulate", "--paths", "1000000000", "--events", "1000", "--model"])
        .arg(bundled("exp_gamma"))
        .arg("--out")
        .arg(dir.path().join("x.csv")));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exact_reference_values_and_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.json");
    let out = dir.path().join("r.csv");
    std::fs::write(&q, r#"[{"id": "a", "cdf": [2, 1]}, {"id": "b", "box": [[null, 1], [null, 2]]}]"#).unwrap();
    let o = run(bin().args(["exact", "--model"]).arg(bundled("example16")).arg("--queries").arg(&q).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("query_id,probability,error_estimate,method"));
    let p: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((p[0] - 1.0 / 3.0).abs() < 1e-9);
    assert!((p[1] - 2.0 / 7.0).abs() < 1e-9);

    std::fs::write(&q, "[]").unwrap();
    let o = run(bin().args(["exact", "--model"]).arg(bundled("example16")).arg("--queries").arg(&q).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap().trim(), "query_id,probability,error_estimate,method");
}

#[test]
fn exact_dirac_matches_cdf() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    std::fs::write(&model, r#"{"kernel": {"family": "exponential"}, "mixing": {"kind": "dirac", "theta": [0.7]}}"#).unwrap();
    let q = dir.path().join("q.json");
    std::fs::write(&q, r#"[{"cdf": [1.3]}, {"count_pmf": {"t": 2.0, "n": 1}}]"#).unwrap();
    let out = dir.path().join("r.csv");
    let o = run(bin().args(["exact", "--model"]).arg(&model).arg("--queries").arg(&q).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let p0: f64 = rows[0][1].parse().unwrap();
    assert!((p0 - (1.0 - (-0.7f64 * 1.3).exp())).abs() < 1e-14);
    assert_eq!(rows[0][3], "dirac-product");
    let p1: f64 = rows[1][1].parse().unwrap();
    assert!((p1 - 1.4 * (-1.4f64).exp()).abs() < 1e-12);
}

#[test]
fn exact_tolerance_too_tight_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.json");
    std::fs::write(&q, r#"[{"cdf": [2, 1]}]"#).unwrap();
    let out = dir.path().join("r.csv");
    let o = run(bin()
        .args(["exact", "--tol", "1e-300", "--model"])
        .arg(bundled("example16"))
        .arg("--queries")
        .arg(&q)
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[3], "unconverged");
    assert!((row[1].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn verify_counterexample_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep.json");
    let o = run(bin()
        .args(["verify", "--suite", "exchangeability", "--model"])
        .arg(bundled("example16"))
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(1));
    let rep = json(&out);
    assert_eq!(rep["expected_rejection"], true);
    assert_eq!(rep["results"][0]["status"], "failed");
    assert_eq!(rep["results"][0]["report"]["schema_version"], 1);
}

#[test]
fn verify_all_on_gamma_half_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep.json");
    let o = run(bin().args(["verify", "--suite", "all", "--seed", "3", "--model"]).arg(bundled("gamma_half")).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", std::fs::read_to_string(&out).unwrap());
    let rep = json(&out);
    let statuses: Vec<(String, String)> = rep["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["suite"].as_str().unwrap().to_string(), r["status"].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(statuses.len(), 5);
    assert!(statuses.contains(&("mixed-poisson".into(), "skipped".into())));
    assert_eq!(rep["expected_rejection"], false);
}

#[test]
fn verify_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let o = run(bin()
            .args(["verify", "--suite", "mixed-poisson", "--paths", "3000", "--seed", "11", "--model"])
            .arg(bundled("exp_gamma"))
            .arg("--out")
            .arg(&out)
            .env("MRPLAB_THREADS", if name == "a.json" { "1" } else { "3" }));
        assert_eq!(o.status.code(), Some(0));
        reports.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn unknown_suite_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["verify", "--suite", "nonsense", "--model"])
        .arg(bundled("gamma_half"))
        .arg("--out")
        .arg(dir.path().join("r.json")));
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn check_counts_flags_double_jump() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.csv");
    let out = dir.path().join("r.json");
    std::fs::write(&input, "t,N\n0,0\n1,1\n2,3\n3,3\n").unwrap();
    let o = run(bin().args(["check-counts", "--input"]).arg(&input).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(1));
    let rep = json(&out);
    assert_eq!(rep["passed"], false);

    std::fs::write(&input, "t,N\n0,0\n1,1\n2,2\n").unwrap();
    let o = run(bin().args(["check-counts", "--input"]).arg(&input).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));

    std::fs::write(&input, "t,N\n2,0\n1,1\n").unwrap();
    let o = run(bin().args(["check-counts", "--input"]).arg(&input).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(2));
}
