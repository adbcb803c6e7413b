use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

/// `min x` subject to `y(z) ≥ z` and `x ≥ y(z)` on the unit interval:
/// any rule needs `x ≥ y(1) ≥ 1`, and `y(z) = z` attains it.
const TOY: &str = r#"{"version":1,"n":1,"k":1,"l":1,"m":2,"c":[1.0],
 "rows":[{"a":[0.0],"A":[[0.0]],"b":[-1.0],"d0":0.0,"d":[-1.0]},
         {"a":[-1.0],"A":[[0.0]],"b":[1.0],"d0":0.0,"d":[0.0]}],
 "uncertainty":{"radius":1.0}}"#;

/// `x ≤ −1` and `x ≥ 1`.
const INFEASIBLE: &str = r#"{"version":1,"n":1,"k":1,"l":1,"m":2,"c":[1.0],
 "rows":[{"a":[1.0],"A":[[0.0]],"b":[0.0],"d0":-1.0,"d":[0.0]},
         {"a":[-1.0],"A":[[0.0]],"b":[0.0],"d0":-1.0,"d":[0.0]}],
 "uncertainty":{"radius":1.0}}"#;

fn robust_qdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-qdr"))
        .args(args)
        .env_remove("ROBUST_QDR_CONFIG")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solution_value(path: &Path) -> f64 {
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(json["status"], "optimal");
    json["value"].as_f64().unwrap()
}

#[test]
fn reformulate_reports_the_rule_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(&dir, "toy.json", TOY);
    let sdp = robust_qdr(&["reformulate", s(&toy), "--method", "sdp"]);
    assert_eq!(code(&sdp), 0, "{}", stderr(&sdp));
    // n + k + kl + k·l(l+1)/2 with n = k = l = 1.
    assert!(stdout(&sdp).contains("rule_dim=4"), "{}", stdout(&sdp));
    assert!(stdout(&sdp).contains("psd_blocks=2"));

    let socp = robust_qdr(&["reformulate", s(&toy), "--method", "socp", "--theta", "0.3"]);
    let text = stdout(&socp);
    assert_eq!(text.matches("soc(3)").count(), 2, "{text}");
    assert!(text.contains("soc_rows=2 psd_blocks=0 max_soc_dim=3"));
}

#[test]
fn reformulate_writes_to_the_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(&dir, "toy.json", TOY);
    let out = dir.path().join("dump.txt");
    let run = robust_qdr(&["reformulate", s(&toy), "--method", "adr", "--out", s(&out)]);
    assert_eq!(code(&run), 0);
    assert!(stdout(&run).is_empty());
    assert!(fs::read_to_string(&out).unwrap().starts_with("program adr"));
}

#[test]
fn conflicting_rule_request_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(&dir, "toy.json", TOY);
    let run = robust_qdr(&["reformulate", s(&toy), "--method", "socp", "--rule", "general"]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("--method sdp"), "{}", stderr(&run));
}

#[test]
fn missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("absent.json");
    for sub in ["reformulate", "solve"] {
        let run = robust_qdr(&[sub, s(&absent)]);
        assert_eq!(code(&run), 2);
        assert!(stderr(&run).contains(s(&absent)), "{}", stderr(&run));
    }
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(code(&robust_qdr(&["solve", "x.json", "--method", "simplex"])), 2);
    assert_eq!(code(&robust_qdr(&["frobnicate"])), 2);
}

#[test]
fn every_method_solves_the_toy_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(&dir, "toy.json", TOY);
    for method in ["adr", "sdp", "socp", "sep_qdr_sdp"] {
        let out = dir.path().join(format!("{method}.json"));
        let run = robust_qdr(&["solve", s(&toy), "--method", method, "--out", s(&out)]);
        assert_eq!(code(&run), 0, "{method}: {}", stderr(&run));
        assert!((solution_value(&out) - 1.0).abs() <= 1e-6, "{method}");
    }
}

#[test]
fn infeasible_problem_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.json", INFEASIBLE);
    let run = robust_qdr(&["solve", s(&bad)]);
    assert_eq!(code(&run), 1, "{}", stderr(&run));
    assert!(stderr(&run).contains("infeasible"));
}

#[test]
fn iteration_cap_from_the_config_file_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("lot.json");
    assert_eq!(
        code(&robust_qdr(&[
            "instance",
            "--N",
            "3",
            "--seed",
            "2",
            "--out",
            s(&problem)
        ])),
        0
    );
    let config = write(&dir, "settings.toml", "[solver]\nmax_iter = 1\n");
    let capped = Command::new(env!("CARGO_BIN_EXE_robust-qdr"))
        .args(["solve", s(&problem)])
        .env("ROBUST_QDR_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(code(&capped), 3, "{}", stderr(&capped));

    let overridden = Command::new(env!("CARGO_BIN_EXE_robust-qdr"))
        .args(["solve", s(&problem), "--max-iter", "200"])
        .env("ROBUST_QDR_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(code(&overridden), 0, "{}", stderr(&overridden));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(&dir, "toy.json", TOY);
    let config = write(&dir, "settings.toml", "[solver]\ntolerance = 1e-6\n");
    let run = robust_qdr(&["solve", s(&toy), "--config", s(&config)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("settings.toml"));
}

#[test]
fn verify_certifies_and_catches_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("lot.json");
    let solution = dir.path().join("policy.json");
    robust_qdr(&["instance", "--N", "2", "--seed", "5", "--out", s(&problem)]);
    let solved = robust_qdr(&["solve", s(&problem), "--out", s(&solution)]);
    assert_eq!(code(&solved), 0, "{}", stderr(&solved));

    let ok = robust_qdr(&["verify", s(&problem), s(&solution)]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("certified"));
    // Header, ten rows, the objective epigraph row and the verdict.
    assert_eq!(stdout(&ok).lines().count(), 1 + 10 + 1 + 1);

    // Halving the stock leaves part of the demand ball uncovered.
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&solution).unwrap()).unwrap();
    for v in json["x"].as_array_mut().unwrap() {
        *v = serde_json::json!(v.as_f64().unwrap() * 0.5);
    }
    let corrupted = write(&dir, "corrupted.json", &json.to_string());
    let bad = robust_qdr(&["verify", s(&problem), s(&corrupted), "--json"]);
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("witness for row["), "{}", stderr(&bad));
    let report: serde_json::Value = serde_json::from_str(&stdout(&bad)).unwrap();
    assert_eq!(report["feasible"], false);
    let violation = report["max_violation"].as_f64().unwrap();
    assert!(violation > 0.0);

    let loose = format!("{}", 2.0 * violation);
    let tolerated = robust_qdr(&["verify", s(&problem), s(&corrupted), "--tol", &loose]);
    assert_eq!(code(&tolerated), 0, "{}", stdout(&tolerated));
}

#[test]
fn sweep_lists_one_value_per_theta() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(&dir, "toy.json", TOY);
    let run = robust_qdr(&["sweep", s(&toy), "--thetas", "0.25,0.5,1"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let text = stdout(&run);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,method,value,status");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let value: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((value - 1.0).abs() <= 1e-6, "{line}");
    }
}

/// A purely quadratic rule `y = q z²` cannot keep `y(z) ≥ z` for small
/// positive `z`, so the toy has no θ = 0 policy.
#[test]
fn sweep_flags_theta_without_a_policy() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(&dir, "toy.json", TOY);
    let run = robust_qdr(&["sweep", s(&toy), "--thetas", "0,1"]);
    assert_ne!(code(&run), 0);
    let text = stdout(&run);
    let first = text.lines().nth(1).unwrap();
    assert!(
        first.starts_with("0,qdr_sdp,,") && !first.ends_with("optimal"),
        "{first}"
    );
    assert!(text.lines().nth(2).unwrap().ends_with(",optimal"));
}

#[test]
fn lotsizing_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["lotsizing", "--N", "2", "--instances", "5", "--seed", "7"];
    let first = robust_qdr(&[&args[..], &["--out", s(&a), "--jobs", "1"]].concat());
    let second = robust_qdr(&[&args[..], &["--out", s(&b), "--jobs", "3"]].concat());
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert_eq!(code(&second), 0);
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(bytes).unwrap().lines().count(), 1 + 5 * 3);
    let summary = stdout(&first);
    assert!(summary.contains("adr_socp") && summary.contains("qdr_sdp") && summary.contains("sep_qdr_socp"));
}

#[test]
fn lotsizing_orders_the_methods() {
    let run = robust_qdr(&["lotsizing", "--N", "3", "--instances", "4", "--seed", "11"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let csv = stdout(&run);
    let mut rows = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect::<Vec<_>>());
    let value = |r: &Vec<String>| r[4].parse::<f64>().unwrap();
    for _ in 0..4 {
        let adr = rows.next().unwrap();
        let sdp = rows.next().unwrap();
        let sep = rows.next().unwrap();
        assert_eq!(
            (adr[1].as_str(), sdp[1].as_str(), sep[1].as_str()),
            ("adr_socp", "qdr_sdp", "sep_qdr_socp")
        );
        let tol = 1e-6 * value(&adr);
        assert!(
            value(&sdp) <= value(&sep) + tol && value(&sep) <= value(&adr) + tol,
            "{adr:?} {sdp:?} {sep:?}"
        );
    }
    assert!(stderr(&run).contains("m1"));
}

#[test]
fn lotsizing_theta_one_matches_the_affine_column() {
    let run = robust_qdr(&[
        "lotsizing",
        "--N",
        "2",
        "--instances",
        "3",
        "--theta",
        "1",
        "--methods",
        "adr,sdp",
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let csv = stdout(&run);
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    for pair in values.chunks(2) {
        assert!((pair[0] - pair[1]).abs() <= 1e-6 * (1.0 + pair[0]), "{pair:?}");
    }
}
