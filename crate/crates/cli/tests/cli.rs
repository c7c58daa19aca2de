use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn ehrhard(args: &[&str]) -> Output {
    ehrhard_env(args, &[])
}

fn ehrhard_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ehrhard"));
    cmd.args(args).env_remove("EHRHARD_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ehrhard-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn limits_table_is_monotone() {
    let out = ehrhard(&["limits", "--x", "0.5", "--c", "1e-4,1e-8,1e-12", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "schema,experiment,parameters,quantity,value,uncertainty,uncertainty_kind"
    );
    let deviations: Vec<f64> = lines
        .filter(|l| l.contains(",deviation,"))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(deviations.len(), 3);
    assert!(deviations.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn inadmissible_coefficients_exit_with_three() {
    for (lam, mu, condition) in [("2", "0.5", "|lambda - mu| <= 1"), ("0.4", "0.4", "lambda + mu >= 1")] {
        let out = ehrhard(&["borell", "--lam", lam, "--mu", mu, "--f", "const(0.5)", "--g", "const(0.5)"]);
        assert_eq!(out.status.code(), Some(3));
        assert!(stderr(&out).contains(condition), "{}", stderr(&out));
    }
}

#[test]
fn usage_errors_exit_with_three() {
    assert_eq!(ehrhard(&["game", "--bogus"]).status.code(), Some(3));
    assert_eq!(ehrhard(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(ehrhard(&["game", "--order", "8", "--composite", "10", "--f", "const(0.5)"]).status.code(), Some(3));
    let missing = ehrhard(&["value"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr(&missing).contains("--f"));
    let bad = ehrhard(&["value", "--f", "erf_ramp(centre=0)"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains("offset 9"), "{}", stderr(&bad));
    assert_eq!(ehrhard(&["--help"]).status.code(), Some(0));
}

#[test]
fn game_reports_value_and_estimate() {
    let out = ehrhard(&[
        "game",
        "--f",
        "linear(a=0.3,b=1,clip_lo=0.05,clip_hi=0.95)",
        "--paths",
        "2000",
        "--dt",
        "0.01",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let j = json(&out);
    let r = &j["report"];
    let v00 = r["results"]["v00"].as_f64().unwrap();
    let est = r["results"]["estimate"]["adjusted"]["mean"].as_f64().unwrap();
    assert!((est - v00).abs() < 0.01);
    assert_eq!(r["config"]["seed"], 7);
    assert_eq!(j["passed"], true);
    assert_eq!(j["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn identical_runs_hash_identically() {
    let args = ["saddle", "--f", "bump(0,1,0.1,0.9)", "--paths", "500", "--seed", "3"];
    let (a, b) = (json(&ehrhard(&args)), json(&ehrhard(&args)));
    assert_eq!(a["sha256"], b["sha256"]);
    assert_eq!(a["report"], b["report"]);
    let mut other = args;
    other[6] = "4";
    assert_ne!(json(&ehrhard(&other))["sha256"], a["sha256"]);
}

#[test]
fn settings_follow_precedence() {
    let cfg = scratch("run.conf");
    std::fs::write(&cfg, "# saddle audit\npaths = 300\nseed = 11\nf = bump(0,1,0.1,0.9)\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = json(&ehrhard_env(&["saddle", "--config", cfg], &[("EHRHARD_SEED", "5")]));
    assert_eq!(from_file["report"]["config"]["seed"], 11);
    assert_eq!(from_file["report"]["config"]["paths"], 300);

    let flags = json(&ehrhard(&["saddle", "--config", cfg, "--paths", "200", "--seed", "2"]));
    assert_eq!(flags["report"]["config"]["seed"], 2);
    assert_eq!(flags["report"]["config"]["paths"], 200);

    let env = json(&ehrhard_env(&["saddle", "--f", "bump(0,1,0.1,0.9)", "--paths", "100"], &[("EHRHARD_SEED", "5")]));
    assert_eq!(env["report"]["config"]["seed"], 5);
    let default = json(&ehrhard(&["saddle", "--f", "bump(0,1,0.1,0.9)", "--paths", "100"]));
    assert_eq!(default["report"]["config"]["seed"], 0);

    let bad = scratch("bad.conf");
    std::fs::write(&bad, "speed = 3\n").unwrap();
    assert_eq!(ehrhard(&["saddle", "--config", bad.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn failing_candidate_exits_with_two() {
    let out = ehrhard(&[
        "ehrhard",
        "--f",
        "erf_ramp(0,0.5,0.1,0.9)",
        "--g",
        "erf_ramp(1,0.3,0.2,0.8)",
        "--h",
        "const(0.3)",
        "--lam",
        "0.3",
        "--order",
        "32",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(json(&out)["report"]["results"]["inequality"]["verdict"], "HYPOTHESIS_FAIL");
}

#[test]
fn gbl_reads_a_frame_file_and_writes_out() {
    let frame = scratch("three.frame");
    std::fs::write(
        &frame,
        "3 2\n1 0.6666666666666666\n1 0\n1 0.6666666666666666\n-0.5 0.8660254037844386\n\
         1 0.6666666666666666\n-0.5 -0.8660254037844386\n",
    )
    .unwrap();
    let out_path = scratch("gbl.json");
    let out = ehrhard(&[
        "gbl",
        "--frame",
        frame.to_str().unwrap(),
        "--fields",
        "const(0.3)",
        "const(0.6)",
        "const(0.9)",
        "--c",
        "0.5",
        "--order",
        "8",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let j: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let slack = j["report"]["results"]["inequalities"][0]["slack"].as_f64().unwrap();
    assert!(slack.abs() < 1e-10, "{slack}");
}
