use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ncg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn construct_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = ncg(&[
        "--out",
        p(dir.path()),
        "construct",
        "--game",
        "sum",
        "--n",
        "5",
        "--price",
        "reciprocal:alpha=16,lo=1,hi=10",
        "--which",
        "ne",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ne-sum-n5.json")).unwrap()).unwrap();
    assert_eq!(sidecar["n"], 5);
    assert!(sidecar["case"].as_str().unwrap().starts_with("sum-"));
    assert_eq!(sidecar["predicted_cost"], sidecar["realized_cost"]);

    let profile = dir.path().join("ne-sum-n5.ncg");
    let o = ncg(&["verify", "--profile", p(&profile), "--all-bounds"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stability"]["verdict"]["verdict"], "stable");
    assert!(v["bounds"].as_array().unwrap().iter().all(|b| b["satisfied"] == true));
}

#[test]
fn unstable_profile_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("clique.ncg");
    fs::write(&profile, "ncg 3 sum constant:alpha=2,lo=1,hi=1\n0 1 1\n0 2 1\n1 2 1\n").unwrap();
    let o = ncg(&["verify", "--profile", p(&profile)]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"]["verdict"], "unstable");
    assert_eq!(v["verdict"]["node"], 0);
    assert_eq!(v["verdict"]["gain"], 1.0);
}

#[test]
fn invalid_input_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ncg");
    fs::write(&bad, "ncg 2 sum reciprocal:alpha=1,lo=1,hi=10\n0 0 1\n").unwrap();
    assert_eq!(code(&ncg(&["verify", "--profile", p(&bad)])), 2);
    assert_eq!(code(&ncg(&["verify", "--profile", p(&dir.path().join("missing.ncg"))])), 4);
    let o = ncg(&[
        "construct", "--game", "max", "--n", "4", "--price", "constant:alpha=1,lo=1,hi=1", "--which", "worst",
    ]);
    assert_eq!(code(&o), 2);
    let o = ncg(&[
        "construct", "--game", "sum", "--n", "4", "--price", "linear:alpha=10,eps=0.1,lo=1,hi=9.8", "--which", "ne",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive"));
}

#[test]
fn dynamics_writes_trace_and_final_profile() {
    let dir = tempfile::tempdir().unwrap();
    let o = ncg(&[
        "--out",
        p(dir.path()),
        "br-dynamics",
        "--init",
        "empty",
        "--game",
        "sum",
        "--price",
        "constant:alpha=1,lo=1,hi=1",
        "--n",
        "3",
        "--scheduler",
        "random:5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["converged"], true);
    let trace = fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count() as u64, summary["moves"].as_u64().unwrap());
    for line in trace.lines() {
        let step: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(step["node"].as_u64().unwrap() < 3);
    }
    let o = ncg(&["verify", "--profile", p(&dir.path().join("final.ncg"))]);
    assert_eq!(code(&o), 0);

    let o = ncg(&[
        "--out",
        p(&dir.path().join("rand")),
        "br-dynamics",
        "--init",
        "random:9",
        "--game",
        "max",
        "--price",
        "reciprocal:alpha=4,lo=1,hi=10",
        "--n",
        "4",
        "--grid",
        "8",
        "--family",
        "restricted",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&ncg(&["br-dynamics", "--init", "empty"])), 2);
}

#[test]
fn sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let svg = dir.path().join("ratio.svg");
    let o = ncg(&[
        "--out",
        p(&out),
        "--workers",
        "2",
        "sweep",
        "--game",
        "sum",
        "--price",
        "reciprocal:lo=1,hi=10",
        "--alpha",
        "1,4,16",
        "--n",
        "3..5",
        "--grid",
        "16",
        "--svg",
        p(&svg),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(csv.lines().next().unwrap().contains("slack:sum-cost-upper"));
    assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));

    let record = out.join("record.json");
    let o = ncg(&["report", "--record", p(&record), "--format", "csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), csv);
    let o = ncg(&["report", "--record", p(&record), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);

    // same flags against the same directory reuse every row
    let o = ncg(&[
        "--out", p(&out), "sweep", "--game", "sum", "--price", "reciprocal:lo=1,hi=10", "--alpha", "1,4,16", "--n",
        "3..5", "--grid", "16",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(out.join("rows.jsonl")).unwrap().lines().count(), 9);

    let o = ncg(&["sweep", "--game", "sum", "--price", "reciprocal:lo=1,hi=10", "--alpha", "1", "--n", ""]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("max.cfg");
    fs::write(
        &cfg,
        "game = max\nprice = constant\nlo = 1\nhi = 1\nalpha = 0.001, 1\nn = 3, 4\ngrid = 4\nseed = 3\ndynamics_runs = 2\n",
    )
    .unwrap();
    let o = ncg(&["sweep", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn opt_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let o = ncg(&[
        "--out",
        p(dir.path()),
        "opt",
        "--game",
        "sum",
        "--n",
        "3",
        "--price",
        "constant:alpha=1,lo=1,hi=1",
        "--brute-force",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cost"], 9.0);
    assert_eq!(v["brute_force"]["cost"], 9.0);
    assert_eq!(v["case"], "opt-clique");
}
