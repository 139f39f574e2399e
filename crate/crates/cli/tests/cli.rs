use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spongelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spongelab"))
        .args(args)
        .env_remove("SPONGELAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// The report without its timestamped header line.
fn body(text: &str) -> &str {
    let (header, rest) = text.split_once('\n').unwrap();
    assert!(header.starts_with("# spongelab "), "{header}");
    rest
}

fn json(out: &Output) -> Value {
    serde_json::from_str(body(&stdout(out))).unwrap()
}

#[test]
fn verify_passes_at_the_smallest_regime() {
    let out = spongelab(&["verify", "--r", "1", "--c", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["result"]["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn census_has_four_cosets() {
    let out = spongelab(&["coset-census"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let mut sizes: Vec<u64> =
        doc["result"]["cosets"].as_array().unwrap().iter().map(|c| c["size"].as_u64().unwrap()).collect();
    sizes.sort();
    assert_eq!(sizes, [4, 4, 8, 8]);
}

#[test]
fn rate_above_capacity_is_a_usage_error() {
    let out = spongelab(&["verify", "--r", "3", "--c", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("usage error:"), "{err}");
    assert!(err.contains("r <= c"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_parameters_are_rejected_before_running() {
    for args in [
        &["tradeoff", "--m", "0"][..],
        &["separation", "--n", "0"],
        &["truncation-curve", "--n", "8", "--m", "9"],
        &["coset-census", "--r", "2", "--c", "2"],
        &["indiff", "--input", "32"],
    ] {
        assert_eq!(spongelab(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn reports_are_reproducible_below_the_header() {
    let args =
        ["--seed", "11", "tradeoff", "--r", "6", "--c", "6", "--m", "4", "--t", "4", "--trials", "200"];
    let a = stdout(&spongelab(&args));
    let b = stdout(&spongelab(&args));
    assert_eq!(body(&a), body(&b));
    let c = stdout(&spongelab(&[
        "--seed", "12", "tradeoff", "--r", "6", "--c", "6", "--m", "4", "--t", "4", "--trials", "200",
    ]));
    assert_ne!(body(&a), body(&c));
}

#[test]
fn thread_count_does_not_change_the_report() {
    let args = ["separation", "--n", "6", "--trials", "500", "--threads"];
    let one = stdout(&spongelab(&[&args[..], &["1"]].concat()));
    let two = stdout(&spongelab(&[&args[..], &["2"]].concat()));
    assert_eq!(body(&one), body(&two));
}

#[test]
fn toml_config_runs_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "experiment = \"separation\"\nn = 6\ntrials = 300\nseed = 4\n").unwrap();
    let report = dir.path().join("report.csv");
    let out = spongelab(&[
        "run",
        config.to_str().unwrap(),
        "--format",
        "csv",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&report).unwrap();
    let mut lines = body(&text).lines();
    assert_eq!(lines.next(), Some("world,n,trials,successes,rate,std_error,advice_bits,online_queries"));
    assert!(lines.next().unwrap().starts_with("trapdoor,6,300,300,"));
    assert!(lines.next().unwrap().starts_with("random,6,300,"));
}

#[test]
fn grid_file_drives_the_tradeoff() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    std::fs::write(&grid, "r,c,m,t,k,trials\n6,6,4,4,1,100\n8,8,8,4,2,100\n").unwrap();
    let out = spongelab(&["tradeoff", "--grid", grid.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = body(&text).lines().collect();
    assert_eq!(rows[0], "r,c,S,T,trials,successes,eps,ci,m,t,k,model");
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("8,8,256,"));
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let out = spongelab(&["run", Path::new("/nonexistent/run.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
