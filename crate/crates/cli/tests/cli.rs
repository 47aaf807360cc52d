//! Black-box tests of the `fblgbc` binary.

use std::path::Path;
use std::process::{Command, Output};

fn fblgbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fblgbc")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    fblgbc(args).status.code().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = fblgbc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of a CSV output as header → value maps.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records().map(|rec| headers.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect()).collect()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

const CHANNEL: [&str; 6] = ["--P", "2", "--N1", "1", "--N2", "1"];

fn with_channel<'a>(cmd: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(CHANNEL);
    v.extend(rest);
    v
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&["dt-dpc", "--P", "2", "--N1", "1", "--n", "100", "--alpha", "0.5", "--M1", "2", "--M2", "2"]), 2);
    assert_eq!(code(&with_channel("region", &["--n", "100", "--eps", "0"])), 2);
    assert_eq!(code(&with_channel("region", &["--n", "100", "--eps", "-0.1"])), 2);
    assert_eq!(code(&with_channel("kappa-beta", &["--n", "100", "--alpha", "0.5", "--eps", "0"])), 2);
    assert_eq!(code(&with_channel("dt-dpc", &["--n", "100", "--alpha", "1.5", "--M1", "2", "--M2", "2"])), 2);
    assert_eq!(code(&with_channel("dt-dpc", &["--n", "100", "--alpha", "0.5"])), 2);
    assert_eq!(code(&[]), 2);
}

#[test]
fn injected_fault_exits_1() {
    let out = fblgbc(&["validate", "--n", "50", "--alpha", "0.5", "--samples", "1e5", "--inject-fault", "1.2"]);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["report"]["all_passed"], false);
}

#[test]
fn clean_validation_exits_0() {
    assert_eq!(code(&["validate", "--n", "10", "--alpha", "0.5", "--samples", "1e5"]), 0);
}

#[test]
fn single_codewords_cost_nothing() {
    let rows = csv_rows(&stdout(&with_channel("dt-dpc", &["--n", "50,500", "--alpha", "0.3,0.7", "--M1", "1", "--M2", "1"])));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| f(&r["total"]) == 0.0));
}

#[test]
fn counts_accept_power_notation() {
    let a = csv_rows(&stdout(&with_channel("dt-dpc", &["--n", "100", "--alpha", "0.5", "--M1", "2^12", "--M2", "16"])));
    let b = csv_rows(&stdout(&with_channel("dt-dpc", &["--n", "100", "--alpha", "0.5", "--M1", "4096", "--M2", "1.6e1"])));
    assert_eq!(a, b);
    assert_eq!(f(&a[0]["R1_bits"]), 0.12);
}

fn without_timestamp(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with("# generated:"))
        .map(|l| match serde_json::from_str::<serde_json::Value>(l) {
            Ok(mut v) if v.get("header").is_some() => {
                v["header"].as_object_mut().unwrap().remove("generated");
                v.to_string()
            }
            _ => l.to_string(),
        })
        .collect()
}

fn rerun_matches(dir: &Path, args: &[&str], fmt: &str) {
    let first = dir.join(format!("first.{fmt}"));
    let again = dir.join(format!("again.{fmt}"));
    let mut a: Vec<&str> = args.to_vec();
    a.extend(["--format", fmt, "-o", first.to_str().unwrap()]);
    stdout(&a);
    stdout(&["--config", first.to_str().unwrap(), "-o", again.to_str().unwrap()]);
    let x = std::fs::read_to_string(&first).unwrap();
    let y = std::fs::read_to_string(&again).unwrap();
    assert_eq!(without_timestamp(&x), without_timestamp(&y), "{args:?} as {fmt}");
}

#[test]
fn every_output_regenerates_from_its_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let jobs: Vec<Vec<&str>> = vec![
        with_channel("dt-dpc", &["--n", "100,200", "--alpha", "0.25,0.6", "--rate-fraction", "0.5,0.8"]),
        with_channel("dt-dpc", &["--n", "100", "--alpha", "0.5", "--R1", "0.1", "--R2", "0.05", "--confusion-model", "shared-state"]),
        with_channel("dt-spc", &["--n", "50", "--alpha", "0.5", "--M1", "64", "--M2", "8", "--samples", "2e4", "--seed", "9"]),
        with_channel("kappa-beta", &["--n", "100", "--P1", "0.5", "--P2", "1.5", "--eps1", "1e-2", "--eps2", "1e-3"]),
        with_channel("region", &["--n", "300", "--eps", "1e-2", "--alpha", "0.3,0.7"]),
        with_channel("sweep", &["--n", "100", "--alpha", "0.5", "--rate-fraction", "0.5", "--compare-spc", "--samples", "2e4"]),
    ];
    for job in &jobs {
        for fmt in ["csv", "json"] {
            rerun_matches(dir.path(), job, fmt);
        }
    }
}

#[test]
fn validation_reports_are_byte_identical() {
    let args = ["validate", "--n", "10", "--alpha", "0.3,0.8", "--samples", "2e4", "--seed", "42"];
    let a = fblgbc(&args);
    let b = fblgbc(&args);
    assert_eq!(a.status.code(), b.status.code());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_results() {
    let args = with_channel("dt-spc", &["--n", "40", "--alpha", "0.6", "--M1", "32", "--M2", "8", "--samples", "3e4", "--format", "json"]);
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_fblgbc")).args(&args).env("FBLGBC_THREADS", threads).output().unwrap();
        assert!(out.status.success());
        without_timestamp(&String::from_utf8(out.stdout).unwrap())
    };
    assert_eq!(run("1"), run("3"));
    let bad = Command::new(env!("CARGO_BIN_EXE_fblgbc")).args(&args).env("FBLGBC_THREADS", "many").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn region_stays_inside_the_asymptotic_region() {
    let rows = csv_rows(&stdout(&with_channel("region", &["--n", "1000", "--eps", "1e-3", "--alpha", "0,0.2,0.5,0.8,1"])));
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r["status"], "ok", "{r:?}");
        assert!(f(&r["R1_bits"]) <= f(&r["R1_asym_bits"]) + 1e-12, "{r:?}");
        assert!(f(&r["R2_bits"]) <= f(&r["R2_asym_bits"]) + 1e-12, "{r:?}");
        assert!(f(&r["total"]) <= 1e-3 * (1.0 + 1e-9), "{r:?}");
    }
    // More power to user 1 moves the operating point toward user 1.
    assert!(f(&rows[3]["R1_bits"]) > f(&rows[1]["R1_bits"]));
    assert!(f(&rows[3]["R2_bits"]) < f(&rows[1]["R2_bits"]));
}

#[test]
fn trivial_error_budget_clips_at_the_search_ceiling() {
    let rows = csv_rows(&stdout(&with_channel("region", &["--n", "1000", "--eps", "1", "--alpha", "0.5"])));
    assert_eq!(rows[0]["status"], "clipped");
    // User 2 gets whatever user 1 leaves of ε = 1, i.e. everything.
    assert!((f(&rows[0]["R2_bits"]) - 1.5 * f(&rows[0]["R2_asym_bits"])).abs() < 1e-9);
}

#[test]
fn config_file_and_subcommand_are_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"command":"dt-dpc","channel":{"P":2.0,"N1":1.0,"N2":1.0},"ns":[100],"alphas":[0.5],"sizes":{"kind":"counts","m1":1,"m2":1}}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let rows = csv_rows(&stdout(&["--config", p]));
    assert_eq!(f(&rows[0]["total"]), 0.0);
    assert_eq!(code(&["--config", p, "validate"]), 2);
    assert_eq!(code(&["--config", "/nonexistent/cfg.json"]), 2);
}

#[test]
fn json_lines_carry_a_header_and_one_object_per_row() {
    let text = stdout(&with_channel("kappa-beta", &["--n", "100,200", "--alpha", "0.5", "--eps", "1e-2", "--format", "json"]));
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["header"]["tool"], "fblgbc");
    assert_eq!(lines[0]["header"]["config"]["command"], "kappa-beta");
    for row in &lines[1..] {
        assert!(row["per_letter_bits_1"].as_f64().unwrap() <= row["capacity_bits_1"].as_f64().unwrap());
    }
}
