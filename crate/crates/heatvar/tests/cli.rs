//! Black-box tests of the command-line interface: determinism, round
//! trips, config-file precedence and exit codes.

use serde_json::Value;
use std::fs;
use std::process::{Command, Output};

fn heatvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatvar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--n", "4", "--m", "2", "--dx", "0.5", "--delta-n", "0.25", "--theta", "1.0",
        "--sigma", "1.0", "--seed", "42",
    ];
    let a = heatvar(&args);
    let b = heatvar(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let header = stdout_str(&a).lines().next().unwrap().to_string();
    assert_eq!(header, "i,k,t,x,dX");
    assert_eq!(stdout_str(&a).lines().count(), 1 + 4 * 2);

    let c = heatvar(&[
        "simulate", "--n", "4", "--m", "2", "--dx", "0.5", "--delta-n", "0.25", "--theta", "1.0",
        "--sigma", "1.0", "--seed", "43",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inc = dir.path().join("inc.csv");
    let out = heatvar(&[
        "simulate", "--n", "256", "--m", "4", "--dx", "0.25", "--delta-n", "0.0009765625",
        "--theta", "1.0", "--sigma", "1.0", "--seed", "7", "--out", inc.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));

    let est = heatvar(&[
        "estimate", "--input", inc.to_str().unwrap(), "--p", "2", "--known-theta", "1.0",
    ]);
    assert!(est.status.success(), "{}", stderr_str(&est));
    let json: Value = serde_json::from_str(&stdout_str(&est)).unwrap();
    assert_eq!(json["target"], "sigma");
    let point = json["point"].as_f64().unwrap();
    assert!((point - 1.0).abs() < 0.2, "sigma estimate {point}");
    assert!(json["ci_low"].as_f64().unwrap() <= point);
    assert!(json["ci_high"].as_f64().unwrap() >= point);
    assert_eq!(json["n"].as_u64().unwrap(), 256);
    assert_eq!(json["m"].as_u64().unwrap(), 4);
    // resolved config is embedded
    assert_eq!(json["config"]["p"].as_u64().unwrap(), 2);
    assert_eq!(json["config"]["known_theta"].as_f64().unwrap(), 1.0);
}

#[test]
fn asymvar_reports_lambda() {
    let out = heatvar(&[
        "asymvar", "--p", "2", "--theta", "1", "--sigma", "1", "--radius", "10000",
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let json: Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let lambda = json["lambda"].as_f64().unwrap();
    assert!((lambda - 2.357487448313).abs() < 1e-6, "lambda {lambda}");
    assert_eq!(json["R"].as_u64().unwrap(), 10000);
    assert!(json["tail_bound"].as_f64().unwrap() < 1e-8);
    assert_eq!(json["config"]["radius"].as_u64().unwrap(), 10000);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"p": 2, "theta": 1.0, "sigma": 1.0, "radius": 100}"#,
    )
    .unwrap();
    let base = heatvar(&["asymvar", "--config", cfg.to_str().unwrap()]);
    assert!(base.status.success(), "{}", stderr_str(&base));
    let bjson: Value = serde_json::from_str(&stdout_str(&base)).unwrap();
    assert_eq!(bjson["R"].as_u64().unwrap(), 100);

    // an explicit flag wins over the file entry
    let over = heatvar(&["asymvar", "--config", cfg.to_str().unwrap(), "--radius", "50"]);
    let ojson: Value = serde_json::from_str(&stdout_str(&over)).unwrap();
    assert_eq!(ojson["R"].as_u64().unwrap(), 50);
    assert_eq!(ojson["config"]["radius"].as_u64().unwrap(), 50);
}

#[test]
fn cov_matches_known_entry() {
    // theta = 2/pi makes the first variance 1 + (sqrt(2) - 2)/2 = 1/sqrt(2)
    let out = heatvar(&[
        "cov", "--n", "2", "--m", "1", "--delta-n", "1", "--theta", "0.6366197723675814",
        "--sigma", "1",
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let text = stdout_str(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    let c11: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    assert!((c11 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{c11}");
}

#[test]
fn mc_clt_emits_report_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let out = heatvar(&[
        "mc-clt", "--n", "16", "--m", "2", "--dx", "0.5", "--delta-n", "0.01", "--theta", "1",
        "--sigma", "1", "--p", "2", "--reps", "8", "--seed", "3", "--samples-out",
        samples.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let json: Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["samples"].as_array().unwrap().len(), 8);
    assert!(json["v2_theoretical"].as_f64().unwrap() > 0.0);
    assert_eq!(json["config"]["seed"].as_u64().unwrap(), 3);
    let csv = fs::read_to_string(&samples).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s");
    assert_eq!(lines.len(), 9);
}

#[test]
fn exit_codes_and_error_prefix() {
    // missing required option: usage error, exit 2
    let missing = heatvar(&["simulate", "--n", "4"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr_str(&missing).starts_with("error:"), "{}", stderr_str(&missing));

    // invalid parameter value: usage error, exit 2
    let bad = heatvar(&[
        "simulate", "--n", "4", "--m", "1", "--delta-n", "1", "--theta", "-1", "--sigma", "1",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr_str(&bad).starts_with("error:"));

    // malformed input CSV: runtime error, exit 1, row/column in message
    let dir = tempfile::tempdir().unwrap();
    let badcsv = dir.path().join("bad.csv");
    fs::write(&badcsv, "i,k,t,x,dX\n1,0,0.5,0.0,oops\n").unwrap();
    let est = heatvar(&["estimate", "--input", badcsv.to_str().unwrap(), "--p", "2"]);
    assert_eq!(est.status.code(), Some(1));
    let msg = stderr_str(&est);
    assert!(msg.starts_with("error:"), "{msg}");
    assert!(msg.contains("row 2") && msg.contains("column 5"), "{msg}");
    assert!(msg.contains("oops"), "{msg}");

    // wrong header
    let badhdr = dir.path().join("hdr.csv");
    fs::write(&badhdr, "a,b,c\n").unwrap();
    let est2 = heatvar(&["estimate", "--input", badhdr.to_str().unwrap(), "--p", "2"]);
    assert_eq!(est2.status.code(), Some(1));
    assert!(stderr_str(&est2).contains("header"));
}
