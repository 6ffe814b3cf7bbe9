use std::fs;
use std::process::Command;

use charsum_cli::run_cli_with;
use serde_json::Value;

struct Run {
    code: i32,
    out: String,
    err: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.out).expect("stdout is one JSON record")
    }

    fn failed_checks(&self) -> Vec<String> {
        self.json()["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| !c["pass"].as_bool().unwrap())
            .map(|c| c["name"].as_str().unwrap().to_string())
            .collect()
    }
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("charsum").chain(args.iter().copied());
    let code = run_cli_with(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

#[test]
fn field_info_for_f9() {
    let r = run(&["field-info", "--p", "3", "--n", "2"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v = r.json();
    assert_eq!(v["manifest"]["command"], "field-info");
    assert_eq!(v["payload"]["kind"], "field-info");
    assert_eq!(v["payload"]["q"], 9);
    assert_eq!(v["payload"]["modulus"], serde_json::json!([1, 0, 1]));
    assert_eq!(v["payload"]["quadratic_char"], 4);
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let r = run(&["field-info", "--p", "4"]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("not prime"), "{}", r.err);
    assert!(r.out.is_empty());

    assert_eq!(run(&["moment", "--p", "4", "--kappa", "1", "--eta", "1"]).code, 2);
    assert_eq!(run(&["field-info"]).code, 2);
    assert_eq!(run(&["--threads", "0", "field-info", "--p", "5"]).code, 2);
    assert_eq!(run(&["no-such-command"]).code, 2);
    assert_eq!(run(&["moment", "--p", "7", "--kappa", "1", "--eta", "0"]).code, 2);
    assert_eq!(run(&["bilinear", "--p", "7", "--x-size", "9", "--y-size", "2", "--kappa", "1", "--s", "1"]).code, 2);
    assert_eq!(run(&["equidist", "--mode", "fixed-eta", "--p", "3", "--eta", "x"]).code, 2);
}

#[test]
fn failed_scan_primes_are_check_failures() {
    for args in [["--p", "3", "--eta", "quadratic"], ["--p", "101", "--eta", "j0"]] {
        let r = run(&[&["equidist", "--mode", "fixed-eta"][..], &args[..]].concat());
        assert_eq!(r.code, 1, "{}", r.err);
        assert!(r.err.contains("scan_failed_primes"));
        assert!(r.json()["payload"]["rows"][0]["error"].is_string());
    }
}

#[test]
fn help_exits_0() {
    let r = run(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("equidist"));
}

#[test]
fn identities_pass() {
    let r = run(&["verify", "--suite", "identities", "--p-max", "31"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.failed_checks().is_empty());
    let v = r.json();
    assert_eq!(v["payload"]["kind"], "identities");
    assert_eq!(v["manifest"]["params"]["p_max"], 31);
}

#[test]
fn moment_record_keys() {
    // κ = (2) with the quadratic character of F_31: |M - M*| = 2 while the
    // stated gap bound is 1, so the run exits 1 on that check alone.
    let r = run(&["moment", "--p", "31", "--kappa", "2", "--eta", "15"]);
    assert_eq!(r.code, 1, "{}", r.err);
    assert_eq!(r.failed_checks(), vec!["moment_gap_bound".to_string()]);
    assert!(r.err.contains("check failed: moment_gap_bound"));
    let v = r.json();
    assert_eq!(v["payload"]["kind"], "moment");
    for key in ["q", "spec", "value", "abs", "trivial_bound", "theorem_bound", "ratio"] {
        assert!(v["payload"]["record"].get(key).is_some(), "record lacks {key}");
    }
    for key in ["m_value", "mstar_value", "theta", "gap_bound", "excluded_terms_bound"] {
        assert!(v["payload"]["decomposition"].get(key).is_some(), "decomposition lacks {key}");
    }
    for key in ["command", "params", "tool_version", "started", "finished"] {
        assert!(v["manifest"].get(key).is_some(), "manifest lacks {key}");
    }
}

#[test]
fn moment_mixed_spec() {
    let r = run(&["moment", "--p", "101", "--kappa", "2,1", "--lambda", "1", "--eta", "3,7", "--rho", "11"]);
    assert_eq!(r.failed_checks(), vec!["moment_gap_bound".to_string()]);
    let ratio = r.json()["payload"]["record"]["ratio"].as_f64().unwrap();
    assert!(ratio < 1.0);
}

#[test]
fn bilinear_command() {
    let args = ["--seed", "7", "bilinear", "--p", "101", "--x-size", "20", "--y-size", "5", "--kappa", "2", "--s", "2"];
    let a = run(&args);
    assert_eq!(a.code, 0, "{}", a.err);
    let v = a.json();
    assert_eq!(v["payload"]["x"].as_array().unwrap().len(), 20);
    assert!(v["payload"]["ratio"].as_f64().unwrap() <= 2.0);
    let b = run(&args);
    assert_eq!(v["payload"], b.json()["payload"]);
}

#[test]
fn gauss_json_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let r = run(&["gauss", "--p", "2", "--n", "4", "--json", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["payload"]["kind"], "gauss");
    assert_eq!(v["payload"]["q"], 16);

    let bad = dir.path().join("missing").join("g.json");
    let r = run(&["gauss", "--p", "5", "--json", bad.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.err.starts_with("error:"), "{}", r.err);
}

#[test]
fn equidist_scan_csv() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("primes.txt");
    fs::write(&list, "# small scan\n101, 211\n307 401\n503\n").unwrap();
    let csv = dir.path().join("scan.csv");
    let r = run(&[
        "equidist", "--mode", "fixed-eta", "--p-list", list.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "q,N,d_star,etk_bound,scaled,slope_so_far");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("101,98,"));
    let tsv = fs::read_to_string(csv.with_extension("tsv")).unwrap();
    assert_eq!(tsv.lines().next(), Some("log_q\tlog_d_star"));
    assert_eq!(tsv.lines().count(), 6);
    assert_eq!(r.json()["payload"]["kind"], "scan");

    let bad = dir.path().join("nope").join("scan.csv");
    let r = run(&["equidist", "--mode", "fixed-eta", "--p", "101", "--csv", bad.to_str().unwrap()]);
    assert_eq!(r.code, 2);
}

#[test]
fn equidist_joint_and_bilinear_modes() {
    let r = run(&["equidist", "--mode", "joint", "--p", "211", "--s", "2", "--grid", "32"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let r = run(&["equidist", "--mode", "bilinear", "--p", "211"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let report = &r.json()["payload"]["rows"][0]["report"];
    assert!(report["d_star"].as_f64().unwrap() <= report["theorem_rhs"].as_f64().unwrap());
}

#[test]
fn cache_dir_flag_writes_field_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let first = run(&["--cache-dir", d, "field-info", "--p", "7", "--n", "2"]);
    assert_eq!(first.code, 0, "{}", first.err);
    assert!(dir.path().join("F7^2.jqs").is_file());
    let second = run(&["--cache-dir", d, "field-info", "--p", "7", "--n", "2"]);
    assert_eq!(first.json()["payload"], second.json()["payload"]);
}

#[test]
fn cache_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_charsum"))
        .args(["field-info", "--p", "13"])
        .env("CHARSUM_CACHE_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("F13^1.jqs").is_file());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["payload"]["generator"], 2);
}

#[test]
fn verify_payload_ignores_thread_count() {
    let strip = |r: Run| r.out[r.out.find("\"payload\"").unwrap()..].to_string();
    let a = run(&["--threads", "1", "verify", "--suite", "bilinear", "--p-max", "23", "--seed", "2"]);
    let b = run(&["--threads", "3", "verify", "--suite", "bilinear", "--p-max", "23", "--seed", "2"]);
    assert_eq!(a.code, 0, "{}", a.err);
    assert_eq!(strip(a), strip(b));
}
