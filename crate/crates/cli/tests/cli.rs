use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wrapcheck-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrapcheck")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn scan_of_the_corpus_exits_one_with_sat_findings() {
    let out = run(&["scan", "--reproducible", p(&corpus())]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["tool"], "wrapcheck");
    assert_eq!(v["data_model"], "ILP32");
    assert!(v["summary"]["by_verdict"]["sat"].as_u64().unwrap() > 0);
    let first = &v["findings"][0];
    assert_eq!(first["id"], "WRAP-0001");
    assert_eq!(first["threat_tag"], "T1");
}

#[test]
fn scan_of_an_empty_directory_exits_zero() {
    let dir = scratch("empty");
    let out = run(&["scan", p(&dir)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["summary"]["findings"], 0);
}

#[test]
fn tiny_budget_exits_two() {
    let out = run(&["scan", "--budget-seconds", "0.000001", p(&corpus().join("alloc_overflow"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["findings"][0]["verdict"], "unknown");
}

#[test]
fn parse_errors_become_report_entries() {
    let dir = scratch("bad");
    fs::write(dir.join("bad.c"), "int f( {").unwrap();
    fs::write(dir.join("ok.c"), "void *g(uint32_t n) { return malloc(n * 16); }").unwrap();
    let out = run(&["scan", p(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["errors"].as_array().unwrap().len(), 1);
    assert_eq!(v["findings"].as_array().unwrap().len(), 1);
}

#[test]
fn reproducible_reports_are_byte_identical_and_out_writes_a_file() {
    let dir = scratch("out");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    for f in [&a, &b] {
        let out = run(&["chain", "--reproducible", "--seed", "3", "--out", p(f), p(&corpus())]);
        assert_eq!(out.status.code(), Some(1));
        assert!(out.stdout.is_empty());
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(v["chains"].as_array().unwrap().len() >= 2);
}

#[test]
fn text_format_has_a_table() {
    let out = run(&["scan", "--format", "text", p(&corpus().join("wolfssl_mldsa"))]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ShiftSignedUB/WD1"));
    assert!(text.contains("unsat"));
}

#[test]
fn lp64_removes_the_truncation_finding() {
    let out = run(&["scan", "--data-model", "lp64", p(&corpus().join("cfe_resource_id"))]);
    let v = json(&out);
    assert_eq!(v["data_model"], "LP64");
    assert!(v["findings"].as_array().unwrap().iter().all(|f| f["kind"] != "TruncCast"));
}

#[test]
fn guard_derive_with_a_binding() {
    let out = run(&[
        "guard",
        "derive",
        "--encoding",
        "SubUnderflow",
        "--variable",
        "len",
        "--direction",
        "safe-min",
        "--bind",
        "tlv_len=5",
        p(&corpus().join("mosquitto_proxy_v2")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let g = &json(&out)["guards"][0];
    assert_eq!(g["threshold_decimal"], 8);
    assert_eq!(g["threshold"], "0x0008");
    assert_eq!(g["direction"], "safe_min");
}

#[test]
fn guard_bench_reports_zero_errors() {
    let out = run(&[
        "guard",
        "bench",
        "--encoding",
        "MulOverflow",
        "--variable",
        "count",
        "--direction",
        "safe-max",
        "--safe",
        "500",
        "--unsafe",
        "500",
        p(&corpus().join("cfe_resource_id")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let g = &json(&out)["guards"][0];
    assert_eq!(g["threshold_decimal"], 89_478_485);
    assert_eq!(g["bench"]["false_positives"], 0);
    assert_eq!(g["bench"]["false_negatives"], 0);
}

#[test]
fn guard_with_an_unknown_encoding_fails() {
    let out = run(&[
        "guard",
        "derive",
        "--encoding",
        "Nothing",
        "--variable",
        "n",
        "--direction",
        "safe-max",
        p(&corpus().join("alloc_overflow")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no encoding matches"));
}

#[test]
fn policy_appends_to_the_log() {
    let dir = scratch("policy");
    let log = dir.join("decisions.log");
    let (actions, policy) = (corpus().join("policy/actions.kv"), corpus().join("policy/policy.kv"));
    let args = [
        "policy",
        p(&actions),
        "--policy",
        p(&policy),
        "--log",
        p(&log),
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("action=exploit-email verdict=unsafe failed=C1,C2,C4,C5,C6"));
    run(&args);
    let logged = fs::read_to_string(&log).unwrap();
    assert_eq!(logged.lines().count(), 8);
    assert!(logged.lines().all(|l| l.contains("tag=T2")));
}

#[test]
fn dump_smt2_writes_files() {
    let dir = scratch("smt2");
    let out = run(&["dump-smt2", "--dir", p(&dir), p(&corpus().join("openbsd_tcp_input"))]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("WRAP-0001.smt2").is_file());
    assert!(dir.join("WRAP-0002.smt2").is_file());
}

#[test]
fn regress_passes_on_the_corpus() {
    let out = run(&["regress", p(&corpus())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("8 fixtures, 0 failed"));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        vec!["scan"],
        vec!["chain"],
        vec!["guard", "derive"],
        vec!["guard", "bench"],
        vec!["policy"],
        vec!["dump-smt2"],
        vec!["regress"],
    ] {
        let mut args = sub.clone();
        args.push("--help");
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{sub:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub:?}");
    }
}
