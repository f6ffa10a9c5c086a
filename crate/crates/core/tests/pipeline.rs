use std::fs;
use std::path::{Path, PathBuf};

use wrapcheck_core::corpus::{compare, load_manifest, run_regression, scan_fixture, Diff, Manifest};
use wrapcheck_core::encode::encode_alloc_overflow;
use wrapcheck_core::extract::{extract, PatternKind};
use wrapcheck_core::frontend::{load, DataModel};
use wrapcheck_core::guard::{check_guard, derive_guard, Direction, GuardDecision};
use wrapcheck_core::report::{scan, scan_sources, Budget, ScanOptions, VerdictLabel};
use wrapcheck_solver::{check_sat, eval_formula, substitute, Assignment, BvTerm, Verdict, Width};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wrapcheck-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn reproducible() -> ScanOptions {
    ScanOptions {
        reproducible: true,
        seed: 7,
        ..ScanOptions::default()
    }
}

#[test]
fn extracted_multiplication_encodes_like_the_direct_encoder() {
    let src = fs::read_to_string(corpus().join("alloc_overflow/source.c")).unwrap();
    let unit = load("a.c", &src, &DataModel::Ilp32).unwrap();
    let cands = extract(&unit, DataModel::Ilp32);
    let mul = cands.iter().find(|c| c.kind == PatternKind::MulOverflow).unwrap();
    let enc = &wrapcheck_core::encode::encode_candidate(mul).unwrap()[0];
    let direct = encode_alloc_overflow(&BvTerm::var("n", Width::W32), 16, None).unwrap();
    assert_eq!(enc.formula, direct.formula);
}

#[test]
fn derived_guard_is_sound_on_spot_checks() {
    let direct = encode_alloc_overflow(&BvTerm::var("n", Width::W32), 48, None).unwrap();
    let spec = derive_guard(&direct.formula, "direct", "n", Direction::SafeMax, &Default::default()).unwrap();
    assert_eq!(spec.threshold, 89_478_485);
    let probes = [
        0u64, 1, 2, 47, 48, 1000, 65_535, 1 << 20, 89_478_484, 89_478_485, 89_478_486, 89_478_487, 0x1000_0000,
        0x5555_5555, 0x7FFF_FFFF, 0x8000_0000, 0xAAAA_AAAA, 0xFFFF_FFF0, 0xFFFF_FFFE, 0xFFFF_FFFF,
    ];
    for n in probes {
        let overflows = n * 48 > u32::MAX as u64;
        let decision = check_guard(&spec, n);
        assert_eq!(decision == GuardDecision::Block, overflows, "n={n}");
        // Allowed inputs never satisfy the vulnerability predicate.
        let env: Assignment = [("n".to_string(), n)].into();
        if decision == GuardDecision::Allow {
            assert!(!eval_formula(&direct.formula, &env).unwrap());
        }
    }
}

#[test]
fn every_sat_witness_in_the_corpus_satisfies_its_formula() {
    let out = scan(&[corpus()], &reproducible()).unwrap();
    assert!(out.report.errors.is_empty(), "{:?}", out.report.errors);
    let mut sat = 0;
    for a in &out.analyzed {
        if let Verdict::Sat(w) = &a.verdict {
            assert!(eval_formula(&a.encoding.formula, &w.values).unwrap(), "{}", a.encoding.id);
            sat += 1;
        }
    }
    assert!(sat >= 20, "{sat}");
}

#[test]
fn reports_are_byte_identical_under_a_fixed_seed() {
    let opts = ScanOptions {
        chains: true,
        ..reproducible()
    };
    let a = scan(&[corpus()], &opts).unwrap().report.to_json();
    let b = scan(&[corpus()], &ScanOptions { jobs: 1, ..opts }).unwrap().report.to_json();
    assert_eq!(a, b);
    assert!(a.contains("\"generated_at\": \"1970-01-01T00:00:00Z\""));
}

#[test]
fn summary_counts_equal_the_sequences() {
    let out = scan(&[corpus()], &ScanOptions { chains: true, ..reproducible() }).unwrap();
    let r = &out.report;
    let s = &r.summary;
    assert_eq!(s.findings, r.findings.len());
    assert_eq!(s.by_verdict.sat + s.by_verdict.unsat + s.by_verdict.unknown, r.findings.len());
    let by_cwe: usize = s.by_cwe.values().map(|c| c.sat + c.unsat + c.unknown).sum();
    assert_eq!(by_cwe, r.findings.len());
    assert_eq!(s.chains.sat + s.chains.unsat + s.chains.unknown, r.chains.len());
    assert_eq!(s.files, 8);
    for f in &r.findings {
        assert_eq!(f.witness.is_some(), f.verdict == VerdictLabel::Sat, "{}", f.id);
    }
}

#[test]
fn empty_directory_gives_an_empty_report() {
    let dir = scratch("empty");
    let out = scan(&[dir], &reproducible()).unwrap();
    assert!(out.report.findings.is_empty());
    assert_eq!(out.report.exit_code(), 0);
}

#[test]
fn tiny_budget_gives_unknown_verdicts_and_exit_two() {
    let opts = ScanOptions {
        budget: Budget {
            seconds: 0.000001,
            max_conflicts: None,
        },
        ..reproducible()
    };
    let out = scan(&[corpus().join("alloc_overflow")], &opts).unwrap();
    assert!(!out.report.findings.is_empty());
    assert!(out.report.findings.iter().all(|f| f.verdict == VerdictLabel::Unknown));
    assert_eq!(out.report.exit_code(), 2);
}

#[test]
fn smt2_dump_writes_one_file_per_finding() {
    let dir = scratch("dump");
    let opts = ScanOptions {
        dump_smt2: Some(dir.clone()),
        ..reproducible()
    };
    let out = scan(&[corpus().join("wolfssl_mldsa")], &opts).unwrap();
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), out.report.findings.len());
    let text = fs::read_to_string(dir.join("WRAP-0001.smt2")).unwrap();
    assert!(text.contains("(check-sat)"));
    assert!(text.contains("ShiftSignedUB"));
}

#[test]
fn data_model_changes_the_truncation_verdict() {
    let src = fs::read_to_string(corpus().join("cfe_resource_id/source.c")).unwrap();
    let sources = [("c.c".to_string(), src)];
    let ilp = scan_sources(&sources, &reproducible()).unwrap();
    let lp = scan_sources(
        &sources,
        &ScanOptions {
            model: DataModel::Lp64,
            ..reproducible()
        },
    )
    .unwrap();
    let has_trunc = |o: &wrapcheck_core::report::ScanOutput| o.report.findings.iter().any(|f| f.kind == PatternKind::TruncCast);
    assert!(has_trunc(&ilp));
    assert!(!has_trunc(&lp));
}

#[test]
fn full_corpus_regression_passes() {
    let r = run_regression(&corpus(), &ScanOptions::default()).unwrap();
    assert!(r.passed(), "{r}");
    assert_eq!(r.fixtures.len(), 8);
}

#[test]
fn wrong_manifest_fails_with_a_diff_naming_the_fixture() {
    let dir = scratch("wrong");
    let fixture = dir.join("wolfssl_mldsa");
    fs::create_dir_all(&fixture).unwrap();
    fs::copy(corpus().join("wolfssl_mldsa/source.c"), fixture.join("source.c")).unwrap();
    let manifest = fs::read_to_string(corpus().join("wolfssl_mldsa/manifest")).unwrap();
    let wrong = manifest.replacen("form=WD2 verdict=unsat", "form=WD2 verdict=sat", 1);
    assert_ne!(wrong, manifest);
    fs::write(fixture.join("manifest"), wrong).unwrap();
    let r = run_regression(&dir, &ScanOptions::default()).unwrap();
    assert!(!r.passed());
    let text = r.to_string();
    assert!(text.contains("FAIL wolfssl_mldsa"), "{text}");
    assert!(text.contains("wolfssl_mldsa: ~ ShiftSignedUB@7/WD2: expected sat, found unsat"), "{text}");
}

#[test]
fn mosquitto_published_witness_and_guard_via_manifest_records() {
    let fixture = corpus().join("mosquitto_proxy_v2");
    let out = scan_fixture(&fixture, &ScanOptions::default()).unwrap();
    let m = Manifest::parse(
        "record=expect kind=TruncCast line=5 verdict=sat\n\
         record=expect kind=SubUnderflow line=5 verdict=sat\n\
         record=witness kind=SubUnderflow line=5 len=1 tlv_len=5\n",
    )
    .unwrap();
    assert_eq!(compare(&m, &out, &ScanOptions::default()), Vec::<Diff>::new());
    assert!(!load_manifest(&fixture).unwrap().guards.is_empty());

    let enc = out
        .analyzed
        .iter()
        .map(|a| &a.encoding)
        .find(|e| e.kind == PatternKind::SubUnderflow)
        .unwrap();
    let bound = substitute(&enc.formula, &[("tlv_len".to_string(), 5)].into()).unwrap();
    let len7 = substitute(&bound, &[("len".to_string(), 7)].into()).unwrap();
    assert!(check_sat(&len7).unwrap().is_sat());
}
