//! Fixture manifests and the regression runner.
//!
//! A fixture is a directory holding `source.c` and a `manifest` of
//! key=value records:
//!
//! ```text
//! record=meta reference="..."
//! record=expect kind=ShiftSignedUB line=7 form=WD1 verdict=sat
//! record=witness kind=SubUnderflow line=5 holds=true len=1 tlv_len=5
//! record=chain stage1=SeqComparePair@11 stage2=IndexBound@13 verdict=sat
//! record=chain_witness stage1=... stage2=... bridge_value=0x... sack_start=...
//! record=guard kind=SubUnderflow line=5 variable=len direction=safe-min threshold=8 bind.tlv_len=5
//! ```
//!
//! Every `expect` must match exactly one finding and every finding must be
//! expected. Witness records are checked by concrete evaluation only.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;
use wrapcheck_solver::{eval_formula, substitute, Assignment, Verdict};

use crate::chain::compose;
use crate::encode::Encoding;
use crate::extract::PatternKind;
use crate::guard::{derive_guard, Direction};
use crate::kv::{self, parse_u64, KvError, Record};
use crate::report::{hex, scan_sources, ScanOptions, ScanOutput, VerdictLabel};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: KvError,
    },
}

/// Identifies one encoding within a fixture.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SiteKey {
    pub kind: PatternKind,
    pub line: u32,
    pub form: Option<String>,
}

impl fmt::Display for SiteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.line)?;
        if let Some(form) = &self.form {
            write!(f, "/{form}")?;
        }
        Ok(())
    }
}

impl SiteKey {
    fn of(e: &Encoding) -> SiteKey {
        SiteKey {
            kind: e.kind,
            line: e.site.line,
            form: e.form.map(String::from),
        }
    }

    fn from_record(r: &Record) -> Result<SiteKey, KvError> {
        Ok(SiteKey {
            kind: r.require("kind")?.parse().map_err(|e: String| r.bad("kind", e))?,
            line: r.number("line")? as u32,
            form: r.get("form").map(String::from),
        })
    }

    /// `Kind@line[/form]`.
    fn parse_selector(r: &Record, key: &str) -> Result<SiteKey, KvError> {
        let text = r.require(key)?;
        let bad = || r.bad(key, format!("`{text}` is not Kind@line[/form]"));
        let (kind, rest) = text.split_once('@').ok_or_else(bad)?;
        let (line, form) = match rest.split_once('/') {
            Some((l, f)) => (l, Some(f.to_string())),
            None => (rest, None),
        };
        Ok(SiteKey {
            kind: kind.parse().map_err(|_| bad())?,
            line: line.parse().map_err(|_| bad())?,
            form,
        })
    }
}

const RESERVED: &[&str] = &[
    "record",
    "kind",
    "line",
    "form",
    "holds",
    "stage1",
    "stage2",
    "bridge_value",
    "variable",
    "direction",
    "threshold",
    "verdict",
];

fn assignment(r: &Record) -> Result<Assignment, KvError> {
    r.fields
        .iter()
        .filter(|(k, _)| !RESERVED.contains(&k.as_str()) && !k.starts_with("bind."))
        .map(|(k, v)| {
            parse_u64(v)
                .map(|n| (k.clone(), n))
                .ok_or_else(|| r.bad(k, format!("`{v}` is not a number")))
        })
        .collect()
}

fn verdict_of(r: &Record) -> Result<VerdictLabel, KvError> {
    match r.require("verdict")? {
        "sat" => Ok(VerdictLabel::Sat),
        "unsat" => Ok(VerdictLabel::Unsat),
        "unknown" => Ok(VerdictLabel::Unknown),
        other => Err(r.bad("verdict", format!("`{other}` is not sat/unsat/unknown"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expect {
    pub site: SiteKey,
    pub verdict: VerdictLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCheck {
    pub site: SiteKey,
    pub values: Assignment,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainExpect {
    pub stage1: SiteKey,
    pub stage2: SiteKey,
    pub verdict: VerdictLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainWitnessCheck {
    pub stage1: SiteKey,
    pub stage2: SiteKey,
    pub values: Assignment,
    pub bridge_value: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardExpect {
    pub site: SiteKey,
    pub variable: String,
    pub direction: Direction,
    pub threshold: u64,
    pub bindings: Assignment,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub reference: String,
    pub expects: Vec<Expect>,
    pub witnesses: Vec<WitnessCheck>,
    pub chains: Vec<ChainExpect>,
    pub chain_witnesses: Vec<ChainWitnessCheck>,
    pub guards: Vec<GuardExpect>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, KvError> {
        let mut m = Manifest::default();
        for r in kv::parse(text)? {
            match r.require("record")? {
                "meta" => m.reference = r.get("reference").unwrap_or_default().to_string(),
                "expect" => m.expects.push(Expect {
                    site: SiteKey::from_record(&r)?,
                    verdict: verdict_of(&r)?,
                }),
                "witness" => m.witnesses.push(WitnessCheck {
                    site: SiteKey::from_record(&r)?,
                    values: assignment(&r)?,
                    holds: r.get("holds").map_or(true, |v| v == "true"),
                }),
                "chain" => m.chains.push(ChainExpect {
                    stage1: SiteKey::parse_selector(&r, "stage1")?,
                    stage2: SiteKey::parse_selector(&r, "stage2")?,
                    verdict: verdict_of(&r)?,
                }),
                "chain_witness" => m.chain_witnesses.push(ChainWitnessCheck {
                    stage1: SiteKey::parse_selector(&r, "stage1")?,
                    stage2: SiteKey::parse_selector(&r, "stage2")?,
                    values: assignment(&r)?,
                    bridge_value: r.get("bridge_value").map(|_| r.number("bridge_value")).transpose()?,
                }),
                "guard" => m.guards.push(GuardExpect {
                    site: SiteKey::from_record(&r)?,
                    variable: r.require("variable")?.to_string(),
                    direction: r.require("direction")?.parse().map_err(|e: String| r.bad("direction", e))?,
                    threshold: r.number("threshold")?,
                    bindings: r
                        .fields
                        .iter()
                        .filter_map(|(k, _)| k.strip_prefix("bind.").map(|v| (k, v)))
                        .map(|(k, v)| Ok((v.to_string(), r.number(k)?)))
                        .collect::<Result<_, KvError>>()?,
                }),
                other => return Err(r.bad("record", format!("unknown record type `{other}`"))),
            }
        }
        Ok(m)
    }
}

/// One mismatch between a manifest and a scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diff {
    Missing { site: String, expected: String },
    Ambiguous { site: String, count: usize },
    WrongVerdict { site: String, expected: String, found: String },
    Unexpected { site: String, verdict: String },
    Witness { site: String, message: String },
    Chain { chain: String, message: String },
    Guard { site: String, message: String },
    File { message: String },
}

impl fmt::Display for Diff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diff::Missing { site, expected } => write!(f, "- {site}: expected {expected}, no finding"),
            Diff::Ambiguous { site, count } => write!(f, "! {site}: {count} findings match"),
            Diff::WrongVerdict { site, expected, found } => {
                write!(f, "~ {site}: expected {expected}, found {found}")
            }
            Diff::Unexpected { site, verdict } => write!(f, "+ {site}: unexpected finding ({verdict})"),
            Diff::Witness { site, message } => write!(f, "! witness {site}: {message}"),
            Diff::Chain { chain, message } => write!(f, "! chain {chain}: {message}"),
            Diff::Guard { site, message } => write!(f, "! guard {site}: {message}"),
            Diff::File { message } => write!(f, "! {message}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureResult {
    pub name: String,
    pub reference: String,
    pub findings: usize,
    pub chains: usize,
    pub diffs: Vec<Diff>,
    pub elapsed: Duration,
}

impl FixtureResult {
    pub fn passed(&self) -> bool {
        self.diffs.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RegressionReport {
    pub fixtures: Vec<FixtureResult>,
    pub elapsed: Duration,
}

impl RegressionReport {
    pub fn passed(&self) -> bool {
        !self.fixtures.is_empty() && self.fixtures.iter().all(FixtureResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FixtureResult> {
        self.fixtures.iter().filter(|f| !f.passed())
    }
}

impl fmt::Display for RegressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.fixtures {
            writeln!(
                f,
                "{} {:<22} {:>3} findings {:>2} chains  {:>8.1} ms",
                if r.passed() { "PASS" } else { "FAIL" },
                r.name,
                r.findings,
                r.chains,
                r.elapsed.as_secs_f64() * 1e3
            )?;
            for d in &r.diffs {
                writeln!(f, "    {}: {d}", r.name)?;
            }
        }
        let failed = self.failures().count();
        writeln!(
            f,
            "{} fixtures, {} failed, {:.1} ms",
            self.fixtures.len(),
            failed,
            self.elapsed.as_secs_f64() * 1e3
        )
    }
}

/// Fixture directories under `dir` that contain a manifest, sorted.
pub fn fixture_dirs(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.join("manifest").is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_manifest(fixture: &Path) -> Result<Manifest, CorpusError> {
    let path = fixture.join("manifest");
    Manifest::parse(&read(&path)?).map_err(|source| CorpusError::Manifest { path, source })
}

/// Scans one fixture with chains enabled.
pub fn scan_fixture(fixture: &Path, opts: &ScanOptions) -> Result<ScanOutput, CorpusError> {
    let src = fixture.join("source.c");
    let text = read(&src)?;
    let name = fixture.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let opts = ScanOptions {
        chains: true,
        ..opts.clone()
    };
    scan_sources(&[(format!("{name}/source.c"), text)], &opts).map_err(|e| CorpusError::Io {
        path: src,
        source: std::io::Error::other(e.to_string()),
    })
}

/// Compares a scan against its manifest.
pub fn compare(manifest: &Manifest, out: &ScanOutput, opts: &ScanOptions) -> Vec<Diff> {
    let mut diffs: Vec<Diff> = out
        .report
        .errors
        .iter()
        .map(|e| Diff::File {
            message: e.message.clone(),
        })
        .collect();
    let keys: Vec<SiteKey> = out.analyzed.iter().map(|a| SiteKey::of(&a.encoding)).collect();
    let mut used = vec![false; keys.len()];
    for e in &manifest.expects {
        let hits: Vec<usize> = (0..keys.len()).filter(|&i| keys[i] == e.site).collect();
        match hits.as_slice() {
            [] => diffs.push(Diff::Missing {
                site: e.site.to_string(),
                expected: e.verdict.as_str().into(),
            }),
            [i] => {
                used[*i] = true;
                let found = out.report.findings[*i].verdict;
                if found != e.verdict {
                    diffs.push(Diff::WrongVerdict {
                        site: e.site.to_string(),
                        expected: e.verdict.as_str().into(),
                        found: found.as_str().into(),
                    });
                }
            }
            many => diffs.push(Diff::Ambiguous {
                site: e.site.to_string(),
                count: many.len(),
            }),
        }
    }
    for (i, k) in keys.iter().enumerate() {
        if !used[i] && !manifest.expects.iter().any(|e| &e.site == k) {
            diffs.push(Diff::Unexpected {
                site: k.to_string(),
                verdict: out.report.findings[i].verdict.as_str().into(),
            });
        }
    }

    let find = |site: &SiteKey| -> Result<&Encoding, String> {
        let hits: Vec<&Encoding> = out
            .analyzed
            .iter()
            .map(|a| &a.encoding)
            .filter(|e| &SiteKey::of(e) == site)
            .collect();
        match hits.as_slice() {
            [one] => Ok(one),
            [] => Err("no such encoding".into()),
            _ => Err("ambiguous site".into()),
        }
    };

    for w in &manifest.witnesses {
        let result = find(&w.site).and_then(|e| eval_formula(&e.formula, &w.values).map_err(|e| e.to_string()));
        match result {
            Ok(v) if v == w.holds => {}
            Ok(v) => diffs.push(Diff::Witness {
                site: w.site.to_string(),
                message: format!("evaluates to {v}, expected {}", w.holds),
            }),
            Err(message) => diffs.push(Diff::Witness {
                site: w.site.to_string(),
                message,
            }),
        }
    }

    let chain_index = |s1: &SiteKey, s2: &SiteKey| {
        out.chain_specs
            .iter()
            .position(|c| &SiteKey::of(&c.stage1) == s1 && &SiteKey::of(&c.stage2) == s2)
    };
    let chain_name = |s1: &SiteKey, s2: &SiteKey| format!("{s1} -> {s2}");
    for c in &manifest.chains {
        let name = chain_name(&c.stage1, &c.stage2);
        let Some(i) = chain_index(&c.stage1, &c.stage2) else {
            diffs.push(Diff::Chain {
                chain: name,
                message: "not enumerated".into(),
            });
            continue;
        };
        let spec = &out.chain_specs[i];
        match out.report.chains.iter().find(|f| f.stage1.encoding == spec.stage1.id && f.stage2.encoding == spec.stage2.id) {
            Some(f) if f.verdict == c.verdict => {}
            Some(f) => diffs.push(Diff::Chain {
                chain: name,
                message: format!("expected {}, found {}", c.verdict.as_str(), f.verdict.as_str()),
            }),
            None => diffs.push(Diff::Chain {
                chain: name,
                message: "no chain finding".into(),
            }),
        }
    }
    for c in &manifest.chain_witnesses {
        let name = chain_name(&c.stage1, &c.stage2);
        let Some(i) = chain_index(&c.stage1, &c.stage2) else {
            diffs.push(Diff::Chain {
                chain: name,
                message: "witness names a chain that was not enumerated".into(),
            });
            continue;
        };
        let spec = &out.chain_specs[i];
        let check = compose(spec).map_err(|e| e.to_string()).and_then(|comp| {
            let f = &comp.formula;
            if !eval_formula(f, &c.values).map_err(|e| e.to_string())? {
                return Err("witness does not satisfy the composed formula".into());
            }
            let full = f.eval_definitions(&c.values).map_err(|e| e.to_string())?;
            let bridge = full.get(&comp.bridge).copied();
            match (c.bridge_value, bridge) {
                (Some(want), Some(got)) if want != got => {
                    let w = f.var_width(&comp.bridge).unwrap_or(64);
                    Err(format!("bridge value {}, expected {}", hex(got, w), hex(want, w)))
                }
                _ => Ok(()),
            }
        });
        if let Err(message) = check {
            diffs.push(Diff::Chain { chain: name, message });
        }
    }

    let copts = opts.check_options();
    for g in &manifest.guards {
        let site = g.site.to_string();
        let result = find(&g.site).and_then(|e| {
            let f = substitute(&e.formula, &g.bindings).map_err(|e| e.to_string())?;
            let spec = derive_guard(&f, &e.id, &g.variable, g.direction, &copts).map_err(|e| e.to_string())?;
            if spec.threshold != g.threshold {
                return Err(format!("threshold {}, expected {}", spec.threshold, g.threshold));
            }
            if spec.solver_calls > spec.width + 2 {
                return Err(format!("{} solver calls exceed width + 2", spec.solver_calls));
            }
            Ok(())
        });
        if let Err(message) = result {
            diffs.push(Diff::Guard { site, message });
        }
    }
    diffs
}

/// Scans every fixture under `dir` and checks it against its manifest.
pub fn run_regression(dir: &Path, opts: &ScanOptions) -> Result<RegressionReport, CorpusError> {
    let start = Instant::now();
    let mut report = RegressionReport::default();
    for fixture in fixture_dirs(dir)? {
        let t = Instant::now();
        let name = fixture.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let manifest = load_manifest(&fixture)?;
        let out = scan_fixture(&fixture, opts)?;
        let diffs = compare(&manifest, &out, opts);
        report.fixtures.push(FixtureResult {
            name,
            reference: manifest.reference.clone(),
            findings: out.report.findings.len(),
            chains: out.report.chains.len(),
            diffs,
            elapsed: t.elapsed(),
        });
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Witness values recorded for a site, as hex strings keyed by variable.
pub fn witness_hex(out: &ScanOutput, site: &SiteKey) -> Option<BTreeMap<String, String>> {
    out.analyzed
        .iter()
        .zip(&out.report.findings)
        .find(|(a, _)| &SiteKey::of(&a.encoding) == site)
        .and_then(|(a, f)| match a.verdict {
            Verdict::Sat(_) => f.witness.clone(),
            _ => None,
        })
}
