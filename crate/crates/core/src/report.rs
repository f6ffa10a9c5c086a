//! Scan orchestration and the report record: frontend, extraction,
//! encoding and solving per file, then one deterministic assembly step.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use wrapcheck_solver::{check, smtlib, CheckOptions, CheckStats, Formula, UnknownReason, Verdict};

use crate::chain::{enumerate_chains, run_chain, ChainSpec, ChainVerdict};
use crate::encode::{encode_candidate, Cwe, Encoding, ThreatTag};
use crate::extract::{extract, PatternKind, Severity};
use crate::frontend::{load, DataModel, SourceSpan};
use crate::guard::{BenchReport, GuardSpec};

pub const TOOL: &str = "wrapcheck";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Timestamp written in reproducible mode.
pub const FIXED_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Budget {
    pub seconds: f64,
    pub max_conflicts: Option<u64>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            seconds: 60.0,
            max_conflicts: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub model: DataModel,
    pub budget: Budget,
    /// Worker threads for solving; 0 lets the pool decide.
    pub jobs: usize,
    pub seed: u64,
    pub dump_smt2: Option<PathBuf>,
    /// Pins the timestamp and zeroes timings so output is byte-stable.
    pub reproducible: bool,
    pub chains: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            model: DataModel::Ilp32,
            budget: Budget::default(),
            jobs: 0,
            seed: 0,
            dump_smt2: None,
            reproducible: false,
            chains: false,
        }
    }
}

impl ScanOptions {
    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            timeout: Some(Duration::from_secs_f64(self.budget.seconds.max(0.0))),
            max_conflicts: self.budget.max_conflicts,
            seed: Some(self.seed),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictLabel {
    Sat,
    Unsat,
    Unknown,
}

impl From<&Verdict> for VerdictLabel {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Sat(_) => VerdictLabel::Sat,
            Verdict::Unsat => VerdictLabel::Unsat,
            Verdict::Unknown(_) => VerdictLabel::Unknown,
        }
    }
}

impl VerdictLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictLabel::Sat => "sat",
            VerdictLabel::Unsat => "unsat",
            VerdictLabel::Unknown => "unknown",
        }
    }
}

/// `0x`-prefixed hex zero-padded to `width / 4` digits (rounded up).
pub fn hex(value: u64, width: u32) -> String {
    format!("0x{:0digits$x}", value, digits = width.div_ceil(4) as usize)
}

fn hex_map(values: &BTreeMap<String, u64>, f: &Formula) -> BTreeMap<String, String> {
    values
        .iter()
        .map(|(k, v)| (k.clone(), hex(*v, f.var_width(k).unwrap_or(64))))
        .collect()
}

fn millis(d: Duration, reproducible: bool) -> f64 {
    if reproducible {
        0.0
    } else {
        (d.as_secs_f64() * 1e6).round() / 1e3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub id: String,
    pub encoding: String,
    pub cwe: Cwe,
    pub threat_tag: ThreatTag,
    pub kind: PatternKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<&'static str>,
    pub site: SourceSpan,
    pub function: String,
    pub verdict: VerdictLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unknown_reason: Option<String>,
    /// Free-variable values, present exactly when the verdict is sat.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, String>>,
    /// Defined intermediate values under the witness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived: Option<BTreeMap<String, String>>,
    pub severity: Severity,
    pub encoding_description: String,
    pub solve_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRef {
    pub finding: String,
    pub encoding: String,
    pub site: SourceSpan,
    pub verdict: VerdictLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainFinding {
    pub id: String,
    pub label: String,
    pub stage1: StageRef,
    pub stage2: StageRef,
    /// `output -> input`.
    pub bridge: String,
    pub verdict: VerdictLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_value: Option<String>,
    pub solve_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuardRecord {
    pub variable: String,
    pub direction: &'static str,
    pub threshold: String,
    pub threshold_decimal: u64,
    pub width: u32,
    pub source_encoding: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, String>,
    pub solver_calls: u32,
    pub derivation_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchReport>,
}

impl GuardRecord {
    pub fn new(
        spec: &GuardSpec,
        bindings: &BTreeMap<String, u64>,
        bench: Option<BenchReport>,
        reproducible: bool,
    ) -> Self {
        GuardRecord {
            variable: spec.variable.clone(),
            direction: spec.direction.as_str(),
            threshold: hex(spec.threshold, spec.width),
            threshold_decimal: spec.threshold,
            width: spec.width,
            source_encoding: spec.source_encoding.clone(),
            bindings: bindings.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            solver_calls: spec.solver_calls,
            derivation_ms: millis(spec.derivation_time, reproducible),
            bench,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileError {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct VerdictCounts {
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
}

impl VerdictCounts {
    fn add(&mut self, v: VerdictLabel) {
        match v {
            VerdictLabel::Sat => self.sat += 1,
            VerdictLabel::Unsat => self.unsat += 1,
            VerdictLabel::Unknown => self.unknown += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Summary {
    pub files: usize,
    pub findings: usize,
    pub by_verdict: VerdictCounts,
    pub by_cwe: BTreeMap<String, VerdictCounts>,
    pub chains: VerdictCounts,
    pub guards: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub generated_at: String,
    pub data_model: DataModel,
    pub budget: Budget,
    pub seed: u64,
    pub findings: Vec<Finding>,
    pub chains: Vec<ChainFinding>,
    pub guards: Vec<GuardRecord>,
    pub errors: Vec<FileError>,
    pub summary: Summary,
}

impl Report {
    pub fn empty(opts: &ScanOptions) -> Report {
        Report {
            tool: TOOL,
            version: VERSION,
            generated_at: timestamp(opts.reproducible),
            data_model: opts.model,
            budget: opts.budget,
            seed: opts.seed,
            findings: vec![],
            chains: vec![],
            guards: vec![],
            errors: vec![],
            summary: Summary::default(),
        }
    }

    /// Recomputes the summary from the sequences.
    pub fn summarize(&mut self, files: usize) {
        let mut s = Summary {
            files,
            findings: self.findings.len(),
            guards: self.guards.len(),
            errors: self.errors.len(),
            ..Summary::default()
        };
        for f in &self.findings {
            s.by_verdict.add(f.verdict);
            s.by_cwe.entry(f.cwe.to_string()).or_default().add(f.verdict);
        }
        for c in &self.chains {
            s.chains.add(c.verdict);
        }
        self.summary = s;
    }

    /// 0: no sat; 1: some sat; 2: errors or unknown verdicts.
    pub fn exit_code(&self) -> i32 {
        let unknown = self.findings.iter().any(|f| f.verdict == VerdictLabel::Unknown)
            || self.chains.iter().any(|c| c.verdict == VerdictLabel::Unknown);
        if unknown || !self.errors.is_empty() {
            2
        } else if self.findings.iter().any(|f| f.verdict == VerdictLabel::Sat)
            || self.chains.iter().any(|c| c.verdict == VerdictLabel::Sat)
        {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap_or_else(|e| unreachable!("report serialization: {e}"));
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        render_text(self)
    }
}

pub fn timestamp(reproducible: bool) -> String {
    if reproducible {
        FIXED_TIMESTAMP.to_string()
    } else {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

/// A finding together with the encoding it was solved from.
#[derive(Debug, Clone)]
pub struct Analyzed {
    pub encoding: Encoding,
    pub verdict: Verdict,
    pub stats: CheckStats,
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub report: Report,
    /// Parallel to `report.findings`.
    pub analyzed: Vec<Analyzed>,
    pub chain_specs: Vec<ChainSpec>,
}

impl ScanOutput {
    /// Looks up an encoding by encoding id, finding id, or a unique
    /// substring of the encoding id.
    pub fn find_encoding(&self, key: &str) -> Result<&Encoding, String> {
        let exact = self
            .report
            .findings
            .iter()
            .zip(&self.analyzed)
            .find(|(f, a)| f.id == key || a.encoding.id == key)
            .map(|(_, a)| &a.encoding);
        if let Some(e) = exact {
            return Ok(e);
        }
        let hits: Vec<&Encoding> = self
            .analyzed
            .iter()
            .map(|a| &a.encoding)
            .filter(|e| e.id.contains(key))
            .collect();
        match hits.as_slice() {
            [one] => Ok(one),
            [] => Err(format!("no encoding matches `{key}`")),
            many => Err(format!(
                "`{key}` is ambiguous: {}",
                many.iter().map(|e| e.id.as_str()).collect::<Vec<_>>().join(", ")
            )),
        }
    }
}

/// Expands directories to the `.c` files below them, sorted.
pub fn collect_sources(paths: &[PathBuf]) -> Result<Vec<PathBuf>, ScanError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in walkdir::WalkDir::new(p).sort_by_file_name() {
                let entry = entry.map_err(|e| ScanError::Io {
                    path: p.clone(),
                    source: e.into(),
                })?;
                if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "c") {
                    out.push(entry.into_path());
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn file_label(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Encodings of one source text, or the frontend error that stopped it.
pub fn encode_source(file: &str, source: &str, model: DataModel) -> Result<Vec<Encoding>, FileError> {
    let unit = load(file, source, &model).map_err(|e| FileError {
        file: file.to_string(),
        line: Some(e.span().line),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for c in extract(&unit, model) {
        match encode_candidate(&c) {
            Ok(es) => out.extend(es),
            Err(e) => {
                return Err(FileError {
                    file: file.to_string(),
                    line: Some(c.site.line),
                    message: format!("{}: cannot encode {} candidate: {e}", c.site, c.kind),
                })
            }
        }
    }
    Ok(out)
}

fn solve_all(encodings: &[Encoding], opts: &ScanOptions) -> Vec<(Verdict, CheckStats, Option<String>)> {
    let copts = opts.check_options();
    let solve = |e: &Encoding| match check(&e.formula, &copts) {
        Ok(o) => (o.verdict, o.stats, None),
        Err(err) => (
            Verdict::Unknown(UnknownReason::WallTimeExhausted),
            CheckStats::default(),
            Some(format!("{}: {err}", e.id)),
        ),
    };
    let run = || encodings.par_iter().map(solve).collect::<Vec<_>>();
    match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build() {
        Ok(pool) => pool.install(run),
        Err(_) => encodings.iter().map(solve).collect(),
    }
}

/// Runs the full pipeline over `paths`.
pub fn scan(paths: &[PathBuf], opts: &ScanOptions) -> Result<ScanOutput, ScanError> {
    let files = collect_sources(paths)?;
    let mut sources = Vec::with_capacity(files.len());
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| ScanError::Io {
            path: f.clone(),
            source: e,
        })?;
        sources.push((file_label(f), text));
    }
    scan_sources(&sources, opts)
}

/// Runs the pipeline over in-memory `(file, source)` pairs.
pub fn scan_sources(sources: &[(String, String)], opts: &ScanOptions) -> Result<ScanOutput, ScanError> {
    let mut report = Report::empty(opts);
    let mut encodings = Vec::new();
    for (file, text) in sources {
        match encode_source(file, text, opts.model) {
            Ok(es) => encodings.extend(es),
            Err(e) => report.errors.push(e),
        }
    }
    let solved = solve_all(&encodings, opts);
    let mut analyzed = Vec::with_capacity(encodings.len());
    for (i, (enc, (verdict, stats, err))) in encodings.into_iter().zip(solved).enumerate() {
        if let Some(message) = err {
            report.errors.push(FileError {
                file: enc.site.file.to_string(),
                line: Some(enc.site.line),
                message,
            });
        }
        let id = format!("WRAP-{:04}", i + 1);
        let (witness, derived) = match &verdict {
            Verdict::Sat(w) => (
                Some(hex_map(&w.values, &enc.formula)),
                Some(hex_map(&w.derived, &enc.formula)),
            ),
            _ => (None, None),
        };
        report.findings.push(Finding {
            id: id.clone(),
            encoding: enc.id.clone(),
            cwe: enc.cwe,
            threat_tag: enc.threat_tag,
            kind: enc.kind,
            form: enc.form,
            site: enc.site.clone(),
            function: enc.function.clone(),
            verdict: VerdictLabel::from(&verdict),
            unknown_reason: match &verdict {
                Verdict::Unknown(r) => Some(r.to_string()),
                _ => None,
            },
            witness,
            derived,
            severity: enc.severity,
            encoding_description: enc.description.clone(),
            solve_time_ms: millis(stats.elapsed, opts.reproducible),
        });
        if let Some(dir) = &opts.dump_smt2 {
            let text = smtlib::to_smt2(
                &enc.formula,
                &[
                    format!("{id} {}", enc.id),
                    format!("{} {} at {}", enc.cwe, enc.kind, enc.site),
                    enc.description.clone(),
                ],
            );
            let path = dir.join(format!("{id}.smt2"));
            fs::create_dir_all(dir)
                .and_then(|_| fs::write(&path, text))
                .map_err(|e| ScanError::Io { path, source: e })?;
        }
        analyzed.push(Analyzed {
            encoding: enc,
            verdict,
            stats,
        });
    }

    let chain_specs = if opts.chains {
        let encs: Vec<Encoding> = analyzed.iter().map(|a| a.encoding.clone()).collect();
        enumerate_chains(&encs)
    } else {
        vec![]
    };
    let finding_of: BTreeMap<&str, (&str, VerdictLabel)> = report
        .findings
        .iter()
        .map(|f| (f.encoding.as_str(), (f.id.as_str(), f.verdict)))
        .collect();
    let copts = opts.check_options();
    let results: Vec<_> = chain_specs.par_iter().map(|s| run_chain(s, &copts)).collect();
    let mut chains = Vec::new();
    for (i, (spec, result)) in chain_specs.iter().zip(results).enumerate() {
        let stage = |e: &Encoding| {
            let (fid, v) = finding_of.get(e.id.as_str()).copied().unwrap_or(("", VerdictLabel::Unknown));
            StageRef {
                finding: fid.to_string(),
                encoding: e.id.clone(),
                site: e.site.clone(),
                verdict: v,
            }
        };
        match result {
            Ok(cv) => chains.push(chain_finding(i, spec, &cv, stage(&spec.stage1), stage(&spec.stage2), opts)),
            Err(e) => report.errors.push(FileError {
                file: spec.stage1.site.file.to_string(),
                line: Some(spec.stage1.site.line),
                message: format!("chain {} -> {}: {e}", spec.stage1.id, spec.stage2.id),
            }),
        }
    }
    report.chains = chains;
    report.summarize(sources.len());
    Ok(ScanOutput {
        report,
        analyzed,
        chain_specs,
    })
}

fn chain_finding(
    i: usize,
    spec: &ChainSpec,
    cv: &ChainVerdict,
    stage1: StageRef,
    stage2: StageRef,
    opts: &ScanOptions,
) -> ChainFinding {
    let f = &cv.composed.formula;
    let width = f.var_width(&cv.composed.bridge).unwrap_or(64);
    ChainFinding {
        id: format!("CHAIN-{:04}", i + 1),
        label: spec.label.clone(),
        stage1,
        stage2,
        bridge: format!("{} -> {}", spec.output(), spec.bridge),
        verdict: VerdictLabel::from(&cv.verdict),
        witness: match &cv.verdict {
            Verdict::Sat(w) => Some(hex_map(&w.values, f)),
            _ => None,
        },
        bridge_value: cv.bridge_value.map(|v| hex(v, width)),
        solve_time_ms: millis(cv.solve_time, opts.reproducible),
    }
}

fn render_text(r: &Report) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} | data model {} | budget {}s | seed {}",
        r.tool, r.version, r.data_model, r.budget.seconds, r.seed
    );
    if !r.findings.is_empty() {
        let rows: Vec<[String; 7]> = r
            .findings
            .iter()
            .map(|f| {
                let kind = match f.form {
                    Some(form) => format!("{}/{}", f.kind, form),
                    None => f.kind.to_string(),
                };
                let witness = f
                    .witness
                    .as_ref()
                    .map(|w| w.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default();
                [
                    f.id.clone(),
                    format!("{}:{} {}", short_file(&f.site.file), f.site.line, f.function),
                    f.cwe.to_string(),
                    kind,
                    f.verdict.as_str().to_string(),
                    f.severity.as_str().to_string(),
                    witness,
                ]
            })
            .collect();
        let header = ["id", "target", "cwe", "kind", "verdict", "severity", "witness"].map(String::from);
        let mut widths = [0usize; 7];
        for row in std::iter::once(&header).chain(&rows) {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        out.push('\n');
        for row in std::iter::once(&header).chain(&rows) {
            let line: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
    }
    if !r.chains.is_empty() {
        let _ = writeln!(out, "\nchains");
        for c in &r.chains {
            let _ = writeln!(
                out,
                "{:<10} {:<18} {} -> {} via {}  {}{}",
                c.id,
                c.label,
                c.stage1.finding,
                c.stage2.finding,
                c.bridge,
                c.verdict.as_str(),
                c.bridge_value.as_ref().map(|v| format!(" bridge={v}")).unwrap_or_default()
            );
        }
    }
    if !r.guards.is_empty() {
        let _ = writeln!(out, "\nguards");
        for g in &r.guards {
            let _ = writeln!(
                out,
                "{} {} {} = {} ({}) from {} in {} solver calls",
                g.variable, g.width, g.direction, g.threshold_decimal, g.threshold, g.source_encoding, g.solver_calls
            );
            if let Some(b) = &g.bench {
                let _ = writeln!(
                    out,
                    "  safe {:>6}  unsafe {:>6}  fp {}  fn {}  mean {:.2} ns  median {:.2} ns  p99 {:.2} ns  {:.2} M checks/s",
                    b.safe_count,
                    b.unsafe_count,
                    b.false_positives,
                    b.false_negatives,
                    b.mean_ns,
                    b.median_ns,
                    b.p99_ns,
                    b.throughput / 1e6
                );
            }
        }
    }
    for e in &r.errors {
        let _ = writeln!(out, "error: {}", e.message);
    }
    let s = &r.summary;
    let _ = writeln!(
        out,
        "\n{} files, {} findings: {} sat, {} unsat, {} unknown; {} chains ({} sat); {} errors",
        s.files, s.findings, s.by_verdict.sat, s.by_verdict.unsat, s.by_verdict.unknown, r.chains.len(), s.chains.sat, s.errors
    );
    out
}

fn short_file(f: &str) -> &str {
    let parts: Vec<&str> = f.rsplitn(3, '/').collect();
    match parts.as_slice() {
        [_, _, rest] => &f[rest.len() + 1..],
        _ => f,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ScanOptions {
        ScanOptions {
            reproducible: true,
            ..ScanOptions::default()
        }
    }

    fn one(src: &str) -> ScanOutput {
        scan_sources(&[("t.c".into(), src.into())], &opts()).unwrap()
    }

    #[test]
    fn hex_padding() {
        assert_eq!(hex(0xfff9, 16), "0xfff9");
        assert_eq!(hex(0, 32), "0x00000000");
        assert_eq!(hex(1 << 32, 64), "0x0000000100000000");
        assert_eq!(hex(5, 1), "0x5");
    }

    #[test]
    fn sat_finding_shape() {
        let out = one("void *f(uint32_t n) { return malloc(n * 16); }");
        let r = &out.report;
        assert_eq!(r.findings.len(), 1);
        let f = &r.findings[0];
        assert_eq!(f.id, "WRAP-0001");
        assert_eq!(f.verdict, VerdictLabel::Sat);
        let w = f.witness.as_ref().unwrap();
        assert_eq!(w["n"].len(), 10);
        let json = r.to_json();
        assert!(json.contains("\"verdict\": \"sat\""));
        assert!(json.contains("\"witness\""));
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.summary.by_cwe["CWE-190"].sat, 1);
    }

    #[test]
    fn empty_report() {
        let out = scan_sources(&[], &opts()).unwrap();
        assert_eq!(out.report.exit_code(), 0);
        assert_eq!(out.report.summary, Summary::default());
        let v: serde_json::Value = serde_json::from_str(&out.report.to_json()).unwrap();
        assert_eq!(v["summary"]["by_verdict"]["sat"], 0);
        assert_eq!(v["findings"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn frontend_errors_become_entries() {
        let out = scan_sources(
            &[
                ("bad.c".into(), "int f( {".into()),
                ("ok.c".into(), "void *g(uint32_t n) { return malloc(n * 3); }".into()),
            ],
            &opts(),
        )
        .unwrap();
        assert_eq!(out.report.errors.len(), 1);
        assert_eq!(out.report.errors[0].file, "bad.c");
        assert_eq!(out.report.findings.len(), 1);
        assert_eq!(out.report.exit_code(), 2);
    }

    #[test]
    fn tiny_budget_gives_unknown() {
        let o = ScanOptions {
            budget: Budget {
                seconds: 0.000001,
                max_conflicts: None,
            },
            ..opts()
        };
        let out = scan_sources(&[("t.c".into(), "void *f(uint32_t n) { return malloc(n * 16); }".into())], &o).unwrap();
        assert_eq!(out.report.findings[0].verdict, VerdictLabel::Unknown);
        assert_eq!(out.report.exit_code(), 2);
    }

    #[test]
    fn key_order_is_stable() {
        let json = one("int f(void){return 0;}").report.to_json();
        let keys = [
            "\"tool\"",
            "\"version\"",
            "\"generated_at\"",
            "\"data_model\"",
            "\"budget\"",
            "\"seed\"",
            "\"findings\"",
            "\"chains\"",
            "\"guards\"",
            "\"errors\"",
            "\"summary\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"ILP32\""));
    }

    #[test]
    fn text_report_lists_findings() {
        let t = one("void *f(uint32_t n) { return malloc(n * 16); }").report.to_text();
        assert!(t.contains("WRAP-0001"));
        assert!(t.contains("CWE-190"));
        assert!(t.contains("1 sat"));
    }
}
