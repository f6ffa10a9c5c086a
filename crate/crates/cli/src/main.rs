use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use wrapcheck_core::corpus::run_regression;
use wrapcheck_core::frontend::DataModel;
use wrapcheck_core::guard::{derive_guard, run_bench, Direction};
use wrapcheck_core::kv::parse_u64;
use wrapcheck_core::policy::{evaluate, log_line, parse_actions, parse_policy, PolicyVerdict};
use wrapcheck_core::report::{scan, timestamp, Budget, GuardRecord, Report, ScanOptions};
use wrapcheck_solver::{substitute, Assignment};

/// Bit-precise checker for integer wraparound in C sources.
///
/// Exit status: 0 when no finding is sat, 1 when at least one finding is
/// sat, 2 on errors or unknown verdicts.
#[derive(Parser)]
#[command(name = "wrapcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan C files or directories and report every candidate with its verdict
    Scan(ScanArgs),
    /// Scan and also compose overflow-to-read chains within each file
    Chain(ScanArgs),
    /// Derive or benchmark a runtime guard for one encoding
    #[command(subcommand)]
    Guard(GuardCommand),
    /// Evaluate agent actions against the six-constraint policy
    Policy(PolicyArgs),
    /// Write one .smt2 file per finding without printing a report
    DumpSmt2 {
        #[command(flatten)]
        common: Common,
        /// Output directory
        #[arg(long, short = 'd')]
        dir: PathBuf,
        paths: Vec<PathBuf>,
    },
    /// Check every corpus fixture against its manifest
    Regress {
        #[command(flatten)]
        common: Common,
        /// Corpus root holding one directory per fixture
        #[arg(default_value = "corpus")]
        corpus: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Clone)]
struct Common {
    /// Target data model
    #[arg(long, default_value = "ilp32", value_parser = parse_model)]
    data_model: DataModel,
    /// Wall-clock budget per solver query
    #[arg(long, default_value_t = 60.0)]
    budget_seconds: f64,
    /// Conflict budget per solver query
    #[arg(long)]
    max_conflicts: Option<u64>,
    /// Solver threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Seed for solver decisions and benchmark sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed timestamp and zeroed timings, for byte-identical output
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Also write one .smt2 file per finding into this directory
    #[arg(long)]
    dump_smt2: Option<PathBuf>,
    /// Files or directories (searched for .c files)
    paths: Vec<PathBuf>,
}

#[derive(Args)]
struct GuardArgs {
    #[command(flatten)]
    common: Common,
    /// Encoding id, finding id (WRAP-0001) or a unique part of an encoding id
    #[arg(long)]
    encoding: String,
    /// Input variable to bound
    #[arg(long)]
    variable: String,
    /// safe-min (values at or above are safe) or safe-max (at or below)
    #[arg(long, value_parser = parse_direction)]
    direction: Direction,
    /// Fix another input before deriving, e.g. tlv_len=5
    #[arg(long = "bind", value_parser = parse_binding)]
    bindings: Vec<(String, u64)>,
    paths: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum GuardCommand {
    /// Find the tightest safe threshold
    Derive(GuardArgs),
    /// Derive, then time the branch-free check on random inputs
    Bench {
        #[command(flatten)]
        guard: GuardArgs,
        #[arg(long, default_value_t = 2000)]
        safe: usize,
        #[arg(long, default_value_t = 2000)]
        r#unsafe: usize,
    },
}

#[derive(Args)]
struct PolicyArgs {
    /// Action records, one per line
    actions: PathBuf,
    /// Policy file with authorized_scope and approved_manifest lists
    #[arg(long)]
    policy: PathBuf,
    /// Append one decision line per action to this log
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn parse_model(s: &str) -> Result<DataModel, String> {
    s.parse::<DataModel>().map_err(|e| e.to_string())
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse()
}

fn parse_binding(s: &str) -> Result<(String, u64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v = parse_u64(v).ok_or_else(|| format!("`{v}` is not a number"))?;
    Ok((k.to_string(), v))
}

impl Common {
    fn options(&self) -> ScanOptions {
        ScanOptions {
            model: self.data_model,
            budget: Budget {
                seconds: self.budget_seconds,
                max_conflicts: self.max_conflicts,
            },
            jobs: self.jobs,
            seed: self.seed,
            dump_smt2: None,
            reproducible: self.reproducible,
            chains: false,
        }
    }

    fn emit(&self, report: &Report) -> Result<()> {
        let text = match self.format {
            Format::Json => report.to_json(),
            Format::Text => report.to_text(),
        };
        write_out(self.out.as_deref(), &text)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run_scan(args: &ScanArgs, chains: bool) -> Result<i32> {
    let opts = ScanOptions {
        dump_smt2: args.dump_smt2.clone(),
        chains,
        ..args.common.options()
    };
    let out = scan(&args.paths, &opts)?;
    args.common.emit(&out.report)?;
    Ok(out.report.exit_code())
}

fn run_guard(args: &GuardArgs, bench: Option<(usize, usize)>) -> Result<i32> {
    let opts = args.common.options();
    let out = scan(&args.paths, &opts)?;
    let enc = out.find_encoding(&args.encoding).map_err(anyhow::Error::msg)?.clone();
    let bindings: Assignment = args.bindings.iter().cloned().collect();
    let formula = substitute(&enc.formula, &bindings)?;
    let spec = derive_guard(&formula, &enc.id, &args.variable, args.direction, &opts.check_options())?;
    let bench = match bench {
        Some((safe, unsafe_)) => Some(run_bench(&spec, safe, unsafe_, opts.seed)?),
        None => None,
    };
    let mut report = Report::empty(&opts);
    report.findings = out.report.findings.into_iter().filter(|f| f.encoding == enc.id).collect();
    report.errors = out.report.errors;
    report.guards.push(GuardRecord::new(&spec, &bindings, bench, opts.reproducible));
    report.summarize(out.report.summary.files);
    args.common.emit(&report)?;
    Ok(if report.errors.is_empty() { 0 } else { 2 })
}

fn run_policy(args: &PolicyArgs) -> Result<i32> {
    let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let actions = parse_actions(&read(&args.actions)?)?;
    let policy = parse_policy(&read(&args.policy)?)?;
    let now = timestamp(false);
    let decisions: Vec<_> = actions.iter().map(|(id, a)| (id, evaluate(a, &policy))).collect();
    let lines: Vec<String> = decisions.iter().map(|(id, d)| log_line(&now, id, d)).collect();
    if let Some(log) = &args.log {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log)
            .with_context(|| format!("opening {}", log.display()))?;
        for l in &lines {
            writeln!(f, "{l}")?;
        }
    }
    let text = match args.format {
        Format::Text => lines.iter().map(|l| format!("{l}\n")).collect(),
        Format::Json => {
            let v: BTreeMap<&String, _> = decisions.iter().map(|(id, d)| (*id, d)).collect();
            serde_json::to_string_pretty(&v)? + "\n"
        }
    };
    write_out(None, &text)?;
    Ok(i32::from(decisions.iter().any(|(_, d)| d.verdict == PolicyVerdict::Unsafe)))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Scan(a) => run_scan(&a, false),
        Command::Chain(a) => run_scan(&a, true),
        Command::Guard(GuardCommand::Derive(a)) => run_guard(&a, None),
        Command::Guard(GuardCommand::Bench { guard, safe, r#unsafe }) => run_guard(&guard, Some((safe, r#unsafe))),
        Command::Policy(a) => run_policy(&a),
        Command::DumpSmt2 { common, dir, paths } => {
            let opts = ScanOptions {
                dump_smt2: Some(dir.clone()),
                ..common.options()
            };
            let out = scan(&paths, &opts)?;
            eprintln!("wrote {} files to {}", out.report.findings.len(), dir.display());
            Ok(if out.report.errors.is_empty() { 0 } else { 2 })
        }
        Command::Regress { common, corpus } => {
            let report = run_regression(&corpus, &common.options())?;
            write_out(common.out.as_deref(), &report.to_string())?;
            if report.fixtures.is_empty() {
                bail!("no fixtures under {}", corpus.display());
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("wrapcheck: {e:#}");
            ExitCode::from(2)
        }
    }
}
