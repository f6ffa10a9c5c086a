//! Offline derivation of single-variable safe bounds and the constant-time
//! runtime check that enforces them.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use wrapcheck_solver::{check, mask, BvError, BvTerm, CheckError, CheckOptions, Formula, Prop, UnknownReason, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    /// Values at or above the threshold are safe.
    SafeMin,
    /// Values at or below the threshold are safe.
    SafeMax,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::SafeMin => "safe_min",
            Direction::SafeMax => "safe_max",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "safe_min" | "safemin" | "min" => Ok(Direction::SafeMin),
            "safe_max" | "safemax" | "max" => Ok(Direction::SafeMax),
            _ => Err(format!("unknown direction `{s}` (expected safe-min or safe-max)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardSpec {
    pub variable: String,
    pub direction: Direction,
    pub threshold: u64,
    pub width: u32,
    pub source_encoding: String,
    pub derivation_time: Duration,
    pub solver_calls: u32,
}

impl GuardSpec {
    /// Inclusive safe interval `[lo, hi]`.
    pub fn safe_interval(&self) -> (u64, u64) {
        match self.direction {
            Direction::SafeMin => (self.threshold, mask(self.width)),
            Direction::SafeMax => (0, self.threshold),
        }
    }

    /// Inclusive unsafe interval, if the unsafe side is nonempty.
    pub fn unsafe_interval(&self) -> Option<(u64, u64)> {
        match self.direction {
            Direction::SafeMin => self.threshold.checked_sub(1).map(|hi| (0, hi)),
            Direction::SafeMax => (self.threshold < mask(self.width)).then(|| (self.threshold + 1, mask(self.width))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GuardDecision {
    Allow,
    Block,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuardError {
    #[error("`{0}` is not a free variable of the encoding")]
    UnknownVariable(String),
    #[error("no safe region: the predicate is satisfiable even at the extreme value")]
    NoSafeRegion,
    #[error("the predicate is unsatisfiable over the whole domain")]
    WholeDomainSafe,
    #[error("solver gave up during derivation: {0}")]
    Inconclusive(UnknownReason),
    #[error(transparent)]
    Bv(#[from] BvError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

struct Prober<'a> {
    f: &'a Formula,
    var: BvTerm,
    width: u32,
    opts: &'a CheckOptions,
    calls: u32,
}

impl Prober<'_> {
    /// True if `f` with the extra constraint is unsatisfiable.
    fn unsat_with(&mut self, extra: Option<Prop>) -> Result<bool, GuardError> {
        self.calls += 1;
        let f = match extra {
            Some(p) => self.f.and(p)?,
            None => self.f.clone(),
        };
        match check(&f, self.opts)?.verdict {
            Verdict::Unsat => Ok(true),
            Verdict::Sat(_) => Ok(false),
            Verdict::Unknown(r) => Err(GuardError::Inconclusive(r)),
        }
    }

    fn safe_side(&mut self, dir: Direction, t: u64) -> Result<bool, GuardError> {
        let c = BvTerm::constant(t, self.width)?;
        let p = match dir {
            Direction::SafeMax => Prop::ule(self.var.clone(), c)?,
            Direction::SafeMin => Prop::uge(self.var.clone(), c)?,
        };
        self.unsat_with(Some(p))
    }
}

/// Finds the tightest threshold on `variable` such that the formula is
/// unsatisfiable on the whole safe side. Each probe asks about the entire
/// side at once, so the result is sound without assuming monotonicity;
/// the search invariant keeps one side of the final threshold proven safe
/// and the adjacent value proven reachable. Uses at most `width + 2`
/// solver calls.
pub fn derive_guard(
    formula: &Formula,
    source_encoding: &str,
    variable: &str,
    direction: Direction,
    opts: &CheckOptions,
) -> Result<GuardSpec, GuardError> {
    let start = Instant::now();
    let width = formula
        .free_vars()
        .get(variable)
        .ok_or_else(|| GuardError::UnknownVariable(variable.to_string()))?
        .bits();
    let mut p = Prober {
        f: formula,
        var: BvTerm::var(variable, wrapcheck_solver::Width::new(width)?),
        width,
        opts,
        calls: 0,
    };
    if p.unsat_with(None)? {
        return Err(GuardError::WholeDomainSafe);
    }
    let max = mask(width);
    let threshold = match direction {
        Direction::SafeMax => {
            if !p.safe_side(direction, 0)? {
                return Err(GuardError::NoSafeRegion);
            }
            // lo: safe side proven unsat; hi: satisfiable.
            let (mut lo, mut hi) = (0u64, max);
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if p.safe_side(direction, mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
        Direction::SafeMin => {
            if !p.safe_side(direction, max)? {
                return Err(GuardError::NoSafeRegion);
            }
            let (mut lo, mut hi) = (0u64, max);
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if p.safe_side(direction, mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };
    Ok(GuardSpec {
        variable: variable.to_string(),
        direction,
        threshold,
        width,
        source_encoding: source_encoding.to_string(),
        derivation_time: start.elapsed(),
        solver_calls: p.calls,
    })
}

/// The runtime check: one subtraction and one comparison, no branches on
/// the direction.
#[inline]
pub fn check_guard(spec: &GuardSpec, value: u64) -> GuardDecision {
    let (lo, hi) = spec.safe_interval();
    allow_in(lo, hi - lo, value)
}

#[inline(always)]
fn allow_in(lo: u64, span: u64, value: u64) -> GuardDecision {
    const TABLE: [GuardDecision; 2] = [GuardDecision::Block, GuardDecision::Allow];
    TABLE[usize::from(value.wrapping_sub(lo) <= span)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub safe_count: usize,
    pub unsafe_count: usize,
    /// Safe inputs that were blocked.
    pub false_positives: usize,
    /// Unsafe inputs that were allowed.
    pub false_negatives: usize,
    pub mean_ns: f64,
    pub median_ns: f64,
    pub p99_ns: f64,
    /// Checks per second.
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("sample counts must be positive")]
    EmptySample,
    #[error("the {0} side of the threshold is empty")]
    Degenerate(&'static str),
}

/// Calls per timed batch; latency is the batch time divided by this.
const BATCH: usize = 256;
const SAMPLES: usize = 2000;

/// Draws inputs uniformly from each side of the threshold with a seeded
/// generator, verifies every decision, and times the check.
pub fn run_bench(spec: &GuardSpec, n_safe: usize, n_unsafe: usize, seed: u64) -> Result<BenchReport, BenchError> {
    if n_safe == 0 || n_unsafe == 0 {
        return Err(BenchError::EmptySample);
    }
    let (slo, shi) = spec.safe_interval();
    let (ulo, uhi) = spec.unsafe_interval().ok_or(BenchError::Degenerate("unsafe"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let safe: Vec<u64> = (0..n_safe).map(|_| rng.gen_range(slo..=shi)).collect();
    let unsafe_: Vec<u64> = (0..n_unsafe).map(|_| rng.gen_range(ulo..=uhi)).collect();

    let false_positives = safe
        .iter()
        .filter(|&&v| check_guard(spec, v) == GuardDecision::Block)
        .count();
    let false_negatives = unsafe_
        .iter()
        .filter(|&&v| check_guard(spec, v) == GuardDecision::Allow)
        .count();

    let inputs: Vec<u64> = safe.iter().chain(&unsafe_).copied().collect();
    let (lo, span) = (spec.safe_interval().0, spec.safe_interval().1 - spec.safe_interval().0);
    // Warm up caches and the branch predictor before sampling.
    for &v in inputs.iter().cycle().take(inputs.len() * 4) {
        black_box(allow_in(black_box(lo), black_box(span), black_box(v)));
    }
    let mut per_call = Vec::with_capacity(SAMPLES);
    let mut total = Duration::ZERO;
    let mut pos = 0usize;
    for _ in 0..SAMPLES {
        let t = Instant::now();
        for _ in 0..BATCH {
            let v = inputs[pos];
            pos += 1;
            if pos == inputs.len() {
                pos = 0;
            }
            black_box(allow_in(black_box(lo), black_box(span), black_box(v)));
        }
        let el = t.elapsed();
        total += el;
        per_call.push(el.as_nanos() as f64 / BATCH as f64);
    }
    per_call.sort_by(f64::total_cmp);
    let mean_ns = per_call.iter().sum::<f64>() / per_call.len() as f64;
    let median_ns = per_call[per_call.len() / 2];
    let p99_ns = per_call[(per_call.len() * 99 / 100).min(per_call.len() - 1)];
    let calls = (SAMPLES * BATCH) as f64;
    let throughput = calls / total.as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(BenchReport {
        safe_count: n_safe,
        unsafe_count: n_unsafe,
        false_positives,
        false_negatives,
        mean_ns,
        median_ns,
        p99_ns,
        throughput,
    })
}
