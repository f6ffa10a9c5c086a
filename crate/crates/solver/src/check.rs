//! Satisfiability checking of bitvector formulas with witness validation.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::blast::bit_blast;
use crate::bv::{eval_formula, Assignment, BvError, Formula};
use crate::sat::{Budget, SatResult, Solver, StopReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    ConflictBudgetExhausted,
    WallTimeExhausted,
}

impl std::fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UnknownReason::ConflictBudgetExhausted => "conflict budget exhausted",
            UnknownReason::WallTimeExhausted => "wall-time budget exhausted",
        })
    }
}

impl From<StopReason> for UnknownReason {
    fn from(r: StopReason) -> Self {
        match r {
            StopReason::ConflictBudget => UnknownReason::ConflictBudgetExhausted,
            StopReason::WallTime => UnknownReason::WallTimeExhausted,
        }
    }
}

/// A model for the free variables, plus the values it induces on defined
/// variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub values: Assignment,
    pub derived: Assignment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(Witness),
    Unsat,
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Sat(w) => Some(w),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown(_) => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Bv(#[from] BvError),
    /// The decoded model does not satisfy the formula. This indicates a
    /// bug in the bit-blaster or solver and is never reported as Sat.
    #[error("witness validation failed for {formula}: {witness:?}")]
    WitnessValidationFailure { formula: String, witness: Assignment },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    pub timeout: Option<Duration>,
    pub max_conflicts: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckStats {
    pub sat_vars: usize,
    pub clauses: usize,
    pub conflicts: u64,
    pub decisions: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub stats: CheckStats,
}

/// Decides `f`. A `Sat` verdict carries a witness that has been checked
/// against the formula's concrete semantics.
pub fn check(f: &Formula, opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let start = Instant::now();
    let deadline = opts.timeout.map(|t| start + t);
    let cnf = bit_blast(f)?;
    // The budget covers encoding too, so even a formula refuted by clause
    // loading alone reports Unknown once the deadline has passed.
    if deadline.is_some_and(|d| Instant::now() >= d) {
        return Ok(CheckOutcome {
            verdict: Verdict::Unknown(UnknownReason::WallTimeExhausted),
            stats: CheckStats {
                sat_vars: cnf.num_vars,
                clauses: cnf.clauses.len(),
                elapsed: start.elapsed(),
                ..CheckStats::default()
            },
        });
    }
    let mut solver = Solver::with_seed(cnf.num_vars, opts.seed);
    for c in &cnf.clauses {
        if !solver.add_clause(c) {
            break;
        }
    }
    let result = solver.solve(Budget {
        max_conflicts: opts.max_conflicts,
        deadline,
    });
    let s = solver.stats();
    let verdict = match result {
        SatResult::Unsat => Verdict::Unsat,
        SatResult::Unknown(r) => Verdict::Unknown(r.into()),
        SatResult::Sat(model) => {
            let values = cnf.decode(&model);
            if !eval_formula(f, &values)? {
                return Err(CheckError::WitnessValidationFailure {
                    formula: f.to_string(),
                    witness: values,
                });
            }
            let full = f.eval_definitions(&values)?;
            let derived = full
                .into_iter()
                .filter(|(k, _)| !values.contains_key(k))
                .collect();
            Verdict::Sat(Witness { values, derived })
        }
    };
    Ok(CheckOutcome {
        verdict,
        stats: CheckStats {
            sat_vars: cnf.num_vars,
            clauses: cnf.clauses.len(),
            conflicts: s.conflicts,
            decisions: s.decisions,
            elapsed: start.elapsed(),
        },
    })
}

/// `check` with no limits.
pub fn check_sat(f: &Formula) -> Result<Verdict, CheckError> {
    Ok(check(f, &CheckOptions::default())?.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::{BvTerm, Definition, Prop, Width};

    fn v32(n: &str) -> BvTerm {
        BvTerm::var(n, Width::W32)
    }
    fn c32(v: u64) -> BvTerm {
        BvTerm::constant(v, 32).unwrap()
    }

    #[test]
    fn sat_and_unsat_allocation_forms() {
        let n = v32("n");
        let product = BvTerm::mul(n.clone(), c32(16)).unwrap();
        let vulnerable = Formula::new(Prop::ult(product.clone(), n.clone()).unwrap()).unwrap();
        let v = check_sat(&vulnerable).unwrap();
        let w = v.witness().expect("sat");
        let nv = w.values["n"];
        assert!((nv * 16) & 0xffff_ffff < nv);

        let bounded = vulnerable.and(Prop::ule(n, c32(0x0fff_ffff)).unwrap()).unwrap();
        assert_eq!(check_sat(&bounded).unwrap(), Verdict::Unsat);
    }

    #[test]
    fn derived_values_reported() {
        let f = Formula::with_definitions(
            vec![Definition {
                name: "diff".into(),
                term: BvTerm::sub(v32("a"), v32("b")).unwrap(),
            }],
            Prop::eq(BvTerm::defined("diff", 32), c32(0x8000_0000)).unwrap(),
        )
        .unwrap();
        let v = check_sat(&f).unwrap();
        let w = v.witness().unwrap();
        assert_eq!(w.derived["diff"], 0x8000_0000);
        assert!(!w.derived.contains_key("a"));
    }

    #[test]
    fn zero_timeout_is_unknown() {
        let f = Formula::new(Prop::eq(v32("x"), c32(1)).unwrap()).unwrap();
        let out = check(
            &f,
            &CheckOptions {
                timeout: Some(Duration::ZERO),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.verdict, Verdict::Unknown(UnknownReason::WallTimeExhausted));
    }

    #[test]
    fn tautology_and_contradiction() {
        let x = v32("x");
        let taut = Formula::new(Prop::ule(x.clone(), c32(0xffff_ffff)).unwrap()).unwrap();
        assert!(check_sat(&taut).unwrap().is_sat());
        let contra = Formula::new(Prop::ult(x, c32(0)).unwrap()).unwrap();
        assert!(check_sat(&contra).unwrap().is_unsat());
    }
}
