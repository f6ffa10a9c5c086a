//! Completeness of the solver on random 8-bit formulas over at most three
//! variables, against exhaustive enumeration with an evaluator written
//! directly on native `u8` arithmetic.

use wrapcheck_solver::oracle::exhaustive_agreement;

const FORMULAS: usize = 10_000;

#[test]
fn solver_matches_exhaustive_enumeration_at_8_bits() {
    let r = exhaustive_agreement(FORMULAS, 0x5eed_0008);
    assert!(r.mismatches.is_empty(), "{:#?}", r.mismatches);
    assert_eq!(r.sat + r.unsat, FORMULAS);
    // Both outcomes must be well represented for the check to mean anything.
    assert!(r.sat > FORMULAS / 10 && r.unsat > FORMULAS / 20, "sat={} unsat={}", r.sat, r.unsat);
    println!("8-bit completeness: {FORMULAS} formulas, {} sat, {} unsat", r.sat, r.unsat);
}
