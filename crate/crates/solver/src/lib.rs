//! Bitvector reasoning for arithmetic-vulnerability checks: a small
//! fixed-width IR with exact modular semantics, a Tseitin bit-blaster, a
//! CDCL SAT solver and an SMT-LIB printer.

pub mod blast;
pub mod bv;
pub mod check;
pub mod oracle;
pub mod sat;
pub mod smtlib;

pub use blast::{bit_blast, Cnf};
pub use bv::{
    eval_formula, eval_term, mask, substitute, to_signed, Assignment, BinOp, BvAtom, BvError,
    BvTerm, Definition, Formula, Prop, Relation, Width,
};
pub use check::{
    check, check_sat, CheckError, CheckOptions, CheckOutcome, CheckStats, UnknownReason, Verdict,
    Witness,
};
