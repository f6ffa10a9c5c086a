//! Reference checks that do not go through the bit-blaster: exhaustive
//! enumeration of random 8-bit formulas with native `u8` arithmetic, and
//! ring laws checked both by native evaluation and by the solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bv::{eval_term, Assignment, BinOp, BvTerm, Formula, Prop, Width};
use crate::check::{check_sat, Verdict};

const NAMES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone)]
enum E {
    Const(u8),
    Var(usize),
    Bin(BinOp, Box<E>, Box<E>),
    Not(Box<E>),
    /// High byte of the 16-bit product of the zero-extended operands.
    MulHi(Box<E>, Box<E>),
}

#[derive(Debug, Clone, Copy)]
enum Rel {
    Eq,
    Ne,
    Ult,
    Ule,
    Ugt,
    Uge,
}

#[derive(Debug, Clone)]
enum P {
    Atom(Rel, E, E),
    /// Compares `zext(a)` against `sext(b)` at 16 bits.
    Wide(Rel, E, E),
    And(Vec<P>),
    Or(Vec<P>),
    Not(Box<P>),
}

const OPS: [BinOp; 8] = [
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Shl,
    BinOp::LShr,
    BinOp::AShr,
    BinOp::Or,
    BinOp::And,
];
const RELS: [Rel; 6] = [Rel::Eq, Rel::Ne, Rel::Ult, Rel::Ule, Rel::Ugt, Rel::Uge];

fn gen_e(rng: &mut ChaCha8Rng, nvars: usize, depth: u32) -> E {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        if rng.gen_bool(0.7) {
            E::Var(rng.gen_range(0..nvars))
        } else {
            let interesting = [0u8, 1, 2, 7, 8, 0x7f, 0x80, 0xff];
            E::Const(if rng.gen() {
                interesting[rng.gen_range(0..interesting.len())]
            } else {
                rng.gen()
            })
        }
    } else {
        match rng.gen_range(0..10) {
            0 => E::Not(Box::new(gen_e(rng, nvars, depth - 1))),
            1 => E::MulHi(
                Box::new(gen_e(rng, nvars, depth - 1)),
                Box::new(gen_e(rng, nvars, depth - 1)),
            ),
            _ => E::Bin(
                OPS[rng.gen_range(0..OPS.len())],
                Box::new(gen_e(rng, nvars, depth - 1)),
                Box::new(gen_e(rng, nvars, depth - 1)),
            ),
        }
    }
}

fn gen_p(rng: &mut ChaCha8Rng, nvars: usize, depth: u32) -> P {
    if depth == 0 || rng.gen_bool(0.5) {
        let rel = RELS[rng.gen_range(0..RELS.len())];
        let a = gen_e(rng, nvars, 2);
        let b = gen_e(rng, nvars, 2);
        if rng.gen_bool(0.15) {
            P::Wide(rel, a, b)
        } else {
            P::Atom(rel, a, b)
        }
    } else {
        match rng.gen_range(0..3) {
            0 => P::Not(Box::new(gen_p(rng, nvars, depth - 1))),
            1 => P::And((0..rng.gen_range(2..=3)).map(|_| gen_p(rng, nvars, depth - 1)).collect()),
            _ => P::Or((0..rng.gen_range(2..=3)).map(|_| gen_p(rng, nvars, depth - 1)).collect()),
        }
    }
}

// Native semantics.

fn op8(op: BinOp, a: u8, b: u8) -> u8 {
    match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Shl => a.checked_shl(b as u32).unwrap_or(0),
        BinOp::LShr => a.checked_shr(b as u32).unwrap_or(0),
        BinOp::AShr => ((a as i8) >> (b.min(7))) as u8,
        BinOp::Or => a | b,
        BinOp::And => a & b,
    }
}

fn rel<T: Ord>(r: Rel, a: T, b: T) -> bool {
    match r {
        Rel::Eq => a == b,
        Rel::Ne => a != b,
        Rel::Ult => a < b,
        Rel::Ule => a <= b,
        Rel::Ugt => a > b,
        Rel::Uge => a >= b,
    }
}

/// Evaluates over a block of lanes: lane `i` has `x = i & 0xff`,
/// `y = i >> 8`, and `z = outer`.
fn lanes_e(e: &E, n: usize, outer: u8) -> Vec<u8> {
    match e {
        E::Const(c) => vec![*c; n],
        E::Var(0) => (0..n).map(|i| i as u8).collect(),
        E::Var(1) => (0..n).map(|i| (i >> 8) as u8).collect(),
        E::Var(_) => vec![outer; n],
        E::Not(a) => lanes_e(a, n, outer).into_iter().map(|v| !v).collect(),
        E::MulHi(a, b) => {
            let (a, b) = (lanes_e(a, n, outer), lanes_e(b, n, outer));
            a.iter()
                .zip(&b)
                .map(|(&x, &y)| ((x as u16 * y as u16) >> 8) as u8)
                .collect()
        }
        E::Bin(op, a, b) => {
            let (a, b) = (lanes_e(a, n, outer), lanes_e(b, n, outer));
            a.iter().zip(&b).map(|(&x, &y)| op8(*op, x, y)).collect()
        }
    }
}

fn lanes_p(p: &P, n: usize, outer: u8) -> Vec<bool> {
    match p {
        P::Atom(r, a, b) => {
            let (a, b) = (lanes_e(a, n, outer), lanes_e(b, n, outer));
            a.iter().zip(&b).map(|(&x, &y)| rel(*r, x, y)).collect()
        }
        P::Wide(r, a, b) => {
            let (a, b) = (lanes_e(a, n, outer), lanes_e(b, n, outer));
            a.iter()
                .zip(&b)
                .map(|(&x, &y)| rel(*r, x as u16, (y as i8) as i16 as u16))
                .collect()
        }
        P::Not(q) => lanes_p(q, n, outer).into_iter().map(|v| !v).collect(),
        P::And(qs) => qs.iter().fold(vec![true; n], |acc, q| {
            acc.iter().zip(lanes_p(q, n, outer)).map(|(&a, b)| a && b).collect()
        }),
        P::Or(qs) => qs.iter().fold(vec![false; n], |acc, q| {
            acc.iter().zip(lanes_p(q, n, outer)).map(|(&a, b)| a || b).collect()
        }),
    }
}

fn brute_sat(p: &P, nvars: usize) -> bool {
    let n = if nvars == 1 { 256 } else { 65536 };
    let outers = if nvars == 3 { 256 } else { 1 };
    (0..outers).any(|z| lanes_p(p, n, z as u8).into_iter().any(|b| b))
}

fn point_e(e: &E, v: &[u8; 3]) -> u8 {
    match e {
        E::Const(c) => *c,
        E::Var(i) => v[*i],
        E::Not(a) => !point_e(a, v),
        E::MulHi(a, b) => ((point_e(a, v) as u16 * point_e(b, v) as u16) >> 8) as u8,
        E::Bin(op, a, b) => op8(*op, point_e(a, v), point_e(b, v)),
    }
}

fn point_p(p: &P, v: &[u8; 3]) -> bool {
    match p {
        P::Atom(r, a, b) => rel(*r, point_e(a, v), point_e(b, v)),
        P::Wide(r, a, b) => rel(*r, point_e(a, v) as u16, (point_e(b, v) as i8) as i16 as u16),
        P::Not(q) => !point_p(q, v),
        P::And(qs) => qs.iter().all(|q| point_p(q, v)),
        P::Or(qs) => qs.iter().any(|q| point_p(q, v)),
    }
}

// Translation into the IR under test.

fn to_term(e: &E) -> BvTerm {
    match e {
        E::Const(c) => BvTerm::constant(*c as u64, 8).expect("8-bit construction"),
        E::Var(i) => BvTerm::var(NAMES[*i], Width::W8),
        E::Not(a) => BvTerm::not(to_term(a)),
        E::MulHi(a, b) => {
            let wide = BvTerm::mul(
                BvTerm::zero_ext(8, to_term(a)).expect("8-bit construction"),
                BvTerm::zero_ext(8, to_term(b)).expect("8-bit construction"),
            )
            .expect("8-bit construction");
            BvTerm::extract(15, 8, wide).expect("8-bit construction")
        }
        E::Bin(op, a, b) => BvTerm::binary(*op, to_term(a), to_term(b)).expect("8-bit construction"),
    }
}

fn atom(r: Rel, a: BvTerm, b: BvTerm) -> Prop {
    match r {
        Rel::Eq => Prop::eq(a, b),
        Rel::Ne => Prop::ne(a, b),
        Rel::Ult => Prop::ult(a, b),
        Rel::Ule => Prop::ule(a, b),
        Rel::Ugt => Prop::ugt(a, b),
        Rel::Uge => Prop::uge(a, b),
    }
    .expect("8-bit construction")
}

fn to_prop(p: &P) -> Prop {
    match p {
        P::Atom(r, a, b) => atom(*r, to_term(a), to_term(b)),
        P::Wide(r, a, b) => atom(
            *r,
            BvTerm::zero_ext(8, to_term(a)).expect("8-bit construction"),
            BvTerm::sign_ext(8, to_term(b)).expect("8-bit construction"),
        ),
        P::Not(q) => Prop::not(to_prop(q)),
        P::And(qs) => Prop::And(qs.iter().map(to_prop).collect()),
        P::Or(qs) => Prop::Or(qs.iter().map(to_prop).collect()),
    }
}

/// Declares every variable below `nvars` so that the formula's free
/// variables match the enumerated domain even when the generator skipped one.
fn pin_domain(p: Prop, nvars: usize) -> Prop {
    let mut parts = vec![p];
    for name in NAMES.iter().take(nvars) {
        let v = BvTerm::var(*name, Width::W8);
        parts.push(Prop::ule(v, BvTerm::constant(0xff, 8).expect("8-bit construction")).expect("8-bit construction"));
    }
    Prop::And(parts)
}

/// Outcome of [`exhaustive_agreement`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgreementReport {
    pub formulas: usize,
    pub sat: usize,
    pub unsat: usize,
    /// One line per disagreement; empty when the solver matched everywhere.
    pub mismatches: Vec<String>,
}

/// Generates `formulas` random formulas over at most three 8-bit
/// variables and compares the solver with exhaustive enumeration. Every
/// Sat witness is also replayed natively.
pub fn exhaustive_agreement(formulas: usize, seed: u64) -> AgreementReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = AgreementReport {
        formulas,
        ..AgreementReport::default()
    };
    for i in 0..formulas {
        let nvars = match rng.gen_range(0..100) {
            0..=44 => 1,
            45..=89 => 2,
            _ => 3,
        };
        let p = gen_p(&mut rng, nvars, 2);
        let f = match Formula::new(pin_domain(to_prop(&p), nvars)) {
            Ok(f) => f,
            Err(e) => {
                r.mismatches.push(format!("#{i}: construction failed: {e}"));
                continue;
            }
        };
        let expected = brute_sat(&p, nvars);
        match check_sat(&f) {
            Ok(Verdict::Sat(w)) => {
                r.sat += 1;
                if !expected {
                    r.mismatches.push(format!("#{i}: solver sat, enumeration found none: {p:?}"));
                }
                let mut v = [0u8; 3];
                for (k, name) in NAMES.iter().enumerate().take(nvars) {
                    v[k] = w.values.get(*name).copied().unwrap_or(0) as u8;
                }
                if !point_p(&p, &v) {
                    r.mismatches.push(format!("#{i}: witness {v:?} fails natively: {p:?}"));
                }
            }
            Ok(Verdict::Unsat) => {
                r.unsat += 1;
                if expected {
                    r.mismatches.push(format!("#{i}: solver unsat, enumeration found a model: {p:?}"));
                }
            }
            Ok(Verdict::Unknown(reason)) => r.mismatches.push(format!("#{i}: unknown ({reason}) without a budget")),
            Err(e) => r.mismatches.push(format!("#{i}: {e}")),
        }
    }
    r
}

/// Outcome of [`ring_laws`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RingReport {
    pub evaluations: usize,
    pub proofs: usize,
    pub failures: Vec<String>,
}

fn bin(op: BinOp, a: &BvTerm, b: &BvTerm) -> BvTerm {
    BvTerm::binary(op, a.clone(), b.clone()).expect("same-width operands")
}

/// Commutativity, associativity, distributivity, identities and inverses.
fn laws(x: &BvTerm, y: &BvTerm, z: &BvTerm, w: Width) -> Vec<(&'static str, BvTerm, BvTerm)> {
    let zero = BvTerm::constant(0, w.bits()).expect("zero fits");
    let one = BvTerm::constant(1, w.bits()).expect("one fits");
    vec![
        ("add commutes", bin(BinOp::Add, x, y), bin(BinOp::Add, y, x)),
        ("mul commutes", bin(BinOp::Mul, x, y), bin(BinOp::Mul, y, x)),
        (
            "add associates",
            bin(BinOp::Add, &bin(BinOp::Add, x, y), z),
            bin(BinOp::Add, x, &bin(BinOp::Add, y, z)),
        ),
        (
            "mul associates",
            bin(BinOp::Mul, &bin(BinOp::Mul, x, y), z),
            bin(BinOp::Mul, x, &bin(BinOp::Mul, y, z)),
        ),
        (
            "mul distributes",
            bin(BinOp::Mul, x, &bin(BinOp::Add, y, z)),
            bin(BinOp::Add, &bin(BinOp::Mul, x, y), &bin(BinOp::Mul, x, z)),
        ),
        ("add identity", bin(BinOp::Add, x, &zero), x.clone()),
        ("mul identity", bin(BinOp::Mul, x, &one), x.clone()),
        ("additive inverse", bin(BinOp::Add, x, &BvTerm::neg(x.clone())), zero.clone()),
        ("sub is add neg", bin(BinOp::Sub, x, y), bin(BinOp::Add, x, &BvTerm::neg(y.clone()))),
    ]
}

/// Native reference for a law instance at width `bits`.
fn native(name: &str, a: u64, b: u64, c: u64, bits: u32) -> (u64, u64) {
    let m = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let (a, b, c) = (a & m, b & m, c & m);
    let r = match name {
        "add commutes" => (a.wrapping_add(b), b.wrapping_add(a)),
        "mul commutes" => (a.wrapping_mul(b), b.wrapping_mul(a)),
        "add associates" => (a.wrapping_add(b).wrapping_add(c), a.wrapping_add(b.wrapping_add(c))),
        "mul associates" => (a.wrapping_mul(b).wrapping_mul(c), a.wrapping_mul(b.wrapping_mul(c))),
        "mul distributes" => (a.wrapping_mul(b.wrapping_add(c)), a.wrapping_mul(b).wrapping_add(a.wrapping_mul(c))),
        "add identity" | "mul identity" => (a, a),
        "additive inverse" => (a.wrapping_add(a.wrapping_neg()), 0),
        _ => (a.wrapping_sub(b), a.wrapping_add(b.wrapping_neg())),
    };
    (r.0 & m, r.1 & m)
}

/// Evaluates every law on `samples` random triples at each width, checking
/// the IR evaluator against native wrapping arithmetic, then asks the
/// solver to refute the negation of each law at 8 bits.
pub fn ring_laws(samples: usize, seed: u64) -> RingReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = RingReport::default();
    for w in [Width::W8, Width::W16, Width::W32, Width::W64] {
        let (x, y, z) = (BvTerm::var("a", w), BvTerm::var("b", w), BvTerm::var("c", w));
        let laws = laws(&x, &y, &z, w);
        for _ in 0..samples {
            let (a, b, c): (u64, u64, u64) = (rng.gen(), rng.gen(), rng.gen());
            let env: Assignment = [("a", a), ("b", b), ("c", c)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v & w.mask()))
                .collect();
            for (name, lhs, rhs) in &laws {
                r.evaluations += 1;
                let got = (eval_term(lhs, &env), eval_term(rhs, &env));
                let want = native(name, a, b, c, w.bits());
                match got {
                    (Ok(l), Ok(rv)) if l == rv && (l, rv) == want => {}
                    other => r.failures.push(format!("{name} at {w}: {other:?} vs native {want:?}")),
                }
            }
        }
        if w == Width::W8 {
            // Miters with three multipliers of free operands are slow for
            // plain CDCL; distributivity is proved in its x*(y+1) instance.
            let one = BvTerm::constant(1, 8).expect("one fits");
            let mut proved: Vec<_> = laws
                .iter()
                .filter(|(name, _, _)| !matches!(*name, "mul associates" | "mul distributes"))
                .cloned()
                .collect();
            proved.push((
                "mul distributes over +1",
                bin(BinOp::Mul, &x, &bin(BinOp::Add, &y, &one)),
                bin(BinOp::Add, &bin(BinOp::Mul, &x, &y), &x),
            ));
            for (name, lhs, rhs) in &proved {
                r.proofs += 1;
                let verdict = Prop::ne(lhs.clone(), rhs.clone())
                    .and_then(Formula::new)
                    .map_err(|e| e.to_string())
                    .and_then(|f| check_sat(&f).map_err(|e| e.to_string()));
                if verdict != Ok(Verdict::Unsat) {
                    r.failures.push(format!("{name} at {w}: negation gave {verdict:?}"));
                }
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_agreement_run() {
        let r = exhaustive_agreement(200, 7);
        assert!(r.mismatches.is_empty(), "{:?}", r.mismatches);
        assert_eq!(r.sat + r.unsat, 200);
    }

    #[test]
    fn ring_laws_hold() {
        let r = ring_laws(50, 1);
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.evaluations, 4 * 50 * 9);
        assert_eq!(r.proofs, 8);
    }
}
