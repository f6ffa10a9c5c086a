//! Each encoder family at small widths against exhaustive enumeration. The
//! encoding is evaluated with the IR evaluator and compared point by point
//! with native Rust arithmetic; the solver verdict must agree with whether
//! the enumerated set is empty.

use rayon::prelude::*;
use wrapcheck_core::encode::{
    add_overflow, encode_alloc_overflow, guard_bypass, index_bound, seq_compare_pair, shift_signed_ub, signed_cast_boundary,
    sub_underflow, tlv_underflow, trunc_cast, Predicate,
};
use wrapcheck_solver::{check_sat, eval_formula, substitute, Assignment, BvTerm, Formula, Verdict, Width};

fn v8(name: &str) -> BvTerm {
    BvTerm::var(name, Width::W8)
}

fn env(pairs: &[(&str, u64)]) -> Assignment {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn solver_sat(f: &Formula) -> bool {
    match check_sat(f).unwrap() {
        Verdict::Sat(w) => {
            assert!(eval_formula(f, &w.values).unwrap(), "witness fails its formula");
            true
        }
        Verdict::Unsat => false,
        Verdict::Unknown(r) => panic!("unknown without a budget: {r}"),
    }
}

/// Compares a two-variable 8-bit encoding with `native` on all 65,536
/// points and returns the solution count.
fn pairs(p: &Predicate, a: &str, b: &str, native: impl Fn(u8, u8) -> bool) -> usize {
    let mut count = 0;
    for x in 0..=255u8 {
        for y in 0..=255u8 {
            let got = eval_formula(&p.formula, &env(&[(a, x as u64), (b, y as u64)])).unwrap();
            assert_eq!(got, native(x, y), "{} at {a}={x} {b}={y}", p.description);
            count += usize::from(got);
        }
    }
    assert_eq!(solver_sat(&p.formula), count > 0, "{}", p.description);
    count
}

#[test]
fn seq_pair_matches_enumeration_over_all_triples() {
    let p = seq_compare_pair(&v8("x"), &v8("y"), &v8("z")).unwrap();
    let lt = |a: u8, b: u8| (a.wrapping_sub(b) as i8) < 0;
    let count: usize = (0..=255u8)
        .into_par_iter()
        .map(|x| {
            let mut e = env(&[("x", x as u64), ("y", 0), ("z", 0)]);
            let mut n = 0;
            for y in 0..=255u8 {
                for z in 0..=255u8 {
                    e.insert("y".into(), y as u64);
                    e.insert("z".into(), z as u64);
                    let got = eval_formula(&p.formula, &e).unwrap();
                    assert_eq!(got, lt(x, y) && lt(z, x), "x={x} y={y} z={z}");
                    n += usize::from(got);
                }
            }
            n
        })
        .sum();
    // Each comparison is true for exactly half of its differences and the
    // two differences are independent.
    assert_eq!(count, 1 << 22);
    assert!(solver_sat(&p.formula));
}

#[test]
fn allocation_overflow_for_several_element_sizes() {
    for es in [2u64, 3, 16, 48, 255] {
        let p = encode_alloc_overflow(&v8("n"), es, None).unwrap();
        let mut count = 0;
        for n in 0..=255u8 {
            let got = eval_formula(&p.formula, &env(&[("n", n as u64)])).unwrap();
            assert_eq!(got, n > 0 && n.wrapping_mul(es as u8) < n, "es={es} n={n}");
            count += usize::from(got);
        }
        assert_eq!(solver_sat(&p.formula), count > 0);
        let bound = 255 / es;
        let bounded = encode_alloc_overflow(&v8("n"), es, Some(bound)).unwrap();
        assert!(!solver_sat(&bounded.formula), "es={es} bound={bound}");
        // The first overflowing count wraps to below `es`, which is below
        // the count itself whenever es * es fits the width.
        if es * es <= 256 {
            let loose = encode_alloc_overflow(&v8("n"), es, Some(bound + 1)).unwrap();
            assert!(solver_sat(&loose.formula), "es={es} bound={}", bound + 1);
        }
    }
}

/// Wrapping below `n` is sufficient for overflow but not necessary: with a
/// large element size some wrapped products stay above the count.
#[test]
fn wrap_below_count_under_approximates_overflow() {
    let p = encode_alloc_overflow(&v8("n"), 255, None).unwrap();
    assert!(!eval_formula(&p.formula, &env(&[("n", 2)])).unwrap());
    assert_eq!(2u8.checked_mul(255), None);
    assert_eq!(2u8.wrapping_mul(255), 254);
}

#[test]
fn addition_and_subtraction() {
    let add = add_overflow(&v8("a"), &v8("b")).unwrap();
    let n = pairs(&add, "a", "b", |a, b| a.checked_add(b).is_none());
    assert_eq!(n, 255 * 256 / 2);
    let sub = sub_underflow(&v8("a"), &v8("b")).unwrap();
    let n = pairs(&sub, "a", "b", |a, b| a.checked_sub(b).is_none());
    assert_eq!(n, 255 * 256 / 2);
}

#[test]
fn signed_cast_boundary_pair() {
    let wd1 = signed_cast_boundary(&v8("a"), &v8("b"), false).unwrap();
    let n = pairs(&wd1, "a", "b", |a, b| a.wrapping_sub(b) as i8 == i8::MIN);
    assert_eq!(n, 256);
    let wd3 = signed_cast_boundary(&v8("a"), &v8("b"), true).unwrap();
    assert_eq!(pairs(&wd3, "a", "b", |_, _| false), 0);
}

#[test]
fn guard_bypass_phases() {
    let cap = 100u64;
    let (p1, p2) = guard_bypass(&v8("size"), &v8("stack"), 2, cap).unwrap();
    let phase1 = |s: u8, st: u8| s > 127 && st >= 2 && (st as u64) < cap && st >= s.wrapping_mul(2);
    let n1 = pairs(&p1, "size", "stack", phase1);
    let n2 = pairs(&p2, "size", "stack", |s, st| phase1(s, st) && st.wrapping_sub(s) as u64 > cap);
    assert!(n1 > 0 && n2 > 0 && n2 <= n1);
}

#[test]
fn truncation_sixteen_to_eight() {
    let p = trunc_cast(&BvTerm::var("x", Width::W16), 8).unwrap();
    let mut count = 0;
    for x in 0..=u16::MAX {
        let got = eval_formula(&p.formula, &env(&[("x", x as u64)])).unwrap();
        assert_eq!(got, (x as u8) as u16 != x, "x={x}");
        count += usize::from(got);
    }
    assert_eq!(count, 65536 - 256);
    assert!(solver_sat(&p.formula));
}

#[test]
fn shift_past_signed_maximum_at_eight_bits() {
    for shamt in 1..8u32 {
        for range_max in [1u64, 3, 15, 127, 255] {
            let (wd1, wd2) = shift_signed_ub(&v8("x"), shamt, range_max).unwrap();
            let mut count = 0;
            for x in 0..=255u64 {
                let got = eval_formula(&wd1.formula, &env(&[("x", x)])).unwrap();
                assert_eq!(got, x <= range_max && (x << shamt) > 127, "shamt={shamt} max={range_max} x={x}");
                count += usize::from(got);
            }
            assert_eq!(solver_sat(&wd1.formula), count > 0);
            assert!(!solver_sat(&wd2.formula));
        }
    }
}

#[test]
fn index_bound_at_eight_bits() {
    let p = index_bound(&v8("i"), 200).unwrap();
    let n = (0..=255u64)
        .filter(|&i| {
            let got = eval_formula(&p.formula, &env(&[("i", i)])).unwrap();
            assert_eq!(got, i > 200);
            got
        })
        .count();
    assert_eq!(n, 55);
    assert_eq!(p.bridge_inputs, ["i"]);
}

/// The 8-bit form of the TLV predicate can never exceed 0xFF, so this one
/// runs at 16 bits with the embedded length fixed per slice.
#[test]
fn tlv_underflow_slices_at_sixteen_bits() {
    let p = tlv_underflow(&BvTerm::var("len", Width::W16), &BvTerm::var("tlv_len", Width::W16), 3).unwrap();
    for tlv in [0u64, 1, 5, 252, 253, 1000, 65532, 65533, 65535] {
        let slice = substitute(&p.formula, &env(&[("tlv_len", tlv)])).unwrap();
        let mut count = 0;
        for len in 0..=u16::MAX as u64 {
            let got = eval_formula(&p.formula, &env(&[("len", len), ("tlv_len", tlv)])).unwrap();
            let result = len.wrapping_sub(3).wrapping_sub(tlv) & 0xFFFF;
            let native = ((3 + tlv) & 0xFFFF) > len && result > 0xFF;
            assert_eq!(got, native, "len={len} tlv_len={tlv}");
            count += usize::from(got);
        }
        assert_eq!(solver_sat(&slice), count > 0, "tlv_len={tlv}");
    }
}
