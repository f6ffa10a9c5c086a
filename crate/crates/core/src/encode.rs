//! Vulnerability predicates over bitvector terms, one family per pattern
//! kind, plus the dispatch from extracted candidates.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;
use wrapcheck_solver::{BvError, BvTerm, Definition, Formula, Prop, Width};

use crate::extract::{Candidate, PatternKind, Severity};
use crate::frontend::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cwe {
    Cwe190,
    Cwe191,
    Cwe195,
    Cwe125,
}

impl Cwe {
    pub fn as_str(self) -> &'static str {
        match self {
            Cwe::Cwe190 => "CWE-190",
            Cwe::Cwe191 => "CWE-191",
            Cwe::Cwe195 => "CWE-195",
            Cwe::Cwe125 => "CWE-125",
        }
    }
}

impl fmt::Display for Cwe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Cwe {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Threat-model tag attached to findings: arithmetic findings are T1,
/// policy decisions T2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ThreatTag {
    T1,
    T2,
    T3,
    T4,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Bv(#[from] BvError),
    #[error("element size must be nonzero")]
    ZeroElementSize,
    #[error("shift amount {shamt} out of range for width {width}")]
    ShiftOutOfRange { shamt: u32, width: u32 },
    #[error("cannot truncate {from}-bit value to {to} bits")]
    TruncWidth { from: u32, to: u32 },
    #[error("capacity must be nonzero")]
    ZeroCapacity,
    #[error("multiplier must be at least 2, got {0}")]
    BadMultiplier(u64),
    #[error("{kind} candidate needs {expected} operand(s), found {found}")]
    Operands {
        kind: PatternKind,
        expected: usize,
        found: usize,
    },
    #[error("three distinct variables required")]
    NotDistinct,
}

/// A vulnerability predicate before it is attached to a source site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub formula: Formula,
    /// Defined or free variable holding the corrupted value.
    pub output_var: Option<String>,
    /// Free variables that may receive another predicate's output.
    pub bridge_inputs: Vec<String>,
    pub description: String,
}

/// A predicate bound to a candidate site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub id: String,
    pub kind: PatternKind,
    /// Distinguishes the members of a pair (`WD1`/`WD2`, `phase1`/`phase2`).
    pub form: Option<&'static str>,
    pub cwe: Cwe,
    pub threat_tag: ThreatTag,
    pub severity: Severity,
    pub site: SourceSpan,
    pub function: String,
    pub formula: Formula,
    pub output_var: Option<String>,
    pub bridge_inputs: Vec<String>,
    pub description: String,
}

impl Encoding {
    pub fn output_width(&self) -> Option<u32> {
        self.output_var.as_ref().and_then(|v| self.formula.var_width(v))
    }
}

fn c(value: u64, width: u32) -> BvTerm {
    BvTerm::constant_wrapping(value, width)
}

fn vars_of(terms: &[&BvTerm]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in terms {
        t.for_each_var(&mut |n, _| {
            out.insert(n.to_string());
        });
    }
    out
}

/// `base`, or `base_1`, `base_2`, ... avoiding names already in use.
fn fresh(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| !taken.contains(n))
        .unwrap_or_else(|| unreachable!())
}

fn signed_min(width: u32) -> u64 {
    1u64 << (width - 1)
}

fn var_name(t: &BvTerm) -> Option<&str> {
    match t {
        BvTerm::Var { name, .. } => Some(name),
        _ => None,
    }
}

/// Paired signed-difference comparisons `lt(x, y) && lt(z, x)`, each
/// expressed with the MSB idiom `(a - b) >= 2^(w-1)`.
pub fn seq_compare_pair(x: &BvTerm, y: &BvTerm, z: &BvTerm) -> Result<Predicate, EncodeError> {
    let w = x.width();
    if let (Some(a), Some(b), Some(d)) = (var_name(x), var_name(y), var_name(z)) {
        if a == b || a == d || b == d {
            return Err(EncodeError::NotDistinct);
        }
    }
    let diff = fresh("diff", &vars_of(&[x, y, z]));
    let defs = vec![Definition {
        name: diff.clone(),
        term: BvTerm::sub(x.clone(), y.clone())?,
    }];
    let prop = Prop::all([
        Prop::uge(BvTerm::defined(&diff, w), c(signed_min(w), w))?,
        Prop::uge(BvTerm::sub(z.clone(), x.clone())?, c(signed_min(w), w))?,
    ]);
    Ok(Predicate {
        formula: Formula::with_definitions(defs, prop)?,
        output_var: Some(diff),
        bridge_inputs: vec![],
        description: format!("signed-difference comparisons lt({x}, {y}) && lt({z}, {x}) both hold"),
    })
}

/// Wrapped product smaller than the multiplicand, optionally under an
/// upper bound on the multiplicand.
pub fn alloc_overflow(n: &BvTerm, element_size: &BvTerm, bound: Option<u64>) -> Result<Predicate, EncodeError> {
    if matches!(element_size, BvTerm::Const { value: 0, .. }) {
        return Err(EncodeError::ZeroElementSize);
    }
    let w = n.width();
    let product = fresh("product", &vars_of(&[n, element_size]));
    let defs = vec![Definition {
        name: product.clone(),
        term: BvTerm::mul(n.clone(), element_size.clone())?,
    }];
    let mut parts = vec![
        Prop::ugt(n.clone(), c(0, w))?,
        Prop::ult(BvTerm::defined(&product, w), n.clone())?,
    ];
    if let Some(b) = bound {
        parts.push(Prop::ule(n.clone(), c(b, w))?);
    }
    let bound_note = bound.map(|b| format!(" with {n} <= {b:#x}")).unwrap_or_default();
    Ok(Predicate {
        formula: Formula::with_definitions(defs, Prop::all(parts))?,
        output_var: Some(product),
        bridge_inputs: vec![],
        description: format!("{n} * {element_size} wraps below {n}{bound_note}"),
    })
}

/// `encode_alloc_overflow` with a constant element size.
pub fn encode_alloc_overflow(n: &BvTerm, element_size: u64, bound: Option<u64>) -> Result<Predicate, EncodeError> {
    alloc_overflow(n, &BvTerm::constant(element_size, n.width())?, bound)
}

/// Unsigned addition that wraps: the sum is below an addend.
pub fn add_overflow(a: &BvTerm, b: &BvTerm) -> Result<Predicate, EncodeError> {
    let w = a.width();
    let sum = fresh("sum", &vars_of(&[a, b]));
    let defs = vec![Definition {
        name: sum.clone(),
        term: BvTerm::add(a.clone(), b.clone())?,
    }];
    let prop = Prop::ult(BvTerm::defined(&sum, w), a.clone())?;
    Ok(Predicate {
        formula: Formula::with_definitions(defs, prop)?,
        output_var: Some(sum),
        bridge_inputs: vec![],
        description: format!("{a} + {b} wraps"),
    })
}

/// Unsigned subtraction with the subtrahend above the minuend.
pub fn sub_underflow(minuend: &BvTerm, subtrahend: &BvTerm) -> Result<Predicate, EncodeError> {
    let diff = fresh("diff", &vars_of(&[minuend, subtrahend]));
    let defs = vec![Definition {
        name: diff.clone(),
        term: BvTerm::sub(minuend.clone(), subtrahend.clone())?,
    }];
    let prop = Prop::ugt(subtrahend.clone(), minuend.clone())?;
    Ok(Predicate {
        formula: Formula::with_definitions(defs, prop)?,
        output_var: Some(diff),
        bridge_inputs: vec![],
        description: format!("{minuend} - {subtrahend} underflows"),
    })
}

/// Length-field underflow `len - (header + tlv_len)` where the header plus
/// the embedded length exceed the outer length and the result wraps to a
/// large value.
pub fn tlv_underflow(len: &BvTerm, tlv_len: &BvTerm, header: u64) -> Result<Predicate, EncodeError> {
    let w = len.width();
    let hdr = c(header, w);
    let result = fresh("result", &vars_of(&[len, tlv_len]));
    let defs = vec![Definition {
        name: result.clone(),
        term: BvTerm::sub(BvTerm::sub(len.clone(), hdr.clone())?, tlv_len.clone())?,
    }];
    let prop = Prop::all([
        Prop::ugt(BvTerm::add(hdr, tlv_len.clone())?, len.clone())?,
        Prop::ugt(BvTerm::defined(&result, w), c(0xFF, w))?,
    ]);
    Ok(Predicate {
        formula: Formula::with_definitions(defs, prop)?,
        output_var: Some(result),
        bridge_inputs: vec![],
        description: format!("{len} - ({header} + {tlv_len}) underflows"),
    })
}

/// Left shift of a non-negative signed value past the signed maximum.
///
/// The vulnerable form compares the exact shifted value: for widths up to
/// 32 the operand is zero-extended to twice its width before shifting; at
/// 64 bits the equivalent `x > INT_MAX >> shamt` is used. The fixed form is
/// the unsigned-cast-first shift compared against the unsigned maximum.
pub fn shift_signed_ub(x: &BvTerm, shamt: u32, range_max: u64) -> Result<(Predicate, Predicate), EncodeError> {
    let w = x.width();
    if shamt == 0 || shamt >= w {
        return Err(EncodeError::ShiftOutOfRange { shamt, width: w });
    }
    let int_max = signed_min(w) - 1;
    let range = Prop::ule(x.clone(), c(range_max, w))?;
    let shifted = fresh("shifted", &vars_of(&[x]));
    let (exceeds, defs) = if w <= 32 {
        let wide = BvTerm::zero_ext(w, x.clone())?;
        let def = Definition {
            name: shifted.clone(),
            term: BvTerm::shl(wide, c(u64::from(shamt), 2 * w))?,
        };
        (
            Prop::ugt(BvTerm::defined(&shifted, 2 * w), c(int_max, 2 * w))?,
            vec![def],
        )
    } else {
        (Prop::ugt(x.clone(), c(int_max >> shamt, w))?, vec![])
    };
    let vulnerable = Predicate {
        output_var: defs.first().map(|d| d.name.clone()),
        formula: Formula::with_definitions(defs, Prop::all([range, exceeds]))?,
        bridge_inputs: vec![],
        description: format!("{x} << {shamt} exceeds the signed maximum for {x} <= {range_max}"),
    };
    let fixed = Predicate {
        formula: Formula::new(Prop::ugt(
            BvTerm::shl(x.clone(), c(u64::from(shamt), w))?,
            c(u64::MAX, w),
        )?)?,
        output_var: None,
        bridge_inputs: vec![],
        description: format!("unsigned ({x}) << {shamt} exceeds the unsigned maximum"),
    };
    Ok((vulnerable, fixed))
}

/// Narrowing conversion that changes the value: the discarded high bits
/// are not all zero.
pub fn trunc_cast(x: &BvTerm, to_width: u32) -> Result<Predicate, EncodeError> {
    let from = x.width();
    if to_width >= from || to_width == 0 {
        return Err(EncodeError::TruncWidth { from, to: to_width });
    }
    let truncated = fresh("truncated", &vars_of(&[x]));
    let defs = vec![Definition {
        name: truncated.clone(),
        term: BvTerm::extract(to_width - 1, 0, x.clone())?,
    }];
    let prop = Prop::all([
        Prop::ugt(BvTerm::lshr(x.clone(), c(u64::from(to_width), from))?, c(0, from))?,
        Prop::ne(
            BvTerm::zero_ext(from - to_width, BvTerm::defined(&truncated, to_width))?,
            x.clone(),
        )?,
    ]);
    Ok(Predicate {
        formula: Formula::with_definitions(defs, prop)?,
        output_var: Some(truncated),
        bridge_inputs: vec![],
        description: format!("conversion of {x} to {to_width} bits discards nonzero high bits"),
    })
}

/// Multiplication inside a size guard that wraps, letting the guard pass
/// (phase 1), and the later offset computation that then exceeds the
/// capacity (phase 2).
pub fn guard_bypass(
    size: &BvTerm,
    stack_size: &BvTerm,
    multiplier: u64,
    stack_cap: u64,
) -> Result<(Predicate, Predicate), EncodeError> {
    if stack_cap == 0 {
        return Err(EncodeError::ZeroCapacity);
    }
    if multiplier < 2 {
        return Err(EncodeError::BadMultiplier(multiplier));
    }
    let w = size.width();
    let max = wrapcheck_solver::mask(w);
    let taken = vars_of(&[size, stack_size]);
    let broken = fresh("broken_mul", &taken);
    let mul_def = Definition {
        name: broken.clone(),
        term: BvTerm::mul(size.clone(), c(multiplier, w))?,
    };
    let phase1_parts = vec![
        Prop::ugt(size.clone(), c(max / multiplier, w))?,
        Prop::uge(stack_size.clone(), c(multiplier, w))?,
        Prop::ult(stack_size.clone(), c(stack_cap, w))?,
        Prop::uge(stack_size.clone(), BvTerm::defined(&broken, w))?,
    ];
    let phase1 = Predicate {
        formula: Formula::with_definitions(vec![mul_def.clone()], Prop::all(phase1_parts.clone()))?,
        output_var: Some(broken.clone()),
        bridge_inputs: vec![],
        description: format!("{size} * {multiplier} wraps so the guard on {stack_size} passes"),
    };
    let mut taken2 = taken;
    taken2.insert(broken.clone());
    let rhs = fresh("rhsOffset", &taken2);
    let rhs_def = Definition {
        name: rhs.clone(),
        term: BvTerm::sub(stack_size.clone(), size.clone())?,
    };
    let mut parts = phase1_parts;
    parts.push(Prop::ugt(BvTerm::defined(&rhs, w), c(stack_cap, w))?);
    let phase2 = Predicate {
        formula: Formula::with_definitions(vec![mul_def, rhs_def], Prop::all(parts))?,
        output_var: Some(rhs),
        bridge_inputs: vec![],
        description: format!("after the bypass, {stack_size} - {size} exceeds capacity {stack_cap}"),
    };
    Ok((phase1, phase2))
}

/// Unsigned difference converted to the same-width signed type landing
/// exactly on the signed minimum; the guarded form adds `diff < 2^(w-1)`.
pub fn signed_cast_boundary(minuend: &BvTerm, subtrahend: &BvTerm, guarded: bool) -> Result<Predicate, EncodeError> {
    let w = minuend.width();
    let diff = fresh("diff", &vars_of(&[minuend, subtrahend]));
    let defs = vec![Definition {
        name: diff.clone(),
        term: BvTerm::sub(minuend.clone(), subtrahend.clone())?,
    }];
    let boundary = Prop::eq(BvTerm::defined(&diff, w), c(signed_min(w), w))?;
    let prop = if guarded {
        Prop::all([Prop::ult(BvTerm::defined(&diff, w), c(signed_min(w), w))?, boundary])
    } else {
        boundary
    };
    Ok(Predicate {
        formula: Formula::with_definitions(defs, prop)?,
        output_var: if guarded { None } else { Some(diff) },
        bridge_inputs: vec![],
        description: if guarded {
            format!("{minuend} - {subtrahend} reaches the signed minimum despite the range guard")
        } else {
            format!("{minuend} - {subtrahend} converts to the signed minimum")
        },
    })
}

/// Index beyond a capacity. When the index is a plain variable it is a
/// bridge input for chains.
pub fn index_bound(index: &BvTerm, capacity: u64) -> Result<Predicate, EncodeError> {
    let w = index.width();
    let prop = Prop::ugt(index.clone(), c(capacity, w))?;
    Ok(Predicate {
        formula: Formula::new(prop)?,
        output_var: None,
        bridge_inputs: var_name(index).map(|n| vec![n.to_string()]).unwrap_or_default(),
        description: format!("index {index} exceeds bound {capacity}"),
    })
}

fn operands(c: &Candidate, n: usize) -> Result<Vec<&BvTerm>, EncodeError> {
    if c.operands.len() < n {
        return Err(EncodeError::Operands {
            kind: c.kind,
            expected: n,
            found: c.operands.len(),
        });
    }
    Ok(c.operands.iter().map(|o| &o.term).collect())
}

fn term_label(t: &BvTerm) -> String {
    match t {
        BvTerm::Var { name, .. } => name.clone(),
        other => other.to_string(),
    }
}

/// Turns a candidate into its encodings: one for most kinds, a
/// vulnerable/fixed pair for shifts and signed casts, two phases for
/// guard bypasses.
pub fn encode_candidate(cand: &Candidate) -> Result<Vec<Encoding>, EncodeError> {
    let base_id = format!("{}@{}:{}/{}", cand.function, cand.site.line, cand.site.column, cand.kind);
    let wrap = |p: Predicate, form: Option<&'static str>, cwe: Cwe, severity: Severity| Encoding {
        id: match form {
            Some(f) => format!("{base_id}/{f}"),
            None => base_id.clone(),
        },
        kind: cand.kind,
        form,
        cwe,
        threat_tag: ThreatTag::T1,
        severity,
        site: cand.site.clone(),
        function: cand.function.clone(),
        formula: p.formula,
        output_var: p.output_var,
        bridge_inputs: p.bridge_inputs,
        description: p.description,
    };
    let sev = cand.severity;
    let h = &cand.hints;
    Ok(match cand.kind {
        PatternKind::MulOverflow => {
            let ops = operands(cand, 2)?;
            vec![wrap(alloc_overflow(ops[0], ops[1], h.bound)?, None, Cwe::Cwe190, sev)]
        }
        PatternKind::AddOverflow => {
            let ops = operands(cand, 2)?;
            vec![wrap(add_overflow(ops[0], ops[1])?, None, Cwe::Cwe190, sev)]
        }
        PatternKind::SubUnderflow => {
            let ops = operands(cand, 2)?;
            let p = match h.header {
                Some(hdr) => tlv_underflow(ops[0], ops[1], hdr)?,
                None => sub_underflow(ops[0], ops[1])?,
            };
            vec![wrap(p, None, Cwe::Cwe191, sev)]
        }
        PatternKind::ShiftSignedUB => {
            let ops = operands(cand, 1)?;
            let shamt = h.shamt.unwrap_or(0);
            let range_max = h
                .range_max
                .unwrap_or_else(|| signed_min(ops[0].width()) - 1);
            let (wd1, wd2) = shift_signed_ub(ops[0], shamt, range_max)?;
            vec![
                wrap(wd1, Some("WD1"), Cwe::Cwe190, sev),
                wrap(wd2, Some("WD2"), Cwe::Cwe190, Severity::Guarded),
            ]
        }
        PatternKind::TruncCast => {
            let ops = operands(cand, 1)?;
            let to = h.to_width.unwrap_or(ops[0].width() / 2);
            vec![wrap(trunc_cast(ops[0], to)?, None, Cwe::Cwe195, sev)]
        }
        PatternKind::SignCastBoundary => {
            let ops = operands(cand, 2)?;
            vec![
                wrap(signed_cast_boundary(ops[0], ops[1], false)?, Some("WD1"), Cwe::Cwe195, sev),
                wrap(
                    signed_cast_boundary(ops[0], ops[1], true)?,
                    Some("WD3"),
                    Cwe::Cwe195,
                    Severity::Guarded,
                ),
            ]
        }
        PatternKind::SeqComparePair => {
            let ops = operands(cand, 3)?;
            vec![wrap(seq_compare_pair(ops[0], ops[1], ops[2])?, None, Cwe::Cwe190, sev)]
        }
        PatternKind::GuardBypassMul => {
            let ops = operands(cand, 2)?;
            let (p1, p2) = guard_bypass(
                ops[0],
                ops[1],
                h.multiplier.unwrap_or(2),
                h.capacity.unwrap_or(DEFAULT_STACK_CAP),
            )?;
            vec![
                wrap(p1, Some("phase1"), Cwe::Cwe190, sev),
                wrap(p2, Some("phase2"), Cwe::Cwe125, sev),
            ]
        }
        PatternKind::IndexBound => {
            let ops = operands(cand, 1)?;
            let cap = h.capacity.unwrap_or(DEFAULT_INDEX_CAP);
            let mut p = index_bound(ops[0], cap)?;
            p.description = format!("index {} exceeds bound {cap}", term_label(ops[0]));
            vec![wrap(p, None, Cwe::Cwe125, sev)]
        }
    })
}

/// Capacity used for index checks when the array length is unknown.
pub const DEFAULT_INDEX_CAP: u64 = 4096;
/// Capacity used for guard-bypass phase 2 when none is annotated.
pub const DEFAULT_STACK_CAP: u64 = 1024;

/// Width of a variable as a solver width, for callers building bindings.
pub fn width_of(f: &Formula, var: &str) -> Option<Width> {
    f.free_vars().get(var).copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use wrapcheck_solver::{check_sat, eval_formula, substitute, Assignment, Verdict};

    fn v(name: &str, w: Width) -> BvTerm {
        BvTerm::var(name, w)
    }

    fn asg(pairs: &[(&str, u64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn sat(f: &Formula) -> bool {
        match check_sat(f).unwrap() {
            Verdict::Sat(w) => {
                assert!(eval_formula(f, &w.values).unwrap());
                true
            }
            Verdict::Unsat => false,
            Verdict::Unknown(r) => panic!("unknown: {r}"),
        }
    }

    fn sack() -> Predicate {
        seq_compare_pair(
            &v("sack_start", Width::W32),
            &v("rcv_nxt", Width::W32),
            &v("snd_una", Width::W32),
        )
        .unwrap()
    }

    #[test]
    fn seq_compare_pair_published_witness() {
        let p = sack();
        assert!(sat(&p.formula));
        let w = asg(&[("sack_start", 0x8000_0000), ("rcv_nxt", 0), ("snd_una", 0)]);
        assert!(eval_formula(&p.formula, &w).unwrap());
        assert_eq!(p.output_var.as_deref(), Some("diff"));
        let same = p
            .formula
            .and(Prop::eq(v("sack_start", Width::W32), v("rcv_nxt", Width::W32)).unwrap())
            .unwrap();
        assert!(!sat(&same));
    }

    #[test]
    fn seq_compare_pair_rejects_repeated_vars() {
        let x = v("a", Width::W32);
        assert_eq!(seq_compare_pair(&x, &x, &v("b", Width::W32)), Err(EncodeError::NotDistinct));
    }

    #[test]
    fn alloc_overflow_verdicts() {
        let n = v("n", Width::W32);
        let p = encode_alloc_overflow(&n, 16, None).unwrap();
        assert!(sat(&p.formula));
        let w = asg(&[("n", 0x2222_221e)]);
        assert!(eval_formula(&p.formula, &w).unwrap());
        assert_eq!(p.formula.eval_definitions(&w).unwrap()["product"], 0x2222_21e0);
        let bounded = encode_alloc_overflow(&n, 16, Some(0x0FFF_FFFF)).unwrap();
        assert!(!sat(&bounded.formula));
        assert!(!sat(&encode_alloc_overflow(&n, 1, None).unwrap().formula));
        assert_eq!(encode_alloc_overflow(&n, 0, None), Err(EncodeError::ZeroElementSize));
        // Binding the bound value leaves a closed formula with the same truth.
        let closed = substitute(&bounded.formula, &asg(&[("n", 0x0FFF_FFFF)])).unwrap();
        assert!(closed.free_vars().is_empty());
        assert_eq!(
            eval_formula(&closed, &Assignment::new()).unwrap(),
            eval_formula(&bounded.formula, &asg(&[("n", 0x0FFF_FFFF)])).unwrap()
        );
    }

    #[test]
    fn shift_pair_verdicts_and_range() {
        let w1 = v("w1", Width::W32);
        let (wd1, wd2) = shift_signed_ub(&w1, 30, 43).unwrap();
        assert!(sat(&wd1.formula));
        assert!(!sat(&wd2.formula));
        assert!(eval_formula(&wd1.formula, &asg(&[("w1", 2)])).unwrap());
        let hits: Vec<u64> = (0..44)
            .filter(|&x| eval_formula(&wd1.formula, &asg(&[("w1", x)])).unwrap())
            .collect();
        assert_eq!(hits, (2..=43).collect::<Vec<_>>());
        let (wd1, _) = shift_signed_ub(&w1, 28, 15).unwrap();
        let hits: Vec<u64> = (0..16)
            .filter(|&x| eval_formula(&wd1.formula, &asg(&[("w1", x)])).unwrap())
            .collect();
        assert_eq!(hits, (8..=15).collect::<Vec<_>>());
        assert!(shift_signed_ub(&w1, 32, 43).is_err());
        assert!(shift_signed_ub(&w1, 0, 43).is_err());
    }

    #[test]
    fn shift_at_64_bits_uses_the_exact_threshold() {
        let x = v("x", Width::W64);
        let (wd1, wd2) = shift_signed_ub(&x, 60, u64::MAX >> 1).unwrap();
        assert!(eval_formula(&wd1.formula, &asg(&[("x", 8)])).unwrap());
        assert!(!eval_formula(&wd1.formula, &asg(&[("x", 7)])).unwrap());
        assert!(!sat(&wd2.formula));
    }

    #[test]
    fn trunc_cast_verdicts() {
        let id = v("id", Width::W64);
        let p = trunc_cast(&id, 32).unwrap();
        assert!(sat(&p.formula));
        let w = asg(&[("id", 0x0000_0001_0000_0000)]);
        assert!(eval_formula(&p.formula, &w).unwrap());
        assert_eq!(p.formula.eval_definitions(&w).unwrap()["truncated"], 0);
        let top_zero = p
            .formula
            .and(
                Prop::eq(
                    BvTerm::lshr(id.clone(), c(32, 64)).unwrap(),
                    c(0, 64),
                )
                .unwrap(),
            )
            .unwrap();
        assert!(!sat(&top_zero));
        assert!(trunc_cast(&id, 64).is_err());
    }

    #[test]
    fn tlv_underflow_verdicts() {
        let len = v("len", Width::W16);
        let tlv = v("tlv_len", Width::W16);
        let p = tlv_underflow(&len, &tlv, 3).unwrap();
        assert!(sat(&p.formula));
        let w = asg(&[("len", 1), ("tlv_len", 5)]);
        assert!(eval_formula(&p.formula, &w).unwrap());
        assert_eq!(p.formula.eval_definitions(&w).unwrap()["result"], 0xfff9);
        assert!(!eval_formula(&p.formula, &asg(&[("len", 0xFFFF), ("tlv_len", 0xFFFF)])).unwrap());
        let guarded = p
            .formula
            .and(Prop::ule(BvTerm::add(c(3, 16), tlv.clone()).unwrap(), len.clone()).unwrap())
            .unwrap();
        assert!(!sat(&guarded));
    }

    #[test]
    fn guard_bypass_phases() {
        let size = v("size", Width::W32);
        let stack = v("stack_size", Width::W32);
        let (p1, p2) = guard_bypass(&size, &stack, 2, 1024).unwrap();
        assert!(sat(&p1.formula));
        assert!(sat(&p2.formula));
        let w = asg(&[("size", 0x8000_0001), ("stack_size", 2)]);
        assert!(eval_formula(&p1.formula, &w).unwrap());
        assert_eq!(p1.formula.eval_definitions(&w).unwrap()["broken_mul"], 2);
        let full = p2.formula.eval_definitions(&w).unwrap();
        assert!(eval_formula(&p2.formula, &w).unwrap());
        assert!(full["rhsOffset"] > 1024);
        assert_eq!(guard_bypass(&size, &stack, 2, 0), Err(EncodeError::ZeroCapacity));
    }

    /// 16-bit downscale: with `size <= cap/2` the doubled size cannot wrap,
    /// so the wrapped product never differs from the exact one and the
    /// bypass conjunct is unsatisfiable. Checked exhaustively over `size`
    /// and by the solver.
    #[test]
    fn guard_bypass_needs_the_wrap() {
        let cap = 1024u64;
        let size = v("size", Width::W16);
        let stack = v("stack", Width::W16);
        let mul = BvTerm::mul(size.clone(), c(2, 16)).unwrap();
        let exact = BvTerm::mul(
            BvTerm::zero_ext(16, size.clone()).unwrap(),
            c(2, 32),
        )
        .unwrap();
        let bypass = Formula::new(Prop::all([
            Prop::ule(size.clone(), c(cap / 2, 16)).unwrap(),
            Prop::uge(stack.clone(), mul).unwrap(),
            Prop::ugt(exact, BvTerm::zero_ext(16, stack.clone()).unwrap()).unwrap(),
        ]))
        .unwrap();
        assert!(!sat(&bypass));
        for s in 0..=cap / 2 {
            assert_eq!((s * 2) & 0xFFFF, s * 2);
        }
    }

    #[test]
    fn signed_cast_pair() {
        let a = v("rcv_nxt", Width::W32);
        let b = v("th_seq", Width::W32);
        let wd1 = signed_cast_boundary(&a, &b, false).unwrap();
        let wd3 = signed_cast_boundary(&a, &b, true).unwrap();
        assert!(sat(&wd1.formula));
        assert!(!sat(&wd3.formula));
        let w = asg(&[("rcv_nxt", 0x8000_0000), ("th_seq", 0)]);
        assert!(eval_formula(&wd1.formula, &w).unwrap());
        assert_eq!(wd1.formula.eval_definitions(&w).unwrap()["diff"], 0x8000_0000);
    }

    #[test]
    fn fresh_names_avoid_collisions() {
        let p = sub_underflow(&v("diff", Width::W32), &v("x", Width::W32)).unwrap();
        assert_eq!(p.output_var.as_deref(), Some("diff_1"));
        assert!(sat(&p.formula));
    }

    #[test]
    fn index_bound_bridge_input() {
        let p = index_bound(&v("size_arg", Width::W32), 4096).unwrap();
        assert_eq!(p.bridge_inputs, vec!["size_arg".to_string()]);
        assert!(sat(&p.formula));
        assert!(!sat(&index_bound(&v("i", Width::W32), 0xFFFF_FFFF).unwrap().formula));
    }
}
