//! SMT-LIB v2 (QF_BV) rendering of formulas.

use std::fmt::Write;

use crate::bv::{BvAtom, BvTerm, Formula, Prop, Relation};

fn is_simple_symbol(s: &str) -> bool {
    const EXTRA: &str = "~!@$%^&*_-+=<>.?/";
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || EXTRA.contains(c) => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || EXTRA.contains(c))
}

/// Renders a variable name as an SMT-LIB symbol, quoting when needed.
pub fn symbol(name: &str) -> String {
    if is_simple_symbol(name) {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

fn literal(value: u64, width: u32) -> String {
    if width % 4 == 0 {
        format!("#x{:0digits$x}", value, digits = (width / 4) as usize)
    } else {
        format!("#b{:0digits$b}", value, digits = width as usize)
    }
}

pub fn term(t: &BvTerm) -> String {
    match t {
        BvTerm::Const { value, width } => literal(*value, *width),
        BvTerm::Var { name, .. } => symbol(name),
        BvTerm::Binary { op, lhs, rhs } => {
            format!("({} {} {})", op.smt_name(), term(lhs), term(rhs))
        }
        BvTerm::Not(a) => format!("(bvnot {})", term(a)),
        BvTerm::ZeroExt { extra, arg } => format!("((_ zero_extend {extra}) {})", term(arg)),
        BvTerm::SignExt { extra, arg } => format!("((_ sign_extend {extra}) {})", term(arg)),
        BvTerm::Extract { hi, lo, arg } => format!("((_ extract {hi} {lo}) {})", term(arg)),
    }
}

fn atom(a: &BvAtom) -> String {
    let (l, r) = (term(&a.lhs), term(&a.rhs));
    match a.relation {
        Relation::Eq => format!("(= {l} {r})"),
        Relation::Ne => format!("(not (= {l} {r}))"),
        Relation::Ult => format!("(bvult {l} {r})"),
        Relation::Ule => format!("(bvule {l} {r})"),
        Relation::Ugt => format!("(bvugt {l} {r})"),
        Relation::Uge => format!("(bvuge {l} {r})"),
    }
}

pub fn prop(p: &Prop) -> String {
    match p {
        Prop::Atom(a) => atom(a),
        Prop::And(ps) if ps.is_empty() => "true".into(),
        Prop::Or(ps) if ps.is_empty() => "false".into(),
        Prop::And(ps) if ps.len() == 1 => prop(&ps[0]),
        Prop::Or(ps) if ps.len() == 1 => prop(&ps[0]),
        Prop::And(ps) => format!("(and {})", join(ps)),
        Prop::Or(ps) => format!("(or {})", join(ps)),
        Prop::Not(q) => format!("(not {})", prop(q)),
    }
}

fn join(ps: &[Prop]) -> String {
    ps.iter().map(prop).collect::<Vec<_>>().join(" ")
}

/// A complete script: logic, declarations, definitions, one assertion,
/// `check-sat` and `get-model`. `comments` become leading `;` lines.
pub fn to_smt2(f: &Formula, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "; {line}");
        }
    }
    out.push_str("(set-logic QF_BV)\n");
    for (name, w) in f.free_vars() {
        let _ = writeln!(out, "(declare-const {} (_ BitVec {}))", symbol(name), w.bits());
    }
    for d in f.definitions() {
        let _ = writeln!(
            out,
            "(define-fun {} () (_ BitVec {}) {})",
            symbol(&d.name),
            d.term.width(),
            term(&d.term)
        );
    }
    let _ = writeln!(out, "(assert {})", prop(f.prop()));
    out.push_str("(check-sat)\n(get-model)\n");
    out
}
