//! Candidate extraction: walks a type-resolved unit and classifies
//! arithmetic sites by the wraparound pattern they may exhibit. Operands
//! are lowered to bitvector terms with C conversion semantics so encoders
//! never look at syntax.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use wrapcheck_solver::{BinOp, BvError, BvTerm, Width};

use crate::frontend::printer::print_expr;
use crate::frontend::{
    BinaryOp, CType, DataModel, Expr, ExprKind, Function, IntType, Item, SourceSpan, Stmt, StmtKind,
    TranslationUnit, UnaryOp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PatternKind {
    MulOverflow,
    AddOverflow,
    SubUnderflow,
    ShiftSignedUB,
    TruncCast,
    SignCastBoundary,
    SeqComparePair,
    GuardBypassMul,
    IndexBound,
}

impl PatternKind {
    pub const ALL: [PatternKind; 9] = [
        PatternKind::MulOverflow,
        PatternKind::AddOverflow,
        PatternKind::SubUnderflow,
        PatternKind::ShiftSignedUB,
        PatternKind::TruncCast,
        PatternKind::SignCastBoundary,
        PatternKind::SeqComparePair,
        PatternKind::GuardBypassMul,
        PatternKind::IndexBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::MulOverflow => "MulOverflow",
            PatternKind::AddOverflow => "AddOverflow",
            PatternKind::SubUnderflow => "SubUnderflow",
            PatternKind::ShiftSignedUB => "ShiftSignedUB",
            PatternKind::TruncCast => "TruncCast",
            PatternKind::SignCastBoundary => "SignCastBoundary",
            PatternKind::SeqComparePair => "SeqComparePair",
            PatternKind::GuardBypassMul => "GuardBypassMul",
            PatternKind::IndexBound => "IndexBound",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PatternKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown pattern kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Flagged,
    /// A matching guard or bound was found on the path.
    Guarded,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Flagged => "flagged",
            Severity::Guarded => "guarded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operand {
    /// Printed source text with whitespace removed.
    pub name: String,
    pub ty: IntType,
    pub expr: Expr,
    pub term: BvTerm,
}

/// Constants recovered from the surrounding code, consumed by encoders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hints {
    pub range_max: Option<u64>,
    pub bound: Option<u64>,
    pub capacity: Option<u64>,
    pub header: Option<u64>,
    pub multiplier: Option<u64>,
    pub shamt: Option<u32>,
    pub to_width: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub kind: PatternKind,
    pub site: SourceSpan,
    pub function: String,
    pub operands: Vec<Operand>,
    pub notes: String,
    pub severity: Severity,
    pub hints: Hints,
}

/// Leaf name for an expression: its printed text without whitespace.
pub fn leaf_name(e: &Expr) -> String {
    print_expr(e).chars().filter(|c| !c.is_whitespace()).collect()
}

fn base_name(e: &Expr) -> Option<&str> {
    match &e.strip_implicit().kind {
        ExprKind::Var(n) => Some(n),
        ExprKind::Index { base, .. } => base_name(base),
        ExprKind::Member { field, .. } => Some(field),
        _ => None,
    }
}

#[derive(Debug)]
enum LowerError {
    Untyped,
    Bv,
}

impl From<BvError> for LowerError {
    fn from(_: BvError) -> Self {
        LowerError::Bv
    }
}

/// Translates typed expressions into bitvector terms.
struct Lowerer<'a> {
    consts: &'a BTreeMap<String, u64>,
}

fn fold(t: BvTerm) -> BvTerm {
    let mut has_var = false;
    t.for_each_var(&mut |_, _| has_var = true);
    if has_var {
        return t;
    }
    match t.eval(&BTreeMap::new()) {
        Ok(v) => BvTerm::constant_wrapping(v, t.width()),
        Err(_) => t,
    }
}

fn narrow(t: BvTerm, w: u32) -> Result<BvTerm, LowerError> {
    Ok(if t.width() > w {
        fold(BvTerm::extract(w - 1, 0, t)?)
    } else {
        t
    })
}

fn const_of(t: &BvTerm) -> Option<u64> {
    match t {
        BvTerm::Const { value, .. } => Some(*value),
        _ => None,
    }
}

impl Lowerer<'_> {
    /// Value of `e` computed modulo 2^w; wider requests extend by the
    /// expression's signedness.
    fn lower(&self, e: &Expr, w: u32) -> Result<BvTerm, LowerError> {
        let ty = e.ty.as_ref().ok_or(LowerError::Untyped)?;
        let ew = ty.width;
        if w > ew {
            let t = self.lower(e, ew)?;
            let ext = if ty.signed {
                BvTerm::sign_ext(w - ew, t)?
            } else {
                BvTerm::zero_ext(w - ew, t)?
            };
            return Ok(fold(ext));
        }
        let c = |v: u64| BvTerm::constant_wrapping(v, w);
        let t = match &e.kind {
            ExprKind::Paren(inner) => self.lower(inner, w)?,
            ExprKind::IntLiteral { value, .. } => c(*value),
            ExprKind::Cast { operand, .. } => self.lower(operand, w)?,
            ExprKind::Var(name) if self.consts.contains_key(name) => c(self.consts[name]),
            ExprKind::Binary { op, lhs, rhs } => match op {
                BinaryOp::Add => BvTerm::add(self.lower(lhs, w)?, self.lower(rhs, w)?)?,
                BinaryOp::Sub => BvTerm::sub(self.lower(lhs, w)?, self.lower(rhs, w)?)?,
                BinaryOp::Mul => BvTerm::mul(self.lower(lhs, w)?, self.lower(rhs, w)?)?,
                BinaryOp::BitAnd => BvTerm::and(self.lower(lhs, w)?, self.lower(rhs, w)?)?,
                BinaryOp::BitOr => BvTerm::or(self.lower(lhs, w)?, self.lower(rhs, w)?)?,
                BinaryOp::BitXor => {
                    let (a, b) = (self.lower(lhs, w)?, self.lower(rhs, w)?);
                    BvTerm::and(
                        BvTerm::or(a.clone(), b.clone())?,
                        BvTerm::not(BvTerm::and(a, b)?),
                    )?
                }
                BinaryOp::Shl => match rhs.literal_value() {
                    Some(k) if k >= u64::from(ew) || k >= u64::from(w) => c(0),
                    Some(k) => BvTerm::shl(self.lower(lhs, w)?, c(k))?,
                    None => {
                        let full = BvTerm::shl(self.lower(lhs, ew)?, self.lower(rhs, ew)?)?;
                        narrow(full, w)?
                    }
                },
                BinaryOp::Shr => {
                    let (a, b) = (self.lower(lhs, ew)?, self.lower(rhs, ew)?);
                    let full = if ty.signed {
                        BvTerm::ashr(a, b)?
                    } else {
                        BvTerm::lshr(a, b)?
                    };
                    narrow(full, w)?
                }
                _ => self.leaf(e, ew, w)?,
            },
            ExprKind::Unary { op, operand } => match op {
                UnaryOp::Neg => BvTerm::neg(self.lower(operand, w)?),
                UnaryOp::BitNot => BvTerm::not(self.lower(operand, w)?),
                UnaryOp::Plus => self.lower(operand, w)?,
                UnaryOp::LogNot => self.leaf(e, ew, w)?,
            },
            ExprKind::Call { name, args } if name == "CFE_RESOURCEID_UNWRAP" && args.len() == 1 => {
                self.lower(&args[0], w)?
            }
            _ => self.leaf(e, ew, w)?,
        };
        Ok(fold(t))
    }

    fn leaf(&self, e: &Expr, ew: u32, w: u32) -> Result<BvTerm, LowerError> {
        let width = Width::new(ew)?;
        narrow(BvTerm::var(leaf_name(e), width), w)
    }

    fn lower_full(&self, e: &Expr) -> Option<BvTerm> {
        let w = e.ty.as_ref()?.width;
        self.lower(e, w).ok()
    }

    fn constant(&self, e: &Expr) -> Option<u64> {
        self.lower_full(e).as_ref().and_then(const_of)
    }
}

/// Flags describing where an expression sits; they pass through parens
/// and casts and reset at any other node.
#[derive(Debug, Clone, Copy, Default)]
struct Ctx {
    call_arg: bool,
    if_cond: bool,
    sub_operand: bool,
    /// Width of an enclosing narrowing cast.
    wrap_width: Option<u32>,
    /// Direct operand of a same-width unsigned-to-signed cast.
    signed_cast: bool,
}

struct RangeHint {
    text: String,
    hi: u64,
}

/// Parses `range: [lo, hi]` out of a comment.
fn parse_range(text: &str) -> Option<(u64, u64)> {
    let rest = &text[text.find("range:")? + "range:".len()..];
    let rest = rest.trim_start().strip_prefix('[')?;
    let (inner, _) = rest.split_once(']')?;
    let (lo, hi) = inner.split_once(',')?;
    Some((parse_num(lo.trim())?, parse_num(hi.trim())?))
}

fn parse_num(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

fn parse_keyed(text: &str, key: &str) -> Option<u64> {
    let rest = &text[text.find(key)? + key.len()..];
    let tok: String = rest
        .trim_start()
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect();
    parse_num(&tok)
}

fn mentions(text: &str, word: &str) -> bool {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .any(|w| w == word)
}

/// Comparison helpers of the form `return (signed)(a - b) < 0;`, mapped to
/// whether their arguments are swapped relative to `a < b`.
fn seq_helpers(unit: &TranslationUnit) -> HashMap<String, bool> {
    let mut out: HashMap<String, bool> = [("SEQ_LT".to_string(), false), ("SEQ_GT".to_string(), true)]
        .into_iter()
        .collect();
    for f in unit.functions() {
        let Some(body) = &f.body else { continue };
        let [Stmt {
            kind: StmtKind::Return(Some(ret)),
            ..
        }] = body.as_slice()
        else {
            continue;
        };
        if f.params.len() != 2 {
            continue;
        }
        let ExprKind::Binary {
            op: BinaryOp::Lt,
            lhs,
            rhs,
        } = &ret.strip_parens().kind
        else {
            continue;
        };
        if rhs.literal_value() != Some(0) {
            continue;
        }
        let ExprKind::Cast { operand, .. } = &lhs.strip_parens().kind else {
            continue;
        };
        if !lhs.strip_parens().ty.as_ref().is_some_and(|t| t.signed) {
            continue;
        }
        let ExprKind::Binary {
            op: BinaryOp::Sub,
            lhs: a,
            rhs: b,
        } = &operand.strip_implicit().kind
        else {
            continue;
        };
        let name = |e: &Expr| match &e.strip_implicit().kind {
            ExprKind::Var(n) => Some(n.clone()),
            _ => None,
        };
        let (p0, p1) = (&f.params[0].name, &f.params[1].name);
        match (name(a), name(b)) {
            (Some(x), Some(y)) if &x == p0 && &y == p1 => {
                out.insert(f.name.clone(), false);
            }
            (Some(x), Some(y)) if &x == p1 && &y == p0 => {
                out.insert(f.name.clone(), true);
            }
            _ => {}
        }
    }
    out
}

struct FnExtractor<'a> {
    function: &'a Function,
    lowerer: Lowerer<'a>,
    helpers: &'a HashMap<String, bool>,
    arrays: &'a BTreeMap<String, u64>,
    inits: BTreeMap<String, &'a Expr>,
    ranges: Vec<RangeHint>,
    capacity: u64,
    /// (minuend, subtrahend) pairs protected by an early return.
    sub_guards: BTreeSet<(String, String)>,
    bounds: BTreeMap<String, u64>,
    consumed: BTreeSet<SourceSpan>,
    flagged: BTreeSet<SourceSpan>,
    out: Vec<Candidate>,
}

impl<'a> FnExtractor<'a> {
    fn operand(&self, e: &Expr, term: BvTerm) -> Operand {
        let ty = match &e.ty {
            Some(t) if t.width == term.width() => t.clone(),
            Some(t) => IntType::new(term.width(), t.signed, format!("{}:{}", t.name, term.width())),
            None => IntType::new(term.width(), false, "?"),
        };
        Operand {
            name: match &term {
                BvTerm::Var { name, .. } => name.clone(),
                _ => leaf_name(e.strip_implicit()),
            },
            ty,
            expr: e.clone(),
            term,
        }
    }

    fn push(&mut self, kind: PatternKind, site: &SourceSpan, operands: Vec<Operand>, notes: String, severity: Severity, hints: Hints) {
        self.flagged.insert(site.clone());
        self.out.push(Candidate {
            kind,
            site: site.clone(),
            function: self.function.name.clone(),
            operands,
            notes,
            severity,
            hints,
        });
    }

    fn stmts(&mut self, body: &'a [Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &'a Stmt) {
        match &s.kind {
            StmtKind::Decl { name, init, .. } => {
                if let Some(init) = init {
                    self.expr(init, Ctx::default());
                    self.inits.insert(name.clone(), init);
                }
            }
            StmtKind::Assign { target, value, .. } => {
                self.expr(target, Ctx::default());
                self.expr(value, Ctx::default());
            }
            StmtKind::Expr(e) | StmtKind::Return(Some(e)) => self.expr(e, Ctx::default()),
            StmtKind::Return(None) | StmtKind::Skipped(_) => {}
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expr(
                    cond,
                    Ctx {
                        if_cond: true,
                        ..Ctx::default()
                    },
                );
                self.stmts(then_branch);
                if let Some(e) = else_branch {
                    self.stmts(e);
                }
                let exits = matches!(then_branch.last(), Some(Stmt { kind: StmtKind::Return(_), .. }));
                if exits && else_branch.is_none() {
                    self.record_guard(cond);
                }
            }
            StmtKind::Block(b) => self.stmts(b),
        }
    }

    /// `if (cond) return;` makes the negation of `cond` hold afterwards.
    fn record_guard(&mut self, cond: &Expr) {
        match &cond.strip_implicit().kind {
            ExprKind::Binary {
                op: BinaryOp::LogOr,
                lhs,
                rhs,
            } => {
                self.record_guard(lhs);
                self.record_guard(rhs);
            }
            ExprKind::Binary { op, lhs, rhs } if op.is_comparison() => {
                let (l, r) = (lhs.strip_implicit(), rhs.strip_implicit());
                let (lt, rt) = (leaf_name(l), leaf_name(r));
                let (lc, rc) = (self.lowerer.constant(l), self.lowerer.constant(r));
                match op {
                    BinaryOp::Gt | BinaryOp::Ge => {
                        self.sub_guards.insert((rt, lt.clone()));
                        if let (Some(c), None) = (rc, lc) {
                            let b = if *op == BinaryOp::Ge { c.checked_sub(1) } else { Some(c) };
                            if let Some(b) = b {
                                self.bounds.insert(lt, b);
                            }
                        }
                    }
                    BinaryOp::Lt | BinaryOp::Le => {
                        self.sub_guards.insert((lt, rt.clone()));
                        if let (Some(c), None) = (lc, rc) {
                            let b = if *op == BinaryOp::Le { c.checked_sub(1) } else { Some(c) };
                            if let Some(b) = b {
                                self.bounds.insert(rt, b);
                            }
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }

    fn expr(&mut self, e: &'a Expr, ctx: Ctx) {
        match &e.kind {
            ExprKind::Paren(inner) => self.expr(inner, ctx),
            ExprKind::Cast { operand, .. } => {
                let (Some(t), Some(src)) = (e.ty.as_ref(), operand.ty.as_ref()) else {
                    return self.expr(operand, Ctx::default());
                };
                let narrowing = t.width < src.width;
                let signed_cast = t.signed && !src.signed && t.width == src.width;
                if narrowing {
                    self.trunc_cast(e, operand, t.width);
                }
                if signed_cast {
                    self.sign_cast(e, operand);
                }
                let child = Ctx {
                    wrap_width: if narrowing { Some(t.width) } else { ctx.wrap_width },
                    signed_cast,
                    ..ctx
                };
                self.expr(operand, child);
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(e, *op, lhs, rhs, ctx),
            ExprKind::Unary { operand, .. } => self.expr(operand, Ctx::default()),
            ExprKind::Call { args, .. } => {
                for a in args {
                    self.expr(
                        a,
                        Ctx {
                            call_arg: true,
                            ..Ctx::default()
                        },
                    );
                }
            }
            ExprKind::Index { base, index } => {
                self.expr(base, Ctx::default());
                self.expr(index, Ctx::default());
                self.index_bound(e, base, index);
            }
            ExprKind::Member { base, .. } => self.expr(base, Ctx::default()),
            ExprKind::IntLiteral { .. } | ExprKind::Var(_) | ExprKind::SizeOf(_) => {}
        }
    }

    fn binary(&mut self, e: &'a Expr, op: BinaryOp, lhs: &'a Expr, rhs: &'a Expr, ctx: Ctx) {
        let unsigned = e.ty.as_ref().is_some_and(|t| !t.signed);
        let child = match op {
            BinaryOp::LogAnd | BinaryOp::LogOr => Ctx {
                if_cond: ctx.if_cond,
                ..Ctx::default()
            },
            _ if op.is_comparison() => Ctx {
                if_cond: ctx.if_cond,
                ..Ctx::default()
            },
            BinaryOp::Sub => Ctx {
                sub_operand: true,
                ..Ctx::default()
            },
            _ => Ctx::default(),
        };
        match op {
            BinaryOp::LogAnd => self.seq_pair(e, lhs, rhs),
            _ if op.is_comparison() && ctx.if_cond => {
                self.guard_bypass(lhs, rhs);
                self.guard_bypass(rhs, lhs);
            }
            _ => {}
        }
        self.expr(lhs, child);
        self.expr(rhs, child);
        match op {
            BinaryOp::Mul if unsigned && (ctx.call_arg || ctx.if_cond || ctx.sub_operand) => {
                self.mul_overflow(e, lhs, rhs)
            }
            BinaryOp::Add if unsigned && (ctx.call_arg || ctx.if_cond) => self.add_overflow(e, lhs, rhs),
            BinaryOp::Sub if unsigned && !ctx.signed_cast => self.sub_underflow(e, lhs, rhs, ctx),
            BinaryOp::Shl => self.shift(e, lhs, rhs),
            _ => {}
        }
    }

    fn mul_overflow(&mut self, e: &Expr, lhs: &Expr, rhs: &Expr) {
        if self.consumed.contains(&e.span) {
            return;
        }
        let Some(w) = e.ty.as_ref().map(|t| t.width) else { return };
        let (Ok(a), Ok(b)) = (self.lowerer.lower(lhs, w), self.lowerer.lower(rhs, w)) else {
            return;
        };
        let ((n_expr, n), (m_expr, m)) = match (const_of(&a), const_of(&b)) {
            (Some(_), Some(_)) => return,
            (Some(_), None) => ((rhs, b), (lhs, a)),
            _ => ((lhs, a), (rhs, b)),
        };
        if matches!(const_of(&m), Some(0 | 1)) {
            return;
        }
        let ops = vec![self.operand(n_expr, n), self.operand(m_expr, m)];
        let bound = self.bounds.get(&ops[0].name).copied();
        let notes = format!("{} * {}", ops[0].name, ops[1].name);
        let severity = if bound.is_some() { Severity::Guarded } else { Severity::Flagged };
        self.push(
            PatternKind::MulOverflow,
            &e.span,
            ops,
            notes,
            severity,
            Hints {
                bound,
                ..Hints::default()
            },
        );
    }

    fn add_overflow(&mut self, e: &Expr, lhs: &Expr, rhs: &Expr) {
        let Some(w) = e.ty.as_ref().map(|t| t.width) else { return };
        let (Ok(a), Ok(b)) = (self.lowerer.lower(lhs, w), self.lowerer.lower(rhs, w)) else {
            return;
        };
        if const_of(&a).is_some() || const_of(&b).is_some() {
            return;
        }
        let notes = format!("{} + {}", leaf_name(lhs.strip_implicit()), leaf_name(rhs.strip_implicit()));
        let ops = vec![self.operand(lhs, a), self.operand(rhs, b)];
        self.push(PatternKind::AddOverflow, &e.span, ops, notes, Severity::Flagged, Hints::default());
    }

    fn sub_underflow(&mut self, e: &Expr, lhs: &Expr, rhs: &Expr, ctx: Ctx) {
        let Some(ew) = e.ty.as_ref().map(|t| t.width) else { return };
        let w = ctx.wrap_width.map_or(ew, |ww| ww.min(ew));
        let (Ok(a), Ok(b)) = (self.lowerer.lower(lhs, w), self.lowerer.lower(rhs, w)) else {
            return;
        };
        match (const_of(&a), const_of(&b)) {
            (Some(_), Some(_)) | (_, Some(0)) => return,
            _ => {}
        }
        let key = (leaf_name(lhs.strip_implicit()), leaf_name(rhs.strip_implicit()));
        let severity = if self.sub_guards.contains(&key) {
            Severity::Guarded
        } else {
            Severity::Flagged
        };
        let notes = format!("{} - {}", key.0, key.1);
        let mut hints = Hints::default();
        let subtrahend = match &b {
            BvTerm::Binary {
                op: BinOp::Add,
                lhs: x,
                rhs: y,
            } => match (const_of(x), const_of(y)) {
                (Some(h), None) => {
                    hints.header = Some(h);
                    (**y).clone()
                }
                (None, Some(h)) => {
                    hints.header = Some(h);
                    (**x).clone()
                }
                _ => b.clone(),
            },
            _ => b.clone(),
        };
        let ops = vec![self.operand(lhs, a), self.operand(rhs, subtrahend)];
        self.push(PatternKind::SubUnderflow, &e.span, ops, notes, severity, hints);
    }

    fn shift(&mut self, e: &Expr, lhs: &Expr, rhs: &Expr) {
        let Some(t) = e.ty.as_ref() else { return };
        if !t.signed {
            return;
        }
        let Some(k) = rhs.literal_value() else { return };
        if k == 0 || k >= u64::from(t.width) {
            return;
        }
        let inner = lhs.strip_implicit();
        let Some(pre) = inner.ty.as_ref() else { return };
        let range = base_name(inner).and_then(|n| {
            self.ranges
                .iter()
                .find(|r| mentions(&r.text, n))
                .map(|r| r.hi)
        });
        let max_operand = range.unwrap_or(pre.max_value());
        if u128::from(max_operand) << k <= u128::from(t.max_signed()) {
            return;
        }
        let Ok(x) = self.lowerer.lower(lhs, t.width) else { return };
        if const_of(&x).is_some() {
            return;
        }
        let notes = format!("{} << {k}, operand max {max_operand}", leaf_name(inner));
        let ops = vec![self.operand(lhs, x)];
        self.push(
            PatternKind::ShiftSignedUB,
            &e.span,
            ops,
            notes,
            Severity::Flagged,
            Hints {
                range_max: Some(max_operand),
                shamt: Some(k as u32),
                ..Hints::default()
            },
        );
    }

    fn trunc_cast(&mut self, e: &Expr, operand: &Expr, to_width: u32) {
        let inner = operand.strip_implicit();
        if inner.ty.as_ref().is_some_and(|t| t.width <= to_width) {
            return;
        }
        let Some(x) = self.lowerer.lower_full(operand) else { return };
        if const_of(&x).is_some() {
            return;
        }
        let notes = format!("{} to {to_width} bits", leaf_name(inner));
        let ops = vec![self.operand(operand, x)];
        self.push(
            PatternKind::TruncCast,
            &e.span,
            ops,
            notes,
            Severity::Flagged,
            Hints {
                to_width: Some(to_width),
                ..Hints::default()
            },
        );
    }

    fn sign_cast(&mut self, e: &Expr, operand: &Expr) {
        let inner = operand.strip_parens();
        let ExprKind::Binary {
            op: BinaryOp::Sub,
            lhs,
            rhs,
        } = &inner.kind
        else {
            return;
        };
        let Some(w) = inner.ty.as_ref().map(|t| t.width) else { return };
        let (Ok(a), Ok(b)) = (self.lowerer.lower(lhs, w), self.lowerer.lower(rhs, w)) else {
            return;
        };
        if const_of(&a).is_some() && const_of(&b).is_some() {
            return;
        }
        self.flagged.insert(inner.span.clone());
        let notes = format!("({}) {} - {}", e.ty.as_ref().map_or("?".into(), |t| t.name.clone()), leaf_name(lhs.strip_implicit()), leaf_name(rhs.strip_implicit()));
        let ops = vec![self.operand(lhs, a), self.operand(rhs, b)];
        self.push(PatternKind::SignCastBoundary, &e.span, ops, notes, Severity::Flagged, Hints::default());
    }

    /// Normalized `(a, b)` meaning `a < b` for a comparison-helper call.
    fn seq_call(&self, e: &'a Expr) -> Option<(&'a Expr, &'a Expr)> {
        let ExprKind::Call { name, args } = &e.strip_implicit().kind else {
            return None;
        };
        let swapped = *self.helpers.get(name)?;
        match args.as_slice() {
            [a, b] if swapped => Some((b, a)),
            [a, b] => Some((a, b)),
            _ => None,
        }
    }

    fn seq_pair(&mut self, e: &Expr, lhs: &'a Expr, rhs: &'a Expr) {
        let (Some(first), Some(second)) = (self.seq_call(lhs), self.seq_call(rhs)) else {
            return;
        };
        let name = |e: &Expr| leaf_name(e.strip_implicit());
        // lt(x, y) && lt(z, x), in either order.
        let (x, y, z) = if name(first.0) == name(second.1) {
            (first.0, first.1, second.0)
        } else if name(second.0) == name(first.1) {
            (second.0, second.1, first.0)
        } else {
            return;
        };
        let (Some(tx), Some(ty), Some(tz)) = (
            self.lowerer.lower_full(x),
            self.lowerer.lower_full(y),
            self.lowerer.lower_full(z),
        ) else {
            return;
        };
        if tx.width() != ty.width() || tx.width() != tz.width() {
            return;
        }
        let notes = format!("lt({0}, {1}) && lt({2}, {0})", name(x), name(y), name(z));
        let ops = vec![self.operand(x, tx), self.operand(y, ty), self.operand(z, tz)];
        self.push(PatternKind::SeqComparePair, &e.span, ops, notes, Severity::Flagged, Hints::default());
    }

    /// `mul` compared against `other` inside an if-condition, where `mul`
    /// is an unsigned product by a constant.
    fn guard_bypass(&mut self, mul: &Expr, other: &Expr) {
        let m = mul.strip_implicit();
        let ExprKind::Binary {
            op: BinaryOp::Mul,
            lhs,
            rhs,
        } = &m.kind
        else {
            return;
        };
        let Some(t) = m.ty.as_ref().filter(|t| !t.signed) else { return };
        let (size_expr, k) = match (self.lowerer.constant(lhs), self.lowerer.constant(rhs)) {
            (None, Some(k)) => (lhs, k),
            (Some(k), None) => (rhs, k),
            _ => return,
        };
        if k < 2 || self.lowerer.constant(other).is_some() {
            return;
        }
        let (Ok(size), Ok(stack)) = (self.lowerer.lower(size_expr, t.width), self.lowerer.lower(other, t.width)) else {
            return;
        };
        self.consumed.insert(m.span.clone());
        let notes = format!(
            "guard {} vs {} * {k}",
            leaf_name(other.strip_implicit()),
            leaf_name(size_expr.strip_implicit())
        );
        let ops = vec![self.operand(size_expr, size), self.operand(other, stack)];
        let hints = Hints {
            multiplier: Some(k),
            capacity: Some(self.capacity),
            ..Hints::default()
        };
        self.push(PatternKind::GuardBypassMul, &m.span, ops, notes, Severity::Flagged, hints);
    }

    fn index_bound(&mut self, e: &Expr, base: &Expr, index: &Expr) {
        let idx = index.strip_implicit();
        let fed = self.flagged.contains(&idx.span)
            || match &idx.kind {
                ExprKind::Var(v) => self
                    .inits
                    .get(v)
                    .is_some_and(|init| self.flagged.contains(&init.strip_implicit().span)),
                _ => false,
            };
        if !fed {
            return;
        }
        let Some(term) = self.lowerer.lower_full(index) else { return };
        let capacity = base_name(base).and_then(|n| self.arrays.get(n).copied());
        let notes = format!("{}[{}]", leaf_name(base), leaf_name(idx));
        let ops = vec![self.operand(index, term)];
        self.push(
            PatternKind::IndexBound,
            &e.span,
            ops,
            notes,
            Severity::Flagged,
            Hints {
                capacity,
                ..Hints::default()
            },
        );
    }
}

fn array_len(ty: &CType) -> Option<u64> {
    match ty {
        CType::Array(_, n) => *n,
        _ => None,
    }
}

/// Extracts candidates from every function body, in source order. Types
/// were already resolved against the data model when the unit was loaded.
pub fn extract(unit: &TranslationUnit, _model: DataModel) -> Vec<Candidate> {
    let helpers = seq_helpers(unit);
    let global_arrays: BTreeMap<String, u64> = unit
        .globals()
        .filter_map(|g| Some((g.name.clone(), array_len(&g.ty)?)))
        .collect();

    let mut out = Vec::new();
    let mut prev_end = 0usize;
    for item in &unit.items {
        let span_end = match item {
            Item::Function(f) => f.span.end(),
            Item::Global(g) => g.span.end(),
            Item::Struct(s) => s.span.end(),
            Item::Typedef(t) => t.span.end(),
            Item::Skipped(s) => s.span.end(),
        };
        if let Item::Function(f @ Function { body: Some(body), .. }) = item {
            out.extend(extract_function(unit, f, body, &helpers, &global_arrays, prev_end));
        }
        prev_end = span_end;
    }
    out.sort_by(|a, b| {
        (a.site.line, a.site.column, a.kind, a.site.length).cmp(&(b.site.line, b.site.column, b.kind, b.site.length))
    });
    out.dedup_by(|a, b| a.kind == b.kind && a.site == b.site);
    out
}

fn extract_function(
    unit: &TranslationUnit,
    f: &Function,
    body: &[Stmt],
    helpers: &HashMap<String, bool>,
    global_arrays: &BTreeMap<String, u64>,
    prev_end: usize,
) -> Vec<Candidate> {
    let mut arrays = global_arrays.clone();
    for p in &f.params {
        if let Some(n) = array_len(&p.ty) {
            arrays.insert(p.name.clone(), n);
        }
    }
    let mut assigned = BTreeSet::new();
    let mut decls: Vec<(&String, &Expr)> = Vec::new();
    let mut indexed = BTreeSet::new();
    for s in body {
        s.walk(&mut |s| {
            match &s.kind {
                StmtKind::Decl { name, ty, init } => {
                    if let Some(n) = array_len(ty) {
                        arrays.insert(name.clone(), n);
                    }
                    if let Some(init) = init {
                        decls.push((name, init));
                    }
                }
                StmtKind::Assign { target, .. } => {
                    if let ExprKind::Var(n) = &target.strip_parens().kind {
                        assigned.insert(n.clone());
                    }
                }
                _ => {}
            }
            for e in s.exprs() {
                e.walk(&mut |e| {
                    if let ExprKind::Index { base, .. } = &e.kind {
                        if let Some(n) = base_name(base) {
                            indexed.insert(n.to_string());
                        }
                    }
                });
            }
        });
    }
    let mut consts = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (name, init) in decls {
        // A name declared twice is not treated as a constant.
        if !seen.insert(name.clone()) {
            consts.remove(name);
            assigned.insert(name.clone());
            continue;
        }
        if assigned.contains(name) {
            continue;
        }
        if let Some(v) = init.literal_value() {
            consts.insert(name.clone(), v);
        }
    }

    let comments: Vec<&str> = unit
        .comments
        .iter()
        .filter(|c| c.span.offset >= prev_end && c.span.offset < f.span.end())
        .map(|c| c.text.as_str())
        .collect();
    let ranges = comments
        .iter()
        .filter_map(|t| {
            parse_range(t).map(|(_, hi)| RangeHint {
                text: t.to_string(),
                hi,
            })
        })
        .collect();
    let capacity = comments
        .iter()
        .find_map(|t| parse_keyed(t, "capacity:"))
        .or_else(|| indexed.iter().filter_map(|n| arrays.get(n).copied()).max())
        .unwrap_or(crate::encode::DEFAULT_STACK_CAP);

    let mut x = FnExtractor {
        function: f,
        lowerer: Lowerer { consts: &consts },
        helpers,
        arrays: &arrays,
        inits: BTreeMap::new(),
        ranges,
        capacity,
        sub_guards: BTreeSet::new(),
        bounds: BTreeMap::new(),
        consumed: BTreeSet::new(),
        flagged: BTreeSet::new(),
        out: Vec::new(),
    };
    x.stmts(body);
    x.out
}
