//! Fixed-width bitvector terms and quantifier-free formulas over them.
//!
//! All arithmetic is two's-complement modulo `2^width`. Terms never exceed
//! 64 bits, so concrete values fit in a `u64`. Declared variables use one of
//! the supported machine widths (8, 16, 32, 64); intermediate terms produced
//! by `Extract`/`ZeroExt`/`SignExt` may have any width in `1..=64`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Maximum width of any term.
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BvError {
    #[error("unsupported variable width {0} (expected 8, 16, 32 or 64)")]
    UnsupportedWidth(u32),
    #[error("term width {0} out of range 1..=64")]
    BadTermWidth(u32),
    #[error("width mismatch: {lhs} vs {rhs} in {context}")]
    WidthMismatch { lhs: u32, rhs: u32, context: String },
    #[error("constant {value:#x} does not fit in {width} bits")]
    ConstTooWide { value: u64, width: u32 },
    #[error("extract [{hi}:{lo}] invalid for a {width}-bit operand")]
    BadExtract { hi: u32, lo: u32, width: u32 },
    #[error("variable `{name}` used at widths {first} and {second}")]
    InconsistentVar { name: String, first: u32, second: u32 },
    #[error("definition `{0}` is defined twice or shadows a free variable")]
    DuplicateDefinition(String),
    #[error("missing value for variable `{0}`")]
    MissingVar(String),
    #[error("binding for unknown variable `{0}`")]
    UnknownVar(String),
}

/// A supported machine width for declared variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Width(u32);

impl Width {
    pub const W8: Width = Width(8);
    pub const W16: Width = Width(16);
    pub const W32: Width = Width(32);
    pub const W64: Width = Width(64);

    pub fn new(bits: u32) -> Result<Self, BvError> {
        match bits {
            8 | 16 | 32 | 64 => Ok(Width(bits)),
            other => Err(BvError::UnsupportedWidth(other)),
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn mask(self) -> u64 {
        mask(self.0)
    }

    pub fn max_unsigned(self) -> u64 {
        mask(self.0)
    }

    pub fn max_signed(self) -> u64 {
        mask(self.0) >> 1
    }

    pub fn sign_bit(self) -> u64 {
        1u64 << (self.0 - 1)
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// All-ones mask of `width` bits.
pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Interprets the low `width` bits of `value` as a signed integer.
pub fn to_signed(value: u64, width: u32) -> i64 {
    let shift = 64 - width;
    ((value << shift) as i64) >> shift
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Shl,
    LShr,
    AShr,
    Or,
    And,
}

impl BinOp {
    pub fn smt_name(self) -> &'static str {
        match self {
            BinOp::Add => "bvadd",
            BinOp::Sub => "bvsub",
            BinOp::Mul => "bvmul",
            BinOp::Shl => "bvshl",
            BinOp::LShr => "bvlshr",
            BinOp::AShr => "bvashr",
            BinOp::Or => "bvor",
            BinOp::And => "bvand",
        }
    }

    fn short_name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Shl => "shl",
            BinOp::LShr => "lshr",
            BinOp::AShr => "ashr",
            BinOp::Or => "or",
            BinOp::And => "and",
        }
    }

    /// Concrete semantics on `width`-bit operands.
    pub fn apply(self, a: u64, b: u64, width: u32) -> u64 {
        let m = mask(width);
        let r = match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Shl => {
                if b >= width as u64 {
                    0
                } else {
                    a << b
                }
            }
            BinOp::LShr => {
                if b >= width as u64 {
                    0
                } else {
                    a >> b
                }
            }
            BinOp::AShr => {
                let sa = to_signed(a, width);
                let amount = b.min(width as u64 - 1);
                (sa >> amount) as u64
            }
            BinOp::Or => a | b,
            BinOp::And => a & b,
        };
        r & m
    }
}

/// A bitvector-valued term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BvTerm {
    Const { value: u64, width: u32 },
    Var { name: String, width: u32 },
    Binary { op: BinOp, lhs: Box<BvTerm>, rhs: Box<BvTerm> },
    Not(Box<BvTerm>),
    ZeroExt { extra: u32, arg: Box<BvTerm> },
    SignExt { extra: u32, arg: Box<BvTerm> },
    Extract { hi: u32, lo: u32, arg: Box<BvTerm> },
}

fn check_term_width(width: u32) -> Result<(), BvError> {
    if (1..=MAX_WIDTH).contains(&width) {
        Ok(())
    } else {
        Err(BvError::BadTermWidth(width))
    }
}

impl BvTerm {
    pub fn constant(value: u64, width: u32) -> Result<Self, BvError> {
        check_term_width(width)?;
        if value & !mask(width) != 0 {
            return Err(BvError::ConstTooWide { value, width });
        }
        Ok(BvTerm::Const { value, width })
    }

    /// Constant with `value` reduced modulo `2^width`.
    pub fn constant_wrapping(value: u64, width: u32) -> Self {
        BvTerm::Const {
            value: value & mask(width),
            width,
        }
    }

    pub fn var(name: impl Into<String>, width: Width) -> Self {
        BvTerm::Var {
            name: name.into(),
            width: width.bits(),
        }
    }

    /// Reference to a defined (non-free) variable, whose width may be any term width.
    pub fn defined(name: impl Into<String>, width: u32) -> Self {
        BvTerm::Var {
            name: name.into(),
            width,
        }
    }

    pub fn binary(op: BinOp, lhs: BvTerm, rhs: BvTerm) -> Result<Self, BvError> {
        let (lw, rw) = (lhs.width(), rhs.width());
        if lw != rw {
            return Err(BvError::WidthMismatch {
                lhs: lw,
                rhs: rw,
                context: op.short_name().to_string(),
            });
        }
        Ok(BvTerm::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }

    pub fn add(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::Add, a, b)
    }
    pub fn sub(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::Sub, a, b)
    }
    pub fn mul(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::Mul, a, b)
    }
    pub fn shl(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::Shl, a, b)
    }
    pub fn lshr(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::LShr, a, b)
    }
    pub fn ashr(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::AShr, a, b)
    }
    pub fn or(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::Or, a, b)
    }
    pub fn and(a: BvTerm, b: BvTerm) -> Result<Self, BvError> {
        Self::binary(BinOp::And, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: BvTerm) -> Self {
        BvTerm::Not(Box::new(a))
    }

    /// Two's-complement negation, `~a + 1`.
    pub fn neg(a: BvTerm) -> Self {
        let w = a.width();
        BvTerm::Binary {
            op: BinOp::Add,
            lhs: Box::new(BvTerm::not(a)),
            rhs: Box::new(BvTerm::constant_wrapping(1, w)),
        }
    }

    pub fn zero_ext(extra: u32, a: BvTerm) -> Result<Self, BvError> {
        check_term_width(a.width() + extra)?;
        Ok(BvTerm::ZeroExt {
            extra,
            arg: Box::new(a),
        })
    }

    pub fn sign_ext(extra: u32, a: BvTerm) -> Result<Self, BvError> {
        check_term_width(a.width() + extra)?;
        Ok(BvTerm::SignExt {
            extra,
            arg: Box::new(a),
        })
    }

    pub fn extract(hi: u32, lo: u32, a: BvTerm) -> Result<Self, BvError> {
        let w = a.width();
        if hi < lo || hi >= w {
            return Err(BvError::BadExtract { hi, lo, width: w });
        }
        Ok(BvTerm::Extract {
            hi,
            lo,
            arg: Box::new(a),
        })
    }

    pub fn width(&self) -> u32 {
        match self {
            BvTerm::Const { width, .. } | BvTerm::Var { width, .. } => *width,
            BvTerm::Binary { lhs, .. } => lhs.width(),
            BvTerm::Not(a) => a.width(),
            BvTerm::ZeroExt { extra, arg } | BvTerm::SignExt { extra, arg } => arg.width() + extra,
            BvTerm::Extract { hi, lo, .. } => hi - lo + 1,
        }
    }

    /// Checks the structural invariants of a term that may have been built
    /// directly from the enum variants.
    pub fn validate(&self) -> Result<(), BvError> {
        match self {
            BvTerm::Const { value, width } => {
                check_term_width(*width)?;
                if value & !mask(*width) != 0 {
                    return Err(BvError::ConstTooWide {
                        value: *value,
                        width: *width,
                    });
                }
                Ok(())
            }
            BvTerm::Var { width, .. } => check_term_width(*width),
            BvTerm::Binary { op, lhs, rhs } => {
                lhs.validate()?;
                rhs.validate()?;
                if lhs.width() != rhs.width() {
                    return Err(BvError::WidthMismatch {
                        lhs: lhs.width(),
                        rhs: rhs.width(),
                        context: op.short_name().to_string(),
                    });
                }
                Ok(())
            }
            BvTerm::Not(a) => a.validate(),
            BvTerm::ZeroExt { extra, arg } | BvTerm::SignExt { extra, arg } => {
                arg.validate()?;
                check_term_width(arg.width() + extra)
            }
            BvTerm::Extract { hi, lo, arg } => {
                arg.validate()?;
                if hi < lo || *hi >= arg.width() {
                    return Err(BvError::BadExtract {
                        hi: *hi,
                        lo: *lo,
                        width: arg.width(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Visits every `Var` node as `(name, width)`.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str, u32)) {
        match self {
            BvTerm::Const { .. } => {}
            BvTerm::Var { name, width } => f(name, *width),
            BvTerm::Binary { lhs, rhs, .. } => {
                lhs.for_each_var(f);
                rhs.for_each_var(f);
            }
            BvTerm::Not(a)
            | BvTerm::ZeroExt { arg: a, .. }
            | BvTerm::SignExt { arg: a, .. }
            | BvTerm::Extract { arg: a, .. } => a.for_each_var(f),
        }
    }

    /// Replaces variables by terms. `f` returns `Some(replacement)` for
    /// variables that should be rewritten.
    pub fn map_vars(&self, f: &impl Fn(&str, u32) -> Option<BvTerm>) -> BvTerm {
        match self {
            BvTerm::Const { .. } => self.clone(),
            BvTerm::Var { name, width } => f(name, *width).unwrap_or_else(|| self.clone()),
            BvTerm::Binary { op, lhs, rhs } => BvTerm::Binary {
                op: *op,
                lhs: Box::new(lhs.map_vars(f)),
                rhs: Box::new(rhs.map_vars(f)),
            },
            BvTerm::Not(a) => BvTerm::Not(Box::new(a.map_vars(f))),
            BvTerm::ZeroExt { extra, arg } => BvTerm::ZeroExt {
                extra: *extra,
                arg: Box::new(arg.map_vars(f)),
            },
            BvTerm::SignExt { extra, arg } => BvTerm::SignExt {
                extra: *extra,
                arg: Box::new(arg.map_vars(f)),
            },
            BvTerm::Extract { hi, lo, arg } => BvTerm::Extract {
                hi: *hi,
                lo: *lo,
                arg: Box::new(arg.map_vars(f)),
            },
        }
    }

    /// Evaluates the term under `a`. Values in `a` are taken modulo the
    /// variable's width.
    pub fn eval(&self, a: &Assignment) -> Result<u64, BvError> {
        eval_term(self, a)
    }
}

/// Concrete evaluation with exact modular semantics.
pub fn eval_term(term: &BvTerm, a: &Assignment) -> Result<u64, BvError> {
    Ok(match term {
        BvTerm::Const { value, .. } => *value,
        BvTerm::Var { name, width } => {
            a.get(name).ok_or_else(|| BvError::MissingVar(name.clone()))? & mask(*width)
        }
        BvTerm::Binary { op, lhs, rhs } => {
            let w = lhs.width();
            op.apply(eval_term(lhs, a)?, eval_term(rhs, a)?, w)
        }
        BvTerm::Not(x) => !eval_term(x, a)? & mask(x.width()),
        BvTerm::ZeroExt { arg, .. } => eval_term(arg, a)?,
        BvTerm::SignExt { extra, arg } => {
            let w = arg.width();
            (to_signed(eval_term(arg, a)?, w) as u64) & mask(w + extra)
        }
        BvTerm::Extract { hi, lo, arg } => (eval_term(arg, a)? >> lo) & mask(hi - lo + 1),
    })
}

impl fmt::Display for BvTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BvTerm::Const { value, width } => write!(f, "{value:#x}#{width}"),
            BvTerm::Var { name, width } => write!(f, "{name}#{width}"),
            BvTerm::Binary { op, lhs, rhs } => write!(f, "({} {lhs} {rhs})", op.short_name()),
            BvTerm::Not(a) => write!(f, "(not {a})"),
            BvTerm::ZeroExt { extra, arg } => write!(f, "(zext {extra} {arg})"),
            BvTerm::SignExt { extra, arg } => write!(f, "(sext {extra} {arg})"),
            BvTerm::Extract { hi, lo, arg } => write!(f, "(extract {hi} {lo} {arg})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Ne,
    Ult,
    Ule,
    Ugt,
    Uge,
}

impl Relation {
    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            Relation::Eq => a == b,
            Relation::Ne => a != b,
            Relation::Ult => a < b,
            Relation::Ule => a <= b,
            Relation::Ugt => a > b,
            Relation::Uge => a >= b,
        }
    }

    fn short_name(self) -> &'static str {
        match self {
            Relation::Eq => "eq",
            Relation::Ne => "ne",
            Relation::Ult => "ult",
            Relation::Ule => "ule",
            Relation::Ugt => "ugt",
            Relation::Uge => "uge",
        }
    }
}

/// A relation between two terms of equal width.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BvAtom {
    pub relation: Relation,
    pub lhs: BvTerm,
    pub rhs: BvTerm,
}

impl BvAtom {
    pub fn new(relation: Relation, lhs: BvTerm, rhs: BvTerm) -> Result<Self, BvError> {
        if lhs.width() != rhs.width() {
            return Err(BvError::WidthMismatch {
                lhs: lhs.width(),
                rhs: rhs.width(),
                context: relation.short_name().to_string(),
            });
        }
        Ok(BvAtom { relation, lhs, rhs })
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, BvError> {
        Ok(self
            .relation
            .holds(eval_term(&self.lhs, a)?, eval_term(&self.rhs, a)?))
    }
}

impl fmt::Display for BvAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.relation.short_name(), self.lhs, self.rhs)
    }
}

/// Boolean skeleton over atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Prop {
    Atom(BvAtom),
    And(Vec<Prop>),
    Or(Vec<Prop>),
    Not(Box<Prop>),
}

macro_rules! atom_ctor {
    ($name:ident, $rel:expr) => {
        pub fn $name(lhs: BvTerm, rhs: BvTerm) -> Result<Prop, BvError> {
            Ok(Prop::Atom(BvAtom::new($rel, lhs, rhs)?))
        }
    };
}

impl Prop {
    pub fn tt() -> Prop {
        Prop::And(Vec::new())
    }

    pub fn ff() -> Prop {
        Prop::Or(Vec::new())
    }

    atom_ctor!(eq, Relation::Eq);
    atom_ctor!(ne, Relation::Ne);
    atom_ctor!(ult, Relation::Ult);
    atom_ctor!(ule, Relation::Ule);
    atom_ctor!(ugt, Relation::Ugt);
    atom_ctor!(uge, Relation::Uge);

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Prop) -> Prop {
        Prop::Not(Box::new(p))
    }

    /// Conjunction that flattens nested `And`s.
    pub fn all(parts: impl IntoIterator<Item = Prop>) -> Prop {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Prop::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        Prop::And(out)
    }

    pub fn any(parts: impl IntoIterator<Item = Prop>) -> Prop {
        Prop::Or(parts.into_iter().collect())
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, BvError> {
        Ok(match self {
            Prop::Atom(atom) => atom.eval(a)?,
            Prop::And(ps) => {
                for p in ps {
                    if !p.eval(a)? {
                        return Ok(false);
                    }
                }
                true
            }
            Prop::Or(ps) => {
                for p in ps {
                    if p.eval(a)? {
                        return Ok(true);
                    }
                }
                false
            }
            Prop::Not(p) => !p.eval(a)?,
        })
    }

    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a BvAtom)) {
        match self {
            Prop::Atom(a) => f(a),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().for_each(|p| p.for_each_atom(f)),
            Prop::Not(p) => p.for_each_atom(f),
        }
    }

    pub fn map_terms(&self, f: &impl Fn(&BvTerm) -> BvTerm) -> Prop {
        match self {
            Prop::Atom(a) => Prop::Atom(BvAtom {
                relation: a.relation,
                lhs: f(&a.lhs),
                rhs: f(&a.rhs),
            }),
            Prop::And(ps) => Prop::And(ps.iter().map(|p| p.map_terms(f)).collect()),
            Prop::Or(ps) => Prop::Or(ps.iter().map(|p| p.map_terms(f)).collect()),
            Prop::Not(p) => Prop::Not(Box::new(p.map_terms(f))),
        }
    }

    pub fn atom_count(&self) -> usize {
        let mut n = 0;
        self.for_each_atom(&mut |_| n += 1);
        n
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop::Atom(a) => write!(f, "{a}"),
            Prop::And(ps) if ps.is_empty() => write!(f, "true"),
            Prop::Or(ps) if ps.is_empty() => write!(f, "false"),
            Prop::And(ps) | Prop::Or(ps) => {
                let head = if matches!(self, Prop::And(_)) { "and" } else { "or" };
                write!(f, "({head}")?;
                for p in ps {
                    write!(f, " {p}")?;
                }
                write!(f, ")")
            }
            Prop::Not(p) => write!(f, "(not {p})"),
        }
    }
}

/// A named intermediate value. Later definitions and the formula body may
/// refer to it through `BvTerm::Var` with the definition's width.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Definition {
    pub name: String,
    pub term: BvTerm,
}

/// Concrete values for variables, keyed by name.
pub type Assignment = BTreeMap<String, u64>;

/// A quantifier-free bitvector formula with optional defined variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    prop: Prop,
    definitions: Vec<Definition>,
    free_vars: BTreeMap<String, Width>,
}

impl Formula {
    pub fn new(prop: Prop) -> Result<Self, BvError> {
        Self::with_definitions(Vec::new(), prop)
    }

    /// Builds a formula, checking widths and computing the free variables.
    /// Each definition may refer only to free variables and earlier
    /// definitions.
    pub fn with_definitions(definitions: Vec<Definition>, prop: Prop) -> Result<Self, BvError> {
        let mut defined: BTreeMap<String, u32> = BTreeMap::new();
        let mut free: BTreeMap<String, u32> = BTreeMap::new();
        let record = |name: &str,
                          width: u32,
                          defined: &BTreeMap<String, u32>,
                          free: &mut BTreeMap<String, u32>|
         -> Result<(), BvError> {
            if let Some(&dw) = defined.get(name) {
                if dw != width {
                    return Err(BvError::InconsistentVar {
                        name: name.to_string(),
                        first: dw,
                        second: width,
                    });
                }
                return Ok(());
            }
            match free.get(name) {
                Some(&fw) if fw != width => Err(BvError::InconsistentVar {
                    name: name.to_string(),
                    first: fw,
                    second: width,
                }),
                Some(_) => Ok(()),
                None => {
                    Width::new(width)?;
                    free.insert(name.to_string(), width);
                    Ok(())
                }
            }
        };

        for def in &definitions {
            def.term.validate()?;
            let mut err = None;
            def.term.for_each_var(&mut |n, w| {
                if err.is_none() {
                    if let Err(e) = record(n, w, &defined, &mut free) {
                        err = Some(e);
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            if defined.contains_key(&def.name) || free.contains_key(&def.name) {
                return Err(BvError::DuplicateDefinition(def.name.clone()));
            }
            defined.insert(def.name.clone(), def.term.width());
        }

        let mut err = None;
        prop.for_each_atom(&mut |atom| {
            if err.is_some() {
                return;
            }
            if let Err(e) = atom.lhs.validate().and_then(|_| atom.rhs.validate()) {
                err = Some(e);
                return;
            }
            if atom.lhs.width() != atom.rhs.width() {
                err = Some(BvError::WidthMismatch {
                    lhs: atom.lhs.width(),
                    rhs: atom.rhs.width(),
                    context: atom.relation.short_name().to_string(),
                });
                return;
            }
            for t in [&atom.lhs, &atom.rhs] {
                t.for_each_var(&mut |n, w| {
                    if err.is_none() {
                        if let Err(e) = record(n, w, &defined, &mut free) {
                            err = Some(e);
                        }
                    }
                });
            }
        });
        if let Some(e) = err {
            return Err(e);
        }

        let free_vars = free
            .into_iter()
            .map(|(n, w)| (n, Width(w)))
            .collect();
        Ok(Formula {
            prop,
            definitions,
            free_vars,
        })
    }

    pub fn prop(&self) -> &Prop {
        &self.prop
    }

    pub fn definitions(&self) -> &[Definition] {
        &self.definitions
    }

    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name == name)
    }

    pub fn free_vars(&self) -> &BTreeMap<String, Width> {
        &self.free_vars
    }

    /// Free or defined variable names with their widths.
    pub fn all_vars(&self) -> BTreeMap<String, u32> {
        let mut out: BTreeMap<String, u32> = self
            .free_vars
            .iter()
            .map(|(n, w)| (n.clone(), w.bits()))
            .collect();
        for d in &self.definitions {
            out.insert(d.name.clone(), d.term.width());
        }
        out
    }

    /// Width of a free or defined variable.
    pub fn var_width(&self, name: &str) -> Option<u32> {
        if let Some(w) = self.free_vars.get(name) {
            return Some(w.bits());
        }
        self.definition(name).map(|d| d.term.width())
    }

    /// Extends `a` with the values of all definitions.
    pub fn eval_definitions(&self, a: &Assignment) -> Result<Assignment, BvError> {
        let mut full = a.clone();
        for d in &self.definitions {
            let v = eval_term(&d.term, &full)?;
            full.insert(d.name.clone(), v);
        }
        Ok(full)
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, BvError> {
        eval_formula(self, a)
    }

    /// Conjoins extra constraints, keeping the definitions.
    pub fn and(&self, extra: Prop) -> Result<Formula, BvError> {
        Formula::with_definitions(
            self.definitions.clone(),
            Prop::all([self.prop.clone(), extra]),
        )
    }

    /// Total, well-formed assignment check: every free var assigned and
    /// in range.
    pub fn check_assignment(&self, a: &Assignment) -> Result<(), BvError> {
        for (name, w) in &self.free_vars {
            match a.get(name) {
                None => return Err(BvError::MissingVar(name.clone())),
                Some(&v) if v & !w.mask() != 0 => {
                    return Err(BvError::ConstTooWide {
                        value: v,
                        width: w.bits(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.definitions {
            write!(f, "(define {} {}) ", d.name, d.term)?;
        }
        write!(f, "{}", self.prop)
    }
}

/// Boolean semantics of `f` under `a`; definitions are evaluated first.
pub fn eval_formula(f: &Formula, a: &Assignment) -> Result<bool, BvError> {
    if f.definitions.is_empty() {
        f.prop.eval(a)
    } else {
        f.prop.eval(&f.eval_definitions(a)?)
    }
}

/// Replaces bound free variables by constants.
pub fn substitute(f: &Formula, bindings: &Assignment) -> Result<Formula, BvError> {
    for (name, &value) in bindings {
        let w = f
            .free_vars
            .get(name)
            .ok_or_else(|| BvError::UnknownVar(name.clone()))?;
        if value & !w.mask() != 0 {
            return Err(BvError::ConstTooWide {
                value,
                width: w.bits(),
            });
        }
    }
    if bindings.is_empty() {
        return Ok(f.clone());
    }
    let defined: BTreeSet<&str> = f.definitions.iter().map(|d| d.name.as_str()).collect();
    let replace = |name: &str, width: u32| -> Option<BvTerm> {
        if defined.contains(name) {
            return None;
        }
        bindings
            .get(name)
            .map(|&value| BvTerm::Const { value, width })
    };
    let definitions = f
        .definitions
        .iter()
        .map(|d| Definition {
            name: d.name.clone(),
            term: d.term.map_vars(&replace),
        })
        .collect();
    let prop = f.prop.map_terms(&|t| t.map_vars(&replace));
    Formula::with_definitions(definitions, prop)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v32(name: &str) -> BvTerm {
        BvTerm::var(name, Width::W32)
    }

    fn c32(v: u64) -> BvTerm {
        BvTerm::constant(v, 32).unwrap()
    }

    fn assign(pairs: &[(&str, u64)]) -> Assignment {
        pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn sub_wraps_both_directions() {
        let a = Assignment::new();
        let t = BvTerm::sub(c32(0x8000_0000), c32(0)).unwrap();
        assert_eq!(eval_term(&t, &a).unwrap(), 0x8000_0000);
        let t = BvTerm::sub(c32(0), c32(0x8000_0000)).unwrap();
        assert_eq!(eval_term(&t, &a).unwrap(), 0x8000_0000);
    }

    #[test]
    fn sub_self_cancels() {
        let t = BvTerm::sub(v32("x"), v32("x")).unwrap();
        for x in [0u64, 1, 0x7fff_ffff, 0xffff_ffff] {
            assert_eq!(eval_term(&t, &assign(&[("x", x)])).unwrap(), 0);
        }
    }

    #[test]
    fn mul_reduces_mod_width() {
        let t = BvTerm::mul(c32(0x2222_221e), c32(16)).unwrap();
        assert_eq!(eval_term(&t, &Assignment::new()).unwrap(), 0x2222_21e0);
    }

    #[test]
    fn oversized_shifts_are_total() {
        let a = Assignment::new();
        let x = BvTerm::constant(0x80, 8).unwrap();
        let big = BvTerm::constant(9, 8).unwrap();
        assert_eq!(eval_term(&BvTerm::shl(x.clone(), big.clone()).unwrap(), &a).unwrap(), 0);
        assert_eq!(eval_term(&BvTerm::lshr(x.clone(), big.clone()).unwrap(), &a).unwrap(), 0);
        assert_eq!(eval_term(&BvTerm::ashr(x, big).unwrap(), &a).unwrap(), 0xff);
        let pos = BvTerm::constant(0x40, 8).unwrap();
        let eight = BvTerm::constant(8, 8).unwrap();
        assert_eq!(eval_term(&BvTerm::ashr(pos, eight).unwrap(), &a).unwrap(), 0);
    }

    #[test]
    fn extension_and_extract() {
        let a = Assignment::new();
        let x = BvTerm::constant(0x0000_0001_0000_0000, 64).unwrap();
        let lo = BvTerm::extract(31, 0, x.clone()).unwrap();
        assert_eq!(lo.width(), 32);
        assert_eq!(eval_term(&lo, &a).unwrap(), 0);
        let back = BvTerm::zero_ext(32, lo).unwrap();
        assert_eq!(back.width(), 64);
        assert_eq!(eval_term(&back, &a).unwrap(), 0);
        let neg = BvTerm::constant(0xf0, 8).unwrap();
        let sx = BvTerm::sign_ext(8, neg).unwrap();
        assert_eq!(eval_term(&sx, &a).unwrap(), 0xfff0);
    }

    #[test]
    fn constructors_reject_malformed_terms() {
        assert!(BvTerm::constant(0x100, 8).is_err());
        assert!(BvTerm::add(v32("x"), BvTerm::var("y", Width::W16)).is_err());
        assert!(BvTerm::extract(32, 0, v32("x")).is_err());
        assert!(BvTerm::extract(3, 4, v32("x")).is_err());
        assert!(BvTerm::zero_ext(33, v32("x")).is_err());
        assert!(Width::new(12).is_err());
    }

    #[test]
    fn missing_var_is_reported() {
        let t = BvTerm::add(v32("x"), v32("y")).unwrap();
        assert_eq!(
            eval_term(&t, &assign(&[("x", 1)])),
            Err(BvError::MissingVar("y".into()))
        );
    }

    #[test]
    fn ne_self_is_false() {
        let f = Formula::new(Prop::ne(v32("x"), v32("x")).unwrap()).unwrap();
        for x in [0u64, 5, 0xffff_ffff] {
            assert!(!eval_formula(&f, &assign(&[("x", x)])).unwrap());
        }
    }

    #[test]
    fn free_vars_track_tree_and_exclude_definitions() {
        let diff = BvTerm::sub(v32("a"), v32("b")).unwrap();
        let f = Formula::with_definitions(
            vec![Definition {
                name: "diff".into(),
                term: diff,
            }],
            Prop::uge(BvTerm::defined("diff", 32), c32(0x8000_0000)).unwrap(),
        )
        .unwrap();
        let names: Vec<_> = f.free_vars().keys().cloned().collect();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(f.var_width("diff"), Some(32));
        assert!(eval_formula(&f, &assign(&[("a", 0), ("b", 1)])).unwrap());
        assert!(!eval_formula(&f, &assign(&[("a", 1), ("b", 0)])).unwrap());
    }

    #[test]
    fn inconsistent_var_widths_rejected() {
        let p = Prop::all([
            Prop::eq(v32("x"), c32(0)).unwrap(),
            Prop::eq(BvTerm::var("x", Width::W8), BvTerm::constant(0, 8).unwrap()).unwrap(),
        ]);
        assert!(matches!(Formula::new(p), Err(BvError::InconsistentVar { .. })));
    }

    #[test]
    fn substitute_shrinks_free_vars() {
        let p = Prop::all([
            Prop::uge(BvTerm::sub(v32("s"), v32("r")).unwrap(), c32(0x8000_0000)).unwrap(),
            Prop::uge(BvTerm::sub(v32("u"), v32("s")).unwrap(), c32(0x8000_0000)).unwrap(),
        ]);
        let f = Formula::new(p).unwrap();
        assert_eq!(f.free_vars().len(), 3);
        let g = substitute(&f, &assign(&[("r", 0)])).unwrap();
        assert_eq!(g.free_vars().len(), 2);
        assert_eq!(substitute(&f, &Assignment::new()).unwrap(), f);
        assert!(matches!(
            substitute(&f, &assign(&[("zz", 0)])),
            Err(BvError::UnknownVar(_))
        ));
        assert!(matches!(
            substitute(&f, &assign(&[("r", 1 << 32)])),
            Err(BvError::ConstTooWide { .. })
        ));
    }

    #[test]
    fn canonical_text_form() {
        let t = BvTerm::sub(v32("sack_start"), v32("rcv_nxt")).unwrap();
        assert_eq!(t.to_string(), "(sub sack_start#32 rcv_nxt#32)");
        let a = Prop::uge(t, c32(0x8000_0000)).unwrap();
        assert_eq!(
            a.to_string(),
            "(uge (sub sack_start#32 rcv_nxt#32) 0x80000000#32)"
        );
    }
}
