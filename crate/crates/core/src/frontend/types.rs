use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::ast::*;
use super::{FrontendError, SourceSpan};

/// A resolved C integer type. `name` is the spelling the program used (or
/// the canonical keyword spelling) and is informational only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct IntType {
    pub width: u32,
    pub signed: bool,
    pub name: String,
}

impl IntType {
    pub fn new(width: u32, signed: bool, name: impl Into<String>) -> IntType {
        IntType {
            width,
            signed,
            name: name.into(),
        }
    }

    pub fn same_repr(&self, other: &IntType) -> bool {
        self.width == other.width && self.signed == other.signed
    }

    pub fn max_signed(&self) -> u64 {
        (1u64 << (self.width - 1)) - 1
    }

    /// Largest value representable in this type, as an unsigned number.
    pub fn max_value(&self) -> u64 {
        if self.signed {
            self.max_signed()
        } else if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    pub fn fits(&self, v: u64) -> bool {
        v <= self.max_value()
    }
}

impl fmt::Display for IntType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Target data model: widths of `long` and pointers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DataModel {
    #[default]
    Ilp32,
    Lp64,
}

impl DataModel {
    pub fn int_width(self) -> u32 {
        32
    }

    pub fn long_width(self) -> u32 {
        match self {
            DataModel::Ilp32 => 32,
            DataModel::Lp64 => 64,
        }
    }

    pub fn pointer_width(self) -> u32 {
        self.long_width()
    }

    pub fn label(self) -> &'static str {
        match self {
            DataModel::Ilp32 => "ILP32",
            DataModel::Lp64 => "LP64",
        }
    }

    pub fn int(self) -> IntType {
        IntType::new(32, true, "int")
    }

    pub fn size_t(self) -> IntType {
        IntType::new(self.pointer_width(), false, "size_t")
    }

    pub fn uintptr(self) -> IntType {
        IntType::new(self.pointer_width(), false, "uintptr_t")
    }
}

impl fmt::Display for DataModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DataModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ilp32" => Ok(DataModel::Ilp32),
            "lp64" => Ok(DataModel::Lp64),
            other => Err(format!("unknown data model `{other}` (expected ILP32 or LP64)")),
        }
    }
}

/// Fixed-width and project typedef names the frontend knows without a
/// declaration.
pub fn builtin_type(name: &str, model: DataModel) -> Option<IntType> {
    let (w, s) = match name {
        "uint8_t" | "u_int8_t" | "u_char" | "byte" | "U8" | "uint8" | "u8" => (8, false),
        "uint16_t" | "u_int16_t" | "u_short" | "word16" | "U16" | "uint16" | "u16" => (16, false),
        "uint32_t" | "u_int32_t" | "u_int" | "word32" | "U32" | "uint32" | "u32" | "tcp_seq" => {
            (32, false)
        }
        "uint64_t" | "u_int64_t" | "word64" | "U64" | "uint64" | "u64" => (64, false),
        "int8_t" | "I8" | "int8" | "s8" => (8, true),
        "int16_t" | "I16" | "int16" | "s16" | "sword16" => (16, true),
        "int32_t" | "I32" | "int32" | "s32" | "sword32" => (32, true),
        "int64_t" | "I64" | "int64" | "s64" | "sword64" => (64, true),
        "size_t" | "uintptr_t" | "u_long" => (model.pointer_width(), false),
        "ssize_t" | "intptr_t" | "ptrdiff_t" => (model.pointer_width(), true),
        _ => return None,
    };
    Some(IntType::new(w, s, name))
}

pub fn is_builtin_name(name: &str) -> bool {
    builtin_type(name, DataModel::Ilp32).is_some()
}

/// Resolves a keyword spelling such as `unsigned long int`.
fn keyword_type(spelling: &str, model: DataModel) -> Option<IntType> {
    let words: Vec<&str> = spelling.split_whitespace().collect();
    if words.is_empty()
        || !words
            .iter()
            .all(|w| matches!(*w, "unsigned" | "signed" | "char" | "short" | "int" | "long"))
    {
        return None;
    }
    let count = |k: &str| words.iter().filter(|w| **w == k).count();
    let unsigned = count("unsigned") > 0;
    if unsigned && count("signed") > 0 {
        return None;
    }
    let (width, base) = match (count("char"), count("short"), count("long")) {
        (1, 0, 0) => (8, "char"),
        (0, 1, 0) => (16, "short"),
        (0, 0, 0) => (32, "int"),
        (0, 0, 1) => (model.long_width(), "long"),
        (0, 0, 2) => (64, "long long"),
        _ => return None,
    };
    let name = if unsigned {
        format!("unsigned {base}")
    } else {
        base.to_string()
    };
    Some(IntType::new(width, !unsigned, name))
}

fn type_error(span: &SourceSpan, message: impl Into<String>) -> FrontendError {
    FrontendError::Type {
        span: span.clone(),
        message: message.into(),
    }
}

/// Type of an integer literal under the C rules for its radix and suffix.
pub fn literal_type(text: &str, value: u64, model: DataModel) -> IntType {
    let lower = text.to_ascii_lowercase();
    let non_decimal = lower.starts_with('0') && lower.len() > 1 && !lower.starts_with("0u") && !lower.starts_with("0l");
    let unsigned = lower.contains('u');
    let longs = lower.matches('l').count();
    let int = model.int();
    let uint = IntType::new(32, false, "unsigned int");
    let long = IntType::new(model.long_width(), true, "long");
    let ulong = IntType::new(model.long_width(), false, "unsigned long");
    let llong = IntType::new(64, true, "long long");
    let ullong = IntType::new(64, false, "unsigned long long");
    let candidates: Vec<&IntType> = match (unsigned, longs, non_decimal) {
        (false, 0, false) => vec![&int, &long, &llong],
        (false, 0, true) => vec![&int, &uint, &long, &ulong, &llong, &ullong],
        (true, 0, _) => vec![&uint, &ulong, &ullong],
        (false, 1, false) => vec![&long, &llong],
        (false, 1, true) => vec![&long, &ulong, &llong, &ullong],
        (true, 1, _) => vec![&ulong, &ullong],
        (false, _, false) => vec![&llong],
        (false, _, true) => vec![&llong, &ullong],
        (true, _, _) => vec![&ullong],
    };
    candidates
        .into_iter()
        .find(|t| t.fits(value))
        .cloned()
        .unwrap_or(ullong)
}

/// Integer promotion: anything narrower than `int` becomes `int`.
pub fn promote(t: &IntType, model: DataModel) -> IntType {
    if t.width < model.int_width() {
        model.int()
    } else {
        t.clone()
    }
}

/// Usual arithmetic conversions on two promoted operand types.
pub fn common_type(a: &IntType, b: &IntType) -> IntType {
    if a.same_repr(b) {
        return a.clone();
    }
    if a.signed == b.signed {
        return if a.width >= b.width { a.clone() } else { b.clone() };
    }
    let (u, s) = if a.signed { (b, a) } else { (a, b) };
    if u.width >= s.width {
        u.clone()
    } else {
        s.clone()
    }
}

#[derive(Debug, Clone)]
struct Signature {
    ret: CType,
    params: Vec<CType>,
}

struct Resolver {
    model: DataModel,
    typedefs: BTreeMap<String, CType>,
    structs: HashMap<String, Vec<(String, CType)>>,
    functions: HashMap<String, Signature>,
    scopes: Vec<HashMap<String, CType>>,
}

impl Resolver {
    fn resolve_ctype(&self, ty: &CType, span: &SourceSpan) -> Result<CType, FrontendError> {
        Ok(match ty {
            CType::Named(name) => {
                if let Some(t) = keyword_type(name, self.model) {
                    CType::Int(t)
                } else if let Some(t) = self.typedefs.get(name) {
                    match t {
                        // Keep the typedef spelling as the informational name.
                        CType::Int(i) => CType::Int(IntType::new(i.width, i.signed, name.clone())),
                        other => other.clone(),
                    }
                } else if let Some(t) = builtin_type(name, self.model) {
                    CType::Int(t)
                } else {
                    return Err(type_error(span, format!("unknown type `{name}`")));
                }
            }
            CType::Pointer(inner) => CType::Pointer(Box::new(self.resolve_ctype(inner, span)?)),
            CType::Array(inner, n) => CType::Array(Box::new(self.resolve_ctype(inner, span)?), *n),
            other => other.clone(),
        })
    }

    /// Integer type of a value of C type `ty`; arrays and pointers decay to
    /// a pointer-width unsigned integer.
    fn value_type(&self, ty: &CType) -> Option<IntType> {
        match ty {
            CType::Int(t) => Some(t.clone()),
            CType::Pointer(_) | CType::Array(..) => Some(self.model.uintptr()),
            _ => None,
        }
    }

    fn size_of(&self, ty: &CType, span: &SourceSpan) -> Result<u64, FrontendError> {
        Ok(match ty {
            CType::Int(t) => u64::from(t.width / 8),
            CType::Pointer(_) => u64::from(self.model.pointer_width() / 8),
            CType::Array(inner, Some(n)) => self.size_of(inner, span)? * n,
            CType::Struct(name) => {
                let fields = self
                    .structs
                    .get(name)
                    .ok_or_else(|| type_error(span, format!("incomplete type `struct {name}`")))?;
                let mut total = 0;
                for (_, f) in fields {
                    total += self.size_of(f, span)?;
                }
                total
            }
            _ => return Err(type_error(span, format!("sizeof of incomplete type `{}`", ty.spelling()))),
        })
    }

    fn lookup(&self, name: &str) -> Option<&CType> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn declare(&mut self, name: &str, ty: CType) {
        if let Some(scope) = self.scopes.last_mut() {
            scope.insert(name.to_string(), ty);
        }
    }

    fn convert(&self, e: Expr, target: &IntType) -> Expr {
        match &e.ty {
            Some(t) if t.same_repr(target) => e,
            _ => {
                let span = e.span.clone();
                Expr {
                    kind: ExprKind::Cast {
                        target: CType::Int(target.clone()),
                        operand: Box::new(e),
                        implicit: true,
                    },
                    span,
                    ty: Some(target.clone()),
                }
            }
        }
    }

    fn require_int(&self, e: &Expr) -> Result<IntType, FrontendError> {
        e.ty.clone()
            .ok_or_else(|| type_error(&e.span, "expected an integer-valued expression"))
    }

    /// Returns the resolved expression and its full C type.
    fn expr(&mut self, e: Expr) -> Result<(Expr, CType), FrontendError> {
        let Expr { kind, span, .. } = e;
        let model = self.model;
        let (kind, ctype) = match kind {
            ExprKind::IntLiteral { value, text } => {
                let t = literal_type(&text, value, model);
                (ExprKind::IntLiteral { value, text }, CType::Int(t))
            }
            ExprKind::SizeOf(ty) => {
                let ty = self.resolve_ctype(&ty, &span)?;
                let value = self.size_of(&ty, &span)?;
                (
                    ExprKind::IntLiteral {
                        value,
                        text: value.to_string(),
                    },
                    CType::Int(model.size_t()),
                )
            }
            ExprKind::Var(name) => {
                let ty = self
                    .lookup(&name)
                    .cloned()
                    .ok_or_else(|| type_error(&span, format!("undeclared identifier `{name}`")))?;
                (ExprKind::Var(name), ty)
            }
            ExprKind::Paren(inner) => {
                let (inner, ty) = self.expr(*inner)?;
                (ExprKind::Paren(Box::new(inner)), ty)
            }
            ExprKind::Unary { op, operand } => {
                let (operand, _) = self.expr(*operand)?;
                let t = self.require_int(&operand)?;
                match op {
                    UnaryOp::LogNot => (
                        ExprKind::Unary {
                            op,
                            operand: Box::new(operand),
                        },
                        CType::Int(model.int()),
                    ),
                    _ => {
                        let p = promote(&t, model);
                        let operand = self.convert(operand, &p);
                        (
                            ExprKind::Unary {
                                op,
                                operand: Box::new(operand),
                            },
                            CType::Int(p),
                        )
                    }
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let (lhs, _) = self.expr(*lhs)?;
                let (rhs, _) = self.expr(*rhs)?;
                let lt = self.require_int(&lhs)?;
                let rt = self.require_int(&rhs)?;
                if op.is_logical() {
                    (
                        ExprKind::Binary {
                            op,
                            lhs: Box::new(lhs),
                            rhs: Box::new(rhs),
                        },
                        CType::Int(model.int()),
                    )
                } else if op.is_shift() {
                    let pl = promote(&lt, model);
                    let lhs = self.convert(lhs, &pl);
                    let rhs = self.convert(rhs, &pl);
                    (
                        ExprKind::Binary {
                            op,
                            lhs: Box::new(lhs),
                            rhs: Box::new(rhs),
                        },
                        CType::Int(pl),
                    )
                } else {
                    let common = common_type(&promote(&lt, model), &promote(&rt, model));
                    let lhs = self.convert(lhs, &common);
                    let rhs = self.convert(rhs, &common);
                    let result = if op.is_comparison() { model.int() } else { common };
                    (
                        ExprKind::Binary {
                            op,
                            lhs: Box::new(lhs),
                            rhs: Box::new(rhs),
                        },
                        CType::Int(result),
                    )
                }
            }
            ExprKind::Cast { target, operand, implicit } => {
                let target = self.resolve_ctype(&target, &span)?;
                let (operand, _) = self.expr(*operand)?;
                self.require_int(&operand)?;
                let ty = match &target {
                    CType::Int(_) => target.clone(),
                    CType::Pointer(_) => CType::Int(model.uintptr()),
                    other => {
                        return Err(type_error(&span, format!("cast to `{}` is not supported", other.spelling())))
                    }
                };
                (
                    ExprKind::Cast {
                        target: ty.clone(),
                        operand: Box::new(operand),
                        implicit,
                    },
                    ty,
                )
            }
            ExprKind::Call { name, args } => self.call(name, args, &span)?,
            ExprKind::Index { base, index } => {
                let (base, bty) = self.expr(*base)?;
                let (index, _) = self.expr(*index)?;
                self.require_int(&index)?;
                let elem = match bty {
                    CType::Array(inner, _) | CType::Pointer(inner) => *inner,
                    other => {
                        return Err(type_error(
                            &span,
                            format!("subscript of non-array type `{}`", other.spelling()),
                        ))
                    }
                };
                (
                    ExprKind::Index {
                        base: Box::new(base),
                        index: Box::new(index),
                    },
                    elem,
                )
            }
            ExprKind::Member { base, field, arrow } => {
                let (base, bty) = self.expr(*base)?;
                let sname = match (&bty, arrow) {
                    (CType::Struct(s), false) => s.clone(),
                    (CType::Pointer(inner), true) => match inner.as_ref() {
                        CType::Struct(s) => s.clone(),
                        _ => return Err(type_error(&span, "`->` on a non-struct pointer")),
                    },
                    _ => {
                        return Err(type_error(
                            &span,
                            format!("member access on `{}`", bty.spelling()),
                        ))
                    }
                };
                let fty = self
                    .structs
                    .get(&sname)
                    .and_then(|fs| fs.iter().find(|(n, _)| *n == field))
                    .map(|(_, t)| t.clone())
                    .ok_or_else(|| type_error(&span, format!("`struct {sname}` has no field `{field}`")))?;
                (
                    ExprKind::Member {
                        base: Box::new(base),
                        field,
                        arrow,
                    },
                    fty,
                )
            }
        };
        let ty = self.value_type(&ctype);
        Ok((Expr { kind, span, ty }, ctype))
    }

    fn call(
        &mut self,
        name: String,
        args: Vec<Expr>,
        span: &SourceSpan,
    ) -> Result<(ExprKind, CType), FrontendError> {
        let model = self.model;
        let mut resolved = Vec::with_capacity(args.len());
        for a in args {
            resolved.push(self.expr(a)?.0);
        }
        let arity = |n: usize| -> Result<(), FrontendError> {
            if resolved.len() == n {
                Ok(())
            } else {
                Err(type_error(span, format!("`{name}` expects {n} argument(s)")))
            }
        };
        let size_t = model.size_t();
        let ret = match name.as_str() {
            // Identity wrapper used by resource-identifier code.
            "CFE_RESOURCEID_UNWRAP" => {
                arity(1)?;
                CType::Int(self.require_int(&resolved[0])?)
            }
            "SEQ_LT" | "SEQ_GT" | "SEQ_LEQ" | "SEQ_GEQ" => {
                arity(2)?;
                CType::Int(model.int())
            }
            "malloc" => {
                arity(1)?;
                let a = resolved.pop().unwrap_or_else(|| unreachable!());
                resolved.push(self.convert(a, &size_t));
                CType::Pointer(Box::new(CType::Void))
            }
            "calloc" => {
                arity(2)?;
                resolved = resolved.into_iter().map(|a| self.convert(a, &size_t)).collect();
                CType::Pointer(Box::new(CType::Void))
            }
            "memcpy" | "memmove" | "memset" | "memcmp" => {
                arity(3)?;
                let n = resolved.pop().unwrap_or_else(|| unreachable!());
                resolved.push(self.convert(n, &size_t));
                if name == "memcmp" {
                    CType::Int(model.int())
                } else {
                    CType::Pointer(Box::new(CType::Void))
                }
            }
            "free" => {
                arity(1)?;
                CType::Void
            }
            _ => {
                let sig = self
                    .functions
                    .get(&name)
                    .cloned()
                    .ok_or_else(|| type_error(span, format!("call to undeclared function `{name}`")))?;
                arity(sig.params.len())?;
                resolved = resolved
                    .into_iter()
                    .zip(&sig.params)
                    .map(|(a, p)| match p {
                        CType::Int(t) => self.convert(a, t),
                        _ => a,
                    })
                    .collect();
                sig.ret
            }
        };
        for a in &resolved {
            if a.ty.is_none() {
                return Err(type_error(&a.span, "argument is not an integer or pointer"));
            }
        }
        Ok((ExprKind::Call { name, args: resolved }, ret))
    }

    fn block(&mut self, stmts: Vec<Stmt>, ret: &CType) -> Result<Vec<Stmt>, FrontendError> {
        self.scopes.push(HashMap::new());
        let out = stmts.into_iter().map(|s| self.stmt(s, ret)).collect();
        self.scopes.pop();
        out
    }

    fn stmt(&mut self, s: Stmt, ret: &CType) -> Result<Stmt, FrontendError> {
        let Stmt { kind, span } = s;
        let kind = match kind {
            StmtKind::Decl { name, ty, init } => {
                let ty = self.resolve_ctype(&ty, &span)?;
                let init = match init {
                    Some(e) => {
                        let (e, _) = self.expr(e)?;
                        self.require_int(&e)?;
                        Some(match &ty {
                            CType::Int(t) => self.convert(e, t),
                            _ => e,
                        })
                    }
                    None => None,
                };
                self.declare(&name, ty.clone());
                StmtKind::Decl { name, ty, init }
            }
            StmtKind::Assign { target, op, value } => {
                let (target, tty) = self.expr(target)?;
                if !matches!(
                    target.strip_parens().kind,
                    ExprKind::Var(_) | ExprKind::Index { .. } | ExprKind::Member { .. }
                ) {
                    return Err(type_error(&target.span, "assignment to a non-lvalue"));
                }
                let value = match op {
                    // Desugar `a op= b` into `a = (T)(a op b)`.
                    Some(op) => {
                        let bin_span = target.span.to(&value.span);
                        let bin = Expr::new(
                            ExprKind::Binary {
                                op,
                                lhs: Box::new(strip_types(target.clone())),
                                rhs: Box::new(value),
                            },
                            bin_span,
                        );
                        self.expr(bin)?.0
                    }
                    None => self.expr(value)?.0,
                };
                self.require_int(&value)?;
                let value = match &tty {
                    CType::Int(t) => self.convert(value, t),
                    _ => value,
                };
                StmtKind::Assign {
                    target,
                    op: None,
                    value,
                }
            }
            StmtKind::Expr(e) => StmtKind::Expr(self.expr(e)?.0),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let (cond, _) = self.expr(cond)?;
                self.require_int(&cond)?;
                let then_branch = self.block(then_branch, ret)?;
                let else_branch = match else_branch {
                    Some(b) => Some(self.block(b, ret)?),
                    None => None,
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            StmtKind::Return(e) => StmtKind::Return(match e {
                Some(e) => {
                    let (e, _) = self.expr(e)?;
                    self.require_int(&e)?;
                    Some(match ret {
                        CType::Int(t) => self.convert(e, t),
                        _ => e,
                    })
                }
                None => None,
            }),
            StmtKind::Block(b) => StmtKind::Block(self.block(b, ret)?),
            StmtKind::Skipped(r) => StmtKind::Skipped(r),
        };
        Ok(Stmt { kind, span })
    }
}

/// Drops type annotations so an already-resolved subtree can be resolved
/// again as part of a larger expression.
fn strip_types(e: Expr) -> Expr {
    let Expr { kind, span, .. } = e;
    let kind = match kind {
        ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
            op,
            lhs: Box::new(strip_types(*lhs)),
            rhs: Box::new(strip_types(*rhs)),
        },
        ExprKind::Unary { op, operand } => ExprKind::Unary {
            op,
            operand: Box::new(strip_types(*operand)),
        },
        ExprKind::Cast {
            operand,
            implicit: true,
            ..
        } => return strip_types(*operand),
        ExprKind::Cast {
            target,
            operand,
            implicit: false,
        } => ExprKind::Cast {
            target,
            operand: Box::new(strip_types(*operand)),
            implicit: false,
        },
        ExprKind::Call { name, args } => ExprKind::Call {
            name,
            args: args.into_iter().map(strip_types).collect(),
        },
        ExprKind::Index { base, index } => ExprKind::Index {
            base: Box::new(strip_types(*base)),
            index: Box::new(strip_types(*index)),
        },
        ExprKind::Member { base, field, arrow } => ExprKind::Member {
            base: Box::new(strip_types(*base)),
            field,
            arrow,
        },
        ExprKind::Paren(inner) => ExprKind::Paren(Box::new(strip_types(*inner))),
        other => other,
    };
    Expr::new(kind, span)
}

/// Annotates every expression with its integer type, inserting implicit
/// conversions so that arithmetic operands share a width.
pub fn resolve_types(mut unit: TranslationUnit, model: &DataModel) -> Result<TranslationUnit, FrontendError> {
    let mut r = Resolver {
        model: *model,
        typedefs: BTreeMap::new(),
        structs: HashMap::new(),
        functions: HashMap::new(),
        scopes: vec![HashMap::new()],
    };
    let items = std::mem::take(&mut unit.items);
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let item = match item {
            Item::Typedef(mut t) => {
                t.ty = r.resolve_ctype(&t.ty, &t.span)?;
                r.typedefs.insert(t.name.clone(), t.ty.clone());
                Item::Typedef(t)
            }
            Item::Struct(mut s) => {
                for (_, f) in s.fields.iter_mut() {
                    *f = r.resolve_ctype(f, &s.span)?;
                }
                r.structs.insert(s.name.clone(), s.fields.clone());
                Item::Struct(s)
            }
            Item::Global(mut g) => {
                g.ty = r.resolve_ctype(&g.ty, &g.span)?;
                if let Some(init) = g.init.take() {
                    let (e, _) = r.expr(init)?;
                    g.init = Some(match &g.ty {
                        CType::Int(t) => r.convert(e, t),
                        _ => e,
                    });
                }
                r.declare(&g.name, g.ty.clone());
                Item::Global(g)
            }
            Item::Function(mut f) => {
                f.ret = r.resolve_ctype(&f.ret, &f.span)?;
                for p in f.params.iter_mut() {
                    p.ty = r.resolve_ctype(&p.ty, &p.span)?;
                }
                r.functions.insert(
                    f.name.clone(),
                    Signature {
                        ret: f.ret.clone(),
                        params: f.params.iter().map(|p| p.ty.clone()).collect(),
                    },
                );
                if let Some(body) = f.body.take() {
                    r.scopes.push(f.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect());
                    let resolved = r.block(body, &f.ret);
                    r.scopes.pop();
                    f.body = Some(resolved?);
                }
                Item::Function(f)
            }
            Item::Skipped(s) => Item::Skipped(s),
        };
        out.push(item);
    }
    unit.items = out;
    unit.typedefs = r.typedefs;
    Ok(unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{load, TranslationUnit};

    fn unit(src: &str, model: DataModel) -> TranslationUnit {
        load("t.c", src, &model).unwrap()
    }

    fn returned(u: &TranslationUnit, func: &str) -> Expr {
        let f = u.function(func).unwrap();
        for s in f.body.as_ref().unwrap() {
            if let StmtKind::Return(Some(e)) = &s.kind {
                return e.clone();
            }
        }
        panic!("no return");
    }

    #[test]
    fn unsigned_long_depends_on_data_model() {
        let src = "unsigned long f(uint64_t x) { return (unsigned long)x; }";
        let e = returned(&unit(src, DataModel::Ilp32), "f");
        assert_eq!(e.ty.unwrap().width, 32);
        let e = returned(&unit(src, DataModel::Lp64), "f");
        assert_eq!(e.ty.unwrap().width, 64);
    }

    #[test]
    fn literal_types() {
        let m = DataModel::Ilp32;
        assert_eq!(literal_type("0x80000000", 0x8000_0000, m), IntType::new(32, false, "unsigned int"));
        assert_eq!(literal_type("2147483648", 2147483648, m), IntType::new(64, true, "long long"));
        assert_eq!(literal_type("2147483648", 2147483648, DataModel::Lp64), IntType::new(64, true, "long"));
        assert_eq!(literal_type("7", 7, m), m.int());
        assert_eq!(literal_type("7u", 7, m), IntType::new(32, false, "unsigned int"));
        assert_eq!(literal_type("0", 0, m), m.int());
        assert_eq!(literal_type("0UL", 0, m), IntType::new(32, false, "unsigned long"));
    }

    #[test]
    fn keyword_spellings() {
        let m = DataModel::Lp64;
        assert_eq!(keyword_type("unsigned", m).unwrap(), IntType::new(32, false, "unsigned int"));
        assert_eq!(keyword_type("long unsigned int", m).unwrap().width, 64);
        assert_eq!(keyword_type("long long", DataModel::Ilp32).unwrap().width, 64);
        assert_eq!(keyword_type("signed char", m).unwrap(), IntType::new(8, true, "char"));
        assert!(keyword_type("unsigned signed", m).is_none());
    }

    #[test]
    fn usual_arithmetic_conversions() {
        let u32t = IntType::new(32, false, "uint32_t");
        let i64t = IntType::new(64, true, "int64_t");
        let i32t = IntType::new(32, true, "int");
        assert_eq!(common_type(&u32t, &i32t), u32t);
        assert_eq!(common_type(&u32t, &i64t), i64t);
    }

    #[test]
    fn arithmetic_operands_share_width() {
        let src = "uint32_t f(uint16_t len, uint16_t tlv) { return (uint16_t)(len - (sizeof(uint8_t)*3 + tlv)); }";
        let u = unit(src, DataModel::Ilp32);
        let e = returned(&u, "f");
        let mut checked = 0;
        e.walk(&mut |n| {
            if let ExprKind::Binary { op, lhs, rhs } = &n.kind {
                if !op.is_logical() {
                    assert_eq!(lhs.ty.as_ref().unwrap().width, rhs.ty.as_ref().unwrap().width);
                    checked += 1;
                }
            }
        });
        assert_eq!(checked, 3);
    }

    #[test]
    fn compound_assignment_is_desugared() {
        let src = "uint32_t get_size(void);\nvoid f(uint32_t s) { s -= get_size() * 2; }";
        let u = unit(src, DataModel::Ilp32);
        let body = u.function("f").unwrap().body.as_ref().unwrap();
        match &body[0].kind {
            StmtKind::Assign { op: None, value, .. } => match &value.kind {
                ExprKind::Binary { op: BinaryOp::Sub, .. } => {
                    assert_eq!(value.span.length as usize, "s -= get_size() * 2".len());
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_call_is_a_type_error() {
        let err = load("t.c", "int f(int x) { return g(x); }", &DataModel::Ilp32).unwrap_err();
        assert!(matches!(err, FrontendError::Type { .. }), "{err}");
    }

    #[test]
    fn member_access_through_struct_pointer() {
        let src = "struct tcpcb { tcp_seq rcv_nxt; };\nstruct tcphdr { tcp_seq th_seq; };\n\
                   int f(struct tcpcb *tp, struct tcphdr *th) { int todrop = tp->rcv_nxt - th->th_seq; return todrop; }";
        let u = unit(src, DataModel::Ilp32);
        let body = u.function("f").unwrap().body.as_ref().unwrap();
        match &body[0].kind {
            StmtKind::Decl { init: Some(e), .. } => match &e.kind {
                ExprKind::Cast { implicit: true, operand, target } => {
                    assert_eq!(target.as_int().unwrap().signed, true);
                    assert_eq!(operand.ty.as_ref().unwrap(), &IntType::new(32, false, "tcp_seq"));
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn typedef_names_are_kept() {
        let src = "typedef uint64_t CFE_ResourceId_t;\nunsigned long f(CFE_ResourceId_t id) { return (unsigned long)CFE_RESOURCEID_UNWRAP(id); }";
        let u = unit(src, DataModel::Ilp32);
        let e = returned(&u, "f");
        match &e.kind {
            ExprKind::Cast { operand, .. } => {
                assert_eq!(operand.ty.as_ref().unwrap(), &IntType::new(64, false, "CFE_ResourceId_t"))
            }
            other => panic!("{other:?}"),
        }
    }
}
