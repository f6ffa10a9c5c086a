use std::collections::BTreeMap;

use super::lexer::Comment;
use super::types::IntType;
use super::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    BitAnd,
    BitOr,
    BitXor,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::BitXor => "^",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 10,
            BinaryOp::Add | BinaryOp::Sub => 9,
            BinaryOp::Shl | BinaryOp::Shr => 8,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 7,
            BinaryOp::Eq | BinaryOp::Ne => 6,
            BinaryOp::BitAnd => 5,
            BinaryOp::BitXor => 4,
            BinaryOp::BitOr => 3,
            BinaryOp::LogAnd => 2,
            BinaryOp::LogOr => 1,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::LogAnd | BinaryOp::LogOr)
    }

    pub fn is_shift(self) -> bool {
        matches!(self, BinaryOp::Shl | BinaryOp::Shr)
    }

    /// Operator for a compound assignment spelling such as `-=`.
    pub fn from_compound(p: &str) -> Option<BinaryOp> {
        Some(match p {
            "+=" => BinaryOp::Add,
            "-=" => BinaryOp::Sub,
            "*=" => BinaryOp::Mul,
            "/=" => BinaryOp::Div,
            "%=" => BinaryOp::Rem,
            "<<=" => BinaryOp::Shl,
            ">>=" => BinaryOp::Shr,
            "&=" => BinaryOp::BitAnd,
            "|=" => BinaryOp::BitOr,
            "^=" => BinaryOp::BitXor,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Plus,
    LogNot,
    BitNot,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Plus => "+",
            UnaryOp::LogNot => "!",
            UnaryOp::BitNot => "~",
        }
    }
}

/// A declared type before or after resolution. `Named` holds a spelling
/// (`unsigned long`, `uint32_t`, a typedef name) until `resolve_types`
/// replaces it with `Int`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CType {
    Void,
    Named(String),
    Int(IntType),
    Pointer(Box<CType>),
    Array(Box<CType>, Option<u64>),
    Struct(String),
}

impl CType {
    pub fn as_int(&self) -> Option<&IntType> {
        match self {
            CType::Int(t) => Some(t),
            _ => None,
        }
    }

    pub fn spelling(&self) -> String {
        match self {
            CType::Void => "void".into(),
            CType::Named(s) => s.clone(),
            CType::Int(t) => t.name.clone(),
            CType::Pointer(inner) => format!("{} *", inner.spelling()),
            CType::Array(inner, _) => inner.spelling(),
            CType::Struct(s) => format!("struct {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    IntLiteral {
        value: u64,
        /// Original spelling, kept so printing round-trips.
        text: String,
    },
    Var(String),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Cast {
        target: CType,
        operand: Box<Expr>,
        implicit: bool,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    /// `sizeof(type)`; replaced by a literal during type resolution.
    SizeOf(CType),
    Paren(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
    /// Filled in by `resolve_types`.
    pub ty: Option<IntType>,
}

impl Expr {
    pub fn new(kind: ExprKind, span: SourceSpan) -> Expr {
        Expr { kind, span, ty: None }
    }

    pub fn int_type(&self) -> Option<&IntType> {
        self.ty.as_ref()
    }

    /// The expression with parentheses and implicit conversions peeled off.
    pub fn strip_implicit(&self) -> &Expr {
        match &self.kind {
            ExprKind::Paren(inner) => inner.strip_implicit(),
            ExprKind::Cast {
                operand,
                implicit: true,
                ..
            } => operand.strip_implicit(),
            _ => self,
        }
    }

    /// The expression with parentheses peeled off.
    pub fn strip_parens(&self) -> &Expr {
        match &self.kind {
            ExprKind::Paren(inner) => inner.strip_parens(),
            _ => self,
        }
    }

    pub fn literal_value(&self) -> Option<u64> {
        match &self.strip_implicit().kind {
            ExprKind::IntLiteral { value, .. } => Some(*value),
            _ => None,
        }
    }

    /// Pre-order traversal of this expression tree.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => operand.walk(f),
            ExprKind::Paren(inner) => inner.walk(f),
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            ExprKind::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            ExprKind::Member { base, .. } => base.walk(f),
            ExprKind::IntLiteral { .. } | ExprKind::Var(_) | ExprKind::SizeOf(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRegion {
    pub span: SourceSpan,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl {
        name: String,
        ty: CType,
        init: Option<Expr>,
    },
    Assign {
        target: Expr,
        /// Operator of a compound assignment; `None` for plain `=`.
        op: Option<BinaryOp>,
        value: Expr,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    Skipped(SkippedRegion),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

impl Stmt {
    /// Pre-order traversal of statements, descending into nested blocks.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.iter().for_each(|s| s.walk(f));
                if let Some(e) = else_branch {
                    e.iter().for_each(|s| s.walk(f));
                }
            }
            StmtKind::Block(body) => body.iter().for_each(|s| s.walk(f)),
            _ => {}
        }
    }

    /// Expressions directly owned by this statement (not nested statements).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl { init, .. } => init.iter().collect(),
            StmtKind::Assign { target, value, .. } => vec![target, value],
            StmtKind::Expr(e) => vec![e],
            StmtKind::If { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Block(_) | StmtKind::Skipped(_) => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: CType,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub ret: CType,
    pub params: Vec<Param>,
    /// `None` for a prototype.
    pub body: Option<Vec<Stmt>>,
    pub is_static: bool,
    pub is_inline: bool,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Global {
    pub name: String,
    pub ty: CType,
    pub init: Option<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<(String, CType)>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Typedef {
    pub name: String,
    pub ty: CType,
    pub span: SourceSpan,
}

/// Top-level items in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Function(Function),
    Global(Global),
    Struct(StructDef),
    Typedef(Typedef),
    Skipped(SkippedRegion),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationUnit {
    pub file: String,
    pub items: Vec<Item>,
    pub comments: Vec<Comment>,
    /// Resolved typedefs, filled in by `resolve_types`.
    pub typedefs: BTreeMap<String, CType>,
}

impl TranslationUnit {
    /// Function definitions (with bodies) in source order.
    pub fn functions(&self) -> impl Iterator<Item = &Function> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) if f.body.is_some() => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions().find(|f| f.name == name)
    }

    pub fn globals(&self) -> impl Iterator<Item = &Global> {
        self.items.iter().filter_map(|i| match i {
            Item::Global(g) => Some(g),
            _ => None,
        })
    }

    pub fn structs(&self) -> impl Iterator<Item = &StructDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Struct(s) => Some(s),
            _ => None,
        })
    }

    /// Every skipped region, top level and inside function bodies.
    pub fn skipped(&self) -> Vec<&SkippedRegion> {
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                Item::Skipped(s) => out.push(s),
                Item::Function(Function { body: Some(body), .. }) => {
                    for stmt in body {
                        stmt.walk(&mut |s| {
                            if let StmtKind::Skipped(r) = &s.kind {
                                out.push(r);
                            }
                        });
                    }
                }
                _ => {}
            }
        }
        out
    }
}
