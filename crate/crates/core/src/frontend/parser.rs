use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use super::ast::*;
use super::lexer::{Keyword, Lexed, Token, TokenKind};
use super::types::is_builtin_name;
use super::{FrontendError, SourceSpan};

/// Internal parse failure: either a hard syntax error or a construct that
/// is valid C but outside the supported subset.
enum Fail {
    Hard(FrontendError),
    Unsupported(String),
}

impl From<FrontendError> for Fail {
    fn from(e: FrontendError) -> Self {
        Fail::Hard(e)
    }
}

type PResult<T> = Result<T, Fail>;

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    src: &'a str,
    file: Arc<str>,
    typedef_names: HashSet<String>,
}

/// Parses a token stream into a translation unit. Constructs outside the
/// subset become skipped regions; malformed input is an error.
pub fn parse_unit(file: &str, source: &str, lexed: Lexed) -> Result<TranslationUnit, FrontendError> {
    let mut p = Parser {
        toks: lexed.tokens,
        pos: 0,
        src: source,
        file: Arc::from(file),
        typedef_names: HashSet::new(),
    };
    let mut items = Vec::new();
    while !p.at_end() {
        let start = p.pos;
        match p.item() {
            Ok(mut parsed) => items.append(&mut parsed),
            Err(Fail::Hard(e)) => return Err(e),
            Err(Fail::Unsupported(reason)) => {
                p.pos = start;
                p.skip_item();
                let span = p.span_between(start);
                items.push(Item::Skipped(SkippedRegion { span, reason }));
            }
        }
    }
    Ok(TranslationUnit {
        file: file.to_string(),
        items,
        comments: lexed.comments,
        typedefs: BTreeMap::new(),
    })
}

/// Parses a single expression; used by tests and by tools that need to
/// re-read a printed expression.
pub fn parse_expr(file: &str, source: &str, lexed: Lexed) -> Result<Expr, FrontendError> {
    let mut p = Parser {
        toks: lexed.tokens,
        pos: 0,
        src: source,
        file: Arc::from(file),
        typedef_names: HashSet::new(),
    };
    let e = match p.expr() {
        Ok(e) => e,
        Err(Fail::Hard(e)) => return Err(e),
        Err(Fail::Unsupported(reason)) => {
            return Err(FrontendError::Parse {
                span: p.here(),
                expected: "supported expression".into(),
                found: reason,
            })
        }
    };
    if !p.at_end() {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> SourceSpan {
        match self.peek().or_else(|| self.toks.last()) {
            Some(t) => t.span.clone(),
            None => SourceSpan::new(self.file.clone(), 1, 1, 1, 0),
        }
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span.clone()
    }

    /// Span from token `start` through the last consumed token.
    fn span_between(&self, start: usize) -> SourceSpan {
        let first = &self.toks[start.min(self.toks.len() - 1)].span;
        let last = &self.toks[self.pos.saturating_sub(1).max(start).min(self.toks.len() - 1)].span;
        first.to(last)
    }

    fn unexpected(&self, expected: &str) -> FrontendError {
        FrontendError::Parse {
            span: self.here(),
            expected: expected.to_string(),
            found: self
                .peek()
                .map(Token::describe)
                .unwrap_or_else(|| "end of input".into()),
        }
    }

    fn check_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn check_kw(&self, k: Keyword) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.check_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        if self.check_kw(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.check_punct(p) {
            Ok(self.bump().unwrap_or_else(|| unreachable!()))
        } else {
            Err(self.unexpected(&format!("`{p}`")).into())
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
            }) => {
                let out = (name.clone(), span.clone());
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.unexpected("identifier").into()),
        }
    }

    fn is_type_name(&self, name: &str) -> bool {
        is_builtin_name(name) || self.typedef_names.contains(name)
    }

    /// Whether the tokens at the cursor start a type.
    fn starts_type(&self) -> bool {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Keyword(k)) => k.is_type_start(),
            Some(TokenKind::Ident(name)) => {
                self.is_type_name(name)
                    || matches!(self.peek_at(1).map(|t| &t.kind), Some(TokenKind::Ident(_)))
            }
            _ => false,
        }
    }

    // ---- types -------------------------------------------------------

    /// Parses declaration specifiers. Returns the base type plus
    /// `(static, inline, typedef)` flags.
    fn specifiers(&mut self) -> PResult<(CType, bool, bool, bool)> {
        let (mut is_static, mut is_inline, mut is_typedef) = (false, false, false);
        let mut words: Vec<&'static str> = Vec::new();
        let mut base: Option<CType> = None;
        loop {
            let Some(tok) = self.peek() else { break };
            match &tok.kind {
                TokenKind::Keyword(k) => match k {
                    Keyword::Static => is_static = true,
                    Keyword::Inline => is_inline = true,
                    Keyword::Typedef => is_typedef = true,
                    Keyword::Extern | Keyword::Const | Keyword::Volatile => {}
                    Keyword::Unsigned
                    | Keyword::Signed
                    | Keyword::Int
                    | Keyword::Long
                    | Keyword::Short
                    | Keyword::Char => words.push(k.as_str()),
                    Keyword::Void => base = Some(CType::Void),
                    Keyword::Struct => {
                        self.pos += 1;
                        let (name, _) = self.ident()?;
                        base = Some(CType::Struct(name));
                        continue;
                    }
                    _ => break,
                },
                TokenKind::Ident(name) if base.is_none() && words.is_empty() => {
                    let known = self.is_type_name(name);
                    let followed_by_name = matches!(
                        self.peek_at(1).map(|t| &t.kind),
                        Some(TokenKind::Ident(_)) | Some(TokenKind::Punct("*"))
                    );
                    if known || followed_by_name {
                        base = Some(CType::Named(name.clone()));
                    } else {
                        break;
                    }
                }
                _ => break,
            }
            self.pos += 1;
        }
        let ty = match (base, words.is_empty()) {
            (Some(b), true) => b,
            (None, false) => CType::Named(words.join(" ")),
            (Some(_), false) => return Err(self.unexpected("a single type").into()),
            (None, true) => return Err(self.unexpected("type").into()),
        };
        Ok((ty, is_static, is_inline, is_typedef))
    }

    /// Pointer stars after a base type.
    fn pointers(&mut self, mut ty: CType) -> CType {
        while self.eat_punct("*") {
            while self.eat_kw(Keyword::Const) || self.eat_kw(Keyword::Volatile) {}
            ty = CType::Pointer(Box::new(ty));
        }
        ty
    }

    /// Array suffix `[N]` or `[]`.
    fn array_suffix(&mut self, ty: CType) -> PResult<CType> {
        if !self.eat_punct("[") {
            return Ok(ty);
        }
        let len = match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::IntLit { value, .. }) => {
                self.pos += 1;
                Some(value)
            }
            Some(TokenKind::Punct("]")) => None,
            _ => return Err(Fail::Unsupported("non-literal array length".into())),
        };
        self.expect_punct("]")?;
        if self.check_punct("[") {
            return Err(Fail::Unsupported("multi-dimensional array".into()));
        }
        Ok(CType::Array(Box::new(ty), len))
    }

    /// A type name inside a cast or sizeof.
    fn type_name(&mut self) -> PResult<CType> {
        let (ty, ..) = self.specifiers()?;
        Ok(self.pointers(ty))
    }

    // ---- items -------------------------------------------------------

    fn item(&mut self) -> PResult<Vec<Item>> {
        let start = self.pos;
        if self.eat_punct(";") {
            return Ok(vec![]);
        }
        // struct definition
        if self.check_kw(Keyword::Struct)
            && matches!(self.peek_at(1).map(|t| &t.kind), Some(TokenKind::Ident(_)))
            && self.peek_at(2).is_some_and(|t| t.is_punct("{"))
        {
            self.pos += 1;
            let (name, _) = self.ident()?;
            let fields = self.struct_body()?;
            let span = self.span_between(start);
            self.expect_punct(";")?;
            return Ok(vec![Item::Struct(StructDef { name, fields, span })]);
        }
        if self.check_kw(Keyword::Typedef)
            && self.peek_at(1).is_some_and(|t| t.is_keyword(Keyword::Struct))
            && (self.peek_at(2).is_some_and(|t| t.is_punct("{"))
                || self.peek_at(3).is_some_and(|t| t.is_punct("{")))
        {
            // typedef struct [Tag] { ... } Name;
            self.pos += 2;
            let tag = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Ident(_)) => Some(self.ident()?.0),
                _ => None,
            };
            let fields = self.struct_body()?;
            let ty = self.pointers(CType::Struct(String::new()));
            let (name, _) = self.ident()?;
            self.expect_punct(";")?;
            let sname = tag.unwrap_or_else(|| name.clone());
            let span = self.span_between(start);
            let ty = match ty {
                CType::Pointer(_) => CType::Pointer(Box::new(CType::Struct(sname.clone()))),
                _ => CType::Struct(sname.clone()),
            };
            self.typedef_names.insert(name.clone());
            return Ok(vec![
                Item::Struct(StructDef {
                    name: sname,
                    fields,
                    span: span.clone(),
                }),
                Item::Typedef(Typedef { name, ty, span }),
            ]);
        }

        let (base, is_static, is_inline, is_typedef) = self.specifiers()?;
        if self.check_punct("(") {
            return Err(Fail::Unsupported("function pointer declarator".into()));
        }
        let ty = self.pointers(base);
        if self.check_punct("(") {
            return Err(Fail::Unsupported("function pointer declarator".into()));
        }
        let (name, _) = self.ident()?;
        if is_typedef {
            let ty = self.array_suffix(ty)?;
            if self.check_punct("(") {
                return Err(Fail::Unsupported("function typedef".into()));
            }
            self.expect_punct(";")?;
            self.typedef_names.insert(name.clone());
            return Ok(vec![Item::Typedef(Typedef {
                name,
                ty,
                span: self.span_between(start),
            })]);
        }
        if self.eat_punct("(") {
            let params = self.params()?;
            if self.eat_punct(";") {
                return Ok(vec![Item::Function(Function {
                    name,
                    ret: ty,
                    params,
                    body: None,
                    is_static,
                    is_inline,
                    span: self.span_between(start),
                })]);
            }
            self.expect_punct("{")?;
            let body = self.block_items()?;
            return Ok(vec![Item::Function(Function {
                name,
                ret: ty,
                params,
                body: Some(body),
                is_static,
                is_inline,
                span: self.span_between(start),
            })]);
        }
        let ty = self.array_suffix(ty)?;
        let init = if self.eat_punct("=") {
            if self.check_punct("{") {
                return Err(Fail::Unsupported("aggregate initializer".into()));
            }
            Some(self.expr()?)
        } else {
            None
        };
        if self.check_punct(",") {
            return Err(Fail::Unsupported("multiple declarators".into()));
        }
        self.expect_punct(";")?;
        Ok(vec![Item::Global(Global {
            name,
            ty,
            init,
            span: self.span_between(start),
        })])
    }

    fn struct_body(&mut self) -> PResult<Vec<(String, CType)>> {
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        while !self.eat_punct("}") {
            if self.at_end() {
                return Err(self.unexpected("`}`").into());
            }
            let (base, ..) = self.specifiers()?;
            let ty = self.pointers(base);
            let (name, _) = self.ident()?;
            if self.check_punct(":") {
                return Err(Fail::Unsupported("bitfield".into()));
            }
            let ty = self.array_suffix(ty)?;
            self.expect_punct(";")?;
            fields.push((name, ty));
        }
        Ok(fields)
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        let mut params = Vec::new();
        if self.eat_punct(")") {
            return Ok(params);
        }
        if self.check_kw(Keyword::Void) && self.peek_at(1).is_some_and(|t| t.is_punct(")")) {
            self.pos += 2;
            return Ok(params);
        }
        loop {
            if self.check_punct("...") {
                return Err(Fail::Unsupported("variadic function".into()));
            }
            let start = self.pos;
            let (base, ..) = self.specifiers()?;
            let ty = self.pointers(base);
            if self.check_punct("(") {
                return Err(Fail::Unsupported("function pointer parameter".into()));
            }
            let (name, _) = self.ident()?;
            let ty = self.array_suffix(ty)?;
            params.push(Param {
                name,
                ty,
                span: self.span_between(start),
            });
            if self.eat_punct(")") {
                return Ok(params);
            }
            self.expect_punct(",")?;
        }
    }

    // ---- statements --------------------------------------------------

    /// Statements up to and including the closing brace.
    fn block_items(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            if self.eat_punct("}") {
                return Ok(out);
            }
            if self.at_end() {
                return Err(self.unexpected("`}`").into());
            }
            out.push(self.stmt_or_skip()?);
        }
    }

    fn stmt_or_skip(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        match self.stmt() {
            Ok(s) => Ok(s),
            Err(Fail::Unsupported(reason)) => {
                self.pos = start;
                self.skip_stmt();
                let span = self.span_between(start);
                Ok(Stmt {
                    kind: StmtKind::Skipped(SkippedRegion {
                        span: span.clone(),
                        reason,
                    }),
                    span,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Body of an `if` branch, flattened when it is a braced block.
    fn branch(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat_punct("{") {
            self.block_items()
        } else {
            Ok(vec![self.stmt_or_skip()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let kind = match self.peek().map(|t| t.kind.clone()) {
            None => return Err(self.unexpected("statement").into()),
            Some(TokenKind::Punct("{")) => {
                self.pos += 1;
                StmtKind::Block(self.block_items()?)
            }
            Some(TokenKind::Punct(";")) => {
                self.pos += 1;
                StmtKind::Block(vec![])
            }
            Some(TokenKind::Keyword(Keyword::If)) => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then_branch = self.branch()?;
                let else_branch = if self.eat_kw(Keyword::Else) {
                    Some(self.branch()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            Some(TokenKind::Keyword(Keyword::Return)) => {
                self.pos += 1;
                let e = if self.check_punct(";") { None } else { Some(self.expr()?) };
                self.expect_punct(";")?;
                StmtKind::Return(e)
            }
            Some(TokenKind::Keyword(
                k @ (Keyword::For
                | Keyword::While
                | Keyword::Do
                | Keyword::Switch
                | Keyword::Goto
                | Keyword::Break
                | Keyword::Continue),
            )) => {
                return Err(Fail::Unsupported(format!("`{}` statement", k.as_str())));
            }
            Some(TokenKind::Keyword(Keyword::Typedef)) => {
                return Err(Fail::Unsupported("local typedef".into()));
            }
            Some(_) if self.starts_type() => {
                let (base, ..) = self.specifiers()?;
                if self.check_punct("(") {
                    return Err(Fail::Unsupported("function pointer declarator".into()));
                }
                let ty = self.pointers(base);
                let (name, _) = self.ident()?;
                let ty = self.array_suffix(ty)?;
                let init = if self.eat_punct("=") {
                    if self.check_punct("{") {
                        return Err(Fail::Unsupported("aggregate initializer".into()));
                    }
                    Some(self.expr()?)
                } else {
                    None
                };
                if self.check_punct(",") {
                    return Err(Fail::Unsupported("multiple declarators".into()));
                }
                self.expect_punct(";")?;
                StmtKind::Decl { name, ty, init }
            }
            Some(_) => {
                let target = self.expr()?;
                let assign = match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::Punct("=")) => Some(None),
                    Some(TokenKind::Punct(p)) => BinaryOp::from_compound(p).map(Some),
                    _ => None,
                };
                let kind = match assign {
                    Some(op) => {
                        self.pos += 1;
                        let value = self.expr()?;
                        StmtKind::Assign { target, op, value }
                    }
                    None => StmtKind::Expr(target),
                };
                if self.check_punct(",") {
                    return Err(Fail::Unsupported("comma operator".into()));
                }
                self.expect_punct(";")?;
                kind
            }
        };
        Ok(Stmt {
            kind,
            span: self.span_between(start),
        })
    }

    /// Skips a balanced group starting at an opening bracket.
    fn skip_group(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.bump() {
            match &t.kind {
                TokenKind::Punct("(" | "[" | "{") => depth += 1,
                TokenKind::Punct(")" | "]" | "}") => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return;
                    }
                }
                _ => {}
            }
            if depth == 0 {
                return;
            }
        }
    }

    /// Skips one statement, understanding enough structure to stop at the
    /// right place for loops, conditionals and blocks.
    fn skip_stmt(&mut self) {
        let Some(tok) = self.peek().cloned() else { return };
        match &tok.kind {
            TokenKind::Punct("{") => self.skip_group(),
            TokenKind::Keyword(Keyword::If) => {
                self.pos += 1;
                if self.check_punct("(") {
                    self.skip_group();
                }
                self.skip_stmt();
                if self.eat_kw(Keyword::Else) {
                    self.skip_stmt();
                }
            }
            TokenKind::Keyword(Keyword::For | Keyword::While | Keyword::Switch) => {
                self.pos += 1;
                if self.check_punct("(") {
                    self.skip_group();
                }
                self.skip_stmt();
            }
            TokenKind::Keyword(Keyword::Do) => {
                self.pos += 1;
                self.skip_stmt();
                if self.eat_kw(Keyword::While) {
                    if self.check_punct("(") {
                        self.skip_group();
                    }
                    self.eat_punct(";");
                }
            }
            _ => self.skip_to_semicolon(),
        }
    }

    fn skip_to_semicolon(&mut self) {
        while let Some(t) = self.peek() {
            if t.is_punct(";") {
                self.pos += 1;
                return;
            }
            if t.is_punct("}") {
                // End of the enclosing block; leave it for the caller.
                return;
            }
            if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                self.skip_group();
            } else {
                self.pos += 1;
            }
        }
    }

    /// Skips a top-level item: through `;` or a braced body.
    fn skip_item(&mut self) {
        let mut advanced = false;
        while let Some(t) = self.peek() {
            if t.is_punct(";") {
                self.pos += 1;
                return;
            }
            if t.is_punct("{") {
                self.skip_group();
                self.eat_punct(";");
                return;
            }
            if t.is_punct("(") || t.is_punct("[") {
                self.skip_group();
            } else {
                self.pos += 1;
            }
            advanced = true;
        }
        if !advanced {
            self.pos += 1;
        }
    }

    // ---- expressions -------------------------------------------------

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let TokenKind::Punct(p) = &self.peek()?.kind else { return None };
        Some(match *p {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Rem,
            "<<" => BinaryOp::Shl,
            ">>" => BinaryOp::Shr,
            "&" => BinaryOp::BitAnd,
            "|" => BinaryOp::BitOr,
            "^" => BinaryOp::BitXor,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "&&" => BinaryOp::LogAnd,
            "||" => BinaryOp::LogOr,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.check_punct("?") {
                return Err(Fail::Unsupported("conditional operator".into()));
            }
            let Some(op) = self.binary_op() else { break };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(&rhs.span);
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("expression").into());
        };
        let op = match &tok.kind {
            TokenKind::Punct("-") => Some(UnaryOp::Neg),
            TokenKind::Punct("+") => Some(UnaryOp::Plus),
            TokenKind::Punct("!") => Some(UnaryOp::LogNot),
            TokenKind::Punct("~") => Some(UnaryOp::BitNot),
            TokenKind::Punct("*") => return Err(Fail::Unsupported("pointer dereference".into())),
            TokenKind::Punct("&") => return Err(Fail::Unsupported("address-of".into())),
            TokenKind::Punct("++" | "--") => return Err(Fail::Unsupported("increment or decrement".into())),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let operand = self.unary()?;
            let span = tok.span.to(&operand.span);
            return Ok(Expr::new(
                ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                span,
            ));
        }
        if tok.is_keyword(Keyword::Sizeof) {
            self.pos += 1;
            let is_type = self.check_punct("(") && {
                self.pos += 1;
                let t = self.starts_type();
                self.pos -= 1;
                t
            };
            if !is_type {
                return Err(Fail::Unsupported("sizeof of an expression".into()));
            }
            self.pos += 1;
            let ty = self.type_name()?;
            self.expect_punct(")")?;
            let span = tok.span.to(&self.prev_span());
            return Ok(Expr::new(ExprKind::SizeOf(ty), span));
        }
        if tok.is_punct("(") {
            self.pos += 1;
            if self.starts_type() {
                let target = self.type_name()?;
                self.expect_punct(")")?;
                let operand = self.unary()?;
                let span = tok.span.to(&operand.span);
                return Ok(Expr::new(
                    ExprKind::Cast {
                        target,
                        operand: Box::new(operand),
                        implicit: false,
                    },
                    span,
                ));
            }
            self.pos -= 1;
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.check_punct("(") {
                let ExprKind::Var(name) = &e.kind else {
                    return Err(Fail::Unsupported("call through an expression".into()));
                };
                let name = name.clone();
                self.pos += 1;
                let mut args = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        args.push(self.expr()?);
                        if self.eat_punct(")") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                let span = e.span.to(&self.prev_span());
                e = Expr::new(ExprKind::Call { name, args }, span);
            } else if self.eat_punct("[") {
                let index = self.expr()?;
                self.expect_punct("]")?;
                let span = e.span.to(&self.prev_span());
                e = Expr::new(
                    ExprKind::Index {
                        base: Box::new(e),
                        index: Box::new(index),
                    },
                    span,
                );
            } else if self.check_punct(".") || self.check_punct("->") {
                let arrow = self.check_punct("->");
                self.pos += 1;
                let (field, fspan) = self.ident()?;
                let span = e.span.to(&fspan);
                e = Expr::new(
                    ExprKind::Member {
                        base: Box::new(e),
                        field,
                        arrow,
                    },
                    span,
                );
            } else if self.check_punct("++") || self.check_punct("--") {
                return Err(Fail::Unsupported("increment or decrement".into()));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("expression").into());
        };
        match &tok.kind {
            TokenKind::IntLit { value, .. } => {
                self.pos += 1;
                let text = self.src[tok.span.offset..tok.span.end()].to_string();
                Ok(Expr::new(
                    ExprKind::IntLiteral {
                        value: *value,
                        text,
                    },
                    tok.span,
                ))
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Var(name.clone()), tok.span))
            }
            TokenKind::Punct("(") => {
                self.pos += 1;
                let inner = self.expr()?;
                let close = self.expect_punct(")")?;
                let span = tok.span.to(&close.span);
                Ok(Expr::new(ExprKind::Paren(Box::new(inner)), span))
            }
            TokenKind::Text(_) => Err(Fail::Unsupported("string or character literal".into())),
            _ => Err(self.unexpected("expression").into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::lexer::tokenize;

    fn parse(src: &str) -> TranslationUnit {
        parse_unit("t.c", src, tokenize("t.c", src).unwrap()).unwrap()
    }

    fn expr(src: &str) -> Expr {
        parse_expr("t.c", src, tokenize("t.c", src).unwrap()).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        let e = expr("a - b - c * d << 2");
        let ExprKind::Binary { op: BinaryOp::Shl, lhs, .. } = &e.kind else { panic!("{e:?}") };
        let ExprKind::Binary { op: BinaryOp::Sub, lhs: inner, rhs } = &lhs.kind else { panic!() };
        assert!(matches!(inner.kind, ExprKind::Binary { op: BinaryOp::Sub, .. }));
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinaryOp::Mul, .. }));
    }

    #[test]
    fn cast_binds_tighter_than_binary() {
        let e = expr("(uint32_t)n * element_size");
        let ExprKind::Binary { op: BinaryOp::Mul, lhs, .. } = &e.kind else { panic!() };
        assert!(matches!(lhs.kind, ExprKind::Cast { implicit: false, .. }));
        assert_eq!(lhs.span.length, "(uint32_t)n".len() as u32);
    }

    #[test]
    fn spans_cover_source_text() {
        let src = "(int32_t)(a - b) < 0";
        let e = expr(src);
        assert_eq!(e.span.length as usize, src.len());
        let ExprKind::Binary { lhs, .. } = &e.kind else { panic!() };
        assert_eq!(&src[lhs.span.offset..lhs.span.end()], "(int32_t)(a - b)");
    }

    #[test]
    fn listing_style_function() {
        let src = "static inline int tcp_seq_lt(uint32_t a, uint32_t b)\n{\n    return (int32_t)(a - b) < 0;\n}\n";
        let u = parse(src);
        let f = u.function("tcp_seq_lt").unwrap();
        assert!(f.is_static && f.is_inline);
        assert_eq!(f.params.len(), 2);
        assert_eq!(f.body.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn loops_become_skipped_regions() {
        let src = "int f(int n) {\n  int s = 0;\n  for (int i = 0; i < n; i++) { s = s + i; }\n  while (n) n = n - 1;\n  return s;\n}";
        let u = parse(src);
        let body = u.function("f").unwrap().body.as_ref().unwrap();
        assert_eq!(body.len(), 4);
        assert!(matches!(body[1].kind, StmtKind::Skipped(_)));
        assert!(matches!(body[2].kind, StmtKind::Skipped(_)));
        assert!(matches!(body[3].kind, StmtKind::Return(Some(_))));
        assert_eq!(u.skipped().len(), 2);
        assert_eq!(u.skipped()[0].span.line, 3);
    }

    #[test]
    fn pointer_dereference_is_skipped_not_fatal() {
        let u = parse("void f(uint8_t *p) { *p = 1; return; }");
        let body = u.function("f").unwrap().body.as_ref().unwrap();
        assert!(matches!(body[0].kind, StmtKind::Skipped(_)));
        assert!(matches!(body[1].kind, StmtKind::Return(None)));
    }

    #[test]
    fn top_level_unsupported_is_skipped() {
        let u = parse("typedef void (*cb)(int);\nint x;\nstruct s { unsigned f : 3; };\n");
        assert_eq!(u.skipped().len(), 2);
        assert_eq!(u.globals().count(), 1);
    }

    #[test]
    fn malformed_input_is_an_error() {
        let src = "int f( { return 1; }";
        let err = parse_unit("t.c", src, tokenize("t.c", src).unwrap()).unwrap_err();
        assert!(matches!(err, FrontendError::Parse { .. }));
        let src = "int f(int a) { return a + ; }";
        assert!(parse_unit("t.c", src, tokenize("t.c", src).unwrap()).is_err());
    }

    #[test]
    fn structs_typedefs_and_globals() {
        let src = "typedef uint64_t CFE_ResourceId_t;\nstruct tcpcb { tcp_seq rcv_nxt; uint8_t buf[16]; };\n\
                   typedef struct { U32 size; } Stack;\nuint8_t window[4096];\n\
                   CFE_ResourceId_t g(CFE_ResourceId_t id);";
        let u = parse(src);
        assert_eq!(u.structs().count(), 2);
        let g: Vec<_> = u.globals().collect();
        assert_eq!(g[0].ty, CType::Array(Box::new(CType::Named("uint8_t".into())), Some(4096)));
        assert_eq!(u.functions().count(), 0);
    }

    #[test]
    fn compound_assignment_and_member_access() {
        let u = parse("void f(struct s *tp) { tp->size -= n * 2; }");
        let body = u.function("f").unwrap().body.as_ref().unwrap();
        let StmtKind::Assign { target, op, .. } = &body[0].kind else { panic!() };
        assert_eq!(*op, Some(BinaryOp::Sub));
        assert!(matches!(target.kind, ExprKind::Member { arrow: true, .. }));
    }
}
