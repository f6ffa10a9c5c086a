use std::fmt::Write as _;

use super::ast::*;

/// Renders an expression as C source. Implicit conversions are not
/// printed; parentheses are added only where precedence requires them.
pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(&mut out, e);
    out
}

/// Renders a translation unit as C source that parses back to the same
/// tree (modulo spans). Skipped regions are rendered as comments.
pub fn print_unit(unit: &TranslationUnit) -> String {
    let mut out = String::new();
    for item in &unit.items {
        match item {
            Item::Typedef(t) => {
                let _ = writeln!(out, "typedef {};", declarator(&t.ty, &t.name));
            }
            Item::Struct(s) => {
                let _ = writeln!(out, "struct {} {{", s.name);
                for (name, ty) in &s.fields {
                    let _ = writeln!(out, "    {};", declarator(ty, name));
                }
                out.push_str("};\n");
            }
            Item::Global(g) => {
                out.push_str(&declarator(&g.ty, &g.name));
                if let Some(init) = &g.init {
                    out.push_str(" = ");
                    expr(&mut out, init);
                }
                out.push_str(";\n");
            }
            Item::Function(f) => {
                if f.is_static {
                    out.push_str("static ");
                }
                if f.is_inline {
                    out.push_str("inline ");
                }
                let params = if f.params.is_empty() {
                    "void".to_string()
                } else {
                    f.params
                        .iter()
                        .map(|p| declarator(&p.ty, &p.name))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                let _ = write!(out, "{}({params})", declarator(&f.ret, &f.name));
                match &f.body {
                    None => out.push_str(";\n"),
                    Some(body) => {
                        out.push_str("\n{\n");
                        for s in body {
                            stmt(&mut out, s, 1);
                        }
                        out.push_str("}\n");
                    }
                }
            }
            Item::Skipped(r) => {
                let _ = writeln!(out, "/* skipped: {} */", r.reason);
            }
        }
    }
    out
}

fn type_name(ty: &CType) -> String {
    match ty {
        CType::Pointer(inner) => format!("{} *", type_name(inner)),
        CType::Array(inner, _) => type_name(inner),
        other => other.spelling(),
    }
}

fn declarator(ty: &CType, name: &str) -> String {
    match ty {
        CType::Array(inner, len) => {
            let len = len.map(|n| n.to_string()).unwrap_or_default();
            format!("{} {name}[{len}]", type_name(inner))
        }
        CType::Pointer(_) => format!("{}{name}", type_name(ty)),
        other => format!("{} {name}", type_name(other)),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Decl { name, ty, init } => {
            out.push_str(&declarator(ty, name));
            if let Some(init) = init {
                out.push_str(" = ");
                expr(out, init);
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { target, op, value } => {
            expr(out, target);
            match op {
                Some(op) => {
                    let _ = write!(out, " {}= ", op.symbol());
                }
                None => out.push_str(" = "),
            }
            expr(out, value);
            out.push_str(";\n");
        }
        StmtKind::Expr(e) => {
            expr(out, e);
            out.push_str(";\n");
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            out.push_str("if (");
            expr(out, cond);
            out.push_str(") {\n");
            for s in then_branch {
                stmt(out, s, depth + 1);
            }
            indent(out, depth);
            out.push('}');
            if let Some(els) = else_branch {
                out.push_str(" else {\n");
                for s in els {
                    stmt(out, s, depth + 1);
                }
                indent(out, depth);
                out.push('}');
            }
            out.push('\n');
        }
        StmtKind::Return(e) => {
            out.push_str("return");
            if let Some(e) = e {
                out.push(' ');
                expr(out, e);
            }
            out.push_str(";\n");
        }
        StmtKind::Block(body) => {
            out.push_str("{\n");
            for s in body {
                stmt(out, s, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Skipped(r) => {
            let _ = writeln!(out, "/* skipped: {} */", r.reason);
        }
    }
}

/// Precedence of the printed form of `e`; postfix and primary forms bind
/// tightest.
fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Cast { implicit: true, operand, .. } => prec(operand),
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Unary { .. } | ExprKind::Cast { .. } | ExprKind::SizeOf(_) => 11,
        _ => 12,
    }
}

fn wrapped(out: &mut String, e: &Expr, needs: bool) {
    if needs {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}

fn expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::IntLiteral { text, .. } => out.push_str(text),
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::Paren(inner) => {
            out.push('(');
            expr(out, inner);
            out.push(')');
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            wrapped(out, lhs, prec(lhs) < p);
            let _ = write!(out, " {} ", op.symbol());
            wrapped(out, rhs, prec(rhs) <= p);
        }
        ExprKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            let mut inner = String::new();
            wrapped(&mut inner, operand, prec(operand) < 11);
            // Avoid gluing `- -x` into a decrement token.
            if inner.starts_with(op.symbol()) && matches!(op, UnaryOp::Neg | UnaryOp::Plus) {
                out.push(' ');
            }
            out.push_str(&inner);
        }
        ExprKind::Cast {
            implicit: true,
            operand,
            ..
        } => expr(out, operand),
        ExprKind::Cast { target, operand, .. } => {
            let _ = write!(out, "({})", type_name(target));
            wrapped(out, operand, prec(operand) < 11);
        }
        ExprKind::SizeOf(ty) => {
            let _ = write!(out, "sizeof({})", type_name(ty));
        }
        ExprKind::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, a);
            }
            out.push(')');
        }
        ExprKind::Index { base, index } => {
            wrapped(out, base, prec(base) < 12);
            out.push('[');
            expr(out, index);
            out.push(']');
        }
        ExprKind::Member { base, field, arrow } => {
            wrapped(out, base, prec(base) < 12);
            out.push_str(if *arrow { "->" } else { "." });
            out.push_str(field);
        }
    }
}
