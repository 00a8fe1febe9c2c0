//! Printer for the concrete syntax accepted by [`crate::parse`].

use std::fmt::{self, Display, Formatter, Write};

use crate::syntax::{Context, Expr, Interface, PrimOp, Program, RuleType, Type};

const TOP: u8 = 0;
const ARROW_LHS: u8 = 1;
const ATOM: u8 = 2;

fn write_type(f: &mut Formatter<'_>, t: &Type, prec: u8) -> fmt::Result {
    match t {
        Type::Var(n) => f.write_str(n),
        Type::Int => f.write_str("Int"),
        Type::Bool => f.write_str("Bool"),
        Type::Str => f.write_str("String"),
        Type::Arrow(a, b) => {
            if prec > TOP {
                f.write_char('(')?;
            }
            write_type(f, a, ARROW_LHS)?;
            f.write_str(" -> ")?;
            write_type(f, b, TOP)?;
            if prec > TOP {
                f.write_char(')')?;
            }
            Ok(())
        }
        Type::Pair(a, b) => {
            f.write_char('(')?;
            write_type(f, a, TOP)?;
            f.write_str(", ")?;
            write_type(f, b, TOP)?;
            f.write_char(')')
        }
        Type::List(a) => {
            f.write_char('[')?;
            write_type(f, a, TOP)?;
            f.write_char(']')
        }
        Type::Con(n, args) if args.is_empty() => f.write_str(n),
        Type::Con(n, args) => {
            if prec >= ATOM {
                f.write_char('(')?;
            }
            f.write_str(n)?;
            for a in args {
                f.write_char(' ')?;
                write_type(f, a, ATOM)?;
            }
            if prec >= ATOM {
                f.write_char(')')?;
            }
            Ok(())
        }
        Type::Rule(r) if r.is_trivial() => write_type(f, &r.head, prec),
        Type::Rule(r) => {
            if prec > TOP {
                f.write_char('(')?;
            }
            write_rule(f, r)?;
            if prec > TOP {
                f.write_char(')')?;
            }
            Ok(())
        }
    }
}

fn write_rule(f: &mut Formatter<'_>, r: &RuleType) -> fmt::Result {
    if r.is_trivial() {
        return write_type(f, &r.head, TOP);
    }
    if !r.vars.is_empty() {
        write!(f, "forall {}. ", r.vars.join(" "))?;
        if r.context.is_empty() && !matches!(r.head, Type::Rule(_)) {
            return write_type(f, &r.head, TOP);
        }
    }
    write_context(f, &r.context)?;
    f.write_str(" => ")?;
    write_type(f, &r.head, TOP)
}

fn write_context(f: &mut Formatter<'_>, c: &Context) -> fmt::Result {
    f.write_char('{')?;
    for (i, m) in c.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write_rule(f, m)?;
    }
    f.write_char('}')
}

impl Display for Type {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_type(f, self, TOP)
    }
}

impl Display for RuleType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_rule(f, self)
    }
}

impl Display for Context {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_context(f, self)
    }
}

/// Query targets and other type atoms: parenthesized unless atomic.
pub struct AtomType<'a>(pub &'a Type);

impl Display for AtomType<'_> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_type(f, self.0, ATOM)
    }
}

pub fn escape_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

// Expression precedence levels.
const E_TOP: u8 = 0;
const E_AND: u8 = 1;
const E_CONCAT: u8 = 2;
const E_ADD: u8 = 3;
const E_WITH: u8 = 4;
const E_APP: u8 = 5;
const E_POST: u8 = 6;

fn infix_level(op: PrimOp) -> Option<u8> {
    match op {
        PrimOp::And => Some(E_AND),
        PrimOp::Concat => Some(E_CONCAT),
        PrimOp::Add => Some(E_ADD),
        _ => None,
    }
}

fn write_args(f: &mut Formatter<'_>, args: &[(Expr, RuleType)]) -> fmt::Result {
    f.write_char('{')?;
    for (i, (e, r)) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write_expr(f, e, E_TOP)?;
        write!(f, " : {r}")?;
    }
    f.write_char('}')
}

fn write_types(f: &mut Formatter<'_>, ts: &[Type]) -> fmt::Result {
    f.write_char('[')?;
    for (i, t) in ts.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write_type(f, t, TOP)?;
    }
    f.write_char(']')
}

fn write_expr(f: &mut Formatter<'_>, e: &Expr, prec: u8) -> fmt::Result {
    let level = expr_level(e);
    let paren = level < prec;
    if paren {
        f.write_char('(')?;
    }
    match e {
        Expr::Int(n) => write!(f, "{n}")?,
        Expr::Bool(b) => write!(f, "{b}")?,
        Expr::Str(s) => f.write_str(&escape_str(s))?,
        Expr::Var(x) => f.write_str(x)?,
        Expr::Lam(x, t, b) => {
            write!(f, "\\{x} : {t}. ")?;
            write_expr(f, b, E_TOP)?;
        }
        Expr::App(a, b) => {
            write_expr(f, a, E_APP)?;
            f.write_char(' ')?;
            write_expr(f, b, E_POST)?;
        }
        Expr::Query(r) => write!(f, "?{}", AtomType(&r.to_type()))?,
        Expr::RuleAbs(r, b) => {
            write!(f, "rule ({r}) ")?;
            write_expr(f, b, E_TOP)?;
        }
        Expr::TyApp(b, ts) => {
            write_expr(f, b, E_POST)?;
            write_types(f, ts)?;
        }
        Expr::RuleApp(b, args) => {
            write_expr(f, b, E_APP)?;
            f.write_str(" with ")?;
            write_args(f, args)?;
        }
        Expr::Prim(PrimOp::Pair, es) if es.len() == 2 => {
            f.write_char('(')?;
            write_expr(f, &es[0], E_TOP)?;
            f.write_str(", ")?;
            write_expr(f, &es[1], E_TOP)?;
            f.write_char(')')?;
        }
        Expr::Prim(op, es) if es.len() == 2 && infix_level(*op).is_some() => {
            let l = infix_level(*op).unwrap_or(E_TOP);
            write_expr(f, &es[0], l)?;
            write!(f, " {} ", op.infix().unwrap_or("?"))?;
            write_expr(f, &es[1], l + 1)?;
        }
        Expr::Prim(op, es) => {
            f.write_str(op.name())?;
            for a in es {
                f.write_char(' ')?;
                write_expr(f, a, E_POST)?;
            }
        }
        Expr::If(c, t, el) => {
            f.write_str("if ")?;
            write_expr(f, c, E_TOP)?;
            f.write_str(" then ")?;
            write_expr(f, t, E_TOP)?;
            f.write_str(" else ")?;
            write_expr(f, el, E_TOP)?;
        }
        Expr::Nil(t) => {
            f.write_str("nil[")?;
            write_type(f, t, TOP)?;
            f.write_char(']')?;
        }
        Expr::Record(n, ts, fs) => {
            f.write_str(n)?;
            write_types(f, ts)?;
            f.write_str(" {")?;
            for (i, (name, x)) in fs.iter().enumerate() {
                f.write_str(if i > 0 { ", " } else { " " })?;
                write!(f, "{name} = ")?;
                write_expr(f, x, E_TOP)?;
            }
            f.write_str(if fs.is_empty() { "}" } else { " }" })?;
        }
        Expr::Project(b, field) => {
            write_expr(f, b, E_POST)?;
            write!(f, ".{field}")?;
        }
    }
    if paren {
        f.write_char(')')?;
    }
    Ok(())
}

fn expr_level(e: &Expr) -> u8 {
    match e {
        Expr::Lam(..) | Expr::RuleAbs(..) | Expr::If(..) => E_TOP,
        Expr::Prim(op, es) if es.len() == 2 && infix_level(*op).is_some() => infix_level(*op).unwrap_or(E_TOP),
        Expr::Prim(PrimOp::Pair, es) if es.len() == 2 => u8::MAX,
        Expr::Prim(..) | Expr::App(..) => E_APP,
        Expr::RuleApp(..) => E_WITH,
        Expr::TyApp(..) | Expr::Project(..) => E_POST,
        _ => u8::MAX,
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_expr(f, self, E_TOP)
    }
}

impl Display for Interface {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "interface {}", self.name)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        f.write_str(" = {")?;
        for (i, (n, t)) in self.fields.iter().enumerate() {
            f.write_str(if i > 0 { ", " } else { " " })?;
            write!(f, "{n} : {t}")?;
        }
        f.write_str(" }")
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for i in &self.interfaces {
            writeln!(f, "{i}")?;
        }
        write!(f, "{}", self.body)
    }
}
