//! The source language: interfaces, annotated lets, `implicit` scopes and
//! bare `?` queries, encoded into λ⇒ with local first-order inference.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, TypeError};
use crate::parse::{ParseError, Parser, Tok};
use crate::subst::TypeSubst;
use crate::syntax::{canonical_cmp, fresh_name, Expr, Interface, Name, PrimOp, Program, RuleType, Type};
use crate::unify::unify;

/// `∀ᾱ. σ̄ ⇒ T`. The quantified variables are a set; their order is fixed
/// only by [`scheme_translate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheme {
    pub vars: Vec<Name>,
    pub context: Vec<Scheme>,
    pub head: Type,
}

impl Scheme {
    pub fn simple(t: Type) -> Self {
        Scheme { vars: Vec::new(), context: Vec::new(), head: t }
    }

    /// Reads a scheme from a parsed core type; heads must be simple types.
    pub fn from_type(t: &Type) -> Result<Scheme, String> {
        match t {
            Type::Rule(r) => {
                check_simple(&r.head)?;
                let context = r.context.iter().map(|m| Scheme::from_type(&m.to_type())).collect::<Result<_, _>>()?;
                Ok(Scheme { vars: r.vars.clone(), context, head: r.head.clone() })
            }
            t => {
                check_simple(t)?;
                Ok(Scheme::simple(t.clone()))
            }
        }
    }

    /// The scheme written as a core rule type, keeping the variable order.
    pub fn to_type(&self) -> Type {
        let context: Vec<RuleType> = self.context.iter().map(|s| RuleType::simple(s.to_type())).collect();
        Type::from_rule(RuleType::new(self.vars.clone(), context, self.head.clone()))
    }
}

fn check_simple(t: &Type) -> Result<(), String> {
    match t {
        Type::Rule(r) => Err(format!("{r} is a rule type; only simple types may appear here")),
        Type::Var(_) | Type::Int | Type::Bool | Type::Str => Ok(()),
        Type::Arrow(a, b) | Type::Pair(a, b) => check_simple(a).and_then(|_| check_simple(b)),
        Type::List(a) => check_simple(a),
        Type::Con(_, args) => args.iter().try_for_each(check_simple),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SExpr {
    Int(i64),
    Bool(bool),
    Str(String),
    Var(Name),
    Lam(Name, Box<SExpr>),
    App(Box<SExpr>, Box<SExpr>),
    Let(Name, Scheme, Box<SExpr>, Box<SExpr>),
    Implicit(Vec<Name>, Box<SExpr>),
    Hole,
    Record(Name, Vec<(Name, SExpr)>),
    Pair(Box<SExpr>, Box<SExpr>),
    List(Vec<SExpr>),
    If(Box<SExpr>, Box<SExpr>, Box<SExpr>),
    /// Infix primitive applications (`+`, `&&`, `++`).
    Prim(PrimOp, Vec<SExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProgram {
    pub interfaces: Vec<Interface>,
    pub body: SExpr,
}

// Parsing.

struct SourceParser {
    p: Parser,
}

impl SourceParser {
    fn program(&mut self) -> Result<SourceProgram, ParseError> {
        let mut interfaces = Vec::new();
        while self.p.is_kw("interface") {
            let i = self.p.interface()?;
            for (f, t) in &i.fields {
                if let Err(m) = check_simple(t) {
                    return self.p.error(format!("field {f}: {m}"));
                }
            }
            interfaces.push(i);
        }
        let body = self.expr()?;
        if !self.p.at_eof() {
            return self.p.unexpected("end of input");
        }
        Ok(SourceProgram { interfaces, body })
    }

    fn scheme(&mut self) -> Result<Scheme, ParseError> {
        let t = self.p.ty()?;
        match Scheme::from_type(&t) {
            Ok(s) => Ok(s),
            Err(m) => self.p.error(m),
        }
    }

    fn expr(&mut self) -> Result<SExpr, ParseError> {
        if self.p.eat(&Tok::Backslash) {
            let mut xs = vec![self.p.ident()?];
            while !matches!(self.p.peek(), Tok::Dot) {
                xs.push(self.p.ident()?);
            }
            self.p.expect(&Tok::Dot)?;
            let body = self.expr()?;
            return Ok(xs.into_iter().rev().fold(body, |b, x| SExpr::Lam(x, Box::new(b))));
        }
        if self.p.eat_kw("let") {
            let u = self.p.ident()?;
            self.p.expect(&Tok::Colon)?;
            let s = self.scheme()?;
            self.p.expect(&Tok::Equals)?;
            let e1 = self.expr()?;
            self.p.expect_kw("in")?;
            let e2 = self.expr()?;
            return Ok(SExpr::Let(u, s, Box::new(e1), Box::new(e2)));
        }
        if self.p.eat_kw("implicit") {
            let braced = self.p.eat(&Tok::LBrace);
            let mut us = vec![self.p.ident()?];
            while self.p.eat(&Tok::Comma) {
                us.push(self.p.ident()?);
            }
            if braced {
                self.p.expect(&Tok::RBrace)?;
            }
            self.p.expect_kw("in")?;
            return Ok(SExpr::Implicit(us, Box::new(self.expr()?)));
        }
        if self.p.eat_kw("if") {
            let c = self.expr()?;
            self.p.expect_kw("then")?;
            let t = self.expr()?;
            self.p.expect_kw("else")?;
            let f = self.expr()?;
            return Ok(SExpr::If(Box::new(c), Box::new(t), Box::new(f)));
        }
        self.infix(0)
    }

    fn infix(&mut self, level: usize) -> Result<SExpr, ParseError> {
        const LEVELS: [(Tok, PrimOp); 3] =
            [(Tok::AndAnd, PrimOp::And), (Tok::PlusPlus, PrimOp::Concat), (Tok::Plus, PrimOp::Add)];
        if level == LEVELS.len() {
            return self.app();
        }
        let (tok, op) = &LEVELS[level];
        let mut lhs = self.infix(level + 1)?;
        while self.p.eat(tok) {
            let rhs = if self.starts_binder() { self.expr()? } else { self.infix(level + 1)? };
            lhs = SExpr::Prim(*op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn starts_binder(&self) -> bool {
        matches!(self.p.peek(), Tok::Backslash) || self.p.is_kw("let") || self.p.is_kw("implicit") || self.p.is_kw("if")
    }

    fn starts_atom(&self) -> bool {
        match self.p.peek() {
            Tok::Ident(s) => matches!(s.as_str(), "true" | "false") || !crate::parse::is_keyword(s),
            Tok::Int(_) | Tok::Str(_) | Tok::Upper(_) | Tok::LParen | Tok::LBrack | Tok::Question => true,
            _ => false,
        }
    }

    fn app(&mut self) -> Result<SExpr, ParseError> {
        let mut e = self.atom()?;
        loop {
            if self.starts_atom() {
                e = SExpr::App(Box::new(e), Box::new(self.atom()?));
            } else if self.starts_binder() {
                return Ok(SExpr::App(Box::new(e), Box::new(self.expr()?)));
            } else {
                return Ok(e);
            }
        }
    }

    fn atom(&mut self) -> Result<SExpr, ParseError> {
        match self.p.peek().clone() {
            Tok::Int(n) => {
                self.p.next();
                Ok(SExpr::Int(n))
            }
            Tok::Str(s) => {
                self.p.next();
                Ok(SExpr::Str(s))
            }
            Tok::Question => {
                self.p.next();
                Ok(SExpr::Hole)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.p.next();
                Ok(SExpr::Bool(s == "true"))
            }
            Tok::Ident(_) => Ok(SExpr::Var(self.p.ident()?)),
            Tok::Upper(_) => {
                let name = self.p.upper()?;
                self.p.expect(&Tok::LBrace)?;
                let mut fields = Vec::new();
                if !self.p.eat(&Tok::RBrace) {
                    loop {
                        let f = self.p.ident()?;
                        self.p.expect(&Tok::Equals)?;
                        fields.push((f, self.expr()?));
                        if self.p.eat(&Tok::RBrace) {
                            break;
                        }
                        self.p.expect(&Tok::Comma)?;
                    }
                }
                Ok(SExpr::Record(name, fields))
            }
            Tok::LParen => {
                self.p.next();
                let a = self.expr()?;
                if self.p.eat(&Tok::Comma) {
                    let b = self.expr()?;
                    self.p.expect(&Tok::RParen)?;
                    return Ok(SExpr::Pair(Box::new(a), Box::new(b)));
                }
                self.p.expect(&Tok::RParen)?;
                Ok(a)
            }
            Tok::LBrack => {
                self.p.next();
                let mut xs = Vec::new();
                if !self.p.eat(&Tok::RBrack) {
                    loop {
                        xs.push(self.expr()?);
                        if self.p.eat(&Tok::RBrack) {
                            break;
                        }
                        self.p.expect(&Tok::Comma)?;
                    }
                }
                Ok(SExpr::List(xs))
            }
            _ => self.p.unexpected("an expression"),
        }
    }
}

pub fn parse_source(src: &str) -> Result<SourceProgram, ParseError> {
    SourceParser { p: Parser::new(src)? }.program()
}

// Scheme translation.

/// `⟦σ⟧`: quantifiers ordered by first occurrence in a left-to-right prefix
/// traversal of the canonically sorted context followed by the head.
pub fn scheme_translate(s: &Scheme) -> RuleType {
    let mut context: Vec<RuleType> = s.context.iter().map(scheme_translate).collect();
    context.sort_by(|a, b| canonical_cmp(&a.to_type(), &b.to_type()));
    let quantified: BTreeSet<&Name> = s.vars.iter().collect();
    let mut order: Vec<Name> = Vec::new();
    let occurrences = context.iter().flat_map(|m| m.ftv_ordered()).chain(s.head.ftv_ordered());
    for v in occurrences {
        if quantified.contains(&v) && !order.contains(&v) {
            order.push(v);
        }
    }
    let mut unused: Vec<Name> = s.vars.iter().filter(|v| !order.contains(v)).cloned().collect();
    unused.sort();
    unused.dedup();
    order.extend(unused);
    RuleType::new(order, context, s.head.clone())
}

// Encoding.

const META: char = '%';

fn is_meta(n: &str) -> bool {
    n.starts_with(META)
}

fn metas_of(t: &Type, out: &mut BTreeSet<Name>) {
    for v in t.ftv() {
        if is_meta(&v) {
            out.insert(v);
        }
    }
}

#[derive(Clone, Debug)]
enum Binding {
    Lambda(Type),
    Let(RuleType),
}

/// A source program encoded into λ⇒ together with its source-level type.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub ty: Type,
    pub program: Program,
}

struct Encoder<'a> {
    interfaces: &'a [Interface],
    solution: TypeSubst,
    metas: usize,
    terms: BTreeSet<Name>,
    types: BTreeSet<Name>,
    tyscope: Vec<(Name, Name)>,
    env: Vec<(Name, Binding)>,
}

fn err<T>(code: ErrorCode, msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError::new(code, msg))
}

fn prim_scheme(op: PrimOp) -> (Vec<Name>, Vec<Type>, Type) {
    if let Some((params, result)) = op.signature() {
        return (Vec::new(), params, result);
    }
    let (a, b) = (Type::var("a"), Type::var("b"));
    let ab = vec!["a".to_string(), "b".to_string()];
    match op {
        PrimOp::Pair => (ab, vec![a.clone(), b.clone()], Type::pair(a, b)),
        PrimOp::Fst => (ab, vec![Type::pair(a.clone(), b)], a),
        PrimOp::Snd => (ab, vec![Type::pair(a, b.clone())], b),
        PrimOp::Cons => (vec!["a".into()], vec![a.clone(), Type::list(a.clone())], Type::list(a)),
        _ => (
            ab,
            vec![Type::arrow(a.clone(), Type::arrow(b.clone(), b.clone())), b.clone(), Type::list(a)],
            b,
        ),
    }
}

impl<'a> Encoder<'a> {
    fn new(program: &'a SourceProgram) -> Self {
        let mut terms = BTreeSet::new();
        let mut types = BTreeSet::new();
        collect_names(&program.body, &mut terms, &mut types);
        for i in &program.interfaces {
            types.extend(i.params.iter().cloned());
            for (f, t) in &i.fields {
                terms.insert(f.clone());
                t.collect_names(&mut types);
            }
        }
        Encoder {
            interfaces: &program.interfaces,
            solution: TypeSubst::new(),
            metas: 0,
            terms,
            types,
            tyscope: Vec::new(),
            env: Vec::new(),
        }
    }

    fn meta(&mut self) -> Type {
        self.metas += 1;
        Type::Var(format!("{META}m{}", self.metas))
    }

    fn zonk(&self, t: &Type) -> Type {
        self.solution.apply(t)
    }

    fn unify(&mut self, t1: &Type, t2: &Type, what: &str) -> Result<(), TypeError> {
        let (a, b) = (self.zonk(t1), self.zonk(t2));
        let mut metas = BTreeSet::new();
        metas_of(&a, &mut metas);
        metas_of(&b, &mut metas);
        match unify(&a, &b, &metas) {
            Some(theta) => {
                self.solution = theta.compose(&self.solution);
                Ok(())
            }
            None => err(ErrorCode::Mismatch, format!("{what}: cannot match {} with {}", show(&a), show(&b))),
        }
    }

    fn lookup(&self, x: &str) -> Option<&Binding> {
        self.env.iter().rev().find(|(y, _)| y == x).map(|(_, b)| b)
    }

    fn with_binding<T>(&mut self, x: &str, b: Binding, f: impl FnOnce(&mut Self) -> T) -> T {
        self.env.push((x.to_string(), b));
        let r = f(self);
        self.env.pop();
        r
    }

    /// Renames the scheme's quantifiers to globally unique names and
    /// resolves its free variables against the enclosing scoped variables.
    fn scheme(&mut self, s: &Scheme) -> Result<RuleType, TypeError> {
        let mark = self.tyscope.len();
        let mut vars = Vec::new();
        for v in &s.vars {
            let w = fresh_name(v, &mut self.types);
            self.tyscope.push((v.clone(), w.clone()));
            vars.push(w);
        }
        let result = self.scheme_body(s, vars);
        self.tyscope.truncate(mark);
        result
    }

    fn scheme_body(&mut self, s: &Scheme, vars: Vec<Name>) -> Result<RuleType, TypeError> {
        let mut context = Vec::new();
        for m in &s.context {
            let r = self.scheme(m)?;
            context.push(Scheme { vars: r.vars.clone(), context: Vec::new(), head: Type::Var(String::new()) });
            context.pop();
            context.push(rule_to_scheme(&r));
        }
        let head = self.scoped(&s.head)?;
        Ok(scheme_translate(&Scheme { vars, context, head }))
    }

    fn scoped(&self, t: &Type) -> Result<Type, TypeError> {
        let mut theta = TypeSubst::new();
        for v in t.ftv() {
            match self.tyscope.iter().rev().find(|(s, _)| *s == v) {
                Some((_, w)) => theta.insert(v, Type::Var(w.clone())),
                None => return err(ErrorCode::Unbound, format!("unbound type variable {v}")),
            }
        }
        Ok(theta.apply(t))
    }

    fn interface(&self, name: &str) -> Result<&'a Interface, TypeError> {
        match self.interfaces.iter().find(|i| i.name == name) {
            Some(i) => Ok(i),
            None => err(ErrorCode::Unbound, format!("unknown interface {name}")),
        }
    }

    fn accessor_type(&mut self, i: &Interface, field: &Type) -> RuleType {
        let mut theta = TypeSubst::new();
        let mut vars = Vec::new();
        for p in &i.params {
            let w = fresh_name(p, &mut self.types);
            theta.insert(p.clone(), Type::Var(w.clone()));
            vars.push(w);
        }
        let record = Type::Con(i.name.clone(), vars.iter().map(|v| Type::var(v)).collect());
        RuleType::new(vars, Vec::new(), Type::arrow(record, theta.apply(field)))
    }

    fn program(&mut self, body: &SExpr) -> Result<(Type, Expr), TypeError> {
        let mut accessors = Vec::new();
        for i in self.interfaces {
            for (f, t) in &i.fields {
                accessors.push((f.clone(), i, self.accessor_type(i, t)));
            }
        }
        for (f, _, r) in &accessors {
            self.env.push((f.clone(), Binding::Let(r.clone())));
        }
        let (ty, mut e) = self.expr(body)?;
        for (f, i, r) in accessors.into_iter().rev() {
            self.env.pop();
            let Type::Arrow(record, _) = &r.head else { unreachable!() };
            let x = fresh_name("r", &mut self.terms);
            let _ = i;
            let get = Expr::lam(&x, (**record).clone(), Expr::Project(Box::new(Expr::var(&x)), f.clone()));
            e = Expr::app(Expr::lam(&f, r.to_type(), e), Expr::rule_abs(r, get));
        }
        Ok((ty, e))
    }

    fn expr(&mut self, e: &SExpr) -> Result<(Type, Expr), TypeError> {
        match e {
            SExpr::Int(n) => Ok((Type::Int, Expr::Int(*n))),
            SExpr::Bool(b) => Ok((Type::Bool, Expr::Bool(*b))),
            SExpr::Str(s) => Ok((Type::Str, Expr::Str(s.clone()))),
            SExpr::Var(x) => match self.lookup(x).cloned() {
                Some(Binding::Lambda(t)) => Ok((t, Expr::var(x))),
                Some(Binding::Let(r)) => Ok(self.instantiate(x, &r)),
                None => match PrimOp::from_name(x) {
                    Some(op) => self.prim(op, &[]),
                    None => err(ErrorCode::Unbound, format!("unbound variable {x}")),
                },
            },
            SExpr::Lam(x, b) => {
                let t = self.meta();
                let (tb, eb) = self.with_binding(x, Binding::Lambda(t.clone()), |s| s.expr(b))?;
                Ok((Type::arrow(t.clone(), tb), Expr::lam(x, t, eb)))
            }
            SExpr::App(..) => {
                let mut spine = Vec::new();
                let mut head = e;
                while let SExpr::App(f, a) = head {
                    spine.push(&**a);
                    head = f;
                }
                spine.reverse();
                let prim = match head {
                    SExpr::Var(x) if self.lookup(x).is_none() => PrimOp::from_name(x),
                    _ => None,
                };
                let (mut tf, mut ef, rest) = match prim {
                    Some(op) => {
                        let k = op.arity().min(spine.len());
                        let (t, e) = self.prim(op, &spine[..k])?;
                        (t, e, &spine[k..])
                    }
                    None => {
                        let (t, e) = self.expr(head)?;
                        (t, e, &spine[..])
                    }
                };
                for a in rest {
                    let (ta, ea) = self.expr(a)?;
                    let r = self.meta();
                    self.unify(&tf, &Type::arrow(ta, r.clone()), "application")?;
                    tf = r;
                    ef = Expr::app(ef, ea);
                }
                Ok((tf, ef))
            }
            SExpr::Prim(op, args) => {
                let args: Vec<&SExpr> = args.iter().collect();
                self.prim(*op, &args)
            }
            SExpr::Let(u, s, e1, e2) => {
                let mark = self.tyscope.len();
                let mut vars = Vec::new();
                for v in &s.vars {
                    let w = fresh_name(v, &mut self.types);
                    self.tyscope.push((v.clone(), w.clone()));
                    vars.push(w);
                }
                let r = self.scheme_body(s, vars);
                let r = match r {
                    Ok(r) => r,
                    Err(e) => {
                        self.tyscope.truncate(mark);
                        return Err(e);
                    }
                };
                let first = self.expr(e1);
                self.tyscope.truncate(mark);
                let (t1, c1) = first?;
                self.unify(&t1, &r.head, &format!("definition of {u}"))?;
                let (t2, c2) = self.with_binding(u, Binding::Let(r.clone()), |s| s.expr(e2))?;
                Ok((t2, Expr::app(Expr::lam(u, r.to_type(), c2), Expr::rule_abs(r, c1))))
            }
            SExpr::Implicit(us, b) => {
                let mut rules = Vec::new();
                for u in us {
                    match self.lookup(u).cloned() {
                        Some(Binding::Let(r)) => rules.push((Expr::var(u), r)),
                        Some(Binding::Lambda(t)) => rules.push((Expr::var(u), RuleType::simple(t))),
                        None => return err(ErrorCode::Unbound, format!("unbound variable {u}")),
                    }
                }
                let (tb, eb) = self.expr(b)?;
                let rule = RuleType::new(Vec::new(), rules.iter().map(|(_, r)| r.clone()), tb.clone());
                Ok((tb, Expr::RuleApp(Box::new(Expr::rule_abs(rule, eb)), rules)))
            }
            SExpr::Hole => {
                let t = self.meta();
                Ok((t.clone(), Expr::RuleApp(Box::new(Expr::query(t)), Vec::new())))
            }
            SExpr::Record(name, fields) => {
                let i = self.interface(name)?;
                let targs: Vec<Type> = i.params.iter().map(|_| self.meta()).collect();
                let theta = TypeSubst::zip(&i.params, &targs);
                for (f, _) in fields {
                    if !i.fields.iter().any(|(g, _)| g == f) {
                        return err(ErrorCode::Mismatch, format!("{name} has no field {f}"));
                    }
                }
                let mut out = Vec::new();
                for (f, t) in &i.fields {
                    let mut given = fields.iter().filter(|(g, _)| g == f);
                    let Some((_, x)) = given.next() else {
                        return err(ErrorCode::Mismatch, format!("missing field {f} in {name} record"));
                    };
                    if given.next().is_some() {
                        return err(ErrorCode::Mismatch, format!("field {f} is given twice"));
                    }
                    let (tx, ex) = self.expr(x)?;
                    self.unify(&tx, &theta.apply(t), &format!("field {f}"))?;
                    out.push((f.clone(), ex));
                }
                Ok((Type::Con(name.clone(), targs.clone()), Expr::Record(name.clone(), targs, out)))
            }
            SExpr::Pair(a, b) => {
                let (ta, ea) = self.expr(a)?;
                let (tb, eb) = self.expr(b)?;
                Ok((Type::pair(ta, tb), Expr::Prim(PrimOp::Pair, vec![ea, eb])))
            }
            SExpr::List(xs) => {
                let elem = self.meta();
                let mut items = Vec::new();
                for x in xs {
                    let (tx, ex) = self.expr(x)?;
                    self.unify(&tx, &elem, "list element")?;
                    items.push(ex);
                }
                let nil = Expr::Nil(elem.clone());
                let list = items.into_iter().rev().fold(nil, |acc, x| Expr::Prim(PrimOp::Cons, vec![x, acc]));
                Ok((Type::list(elem), list))
            }
            SExpr::If(c, t, f) => {
                let (tc, ec) = self.expr(c)?;
                self.unify(&tc, &Type::Bool, "condition")?;
                let (tt, et) = self.expr(t)?;
                let (tf, ef) = self.expr(f)?;
                self.unify(&tt, &tf, "branches of if")?;
                Ok((tt, Expr::If(Box::new(ec), Box::new(et), Box::new(ef))))
            }
        }
    }

    /// Instantiates a let-bound variable with fresh metavariables and fires
    /// one query per context member.
    fn instantiate(&mut self, u: &str, r: &RuleType) -> (Type, Expr) {
        let metas: Vec<Type> = r.vars.iter().map(|_| self.meta()).collect();
        let theta = TypeSubst::zip(&r.vars, &metas);
        let mut e = Expr::var(u);
        if !metas.is_empty() {
            e = Expr::TyApp(Box::new(e), metas);
        }
        if !r.context.is_empty() {
            let args = r
                .context
                .iter()
                .map(|m| {
                    let m = theta.apply_rule(m);
                    (Expr::Query(m.clone()), m)
                })
                .collect();
            e = Expr::RuleApp(Box::new(e), args);
        }
        (theta.apply(&r.head), e)
    }

    fn prim(&mut self, op: PrimOp, args: &[&SExpr]) -> Result<(Type, Expr), TypeError> {
        let (vars, params, result) = prim_scheme(op);
        let metas: Vec<Type> = vars.iter().map(|_| self.meta()).collect();
        let theta = TypeSubst::zip(&vars, &metas);
        let params: Vec<Type> = params.iter().map(|p| theta.apply(p)).collect();
        let result = theta.apply(&result);
        let mut operands = Vec::new();
        for (a, p) in args.iter().zip(&params) {
            let (ta, ea) = self.expr(a)?;
            self.unify(&ta, p, &format!("operand of {}", op.name()))?;
            operands.push(ea);
        }
        let missing: Vec<(Name, Type)> = params[args.len()..]
            .iter()
            .map(|p| (fresh_name("p", &mut self.terms), p.clone()))
            .collect();
        operands.extend(missing.iter().map(|(x, _)| Expr::var(x)));
        let mut e = Expr::Prim(op, operands);
        let mut t = result;
        for (x, p) in missing.into_iter().rev() {
            e = Expr::lam(&x, p.clone(), e);
            t = Type::arrow(p, t);
        }
        Ok((t, e))
    }

    /// Applies the final solution throughout, rejecting unsolved
    /// metavariables and merging queries that became identical.
    fn seal(&self, e: &Expr) -> Result<Expr, TypeError> {
        let rule = |r: &RuleType| -> Result<RuleType, TypeError> {
            let r = self.solution.apply_rule(r);
            self.solved(&r.to_type())?;
            Ok(RuleType::new(r.vars, r.context.members().to_vec(), r.head))
        };
        let ty = |t: &Type| -> Result<Type, TypeError> {
            let t = self.zonk(t);
            self.solved(&t)?;
            Ok(t)
        };
        let bx = |x: &Expr| self.seal(x).map(Box::new);
        Ok(match e {
            Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => e.clone(),
            Expr::Lam(x, t, b) => Expr::Lam(x.clone(), ty(t)?, bx(b)?),
            Expr::App(f, a) => Expr::App(bx(f)?, bx(a)?),
            Expr::Query(r) => Expr::Query(rule(r)?),
            Expr::RuleAbs(r, b) => Expr::RuleAbs(rule(r)?, bx(b)?),
            Expr::TyApp(b, ts) => Expr::TyApp(bx(b)?, ts.iter().map(ty).collect::<Result<_, _>>()?),
            Expr::RuleApp(b, args) => {
                let mut out: Vec<(Expr, RuleType)> = Vec::new();
                for (a, r) in args {
                    let r = rule(r)?;
                    let a = self.seal(a)?;
                    let generated = matches!(&a, Expr::Query(q) if q.alpha_eq(&r));
                    if generated && out.iter().any(|(_, s)| s.alpha_eq(&r)) {
                        continue;
                    }
                    out.push((a, r));
                }
                Expr::RuleApp(bx(b)?, out)
            }
            Expr::Prim(op, args) => Expr::Prim(*op, args.iter().map(|a| self.seal(a)).collect::<Result<_, _>>()?),
            Expr::If(c, t, f) => Expr::If(bx(c)?, bx(t)?, bx(f)?),
            Expr::Nil(t) => Expr::Nil(ty(t)?),
            Expr::Record(n, ts, fs) => Expr::Record(
                n.clone(),
                ts.iter().map(ty).collect::<Result<_, _>>()?,
                fs.iter().map(|(f, x)| Ok((f.clone(), self.seal(x)?))).collect::<Result<_, TypeError>>()?,
            ),
            Expr::Project(b, f) => Expr::Project(bx(b)?, f.clone()),
        })
    }

    fn solved(&self, t: &Type) -> Result<(), TypeError> {
        let mut metas = BTreeSet::new();
        metas_of(t, &mut metas);
        if metas.is_empty() {
            Ok(())
        } else {
            err(ErrorCode::AmbiguousInstantiation, format!("ambiguous instantiation: cannot determine the type {}", show(t)))
        }
    }
}

fn rule_to_scheme(r: &RuleType) -> Scheme {
    Scheme { vars: r.vars.clone(), context: r.context.iter().map(rule_to_scheme).collect(), head: r.head.clone() }
}

/// Renders a type with metavariables shown as `_`.
fn show(t: &Type) -> String {
    let mut theta = TypeSubst::new();
    for v in t.ftv() {
        if is_meta(&v) {
            theta.insert(v, Type::var("_"));
        }
    }
    theta.apply(t).to_string()
}

fn collect_names(e: &SExpr, terms: &mut BTreeSet<Name>, types: &mut BTreeSet<Name>) {
    match e {
        SExpr::Int(_) | SExpr::Bool(_) | SExpr::Str(_) | SExpr::Hole => {}
        SExpr::Var(x) => {
            terms.insert(x.clone());
        }
        SExpr::Lam(x, b) => {
            terms.insert(x.clone());
            collect_names(b, terms, types);
        }
        SExpr::App(a, b) | SExpr::Pair(a, b) => {
            collect_names(a, terms, types);
            collect_names(b, terms, types);
        }
        SExpr::Let(u, s, a, b) => {
            terms.insert(u.clone());
            s.to_type().collect_names(types);
            collect_names(a, terms, types);
            collect_names(b, terms, types);
        }
        SExpr::Implicit(us, b) => {
            terms.extend(us.iter().cloned());
            collect_names(b, terms, types);
        }
        SExpr::Record(_, fs) => fs.iter().for_each(|(_, x)| collect_names(x, terms, types)),
        SExpr::List(xs) | SExpr::Prim(_, xs) => xs.iter().for_each(|x| collect_names(x, terms, types)),
        SExpr::If(a, b, c) => {
            collect_names(a, terms, types);
            collect_names(b, terms, types);
            collect_names(c, terms, types);
        }
    }
}

/// Encodes a source program into a closed λ⇒ program.
pub fn encode_program(p: &SourceProgram) -> Result<Encoded, TypeError> {
    let mut seen = BTreeMap::new();
    for i in &p.interfaces {
        for (f, _) in &i.fields {
            if let Some(j) = seen.insert(f.clone(), i.name.clone()) {
                return err(ErrorCode::Mismatch, format!("field {f} is declared by both {j} and {}", i.name));
            }
        }
    }
    let mut enc = Encoder::new(p);
    let (ty, body) = enc.program(&p.body)?;
    let body = enc.seal(&body)?;
    let ty = enc.zonk(&ty);
    enc.solved(&ty)?;
    Ok(Encoded { ty, program: Program { interfaces: p.interfaces.clone(), body } })
}

/// Parses and encodes source text.
pub fn compile_source(src: &str) -> Result<Encoded, crate::error::Error> {
    let p = parse_source(src)?;
    Ok(encode_program(&p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systemf::eval_pipeline;
    use crate::typecheck::infer;

    fn run(src: &str) -> String {
        let enc = compile_source(src).unwrap_or_else(|e| panic!("{e}"));
        let t = infer(&enc.program).unwrap_or_else(|e| panic!("{e}\n{}", enc.program));
        assert!(t.alpha_eq(&enc.ty), "{t} vs {}", enc.ty);
        eval_pipeline(&enc.program).unwrap_or_else(|e| panic!("{e}")).to_string()
    }

    fn code(src: &str) -> ErrorCode {
        match compile_source(src) {
            Err(crate::error::Error::Type(e)) => e.code,
            Ok(enc) => match infer(&enc.program) {
                Err(e) => e.code,
                Ok(t) => panic!("accepted at {t}"),
            },
            Err(e) => panic!("{e}"),
        }
    }

    fn scheme(s: &str) -> Scheme {
        Scheme::from_type(&crate::parse::parse_type(s).unwrap()).unwrap()
    }

    #[test]
    fn identity_at_int() {
        assert_eq!(run("let id : forall a. {} => a -> a = \\x. x in id 3"), "3");
    }

    #[test]
    fn unconstrained_instantiation_is_ambiguous() {
        let src = "let id : forall a. a -> a = \\x. x in let k : forall b. b -> Int = \\y. 1 in k id";
        assert_eq!(code(src), ErrorCode::AmbiguousInstantiation);
        assert_eq!(code("let f : forall a. {a} => Int = 1 in 2"), ErrorCode::Unambiguous);
    }

    #[test]
    fn holes_need_a_known_type() {
        assert_eq!(code("let x : Int = 1 in (\\y. 2) ?"), ErrorCode::AmbiguousInstantiation);
        assert_eq!(run("let x : Int = 1 in implicit x in ? + 1"), "2");
    }

    #[test]
    fn translation_orders_quantifiers_by_occurrence() {
        let r = scheme_translate(&scheme("forall b a. {Eq a, Eq b} => Eq (a, b)"));
        assert_eq!(r.vars, vec!["a".to_string(), "b".to_string()]);
        let r = scheme_translate(&scheme("forall b a. (b, a)"));
        assert_eq!(r.vars, vec!["b".to_string(), "a".to_string()]);
        let r = scheme_translate(&scheme("forall a. {a -> String} => [a] -> String"));
        assert_eq!(r.to_string(), "forall a. {a -> String} => [a] -> String");
        let r = scheme_translate(&scheme("forall a. a -> a"));
        assert_eq!(r.to_string(), "forall a. a -> a");
    }

    #[test]
    fn records_and_accessors() {
        let src = "interface Box a = { get : a, tag : String } \
                   let b : Box Int = Box { tag = \"t\", get = 5 } in (get b, tag b)";
        assert_eq!(run(src), "(5, \"t\")");
        assert_eq!(code("interface Box a = { get : a } Box { got = 1 }"), ErrorCode::Mismatch);
        assert_eq!(code("Nope { x = 1 }"), ErrorCode::Unbound);
    }

    #[test]
    fn implicit_scopes() {
        let src = "let show : forall a. {a -> String} => a -> String = ? in \
                   let showInt : Int -> String = \\n. intToString n in \
                   implicit showInt in show 42";
        assert_eq!(run(src), "\"42\"");
    }

    #[test]
    fn errors() {
        assert_eq!(code("y"), ErrorCode::Unbound);
        assert_eq!(code("1 + true"), ErrorCode::Mismatch);
        assert_eq!(code("let x : a = 1 in x"), ErrorCode::Unbound);
        assert!(parse_source("let x : {Int} => Int -> ({Bool} => Int) = 1 in x").is_err());
    }

    #[test]
    fn prims_are_eta_expanded() {
        assert_eq!(run("fold (\\x acc. x + acc) 0 [1, 2, 3]"), "6");
        assert_eq!(run("let f : Int -> Int -> Int = add in f 1 2"), "3");
        assert_eq!(run("let p : (Int, Bool) = (1, true) in (snd p, fst p)"), "(true, 1)");
    }
}
