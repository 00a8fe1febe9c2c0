//! System F with the same base extensions as the source calculus: a
//! typechecker, an environment-based call-by-value evaluator and a
//! substitution-based small-step reducer.

use std::collections::BTreeSet;
use std::fmt::{self, Display, Formatter, Write};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::print::escape_str;
use crate::syntax::{fresh_name, Name, PrimOp};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FType {
    Var(Name),
    Int,
    Bool,
    Str,
    Unit,
    Arrow(Box<FType>, Box<FType>),
    Pair(Box<FType>, Box<FType>),
    List(Box<FType>),
    Con(Name, Vec<FType>),
    Forall(Name, Box<FType>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FExpr {
    Var(Name),
    Int(i64),
    Bool(bool),
    Str(String),
    Unit,
    Lam(Name, FType, Box<FExpr>),
    App(Box<FExpr>, Box<FExpr>),
    TyLam(Name, Box<FExpr>),
    TyApp(Box<FExpr>, FType),
    Prim(PrimOp, Vec<FExpr>),
    If(Box<FExpr>, Box<FExpr>, Box<FExpr>),
    Nil(FType),
    Record(Name, Vec<FType>, Vec<(Name, FExpr)>),
    Project(Box<FExpr>, Name),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FInterface {
    pub name: Name,
    pub params: Vec<Name>,
    pub fields: Vec<(Name, FType)>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("System F: {0}")]
pub struct FError(pub String);

fn ferr<T>(msg: impl Into<String>) -> Result<T, FError> {
    Err(FError(msg.into()))
}

impl FType {
    pub fn arrow(a: FType, b: FType) -> FType {
        FType::Arrow(Box::new(a), Box::new(b))
    }

    pub fn pair(a: FType, b: FType) -> FType {
        FType::Pair(Box::new(a), Box::new(b))
    }

    pub fn list(a: FType) -> FType {
        FType::List(Box::new(a))
    }

    pub fn forall(v: &str, body: FType) -> FType {
        FType::Forall(v.to_string(), Box::new(body))
    }

    pub fn ftv(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.ftv_into(&mut Vec::new(), &mut out);
        out
    }

    fn ftv_into(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            FType::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            FType::Int | FType::Bool | FType::Str | FType::Unit => {}
            FType::Arrow(a, b) | FType::Pair(a, b) => {
                a.ftv_into(bound, out);
                b.ftv_into(bound, out);
            }
            FType::List(a) => a.ftv_into(bound, out),
            FType::Con(_, args) => args.iter().for_each(|a| a.ftv_into(bound, out)),
            FType::Forall(v, b) => {
                bound.push(v.clone());
                b.ftv_into(bound, out);
                bound.pop();
            }
        }
    }

    fn names_into(&self, out: &mut BTreeSet<Name>) {
        match self {
            FType::Var(v) => {
                out.insert(v.clone());
            }
            FType::Int | FType::Bool | FType::Str | FType::Unit => {}
            FType::Arrow(a, b) | FType::Pair(a, b) => {
                a.names_into(out);
                b.names_into(out);
            }
            FType::List(a) => a.names_into(out),
            FType::Con(_, args) => args.iter().for_each(|a| a.names_into(out)),
            FType::Forall(v, b) => {
                out.insert(v.clone());
                b.names_into(out);
            }
        }
    }

    /// Capture-avoiding substitution of `t` for `v`.
    pub fn subst(&self, v: &str, t: &FType) -> FType {
        match self {
            FType::Var(w) if w == v => t.clone(),
            FType::Var(_) | FType::Int | FType::Bool | FType::Str | FType::Unit => self.clone(),
            FType::Arrow(a, b) => FType::arrow(a.subst(v, t), b.subst(v, t)),
            FType::Pair(a, b) => FType::pair(a.subst(v, t), b.subst(v, t)),
            FType::List(a) => FType::list(a.subst(v, t)),
            FType::Con(n, args) => FType::Con(n.clone(), args.iter().map(|a| a.subst(v, t)).collect()),
            FType::Forall(w, _) if w == v => self.clone(),
            FType::Forall(w, b) => {
                if t.ftv().contains(w) && b.ftv().contains(v) {
                    let mut used = t.ftv();
                    b.names_into(&mut used);
                    used.insert(v.to_string());
                    let w2 = fresh_name(w, &mut used);
                    let b2 = b.subst(w, &FType::Var(w2.clone()));
                    FType::Forall(w2, Box::new(b2.subst(v, t)))
                } else {
                    FType::Forall(w.clone(), Box::new(b.subst(v, t)))
                }
            }
        }
    }

    pub fn alpha_eq(&self, other: &FType) -> bool {
        fn go(a: &FType, b: &FType, sa: &mut Vec<Name>, sb: &mut Vec<Name>) -> bool {
            match (a, b) {
                (FType::Var(x), FType::Var(y)) => {
                    let ix = sa.iter().rposition(|v| v == x);
                    let iy = sb.iter().rposition(|v| v == y);
                    match (ix, iy) {
                        (Some(i), Some(j)) => i == j,
                        (None, None) => x == y,
                        _ => false,
                    }
                }
                (FType::Int, FType::Int)
                | (FType::Bool, FType::Bool)
                | (FType::Str, FType::Str)
                | (FType::Unit, FType::Unit) => true,
                (FType::Arrow(a1, b1), FType::Arrow(a2, b2)) | (FType::Pair(a1, b1), FType::Pair(a2, b2)) => {
                    go(a1, a2, sa, sb) && go(b1, b2, sa, sb)
                }
                (FType::List(a1), FType::List(a2)) => go(a1, a2, sa, sb),
                (FType::Con(n1, xs), FType::Con(n2, ys)) => {
                    n1 == n2 && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| go(x, y, sa, sb))
                }
                (FType::Forall(x, b1), FType::Forall(y, b2)) => {
                    sa.push(x.clone());
                    sb.push(y.clone());
                    let r = go(b1, b2, sa, sb);
                    sa.pop();
                    sb.pop();
                    r
                }
                _ => false,
            }
        }
        go(self, other, &mut Vec::new(), &mut Vec::new())
    }
}

impl FExpr {
    pub fn var(x: &str) -> FExpr {
        FExpr::Var(x.to_string())
    }

    pub fn lam(x: &str, t: FType, body: FExpr) -> FExpr {
        FExpr::Lam(x.to_string(), t, Box::new(body))
    }

    pub fn app(f: FExpr, a: FExpr) -> FExpr {
        FExpr::App(Box::new(f), Box::new(a))
    }

    pub fn tylam(v: &str, body: FExpr) -> FExpr {
        FExpr::TyLam(v.to_string(), Box::new(body))
    }

    pub fn tyapp(e: FExpr, t: FType) -> FExpr {
        FExpr::TyApp(Box::new(e), t)
    }

    pub fn size(&self) -> usize {
        1 + match self {
            FExpr::Lam(_, _, b) | FExpr::TyLam(_, b) | FExpr::TyApp(b, _) | FExpr::Project(b, _) => b.size(),
            FExpr::App(f, a) => f.size() + a.size(),
            FExpr::Prim(_, es) => es.iter().map(FExpr::size).sum(),
            FExpr::If(c, t, e) => c.size() + t.size() + e.size(),
            FExpr::Record(_, _, fs) => fs.iter().map(|(_, e)| e.size()).sum(),
            _ => 0,
        }
    }

    fn type_names_into(&self, out: &mut BTreeSet<Name>) {
        match self {
            FExpr::Lam(_, t, b) => {
                t.names_into(out);
                b.type_names_into(out);
            }
            FExpr::TyLam(v, b) => {
                out.insert(v.clone());
                b.type_names_into(out);
            }
            FExpr::TyApp(b, t) => {
                t.names_into(out);
                b.type_names_into(out);
            }
            FExpr::App(f, a) => {
                f.type_names_into(out);
                a.type_names_into(out);
            }
            FExpr::Prim(_, es) => es.iter().for_each(|e| e.type_names_into(out)),
            FExpr::If(c, t, e) => {
                c.type_names_into(out);
                t.type_names_into(out);
                e.type_names_into(out);
            }
            FExpr::Nil(t) => t.names_into(out),
            FExpr::Record(_, ts, fs) => {
                ts.iter().for_each(|t| t.names_into(out));
                fs.iter().for_each(|(_, e)| e.type_names_into(out));
            }
            FExpr::Project(b, _) => b.type_names_into(out),
            _ => {}
        }
    }

    /// Capture-avoiding substitution of type `t` for type variable `v`.
    pub fn subst_type(&self, v: &str, t: &FType) -> FExpr {
        let st = |e: &FExpr| e.subst_type(v, t);
        match self {
            FExpr::Var(_) | FExpr::Int(_) | FExpr::Bool(_) | FExpr::Str(_) | FExpr::Unit => self.clone(),
            FExpr::Lam(x, ty, b) => FExpr::Lam(x.clone(), ty.subst(v, t), Box::new(st(b))),
            FExpr::App(f, a) => FExpr::app(st(f), st(a)),
            FExpr::TyLam(w, _) if w == v => self.clone(),
            FExpr::TyLam(w, b) => {
                if t.ftv().contains(w) {
                    let mut used = t.ftv();
                    b.type_names_into(&mut used);
                    used.insert(v.to_string());
                    let w2 = fresh_name(w, &mut used);
                    let b2 = b.subst_type(w, &FType::Var(w2.clone()));
                    FExpr::TyLam(w2, Box::new(b2.subst_type(v, t)))
                } else {
                    FExpr::TyLam(w.clone(), Box::new(st(b)))
                }
            }
            FExpr::TyApp(b, ty) => FExpr::tyapp(st(b), ty.subst(v, t)),
            FExpr::Prim(op, es) => FExpr::Prim(*op, es.iter().map(st).collect()),
            FExpr::If(c, a, b) => FExpr::If(Box::new(st(c)), Box::new(st(a)), Box::new(st(b))),
            FExpr::Nil(ty) => FExpr::Nil(ty.subst(v, t)),
            FExpr::Record(n, ts, fs) => FExpr::Record(
                n.clone(),
                ts.iter().map(|x| x.subst(v, t)).collect(),
                fs.iter().map(|(f, e)| (f.clone(), st(e))).collect(),
            ),
            FExpr::Project(b, f) => FExpr::Project(Box::new(st(b)), f.clone()),
        }
    }

    /// Substitutes a closed term for a term variable.
    fn subst_term(&self, x: &str, val: &FExpr) -> FExpr {
        let s = |e: &FExpr| e.subst_term(x, val);
        match self {
            FExpr::Var(y) if y == x => val.clone(),
            FExpr::Var(_) | FExpr::Int(_) | FExpr::Bool(_) | FExpr::Str(_) | FExpr::Unit | FExpr::Nil(_) => {
                self.clone()
            }
            FExpr::Lam(y, _, _) if y == x => self.clone(),
            FExpr::Lam(y, t, b) => FExpr::Lam(y.clone(), t.clone(), Box::new(s(b))),
            FExpr::App(f, a) => FExpr::app(s(f), s(a)),
            FExpr::TyLam(w, b) => FExpr::TyLam(w.clone(), Box::new(s(b))),
            FExpr::TyApp(b, t) => FExpr::tyapp(s(b), t.clone()),
            FExpr::Prim(op, es) => FExpr::Prim(*op, es.iter().map(s).collect()),
            FExpr::If(c, a, b) => FExpr::If(Box::new(s(c)), Box::new(s(a)), Box::new(s(b))),
            FExpr::Record(n, ts, fs) => {
                FExpr::Record(n.clone(), ts.clone(), fs.iter().map(|(f, e)| (f.clone(), s(e))).collect())
            }
            FExpr::Project(b, f) => FExpr::Project(Box::new(s(b)), f.clone()),
        }
    }
}

// Typechecking.

#[derive(Clone, Debug, Default)]
pub struct FEnv {
    terms: Vec<(Name, FType)>,
    tyvars: Vec<Name>,
}

impl FEnv {
    pub fn new() -> Self {
        FEnv::default()
    }

    pub fn bind(&mut self, x: &str, t: FType) {
        self.terms.push((x.to_string(), t));
    }

    pub fn bind_tyvar(&mut self, v: &str) {
        self.tyvars.push(v.to_string());
    }

    fn lookup(&self, x: &str) -> Option<&FType> {
        self.terms.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    fn type_names(&self) -> BTreeSet<Name> {
        let mut out: BTreeSet<Name> = self.tyvars.iter().cloned().collect();
        for (_, t) in &self.terms {
            t.names_into(&mut out);
        }
        out
    }
}

pub struct FChecker<'a> {
    interfaces: &'a [FInterface],
}

impl<'a> FChecker<'a> {
    pub fn new(interfaces: &'a [FInterface]) -> Self {
        FChecker { interfaces }
    }

    fn interface(&self, name: &str) -> Result<&'a FInterface, FError> {
        match self.interfaces.iter().find(|i| i.name == name) {
            Some(i) => Ok(i),
            None => ferr(format!("unknown interface {name}")),
        }
    }

    fn field_types(&self, name: &str, targs: &[FType]) -> Result<Vec<(Name, FType)>, FError> {
        let i = self.interface(name)?;
        if i.params.len() != targs.len() {
            return ferr(format!("{name} expects {} type arguments", i.params.len()));
        }
        Ok(i.fields
            .iter()
            .map(|(f, t)| {
                let t = simultaneous(t, &i.params, targs);
                (f.clone(), t)
            })
            .collect())
    }

    fn expect(&self, what: &str, got: &FType, want: &FType) -> Result<(), FError> {
        if got.alpha_eq(want) {
            Ok(())
        } else {
            ferr(format!("{what}: expected {want}, found {got}"))
        }
    }

    pub fn check(&self, env: &mut FEnv, e: &FExpr) -> Result<FType, FError> {
        match e {
            FExpr::Var(x) => env.lookup(x).cloned().ok_or_else(|| FError(format!("unbound variable {x}"))),
            FExpr::Int(_) => Ok(FType::Int),
            FExpr::Bool(_) => Ok(FType::Bool),
            FExpr::Str(_) => Ok(FType::Str),
            FExpr::Unit => Ok(FType::Unit),
            FExpr::Lam(x, t, b) => {
                env.bind(x, t.clone());
                let r = self.check(env, b);
                env.terms.pop();
                Ok(FType::arrow(t.clone(), r?))
            }
            FExpr::App(f, a) => {
                let tf = self.check(env, f)?;
                let ta = self.check(env, a)?;
                match tf {
                    FType::Arrow(p, r) => {
                        self.expect("argument", &ta, &p)?;
                        Ok(*r)
                    }
                    t => ferr(format!("application of non-function of type {t}")),
                }
            }
            FExpr::TyLam(v, b) => {
                let names = env.type_names();
                if names.contains(v) {
                    let mut used = names;
                    b.type_names_into(&mut used);
                    let v2 = fresh_name(v, &mut used);
                    let b2 = b.subst_type(v, &FType::Var(v2.clone()));
                    return self.check(env, &FExpr::TyLam(v2, Box::new(b2)));
                }
                env.tyvars.push(v.clone());
                let r = self.check(env, b);
                env.tyvars.pop();
                Ok(FType::Forall(v.clone(), Box::new(r?)))
            }
            FExpr::TyApp(b, t) => match self.check(env, b)? {
                FType::Forall(v, body) => Ok(body.subst(&v, t)),
                other => ferr(format!("type application of non-polymorphic term of type {other}")),
            },
            FExpr::Prim(op, args) => self.prim(env, *op, args),
            FExpr::If(c, t, f) => {
                let tc = self.check(env, c)?;
                self.expect("condition", &tc, &FType::Bool)?;
                let tt = self.check(env, t)?;
                let tf = self.check(env, f)?;
                self.expect("else branch", &tf, &tt)?;
                Ok(tt)
            }
            FExpr::Nil(t) => Ok(FType::list(t.clone())),
            FExpr::Record(name, targs, fields) => {
                let expected = self.field_types(name, targs)?;
                if expected.len() != fields.len() || expected.iter().zip(fields).any(|((a, _), (b, _))| a != b) {
                    return ferr(format!("record {name} has the wrong fields"));
                }
                for ((f, want), (_, fe)) in expected.iter().zip(fields) {
                    let got = self.check(env, fe)?;
                    self.expect(&format!("field {f}"), &got, want)?;
                }
                Ok(FType::Con(name.clone(), targs.clone()))
            }
            FExpr::Project(b, f) => match self.check(env, b)? {
                FType::Con(name, targs) => {
                    let fields = self.field_types(&name, &targs)?;
                    match fields.into_iter().find(|(g, _)| g == f) {
                        Some((_, t)) => Ok(t),
                        None => ferr(format!("{name} has no field {f}")),
                    }
                }
                t => ferr(format!("projection from non-record of type {t}")),
            },
        }
    }

    fn prim(&self, env: &mut FEnv, op: PrimOp, args: &[FExpr]) -> Result<FType, FError> {
        if args.len() != op.arity() {
            return ferr(format!("{} expects {} operands", op.name(), op.arity()));
        }
        let ts = args.iter().map(|a| self.check(env, a)).collect::<Result<Vec<_>, _>>()?;
        if let Some((params, result)) = op.signature() {
            for (t, p) in ts.iter().zip(params) {
                self.expect(op.name(), t, &lift_simple(&p))?;
            }
            return Ok(lift_simple(&result));
        }
        match op {
            PrimOp::Pair => Ok(FType::pair(ts[0].clone(), ts[1].clone())),
            PrimOp::Fst | PrimOp::Snd => match &ts[0] {
                FType::Pair(a, b) => Ok(if op == PrimOp::Fst { (**a).clone() } else { (**b).clone() }),
                t => ferr(format!("{} of non-pair {t}", op.name())),
            },
            PrimOp::Cons => match &ts[1] {
                FType::List(a) => {
                    self.expect("cons", &ts[0], a)?;
                    Ok(ts[1].clone())
                }
                t => ferr(format!("cons onto non-list {t}")),
            },
            PrimOp::Fold => {
                let FType::List(a) = &ts[2] else {
                    return ferr(format!("fold over non-list {}", ts[2]));
                };
                let b = &ts[1];
                let want = FType::arrow((**a).clone(), FType::arrow(b.clone(), b.clone()));
                self.expect("fold function", &ts[0], &want)?;
                Ok(b.clone())
            }
            _ => ferr(format!("unexpected primitive {}", op.name())),
        }
    }
}

fn simultaneous(t: &FType, vars: &[Name], args: &[FType]) -> FType {
    // Rename to placeholders first so the substitution is simultaneous.
    let mut used: BTreeSet<Name> = BTreeSet::new();
    t.names_into(&mut used);
    args.iter().for_each(|a| a.names_into(&mut used));
    used.extend(vars.iter().cloned());
    let tmp: Vec<Name> = vars.iter().map(|v| fresh_name(&format!("{v}_"), &mut used)).collect();
    let mut out = t.clone();
    for (v, w) in vars.iter().zip(&tmp) {
        out = out.subst(v, &FType::Var(w.clone()));
    }
    for (w, a) in tmp.iter().zip(args) {
        out = out.subst(w, a);
    }
    out
}

fn lift_simple(t: &crate::syntax::Type) -> FType {
    use crate::syntax::Type;
    match t {
        Type::Int => FType::Int,
        Type::Bool => FType::Bool,
        Type::Str => FType::Str,
        _ => FType::Unit,
    }
}

/// Typechecks a closed term.
pub fn ftypecheck(interfaces: &[FInterface], e: &FExpr) -> Result<FType, FError> {
    FChecker::new(interfaces).check(&mut FEnv::new(), e)
}

// Big-step evaluation.

#[derive(Clone, Debug)]
pub enum FValue {
    Int(i64),
    Bool(bool),
    Str(String),
    Unit,
    Pair(Box<FValue>, Box<FValue>),
    List(Vec<FValue>),
    Closure(Rc<FClosure>),
    TyClosure(Rc<FClosure>),
    Record(Name, Vec<(Name, FValue)>),
}

#[derive(Debug)]
pub struct FClosure {
    pub param: Name,
    pub body: FExpr,
    pub env: Env,
}

/// Persistent term environment.
#[derive(Clone, Debug, Default)]
pub struct Env(Option<Rc<EnvNode>>);

#[derive(Debug)]
pub struct EnvNode {
    name: Name,
    value: FValue,
    next: Env,
}

impl Env {
    pub fn extend(&self, name: &str, value: FValue) -> Env {
        Env(Some(Rc::new(EnvNode { name: name.to_string(), value, next: self.clone() })))
    }

    pub fn get(&self, name: &str) -> Option<&FValue> {
        let mut cur = self.0.as_ref();
        while let Some(node) = cur {
            if node.name == name {
                return Some(&node.value);
            }
            cur = node.next.0.as_ref();
        }
        None
    }
}

pub fn feval(e: &FExpr) -> Result<FValue, FError> {
    eval_in(&Env::default(), e)
}

pub fn eval_in(env: &Env, e: &FExpr) -> Result<FValue, FError> {
    match e {
        FExpr::Var(x) => env.get(x).cloned().ok_or_else(|| FError(format!("unbound variable {x}"))),
        FExpr::Int(n) => Ok(FValue::Int(*n)),
        FExpr::Bool(b) => Ok(FValue::Bool(*b)),
        FExpr::Str(s) => Ok(FValue::Str(s.clone())),
        FExpr::Unit => Ok(FValue::Unit),
        FExpr::Lam(x, _, b) => {
            Ok(FValue::Closure(Rc::new(FClosure { param: x.clone(), body: (**b).clone(), env: env.clone() })))
        }
        FExpr::App(f, a) => {
            let fv = eval_in(env, f)?;
            let av = eval_in(env, a)?;
            apply(&fv, av)
        }
        FExpr::TyLam(_, b) => {
            Ok(FValue::TyClosure(Rc::new(FClosure { param: String::new(), body: (**b).clone(), env: env.clone() })))
        }
        FExpr::TyApp(b, _) => match eval_in(env, b)? {
            FValue::TyClosure(c) => eval_in(&c.env, &c.body),
            v => ferr(format!("type application of {v}")),
        },
        FExpr::Prim(op, args) => {
            let vs = args.iter().map(|a| eval_in(env, a)).collect::<Result<Vec<_>, _>>()?;
            delta(*op, vs)
        }
        FExpr::If(c, t, f) => match eval_in(env, c)? {
            FValue::Bool(true) => eval_in(env, t),
            FValue::Bool(false) => eval_in(env, f),
            v => ferr(format!("if on {v}")),
        },
        FExpr::Nil(_) => Ok(FValue::List(Vec::new())),
        FExpr::Record(n, _, fs) => {
            let vs = fs.iter().map(|(f, e)| Ok((f.clone(), eval_in(env, e)?))).collect::<Result<Vec<_>, _>>()?;
            Ok(FValue::Record(n.clone(), vs))
        }
        FExpr::Project(b, f) => match eval_in(env, b)? {
            FValue::Record(_, fs) => match fs.into_iter().find(|(g, _)| g == f) {
                Some((_, v)) => Ok(v),
                None => ferr(format!("missing field {f}")),
            },
            v => ferr(format!("projection from {v}")),
        },
    }
}

pub fn apply(f: &FValue, arg: FValue) -> Result<FValue, FError> {
    match f {
        FValue::Closure(c) => eval_in(&c.env.extend(&c.param, arg), &c.body),
        v => ferr(format!("application of {v}")),
    }
}

fn delta(op: PrimOp, mut vs: Vec<FValue>) -> Result<FValue, FError> {
    use FValue::*;
    let bad = |vs: &[FValue]| {
        let shown: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
        ferr(format!("{} applied to {}", op.name(), shown.join(", ")))
    };
    Ok(match (op, vs.as_slice()) {
        (PrimOp::Add, [Int(a), Int(b)]) => Int(a.wrapping_add(*b)),
        (PrimOp::And, [Bool(a), Bool(b)]) => Bool(*a && *b),
        (PrimOp::Not, [Bool(a)]) => Bool(!a),
        (PrimOp::EqInt, [Int(a), Int(b)]) => Bool(a == b),
        (PrimOp::EqBool, [Bool(a), Bool(b)]) => Bool(a == b),
        (PrimOp::IsEven, [Int(a)]) => Bool(a % 2 == 0),
        (PrimOp::IntToString, [Int(a)]) => Str(a.to_string()),
        (PrimOp::Concat, [Str(a), Str(b)]) => Str(format!("{a}{b}")),
        (PrimOp::Pair, [_, _]) => {
            let b = vs.pop().unwrap_or(Unit);
            let a = vs.pop().unwrap_or(Unit);
            Pair(Box::new(a), Box::new(b))
        }
        (PrimOp::Fst, [Pair(a, _)]) => (**a).clone(),
        (PrimOp::Snd, [Pair(_, b)]) => (**b).clone(),
        (PrimOp::Cons, [_, List(_)]) => {
            let Some(List(mut xs)) = vs.pop() else { return bad(&vs) };
            let x = vs.pop().unwrap_or(Unit);
            xs.insert(0, x);
            List(xs)
        }
        (PrimOp::Fold, [f, z, List(xs)]) => {
            let mut acc = z.clone();
            for x in xs.iter().rev() {
                let g = apply(f, x.clone())?;
                acc = apply(&g, acc)?;
            }
            acc
        }
        _ => return bad(&vs),
    })
}

// Small-step reduction on closed terms.

pub fn is_value(e: &FExpr) -> bool {
    match e {
        FExpr::Int(_) | FExpr::Bool(_) | FExpr::Str(_) | FExpr::Unit | FExpr::Lam(..) | FExpr::TyLam(..) => true,
        FExpr::Nil(_) => true,
        FExpr::Prim(PrimOp::Pair, es) | FExpr::Prim(PrimOp::Cons, es) => es.iter().all(is_value),
        FExpr::Record(_, _, fs) => fs.iter().all(|(_, e)| is_value(e)),
        _ => false,
    }
}

/// One step of call-by-value reduction, or `None` on a value.
pub fn step(e: &FExpr) -> Result<Option<FExpr>, FError> {
    if is_value(e) {
        return Ok(None);
    }
    let stepped = |e: &FExpr| -> Result<FExpr, FError> {
        match step(e)? {
            Some(e2) => Ok(e2),
            None => ferr(format!("stuck at {e}")),
        }
    };
    Ok(Some(match e {
        FExpr::App(f, a) if !is_value(f) => FExpr::app(stepped(f)?, (**a).clone()),
        FExpr::App(f, a) if !is_value(a) => FExpr::app((**f).clone(), stepped(a)?),
        FExpr::App(f, a) => match &**f {
            FExpr::Lam(x, _, b) => b.subst_term(x, a),
            _ => return ferr(format!("stuck at {e}")),
        },
        FExpr::TyApp(b, t) if !is_value(b) => FExpr::tyapp(stepped(b)?, t.clone()),
        FExpr::TyApp(b, t) => match &**b {
            FExpr::TyLam(v, body) => body.subst_type(v, t),
            _ => return ferr(format!("stuck at {e}")),
        },
        FExpr::Prim(op, es) => {
            if let Some(i) = es.iter().position(|a| !is_value(a)) {
                let mut es2 = es.clone();
                es2[i] = stepped(&es[i])?;
                FExpr::Prim(*op, es2)
            } else {
                reduce_prim(*op, es)?
            }
        }
        FExpr::If(c, t, f) => match &**c {
            FExpr::Bool(true) => (**t).clone(),
            FExpr::Bool(false) => (**f).clone(),
            c if !is_value(c) => FExpr::If(Box::new(stepped(c)?), t.clone(), f.clone()),
            _ => return ferr(format!("stuck at {e}")),
        },
        FExpr::Record(n, ts, fs) => {
            let i = fs.iter().position(|(_, a)| !is_value(a)).unwrap_or(0);
            let mut fs2 = fs.clone();
            fs2[i].1 = stepped(&fs[i].1)?;
            FExpr::Record(n.clone(), ts.clone(), fs2)
        }
        FExpr::Project(b, f) if !is_value(b) => FExpr::Project(Box::new(stepped(b)?), f.clone()),
        FExpr::Project(b, f) => match &**b {
            FExpr::Record(_, _, fs) => match fs.iter().find(|(g, _)| g == f) {
                Some((_, v)) => v.clone(),
                None => return ferr(format!("missing field {f}")),
            },
            _ => return ferr(format!("stuck at {e}")),
        },
        _ => return ferr(format!("stuck at {e}")),
    }))
}

fn reduce_prim(op: PrimOp, es: &[FExpr]) -> Result<FExpr, FError> {
    if op == PrimOp::Fold {
        let (f, z) = (&es[0], &es[1]);
        return match &es[2] {
            FExpr::Nil(_) => Ok(z.clone()),
            FExpr::Prim(PrimOp::Cons, xs) => Ok(FExpr::app(
                FExpr::app(f.clone(), xs[0].clone()),
                FExpr::Prim(PrimOp::Fold, vec![f.clone(), z.clone(), xs[1].clone()]),
            )),
            l => ferr(format!("fold over {l}")),
        };
    }
    if let (PrimOp::Fst | PrimOp::Snd, [FExpr::Prim(PrimOp::Pair, parts)]) = (op, es) {
        return Ok(parts[usize::from(op == PrimOp::Snd)].clone());
    }
    let vs = es.iter().map(value_of).collect::<Result<Vec<_>, _>>()?;
    Ok(value_to_expr(&delta(op, vs)?))
}

fn value_of(e: &FExpr) -> Result<FValue, FError> {
    Ok(match e {
        FExpr::Int(n) => FValue::Int(*n),
        FExpr::Bool(b) => FValue::Bool(*b),
        FExpr::Str(s) => FValue::Str(s.clone()),
        FExpr::Unit => FValue::Unit,
        FExpr::Prim(PrimOp::Pair, es) => FValue::Pair(Box::new(value_of(&es[0])?), Box::new(value_of(&es[1])?)),
        FExpr::Nil(_) => FValue::List(Vec::new()),
        FExpr::Prim(PrimOp::Cons, es) => {
            let FValue::List(mut xs) = value_of(&es[1])? else { return ferr("malformed list") };
            xs.insert(0, value_of(&es[0])?);
            FValue::List(xs)
        }
        FExpr::Lam(x, _, b) => FValue::Closure(Rc::new(FClosure { param: x.clone(), body: (**b).clone(), env: Env::default() })),
        FExpr::TyLam(_, b) => {
            FValue::TyClosure(Rc::new(FClosure { param: String::new(), body: (**b).clone(), env: Env::default() }))
        }
        FExpr::Record(n, _, fs) => {
            FValue::Record(n.clone(), fs.iter().map(|(f, e)| Ok((f.clone(), value_of(e)?))).collect::<Result<_, FError>>()?)
        }
        e => return ferr(format!("not a value: {e}")),
    })
}

fn value_to_expr(v: &FValue) -> FExpr {
    match v {
        FValue::Int(n) => FExpr::Int(*n),
        FValue::Bool(b) => FExpr::Bool(*b),
        FValue::Str(s) => FExpr::Str(s.clone()),
        FValue::Unit => FExpr::Unit,
        v => unreachable!("primitive returned {v}"),
    }
}

/// Reduces to a value with the small-step relation, giving up after `fuel`
/// steps.
pub fn reduce(e: &FExpr, fuel: usize) -> Result<FValue, FError> {
    let mut cur = e.clone();
    for _ in 0..fuel {
        match step(&cur)? {
            Some(next) => cur = next,
            None => return value_of(&cur),
        }
    }
    ferr(format!("no value after {fuel} steps"))
}

/// Result of running a core program through elaboration and evaluation.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub ty: crate::syntax::Type,
    pub fty: FType,
    pub term: FExpr,
    pub value: FValue,
}

pub const SMALLSTEP_FUEL: usize = 10_000_000;

/// Typechecks and elaborates, then checks the elaborated term against the
/// translated type.
pub fn elaborate_checked(p: &crate::syntax::Program) -> Result<(crate::syntax::Type, FType, FExpr), crate::error::Error> {
    use crate::elaborate::{interface_translate, type_translate};
    use crate::error::RuntimeError;
    let typed = crate::typecheck::Checker::check_program(p)?;
    let interfaces: Vec<FInterface> = p.interfaces.iter().map(interface_translate).collect();
    let fty = ftypecheck(&interfaces, &typed.term)
        .map_err(|e| RuntimeError::new(format!("elaborated term is ill-typed: {}", e.0)))?;
    let want = type_translate(&typed.ty);
    if !fty.alpha_eq(&want) {
        return Err(RuntimeError::new(format!("elaborated term has type {fty}, expected {want}")).into());
    }
    Ok((typed.ty, fty, typed.term))
}

/// [`elaborate_checked`] followed by evaluation.
pub fn run_pipeline(p: &crate::syntax::Program, smallstep: bool) -> Result<PipelineOutput, crate::error::Error> {
    let (ty, fty, term) = elaborate_checked(p)?;
    let value = if smallstep { reduce(&term, SMALLSTEP_FUEL) } else { feval(&term) }
        .map_err(|e| crate::error::RuntimeError::new(e.0))?;
    Ok(PipelineOutput { ty, fty, term, value })
}

pub fn eval_pipeline(p: &crate::syntax::Program) -> Result<FValue, crate::error::Error> {
    run_pipeline(p, false).map(|o| o.value)
}

// Printing.

impl Display for FValue {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            FValue::Int(n) => write!(f, "{n}"),
            FValue::Bool(b) => write!(f, "{b}"),
            FValue::Str(s) => f.write_str(&escape_str(s)),
            FValue::Unit => f.write_str("()"),
            FValue::Pair(a, b) => write!(f, "({a}, {b})"),
            FValue::List(xs) => {
                f.write_char('[')?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_char(']')
            }
            FValue::Closure(_) | FValue::TyClosure(_) => f.write_str("<fun>"),
            FValue::Record(n, fs) => {
                write!(f, "{n} {{")?;
                for (i, (name, v)) in fs.iter().enumerate() {
                    f.write_str(if i > 0 { ", " } else { " " })?;
                    write!(f, "{name} = {v}")?;
                }
                f.write_str(if fs.is_empty() { "}" } else { " }" })
            }
        }
    }
}

fn write_ftype(f: &mut Formatter<'_>, t: &FType, prec: u8) -> fmt::Result {
    match t {
        FType::Var(v) => f.write_str(v),
        FType::Int => f.write_str("Int"),
        FType::Bool => f.write_str("Bool"),
        FType::Str => f.write_str("String"),
        FType::Unit => f.write_str("()"),
        FType::Arrow(a, b) => {
            if prec > 0 {
                f.write_char('(')?;
            }
            write_ftype(f, a, 1)?;
            f.write_str(" -> ")?;
            write_ftype(f, b, 0)?;
            if prec > 0 {
                f.write_char(')')?;
            }
            Ok(())
        }
        FType::Pair(a, b) => {
            f.write_char('(')?;
            write_ftype(f, a, 0)?;
            f.write_str(", ")?;
            write_ftype(f, b, 0)?;
            f.write_char(')')
        }
        FType::List(a) => {
            f.write_char('[')?;
            write_ftype(f, a, 0)?;
            f.write_char(']')
        }
        FType::Con(n, args) if args.is_empty() => f.write_str(n),
        FType::Con(n, args) => {
            if prec >= 2 {
                f.write_char('(')?;
            }
            f.write_str(n)?;
            for a in args {
                f.write_char(' ')?;
                write_ftype(f, a, 2)?;
            }
            if prec >= 2 {
                f.write_char(')')?;
            }
            Ok(())
        }
        FType::Forall(v, b) => {
            if prec > 0 {
                f.write_char('(')?;
            }
            write!(f, "forall {v}. ")?;
            write_ftype(f, b, 0)?;
            if prec > 0 {
                f.write_char(')')?;
            }
            Ok(())
        }
    }
}

impl Display for FType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_ftype(f, self, 0)
    }
}

const P_TOP: u8 = 0;
const P_APP: u8 = 5;
const P_ATOM: u8 = 6;

fn level(e: &FExpr) -> u8 {
    match e {
        FExpr::Lam(..) | FExpr::TyLam(..) | FExpr::If(..) => P_TOP,
        FExpr::Prim(PrimOp::Pair, es) if es.len() == 2 => P_ATOM,
        FExpr::Prim(op, es) if es.len() == 2 && op.infix().is_some() => infix_level(*op),
        FExpr::App(..) | FExpr::TyApp(..) | FExpr::Prim(..) => P_APP,
        _ => P_ATOM,
    }
}

fn infix_level(op: PrimOp) -> u8 {
    match op {
        PrimOp::And => 1,
        PrimOp::Concat => 2,
        _ => 3,
    }
}

fn write_fexpr(f: &mut Formatter<'_>, e: &FExpr, prec: u8) -> fmt::Result {
    let paren = level(e) < prec;
    if paren {
        f.write_char('(')?;
    }
    match e {
        FExpr::Var(x) => f.write_str(x)?,
        FExpr::Int(n) => write!(f, "{n}")?,
        FExpr::Bool(b) => write!(f, "{b}")?,
        FExpr::Str(s) => f.write_str(&escape_str(s))?,
        FExpr::Unit => f.write_str("()")?,
        FExpr::Lam(x, t, b) => {
            write!(f, "\\{x} : {t}. ")?;
            write_fexpr(f, b, P_TOP)?;
        }
        FExpr::TyLam(v, b) => {
            write!(f, "/\\{v}. ")?;
            write_fexpr(f, b, P_TOP)?;
        }
        FExpr::App(a, b) => {
            write_fexpr(f, a, P_APP)?;
            f.write_char(' ')?;
            write_fexpr(f, b, P_ATOM)?;
        }
        FExpr::TyApp(a, t) => {
            write_fexpr(f, a, P_APP)?;
            write!(f, " [{t}]")?;
        }
        FExpr::Prim(PrimOp::Pair, es) if es.len() == 2 => {
            f.write_char('(')?;
            write_fexpr(f, &es[0], P_TOP)?;
            f.write_str(", ")?;
            write_fexpr(f, &es[1], P_TOP)?;
            f.write_char(')')?;
        }
        FExpr::Prim(op, es) if es.len() == 2 && op.infix().is_some() => {
            let l = infix_level(*op);
            write_fexpr(f, &es[0], l)?;
            write!(f, " {} ", op.infix().unwrap_or("?"))?;
            write_fexpr(f, &es[1], l + 1)?;
        }
        FExpr::Prim(op, es) => {
            f.write_str(op.name())?;
            for a in es {
                f.write_char(' ')?;
                write_fexpr(f, a, P_ATOM)?;
            }
        }
        FExpr::If(c, t, el) => {
            f.write_str("if ")?;
            write_fexpr(f, c, P_TOP)?;
            f.write_str(" then ")?;
            write_fexpr(f, t, P_TOP)?;
            f.write_str(" else ")?;
            write_fexpr(f, el, P_TOP)?;
        }
        FExpr::Nil(t) => write!(f, "nil[{t}]")?,
        FExpr::Record(n, ts, fs) => {
            f.write_str(n)?;
            f.write_char('[')?;
            for (i, t) in ts.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str("] {")?;
            for (i, (name, x)) in fs.iter().enumerate() {
                f.write_str(if i > 0 { ", " } else { " " })?;
                write!(f, "{name} = ")?;
                write_fexpr(f, x, P_TOP)?;
            }
            f.write_str(if fs.is_empty() { "}" } else { " }" })?;
        }
        FExpr::Project(b, field) => {
            write_fexpr(f, b, P_ATOM)?;
            write!(f, ".{field}")?;
        }
    }
    if paren {
        f.write_char(')')?;
    }
    Ok(())
}

impl Display for FExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_fexpr(f, self, P_TOP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> FType {
        FType::Var("a".into())
    }

    fn dup() -> FExpr {
        FExpr::tylam(
            "a",
            FExpr::lam("x", a(), FExpr::Prim(PrimOp::Pair, vec![FExpr::var("x"), FExpr::var("x")])),
        )
    }

    #[test]
    fn dup_typechecks() {
        let t = ftypecheck(&[], &dup()).unwrap();
        let want = FType::forall("b", FType::arrow(FType::Var("b".into()), FType::pair(FType::Var("b".into()), FType::Var("b".into()))));
        assert!(t.alpha_eq(&want), "{t}");
        assert_eq!(t.to_string(), "forall a. a -> (a, a)");
    }

    #[test]
    fn simple_application() {
        let e = FExpr::app(FExpr::lam("x", FType::Int, FExpr::var("x")), FExpr::Int(3));
        assert_eq!(ftypecheck(&[], &e).unwrap(), FType::Int);
        assert!(ftypecheck(&[], &FExpr::tyapp(FExpr::Int(3), FType::Int)).is_err());
    }

    #[test]
    fn type_application_avoids_capture() {
        // (/\a. /\b. \x : a. x) [b] : forall b'. b -> b
        let e = FExpr::tyapp(
            FExpr::tylam("a", FExpr::tylam("b", FExpr::lam("x", a(), FExpr::var("x")))),
            FType::Var("b".into()),
        );
        let t = ftypecheck(&[], &e).unwrap();
        let FType::Forall(v, body) = &t else { panic!("{t}") };
        assert_ne!(v, "b");
        assert!(body.alpha_eq(&FType::arrow(FType::Var("b".into()), FType::Var("b".into()))));
    }

    #[test]
    fn shadowing_type_binders_are_renamed() {
        // /\a. \x : a. /\a. \y : a. x  has type forall a. a -> forall a'. a' -> a
        let e = FExpr::tylam("a", FExpr::lam("x", a(), FExpr::tylam("a", FExpr::lam("y", a(), FExpr::var("x")))));
        let t = ftypecheck(&[], &e).unwrap();
        let want = FType::forall(
            "p",
            FType::arrow(
                FType::Var("p".into()),
                FType::forall("q", FType::arrow(FType::Var("q".into()), FType::Var("p".into()))),
            ),
        );
        assert!(t.alpha_eq(&want), "{t}");
    }

    #[test]
    fn big_step_and_small_step_agree() {
        let e = FExpr::app(FExpr::tyapp(dup(), FType::Int), FExpr::Prim(PrimOp::Add, vec![FExpr::Int(1), FExpr::Int(2)]));
        assert_eq!(feval(&e).unwrap().to_string(), "(3, 3)");
        assert_eq!(reduce(&e, 100).unwrap().to_string(), "(3, 3)");
        let xs = FExpr::Prim(PrimOp::Cons, vec![FExpr::Int(1), FExpr::Prim(PrimOp::Cons, vec![FExpr::Int(2), FExpr::Nil(FType::Int)])]);
        let sum = FExpr::Prim(
            PrimOp::Fold,
            vec![
                FExpr::lam("x", FType::Int, FExpr::lam("acc", FType::Int, FExpr::Prim(PrimOp::Add, vec![FExpr::var("x"), FExpr::var("acc")]))),
                FExpr::Int(0),
                xs.clone(),
            ],
        );
        assert_eq!(ftypecheck(&[], &sum).unwrap(), FType::Int);
        assert_eq!(feval(&sum).unwrap().to_string(), "3");
        assert_eq!(reduce(&sum, 100).unwrap().to_string(), "3");
        assert_eq!(feval(&xs).unwrap().to_string(), "[1, 2]");
        let p = FExpr::Prim(PrimOp::Snd, vec![FExpr::Prim(PrimOp::Pair, vec![FExpr::Int(0), xs])]);
        assert_eq!(reduce(&p, 100).unwrap().to_string(), "[1, 2]");
    }

    #[test]
    fn records() {
        let eq = FInterface { name: "Eq".into(), params: vec!["a".into()], fields: vec![("eq".into(), FType::arrow(a(), FType::arrow(a(), FType::Bool)))] };
        let r = FExpr::Record("Eq".into(), vec![FType::Int], vec![("eq".into(), FExpr::lam("x", FType::Int, FExpr::lam("y", FType::Int, FExpr::Prim(PrimOp::EqInt, vec![FExpr::var("x"), FExpr::var("y")]))))]);
        let e = FExpr::app(FExpr::app(FExpr::Project(Box::new(r), "eq".into()), FExpr::Int(2)), FExpr::Int(2));
        assert_eq!(ftypecheck(std::slice::from_ref(&eq), &e).unwrap(), FType::Bool);
        assert_eq!(feval(&e).unwrap().to_string(), "true");
        assert_eq!(reduce(&e, 100).unwrap().to_string(), "true");
    }

    #[test]
    fn printing() {
        assert_eq!(dup().to_string(), "/\\a. \\x : a. (x, x)");
        let t = FType::arrow(FType::Unit, FType::list(FType::Str));
        assert_eq!(t.to_string(), "() -> [String]");
    }
}
