//! Abstract syntax of the implicit calculus: types, rule types, contexts and
//! expressions, together with free variables, alpha-equivalence and the
//! canonical order on types.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub type Name = String;

/// Simple types τ. `Con` covers nominal interface types `I T̄` and opaque
/// base types such as `Char`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Var(Name),
    Int,
    Bool,
    Str,
    Arrow(Box<Type>, Box<Type>),
    Pair(Box<Type>, Box<Type>),
    List(Box<Type>),
    Con(Name, Vec<Type>),
    Rule(Box<RuleType>),
}

/// A rule type `∀ᾱ.π ⇒ τ`.
///
/// A rule type with no quantifiers and an empty context is identified with
/// its head; [`Type::from_rule`] never wraps such a rule in `Type::Rule`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleType {
    pub vars: Vec<Name>,
    pub context: Context,
    pub head: Type,
}

/// A set of rule types. Constructors sort members canonically and drop
/// alpha-equivalent duplicates; substitution maps members in place.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(Vec<RuleType>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrimOp {
    Add,
    And,
    Not,
    EqInt,
    EqBool,
    IsEven,
    IntToString,
    Concat,
    Pair,
    Fst,
    Snd,
    Cons,
    Fold,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Str(String),
    Var(Name),
    Lam(Name, Type, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Query(RuleType),
    RuleAbs(RuleType, Box<Expr>),
    TyApp(Box<Expr>, Vec<Type>),
    RuleApp(Box<Expr>, Vec<(Expr, RuleType)>),
    Prim(PrimOp, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Nil(Type),
    Record(Name, Vec<Type>, Vec<(Name, Expr)>),
    Project(Box<Expr>, Name),
}

/// A nominal record type `interface I ᾱ = { u : T, .. }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub name: Name,
    pub params: Vec<Name>,
    pub fields: Vec<(Name, Type)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub interfaces: Vec<Interface>,
    pub body: Expr,
}

impl Program {
    pub fn new(body: Expr) -> Self {
        Program { interfaces: Vec::new(), body }
    }

    pub fn interface(&self, name: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.name == name)
    }
}

impl PrimOp {
    pub const ALL: [PrimOp; 13] = [
        PrimOp::Add,
        PrimOp::And,
        PrimOp::Not,
        PrimOp::EqInt,
        PrimOp::EqBool,
        PrimOp::IsEven,
        PrimOp::IntToString,
        PrimOp::Concat,
        PrimOp::Pair,
        PrimOp::Fst,
        PrimOp::Snd,
        PrimOp::Cons,
        PrimOp::Fold,
    ];

    pub fn arity(self) -> usize {
        match self {
            PrimOp::Not | PrimOp::IsEven | PrimOp::IntToString | PrimOp::Fst | PrimOp::Snd => 1,
            PrimOp::Fold => 3,
            _ => 2,
        }
    }

    /// Prefix name used in concrete syntax.
    pub fn name(self) -> &'static str {
        match self {
            PrimOp::Add => "add",
            PrimOp::And => "and",
            PrimOp::Not => "not",
            PrimOp::EqInt => "primEqInt",
            PrimOp::EqBool => "primEqBool",
            PrimOp::IsEven => "isEven",
            PrimOp::IntToString => "intToString",
            PrimOp::Concat => "concat",
            PrimOp::Pair => "pair",
            PrimOp::Fst => "fst",
            PrimOp::Snd => "snd",
            PrimOp::Cons => "cons",
            PrimOp::Fold => "fold",
        }
    }

    pub fn from_name(s: &str) -> Option<PrimOp> {
        PrimOp::ALL.iter().copied().find(|p| p.name() == s)
    }

    pub fn infix(self) -> Option<&'static str> {
        match self {
            PrimOp::Add => Some("+"),
            PrimOp::And => Some("&&"),
            PrimOp::Concat => Some("++"),
            _ => None,
        }
    }

    /// Operand and result types of the monomorphic primitives.
    pub fn signature(self) -> Option<(Vec<Type>, Type)> {
        use Type::*;
        Some(match self {
            PrimOp::Add => (vec![Int, Int], Int),
            PrimOp::And => (vec![Bool, Bool], Bool),
            PrimOp::Not => (vec![Bool], Bool),
            PrimOp::EqInt => (vec![Int, Int], Bool),
            PrimOp::EqBool => (vec![Bool, Bool], Bool),
            PrimOp::IsEven => (vec![Int], Bool),
            PrimOp::IntToString => (vec![Int], Str),
            PrimOp::Concat => (vec![Str, Str], Str),
            _ => return None,
        })
    }
}

impl Type {
    pub fn var(n: &str) -> Type {
        Type::Var(n.to_string())
    }

    pub fn arrow(a: Type, b: Type) -> Type {
        Type::Arrow(Box::new(a), Box::new(b))
    }

    pub fn pair(a: Type, b: Type) -> Type {
        Type::Pair(Box::new(a), Box::new(b))
    }

    pub fn list(a: Type) -> Type {
        Type::List(Box::new(a))
    }

    pub fn con(n: &str, args: Vec<Type>) -> Type {
        Type::Con(n.to_string(), args)
    }

    /// Embeds a rule type, collapsing `∀∅.{} ⇒ τ` to `τ`.
    pub fn from_rule(r: RuleType) -> Type {
        if r.is_trivial() {
            r.head
        } else {
            Type::Rule(Box::new(r))
        }
    }

    pub fn as_rule(&self) -> Option<&RuleType> {
        match self {
            Type::Rule(r) => Some(r),
            _ => None,
        }
    }

    pub fn ftv(&self) -> BTreeSet<Name> {
        let mut out = Vec::new();
        free_vars_type(self, &mut Vec::new(), &mut out);
        out.into_iter().collect()
    }

    /// Free variables in order of first occurrence (prefix traversal).
    pub fn ftv_ordered(&self) -> Vec<Name> {
        let mut out = Vec::new();
        free_vars_type(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn alpha_eq(&self, other: &Type) -> bool {
        Keyer::new(true).ty(self) == Keyer::new(true).ty(other)
    }

    /// Alpha-equivalence that also respects the stored order of context
    /// members. Two types are interchangeable in System F iff this holds.
    pub fn positional_eq(&self, other: &Type) -> bool {
        Keyer::new(false).ty(self) == Keyer::new(false).ty(other)
    }

    /// Number of non-variable nodes.
    pub fn size(&self) -> usize {
        match self {
            Type::Var(_) => 0,
            Type::Int | Type::Bool | Type::Str => 1,
            Type::Arrow(a, b) | Type::Pair(a, b) => 1 + a.size() + b.size(),
            Type::List(a) => 1 + a.size(),
            Type::Con(_, args) => 1 + args.iter().map(Type::size).sum::<usize>(),
            Type::Rule(r) => {
                1 + r.head.size() + r.context.iter().map(|m| m.head.size()).sum::<usize>()
            }
        }
    }

    /// Counts free occurrences of `v`.
    pub fn occurrences(&self, v: &str) -> usize {
        let mut out = Vec::new();
        all_free_occurrences(self, &mut Vec::new(), &mut out);
        out.iter().filter(|n| n.as_str() == v).count()
    }

    /// Every type-variable name appearing anywhere, bound or free.
    pub fn collect_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Type::Var(n) => {
                out.insert(n.clone());
            }
            Type::Int | Type::Bool | Type::Str => {}
            Type::Arrow(a, b) | Type::Pair(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            Type::List(a) => a.collect_names(out),
            Type::Con(_, args) => args.iter().for_each(|a| a.collect_names(out)),
            Type::Rule(r) => r.collect_names(out),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.ftv().is_empty()
    }
}

impl RuleType {
    /// Builds a rule type, sorting the context relative to the new binders.
    pub fn new(vars: Vec<Name>, context: impl IntoIterator<Item = RuleType>, head: Type) -> Self {
        let context = Context::sorted_under(context.into_iter().collect(), &vars);
        RuleType { vars, context, head }
    }

    /// Promotion: a simple type `τ` becomes `∀∅.{} ⇒ τ`; an embedded rule
    /// type is unwrapped.
    pub fn simple(t: Type) -> Self {
        match t {
            Type::Rule(r) => *r,
            t => RuleType { vars: Vec::new(), context: Context::default(), head: t },
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.vars.is_empty() && self.context.is_empty()
    }

    pub fn to_type(&self) -> Type {
        Type::from_rule(self.clone())
    }

    pub fn ftv(&self) -> BTreeSet<Name> {
        let mut out = Vec::new();
        free_vars_rule(self, &mut Vec::new(), &mut out);
        out.into_iter().collect()
    }

    pub fn ftv_ordered(&self) -> Vec<Name> {
        let mut out = Vec::new();
        free_vars_rule(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn alpha_eq(&self, other: &RuleType) -> bool {
        Keyer::new(true).rule(self) == Keyer::new(true).rule(other)
    }

    pub fn positional_eq(&self, other: &RuleType) -> bool {
        Keyer::new(false).rule(self) == Keyer::new(false).rule(other)
    }

    pub fn canonical_cmp(&self, other: &RuleType) -> Ordering {
        Keyer::new(true).rule(self).cmp(&Keyer::new(true).rule(other))
    }

    pub fn collect_names(&self, out: &mut BTreeSet<Name>) {
        out.extend(self.vars.iter().cloned());
        self.context.iter().for_each(|m| m.collect_names(out));
        self.head.collect_names(out);
    }
}

impl Context {
    pub fn new(members: impl IntoIterator<Item = RuleType>) -> Self {
        Context::sorted_under(members.into_iter().collect(), &[])
    }

    /// Keeps members exactly as given, duplicates included.
    pub fn positional(members: Vec<RuleType>) -> Self {
        Context(members)
    }

    fn sorted_under(members: Vec<RuleType>, binders: &[Name]) -> Self {
        let mut keyed: Vec<(RuleKey, RuleType)> = members
            .into_iter()
            .map(|m| {
                let mut k = Keyer::new(true);
                k.scopes.push(binders.to_vec());
                (k.rule(&m), m)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        Context(keyed.into_iter().map(|(_, m)| m).collect())
    }

    pub fn members(&self) -> &[RuleType] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RuleType> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, r: &RuleType) -> bool {
        self.0.iter().any(|m| m.alpha_eq(r))
    }

    pub fn position(&self, r: &RuleType) -> Option<usize> {
        self.0.iter().position(|m| m.alpha_eq(r))
    }

    /// Set insertion: unchanged if an alpha-variant is already present.
    pub fn insert(&self, r: RuleType) -> Context {
        if self.contains(&r) {
            return self.clone();
        }
        let mut members = self.0.clone();
        members.push(r);
        Context::new(members)
    }

    /// Equality as sets modulo alpha-equivalence.
    pub fn set_eq(&self, other: &Context) -> bool {
        self.0.iter().all(|m| other.contains(m)) && other.0.iter().all(|m| self.contains(m))
    }

    pub fn ftv(&self) -> BTreeSet<Name> {
        self.0.iter().flat_map(|m| m.ftv()).collect()
    }
}

impl<'a> IntoIterator for &'a Context {
    type Item = &'a RuleType;
    type IntoIter = std::slice::Iter<'a, RuleType>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Total order on types: constructor tag first (variables, Int, Bool,
/// String, arrow, pair, list, constructor, rule), then children left to
/// right. Bound variables compare by binder position and precede free
/// variables, which compare by name. Contexts compare as sorted sets.
pub fn canonical_cmp(a: &Type, b: &Type) -> Ordering {
    Keyer::new(true).ty(a).cmp(&Keyer::new(true).ty(b))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Bound(usize, usize),
    Free(Name),
    Int,
    Bool,
    Str,
    Arrow(Box<Key>, Box<Key>),
    Pair(Box<Key>, Box<Key>),
    List(Box<Key>),
    Con(Name, Vec<Key>),
    Rule(RuleKey),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct RuleKey {
    arity: usize,
    context: Vec<RuleKey>,
    head: Box<Key>,
}

struct Keyer {
    scopes: Vec<Vec<Name>>,
    sorted: bool,
}

impl Keyer {
    fn new(sorted: bool) -> Self {
        Keyer { scopes: Vec::new(), sorted }
    }

    fn ty(&mut self, t: &Type) -> Key {
        match t {
            Type::Var(n) => {
                for (depth, scope) in self.scopes.iter().rev().enumerate() {
                    if let Some(i) = scope.iter().position(|v| v == n) {
                        return Key::Bound(depth, i);
                    }
                }
                Key::Free(n.clone())
            }
            Type::Int => Key::Int,
            Type::Bool => Key::Bool,
            Type::Str => Key::Str,
            Type::Arrow(a, b) => Key::Arrow(Box::new(self.ty(a)), Box::new(self.ty(b))),
            Type::Pair(a, b) => Key::Pair(Box::new(self.ty(a)), Box::new(self.ty(b))),
            Type::List(a) => Key::List(Box::new(self.ty(a))),
            Type::Con(n, args) => Key::Con(n.clone(), args.iter().map(|a| self.ty(a)).collect()),
            Type::Rule(r) if r.is_trivial() => self.ty(&r.head),
            Type::Rule(r) => Key::Rule(self.rule(r)),
        }
    }

    fn rule(&mut self, r: &RuleType) -> RuleKey {
        if r.is_trivial() {
            if let Type::Rule(inner) = &r.head {
                return self.rule(inner);
            }
        }
        self.scopes.push(r.vars.clone());
        let mut context: Vec<RuleKey> = r.context.iter().map(|m| self.rule(m)).collect();
        if self.sorted {
            context.sort();
            context.dedup();
        }
        let head = Box::new(self.ty(&r.head));
        self.scopes.pop();
        RuleKey { arity: r.vars.len(), context, head }
    }
}

fn push_unique(out: &mut Vec<Name>, n: &Name) {
    if !out.contains(n) {
        out.push(n.clone());
    }
}

fn free_vars_type(t: &Type, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
    match t {
        Type::Var(n) => {
            if !bound.contains(n) {
                push_unique(out, n);
            }
        }
        Type::Int | Type::Bool | Type::Str => {}
        Type::Arrow(a, b) | Type::Pair(a, b) => {
            free_vars_type(a, bound, out);
            free_vars_type(b, bound, out);
        }
        Type::List(a) => free_vars_type(a, bound, out),
        Type::Con(_, args) => args.iter().for_each(|a| free_vars_type(a, bound, out)),
        Type::Rule(r) => free_vars_rule(r, bound, out),
    }
}

fn free_vars_rule(r: &RuleType, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
    let mark = bound.len();
    bound.extend(r.vars.iter().cloned());
    for m in r.context.iter() {
        free_vars_rule(m, bound, out);
    }
    free_vars_type(&r.head, bound, out);
    bound.truncate(mark);
}

fn all_free_occurrences(t: &Type, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
    match t {
        Type::Var(n) => {
            if !bound.contains(n) {
                out.push(n.clone());
            }
        }
        Type::Int | Type::Bool | Type::Str => {}
        Type::Arrow(a, b) | Type::Pair(a, b) => {
            all_free_occurrences(a, bound, out);
            all_free_occurrences(b, bound, out);
        }
        Type::List(a) => all_free_occurrences(a, bound, out),
        Type::Con(_, args) => args.iter().for_each(|a| all_free_occurrences(a, bound, out)),
        Type::Rule(r) => {
            let mark = bound.len();
            bound.extend(r.vars.iter().cloned());
            for m in r.context.iter() {
                all_free_occurrences(&m.to_type(), bound, out);
            }
            all_free_occurrences(&r.head, bound, out);
            bound.truncate(mark);
        }
    }
}

impl Expr {
    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }

    pub fn lam(x: &str, t: Type, body: Expr) -> Expr {
        Expr::Lam(x.to_string(), t, Box::new(body))
    }

    pub fn var(x: &str) -> Expr {
        Expr::Var(x.to_string())
    }

    pub fn query(t: Type) -> Expr {
        Expr::Query(RuleType::simple(t))
    }

    pub fn rule_abs(r: RuleType, body: Expr) -> Expr {
        Expr::RuleAbs(r, Box::new(body))
    }

    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::Prim(PrimOp::Pair, vec![a, b])
    }

    /// `implicit {e1 : ρ1, ..} in e : τ`, i.e. `(rule ({ρ̄} ⇒ τ) e) with {ē : ρ̄}`.
    pub fn implicit(args: Vec<(Expr, RuleType)>, body: Expr, ty: Type) -> Expr {
        let r = RuleType::new(Vec::new(), args.iter().map(|(_, r)| r.clone()), ty);
        Expr::RuleApp(Box::new(Expr::rule_abs(r, body)), args)
    }

    /// Every type-variable name mentioned anywhere in the expression.
    pub fn collect_type_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => {}
            Expr::Lam(_, t, b) => {
                t.collect_names(out);
                b.collect_type_names(out);
            }
            Expr::App(f, a) => {
                f.collect_type_names(out);
                a.collect_type_names(out);
            }
            Expr::Query(r) => r.collect_names(out),
            Expr::RuleAbs(r, b) => {
                r.collect_names(out);
                b.collect_type_names(out);
            }
            Expr::TyApp(e, ts) => {
                e.collect_type_names(out);
                ts.iter().for_each(|t| t.collect_names(out));
            }
            Expr::RuleApp(e, args) => {
                e.collect_type_names(out);
                for (a, r) in args {
                    a.collect_type_names(out);
                    r.collect_names(out);
                }
            }
            Expr::Prim(_, es) => es.iter().for_each(|e| e.collect_type_names(out)),
            Expr::If(c, t, e) => {
                c.collect_type_names(out);
                t.collect_type_names(out);
                e.collect_type_names(out);
            }
            Expr::Nil(t) => t.collect_names(out),
            Expr::Record(_, ts, fs) => {
                ts.iter().for_each(|t| t.collect_names(out));
                fs.iter().for_each(|(_, e)| e.collect_type_names(out));
            }
            Expr::Project(e, _) => e.collect_type_names(out),
        }
    }

    pub fn size(&self) -> usize {
        1 + match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) | Expr::Query(_) | Expr::Nil(_) => 0,
            Expr::Lam(_, _, b) | Expr::RuleAbs(_, b) | Expr::TyApp(b, _) | Expr::Project(b, _) => b.size(),
            Expr::App(f, a) => f.size() + a.size(),
            Expr::RuleApp(e, args) => e.size() + args.iter().map(|(a, _)| a.size()).sum::<usize>(),
            Expr::Prim(_, es) => es.iter().map(Expr::size).sum(),
            Expr::If(c, t, e) => c.size() + t.size() + e.size(),
            Expr::Record(_, _, fs) => fs.iter().map(|(_, e)| e.size()).sum(),
        }
    }
}

/// Picks a name based on `base` that is not in `used`, and records it.
pub fn fresh_name(base: &str, used: &mut BTreeSet<Name>) -> Name {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "t" } else { stem };
    if !used.contains(base) {
        used.insert(base.to_string());
        return base.to_string();
    }
    let mut i = 1;
    loop {
        let cand = format!("{stem}{i}");
        if !used.contains(&cand) {
            used.insert(cand.clone());
            return cand;
        }
        i += 1;
    }
}
