//! Capture-avoiding simultaneous substitution of types for type variables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::syntax::{fresh_name, Context, Expr, Name, Program, RuleType, Type};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSubst(BTreeMap<Name, Type>);

impl TypeSubst {
    pub fn new() -> Self {
        TypeSubst(BTreeMap::new())
    }

    pub fn single(v: &str, t: Type) -> Self {
        let mut s = TypeSubst::new();
        s.insert(v.to_string(), t);
        s
    }

    /// Pairs `vars` with `types` positionally.
    pub fn zip(vars: &[Name], types: &[Type]) -> Self {
        TypeSubst(vars.iter().cloned().zip(types.iter().cloned()).collect())
    }

    pub fn insert(&mut self, v: Name, t: Type) {
        self.0.insert(v, t);
    }

    pub fn get(&self, v: &str) -> Option<&Type> {
        self.0.get(v)
    }

    pub fn contains(&self, v: &str) -> bool {
        self.0.contains_key(v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Type)> {
        self.0.iter()
    }

    pub fn domain(&self) -> BTreeSet<Name> {
        self.0.keys().cloned().collect()
    }

    pub fn range_ftv(&self) -> BTreeSet<Name> {
        self.0.values().flat_map(|t| t.ftv()).collect()
    }

    /// Drops the given variables from the domain.
    pub fn without<'a>(&self, vars: impl IntoIterator<Item = &'a Name>) -> TypeSubst {
        let mut s = self.clone();
        for v in vars {
            s.0.remove(v);
        }
        s
    }

    /// Keeps only the given variables in the domain.
    pub fn restrict(&self, vars: &BTreeSet<Name>) -> TypeSubst {
        TypeSubst(self.0.iter().filter(|(k, _)| vars.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect())
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &TypeSubst) -> TypeSubst {
        let mut out: BTreeMap<Name, Type> =
            first.0.iter().map(|(k, v)| (k.clone(), self.apply(v))).collect();
        for (k, v) in &self.0 {
            out.entry(k.clone()).or_insert_with(|| v.clone());
        }
        TypeSubst(out)
    }

    pub fn apply(&self, t: &Type) -> Type {
        if self.is_empty() {
            return t.clone();
        }
        match t {
            Type::Var(n) => self.0.get(n).cloned().unwrap_or_else(|| t.clone()),
            Type::Int | Type::Bool | Type::Str => t.clone(),
            Type::Arrow(a, b) => Type::arrow(self.apply(a), self.apply(b)),
            Type::Pair(a, b) => Type::pair(self.apply(a), self.apply(b)),
            Type::List(a) => Type::list(self.apply(a)),
            Type::Con(n, args) => Type::Con(n.clone(), args.iter().map(|a| self.apply(a)).collect()),
            Type::Rule(r) => Type::Rule(Box::new(self.apply_rule(r))),
        }
    }

    pub fn apply_rule(&self, r: &RuleType) -> RuleType {
        let inner = self.without(&r.vars).restrict(&r.ftv());
        if inner.is_empty() {
            return r.clone();
        }
        let (vars, inner) = inner.open_binders(&r.vars, || r.ftv());
        RuleType {
            vars,
            context: Context::positional(r.context.iter().map(|m| inner.apply_rule(m)).collect()),
            head: inner.apply(&r.head),
        }
    }

    pub fn apply_context(&self, c: &Context) -> Context {
        Context::positional(c.iter().map(|m| self.apply_rule(m)).collect())
    }

    /// Renames any binder in `vars` that would capture a variable of the
    /// range. Returns the new binder names and the extended substitution.
    fn open_binders(&self, vars: &[Name], body_ftv: impl FnOnce() -> BTreeSet<Name>) -> (Vec<Name>, TypeSubst) {
        let range = self.range_ftv();
        if !vars.iter().any(|v| range.contains(v)) {
            return (vars.to_vec(), self.clone());
        }
        let mut used: BTreeSet<Name> = range;
        used.extend(body_ftv());
        used.extend(vars.iter().cloned());
        used.extend(self.domain());
        let mut s = self.clone();
        let mut out = Vec::with_capacity(vars.len());
        for v in vars {
            if self.range_ftv().contains(v) {
                let v2 = fresh_name(v, &mut used);
                s.insert(v.clone(), Type::Var(v2.clone()));
                out.push(v2);
            } else {
                out.push(v.clone());
            }
        }
        (out, s)
    }

    pub fn apply_expr(&self, e: &Expr) -> Expr {
        if self.is_empty() {
            return e.clone();
        }
        match e {
            Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => e.clone(),
            Expr::Lam(x, t, b) => Expr::Lam(x.clone(), self.apply(t), Box::new(self.apply_expr(b))),
            Expr::App(f, a) => Expr::app(self.apply_expr(f), self.apply_expr(a)),
            Expr::Query(r) => Expr::Query(self.apply_rule(r)),
            Expr::RuleAbs(r, b) => {
                let mut free = r.ftv();
                free.extend(expr_ftv(b));
                let inner = self.without(&r.vars).restrict(&free);
                if inner.is_empty() {
                    return e.clone();
                }
                let (vars, inner) = inner.open_binders(&r.vars, || {
                    let mut s = r.ftv();
                    s.extend(expr_ftv(b));
                    s
                });
                let rule = RuleType {
                    vars,
                    context: inner.apply_context(&r.context),
                    head: inner.apply(&r.head),
                };
                Expr::RuleAbs(rule, Box::new(inner.apply_expr(b)))
            }
            Expr::TyApp(b, ts) => Expr::TyApp(Box::new(self.apply_expr(b)), ts.iter().map(|t| self.apply(t)).collect()),
            Expr::RuleApp(b, args) => Expr::RuleApp(
                Box::new(self.apply_expr(b)),
                args.iter().map(|(a, r)| (self.apply_expr(a), self.apply_rule(r))).collect(),
            ),
            Expr::Prim(op, es) => Expr::Prim(*op, es.iter().map(|x| self.apply_expr(x)).collect()),
            Expr::If(c, t, f) => Expr::If(
                Box::new(self.apply_expr(c)),
                Box::new(self.apply_expr(t)),
                Box::new(self.apply_expr(f)),
            ),
            Expr::Nil(t) => Expr::Nil(self.apply(t)),
            Expr::Record(n, ts, fs) => Expr::Record(
                n.clone(),
                ts.iter().map(|t| self.apply(t)).collect(),
                fs.iter().map(|(f, x)| (f.clone(), self.apply_expr(x))).collect(),
            ),
            Expr::Project(b, f) => Expr::Project(Box::new(self.apply_expr(b)), f.clone()),
        }
    }
}

/// Free type variables of an expression: those in annotations that are not
/// bound by an enclosing rule abstraction.
pub fn expr_ftv(e: &Expr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    expr_ftv_into(e, &mut Vec::new(), &mut out);
    out
}

fn add_free(out: &mut BTreeSet<Name>, s: BTreeSet<Name>, bound: &[Name]) {
    out.extend(s.into_iter().filter(|v| !bound.contains(v)));
}

fn expr_ftv_into(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => {}
        Expr::Lam(_, t, b) => {
            add_free(out, t.ftv(), bound);
            expr_ftv_into(b, bound, out);
        }
        Expr::App(f, a) => {
            expr_ftv_into(f, bound, out);
            expr_ftv_into(a, bound, out);
        }
        Expr::Query(r) => add_free(out, r.ftv(), bound),
        Expr::RuleAbs(r, b) => {
            add_free(out, r.ftv(), bound);
            let mark = bound.len();
            bound.extend(r.vars.iter().cloned());
            expr_ftv_into(b, bound, out);
            bound.truncate(mark);
        }
        Expr::TyApp(b, ts) => {
            expr_ftv_into(b, bound, out);
            for t in ts {
                add_free(out, t.ftv(), bound);
            }
        }
        Expr::RuleApp(b, args) => {
            expr_ftv_into(b, bound, out);
            for (a, r) in args {
                expr_ftv_into(a, bound, out);
                add_free(out, r.ftv(), bound);
            }
        }
        Expr::Prim(_, es) => es.iter().for_each(|x| expr_ftv_into(x, bound, out)),
        Expr::If(c, t, f) => {
            expr_ftv_into(c, bound, out);
            expr_ftv_into(t, bound, out);
            expr_ftv_into(f, bound, out);
        }
        Expr::Nil(t) => add_free(out, t.ftv(), bound),
        Expr::Record(_, ts, fs) => {
            for t in ts {
                add_free(out, t.ftv(), bound);
            }
            fs.iter().for_each(|(_, x)| expr_ftv_into(x, bound, out));
        }
        Expr::Project(b, _) => expr_ftv_into(b, bound, out),
    }
}

/// Renames the quantifiers of rule abstractions so that no two rule
/// abstractions share a binder and no binder coincides with a free type
/// variable of the program.
pub fn freshen(program: &Program) -> Program {
    let mut used = BTreeSet::new();
    program.body.collect_type_names(&mut used);
    for i in &program.interfaces {
        used.extend(i.params.iter().cloned());
    }
    let mut taken = expr_ftv(&program.body);
    Program { interfaces: program.interfaces.clone(), body: freshen_expr(&program.body, &mut used, &mut taken) }
}

fn freshen_expr(e: &Expr, used: &mut BTreeSet<Name>, taken: &mut BTreeSet<Name>) -> Expr {
    match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) | Expr::Query(_) | Expr::Nil(_) => e.clone(),
        Expr::Lam(x, t, b) => Expr::Lam(x.clone(), t.clone(), Box::new(freshen_expr(b, used, taken))),
        Expr::App(f, a) => {
            let f = freshen_expr(f, used, taken);
            Expr::app(f, freshen_expr(a, used, taken))
        }
        Expr::RuleAbs(r, b) => {
            let mut ren = TypeSubst::new();
            let mut vars = Vec::with_capacity(r.vars.len());
            for v in &r.vars {
                if taken.contains(v) {
                    let v2 = fresh_name(v, used);
                    ren.insert(v.clone(), Type::Var(v2.clone()));
                    taken.insert(v2.clone());
                    vars.push(v2);
                } else {
                    taken.insert(v.clone());
                    vars.push(v.clone());
                }
            }
            let (r, b) = if ren.is_empty() {
                (r.clone(), (**b).clone())
            } else {
                let rule = RuleType {
                    vars,
                    context: ren.apply_context(&r.context),
                    head: ren.apply(&r.head),
                };
                (rule, ren.apply_expr(b))
            };
            Expr::RuleAbs(r, Box::new(freshen_expr(&b, used, taken)))
        }
        Expr::TyApp(b, ts) => Expr::TyApp(Box::new(freshen_expr(b, used, taken)), ts.clone()),
        Expr::RuleApp(b, args) => {
            let b = freshen_expr(b, used, taken);
            let args = args.iter().map(|(a, r)| (freshen_expr(a, used, taken), r.clone())).collect();
            Expr::RuleApp(Box::new(b), args)
        }
        Expr::Prim(op, es) => Expr::Prim(*op, es.iter().map(|x| freshen_expr(x, used, taken)).collect()),
        Expr::If(c, t, f) => {
            let c = freshen_expr(c, used, taken);
            let t = freshen_expr(t, used, taken);
            let f = freshen_expr(f, used, taken);
            Expr::If(Box::new(c), Box::new(t), Box::new(f))
        }
        Expr::Record(n, ts, fs) => Expr::Record(
            n.clone(),
            ts.clone(),
            fs.iter().map(|(f, x)| (f.clone(), freshen_expr(x, used, taken))).collect(),
        ),
        Expr::Project(b, f) => Expr::Project(Box::new(freshen_expr(b, used, taken)), f.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Type {
        Type::var(n)
    }

    #[test]
    fn direct_hit() {
        let s = TypeSubst::single("a", Type::Int);
        assert_eq!(s.apply(&Type::pair(v("a"), v("a"))), Type::pair(Type::Int, Type::Int));
    }

    #[test]
    fn shadowed_binder_is_skipped() {
        let r = RuleType::new(vec!["a".into()], [RuleType::simple(v("a"))], v("a"));
        let s = TypeSubst::single("a", Type::Int);
        assert_eq!(s.apply_rule(&r), r);
    }

    #[test]
    fn simultaneous_application() {
        // {α, β⇒α} ⇒ β under [α↦Int, β↦Bool]
        let inner = RuleType::new(vec![], [RuleType::simple(v("b"))], v("a"));
        let r = RuleType::new(vec![], [RuleType::simple(v("a")), inner], v("b"));
        let mut s = TypeSubst::new();
        s.insert("a".into(), Type::Int);
        s.insert("b".into(), Type::Bool);
        let got = s.apply_rule(&r);
        let want_inner = RuleType::new(vec![], [RuleType::simple(Type::Bool)], Type::Int);
        let want = RuleType::new(vec![], [RuleType::simple(Type::Int), want_inner], Type::Bool);
        assert!(got.alpha_eq(&want));
        assert_eq!(got.head, Type::Bool);
    }

    #[test]
    fn capture_is_avoided() {
        // [b ↦ a] (∀a. a → b) must not capture.
        let r = RuleType::new(vec!["a".into()], [], Type::arrow(v("a"), v("b")));
        let got = TypeSubst::single("b", v("a")).apply_rule(&r);
        assert_eq!(got.vars.len(), 1);
        assert_ne!(got.vars[0], "a");
        assert_eq!(got.head, Type::arrow(Type::Var(got.vars[0].clone()), v("a")));
    }

    #[test]
    fn sequential_is_not_simultaneous() {
        let mut s = TypeSubst::new();
        s.insert("a".into(), v("b"));
        s.insert("b".into(), Type::Int);
        assert_eq!(s.apply(&Type::arrow(v("a"), v("b"))), Type::arrow(v("b"), Type::Int));
    }

    #[test]
    fn composition() {
        let t = Type::arrow(v("a"), Type::pair(v("b"), v("c")));
        let s1 = TypeSubst::single("a", Type::list(v("b")));
        let s2 = TypeSubst::single("b", Type::Bool);
        assert_eq!(s2.apply(&s1.apply(&t)), s2.compose(&s1).apply(&t));
    }

    #[test]
    fn freshen_separates_sibling_binders() {
        let r = RuleType::new(vec!["a".into()], [RuleType::simple(v("a"))], v("a"));
        let body = Expr::pair(
            Expr::rule_abs(r.clone(), Expr::query(v("a"))),
            Expr::rule_abs(r, Expr::query(v("a"))),
        );
        let out = freshen(&Program::new(body)).body;
        let Expr::Prim(_, parts) = out else { panic!() };
        let (Expr::RuleAbs(r1, b1), Expr::RuleAbs(r2, b2)) = (&parts[0], &parts[1]) else { panic!() };
        assert_ne!(r1.vars, r2.vars);
        assert_eq!(**b1, Expr::query(Type::Var(r1.vars[0].clone())));
        assert_eq!(**b2, Expr::query(Type::Var(r2.vars[0].clone())));
    }
}
