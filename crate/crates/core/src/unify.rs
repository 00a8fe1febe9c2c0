//! Restricted unification and one-way matching over types, rule types and
//! contexts.
//!
//! Only variables in the designated set are substitutable. Quantifiers of
//! nested rule types are opened to shared rigid names, which must not escape
//! into the resulting substitution.

use std::collections::{BTreeMap, BTreeSet};

use crate::subst::TypeSubst;
use crate::syntax::{Context, Name, RuleType, Type};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Unify,
    Match,
}

struct Solver<'a> {
    mode: Mode,
    vars: &'a BTreeSet<Name>,
    subst: BTreeMap<Name, Type>,
    rigid: BTreeSet<Name>,
    counter: usize,
}

/// Most general unifier of `t1` and `t2` with support in `vars`.
pub fn unify(t1: &Type, t2: &Type, vars: &BTreeSet<Name>) -> Option<TypeSubst> {
    let mut s = Solver::new(Mode::Unify, vars);
    s.types(t1, t2).then(|| s.finish())
}

pub fn unify_rules(r1: &RuleType, r2: &RuleType, vars: &BTreeSet<Name>) -> Option<TypeSubst> {
    unify(&r1.to_type(), &r2.to_type(), vars)
}

pub fn unify_contexts(p1: &Context, p2: &Context, vars: &BTreeSet<Name>) -> Option<TypeSubst> {
    let mut s = Solver::new(Mode::Unify, vars);
    s.contexts(p1.members(), p2.members()).then(|| s.finish())
}

/// One-way matching: `θ` with support in `vars` such that `θ pattern`
/// equals `target`. The target is never substituted into.
pub fn match_type(pattern: &Type, target: &Type, vars: &BTreeSet<Name>) -> Option<TypeSubst> {
    let mut s = Solver::new(Mode::Match, vars);
    s.types(pattern, target).then(|| s.finish())
}

/// Matches the head of `r` against `goal`, returning the matching
/// substitution over `r`'s quantifiers and the instantiated context and head.
pub fn match_head(r: &RuleType, goal: &Type) -> Option<(TypeSubst, Context, Type)> {
    let vars: BTreeSet<Name> = r.vars.iter().cloned().collect();
    let theta = match_type(&r.head, goal, &vars)?;
    let context = theta.apply_context(&r.context);
    let head = theta.apply(&r.head);
    Some((theta, context, head))
}

impl<'a> Solver<'a> {
    fn new(mode: Mode, vars: &'a BTreeSet<Name>) -> Self {
        Solver { mode, vars, subst: BTreeMap::new(), rigid: BTreeSet::new(), counter: 0 }
    }

    fn flexible(&self, v: &str) -> bool {
        self.vars.contains(v) && !self.rigid.contains(v)
    }

    fn finish(self) -> TypeSubst {
        if self.mode == Mode::Match {
            let (k, v): (Vec<Name>, Vec<Type>) = self.subst.into_iter().unzip();
            return TypeSubst::zip(&k, &v);
        }
        let tri = TypeSubst::zip(
            &self.subst.keys().cloned().collect::<Vec<_>>(),
            &self.subst.values().cloned().collect::<Vec<_>>(),
        );
        let mut out = TypeSubst::new();
        for (k, v) in self.subst.iter() {
            out.insert(k.clone(), fixpoint(&tri, v));
        }
        out
    }

    fn resolve(&self, t: &Type) -> Type {
        let mut cur = t.clone();
        while let Type::Var(v) = &cur {
            match self.subst.get(v) {
                Some(next) if self.mode == Mode::Unify => cur = next.clone(),
                _ => break,
            }
        }
        cur
    }

    fn full(&self, t: &Type) -> Type {
        let tri = TypeSubst::zip(
            &self.subst.keys().cloned().collect::<Vec<_>>(),
            &self.subst.values().cloned().collect::<Vec<_>>(),
        );
        fixpoint(&tri, t)
    }

    fn mentions_rigid(&self, t: &Type) -> bool {
        !self.rigid.is_empty() && t.ftv().iter().any(|v| self.rigid.contains(v))
    }

    fn bind(&mut self, v: &str, t: &Type) -> bool {
        if let Type::Var(w) = t {
            if w == v {
                return true;
            }
        }
        let full = self.full(t);
        if self.mentions_rigid(&full) || full.ftv().contains(v) {
            return false;
        }
        self.subst.insert(v.to_string(), full);
        true
    }

    fn types(&mut self, a: &Type, b: &Type) -> bool {
        match self.mode {
            Mode::Unify => {
                let a = self.resolve(a);
                let b = self.resolve(b);
                match (&a, &b) {
                    (Type::Var(x), _) if self.flexible(x) => self.bind(x, &b),
                    (_, Type::Var(y)) if self.flexible(y) => self.bind(y, &a),
                    _ => self.structural(&a, &b),
                }
            }
            Mode::Match => match a {
                Type::Var(x) if self.flexible(x) => match self.subst.get(x) {
                    Some(prev) => prev.alpha_eq(b),
                    None => {
                        if self.mentions_rigid(b) {
                            return false;
                        }
                        self.subst.insert(x.clone(), b.clone());
                        true
                    }
                },
                _ => self.structural(a, b),
            },
        }
    }

    fn structural(&mut self, a: &Type, b: &Type) -> bool {
        match (a, b) {
            (Type::Var(x), Type::Var(y)) => x == y,
            (Type::Int, Type::Int) | (Type::Bool, Type::Bool) | (Type::Str, Type::Str) => true,
            (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) | (Type::Pair(a1, a2), Type::Pair(b1, b2)) => {
                self.types(a1, b1) && self.types(a2, b2)
            }
            (Type::List(x), Type::List(y)) => self.types(x, y),
            (Type::Con(n, xs), Type::Con(m, ys)) => {
                n == m && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.types(x, y))
            }
            (Type::Rule(r1), Type::Rule(r2)) => self.rules(r1, r2),
            _ => false,
        }
    }

    fn fresh_rigid(&mut self) -> Name {
        loop {
            self.counter += 1;
            let n = format!("#{}", self.counter);
            if !self.vars.contains(&n) {
                self.rigid.insert(n.clone());
                return n;
            }
        }
    }

    fn rules(&mut self, r1: &RuleType, r2: &RuleType) -> bool {
        if r1.vars.len() != r2.vars.len() {
            return false;
        }
        let fresh: Vec<Type> = r1.vars.iter().map(|_| Type::Var(self.fresh_rigid())).collect();
        let open = |r: &RuleType| {
            let s = TypeSubst::zip(&r.vars, &fresh);
            (s.apply_context(&r.context), s.apply(&r.head))
        };
        let (c1, h1) = open(r1);
        let (c2, h2) = open(r2);
        self.types(&h1, &h2) && self.contexts(c1.members(), c2.members())
    }

    fn pair_rules(&mut self, a: &RuleType, b: &RuleType) -> bool {
        self.types(&a.to_type(), &b.to_type())
    }

    /// Set unification: a singleton from one side is paired with a nonempty
    /// subset of the other side, then the remainders are unified.
    fn contexts(&mut self, p1: &[RuleType], p2: &[RuleType]) -> bool {
        if p1.is_empty() && p2.is_empty() {
            return true;
        }
        if p1.is_empty() || p2.is_empty() {
            return false;
        }
        for (single_left, singles, others) in [(true, p1, p2), (false, p2, p1)] {
            let head = &singles[0];
            let rest = &singles[1..];
            for mask in subsets(others.len()) {
                let saved = self.subst.clone();
                let chosen = (0..others.len()).filter(|i| mask & (1 << i) != 0);
                let ok = chosen.clone().all(|i| {
                    if single_left {
                        self.pair_rules(head, &others[i])
                    } else {
                        self.pair_rules(&others[i], head)
                    }
                });
                if ok {
                    let remaining: Vec<RuleType> = (0..others.len())
                        .filter(|i| mask & (1 << i) == 0)
                        .map(|i| others[i].clone())
                        .collect();
                    let done = if single_left {
                        self.contexts(rest, &remaining)
                    } else {
                        self.contexts(&remaining, rest)
                    };
                    if done {
                        return true;
                    }
                }
                self.subst = saved;
            }
        }
        false
    }
}

/// Nonempty subsets of `0..n` as bit masks, smallest first.
fn subsets(n: usize) -> Vec<u64> {
    assert!(n < 20, "context too large for set unification");
    let mut out: Vec<u64> = (1..(1u64 << n)).collect();
    out.sort_by_key(|m| (m.count_ones(), *m));
    out
}

fn fixpoint(tri: &TypeSubst, t: &Type) -> Type {
    let mut cur = t.clone();
    loop {
        let next = tri.apply(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Type {
        Type::var(n)
    }

    fn set(xs: &[&str]) -> BTreeSet<Name> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn dup(a: &str) -> RuleType {
        RuleType::new(vec![a.into()], [RuleType::simple(v(a))], Type::pair(v(a), v(a)))
    }

    #[test]
    fn variable_case() {
        let s = unify(&v("a"), &Type::Int, &set(&["a"])).unwrap();
        assert_eq!(s, TypeSubst::single("a", Type::Int));
    }

    #[test]
    fn alpha_variants_unify_trivially() {
        let s = unify_rules(&dup("a1"), &dup("a2"), &set(&[])).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn two_sided() {
        let s = unify(&Type::arrow(Type::Int, v("b")), &Type::arrow(v("a"), Type::Int), &set(&["a", "b"])).unwrap();
        assert_eq!(s.get("a"), Some(&Type::Int));
        assert_eq!(s.get("b"), Some(&Type::Int));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn restricted_support() {
        assert!(unify(&v("a"), &Type::Int, &set(&[])).is_none());
        assert!(unify(&v("a"), &Type::list(v("a")), &set(&["a"])).is_none());
    }

    #[test]
    fn contexts_examples() {
        let c = |ts: Vec<Type>| Context::new(ts.into_iter().map(RuleType::simple));
        assert!(unify_contexts(&c(vec![]), &c(vec![]), &set(&["a"])).unwrap().is_empty());
        let s = unify_contexts(&c(vec![v("a")]), &c(vec![Type::Int]), &set(&["a"])).unwrap();
        assert_eq!(s, TypeSubst::single("a", Type::Int));
        let s = unify_contexts(&c(vec![v("a"), Type::Bool]), &c(vec![Type::Int, Type::Bool]), &set(&["a"])).unwrap();
        assert_eq!(s, TypeSubst::single("a", Type::Int));
    }

    #[test]
    fn context_collapse() {
        let c = |ts: Vec<Type>| Context::new(ts.into_iter().map(RuleType::simple));
        let s = unify_contexts(&c(vec![v("a"), v("b")]), &c(vec![Type::Int]), &set(&["a", "b"])).unwrap();
        assert_eq!(s.get("a"), Some(&Type::Int));
        assert_eq!(s.get("b"), Some(&Type::Int));
        assert!(unify_contexts(&c(vec![v("a")]), &c(vec![Type::Int, Type::Bool]), &set(&["a"])).is_none());
    }

    #[test]
    fn match_head_examples() {
        let (theta, ctx, head) = match_head(&dup("a"), &Type::pair(Type::Int, Type::Int)).unwrap();
        assert_eq!(theta, TypeSubst::single("a", Type::Int));
        assert_eq!(ctx.members(), &[RuleType::simple(Type::Int)]);
        assert_eq!(head, Type::pair(Type::Int, Type::Int));
        let (theta, ctx, _) = match_head(&RuleType::simple(Type::Int), &Type::Int).unwrap();
        assert!(theta.is_empty() && ctx.is_empty());
        assert!(match_head(&dup("a"), &Type::arrow(Type::Int, Type::Int)).is_none());
    }

    #[test]
    fn matching_is_one_way() {
        let r = RuleType::new(vec![], [], Type::arrow(Type::Int, Type::Int));
        assert!(match_head(&r, &Type::arrow(v("b"), v("b"))).is_none());
        let poly = RuleType::new(vec!["a".into()], [], Type::arrow(v("a"), v("a")));
        let (theta, _, _) = match_head(&poly, &Type::arrow(v("b"), v("b"))).unwrap();
        assert_eq!(theta, TypeSubst::single("a", v("b")));
        assert!(match_head(&poly, &Type::arrow(v("b"), Type::Int)).is_none());
    }

    #[test]
    fn matching_goal_variable_with_same_name() {
        let poly = RuleType::new(vec!["a".into()], [RuleType::simple(v("a"))], Type::list(v("a")));
        let (theta, ctx, _) = match_head(&poly, &Type::list(v("a"))).unwrap();
        assert_eq!(theta, TypeSubst::single("a", v("a")));
        assert_eq!(ctx.members()[0].head, v("a"));
    }

    #[test]
    fn nested_binders_do_not_escape() {
        let inner = |n: &str| Type::Rule(Box::new(RuleType::new(vec![n.into()], [], Type::arrow(v(n), v(n)))));
        assert!(unify(&inner("x"), &inner("y"), &set(&[])).is_some());
        let escape = Type::Rule(Box::new(RuleType::new(vec!["x".into()], [], Type::arrow(v("x"), v("q")))));
        assert!(unify(&escape, &inner("y"), &set(&["q"])).is_none());
    }
}
