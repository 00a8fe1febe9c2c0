//! Random generators and brute-force oracles for randomized testing.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::subst::TypeSubst;
use crate::syntax::{Expr, Name, PrimOp, Program, RuleType, Type};
use crate::typecheck::{resolve, ImplicitEnv};

/// Every ground type of depth at most one over `Int` and `Bool`, and the
/// rules with one base premise concluding one of those.
pub fn ground_depth_one() -> Vec<Type> {
    let base = [Type::Int, Type::Bool];
    let mut out: Vec<Type> = base.to_vec();
    for a in &base {
        out.push(Type::list(a.clone()));
        out.push(Type::con("T", vec![a.clone()]));
        for b in &base {
            out.push(Type::arrow(a.clone(), b.clone()));
            out.push(Type::pair(a.clone(), b.clone()));
        }
    }
    let heads = out.clone();
    for a in &base {
        for h in &heads {
            out.push(RuleType::new(Vec::new(), [RuleType::simple(a.clone())], h.clone()).to_type());
        }
    }
    out
}

/// A simple type of at most `depth` constructor levels over the given
/// variables and `Int`, `Bool`.
pub fn simple_type<R: Rng>(rng: &mut R, depth: usize, vars: &[&str]) -> Type {
    let leaf = |rng: &mut R| -> Type {
        let k = rng.gen_range(0..2 + vars.len());
        match k {
            0 => Type::Int,
            1 => Type::Bool,
            _ => Type::var(vars[k - 2]),
        }
    };
    if depth == 0 || rng.gen_bool(0.35) {
        return leaf(rng);
    }
    match rng.gen_range(0..4) {
        0 => Type::arrow(simple_type(rng, depth - 1, vars), simple_type(rng, depth - 1, vars)),
        1 => Type::pair(simple_type(rng, depth - 1, vars), simple_type(rng, depth - 1, vars)),
        2 => Type::list(simple_type(rng, depth - 1, vars)),
        _ => Type::con("T", vec![simple_type(rng, depth - 1, vars)]),
    }
}

/// A rule type of depth at most one with at most one context member, over
/// the free variable `a` and the quantifiable variable `b`.
pub fn small_rule<R: Rng>(rng: &mut R) -> RuleType {
    let quantify = rng.gen_bool(0.5);
    let head = simple_type(rng, 1, &["a", "b"]);
    let context: Vec<RuleType> =
        if rng.gen_bool(0.3) { vec![RuleType::simple(simple_type(rng, 0, &["a", "b"]))] } else { Vec::new() };
    let vars = if quantify { vec!["b".to_string()] } else { Vec::new() };
    RuleType::new(vars, context, head)
}

fn rename_quantifiers(r: &RuleType, tag: &str) -> Type {
    let mut theta = TypeSubst::new();
    for v in &r.vars {
        theta.insert(v.clone(), Type::Var(format!("{v}{tag}")));
    }
    let open = RuleType { vars: Vec::new(), context: r.context.clone(), head: r.head.clone() };
    theta.apply(&open.to_type())
}

/// Searches every assignment of the variables of both rules, with
/// quantifiers renamed apart, to the ground pool for one that makes the
/// rules equal. Contexts are compared positionally, which is exact for
/// rules with at most one premise.
pub fn overlap_by_enumeration(r1: &RuleType, r2: &RuleType) -> bool {
    let (t1, t2) = (rename_quantifiers(r1, "'1"), rename_quantifiers(r2, "'2"));
    let mut vars: BTreeSet<Name> = t1.ftv();
    vars.extend(t2.ftv());
    let vars: Vec<Name> = vars.into_iter().collect();
    let pool = ground_depth_one();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let env: Vec<(&Name, &Type)> = vars.iter().zip(idx.iter().map(|&i| &pool[i])).collect();
        if same(&t1, &t2, &env) {
            return true;
        }
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < pool.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            return false;
        }
    }
}

/// Equality of two types after replacing their variables by ground types.
fn same(a: &Type, b: &Type, env: &[(&Name, &Type)]) -> bool {
    let look = |t: &'_ Type| -> Option<Type> {
        match t {
            Type::Var(v) => env.iter().find(|(w, _)| *w == v).map(|(_, g)| (*g).clone()),
            _ => None,
        }
    };
    if let Some(g) = look(a) {
        return same(&g, b, env);
    }
    if let Some(g) = look(b) {
        return same(a, &g, env);
    }
    match (a, b) {
        (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) | (Type::Pair(a1, a2), Type::Pair(b1, b2)) => {
            same(a1, b1, env) && same(a2, b2, env)
        }
        (Type::List(x), Type::List(y)) => same(x, y, env),
        (Type::Con(m, xs), Type::Con(n, ys)) => {
            m == n && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| same(x, y, env))
        }
        (Type::Rule(r), Type::Rule(q)) => {
            r.vars.is_empty()
                && q.vars.is_empty()
                && r.context.len() == q.context.len()
                && r.context.iter().zip(q.context.iter()).all(|(x, y)| same(&x.to_type(), &y.to_type(), env))
                && same(&r.head, &q.head, env)
        }
        _ => a == b,
    }
}

/// Depth-bounded Horn entailment: some rule anywhere in the environment has
/// a head matching the goal and every instantiated premise is entailed,
/// with the goal's own context available as facts.
pub fn horn_entails(frames: &[Vec<RuleType>], goal: &RuleType, depth: usize) -> bool {
    horn(frames, goal.context.members(), goal, depth)
}

fn horn(frames: &[Vec<RuleType>], facts: &[RuleType], goal: &RuleType, depth: usize) -> bool {
    if depth == 0 {
        return false;
    }
    let mut facts = facts.to_vec();
    facts.extend(goal.context.iter().cloned());
    let candidates: Vec<&RuleType> = frames.iter().flatten().chain(facts.iter()).collect();
    candidates.iter().any(|r| {
        let Some((_, context, _)) = crate::unify::match_head(r, &goal.head) else { return false };
        context.iter().all(|m| facts.iter().any(|f| f.alpha_eq(m)) || horn(frames, &facts, m, depth - 1))
    })
}

/// An environment of at most four rules over a few ground types, plus an
/// occasional polymorphic rule, split into one or two frames.
pub fn horn_env<R: Rng>(rng: &mut R) -> Vec<Vec<RuleType>> {
    let atoms = [Type::Int, Type::Bool, Type::Str, Type::list(Type::Int), Type::pair(Type::Int, Type::Bool)];
    let n = rng.gen_range(0..=4);
    let mut rules = Vec::new();
    for _ in 0..n {
        if rng.gen_bool(0.2) {
            rules.push(RuleType::new(vec!["a".into()], [RuleType::simple(Type::var("a"))], Type::list(Type::var("a"))));
            continue;
        }
        let head = atoms.choose(rng).cloned().unwrap_or(Type::Int);
        let k = rng.gen_range(0..=2);
        let premises: Vec<RuleType> = (0..k).map(|_| RuleType::simple(atoms.choose(rng).cloned().unwrap_or(Type::Int))).collect();
        rules.push(RuleType::new(Vec::new(), premises, head));
    }
    if rules.len() >= 2 && rng.gen_bool(0.5) {
        let cut = rng.gen_range(1..rules.len());
        let inner = rules.split_off(cut);
        vec![rules, inner]
    } else {
        vec![rules]
    }
}

pub fn horn_goal<R: Rng>(rng: &mut R) -> RuleType {
    let atoms = [Type::Int, Type::Bool, Type::Str, Type::list(Type::Int), Type::list(Type::Bool), Type::pair(Type::Int, Type::Bool)];
    let head = atoms.choose(rng).cloned().unwrap_or(Type::Int);
    if rng.gen_bool(0.25) {
        let m = atoms.choose(rng).cloned().unwrap_or(Type::Int);
        if !m.alpha_eq(&head) {
            return RuleType::new(Vec::new(), [RuleType::simple(m)], head);
        }
    }
    RuleType::simple(head)
}

/// Generates closed, well-typed λ⇒ programs by construction, following
/// the target type downwards.
pub struct TermGen<'r, R: Rng> {
    rng: &'r mut R,
    vars: Vec<(Name, Type)>,
    frames: Vec<Vec<RuleType>>,
    counter: usize,
}

impl<'r, R: Rng> TermGen<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        TermGen { rng, vars: Vec::new(), frames: Vec::new(), counter: 0 }
    }

    fn fresh(&mut self, base: &str) -> Name {
        self.counter += 1;
        format!("{base}{}", self.counter)
    }

    pub fn ty(&mut self, depth: usize) -> Type {
        if depth == 0 || self.rng.gen_bool(0.5) {
            return if self.rng.gen_bool(0.5) { Type::Int } else { Type::Bool };
        }
        match self.rng.gen_range(0..3) {
            0 => Type::pair(self.ty(depth - 1), self.ty(depth - 1)),
            1 => Type::arrow(self.ty(depth - 1), self.ty(depth - 1)),
            _ => Type::list(self.ty(depth - 1)),
        }
    }

    /// A program of the given maximum depth and its type.
    pub fn program(&mut self, depth: usize) -> (Program, Type) {
        self.vars.clear();
        self.frames.clear();
        let t = self.ty(2);
        let e = self.expr(&t, depth);
        (Program::new(e), t)
    }

    fn resolvable(&self, t: &Type) -> bool {
        let delta = ImplicitEnv::from_rules(self.frames.clone());
        resolve(&delta, &RuleType::simple(t.clone())).is_ok()
    }

    fn leaf(&mut self, t: &Type) -> Expr {
        let vars: Vec<Name> = self.vars.iter().filter(|(_, s)| s.alpha_eq(t)).map(|(x, _)| x.clone()).collect();
        if !vars.is_empty() && self.rng.gen_bool(0.5) {
            return Expr::var(vars.choose(self.rng).unwrap());
        }
        if self.rng.gen_bool(0.5) && self.resolvable(t) {
            return Expr::query(t.clone());
        }
        match t {
            Type::Bool => Expr::Bool(self.rng.gen_bool(0.5)),
            Type::Pair(a, b) => Expr::pair(self.leaf(a), self.leaf(b)),
            Type::List(a) => {
                if self.rng.gen_bool(0.5) {
                    Expr::Nil((**a).clone())
                } else {
                    let x = self.leaf(a);
                    Expr::Prim(PrimOp::Cons, vec![x, Expr::Nil((**a).clone())])
                }
            }
            Type::Arrow(a, b) => {
                let x = self.fresh("x");
                self.vars.push((x.clone(), (**a).clone()));
                let body = self.leaf(b);
                self.vars.pop();
                Expr::lam(&x, (**a).clone(), body)
            }
            _ => Expr::Int(self.rng.gen_range(-3..10)),
        }
    }

    pub fn expr(&mut self, t: &Type, depth: usize) -> Expr {
        if depth == 0 {
            return self.leaf(t);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..10) {
            0 => self.leaf(t),
            1 => match t {
                Type::Int => Expr::Prim(PrimOp::Add, vec![self.expr(&Type::Int, d), self.expr(&Type::Int, d)]),
                Type::Bool => match self.rng.gen_range(0..3) {
                    0 => Expr::Prim(PrimOp::Not, vec![self.expr(&Type::Bool, d)]),
                    1 => Expr::Prim(PrimOp::IsEven, vec![self.expr(&Type::Int, d)]),
                    _ => Expr::Prim(PrimOp::And, vec![self.expr(&Type::Bool, d), self.expr(&Type::Bool, d)]),
                },
                Type::Pair(a, b) => Expr::pair(self.expr(a, d), self.expr(b, d)),
                Type::List(a) => Expr::Prim(PrimOp::Cons, vec![self.expr(a, d), self.expr(t, d)]),
                Type::Arrow(a, b) => {
                    let x = self.fresh("x");
                    self.vars.push((x.clone(), (**a).clone()));
                    let body = self.expr(b, d);
                    self.vars.pop();
                    Expr::lam(&x, (**a).clone(), body)
                }
                _ => self.leaf(t),
            },
            2 => Expr::If(Box::new(self.expr(&Type::Bool, d)), Box::new(self.expr(t, d)), Box::new(self.expr(t, d))),
            3 => {
                let s = self.ty(1);
                let x = self.fresh("y");
                let arg = self.expr(&s, d);
                self.vars.push((x.clone(), s.clone()));
                let body = self.expr(t, d);
                self.vars.pop();
                Expr::app(Expr::lam(&x, s, body), arg)
            }
            4 | 5 => self.implicit(t, d),
            6 => {
                let s = self.ty(1);
                let arg = self.expr(&s, d);
                self.frames.push(vec![RuleType::simple(s.clone())]);
                let body = self.expr(t, d);
                self.frames.pop();
                let r = RuleType::new(Vec::new(), [RuleType::simple(s.clone())], t.clone());
                Expr::RuleApp(Box::new(Expr::rule_abs(r, body)), vec![(arg, RuleType::simple(s))])
            }
            7 => {
                let a = self.fresh("a");
                let x = self.fresh("z");
                let id = RuleType::new(vec![a.clone()], Vec::new(), Type::arrow(Type::var(&a), Type::var(&a)));
                let f = Expr::rule_abs(id, Expr::lam(&x, Type::var(&a), Expr::var(&x)));
                Expr::app(Expr::TyApp(Box::new(f), vec![t.clone()]), self.expr(t, d))
            }
            8 => match t {
                Type::Pair(a, b) if a.alpha_eq(b) => {
                    let v = self.fresh("a");
                    let dup = dup_rule(&v);
                    let arg = self.expr(a, d);
                    let inst = Expr::TyApp(Box::new(dup), vec![(**a).clone()]);
                    Expr::RuleApp(Box::new(inst), vec![(arg, RuleType::simple((**a).clone()))])
                }
                _ => {
                    let s = self.ty(1);
                    let p = Expr::pair(self.expr(t, d), self.expr(&s, d));
                    Expr::Prim(PrimOp::Fst, vec![p])
                }
            },
            _ => {
                if self.rng.gen_bool(0.5) && self.resolvable(t) {
                    Expr::query(t.clone())
                } else {
                    self.expr(t, d)
                }
            }
        }
    }

    /// `implicit {..} in e : t` with a few simple rules and sometimes the
    /// polymorphic pair rule, keeping the frame free of overlap.
    fn implicit(&mut self, t: &Type, d: usize) -> Expr {
        let mut types: Vec<Type> = Vec::new();
        for _ in 0..self.rng.gen_range(1..=2) {
            let s = self.ty(1);
            if !types.iter().any(|u| u.alpha_eq(&s)) {
                types.push(s);
            }
        }
        let mut args: Vec<(Expr, RuleType)> = Vec::new();
        for s in &types {
            args.push((self.expr(s, d), RuleType::simple(s.clone())));
        }
        if self.rng.gen_bool(0.4) && !types.iter().any(|s| matches!(s, Type::Pair(..))) {
            let v = self.fresh("a");
            let r = match &dup_rule(&v) {
                Expr::RuleAbs(r, _) => r.clone(),
                _ => unreachable!(),
            };
            args.push((dup_rule(&v), r));
        }
        self.frames.push(args.iter().map(|(_, r)| r.clone()).collect());
        let body = self.expr(t, d);
        self.frames.pop();
        Expr::implicit(args, body, t.clone())
    }
}

/// `rule (∀v. {v} ⇒ (v, v)) (?v, ?v)`
fn dup_rule(v: &str) -> Expr {
    let a = Type::var(v);
    let r = RuleType::new(vec![v.to_string()], [RuleType::simple(a.clone())], Type::pair(a.clone(), a.clone()));
    Expr::rule_abs(r, Expr::pair(Expr::query(a.clone()), Expr::query(a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_programs_typecheck_at_their_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut gen = TermGen::new(&mut rng);
        for _ in 0..100 {
            let (p, t) = gen.program(4);
            let got = crate::typecheck::infer(&p).unwrap_or_else(|e| panic!("{e}\n{}", p.body));
            assert!(got.alpha_eq(&t), "{got} vs {t}");
        }
    }

    #[test]
    fn oracles() {
        let int = RuleType::simple(Type::Int);
        assert!(!overlap_by_enumeration(&int, &RuleType::simple(Type::Bool)));
        let poly = RuleType::new(vec!["b".into()], [], Type::arrow(Type::var("b"), Type::Int));
        assert!(overlap_by_enumeration(&poly, &RuleType::simple(Type::arrow(Type::Int, Type::Int))));
        let frames = vec![vec![int.clone(), RuleType::new(vec![], [int.clone()], Type::Bool)]];
        assert!(horn_entails(&frames, &RuleType::simple(Type::Bool), 4));
        assert!(!horn_entails(&frames, &RuleType::simple(Type::Str), 4));
        assert!(horn_entails(&[], &RuleType::new(vec![], [int], Type::Int), 2));
    }
}
