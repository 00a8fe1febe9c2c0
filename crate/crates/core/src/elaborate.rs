//! Translation of λ⇒ types and evidence into System F.
//!
//! `|∀ᾱ.{ρ1..ρn} ⇒ τ| = ∀ᾱ.|ρ1| → … → |ρn| → |τ|`, taking context members
//! in their stored order. A quantified rule with an empty context takes one
//! unit argument. Because substitution keeps members in place, two
//! alpha-equivalent types can translate differently; [`Translator::coerce`]
//! bridges them.

use std::collections::BTreeSet;

use crate::error::TypeError;
use crate::subst::TypeSubst;
use crate::syntax::{fresh_name, Expr, Interface, Name, PrimOp, Program, RuleType, Type};
use crate::systemf::{FExpr, FInterface, FType};
use crate::typecheck::{Checker, Premise, ResolutionTrace};

pub fn type_translate(t: &Type) -> FType {
    match t {
        Type::Var(v) => FType::Var(v.clone()),
        Type::Int => FType::Int,
        Type::Bool => FType::Bool,
        Type::Str => FType::Str,
        Type::Arrow(a, b) => FType::arrow(type_translate(a), type_translate(b)),
        Type::Pair(a, b) => FType::pair(type_translate(a), type_translate(b)),
        Type::List(a) => FType::list(type_translate(a)),
        Type::Con(n, args) => FType::Con(n.clone(), args.iter().map(type_translate).collect()),
        Type::Rule(r) => rule_translate(r),
    }
}

pub fn rule_translate(r: &RuleType) -> FType {
    let mut body = type_translate(&r.head);
    if r.context.is_empty() && !r.vars.is_empty() {
        body = FType::arrow(FType::Unit, body);
    }
    for m in r.context.members().iter().rev() {
        body = FType::arrow(rule_translate(m), body);
    }
    for v in r.vars.iter().rev() {
        body = FType::Forall(v.clone(), Box::new(body));
    }
    body
}

pub fn interface_translate(i: &Interface) -> FInterface {
    FInterface {
        name: i.name.clone(),
        params: i.params.clone(),
        fields: i.fields.iter().map(|(f, t)| (f.clone(), type_translate(t))).collect(),
    }
}

/// Generator of names that are fresh for one program.
#[derive(Clone, Debug, Default)]
pub struct NameSupply {
    terms: BTreeSet<Name>,
    types: BTreeSet<Name>,
}

impl NameSupply {
    pub fn for_program(p: &Program) -> Self {
        let mut s = NameSupply::default();
        p.body.collect_type_names(&mut s.types);
        collect_term_names(&p.body, &mut s.terms);
        for i in &p.interfaces {
            s.types.extend(i.params.iter().cloned());
            for (f, t) in &i.fields {
                s.terms.insert(f.clone());
                t.collect_names(&mut s.types);
            }
        }
        s
    }

    pub fn reserve_type(&mut self, v: &str) {
        self.types.insert(v.to_string());
    }

    pub fn reserve_term(&mut self, x: &str) {
        self.terms.insert(x.to_string());
    }

    pub fn term(&mut self, base: &str) -> Name {
        fresh_name(base, &mut self.terms)
    }

    pub fn ty(&mut self, base: &str) -> Name {
        fresh_name(base, &mut self.types)
    }
}

fn collect_term_names(e: &Expr, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Var(x) => {
            out.insert(x.clone());
        }
        Expr::Lam(x, _, b) => {
            out.insert(x.clone());
            collect_term_names(b, out);
        }
        Expr::App(f, a) => {
            collect_term_names(f, out);
            collect_term_names(a, out);
        }
        Expr::RuleAbs(_, b) | Expr::TyApp(b, _) | Expr::Project(b, _) => collect_term_names(b, out),
        Expr::RuleApp(b, args) => {
            collect_term_names(b, out);
            args.iter().for_each(|(a, _)| collect_term_names(a, out));
        }
        Expr::Prim(_, es) => es.iter().for_each(|a| collect_term_names(a, out)),
        Expr::If(c, t, f) => {
            collect_term_names(c, out);
            collect_term_names(t, out);
            collect_term_names(f, out);
        }
        Expr::Record(_, _, fs) => fs.iter().for_each(|(_, a)| collect_term_names(a, out)),
        Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Query(_) | Expr::Nil(_) => {}
    }
}

pub struct Translator<'a> {
    pub interfaces: &'a [Interface],
    pub names: NameSupply,
}

impl<'a> Translator<'a> {
    pub fn new(interfaces: &'a [Interface], names: NameSupply) -> Self {
        Translator { interfaces, names }
    }

    /// Converts `e : |from|` into a term of type `|to|`, where `from` and
    /// `to` are alpha-equivalent but may store context members in different
    /// orders.
    pub fn coerce(&mut self, e: FExpr, from: &Type, to: &Type) -> FExpr {
        if from.positional_eq(to) {
            return e;
        }
        match (from, to) {
            (Type::Arrow(s1, s2), Type::Arrow(t1, t2)) => {
                let x = self.names.term("c");
                let arg = self.coerce(FExpr::var(&x), t1, s1);
                let body = self.coerce(FExpr::app(e, arg), s2, t2);
                FExpr::lam(&x, type_translate(t1), body)
            }
            (Type::Pair(s1, s2), Type::Pair(t1, t2)) => {
                let p = self.names.term("p");
                let a = self.coerce(FExpr::Prim(PrimOp::Fst, vec![FExpr::var(&p)]), s1, t1);
                let b = self.coerce(FExpr::Prim(PrimOp::Snd, vec![FExpr::var(&p)]), s2, t2);
                FExpr::app(FExpr::lam(&p, type_translate(from), FExpr::Prim(PrimOp::Pair, vec![a, b])), e)
            }
            (Type::List(s1), Type::List(t1)) => {
                let x = self.names.term("x");
                let acc = self.names.term("acc");
                let head = self.coerce(FExpr::var(&x), s1, t1);
                let target = type_translate(t1);
                let step = FExpr::lam(
                    &x,
                    type_translate(s1),
                    FExpr::lam(&acc, FType::list(target.clone()), FExpr::Prim(PrimOp::Cons, vec![head, FExpr::var(&acc)])),
                );
                FExpr::Prim(PrimOp::Fold, vec![step, FExpr::Nil(target), e])
            }
            (Type::Con(name, sargs), Type::Con(_, targs)) => {
                let Some(iface) = self.interfaces.iter().find(|i| &i.name == name) else {
                    return e;
                };
                let ssub = TypeSubst::zip(&iface.params, sargs);
                let tsub = TypeSubst::zip(&iface.params, targs);
                let r = self.names.term("r");
                let fields = iface
                    .fields
                    .clone()
                    .iter()
                    .map(|(f, t)| {
                        let proj = FExpr::Project(Box::new(FExpr::var(&r)), f.clone());
                        (f.clone(), self.coerce(proj, &ssub.apply(t), &tsub.apply(t)))
                    })
                    .collect();
                let rec = FExpr::Record(name.clone(), targs.iter().map(type_translate).collect(), fields);
                FExpr::app(FExpr::lam(&r, type_translate(from), rec), e)
            }
            (Type::Rule(s), Type::Rule(t)) => self.coerce_rule(e, s, t),
            _ => e,
        }
    }

    fn coerce_rule(&mut self, e: FExpr, s: &RuleType, t: &RuleType) -> FExpr {
        let fresh: Vec<Name> = t.vars.iter().map(|v| self.names.ty(v)).collect();
        let fresh_types: Vec<Type> = fresh.iter().map(|v| Type::Var(v.clone())).collect();
        let (s_ctx, s_head) = open(s, &fresh_types);
        let (t_ctx, t_head) = open(t, &fresh_types);

        let mut inner = e;
        for v in &fresh {
            inner = FExpr::tyapp(inner, FType::Var(v.clone()));
        }
        if s_ctx.is_empty() && !s.vars.is_empty() {
            inner = FExpr::app(inner, FExpr::Unit);
        }
        let params: Vec<Name> = t_ctx.iter().map(|_| self.names.term("y")).collect();
        for m in &s_ctx {
            let j = t_ctx.iter().position(|n| n.alpha_eq(m)).unwrap_or(0);
            let arg = self.coerce(FExpr::var(&params[j]), &t_ctx[j].to_type(), &m.to_type());
            inner = FExpr::app(inner, arg);
        }
        let mut out = self.coerce(inner, &s_head, &t_head);
        out = self.abstract_evidence(out, &params, &t_ctx, !t.vars.is_empty());
        for v in fresh.iter().rev() {
            out = FExpr::tylam(v, out);
        }
        out
    }

    /// Wraps `body` in one lambda per context member, or in a unit lambda
    /// when a quantified rule has an empty context.
    pub fn abstract_evidence(&mut self, body: FExpr, params: &[Name], ctx: &[RuleType], quantified: bool) -> FExpr {
        if ctx.is_empty() {
            if quantified {
                let u = self.names.term("u");
                return FExpr::lam(&u, FType::Unit, body);
            }
            return body;
        }
        let mut out = body;
        for (p, m) in params.iter().zip(ctx).rev() {
            out = FExpr::lam(p, rule_translate(m), out);
        }
        out
    }

    /// Evidence term for a successful resolution, of type `|trace.goal|`.
    pub fn evidence(&mut self, trace: &ResolutionTrace) -> FExpr {
        let goal = &trace.goal;
        let params: Vec<Name> = goal.context.iter().map(|_| self.names.term("y")).collect();

        let mut e = FExpr::var(&trace.evidence);
        for v in &trace.rule.vars {
            let t = trace.subst.get(v).cloned().unwrap_or(Type::Int);
            e = FExpr::tyapp(e, type_translate(&t));
        }
        if trace.rule.context.is_empty() && !trace.rule.vars.is_empty() {
            e = FExpr::app(e, FExpr::Unit);
        }
        for (m, premise) in trace.context.iter().zip(&trace.premises) {
            let arg = match premise {
                Premise::Assumed { index } => {
                    let from = goal.context.members()[*index].to_type();
                    self.coerce(FExpr::var(&params[*index]), &from, &m.to_type())
                }
                Premise::Resolved(sub) => {
                    let ev = self.evidence(sub);
                    self.coerce(ev, &sub.goal.to_type(), &m.to_type())
                }
            };
            e = FExpr::app(e, arg);
        }
        e = self.coerce(e, &trace.head, &goal.head);
        let mut out = self.abstract_evidence(e, &params, goal.context.members(), !goal.vars.is_empty());
        for v in goal.vars.iter().rev() {
            out = FExpr::tylam(v, out);
        }
        out
    }
}

/// Instantiates the binders of `r` positionally with `args`, keeping the
/// context in stored order.
fn open(r: &RuleType, args: &[Type]) -> (Vec<RuleType>, Type) {
    let theta = TypeSubst::zip(&r.vars, args);
    (r.context.iter().map(|m| theta.apply_rule(m)).collect(), theta.apply(&r.head))
}

/// Type-directed translation of a whole program.
pub fn elaborate(p: &Program) -> Result<(Type, FExpr), TypeError> {
    let typed = Checker::check_program(p)?;
    Ok((typed.ty, typed.term))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_program, parse_type};
    use crate::systemf::{feval, ftypecheck};

    fn t(s: &str) -> Type {
        parse_type(s).unwrap()
    }

    #[test]
    fn translation_examples() {
        assert_eq!(type_translate(&Type::Int), FType::Int);
        let dup = type_translate(&t("forall a. {a} => (a, a)"));
        assert_eq!(dup.to_string(), "forall a. a -> (a, a)");
        let poly = type_translate(&t("forall a. a -> a"));
        assert_eq!(poly.to_string(), "forall a. () -> a -> a");
        assert_eq!(type_translate(&t("{} => Int")), FType::Int);
        assert_eq!(type_translate(&t("{Bool, Int} => Int")).to_string(), "Int -> Bool -> Int");
    }

    #[test]
    fn dup_rule_elaborates() {
        let p = parse_program("rule (forall a. {a} => (a, a)) (?a, ?a)").unwrap();
        let (ty, e) = elaborate(&p).unwrap();
        assert_eq!(ty, t("forall a. {a} => (a, a)"));
        let FExpr::TyLam(a, body) = &e else { panic!("{e}") };
        let FExpr::Lam(x, FType::Var(b), pair) = &**body else { panic!("{e}") };
        assert_eq!(a, b);
        assert_eq!(**pair, FExpr::Prim(PrimOp::Pair, vec![FExpr::var(x), FExpr::var(x)]));
    }

    fn coerce_check(src: &str, from: &str, to: &str) {
        let p = parse_program(src).unwrap();
        let (_, e) = elaborate(&p).unwrap();
        let (from, to) = (t(from), t(to));
        assert!(from.alpha_eq(&to));
        let mut tr = Translator::new(&p.interfaces, NameSupply::for_program(&p));
        let c = tr.coerce(e, &from, &to);
        let ty = ftypecheck(&[], &c).unwrap();
        assert!(ty.alpha_eq(&type_translate(&to)), "{ty} vs {}", type_translate(&to));
        feval(&c).unwrap();
    }

    #[test]
    fn coercions_reorder_evidence() {
        let to = RuleType {
            vars: vec![],
            context: crate::syntax::Context::positional(vec![RuleType::simple(Type::Bool), RuleType::simple(Type::Int)]),
            head: Type::Int,
        };
        let p = parse_program("rule ({Int, Bool} => Int) (if ?Bool then ?Int else 0)").unwrap();
        let (from, e) = elaborate(&p).unwrap();
        let to = Type::Rule(Box::new(to));
        let mut tr = Translator::new(&[], NameSupply::for_program(&p));
        let c = tr.coerce(e, &from, &to);
        assert_eq!(ftypecheck(&[], &c).unwrap().to_string(), "Bool -> Int -> Int");
        let applied = FExpr::app(FExpr::app(c, FExpr::Bool(true)), FExpr::Int(7));
        assert_eq!(feval(&applied).unwrap().to_string(), "7");
        coerce_check("\\x : Int. x", "Int -> Int", "Int -> Int");
    }
}
