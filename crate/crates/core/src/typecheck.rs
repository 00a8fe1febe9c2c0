//! Syntax-directed typing `Γ | Δ ⊢ e : τ` with type-directed resolution.
//!
//! The checker produces the System F translation alongside each type; plain
//! type inference discards it.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::Serialize;

use crate::elaborate::{rule_translate, type_translate, NameSupply, Translator};
use crate::error::{ErrorCode, TypeError};
use crate::subst::{freshen, TypeSubst};
use crate::syntax::{Context, Expr, Interface, Name, PrimOp, Program, RuleType, Type};
use crate::systemf::{FExpr, FType};
use crate::unify::match_head;

/// Resolution deeper than this is reported as divergent.
pub const MAX_RESOLUTION_DEPTH: usize = 512;

/// Stack of contexts; the last frame is the innermost scope. Each member
/// carries the name of its evidence variable.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ImplicitEnv {
    frames: Vec<Vec<(RuleType, Name)>>,
}

impl ImplicitEnv {
    pub fn new() -> Self {
        ImplicitEnv::default()
    }

    /// Builds an environment from bare rule types, naming evidence
    /// `x1, x2, ..` from the outermost frame inwards.
    pub fn from_rules(frames: Vec<Vec<RuleType>>) -> Self {
        let mut n = 0;
        let frames = frames
            .into_iter()
            .map(|f| {
                f.into_iter()
                    .map(|r| {
                        n += 1;
                        (r, format!("x{n}"))
                    })
                    .collect()
            })
            .collect();
        ImplicitEnv { frames }
    }

    pub fn push(&mut self, frame: Vec<(RuleType, Name)>) {
        self.frames.push(frame);
    }

    pub fn pop(&mut self) {
        self.frames.pop();
    }

    pub fn frames(&self) -> &[Vec<(RuleType, Name)>] {
        &self.frames
    }

    pub fn rule_frames(&self) -> Vec<Vec<RuleType>> {
        self.frames.iter().map(|f| f.iter().map(|(r, _)| r.clone()).collect()).collect()
    }

    pub fn ftv(&self) -> BTreeSet<Name> {
        self.frames.iter().flatten().flat_map(|(r, _)| r.ftv()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.iter().all(|f| f.is_empty())
    }
}

/// Term variable typing; later bindings shadow earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TypeEnv(Vec<(Name, Type)>);

impl TypeEnv {
    pub fn new() -> Self {
        TypeEnv::default()
    }

    pub fn bind(&mut self, x: &str, t: Type) {
        self.0.push((x.to_string(), t));
    }

    pub fn get(&self, x: &str) -> Option<&Type> {
        self.0.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    pub fn ftv(&self) -> BTreeSet<Name> {
        self.0.iter().flat_map(|(_, t)| t.ftv()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Name, Type)> {
        self.0.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Premise {
    /// Supplied by the goal's own context member at `index`.
    Assumed { index: usize },
    Resolved(Box<ResolutionTrace>),
}

/// One resolution step: the goal, the rule that matched it, and how each
/// member of the instantiated context was discharged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolutionTrace {
    pub goal: RuleType,
    pub frame: usize,
    pub member: usize,
    pub rule: RuleType,
    pub subst: TypeSubst,
    pub context: Context,
    pub head: Type,
    pub evidence: Name,
    pub premises: Vec<Premise>,
}

impl ResolutionTrace {
    pub fn depth(&self) -> usize {
        1 + self
            .premises
            .iter()
            .map(|p| match p {
                Premise::Resolved(t) => t.depth(),
                Premise::Assumed { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Goals resolved recursively, in context order.
    pub fn resolved(&self) -> Vec<&ResolutionTrace> {
        self.premises
            .iter()
            .filter_map(|p| match p {
                Premise::Resolved(t) => Some(&**t),
                Premise::Assumed { .. } => None,
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(0, &mut out);
        out
    }

    fn render_into(&self, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        let _ = write!(out, "{pad}{}  by {} (frame {}, member {})", self.goal, self.rule, self.frame, self.member);
        if !self.subst.is_empty() {
            let binds: Vec<String> = self.subst.iter().map(|(v, t)| format!("{v} := {t}")).collect();
            let _ = write!(out, " with {}", binds.join(", "));
        }
        out.push('\n');
        for (m, p) in self.context.iter().zip(&self.premises) {
            match p {
                Premise::Assumed { .. } => {
                    let _ = writeln!(out, "{pad}  {m}  assumed");
                }
                Premise::Resolved(t) => t.render_into(indent + 1, out),
            }
        }
    }
}

/// The matched rule of a successful lookup, instantiated for the goal.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupResult {
    pub frame: usize,
    pub member: usize,
    pub rule: RuleType,
    pub subst: TypeSubst,
    pub context: Context,
    pub head: Type,
    pub evidence: Name,
}

/// Finds the rule for `goal` in the innermost frame containing a match.
pub fn lookup(delta: &ImplicitEnv, goal: &Type) -> Result<LookupResult, TypeError> {
    for (fi, frame) in delta.frames.iter().enumerate().rev() {
        let matches: Vec<(usize, TypeSubst, Context, Type)> = frame
            .iter()
            .enumerate()
            .filter_map(|(i, (r, _))| match_head(r, goal).map(|(s, c, h)| (i, s, c, h)))
            .collect();
        if matches.len() > 1 {
            let rules: Vec<String> = matches.iter().map(|(i, ..)| frame[*i].0.to_string()).collect();
            return Err(TypeError::new(
                ErrorCode::Overlap,
                format!("overlapping rules for {goal} in one scope: {}", rules.join(" and ")),
            ));
        }
        if let Some((i, subst, context, head)) = matches.into_iter().next() {
            let (rule, evidence) = frame[i].clone();
            let unresolved: Vec<&Name> = rule
                .vars
                .iter()
                .filter(|v| !subst.contains(v) && rule.context.ftv().contains(*v))
                .collect();
            if !unresolved.is_empty() {
                let vs: Vec<&str> = unresolved.iter().map(|s| s.as_str()).collect();
                return Err(TypeError::new(
                    ErrorCode::AmbiguousInstantiation,
                    format!("matching {rule} against {goal} leaves {} undetermined", vs.join(", ")),
                ));
            }
            return Ok(LookupResult { frame: fi, member: i, rule, subst, context, head, evidence });
        }
    }
    Err(TypeError::new(ErrorCode::NoMatch, format!("no rule matches {goal}")))
}

/// Resolves `goal` against `delta`, returning the full derivation.
pub fn resolve(delta: &ImplicitEnv, goal: &RuleType) -> Result<ResolutionTrace, TypeError> {
    let mut used = delta.ftv();
    let mut names = BTreeSet::new();
    for (r, _) in delta.frames.iter().flatten() {
        r.collect_names(&mut names);
    }
    goal.collect_names(&mut names);
    used.extend(names);
    resolve_at(delta, goal, 0, &mut used).map(|t| *t)
}

fn resolve_at(
    delta: &ImplicitEnv,
    goal: &RuleType,
    depth: usize,
    used: &mut BTreeSet<Name>,
) -> Result<Box<ResolutionTrace>, TypeError> {
    let mut trace = step(delta, goal, depth, used)?;
    for i in 0..trace.context.len() {
        let premise = premise(delta, &trace, i, depth, used)?;
        trace.premises.push(premise);
    }
    Ok(trace)
}

// Resolution recurses once per premise, so the recursive frames are kept
// small and the bulky work happens out of line.
#[inline(never)]
fn premise(
    delta: &ImplicitEnv,
    trace: &ResolutionTrace,
    i: usize,
    depth: usize,
    used: &mut BTreeSet<Name>,
) -> Result<Premise, TypeError> {
    let m = &trace.context.members()[i];
    if let Some(index) = trace.goal.context.position(m) {
        return Ok(Premise::Assumed { index });
    }
    match resolve_at(delta, m, depth + 1, used) {
        Ok(sub) => Ok(Premise::Resolved(sub)),
        Err(e) => Err(within(e, &trace.goal)),
    }
}

#[inline(never)]
fn within(e: TypeError, goal: &RuleType) -> TypeError {
    e.within(goal.to_string())
}

#[inline(never)]
fn step(
    delta: &ImplicitEnv,
    goal: &RuleType,
    depth: usize,
    used: &mut BTreeSet<Name>,
) -> Result<Box<ResolutionTrace>, TypeError> {
    if depth >= MAX_RESOLUTION_DEPTH {
        return Err(TypeError::new(
            ErrorCode::ResolutionDepth,
            format!("resolution exceeded depth {MAX_RESOLUTION_DEPTH}"),
        ));
    }
    let goal = rename_apart(goal, &delta.ftv(), used);
    let found = lookup(delta, &goal.head).map_err(|e| {
        if e.code == ErrorCode::NoMatch && depth > 0 {
            TypeError { code: ErrorCode::RecursiveNoMatch, ..e }
        } else {
            e
        }
    })?;
    let premises = Vec::with_capacity(found.context.len());
    Ok(Box::new(ResolutionTrace {
        goal,
        frame: found.frame,
        member: found.member,
        rule: found.rule,
        subst: found.subst,
        context: found.context,
        head: found.head,
        evidence: found.evidence,
        premises,
    }))
}

/// Renames the goal's quantifiers away from the environment's free variables.
fn rename_apart(goal: &RuleType, avoid: &BTreeSet<Name>, used: &mut BTreeSet<Name>) -> RuleType {
    if !goal.vars.iter().any(|v| avoid.contains(v)) {
        return goal.clone();
    }
    let mut theta = TypeSubst::new();
    let vars: Vec<Name> = goal
        .vars
        .iter()
        .map(|v| {
            if avoid.contains(v) {
                let w = crate::syntax::fresh_name(v, used);
                theta.insert(v.clone(), Type::Var(w.clone()));
                w
            } else {
                v.clone()
            }
        })
        .collect();
    RuleType {
        vars,
        context: Context::positional(goal.context.iter().map(|m| theta.apply_rule(m)).collect()),
        head: theta.apply(&goal.head),
    }
}

/// At most one member of `pi` matches `goal`.
pub fn no_overlap(pi: &[RuleType], goal: &Type) -> bool {
    let ctx = Context::new(pi.iter().cloned());
    ctx.iter().filter(|r| match_head(r, goal).is_some()).count() <= 1
}

/// Every quantified variable occurs in the head, recursively through the
/// context.
pub fn unambiguous(r: &RuleType) -> bool {
    let head = r.head.ftv();
    r.vars.iter().all(|v| head.contains(v))
        && r.context.iter().all(unambiguous)
        && r.head.as_rule().is_none_or(unambiguous)
}

/// A query encountered while checking, with the environment it was resolved
/// in. Used by the static diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuerySite {
    pub location: String,
    pub goal: RuleType,
    pub env: Vec<Vec<RuleType>>,
    pub trace: ResolutionTrace,
}

#[derive(Clone, Debug)]
pub struct Typed {
    pub ty: Type,
    pub term: FExpr,
    pub queries: Vec<QuerySite>,
}

pub struct Checker<'a> {
    interfaces: &'a [Interface],
    tr: Translator<'a>,
    gamma: TypeEnv,
    delta: ImplicitEnv,
    queries: Vec<QuerySite>,
    path: Vec<String>,
}

fn err<T>(code: ErrorCode, msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError::new(code, msg))
}

impl<'a> Checker<'a> {
    pub fn new(interfaces: &'a [Interface], names: NameSupply) -> Self {
        Checker {
            interfaces,
            tr: Translator::new(interfaces, names),
            gamma: TypeEnv::new(),
            delta: ImplicitEnv::new(),
            queries: Vec::new(),
            path: Vec::new(),
        }
    }

    /// Starts from the given environments instead of empty ones.
    pub fn with_env(mut self, gamma: TypeEnv, delta: ImplicitEnv) -> Self {
        for (x, t) in gamma.iter() {
            self.tr.names.reserve_term(x);
            let mut ns = BTreeSet::new();
            t.collect_names(&mut ns);
            ns.iter().for_each(|n| self.tr.names.reserve_type(n));
        }
        for (r, x) in delta.frames.iter().flatten() {
            self.tr.names.reserve_term(x);
            let mut ns = BTreeSet::new();
            r.collect_names(&mut ns);
            ns.iter().for_each(|n| self.tr.names.reserve_type(n));
        }
        self.gamma = gamma;
        self.delta = delta;
        self
    }

    /// Checks a closed program after renaming rule binders apart.
    pub fn check_program(p: &Program) -> Result<Typed, TypeError> {
        let p = freshen(p);
        check_interfaces(&p.interfaces)?;
        let mut c = Checker::new(&p.interfaces, NameSupply::for_program(&p));
        let (ty, term) = c.expr(&p.body)?;
        Ok(Typed { ty, term, queries: c.queries })
    }

    pub fn queries(&self) -> &[QuerySite] {
        &self.queries
    }

    fn at<T>(&mut self, seg: &str, f: impl FnOnce(&mut Self) -> Result<T, TypeError>) -> Result<T, TypeError> {
        self.path.push(seg.to_string());
        let r = f(self);
        self.path.pop();
        r
    }

    fn location(&self) -> String {
        if self.path.is_empty() {
            "body".to_string()
        } else {
            format!("body/{}", self.path.join("/"))
        }
    }

    /// Coerces `e : got` to `want` or reports a mismatch.
    fn expect(&mut self, e: FExpr, got: &Type, want: &Type, what: &str) -> Result<FExpr, TypeError> {
        if !got.alpha_eq(want) {
            return err(ErrorCode::Mismatch, format!("{what}: expected {want}, found {got}"));
        }
        Ok(self.tr.coerce(e, got, want))
    }

    pub fn expr(&mut self, e: &Expr) -> Result<(Type, FExpr), TypeError> {
        match e {
            Expr::Int(n) => Ok((Type::Int, FExpr::Int(*n))),
            Expr::Bool(b) => Ok((Type::Bool, FExpr::Bool(*b))),
            Expr::Str(s) => Ok((Type::Str, FExpr::Str(s.clone()))),
            Expr::Var(x) => match self.gamma.get(x) {
                Some(t) => Ok((t.clone(), FExpr::Var(x.clone()))),
                None => err(ErrorCode::Unbound, format!("unbound variable {x}")),
            },
            Expr::Lam(x, t, b) => {
                self.gamma.bind(x, t.clone());
                let r = self.at("lam", |c| c.expr(b));
                self.gamma.0.pop();
                let (tb, eb) = r?;
                Ok((Type::arrow(t.clone(), tb), FExpr::lam(x, type_translate(t), eb)))
            }
            Expr::App(f, a) => {
                let (tf, ef) = self.at("fun", |c| c.expr(f))?;
                let (ta, ea) = self.at("arg", |c| c.expr(a))?;
                match tf {
                    Type::Arrow(p, r) => {
                        let ea = self.expect(ea, &ta, &p, "function argument")?;
                        Ok((*r, FExpr::app(ef, ea)))
                    }
                    t => err(ErrorCode::NotApplicable, format!("applying a non-function of type {t}")),
                }
            }
            Expr::Query(goal) => self.query(goal),
            Expr::RuleAbs(r, b) => self.rule_abs(r, b),
            Expr::TyApp(b, ts) => self.ty_app(b, ts),
            Expr::RuleApp(b, args) => self.rule_app(b, args),
            Expr::Prim(op, args) => self.prim(*op, args),
            Expr::If(c, t, f) => {
                let (tc, ec) = self.at("if", |s| s.expr(c))?;
                let ec = self.expect(ec, &tc, &Type::Bool, "condition")?;
                let (tt, et) = self.at("then", |s| s.expr(t))?;
                let (tf, ef) = self.at("else", |s| s.expr(f))?;
                let ef = self.expect(ef, &tf, &tt, "else branch")?;
                Ok((tt, FExpr::If(Box::new(ec), Box::new(et), Box::new(ef))))
            }
            Expr::Nil(t) => Ok((Type::list(t.clone()), FExpr::Nil(type_translate(t)))),
            Expr::Record(name, targs, fields) => self.record(name, targs, fields),
            Expr::Project(b, field) => {
                let (tb, eb) = self.at("proj", |c| c.expr(b))?;
                let Type::Con(name, targs) = &tb else {
                    return err(ErrorCode::Mismatch, format!("projecting .{field} from non-record of type {tb}"));
                };
                let fields = self.field_types(name, targs)?;
                match fields.into_iter().find(|(f, _)| f == field) {
                    Some((_, t)) => Ok((t, FExpr::Project(Box::new(eb), field.clone()))),
                    None => err(ErrorCode::Mismatch, format!("{name} has no field {field}")),
                }
            }
        }
    }

    fn query(&mut self, goal: &RuleType) -> Result<(Type, FExpr), TypeError> {
        if !unambiguous(goal) {
            return err(ErrorCode::Unambiguous, format!("query type {goal} is ambiguous: a quantified variable does not occur in its head"));
        }
        let trace = resolve(&self.delta, goal).map_err(|e| TypeError {
            message: format!("cannot resolve ?{}: {}", crate::print::AtomType(&goal.to_type()), e.message),
            ..e
        })?;
        let ev = self.tr.evidence(&trace);
        let ev = self.tr.coerce(ev, &trace.goal.to_type(), &goal.to_type());
        self.queries.push(QuerySite {
            location: self.location(),
            goal: goal.clone(),
            env: self.delta.rule_frames(),
            trace,
        });
        Ok((goal.to_type(), ev))
    }

    fn rule_abs(&mut self, r: &RuleType, body: &Expr) -> Result<(Type, FExpr), TypeError> {
        if !unambiguous(r) {
            return err(ErrorCode::Unambiguous, format!("rule type {r} is ambiguous: a quantified variable does not occur in its head"));
        }
        let mut scope = self.gamma.ftv();
        scope.extend(self.delta.ftv());
        if let Some(v) = r.vars.iter().find(|v| scope.contains(*v)) {
            return err(ErrorCode::BinderClash, format!("type variable {v} of {r} is already in scope"));
        }
        let params: Vec<Name> = r.context.iter().map(|_| self.tr.names.term("x")).collect();
        self.delta.push(r.context.iter().cloned().zip(params.iter().cloned()).collect());
        let res = self.at("rule", |c| c.expr(body));
        self.delta.pop();
        let (tb, eb) = res?;
        let eb = self.expect(eb, &tb, &r.head, "rule body")?;
        let mut out = self.tr.abstract_evidence(eb, &params, r.context.members(), !r.vars.is_empty());
        for v in r.vars.iter().rev() {
            out = FExpr::tylam(v, out);
        }
        Ok((r.to_type(), out))
    }

    fn ty_app(&mut self, body: &Expr, ts: &[Type]) -> Result<(Type, FExpr), TypeError> {
        let (tb, eb) = self.at("inst", |c| c.expr(body))?;
        let r = match &tb {
            Type::Rule(r) => (**r).clone(),
            _ if ts.is_empty() => return Ok((tb, eb)),
            t => return err(ErrorCode::TyAppArity, format!("instantiating {t}, which has no quantifiers")),
        };
        if r.vars.len() != ts.len() {
            return err(
                ErrorCode::TyAppArity,
                format!("{r} expects {} type arguments, given {}", r.vars.len(), ts.len()),
            );
        }
        if ts.is_empty() {
            return Ok((tb, eb));
        }
        let theta = TypeSubst::zip(&r.vars, ts);
        let context = theta.apply_context(&r.context);
        let head = theta.apply(&r.head);
        let mut e = eb;
        for t in ts {
            e = FExpr::tyapp(e, type_translate(t));
        }
        if context.is_empty() {
            return Ok((head, FExpr::app(e, FExpr::Unit)));
        }
        Ok((Type::Rule(Box::new(RuleType { vars: Vec::new(), context, head })), e))
    }

    fn rule_app(&mut self, body: &Expr, args: &[(Expr, RuleType)]) -> Result<(Type, FExpr), TypeError> {
        let (tb, eb) = self.at("with", |c| c.expr(body))?;
        let r = match &tb {
            Type::Rule(r) => (**r).clone(),
            _ if args.is_empty() => return Ok((tb, eb)),
            t => return err(ErrorCode::NotApplicable, format!("supplying implicit arguments to {t}, which is not a rule")),
        };
        if !r.vars.is_empty() {
            return err(
                ErrorCode::RuleAppMismatch,
                format!("{r} must be instantiated before implicit arguments are supplied"),
            );
        }
        for (i, (_, a)) in args.iter().enumerate() {
            if let Some((_, b)) = args[..i].iter().find(|(_, b)| b.alpha_eq(a)) {
                return err(ErrorCode::DuplicateArgs, format!("two implicit arguments are supplied for {b}"));
            }
        }
        let annotations = Context::positional(args.iter().map(|(_, a)| a.clone()).collect());
        if !annotations.set_eq(&r.context) {
            return err(
                ErrorCode::RuleAppMismatch,
                format!("implicit arguments {annotations} do not match the context {} of {r}", r.context),
            );
        }
        let mut supplied = Vec::with_capacity(args.len());
        for (i, (a, annot)) in args.iter().enumerate() {
            let (ta, ea) = self.at(&format!("arg{i}"), |c| c.expr(a))?;
            let want = annot.to_type();
            if !ta.alpha_eq(&want) {
                return err(
                    ErrorCode::RuleAppMismatch,
                    format!("implicit argument annotated {annot} has type {ta}"),
                );
            }
            supplied.push(self.tr.coerce(ea, &ta, &want));
        }
        let mut e = eb;
        for m in r.context.iter() {
            let j = args.iter().position(|(_, a)| a.alpha_eq(m)).unwrap_or(0);
            let arg = self.tr.coerce(supplied[j].clone(), &args[j].1.to_type(), &m.to_type());
            e = FExpr::app(e, arg);
        }
        Ok((r.head.clone(), e))
    }

    fn prim(&mut self, op: PrimOp, args: &[Expr]) -> Result<(Type, FExpr), TypeError> {
        if args.len() != op.arity() {
            return err(ErrorCode::Mismatch, format!("{} expects {} operands, given {}", op.name(), op.arity(), args.len()));
        }
        let mut ts = Vec::with_capacity(args.len());
        let mut es = Vec::with_capacity(args.len());
        for (i, a) in args.iter().enumerate() {
            let (t, e) = self.at(&format!("{}{i}", op.name()), |c| c.expr(a))?;
            ts.push(t);
            es.push(e);
        }
        let what = format!("operand of {}", op.name());
        if let Some((params, result)) = op.signature() {
            let mut out = Vec::with_capacity(es.len());
            for ((e, t), p) in es.into_iter().zip(&ts).zip(&params) {
                out.push(self.expect(e, t, p, &what)?);
            }
            return Ok((result, FExpr::Prim(op, out)));
        }
        match op {
            PrimOp::Pair => Ok((Type::pair(ts[0].clone(), ts[1].clone()), FExpr::Prim(op, es))),
            PrimOp::Fst | PrimOp::Snd => match &ts[0] {
                Type::Pair(a, b) => {
                    let t = if op == PrimOp::Fst { (**a).clone() } else { (**b).clone() };
                    Ok((t, FExpr::Prim(op, es)))
                }
                t => err(ErrorCode::Mismatch, format!("{what}: expected a pair, found {t}")),
            },
            PrimOp::Cons => {
                let Type::List(elem) = &ts[1] else {
                    return err(ErrorCode::Mismatch, format!("{what}: expected a list, found {}", ts[1]));
                };
                let elem = (**elem).clone();
                let mut es = es.into_iter();
                let x = es.next().unwrap_or(FExpr::Unit);
                let xs = es.next().unwrap_or(FExpr::Unit);
                let x = self.expect(x, &ts[0], &elem, &what)?;
                Ok((ts[1].clone(), FExpr::Prim(op, vec![x, xs])))
            }
            PrimOp::Fold => {
                let Type::List(elem) = &ts[2] else {
                    return err(ErrorCode::Mismatch, format!("{what}: expected a list, found {}", ts[2]));
                };
                let acc = ts[1].clone();
                let want = Type::arrow((**elem).clone(), Type::arrow(acc.clone(), acc.clone()));
                let mut es = es.into_iter();
                let f = es.next().unwrap_or(FExpr::Unit);
                let f = self.expect(f, &ts[0], &want, &what)?;
                let rest: Vec<FExpr> = es.collect();
                Ok((acc, FExpr::Prim(op, std::iter::once(f).chain(rest).collect())))
            }
            _ => err(ErrorCode::Mismatch, format!("unsupported primitive {}", op.name())),
        }
    }

    fn interface(&self, name: &str) -> Result<&'a Interface, TypeError> {
        match self.interfaces.iter().find(|i| i.name == name) {
            Some(i) => Ok(i),
            None => err(ErrorCode::Unbound, format!("unknown interface {name}")),
        }
    }

    fn field_types(&self, name: &str, targs: &[Type]) -> Result<Vec<(Name, Type)>, TypeError> {
        let i = self.interface(name)?;
        if i.params.len() != targs.len() {
            return err(
                ErrorCode::TyAppArity,
                format!("{name} expects {} type arguments, given {}", i.params.len(), targs.len()),
            );
        }
        let theta = TypeSubst::zip(&i.params, targs);
        Ok(i.fields.iter().map(|(f, t)| (f.clone(), theta.apply(t))).collect())
    }

    fn record(&mut self, name: &str, targs: &[Type], fields: &[(Name, Expr)]) -> Result<(Type, FExpr), TypeError> {
        let expected = self.field_types(name, targs)?;
        for (f, _) in fields {
            if !expected.iter().any(|(g, _)| g == f) {
                return err(ErrorCode::Mismatch, format!("{name} has no field {f}"));
            }
        }
        let mut out = Vec::with_capacity(expected.len());
        for (f, want) in &expected {
            let mut given = fields.iter().filter(|(g, _)| g == f);
            let Some((_, fe)) = given.next() else {
                return err(ErrorCode::Mismatch, format!("record {name} is missing field {f}"));
            };
            if given.next().is_some() {
                return err(ErrorCode::Mismatch, format!("record {name} defines field {f} twice"));
            }
            let (t, e) = self.at(f, |c| c.expr(fe))?;
            let e = self.expect(e, &t, want, &format!("field {f}"))?;
            out.push((f.clone(), e));
        }
        let ty = Type::Con(name.to_string(), targs.to_vec());
        Ok((ty, FExpr::Record(name.to_string(), targs.iter().map(type_translate).collect(), out)))
    }
}

fn check_interfaces(interfaces: &[Interface]) -> Result<(), TypeError> {
    let mut names = BTreeSet::new();
    let mut fields = BTreeSet::new();
    for i in interfaces {
        if !names.insert(i.name.clone()) {
            return err(ErrorCode::Mismatch, format!("interface {} is declared twice", i.name));
        }
        for (f, _) in &i.fields {
            if !fields.insert(f.clone()) {
                return err(ErrorCode::Mismatch, format!("field {f} is declared twice"));
            }
        }
    }
    Ok(())
}

/// Type of a closed program.
pub fn infer(p: &Program) -> Result<Type, TypeError> {
    Checker::check_program(p).map(|t| t.ty)
}

/// Type of `e` under the given environments.
pub fn infer_in(gamma: &TypeEnv, delta: &ImplicitEnv, e: &Expr) -> Result<Type, TypeError> {
    let p = Program::new(e.clone());
    let names = NameSupply::for_program(&p);
    let mut c = Checker::new(&[], names).with_env(gamma.clone(), delta.clone());
    c.expr(e).map(|(t, _)| t)
}

/// The System F type of the evidence environment, for checking elaborated
/// open terms.
pub fn evidence_types(delta: &ImplicitEnv) -> Vec<(Name, FType)> {
    delta.frames.iter().flatten().map(|(r, x)| (x.clone(), rule_translate(r))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_program, parse_rule, parse_type};

    fn rt(s: &str) -> RuleType {
        parse_rule(s).unwrap()
    }

    fn ty(s: &str) -> Type {
        parse_type(s).unwrap()
    }

    fn code(src: &str) -> ErrorCode {
        infer(&parse_program(src).unwrap()).unwrap_err().code
    }

    #[test]
    fn basic_program_types() {
        let p = parse_program("implicit {1 : Int, true : Bool} in (?Int + 1, not ?Bool) : (Int, Bool)").unwrap();
        assert_eq!(infer(&p).unwrap(), ty("(Int, Bool)"));
        let p = parse_program("rule (forall a. {a} => (a, a)) (?a, ?a)").unwrap();
        assert_eq!(infer(&p).unwrap(), ty("forall a. {a} => (a, a)"));
    }

    #[test]
    fn ambiguous_query_is_rejected() {
        assert_eq!(code("?(forall a. {a} => Int)"), ErrorCode::Unambiguous);
    }

    fn example_env() -> ImplicitEnv {
        ImplicitEnv::from_rules(vec![vec![RuleType::simple(Type::Int), rt("forall a. {a} => (a, a)")]])
    }

    #[test]
    fn resolution_example_one() {
        let t = resolve(&example_env(), &rt("(Int, Int)")).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.subst, TypeSubst::single("a", Type::Int));
        assert_eq!(t.resolved()[0].goal, RuleType::simple(Type::Int));
    }

    #[test]
    fn resolution_example_two() {
        let t = resolve(&example_env(), &rt("{Int} => (Int, Int)")).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.premises, vec![Premise::Assumed { index: 0 }]);
    }

    #[test]
    fn resolution_example_three() {
        let delta = ImplicitEnv::from_rules(vec![vec![RuleType::simple(Type::Bool), rt("forall a. {Bool, a} => (a, a)")]]);
        let t = resolve(&delta, &rt("{Int} => (Int, Int)")).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.subst, TypeSubst::single("a", Type::Int));
        let resolved = t.resolved();
        assert_eq!(resolved.len(), 1);
        assert_eq!(resolved[0].goal, RuleType::simple(Type::Bool));
    }

    #[test]
    fn resolution_gets_stuck() {
        let ch = Type::con("Char", vec![]);
        let delta = ImplicitEnv::from_rules(vec![
            vec![RuleType::simple(ch.clone())],
            vec![RuleType::new(vec![], [RuleType::simple(ch)], Type::Int)],
            vec![rt("{Bool} => Int")],
        ]);
        let e = resolve(&delta, &RuleType::simple(Type::Int)).unwrap_err();
        assert_eq!(e.code, ErrorCode::RecursiveNoMatch);
        assert_eq!(e.path, vec!["Int".to_string()]);
    }

    #[test]
    fn lookup_prefers_the_innermost_frame() {
        let delta = ImplicitEnv::from_rules(vec![vec![rt("forall a. a -> Int")], vec![rt("forall a. Int -> a")]]);
        let found = lookup(&delta, &ty("Int -> Int")).unwrap();
        assert_eq!(found.frame, 1);
        assert!(found.context.is_empty());
        assert_eq!(found.head, ty("Int -> Int"));
    }

    #[test]
    fn lookup_reports_overlap_and_no_match() {
        let delta = ImplicitEnv::from_rules(vec![vec![rt("forall a. a -> Int"), rt("forall a. Int -> a")]]);
        assert_eq!(lookup(&delta, &ty("Int -> Int")).unwrap_err().code, ErrorCode::Overlap);
        let delta = ImplicitEnv::from_rules(vec![vec![RuleType::simple(Type::Int)]]);
        assert_eq!(lookup(&delta, &Type::Bool).unwrap_err().code, ErrorCode::NoMatch);
    }

    #[test]
    fn no_overlap_examples() {
        assert!(!no_overlap(&[rt("forall a. a -> Int"), rt("forall a. Int -> a")], &ty("Int -> Int")));
        assert!(no_overlap(&[rt("Int"), rt("Bool")], &Type::Int));
        assert!(no_overlap(&[], &Type::Int));
    }

    #[test]
    fn unambiguous_examples() {
        assert!(unambiguous(&rt("forall a. {a} => (a, a)")));
        assert!(!unambiguous(&rt("forall a. {a} => Int")));
        assert!(unambiguous(&rt("Int")));
        assert!(!unambiguous(&rt("{forall a. {a} => Int} => Int")));
    }

    #[test]
    fn ambiguous_instantiation_in_lookup() {
        let delta = ImplicitEnv::from_rules(vec![vec![rt("forall a. {a -> a} => Int"), rt("Bool -> Bool"), rt("forall b. b -> b")]]);
        assert_eq!(lookup(&delta, &Type::Int).unwrap_err().code, ErrorCode::AmbiguousInstantiation);
    }

    #[test]
    fn error_codes() {
        assert_eq!(code("?Int"), ErrorCode::NoMatch);
        assert_eq!(code("implicit {1 : Int, 2 : Int} in ?Int : Int"), ErrorCode::DuplicateArgs);
        assert_eq!(code("x"), ErrorCode::Unbound);
        assert_eq!(code("1 + true"), ErrorCode::Mismatch);
        assert_eq!(code("(rule (forall a. a -> a) (\\x : a. x))[Int, Bool]"), ErrorCode::TyAppArity);
        assert_eq!(code("(rule ({Int} => Int) ?Int) with {true : Bool}"), ErrorCode::RuleAppMismatch);
        assert_eq!(code("1 2"), ErrorCode::NotApplicable);
    }

    #[test]
    fn type_application_keeps_member_positions() {
        let p = parse_program("(rule (forall a. {a, Int} => a) ?a)[Bool]").unwrap();
        let t = infer(&p).unwrap();
        let r = t.as_rule().unwrap();
        assert_eq!(r.context.members()[0], RuleType::simple(Type::Bool));
        assert_eq!(r.context.members()[1], RuleType::simple(Type::Int));
    }

    #[test]
    fn infer_in_open_environments() {
        let mut gamma = TypeEnv::new();
        gamma.bind("f", ty("Int -> Bool"));
        let delta = ImplicitEnv::from_rules(vec![vec![RuleType::simple(Type::Int)]]);
        let e = crate::parse::parse_expr("f ?Int").unwrap();
        assert_eq!(infer_in(&gamma, &delta, &e).unwrap(), Type::Bool);
    }
}
