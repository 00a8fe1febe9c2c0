//! Big-step operational semantics for λ⇒ with rule closures and partially
//! resolved contexts.
//!
//! Values of simple types are stored in rule sets as they are; a rule
//! closure whose type has become trivial is run immediately.

use std::collections::BTreeSet;
use std::fmt::{self, Display, Formatter, Write};
use std::rc::Rc;

use crate::error::RuntimeError;
use crate::print::escape_str;
use crate::subst::TypeSubst;
use crate::syntax::{Context, Expr, Name, PrimOp, Program, RuleType, Type};
use crate::unify::match_type;

pub const MAX_RESOLUTION_DEPTH: usize = 512;

#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    Pair(Box<Value>, Box<Value>),
    List(Vec<Value>),
    Closure(Rc<Closure>),
    Rule(Rc<RClos>),
    Record(Name, Vec<(Name, Value)>),
}

#[derive(Clone, Debug)]
pub struct Closure {
    pub param: Name,
    pub ty: Type,
    pub body: Expr,
    pub env: RuntimeEnv,
}

/// `⟨ρ, e, μ, η⟩`: a rule closure with its partially resolved context.
#[derive(Clone, Debug)]
pub struct RClos {
    pub rtype: RuleType,
    pub body: Expr,
    pub env: RuntimeEnv,
    pub partial: Vec<(RuleType, Value)>,
}

pub type RuleSet = Vec<(RuleType, Value)>;

/// Term variables plus the stack of rule sets; the last frame is innermost.
#[derive(Clone, Debug, Default)]
pub struct RuntimeEnv {
    pub vars: Vec<(Name, Value)>,
    pub frames: Vec<RuleSet>,
}

impl RuntimeEnv {
    pub fn new() -> Self {
        RuntimeEnv::default()
    }

    pub fn bind(&self, x: &str, v: Value) -> RuntimeEnv {
        let mut env = self.clone();
        env.vars.push((x.to_string(), v));
        env
    }

    pub fn push(&self, frame: RuleSet) -> RuntimeEnv {
        let mut env = self.clone();
        env.frames.push(frame);
        env
    }

    fn get(&self, x: &str) -> Option<&Value> {
        self.vars.iter().rev().find(|(y, _)| y == x).map(|(_, v)| v)
    }
}

/// Applies a type substitution to a value, following closures into their
/// bodies, environments and partial contexts.
pub fn subst_value(theta: &TypeSubst, v: &Value) -> Value {
    if theta.is_empty() {
        return v.clone();
    }
    match v {
        Value::Int(_) | Value::Bool(_) | Value::Str(_) => v.clone(),
        Value::Pair(a, b) => Value::Pair(Box::new(subst_value(theta, a)), Box::new(subst_value(theta, b))),
        Value::List(xs) => Value::List(xs.iter().map(|x| subst_value(theta, x)).collect()),
        Value::Record(n, fs) => Value::Record(n.clone(), fs.iter().map(|(f, x)| (f.clone(), subst_value(theta, x))).collect()),
        Value::Closure(c) => Value::Closure(Rc::new(Closure {
            param: c.param.clone(),
            ty: theta.apply(&c.ty),
            body: theta.apply_expr(&c.body),
            env: subst_env(theta, &c.env),
        })),
        Value::Rule(c) => Value::Rule(Rc::new(subst_rclos(theta, c))),
    }
}

pub fn subst_env(theta: &TypeSubst, env: &RuntimeEnv) -> RuntimeEnv {
    if theta.is_empty() {
        return env.clone();
    }
    RuntimeEnv {
        vars: env.vars.iter().map(|(x, v)| (x.clone(), subst_value(theta, v))).collect(),
        frames: env.frames.iter().map(|f| subst_rule_set(theta, f)).collect(),
    }
}

fn subst_rule_set(theta: &TypeSubst, set: &RuleSet) -> RuleSet {
    set.iter().map(|(r, v)| (theta.apply_rule(r), subst_value(theta, v))).collect()
}

/// Binders of a closure scope over its body, so they are excluded from the
/// substitution. Binder names are globally fresh, so no capture can occur.
fn subst_rclos(theta: &TypeSubst, c: &RClos) -> RClos {
    let inner = theta.without(&c.rtype.vars);
    RClos {
        rtype: RuleType {
            vars: c.rtype.vars.clone(),
            context: inner.apply_context(&c.rtype.context),
            head: inner.apply(&c.rtype.head),
        },
        body: inner.apply_expr(&c.body),
        env: subst_env(theta, &c.env),
        partial: subst_rule_set(&inner, &c.partial),
    }
}

fn rerr<T>(msg: impl Into<String>) -> Result<T, RuntimeError> {
    Err(RuntimeError::new(msg))
}

pub struct Interpreter {
    counter: usize,
    tracing: bool,
    trace: Vec<String>,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter::new()
    }
}

impl Interpreter {
    pub fn new() -> Self {
        Interpreter { counter: 0, tracing: false, trace: Vec::new() }
    }

    pub fn with_trace() -> Self {
        Interpreter { tracing: true, ..Interpreter::new() }
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    fn fresh(&mut self, base: &str) -> Name {
        self.counter += 1;
        let stem = base.split('%').next().unwrap_or(base);
        format!("{stem}%{}", self.counter)
    }

    /// Renames the binders of a rule type to globally fresh names.
    fn rename(&mut self, r: &RuleType) -> (RuleType, TypeSubst) {
        let mut theta = TypeSubst::new();
        let vars: Vec<Name> = r
            .vars
            .iter()
            .map(|v| {
                let w = self.fresh(v);
                theta.insert(v.clone(), Type::Var(w.clone()));
                w
            })
            .collect();
        let renamed = RuleType { vars, context: theta.apply_context(&r.context), head: theta.apply(&r.head) };
        (renamed, theta)
    }

    pub fn eval(&mut self, env: &RuntimeEnv, e: &Expr) -> Result<Value, RuntimeError> {
        match e {
            Expr::Int(n) => Ok(Value::Int(*n)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Var(x) => env.get(x).cloned().ok_or_else(|| RuntimeError::new(format!("unbound variable {x}"))),
            Expr::Lam(x, t, b) => Ok(Value::Closure(Rc::new(Closure {
                param: x.clone(),
                ty: t.clone(),
                body: (**b).clone(),
                env: env.clone(),
            }))),
            Expr::App(f, a) => {
                let fv = self.eval(env, f)?;
                let av = self.eval(env, a)?;
                self.apply(&fv, av)
            }
            Expr::Query(goal) => self.resolve_value(env, goal, 0),
            Expr::RuleAbs(r, b) => {
                if r.is_trivial() {
                    return self.eval(env, b);
                }
                Ok(Value::Rule(Rc::new(RClos { rtype: r.clone(), body: (**b).clone(), env: env.clone(), partial: Vec::new() })))
            }
            Expr::TyApp(b, ts) => {
                let v = self.eval(env, b)?;
                if ts.is_empty() {
                    return Ok(v);
                }
                let Value::Rule(c) = v else {
                    return rerr(format!("instantiating a non-rule value {v}"));
                };
                if c.rtype.vars.len() != ts.len() {
                    return rerr(format!("{} expects {} type arguments", c.rtype, c.rtype.vars.len()));
                }
                let theta = TypeSubst::zip(&c.rtype.vars, ts);
                let inst = RClos {
                    rtype: RuleType {
                        vars: Vec::new(),
                        context: theta.apply_context(&c.rtype.context),
                        head: theta.apply(&c.rtype.head),
                    },
                    body: theta.apply_expr(&c.body),
                    env: subst_env(&theta, &c.env),
                    partial: subst_rule_set(&theta, &c.partial),
                };
                if inst.rtype.context.is_empty() {
                    self.force(&inst)
                } else {
                    Ok(Value::Rule(Rc::new(inst)))
                }
            }
            Expr::RuleApp(b, args) => {
                let v = self.eval(env, b)?;
                let c = match v {
                    Value::Rule(c) => c,
                    v if args.is_empty() => return Ok(v),
                    v => return rerr(format!("supplying implicit arguments to {v}")),
                };
                let mut frame: RuleSet = Vec::with_capacity(args.len() + c.partial.len());
                for (a, r) in args {
                    frame.push((r.clone(), self.eval(env, a)?));
                }
                frame.extend(c.partial.iter().cloned());
                self.eval(&c.env.push(frame), &c.body)
            }
            Expr::Prim(op, args) => {
                let vs = args.iter().map(|a| self.eval(env, a)).collect::<Result<Vec<_>, _>>()?;
                self.prim(*op, vs)
            }
            Expr::If(c, t, f) => match self.eval(env, c)? {
                Value::Bool(true) => self.eval(env, t),
                Value::Bool(false) => self.eval(env, f),
                v => rerr(format!("if on {v}")),
            },
            Expr::Nil(_) => Ok(Value::List(Vec::new())),
            Expr::Record(n, _, fs) => {
                let mut out = Vec::with_capacity(fs.len());
                for (f, x) in fs {
                    out.push((f.clone(), self.eval(env, x)?));
                }
                Ok(Value::Record(n.clone(), out))
            }
            Expr::Project(b, f) => match self.eval(env, b)? {
                Value::Record(_, fs) => match fs.into_iter().find(|(g, _)| g == f) {
                    Some((_, v)) => Ok(v),
                    None => rerr(format!("missing field {f}")),
                },
                v => rerr(format!("projection from {v}")),
            },
        }
    }

    pub fn apply(&mut self, f: &Value, arg: Value) -> Result<Value, RuntimeError> {
        match f {
            Value::Closure(c) => self.eval(&c.env.bind(&c.param, arg), &c.body),
            v => rerr(format!("applying {v}")),
        }
    }

    /// Runs the body of a closure whose context is fully supplied.
    fn force(&mut self, c: &RClos) -> Result<Value, RuntimeError> {
        if c.partial.is_empty() {
            self.eval(&c.env, &c.body)
        } else {
            self.eval(&c.env.push(c.partial.clone()), &c.body)
        }
    }

    fn resolve_value(&mut self, env: &RuntimeEnv, goal: &RuleType, depth: usize) -> Result<Value, RuntimeError> {
        let c = self.dyn_resolve_at(env, goal, depth)?;
        if c.rtype.is_trivial() {
            self.force(&c)
        } else {
            Ok(Value::Rule(Rc::new(c)))
        }
    }

    pub fn dyn_resolve(&mut self, env: &RuntimeEnv, goal: &RuleType) -> Result<RClos, RuntimeError> {
        self.dyn_resolve_at(env, goal, 0)
    }

    fn dyn_resolve_at(&mut self, env: &RuntimeEnv, goal: &RuleType, depth: usize) -> Result<RClos, RuntimeError> {
        if depth >= MAX_RESOLUTION_DEPTH {
            return rerr(format!("resolution exceeded depth {MAX_RESOLUTION_DEPTH}"));
        }
        let (goal, _) = self.rename(goal);
        let (key, value) = lookup_val(env, &goal.head)?;
        let found = match value {
            Value::Rule(c) => (*c).clone(),
            v => RClos {
                rtype: key.clone(),
                body: Expr::Var("%v".into()),
                env: RuntimeEnv::new().bind("%v", v),
                partial: Vec::new(),
            },
        };
        let (rtype, renaming) = self.rename(&found.rtype);
        let body = renaming.apply_expr(&found.body);
        let partial = subst_rule_set(&renaming, &found.partial);
        let vars: BTreeSet<Name> = rtype.vars.iter().cloned().collect();
        let Some(theta) = match_type(&rtype.head, &goal.head, &vars) else {
            return rerr(format!("rule {key} does not match {}", goal.head));
        };
        let ctx_vars = rtype.context.ftv();
        if let Some(v) = rtype.vars.iter().find(|v| ctx_vars.contains(*v) && !theta.contains(v)) {
            return rerr(format!(
                "ambiguous instantiation: matching {key} against {} does not determine {}",
                goal.head,
                v.split('%').next().unwrap_or(v)
            ));
        }
        if self.tracing {
            let binds: Vec<String> = theta.iter().map(|(v, t)| format!("{} := {t}", v.split('%').next().unwrap_or(v))).collect();
            let mut line = format!("{}resolve {} using {}", "  ".repeat(depth), goal, key);
            if !binds.is_empty() {
                let _ = write!(line, " with {}", binds.join(", "));
            }
            self.trace.push(line);
        }
        let instantiated: Context = theta.apply_context(&rtype.context);
        let mut resolved: RuleSet = Vec::new();
        for m in instantiated.iter() {
            if goal.context.contains(m) || resolved.iter().any(|(r, _)| r.alpha_eq(m)) {
                continue;
            }
            let v = self.resolve_value(env, m, depth + 1).map_err(|e| RuntimeError::new(format!("{} (while resolving {goal})", e.message)))?;
            resolved.push((m.clone(), v));
        }
        resolved.extend(subst_rule_set(&theta, &partial));
        Ok(RClos { rtype: goal, body: theta.apply_expr(&body), env: subst_env(&theta, &found.env), partial: resolved })
    }

    fn prim(&mut self, op: PrimOp, mut vs: Vec<Value>) -> Result<Value, RuntimeError> {
        use Value::*;
        let shown = || vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
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
                let b = vs.pop();
                let a = vs.pop();
                match (a, b) {
                    (Some(a), Some(b)) => Pair(Box::new(a), Box::new(b)),
                    _ => return rerr("pair"),
                }
            }
            (PrimOp::Fst, [Pair(a, _)]) => (**a).clone(),
            (PrimOp::Snd, [Pair(_, b)]) => (**b).clone(),
            (PrimOp::Cons, [_, List(_)]) => {
                let (Some(List(mut xs)), Some(x)) = (vs.pop(), vs.pop()) else { return rerr("cons") };
                xs.insert(0, x);
                List(xs)
            }
            (PrimOp::Fold, [f, z, List(xs)]) => {
                let (f, xs) = (f.clone(), xs.clone());
                let mut acc = z.clone();
                for x in xs.into_iter().rev() {
                    let g = self.apply(&f, x)?;
                    acc = self.apply(&g, acc)?;
                }
                acc
            }
            _ => return rerr(format!("{} applied to {}", op.name(), shown())),
        })
    }
}

/// The unique entry of the innermost rule set that has any entry matching
/// `goal`.
pub fn lookup_val(env: &RuntimeEnv, goal: &Type) -> Result<(RuleType, Value), RuntimeError> {
    for frame in env.frames.iter().rev() {
        let mut matches = frame.iter().filter(|(r, _)| crate::unify::match_head(r, goal).is_some());
        if let Some((r, v)) = matches.next() {
            if let Some((r2, _)) = matches.next() {
                return rerr(format!("overlapping rules {r} and {r2} both match {goal}"));
            }
            return Ok((r.clone(), v.clone()));
        }
    }
    rerr(format!("no rule matches {goal}"))
}

/// Evaluates a closed program.
pub fn eval_program(p: &Program) -> Result<Value, RuntimeError> {
    let p = crate::subst::freshen(p);
    Interpreter::new().eval(&RuntimeEnv::new(), &p.body)
}

pub fn eval_big(env: &RuntimeEnv, e: &Expr) -> Result<Value, RuntimeError> {
    Interpreter::new().eval(env, e)
}

impl Display for Value {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => f.write_str(&escape_str(s)),
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
            Value::List(xs) => {
                f.write_char('[')?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_char(']')
            }
            Value::Closure(_) | Value::Rule(_) => f.write_str("<fun>"),
            Value::Record(n, fs) => {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;

    fn parse_rule(s: &str) -> RuleType {
        crate::parse::parse_rule(s).unwrap()
    }

    fn run(src: &str) -> Result<String, RuntimeError> {
        eval_program(&parse_program(src).unwrap()).map(|v| v.to_string())
    }

    #[test]
    fn basic() {
        assert_eq!(run("implicit {1 : Int, true : Bool} in (?Int + 1, not ?Bool) : (Int, Bool)").unwrap(), "(2, false)");
    }

    #[test]
    fn partial_resolution_is_kept_in_the_closure() {
        let src = "\\f : ({Int, Bool} => Int). \
                   (rule ({{Int, Bool} => Int, Bool} => {Int} => Int) ?({Int} => Int)) \
                   with {f : {Int, Bool} => Int, true : Bool}";
        let p = parse_program(src).unwrap();
        let Expr::Lam(_, _, body) = &p.body else { panic!() };
        let f = RClos {
            rtype: parse_rule("{Int, Bool} => Int"),
            body: crate::parse::parse_expr("if ?Bool then ?Int else 0").unwrap(),
            env: RuntimeEnv::new(),
            partial: Vec::new(),
        };
        let env = RuntimeEnv::new().bind("f", Value::Rule(Rc::new(f)));
        let mut it = Interpreter::new();
        let Value::Rule(c) = it.eval(&env, body).unwrap() else { panic!() };
        assert!(c.rtype.alpha_eq(&parse_rule("{Int} => Int")));
        assert_eq!(c.partial.len(), 1);
        assert_eq!(c.partial[0].0, RuleType::simple(Type::Bool));
        assert_eq!(c.partial[0].1.to_string(), "true");
        let applied = RuleApp(Value::Rule(c));
        assert_eq!(applied.with_int(&mut it, 5).to_string(), "5");
    }

    struct RuleApp(Value);

    impl RuleApp {
        fn with_int(&self, it: &mut Interpreter, n: i64) -> Value {
            let env = RuntimeEnv::new().bind("g", self.0.clone());
            let e = crate::parse::parse_expr(&format!("g with {{{n} : Int}}")).unwrap();
            it.eval(&env, &e).unwrap()
        }
    }

    #[test]
    fn lookup_failures() {
        let env = RuntimeEnv::new().push(vec![(RuleType::simple(Type::Int), Value::Int(1))]);
        assert_eq!(lookup_val(&env, &Type::Int).unwrap().1.to_string(), "1");
        let env = RuntimeEnv::new().push(vec![(RuleType::simple(Type::Int), Value::Int(1)), (RuleType::simple(Type::Int), Value::Int(2))]);
        assert!(lookup_val(&env, &Type::Int).unwrap_err().message.contains("overlapping"));
        assert!(lookup_val(&RuntimeEnv::new(), &Type::Bool).is_err());
    }

    #[test]
    fn ambiguous_instantiation_at_runtime() {
        let c1 = RClos { rtype: parse_rule("forall a. {a -> a} => Int"), body: Expr::Int(1), env: RuntimeEnv::new(), partial: Vec::new() };
        let id = |t: Type| Value::Closure(Rc::new(Closure { param: "x".into(), ty: t, body: Expr::var("x"), env: RuntimeEnv::new() }));
        let c3 = RClos { rtype: parse_rule("forall b. b -> b"), body: Expr::lam("y", Type::var("b"), Expr::var("y")), env: RuntimeEnv::new(), partial: Vec::new() };
        let env = RuntimeEnv::new().push(vec![
            (c1.rtype.clone(), Value::Rule(Rc::new(c1))),
            (parse_rule("Bool -> Bool"), id(Type::Bool)),
            (c3.rtype.clone(), Value::Rule(Rc::new(c3))),
        ]);
        let err = Interpreter::new().eval(&env, &Expr::query(Type::Int)).unwrap_err();
        assert!(err.message.contains("ambiguous instantiation"), "{}", err.message);
    }

    #[test]
    fn nearest_scope_wins() {
        let src = "implicit {1 : Int} in implicit {true : Bool, rule ({Bool} => Int) (if ?Bool then 2 else 0) : {Bool} => Int} in ?Int : Int : Int";
        assert_eq!(run(src).unwrap(), "2");
    }

    #[test]
    fn polymorphic_query_then_instantiation() {
        let src = "(implicit {rule (forall a. {a} => (a, a)) (?a, ?a) : forall a. {a} => (a, a)} in \
                   ?(forall b. {b} => (b, b)) : forall c. {c} => (c, c))[Int] with {3 : Int}";
        assert_eq!(run(src).unwrap(), "(3, 3)");
    }
}
