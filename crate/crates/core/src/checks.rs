//! Static diagnostics: termination of resolution, overlap predicates,
//! most-specific rules and sampled coherence. None of these affect what the
//! checker accepts.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::subst::TypeSubst;
use crate::syntax::{Context, Name, Program, RuleType, Type};
use crate::typecheck::{lookup, Checker, ImplicitEnv};
use crate::unify::{match_head, match_type, unify};

pub const PROBE_DEPTH: usize = 64;
pub const DEFAULT_SAMPLES: usize = 256;
const SEED: u64 = 0x1A7B;

// Termination.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleVerdict {
    pub rule: String,
    pub ok: bool,
    pub reasons: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminationReport {
    pub rules: Vec<RuleVerdict>,
    /// Goal heads along a resolution path that revisits a goal.
    pub cycle: Option<Vec<String>>,
    /// A probe path that reached the depth bound without repeating.
    pub deep_path: Option<Vec<String>>,
}

impl TerminationReport {
    pub fn pass(&self) -> bool {
        self.rules.iter().all(|r| r.ok) && self.cycle.is_none() && self.deep_path.is_none()
    }
}

/// Size-decrease condition: for every rule `∀ᾱ.π ⇒ τ` and every member of
/// `π`, no variable occurs more often in the member's head than in `τ`, and
/// the member's head has strictly fewer constructor nodes than `τ`. A
/// bounded resolution probe from every rule head backs this up.
pub fn check_termination(rules: &[RuleType]) -> TerminationReport {
    let mut verdicts = Vec::new();
    for r in rules {
        let mut reasons = Vec::new();
        for m in r.context.iter() {
            let bound: BTreeSet<&Name> = m.vars.iter().collect();
            for v in m.head.ftv() {
                if bound.contains(&v) {
                    continue;
                }
                let (inner, outer) = (m.head.occurrences(&v), r.head.occurrences(&v));
                if inner > outer {
                    reasons.push(format!("{v} occurs {inner} times in {} but {outer} times in {}", m.head, r.head));
                }
            }
            if m.head.size() >= r.head.size() {
                reasons.push(format!("{} is not smaller than {}", m.head, r.head));
            }
        }
        verdicts.push(RuleVerdict { rule: r.to_string(), ok: reasons.is_empty(), reasons });
    }
    let mut cycle = None;
    let mut deep_path = None;
    for r in rules {
        let goal = skolemize(r);
        let mut path = Vec::new();
        match probe(rules, &goal, &mut path) {
            Probe::Cycle(w) if cycle.is_none() => cycle = Some(w.iter().map(|t| t.to_string()).collect()),
            Probe::Deep(w) if deep_path.is_none() => deep_path = Some(w.iter().map(|t| t.to_string()).collect()),
            _ => {}
        }
    }
    TerminationReport { rules: verdicts, cycle, deep_path }
}

/// The rule's head with its quantified variables replaced by rigid names.
fn skolemize(r: &RuleType) -> Type {
    let theta = TypeSubst::zip(
        &r.vars,
        &r.vars.iter().map(|v| Type::Var(format!("{v}!"))).collect::<Vec<_>>(),
    );
    theta.apply(&r.head)
}

enum Probe {
    Done,
    Cycle(Vec<Type>),
    Deep(Vec<Type>),
}

fn probe(rules: &[RuleType], goal: &Type, path: &mut Vec<Type>) -> Probe {
    if let Some(i) = path.iter().position(|g| g.alpha_eq(goal)) {
        let mut w = path[i..].to_vec();
        w.push(goal.clone());
        return Probe::Cycle(w);
    }
    if path.len() >= PROBE_DEPTH {
        let mut w = path.clone();
        w.push(goal.clone());
        return Probe::Deep(w);
    }
    let Some((_, context, _)) = rules.iter().find_map(|r| match_head(r, goal)) else {
        return Probe::Done;
    };
    path.push(goal.clone());
    for m in context.iter() {
        let sub = skolemize(m);
        match probe(rules, &sub, path) {
            Probe::Done => {}
            found => {
                path.pop();
                return found;
            }
        }
    }
    path.pop();
    Probe::Done
}

// Overlap.

/// Opens the quantifiers of `r` under names tagged with `tag`, so that the
/// quantifiers of two rules are independent while free variables are shared.
fn open(r: &RuleType, tag: &str) -> Type {
    let theta = tagged(&r.vars, tag);
    let body = RuleType { vars: Vec::new(), context: r.context.clone(), head: r.head.clone() };
    theta.apply(&body.to_type())
}

fn tagged(vars: &[Name], tag: &str) -> TypeSubst {
    let mut theta = TypeSubst::new();
    for v in vars {
        theta.insert(v.clone(), Type::Var(format!("{v}#{tag}")));
    }
    theta
}

fn unifiable(a: &Type, b: &Type) -> bool {
    let mut vars = a.ftv();
    vars.extend(b.ftv());
    unify(a, b, &vars).is_some()
}

/// No substitution of free or quantified variables makes the two rule types
/// equal.
pub fn nonoverlap(r1: &RuleType, r2: &RuleType) -> bool {
    !unifiable(&open(r1, "1"), &open(r2, "2"))
}

/// Pairwise non-overlap of the members of a set.
pub fn distinct(rules: &[RuleType]) -> bool {
    rules.iter().enumerate().all(|(i, a)| rules[i + 1..].iter().all(|b| nonoverlap(a, b)))
}

/// Every member of `a` is non-overlapping with every member of `b`.
pub fn distinct_between(a: &[RuleType], b: &[RuleType]) -> bool {
    a.iter().all(|x| b.iter().all(|y| nonoverlap(x, y)))
}

/// `distinct` over the annotations of an argument list or rule set.
pub fn distinct_with<T>(args: &[(T, RuleType)]) -> bool {
    let rules: Vec<RuleType> = args.iter().map(|(_, r)| r.clone()).collect();
    distinct(&rules)
}

/// No substitution equates the heads of two distinct members.
pub fn check_unique_instances(pi: &[RuleType]) -> bool {
    pi.iter().enumerate().all(|(i, a)| {
        pi[i + 1..].iter().all(|b| !unifiable(&open_head(a, "1"), &open_head(b, "2")))
    })
}

fn open_head(r: &RuleType, tag: &str) -> Type {
    tagged(&r.vars, tag).apply(&r.head)
}

// Most specific rule.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ambiguity {
    pub goal: String,
    pub maximal: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MostSpecificReport {
    pub goals_checked: usize,
    pub ambiguous: Vec<Ambiguity>,
}

impl MostSpecificReport {
    pub fn pass(&self) -> bool {
        self.ambiguous.is_empty()
    }
}

/// `a` is at least as specific as `b`: `a`'s head is an instance of `b`'s.
fn at_least_as_specific(a: &RuleType, b: &RuleType) -> bool {
    let vars: BTreeSet<Name> = b.vars.iter().cloned().collect();
    match_type(&b.head, &a.head, &vars).is_some()
}

/// The members of `pi` matching `goal` that no other matching member is
/// strictly more specific than.
pub fn maximal_matches(pi: &[RuleType], goal: &Type) -> Vec<RuleType> {
    let matching: Vec<&RuleType> = pi.iter().filter(|r| match_head(r, goal).is_some()).collect();
    matching
        .iter()
        .filter(|a| {
            !matching
                .iter()
                .any(|b| !std::ptr::eq(**a, *b) && at_least_as_specific(b, a) && !at_least_as_specific(a, b))
        })
        .map(|r| (*r).clone())
        .collect()
}

fn ground_pool() -> Vec<Type> {
    vec![
        Type::Int,
        Type::Bool,
        Type::Str,
        Type::list(Type::Int),
        Type::pair(Type::Int, Type::Bool),
        Type::arrow(Type::Int, Type::Int),
    ]
}

/// Reports goals at which two or more matching rules are incomparable.
/// Goals are the unified heads of every overlapping pair and the ground
/// instances of each head over a small pool of depth-two types.
pub fn check_most_specific(pi: &[RuleType]) -> MostSpecificReport {
    let mut goals: Vec<Type> = Vec::new();
    let add = |goals: &mut Vec<Type>, t: Type| {
        if !goals.iter().any(|g| g.alpha_eq(&t)) {
            goals.push(t);
        }
    };
    for (i, a) in pi.iter().enumerate() {
        for b in &pi[i + 1..] {
            let (ha, hb) = (open_head(a, "1"), open_head(b, "2"));
            let mut vars = ha.ftv();
            vars.extend(hb.ftv());
            if let Some(theta) = unify(&ha, &hb, &vars) {
                add(&mut goals, theta.apply(&ha));
            }
        }
    }
    let pool = ground_pool();
    for r in pi {
        let vars: Vec<Name> = r.head.ftv().into_iter().collect();
        if vars.len() > 3 {
            continue;
        }
        let mut idx = vec![0usize; vars.len()];
        loop {
            let ts: Vec<Type> = idx.iter().map(|&i| pool[i].clone()).collect();
            add(&mut goals, TypeSubst::zip(&vars, &ts).apply(&r.head));
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
                break;
            }
        }
    }
    let mut ambiguous = Vec::new();
    for g in &goals {
        let maximal = maximal_matches(pi, g);
        if maximal.len() >= 2 {
            ambiguous.push(Ambiguity { goal: g.to_string(), maximal: maximal.iter().map(|r| r.to_string()).collect() });
        }
    }
    MostSpecificReport { goals_checked: goals.len(), ambiguous }
}

// Coherence.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub substitution: String,
    pub before: String,
    pub after: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl CoherenceReport {
    pub fn coherent(&self) -> bool {
        self.violations.is_empty()
    }
}

fn choice(delta: &ImplicitEnv, goal: &Type) -> Option<(usize, usize)> {
    lookup(delta, goal).ok().map(|l| (l.frame, l.member))
}

fn describe(delta: &ImplicitEnv, c: Option<(usize, usize)>) -> String {
    match c {
        Some((f, m)) => format!("{} (scope {f})", delta.frames()[f][m].0),
        None => "no rule".into(),
    }
}

fn subst_env(theta: &TypeSubst, delta: &ImplicitEnv) -> ImplicitEnv {
    let mut out = ImplicitEnv::new();
    for f in delta.frames() {
        out.push(f.iter().map(|(r, x)| (theta.apply_rule(r), x.clone())).collect());
    }
    out
}

fn ground_subterms(t: &Type, out: &mut Vec<Type>) {
    if t.ftv().is_empty() && !matches!(t, Type::Rule(_)) && !out.contains(t) {
        out.push(t.clone());
    }
    match t {
        Type::Arrow(a, b) | Type::Pair(a, b) => {
            ground_subterms(a, out);
            ground_subterms(b, out);
        }
        Type::List(a) => ground_subterms(a, out),
        Type::Con(_, args) => args.iter().for_each(|a| ground_subterms(a, out)),
        Type::Rule(r) => {
            r.context.iter().for_each(|m| ground_subterms(&m.head, out));
            ground_subterms(&r.head, out);
        }
        _ => {}
    }
}

/// Checks that lookup picks the same rule for `goal` under sampled ground
/// substitutions of the free variables as it does for `goal` itself.
pub fn coherent_sampled(delta: &ImplicitEnv, goal: &Type, samples: usize) -> CoherenceReport {
    let mut vars: BTreeSet<Name> = goal.ftv();
    vars.extend(delta.ftv());
    let vars: Vec<Name> = vars.into_iter().collect();
    if vars.is_empty() {
        return CoherenceReport { checked: 0, violations: Vec::new() };
    }
    let mut pool: Vec<Type> = Vec::new();
    ground_subterms(goal, &mut pool);
    for (r, _) in delta.frames().iter().flatten() {
        ground_subterms(&r.to_type(), &mut pool);
    }
    for t in [Type::Int, Type::Bool, Type::Str, Type::con("Fresh", vec![])] {
        if !pool.contains(&t) {
            pool.push(t);
        }
    }
    let base = pool.clone();
    for a in &base {
        for t in [Type::list(a.clone()), Type::arrow(a.clone(), a.clone()), Type::pair(a.clone(), Type::Int)] {
            if !pool.contains(&t) && t.size() <= 5 {
                pool.push(t);
            }
        }
    }
    let before = choice(delta, goal);
    let total = (pool.len() as f64).powi(vars.len() as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut assignments: Vec<Vec<Type>> = Vec::new();
    if total <= samples as f64 {
        let mut idx = vec![0usize; vars.len()];
        loop {
            assignments.push(idx.iter().map(|&i| pool[i].clone()).collect());
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
                break;
            }
        }
    } else {
        for _ in 0..samples {
            assignments.push(vars.iter().map(|_| pool.choose(&mut rng).cloned().unwrap_or(Type::Int)).collect());
        }
    }
    let mut violations = Vec::new();
    for ts in &assignments {
        let theta = TypeSubst::zip(&vars, ts);
        let d = subst_env(&theta, delta);
        let after = choice(&d, &theta.apply(goal));
        if after != before {
            let shown: Vec<String> = vars.iter().zip(ts).map(|(v, t)| format!("{v} := {t}")).collect();
            violations.push(Violation {
                substitution: shown.join(", "),
                before: describe(delta, before),
                after: describe(&d, after),
            });
        }
    }
    CoherenceReport { checked: assignments.len(), violations }
}

// Lint.

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub code: &'static str,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.code, self.location, self.message)
    }
}

pub const INCOHERENT: &str = "L001";
pub const NONTERMINATING: &str = "L002";
pub const NO_MOST_SPECIFIC: &str = "L003";
pub const OVERLAPPING_INSTANCES: &str = "L004";

/// Runs every diagnostic over the queries of a well-typed program.
pub fn lint(p: &Program) -> Result<Vec<Finding>, crate::error::TypeError> {
    let typed = Checker::check_program(p)?;
    let mut out: Vec<Finding> = Vec::new();
    let mut seen_frames: Vec<Vec<RuleType>> = Vec::new();
    for q in &typed.queries {
        let delta = ImplicitEnv::from_rules(q.env.clone());
        let report = coherent_sampled(&delta, &q.goal.head, DEFAULT_SAMPLES);
        if let Some(v) = report.violations.first() {
            out.push(Finding {
                code: INCOHERENT,
                location: q.location.clone(),
                message: format!(
                    "?{} resolves to {}, but under {} it would resolve to {}",
                    q.goal, v.before, v.substitution, v.after
                ),
            });
        }
        for frame in &q.env {
            if seen_frames.iter().any(|f| f == frame) {
                continue;
            }
            seen_frames.push(frame.clone());
            let term = check_termination(frame);
            if !term.pass() {
                let why = match (&term.cycle, &term.deep_path) {
                    (Some(c), _) => format!("resolution can loop: {}", c.join(" -> ")),
                    (_, Some(p)) => format!("resolution can exceed depth {PROBE_DEPTH} from {}", p[0]),
                    _ => term
                        .rules
                        .iter()
                        .filter(|r| !r.ok)
                        .map(|r| format!("{}: {}", r.rule, r.reasons.join("; ")))
                        .collect::<Vec<_>>()
                        .join(", "),
                };
                out.push(Finding { code: NONTERMINATING, location: q.location.clone(), message: why });
            }
            let ms = check_most_specific(frame);
            if let Some(a) = ms.ambiguous.first() {
                out.push(Finding {
                    code: NO_MOST_SPECIFIC,
                    location: q.location.clone(),
                    message: format!("no most specific rule for {} among {}", a.goal, a.maximal.join(", ")),
                });
            } else if !check_unique_instances(frame) {
                out.push(Finding {
                    code: OVERLAPPING_INSTANCES,
                    location: q.location.clone(),
                    message: format!("rules in scope {} have unifiable heads", Context::positional(frame.clone())),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(s: &str) -> RuleType {
        crate::parse::parse_rule(s).unwrap()
    }

    fn ty(s: &str) -> Type {
        crate::parse::parse_type(s).unwrap()
    }

    #[test]
    fn looping_rules_fail_termination() {
        let rules = vec![rt("{Char} => Int"), rt("{Int} => Char")];
        let report = check_termination(&rules);
        assert!(!report.pass());
        assert_eq!(report.cycle, Some(vec!["Int".to_string(), "Char".to_string(), "Int".to_string()]));
    }

    #[test]
    fn eq_rules_terminate() {
        let rules = vec![rt("Eq Int"), rt("Eq Bool"), rt("forall a b. {Eq a, Eq b} => Eq (a, b)")];
        assert!(check_termination(&rules).pass());
        assert!(check_termination(&[]).pass());
    }

    #[test]
    fn size_condition_alone_can_fail() {
        let report = check_termination(&[rt("forall a. {Eq (a, a)} => Eq [a]")]);
        assert!(!report.rules[0].ok);
        assert_eq!(report.rules[0].reasons.len(), 2);
    }

    #[test]
    fn overlap_predicates() {
        assert!(nonoverlap(&rt("Int"), &rt("Bool")));
        assert!(!nonoverlap(&rt("forall a. a -> Int"), &rt("Int -> Int")));
        assert!(distinct_between(&[rt("Int")], &[rt("Bool")]));
        assert!(!distinct_between(&[rt("a")], &[rt("Int")]));
        assert!(distinct(&[rt("Int"), rt("Bool"), rt("{Int} => Bool")]));
        assert!(distinct_with(&[((), rt("Int")), ((), rt("Bool"))]));
    }

    #[test]
    fn unique_instances() {
        assert!(!check_unique_instances(&[rt("a"), rt("Int")]));
        assert!(check_unique_instances(&[rt("Int"), rt("Bool")]));
        assert!(!check_unique_instances(&[rt("forall a. a -> Int"), rt("forall a. Int -> a")]));
    }

    #[test]
    fn most_specific() {
        let r = check_most_specific(&[rt("forall a. a -> Int -> a"), rt("forall a. Int -> a -> Int")]);
        assert!(r.ambiguous.iter().any(|a| a.goal == "Int -> Int -> Int"));
        let pi = [rt("forall a. a -> a"), rt("Int -> Int")];
        assert!(check_most_specific(&pi).pass());
        assert_eq!(maximal_matches(&pi, &ty("Int -> Int")), vec![rt("Int -> Int")]);
        assert!(check_most_specific(&[rt("forall a. a -> a")]).pass());
    }

    #[test]
    fn coherence() {
        let coherent = ImplicitEnv::from_rules(vec![vec![rt("forall a. a -> a")]]);
        assert!(coherent_sampled(&coherent, &ty("b -> b"), DEFAULT_SAMPLES).coherent());
        let incoherent = ImplicitEnv::from_rules(vec![vec![rt("forall a. a -> a")], vec![rt("Int -> Int")]]);
        let report = coherent_sampled(&incoherent, &ty("b -> b"), DEFAULT_SAMPLES);
        assert!(report.violations.iter().any(|v| v.substitution == "b := Int"));
        let closed = ImplicitEnv::from_rules(vec![vec![rt("Int")]]);
        let report = coherent_sampled(&closed, &Type::Int, DEFAULT_SAMPLES);
        assert!(report.coherent());
        assert_eq!(report.checked, 0);
    }
}
