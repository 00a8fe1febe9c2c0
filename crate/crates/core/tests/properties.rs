use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imp_core::checks::nonoverlap;
use imp_core::parse::parse_program;
use imp_core::subst::TypeSubst;
use imp_core::testing::{horn_entails, horn_env, horn_goal, simple_type, small_rule, TermGen};
use imp_core::typecheck::{infer, resolve, ImplicitEnv};
use imp_core::unify::unify;
use imp_core::{Name, RuleType, Type};

const SEED: u64 = 0x1A7B;

fn config() -> Config {
    Config {
        cases: 1000,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(SEED),
        failure_persistence: None,
        ..Config::default()
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn subst<R: Rng>(r: &mut R, vars: &[&str]) -> TypeSubst {
    let mut s = TypeSubst::new();
    for v in vars {
        if r.gen_bool(0.6) {
            s.insert(v.to_string(), simple_type(r, 2, &["a", "b", "c"]));
        }
    }
    s
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn empty_substitution_is_identity(seed in any::<u64>()) {
        let t = simple_type(&mut rng(seed), 3, &["a", "b"]);
        prop_assert_eq!(TypeSubst::new().apply(&t), t);
    }

    #[test]
    fn composition_applies_in_sequence(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = simple_type(&mut r, 3, &["a", "b", "c"]);
        let s1 = subst(&mut r, &["a", "b"]);
        let s2 = subst(&mut r, &["b", "c"]);
        prop_assert_eq!(s2.compose(&s1).apply(&t), s2.apply(&s1.apply(&t)));
    }

    #[test]
    fn alpha_equivalence_laws(seed in any::<u64>()) {
        let mut r = rng(seed);
        let r1 = small_rule(&mut r);
        let r2 = small_rule(&mut r);
        prop_assert!(r1.alpha_eq(&r1));
        prop_assert_eq!(r1.alpha_eq(&r2), r2.alpha_eq(&r1));
        prop_assert_eq!(r1.alpha_eq(&r2), r1.canonical_cmp(&r2).is_eq());
        // renaming a bound variable to an unused name
        let fresh: Name = "q0".into();
        let theta = TypeSubst::zip(&r1.vars, &vec![Type::Var(fresh.clone()); r1.vars.len()]);
        let open = RuleType::new(Vec::new(), r1.context.iter().cloned(), r1.head.clone());
        let opened = theta.apply_rule(&open);
        let renamed = RuleType::new(r1.vars.iter().map(|_| fresh.clone()).collect(), opened.context.iter().cloned(), opened.head);
        prop_assert!(renamed.alpha_eq(&r1));
    }

    #[test]
    fn unifiers_equate_their_arguments(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t1 = simple_type(&mut r, 2, &["a", "b"]);
        let t2 = if r.gen_bool(0.5) {
            subst(&mut r, &["a", "b"]).apply(&t1)
        } else {
            simple_type(&mut r, 2, &["b", "c"])
        };
        let vars: BTreeSet<Name> = ["a", "b", "c"].iter().map(|v| v.to_string()).collect();
        if let Some(theta) = unify(&t1, &t2, &vars) {
            prop_assert_eq!(theta.apply(&t1), theta.apply(&t2));
        }
    }

    #[test]
    fn nonoverlap_agrees_with_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let r1 = small_rule(&mut r);
        let r2 = small_rule(&mut r);
        prop_assert_eq!(nonoverlap(&r1, &r2), !imp_core::testing::overlap_by_enumeration(&r1, &r2), "{} / {}", r1, r2);
    }

    #[test]
    fn resolution_implies_entailment(seed in any::<u64>()) {
        let mut r = rng(seed);
        let frames = horn_env(&mut r);
        let goal = horn_goal(&mut r);
        if resolve(&ImplicitEnv::from_rules(frames.clone()), &goal).is_ok() {
            prop_assert!(horn_entails(&frames, &goal, 8), "{:?} |- {}", frames, goal);
        }
    }

    #[test]
    fn printing_then_parsing_is_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (p, t) = TermGen::new(&mut r).program(5);
        let text = p.to_string();
        let back = parse_program(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back.to_string(), text.clone());
        let ty = infer(&back).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert!(ty.alpha_eq(&t));
    }
}
