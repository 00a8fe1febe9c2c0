use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use imp_core::interp::eval_program;
use imp_core::systemf::{elaborate_checked, run_pipeline};
use imp_core::testing::TermGen;
use imp_core::typecheck::infer;

const PROGRAMS: usize = 600;

#[test]
fn generated_programs_elaborate_to_well_typed_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut gen = TermGen::new(&mut rng);
    for _ in 0..PROGRAMS {
        let (p, t) = gen.program(6);
        let ty = infer(&p).unwrap_or_else(|e| panic!("{e}\n{}", p.body));
        assert!(ty.alpha_eq(&t), "{ty} vs {t}");
        let (lty, _, _) = elaborate_checked(&p).unwrap_or_else(|e| panic!("{e}\n{}", p.body));
        assert!(lty.alpha_eq(&t));
    }
}

#[test]
fn both_evaluators_agree_on_generated_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1FF);
    let mut gen = TermGen::new(&mut rng);
    for _ in 0..PROGRAMS {
        let (p, _) = gen.program(6);
        let big = run_pipeline(&p, false).unwrap_or_else(|e| panic!("{e}\n{}", p.body));
        let small = run_pipeline(&p, true).unwrap_or_else(|e| panic!("{e}\n{}", p.body));
        let direct = eval_program(&p).unwrap_or_else(|e| panic!("{e}\n{}", p.body));
        assert_eq!(big.value.to_string(), small.value.to_string(), "{}", p.body);
        assert_eq!(big.value.to_string(), direct.to_string(), "{}", p.body);
    }
}
