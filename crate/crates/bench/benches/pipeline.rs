use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use imp_bench::corpus_file;
use imp_core::interp::eval_program;
use imp_core::parse::{parse_program, parse_rule};
use imp_core::source::compile_source;
use imp_core::systemf::{elaborate_checked, feval, reduce, SMALLSTEP_FUEL};
use imp_core::typecheck::{resolve, Checker, ImplicitEnv};

const PROGRAMS: &[&str] = &["combined.imp", "polymorphic.imp", "eq.src", "show.src"];

fn load(name: &str) -> imp_core::Program {
    let text = corpus_file(name);
    if name.ends_with(".src") {
        compile_source(&text).expect("encodes").program
    } else {
        parse_program(&text).expect("parses")
    }
}

fn stages(c: &mut Criterion) {
    for name in PROGRAMS {
        let text = corpus_file(name);
        let p = load(name);
        let (_, _, term) = elaborate_checked(&p).expect("elaborates");
        let mut g = c.benchmark_group(*name);
        if name.ends_with(".src") {
            g.bench_function("encode", |b| b.iter(|| compile_source(black_box(&text))));
        } else {
            g.bench_function("parse", |b| b.iter(|| parse_program(black_box(&text))));
        }
        g.bench_function("check", |b| b.iter(|| Checker::check_program(black_box(&p))));
        g.bench_function("elaborate", |b| b.iter(|| elaborate_checked(black_box(&p))));
        g.bench_function("eval", |b| b.iter(|| feval(black_box(&term))));
        g.bench_function("reduce", |b| b.iter(|| reduce(black_box(&term), SMALLSTEP_FUEL)));
        g.bench_function("interp", |b| b.iter(|| eval_program(black_box(&p))));
        g.finish();
    }
}

fn resolution(c: &mut Criterion) {
    let env = ImplicitEnv::from_rules(vec![vec![
        parse_rule("Eq Int").expect("rule"),
        parse_rule("forall a b. {Eq a, Eq b} => Eq (a, b)").expect("rule"),
    ]]);
    let mut g = c.benchmark_group("resolve");
    for depth in [1usize, 4, 8] {
        let mut ty = "Int".to_string();
        for _ in 0..depth {
            ty = format!("({ty}, Int)");
        }
        let goal = parse_rule(&format!("Eq {ty}")).expect("goal");
        g.bench_function(format!("nested pairs {depth}"), |b| b.iter(|| resolve(&env, black_box(&goal))));
    }
    g.finish();
}

criterion_group!(benches, stages, resolution);
criterion_main!(benches);
