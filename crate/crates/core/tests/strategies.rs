mod common;

use common::*;
use compkern::dsl::{parse, program_to_string};
use compkern::model::{build_source_cfg, compute_liveness, lower_to_ir, Inst, IrOp};
use compkern::strategies::{apply_source, regpressure::reduce_register_pressure, trail, StrategyError};

fn src(g: &compkern::model::SourceCfg) -> String {
    program_to_string(g.program())
}

#[test]
fn granularity_on_jacobi() {
    let g = load("jacobi");
    let r = apply_source("granularity", &g).unwrap();
    let out = src(&r);
    assert!(out.contains("int dim = (N - 2) / B;"), "{out}");
    assert!(out.contains("int p = i * B + j;"), "{out}");
    assert!(!out.contains("for (int k"), "{out}");
    assert!(matches!(
        apply_source("granularity", &r),
        Err(StrategyError::Inapplicable { .. })
    ));
}

#[test]
fn granularity_on_constant_bound() {
    let g = load("addition");
    let out = src(&apply_source("granularity", &g).unwrap());
    assert!(out.contains("int j = p * B1 + q;"), "{out}");
    assert!(out.contains("int dim1 = N / B1;"), "{out}");
    assert!(out.contains("const int g = 2;"), "{out}");
}

#[test]
fn caching_off() {
    let g = load("transpose");
    let r = apply_source("caching-off", &g).unwrap();
    assert!(r.cache().is_empty());
    assert!(apply_source("caching-off", &r).is_err());
}

#[test]
fn cse_on_jacobi_body() {
    let g = load("jacobi");
    let out = src(&apply_source("cse-0", &g).unwrap());
    for line in [
        "int t0 = p + 1;",
        "int t1 = p + 2;",
        "int p1 = t0;",
        "int p2 = t1;",
        "int np1 = N + t0;",
        "int np2 = N + t1;",
    ] {
        assert!(out.contains(line), "missing `{line}` in\n{out}");
    }
    assert_eq!(out.matches("p + 1").count(), 1);
    assert_eq!(out.matches("p + 2").count(), 1);
}

#[test]
fn cse_repeated_product() {
    let p = parse(
        "int N, x, y; int a[N];
         meta_schedule { meta_for (int i = 0; i < N; i++) {
           a[i] = x * y + 1; a[i] = a[i] + x * y; a[i] = a[i] - y * x; } }",
    )
    .unwrap();
    let g = build_source_cfg(&p).unwrap();
    let ir = lower_to_ir(&apply_source("cse-0", &g).unwrap(), &[]).unwrap();
    assert_eq!(ir.count(|i| matches!(i, Inst::Bin { op: IrOp::Mul, .. })), 1);
}

#[test]
fn cse_respects_reassignment() {
    let p = parse(
        "int N, x; int a[N];
         meta_schedule { meta_for (int i = 0; i < N; i++) {
           int w = i; int y = w + 1; w = 5; int z = w + 1; a[i] = y + z; } }",
    )
    .unwrap();
    let g = build_source_cfg(&p).unwrap();
    let out = src(&apply_source("cse-0", &g).unwrap());
    assert!(!out.contains("t0"), "{out}");
}

#[test]
fn cse_hoists_across_branches() {
    let p = parse(
        "int N, x, y; int a[N];
         meta_schedule { meta_for (int i = 0; i < N; i++) {
           if (i % 2 == 0) a[i] = x * y + i; else a[i] = x * y - i; } }",
    )
    .unwrap();
    let g = build_source_cfg(&p).unwrap();
    let zero = src(&apply_source("cse-0", &g).unwrap());
    assert!(!zero.contains("t0"), "{zero}");
    let one = apply_source("cse-1", &g).unwrap();
    let out = src(&one);
    assert!(out.contains("int t0 = x * y;"), "{out}");
    let ir = lower_to_ir(&one, &[]).unwrap();
    assert_eq!(ir.count(|i| matches!(i, Inst::Bin { op: IrOp::Mul, .. })), 1);
}

#[test]
fn source_strategies_are_idempotent_where_expected() {
    for k in ["jacobi", "transpose", "addition"] {
        let g = load(k);
        for id in ["cse-0", "cse-1"] {
            let once = apply_source(id, &g).unwrap();
            let twice = apply_source(id, &once).unwrap();
            assert_eq!(src(&once), src(&twice), "{k} {id}");
        }
    }
}

#[test]
fn source_strategies_preserve_semantics() {
    let mut rng = rng(11);
    for k in ["jacobi", "transpose", "addition"] {
        let g = load(k);
        for id in ["granularity", "caching-off", "cse-0", "cse-1"] {
            let Ok(r) = apply_source(id, &g) else { continue };
            for _ in 0..10 {
                let params = sample_params(g.program(), &ranges(k), &mut rng);
                let arrays = random_arrays(g.program(), &params, &mut rng);
                assert_eq!(
                    run_source(g.program(), &params, &arrays),
                    run_source(r.program(), &params, &arrays),
                    "{k} {id} {params:?}"
                );
            }
        }
    }
}

#[test]
fn regpressure_never_raises_maxlive_and_is_idempotent() {
    for k in ["jacobi", "transpose", "addition"] {
        let ir = lower_to_ir(&load(k), &[]).unwrap();
        let base = compute_liveness(&ir).maxlive;
        let mut prev = base;
        for level in 0..3 {
            let once = reduce_register_pressure(&ir, level);
            let m = compute_liveness(&once).maxlive;
            assert!(m <= base, "{k} level {level}");
            assert!(m <= prev, "{k} level {level} is worse than the level below");
            prev = m;
            assert_eq!(reduce_register_pressure(&once, level), once, "{k} level {level}");
        }
    }
}

#[test]
fn regpressure_helps_on_jacobi() {
    let ir = lower_to_ir(&load("jacobi"), &[]).unwrap();
    let base = compute_liveness(&ir).maxlive;
    let r1 = compute_liveness(&reduce_register_pressure(&ir, 1)).maxlive;
    assert!(r1 < base, "{r1} vs {base}");
}

#[test]
fn regpressure_preserves_semantics() {
    let mut rng = rng(12);
    for k in ["jacobi", "transpose", "addition"] {
        let g = load(k);
        for _ in 0..10 {
            let params = sample_params(g.program(), &ranges(k), &mut rng);
            let arrays = random_arrays(g.program(), &params, &mut rng);
            let expect = run_source(g.program(), &params, &arrays);
            assert_eq!(run_lowered(&g, &[], &params, &arrays), expect, "{k} base");
            for id in ["regpressure-0", "regpressure-1", "regpressure-2"] {
                let applied = vec![id.to_string()];
                assert_eq!(run_lowered(&g, &applied, &params, &arrays), expect, "{k} {id}");
            }
        }
    }
}

#[test]
fn spilling_values_live_across_a_loop() {
    let p = parse(
        "int N, M, x; int a[N];
         meta_schedule { meta_for (int i = 0; i < N; i++) {
           int y = a[i] * x; int acc = 0;
           for (int k = 0; k < M; ++k) { acc = acc + k; }
           a[i] = acc + y; } }",
    )
    .unwrap();
    let g = build_source_cfg(&p).unwrap();
    let ir = lower_to_ir(&g, &[]).unwrap();
    let r2 = reduce_register_pressure(&ir, 2);
    assert!(r2.count(|i| matches!(i, Inst::Spill { .. })) >= 1, "{r2}");
    assert!(compute_liveness(&r2).maxlive <= compute_liveness(&reduce_register_pressure(&ir, 1)).maxlive);
    let mut rng = rng(13);
    for _ in 0..10 {
        let params = sample_params(g.program(), &[("N", 1, 8), ("M", 0, 5), ("x", -3, 3)], &mut rng);
        let arrays = random_arrays(g.program(), &params, &mut rng);
        let expect = run_source(g.program(), &params, &arrays);
        assert_eq!(run_lowered(&g, &["regpressure-2".to_string()], &params, &arrays), expect);
    }
}

#[test]
fn trails() {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    assert_eq!(trail(&s(&["cse-0", "cse-1"]), true), "(1) (2) (2) (4a) (3a)");
    assert_eq!(trail(&s(&["granularity", "cse-0", "cse-1"]), true), "(1) (3b) (2) (2) (4a)");
    assert_eq!(trail(&s(&["granularity", "caching-off", "regpressure-1"]), false), "(3b) (4b)");
}
