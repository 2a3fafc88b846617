mod common;

use std::collections::BTreeSet;

use common::*;
use compkern::dsl::parse;
use compkern::model::ir::IrBlock;
use compkern::model::*;
use compkern::strategies::apply_source;
use proptest::prelude::*;

fn terms(g: &SourceCfg) -> (usize, usize, usize) {
    let mut n = (0, 0, 0);
    for b in &g.blocks {
        match b.term {
            SrcTerm::Loop { .. } => n.0 += 1,
            SrcTerm::Branch { .. } => n.1 += 1,
            SrcTerm::Exit => n.2 += 1,
            _ => {}
        }
    }
    n
}

fn body(src: &str) -> SourceCfg {
    build_source_cfg(&parse(src).unwrap()).unwrap()
}

#[test]
fn jacobi_cfg_has_loop_and_diamond() {
    let g = load("jacobi");
    assert_eq!(terms(&g), (1, 1, 1));
    let SrcTerm::Loop { var, .. } = &g.blocks.iter().find(|b| matches!(b.term, SrcTerm::Loop { .. })).unwrap().term
    else {
        unreachable!()
    };
    assert_eq!(var, "k");
    assert!(g.reachable().iter().all(|r| *r));
}

#[test]
fn transpose_cfg_has_loop_only() {
    let g = load("transpose");
    assert_eq!(terms(&g), (1, 0, 1));
}

#[test]
fn straight_line_body_is_one_block() {
    let g = body("int N; int a[N]; meta_schedule { meta_for (int i = 0; i < N; i++) { int x = i * 2; a[i] = x; } }");
    assert_eq!(g.blocks.len(), 1);
    assert_eq!(g.blocks[0].stmts.len(), 2);
}

#[test]
fn reconstruction_gives_the_same_graph() {
    for k in ["jacobi", "transpose", "addition"] {
        let g = load(k);
        let again = build_source_cfg(&g.reconstruct()).unwrap();
        assert_eq!(again.shape(), g.shape(), "{k}");
        assert_eq!(again.body_stmts(), g.body_stmts(), "{k}");
    }
}

#[test]
fn addition_lowering_counts() {
    // Two statements, each two element loads, one element add, one store.
    let g = body(
        "int N; int a[N*N]; int b[N*N]; int c[N*N];
         meta_schedule { meta_for (int i = 0; i < N; i++) meta_for (int j = 0; j < N; j++) {
           a[i*N+j] = b[i*N+j] + c[i*N+j];
           a[i*N+j+1] = b[i*N+j+1] + c[i*N+j+1]; } }",
    );
    let ir = lower_to_ir(&g, &[]).unwrap();
    assert_eq!(ir.count(|i| matches!(i, Inst::Load { .. })), 4);
    assert_eq!(ir.count(|i| matches!(i, Inst::Store { .. })), 2);
    let loaded: BTreeSet<Reg> = ir.blocks[0].insts.iter().filter(|i| matches!(i, Inst::Load { .. })).filter_map(Inst::def).collect();
    let element_adds = ir.count(|i| match i {
        Inst::Bin { op: IrOp::Add, a: Operand::Reg(a), .. } => loaded.contains(a),
        _ => false,
    });
    assert_eq!(element_adds, 2);
}

#[test]
fn empty_body_lowers_to_a_single_returning_block() {
    let g = body("int N; meta_schedule { meta_for (int i = 0; i < N; i++) { } }");
    let ir = lower_to_ir(&g, &[]).unwrap();
    assert_eq!(ir.blocks.len(), 1);
    assert_eq!(ir.inst_count(), 0);
    assert_eq!(ir.blocks[0].term, Term::Return);
    assert_eq!(compute_liveness(&ir).maxlive, 0);
}

#[test]
fn lowering_is_deterministic() {
    for k in ["jacobi", "transpose", "addition"] {
        let g = load(k);
        for applied in [vec![], vec!["regpressure-1".to_string()]] {
            let a = lower_to_ir(&g, &applied).unwrap();
            let b = lower_to_ir(&load(k), &applied).unwrap();
            assert_eq!(a.to_string(), b.to_string());
        }
    }
}

#[test]
fn unknown_strategy_is_rejected() {
    let g = load("jacobi");
    assert_eq!(
        lower_to_ir(&g, &["unroll".to_string()]),
        Err(ModelError::UnknownStrategy("unroll".into()))
    );
}

#[test]
fn liveness_hand_oracle() {
    // %1 = add %0, 1: %0 is live before, nothing after; %1 is defined but
    // dead, so the widest point holds one register.
    let mut b = IrBlock::new();
    b.push(Inst::Bin { dst: Reg(1), op: IrOp::Add, a: Operand::Reg(Reg(0)), b: Operand::Imm(1) }, None);
    let ir = IrCfg { blocks: vec![b], entry: 0, next_reg: 2 };
    let l = compute_liveness(&ir);
    assert_eq!(l.points[0], vec![BTreeSet::from([Reg(0)]), BTreeSet::new()]);
    assert_eq!(l.maxlive, 1);

    let empty = IrCfg { blocks: vec![IrBlock::new()], entry: 0, next_reg: 0 };
    assert_eq!(compute_liveness(&empty).maxlive, 0);
}

#[test]
fn granularity_lowers_registers_on_addition() {
    let g = load("addition");
    let k1 = compute_liveness(&lower_to_ir(&g, &[]).unwrap()).maxlive;
    let k2 = compute_liveness(&lower_to_ir(&apply_source("granularity", &g).unwrap(), &[]).unwrap()).maxlive;
    assert!(k1 > k2, "{k1} vs {k2}");
}

#[test]
fn maxlive_bounds_every_live_in_set() {
    for k in ["jacobi", "transpose", "addition"] {
        let l = compute_liveness(&lower_to_ir(&load(k), &[]).unwrap());
        assert!(l.live_in.iter().all(|s| s.len() <= l.maxlive));
    }
}

#[test]
fn repeating_an_ir_strategy_keeps_maxlive() {
    let g = load("jacobi");
    for id in ["regpressure-0", "regpressure-1", "regpressure-2"] {
        let once = lower_to_ir(&g, &[id.to_string()]).unwrap();
        let twice = lower_to_ir(&g, &[id.to_string(), id.to_string()]).unwrap();
        assert_eq!(compute_liveness(&once).maxlive, compute_liveness(&twice).maxlive);
    }
}

#[test]
fn ir_matches_source_semantics() {
    let mut rng = rng(5);
    for k in ["jacobi", "transpose", "addition"] {
        let g = load(k);
        for _ in 0..10 {
            let params = sample_params(g.program(), &ranges(k), &mut rng);
            let arrays = random_arrays(g.program(), &params, &mut rng);
            assert_eq!(run_lowered(&g, &[], &params, &arrays), run_source(g.program(), &params, &arrays), "{k}");
        }
    }
}

proptest! {
    #[test]
    fn liveness_ignores_visit_order(seed in any::<u64>(), k in 0usize..3) {
        let name = ["jacobi", "transpose", "addition"][k];
        let ir = lower_to_ir(&load(name), &[]).unwrap();
        let mut order: Vec<usize> = (0..ir.blocks.len()).collect();
        let mut r = rng(seed);
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut r);
        prop_assert_eq!(compute_liveness_in_order(&ir, &order), compute_liveness(&ir));
    }

    #[test]
    fn extending_a_live_range_never_lowers_maxlive(k in 0usize..3, at in 0usize..64) {
        // Re-reading an early register just before the end keeps it alive
        // over more points.
        let name = ["jacobi", "transpose", "addition"][k];
        let mut ir = lower_to_ir(&load(name), &[]).unwrap();
        let before = compute_liveness(&ir).maxlive;
        let defs: Vec<Reg> = ir.blocks[0].insts.iter().filter_map(Inst::def).collect();
        prop_assume!(!defs.is_empty());
        let r = defs[at % defs.len()];
        let last = ir.blocks.iter().position(|b| b.term == Term::Return).unwrap();
        ir.blocks[last].push(Inst::Store { array: "sink".into(), index: Operand::Imm(0), value: Operand::Reg(r) }, None);
        prop_assert!(compute_liveness(&ir).maxlive >= before);
    }
}
