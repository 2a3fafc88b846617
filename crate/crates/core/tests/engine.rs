mod common;

use std::collections::{BTreeMap, BTreeSet};

use compkern::algebra::{Constraint, ConstraintSystem, Poly};
use compkern::engine::{
    comprehensive_optimize, optimize_step, run, split, verify_coverage, verify_optimality, verify_witnesses, EdgeKind,
    Quintuple, Setup,
};
use compkern::machine::MachineSpec;

fn set(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn spec(counters: &str, order: &str) -> MachineSpec {
    MachineSpec::parse(&format!(
        r#"
[machine]
name = "toy"

[[param]]
name = "Z_B"
kind = "resource-limit"
max = 16384

[[param]]
name = "R_B"
kind = "resource-limit"
max = 64

[[param]]
name = "T_B"
kind = "resource-limit"
max = 1024

{counters}

[strategies]
order = {order}
"#
    ))
    .unwrap()
}

#[test]
fn addition_has_two_cases() {
    let g = common::load("addition");
    let (setup, out) = run(&g, &common::machine("addition")).unwrap();
    assert_eq!(out.cases.len(), 2);
    let order = setup.var_order();
    let c0: BTreeSet<String> = out.cases[0].system.to_strings(&order).into_iter().collect();
    let c1: BTreeSet<String> = out.cases[1].system.to_strings(&order).into_iter().collect();
    assert!(c0.contains("B0*B1 <= T") && c1.contains("B0*B1 <= T"));
    assert!(c0.contains("12 <= R"));
    assert!(c1.contains("7 <= R") && c1.contains("R < 12"));
    assert!(out.cases[0].applied.is_empty());
    assert_eq!(out.cases[1].applied, ["granularity"]);
    assert_eq!(out.tree.count(EdgeKind::Refuse), 1);
    let refuse = out.tree.edges.iter().find(|e| e.kind == EdgeKind::Refuse).unwrap();
    assert_eq!(refuse.constraints[0].to_string_ordered(&order), "R < 12");
}

#[test]
fn jacobi_reproduces_three_shared_memory_systems() {
    let g = common::load("jacobi");
    let (setup, out) = run(&g, &common::machine("fermi")).unwrap();
    let got: BTreeSet<BTreeSet<String>> =
        out.cases.iter().map(|c| common::projection(&c.system, "Z_B", &setup)).collect();
    let want: BTreeSet<BTreeSet<String>> = [
        set(&["2*s*B + 2 <= Z_B"]),
        set(&["2*B + 2 <= Z_B", "Z_B < 2*s*B + 2"]),
        set(&["Z_B < 2*B + 2"]),
    ]
    .into_iter()
    .collect();
    assert_eq!(got, want);
    assert!(out.tree.leaves().len() >= 3);
    assert!(out.tree.count(EdgeKind::Refuse) >= 2);
    let last = out.cases.iter().find(|c| c.g.cache().is_empty()).unwrap();
    assert_eq!(last.applied, ["granularity", "caching-off"]);
}

#[test]
fn empty_counter_roster_gives_the_original_program() {
    let g = common::load("addition");
    let s = spec("", "[\"granularity\"]");
    let setup = Setup::new(&g, &s);
    let q = Quintuple::initial(g.clone(), &setup);
    assert!(q.is_processed());
    let out = comprehensive_optimize(q.clone(), &setup).unwrap();
    assert_eq!(out.cases.len(), 1);
    assert_eq!(out.tree.nodes.len(), 1);
    assert_eq!(out.cases[0].system, q.c);
    assert_eq!(out.cases[0].g.to_source(), g.to_source());
}

#[test]
fn no_strategy_left_keeps_only_accept() {
    let g = common::load("jacobi");
    let s = spec(
        "[[counter]]\nid = \"threads\"\nmeasure = \"threads-per-block\"\nbound = \"T_B\"\nsigma = [\"granularity\"]",
        "[]",
    );
    let setup = Setup::new(&g, &s);
    let q = Quintuple::initial(g, &setup);
    let r = optimize_step(&q, &setup).unwrap();
    assert_eq!(r.len(), 1);
    assert!(r[0].c.contains(&Constraint::le(Poly::var("B"), Poly::var("T_B"))));
}

#[test]
fn ineffective_strategy_is_pruned_after_replay() {
    // caching does not change the thread count, so the refuse branch
    // contradicts itself once the counter is evaluated again
    let g = common::load("jacobi");
    let s = spec(
        "[[counter]]\nid = \"threads\"\nmeasure = \"threads-per-block\"\nbound = \"T_B\"\nsigma = [\"caching-off\"]",
        "[\"caching-off\"]",
    );
    let setup = Setup::new(&g, &s);
    let q = Quintuple::initial(g, &setup);
    let sp = split(&q, &setup).unwrap();
    let (_, sid, r, _) = sp.refuse.clone().unwrap();
    assert_eq!(sid, "caching-off");
    assert_eq!(r.gamma, ["threads"]);
    let again = split(&r, &setup).unwrap();
    assert!(again.accept.is_none());
    assert!(again.refuse.is_none());
    assert_eq!(optimize_step(&q, &setup).unwrap().len(), 1);
}

#[test]
fn replay_puts_the_refused_counter_on_top() {
    let g = common::load("jacobi");
    let setup = Setup::new(&g, &common::machine("fermi"));
    let q = Quintuple::initial(g, &setup);
    assert_eq!(q.gamma, ["shared-words", "registers", "threads-per-block"]);
    // accept shared memory, then refuse registers
    let a = split(&q, &setup).unwrap().accept.unwrap().1;
    let (_, sid, r, _) = split(&a, &setup).unwrap().refuse.unwrap();
    assert_eq!(sid, "granularity");
    assert_eq!(r.gamma, ["registers", "shared-words", "threads-per-block"]);
    assert_eq!(r.omega.len(), setup.roster.len() - 1);
    assert!(r.lambda.is_empty());
}

#[test]
fn ir_strategies_extend_lambda() {
    let g = common::load("jacobi");
    let s = spec(
        "[[counter]]\nid = \"registers\"\nmeasure = \"registers\"\nbound = \"R_B\"\nsigma = [\"regpressure-1\"]",
        "[\"regpressure-1\"]",
    );
    let (_, out) = run(&g, &s).unwrap();
    assert_eq!(out.cases.len(), 2);
    assert_eq!(out.cases[1].lambda, ["regpressure-1"]);
    assert_eq!(out.cases[1].applied, ["regpressure-1"]);
}

fn check_tree_labels(name: &str) {
    let g = common::load(name);
    let (setup, out) = run(&g, &common::machine("fermi")).unwrap();
    let t = &out.tree;
    for e in &t.edges {
        let (p, c) = (&t.nodes[e.from], &t.nodes[e.to]);
        let expect = e.constraints.iter().fold(p.state.c.clone(), |s, k| s.push(k.clone()));
        assert_eq!(c.state.c, expect);
        match e.kind {
            EdgeKind::Accept => {
                assert_eq!(c.state.omega, p.state.omega);
                assert_eq!(c.state.gamma.len() + 1, p.state.gamma.len());
                assert!(e.strategy.is_none());
            }
            EdgeKind::Refuse => {
                assert_eq!(c.state.omega.len() + 1, p.state.omega.len());
                assert!(e.strategy.is_some());
            }
        }
    }
    // siblings exclude each other
    for n in &t.nodes {
        if let (Some(a), Some(r)) = (t.child(n.id, EdgeKind::Accept), t.child(n.id, EdgeKind::Refuse)) {
            let both = a.constraints.iter().chain(&r.constraints).fold(n.state.c.clone(), |s, k| s.push(k.clone()));
            assert!(both.check(&setup.bx, &setup.search).unwrap().is_inconsistent());
        }
    }
}

#[test]
fn tree_labels_follow_the_edges() {
    for k in ["jacobi", "transpose", "addition"] {
        check_tree_labels(k);
    }
}

#[test]
fn runs_are_deterministic() {
    for k in ["jacobi", "transpose"] {
        let g = common::load(k);
        let (setup, a) = run(&g, &common::machine("fermi")).unwrap();
        let (_, b) = run(&g, &common::machine("fermi")).unwrap();
        let order = setup.var_order();
        let sig = |o: &compkern::engine::Outcome| {
            o.cases
                .iter()
                .map(|c| (c.system.to_strings(&order), c.trail.clone(), c.g.to_source()))
                .collect::<Vec<_>>()
        };
        assert_eq!(sig(&a), sig(&b));
    }
}

#[test]
fn every_case_has_a_valid_witness() {
    for k in ["jacobi", "transpose", "addition"] {
        let g = common::load(k);
        let (_, out) = run(&g, &common::machine("fermi")).unwrap();
        assert!(verify_witnesses(&out.cases).is_ok(), "{k}");
    }
}

#[test]
fn coverage_of_the_addition_cases() {
    let g = common::load("addition");
    let (setup, out) = run(&g, &common::machine("addition")).unwrap();
    let r = verify_coverage(&out.cases, &setup, 200, 1, &BTreeMap::new()).unwrap();
    assert!(r.is_ok());
    // N=1024, B0=16, B1=8 fits the first case with T >= 128 and R >= 12
    let point: BTreeMap<String, compkern::algebra::Rat> = [("N", 1024), ("B0", 16), ("B1", 8), ("T", 128), ("R", 12)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), compkern::algebra::rat(v)))
        .collect();
    assert!(out.cases[0].system.constraints().iter().all(|c| c.holds(&point).unwrap()));
    let mut low = point.clone();
    low.insert("T".into(), compkern::algebra::rat(127));
    assert!(!out.cases[0].system.constraints().iter().all(|c| c.holds(&low).unwrap()));
}

#[test]
fn dropping_the_uncached_case_leaves_small_shared_memory_uncovered() {
    let g = common::load("jacobi");
    let (setup, out) = run(&g, &common::machine("fermi")).unwrap();
    let fixed: BTreeMap<String, i64> = [("Z_B", 3), ("R_B", 64), ("T_B", 1024)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let all = verify_coverage(&out.cases, &setup, 50, 2, &fixed).unwrap();
    assert!(all.is_ok());
    let kept: Vec<_> = out.cases.iter().filter(|c| !c.g.cache().is_empty()).cloned().collect();
    let r = verify_coverage(&kept, &setup, 50, 2, &fixed).unwrap();
    assert_eq!(r.uncovered.len(), 50);
}

#[test]
fn every_counter_is_optimal_somewhere() {
    let g = common::load("jacobi");
    let (setup, out) = run(&g, &common::machine("fermi")).unwrap();
    let r = verify_optimality(&out.cases, &setup).unwrap();
    assert!(r.is_ok(), "{:?}", r.failures());
    let shared = r.optimal_at.iter().find(|(id, _)| id == "shared-words").unwrap().1.unwrap();
    assert!(out.cases[shared].g.cache().is_empty());
}

#[test]
fn single_strategy_toy_applies_it_on_the_refuse_path() {
    let g = common::load("addition");
    let (setup, out) = run(&g, &common::machine("addition")).unwrap();
    let r = verify_optimality(&out.cases, &setup).unwrap();
    assert!(r.is_ok());
    let leaf = compkern::engine::walk_subset(&out.tree, &["granularity".to_string()]).unwrap();
    assert_eq!(out.tree.nodes[leaf].state.applied, ["granularity"]);
}

#[test]
fn initial_system_bounds_every_parameter_below() {
    let g = common::load("transpose");
    let setup = Setup::new(&g, &common::machine("fermi"));
    let q = Quintuple::initial(g, &setup);
    let want = ["Z_B", "R_B", "T_B", "N", "s", "B0", "B1"]
        .iter()
        .fold(ConstraintSystem::new(), |s, v| s.push(Constraint::le(Poly::zero(), Poly::var(v))));
    assert_eq!(q.c, want);
    assert!(q.lambda.is_empty());
    assert_eq!(q.omega, setup.roster);
}
