use std::collections::BTreeSet;

use compkern::dsl::{classify_parameters, parse, program_to_string, LoopRole, StmtKind};
use proptest::prelude::*;

fn kernel(name: &str) -> String {
    std::fs::read_to_string(format!("{}/kernels/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn names(v: &[String]) -> BTreeSet<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

#[test]
fn jacobi_shape() {
    let p = parse(&kernel("jacobi.mfk")).unwrap();
    let nest = p.nest().unwrap();
    assert_eq!(nest.grid_loops().count(), 1);
    assert_eq!(nest.thread_loops().count(), 1);
    let mut serial = 0;
    nest.body.walk(&mut |s| {
        if matches!(s.kind, StmtKind::For { .. }) {
            serial += 1;
        }
    });
    assert_eq!(serial, 1);
    let t = classify_parameters(&p).unwrap();
    assert_eq!(names(&t.data_params), ["N", "T_steps"].into());
    assert_eq!(names(&t.program_params), ["B", "s"].into());
    assert_eq!(t.arrays.len(), 1);
    assert_eq!(t.arrays[0].name, "a");
}

#[test]
fn transpose_shape() {
    let p = parse(&kernel("transpose.mfk")).unwrap();
    let nest = p.nest().unwrap();
    assert_eq!(nest.loops.len(), 4);
    assert_eq!(
        nest.loops.iter().map(|l| l.role).collect::<Vec<_>>(),
        [LoopRole::Grid, LoopRole::Grid, LoopRole::Thread, LoopRole::Thread]
    );
    assert_eq!(names(&nest.cache), ["a", "c"].into());
    let t = classify_parameters(&p).unwrap();
    assert_eq!(names(&t.data_params), ["N"].into());
    assert_eq!(names(&t.program_params), ["B0", "B1", "s"].into());
}

#[test]
fn addition_params() {
    let t = classify_parameters(&parse(&kernel("addition.mfk")).unwrap()).unwrap();
    assert_eq!(names(&t.data_params), ["N"].into());
    assert_eq!(names(&t.program_params), ["B0", "B1"].into());
    assert_eq!(t.constant("g"), Some(2));
}

#[test]
fn shipped_kernels_round_trip() {
    for k in ["jacobi.mfk", "transpose.mfk", "addition.mfk"] {
        let p = parse(&kernel(k)).unwrap();
        let text = program_to_string(&p);
        assert_eq!(parse(&text).unwrap(), p, "{k}:\n{text}");
    }
}

fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0i64..50).prop_map(|n| n.to_string()),
        prop::sample::select(vec!["n", "B", "i", "j"]).prop_map(String::from),
        (prop::sample::select(vec!["i", "j", "n"]))
            .prop_map(|v| format!("a[{v}]")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        (
            inner.clone(),
            prop::sample::select(vec!["+", "-", "*", "/", "%", "<", "==", "&&"]),
            inner,
        )
            .prop_map(|(l, op, r)| format!("({l} {op} {r})"))
    })
}

proptest! {
    #[test]
    fn round_trip(e in arb_expr(), c in arb_expr()) {
        let src = format!(
            "int n; int B; int a[n]; meta_schedule {{ meta_for (int i = 0; i < n; i++) meta_for (int j = 0; j < B; j++) {{ int x = {e}; if ({c}) a[i] = x; else {{ a[j] += 1; }} }} }}"
        );
        let p = parse(&src).unwrap();
        let text = program_to_string(&p);
        let q = parse(&text).unwrap();
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(program_to_string(&q), text);
    }
}
