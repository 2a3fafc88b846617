use std::collections::BTreeMap;

use compkern::algebra::*;
use proptest::prelude::*;

fn c(s: &str) -> Constraint {
    Constraint::parse(s).unwrap()
}

fn sys(cs: &[&str]) -> ConstraintSystem {
    cs.iter().fold(ConstraintSystem::new(), |s, x| s.push(c(x)))
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn default_box() -> ParamBox {
    ParamBox::new()
        .with("B0", 1, 32)
        .with("B1", 1, 32)
        .with("B", 1, 32)
        .with("s", 1, 32)
        .with("T", 0, 1024)
        .with("R", 0, 64)
        .with("Z_B", 0, 16384)
}

fn check(s: &ConstraintSystem) -> Verdict {
    s.check(&default_box(), &SearchConfig::default()).unwrap()
}

#[test]
fn push_counts_initial_bounds() {
    let init = ConstraintSystem::init(&[], &names(&["B0", "B1", "T", "R"]));
    assert_eq!(init.len(), 4);
    let s = init.push(c("B0*B1 <= T"));
    assert_eq!(s.len(), 5);
    assert_eq!(s.push(c("B0*B1 <= T")).len(), 5);
    assert_eq!(s.push(c("T >= B1*B0")).len(), 5);
    assert_eq!(init.len(), 4);
}

#[test]
fn init_bounds_performance_params() {
    let s = ConstraintSystem::init(&names(&["P"]), &names(&["R"]));
    assert_eq!(s.to_strings(&[]), ["0 <= P", "P <= 1", "0 <= R"]);
}

#[test]
fn figure_two_first_case_consistent() {
    let s = sys(&["B0*B1 <= T", "14 <= R"]);
    let Verdict::Consistent(w) = check(&s) else { panic!() };
    for k in s.constraints() {
        assert!(k.holds(&w).unwrap());
    }
}

#[test]
fn register_contradiction() {
    let s = sys(&["10 <= R"]).push(c("R < 10"));
    assert!(check(&s).is_inconsistent());
}

#[test]
fn shared_memory_contradiction_is_pairwise() {
    let s = sys(&["2*B + 2 <= Z_B", "Z_B < 2*B + 2"]);
    assert_eq!(check(&s), Verdict::Inconsistent(Reason::PairwiseContradiction));
}

#[test]
fn interval_contradiction() {
    let s = sys(&["B0*B1 >= 2000"]);
    assert_eq!(check(&s), Verdict::Inconsistent(Reason::IntervalContradiction));
}

#[test]
fn exhausted_box() {
    // 3*B0 = 2*B1 + 1 has solutions, 3*B0 = 6*B1 + 1 has none
    assert!(check(&sys(&["3*B0 = 2*B1 + 1"])).is_consistent());
    let s = sys(&["3*B0*s = 6*B1*s + s"]);
    assert_eq!(check(&s), Verdict::Inconsistent(Reason::ExhaustedBox));
}

#[test]
fn budget_exceeded_is_unknown() {
    let s = sys(&["B0*B1*s*B = 1000003"]);
    let cfg = SearchConfig { budget: 50, random_samples: 10, seed: 1 };
    assert!(matches!(s.check(&default_box(), &cfg).unwrap(), Verdict::Unknown { .. }));
}

#[test]
fn unbounded_variable_is_error() {
    let s = sys(&["x <= 3"]);
    assert_eq!(
        s.check(&default_box(), &SearchConfig::default()),
        Err(AlgebraError::UnboundedVariable("x".into()))
    );
}

#[test]
fn rational_parameter_is_solved() {
    let bx = ParamBox::new().with("R", 0, 64).with_real("P");
    let s = ConstraintSystem::init(&names(&["P"]), &names(&["R"]))
        .push(c("R*P >= 3"))
        .push(c("P < 1/2"));
    let v = s.check(&bx, &SearchConfig::default()).unwrap();
    let Verdict::Consistent(w) = v else { panic!("{v:?}") };
    assert!(w["P"] < rat(1) / rat(2));
    assert!(&w["R"] * &w["P"] >= rat(3));
}

#[test]
fn rational_bounds_refute_without_enumeration() {
    let bx = ParamBox::new().with("RF", 0, 32768).with_real("O");
    let s = ConstraintSystem::init(&names(&["O"]), &names(&["RF"]))
        .push(c("13824*O < RF"))
        .push(c("RF <= 6144*O"));
    let cfg = SearchConfig { budget: 10, random_samples: 0, ..SearchConfig::default() };
    let v = s.check(&bx, &cfg).unwrap();
    assert!(matches!(v, Verdict::Inconsistent(_)), "{v:?}");
}

#[test]
fn implied_constraint() {
    let s = sys(&["2*s*B + 2 <= Z_B"]);
    assert!(s.implies(&c("2*B + 2 <= Z_B"), &default_box(), &SearchConfig::default()).unwrap());
    assert!(!s.implies(&c("Z_B >= 4*B"), &default_box(), &SearchConfig::default()).unwrap());
}

/// Every point of a small box, checked directly.
fn brute_force(cs: &[Constraint], bx: &BTreeMap<String, (i64, i64)>) -> bool {
    let vars: Vec<&String> = bx.keys().collect();
    let mut env: BTreeMap<String, i64> = bx.iter().map(|(k, v)| (k.clone(), v.0)).collect();
    loop {
        if cs.iter().all(|k| k.holds_int(&env).unwrap()) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == vars.len() {
                return false;
            }
            let (lo, hi) = bx[vars[i]];
            let x = env.get_mut(vars[i]).unwrap();
            if *x < hi {
                *x += 1;
                break;
            }
            *x = lo;
            i += 1;
        }
    }
}

fn arb_poly() -> impl Strategy<Value = String> {
    let term = (-4i64..=4, prop::sample::subsequence(vec!["x", "y", "z", "x"], 0..=2))
        .prop_map(|(k, vs)| {
            let mut parts = vec![k.to_string()];
            parts.extend(vs.iter().map(|s| s.to_string()));
            parts.join("*")
        });
    prop::collection::vec(term, 1..4).prop_map(|ts| ts.join(" + "))
}

fn arb_constraint() -> impl Strategy<Value = String> {
    (arb_poly(), prop::sample::select(vec!["<=", "<", ">=", ">", "="]), -20i64..20)
        .prop_map(|(p, op, k)| format!("{p} {op} {k}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn verdict_matches_exhaustive_oracle(cs in prop::collection::vec(arb_constraint(), 1..4)) {
        let cs: Vec<Constraint> = cs.iter().map(|s| c(s)).collect();
        let bx: BTreeMap<String, (i64, i64)> =
            [("x", (0, 7)), ("y", (1, 9)), ("z", (0, 5))].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let pb = ParamBox { ints: bx.clone(), reals: Default::default() };
        let v = check_consistency(&cs, &pb, &SearchConfig::default()).unwrap();
        let expect = brute_force(&cs, &bx);
        match &v {
            Verdict::Consistent(w) => {
                prop_assert!(expect);
                for k in &cs {
                    prop_assert!(k.holds(w).unwrap());
                }
                for (n, (lo, hi)) in &bx {
                    prop_assert!(w[n] >= rat(*lo) && w[n] <= rat(*hi));
                }
            }
            Verdict::Inconsistent(_) => prop_assert!(!expect),
            Verdict::Unknown { .. } => prop_assert!(false, "budget covers the box"),
        }
    }

    #[test]
    fn separated_bounds_are_pairwise(p in arb_poly(), a in -30i64..30, gap in 1i64..10) {
        let q = Poly::from_expr(&compkern::dsl::parse_expr(&p).unwrap()).unwrap();
        prop_assume!(!q.is_constant());
        let s = ConstraintSystem::new()
            .push(Constraint::lt(q.clone(), Poly::int(a)))
            .push(Constraint::le(Poly::int(a + gap), q));
        let bx = ParamBox::new().with("x", 0, 7).with("y", 1, 9).with("z", 0, 5);
        prop_assert_eq!(
            s.check(&bx, &SearchConfig { budget: 0, random_samples: 0, seed: 0 }).unwrap(),
            Verdict::Inconsistent(Reason::PairwiseContradiction)
        );
    }

    #[test]
    fn add_then_subtract_is_identity(p in arb_poly(), q in arb_poly()) {
        let p = Poly::from_expr(&compkern::dsl::parse_expr(&p).unwrap()).unwrap();
        let q = Poly::from_expr(&compkern::dsl::parse_expr(&q).unwrap()).unwrap();
        prop_assert_eq!(&(&p + &q) - &q, p);
    }

    #[test]
    fn difference_form_matches(p in arb_poly(), q in arb_poly()) {
        prop_assert_eq!(c(&format!("({p}) - ({q}) <= 0")), c(&format!("{p} <= {q}")));
    }
}
