#![allow(dead_code)]

pub mod footprint;

use std::path::PathBuf;

use compkern::dsl::{parse, Program};
use compkern::interp::{array_sizes, check_asserts, run_program, run_program_with, Arrays, Scalars};
use compkern::model::{build_source_cfg, lower_to_ir, run_ir, SourceCfg};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn kernel_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("kernels").join(format!("{name}.mfk"))
}

pub fn load(name: &str) -> SourceCfg {
    let src = std::fs::read_to_string(kernel_path(name)).unwrap();
    build_source_cfg(&parse(&src).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small parameter ranges used for executing the shipped kernels.
pub fn ranges(name: &str) -> Vec<(&'static str, i64, i64)> {
    match name {
        "jacobi" => vec![("T_steps", 1, 3), ("N", 3, 64), ("s", 1, 4), ("B", 1, 8)],
        "transpose" => vec![("N", 1, 64), ("s", 1, 4), ("B0", 1, 8), ("B1", 1, 8)],
        "addition" => vec![("N", 1, 64), ("B0", 1, 8), ("B1", 1, 8)],
        _ => panic!("no ranges for {name}"),
    }
}

/// Rejection-samples parameters that pass the unit's asserts.
pub fn sample_params(p: &Program, ranges: &[(&str, i64, i64)], rng: &mut ChaCha8Rng) -> Scalars {
    for _ in 0..100_000 {
        let params: Scalars = ranges.iter().map(|(n, lo, hi)| (n.to_string(), rng.gen_range(*lo..=*hi))).collect();
        if check_asserts(p, &params).unwrap_or(false) {
            return params;
        }
    }
    panic!("no parameters satisfy the asserts");
}

pub fn random_arrays(p: &Program, params: &Scalars, rng: &mut ChaCha8Rng) -> Arrays {
    array_sizes(p, params)
        .unwrap()
        .into_iter()
        .map(|(n, len)| (n, (0..len).map(|_| rng.gen_range(-1000..1000)).collect()))
        .collect()
}

pub fn run_source(p: &Program, params: &Scalars, arrays: &Arrays) -> Arrays {
    run_program(p, params, arrays.clone()).unwrap()
}

/// Runs the unit with each thread executed from the IR of `g` after the
/// IR-level strategies in `applied`.
pub fn run_lowered(g: &SourceCfg, applied: &[String], params: &Scalars, arrays: &Arrays) -> Arrays {
    let ir = lower_to_ir(g, applied).unwrap();
    run_program_with(g.program(), params, arrays.clone(), &mut |scalars, arrays| run_ir(&ir, scalars, arrays)).unwrap()
}

pub fn machine(name: &str) -> compkern::machine::MachineSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("machines").join(format!("{name}.machine"));
    compkern::machine::MachineSpec::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Constraints of `system` mentioning `var`, minus those implied by the
/// rest of the system, as canonical strings.
pub fn projection(
    system: &compkern::algebra::ConstraintSystem,
    var: &str,
    setup: &compkern::engine::Setup,
) -> std::collections::BTreeSet<String> {
    use compkern::algebra::ConstraintSystem;
    let mut kept: Vec<compkern::algebra::Constraint> =
        system.constraints().iter().filter(|c| c.mentions(var)).cloned().collect();
    let others: Vec<_> = system.constraints().iter().filter(|c| !c.mentions(var)).cloned().collect();
    let mut i = 0;
    while i < kept.len() {
        let rest = others
            .iter()
            .chain(kept.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c))
            .fold(ConstraintSystem::new(), |s, c| s.push(c.clone()));
        if rest.implies(&kept[i], &setup.bx, &setup.search).unwrap() {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    let order = setup.var_order();
    kept.iter().map(|c| c.to_string_ordered(&order)).collect()
}
