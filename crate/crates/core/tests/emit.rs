mod common;

use std::collections::BTreeSet;

use compkern::dsl::parse;
use compkern::emit::{artifacts, emit_kernel, emit_report, tree_json, EmitError, EmitOptions, KernelOptions};
use compkern::engine::run;
use compkern::machine::MachineSpec;
use compkern::model::build_source_cfg;

fn outputs(name: &str, machine: &str) -> Vec<(String, String)> {
    let g = common::load(name);
    let spec = common::machine(machine);
    let (setup, out) = run(&g, &spec).unwrap();
    artifacts(name, &setup, &out, &EmitOptions::for_machine(&spec)).unwrap()
}

fn file<'a>(files: &'a [(String, String)], name: &str) -> &'a str {
    &files.iter().find(|(f, _)| f == name).unwrap().1
}

fn balanced(text: &str) -> bool {
    let mut depth: i64 = 0;
    for c in text.chars() {
        match c {
            '{' | '(' | '[' => depth += 1,
            '}' | ')' | ']' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return false;
        }
    }
    depth == 0
}

const KNOWN: &[&str] = &[
    "include", "assert", "h", "define", "ifndef", "endif", "error", "int", "const", "void", "for", "if", "else", "while",
    "return", "__global__", "__device__", "__forceinline__", "__shared__", "extern", "__syncthreads", "threadIdx",
    "blockIdx", "blockDim", "x", "y", "dim3", "sizeof", "min", "GRID_STRIDE", "GRID_CAP", "SHARED_WORDS",
];

/// Identifiers used without a declaration: names after `int`, `#define`
/// and function definitions count as declared.
fn undeclared(text: &str) -> BTreeSet<String> {
    let code: String = text.lines().filter(|l| !l.trim_start().starts_with("#error")).collect::<Vec<_>>().join("\n");
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in code.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            cur.push(c);
        } else {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            if c == '*' {
                tokens.push("*".into());
            }
        }
    }
    let mut declared: BTreeSet<String> = KNOWN.iter().map(|s| s.to_string()).collect();
    for w in tokens.windows(3) {
        if ["int", "define", "void", "ifndef", "dim3"].contains(&w[0].as_str()) {
            declared.insert(w[1].clone());
        }
        if w[0] == "int" && w[1] == "*" {
            declared.insert(w[2].clone());
        }
    }
    tokens
        .into_iter()
        .filter(|t| t != "*" && !t.starts_with(|c: char| c.is_ascii_digit()))
        .filter(|t| !declared.contains(t))
        .collect()
}

#[test]
fn addition_kernels_follow_the_two_variants() {
    let files = outputs("addition", "addition");
    let k0 = file(&files, "addition.case0.cu");
    let k1 = file(&files, "addition.case1.cu");
    assert_eq!(k0.matches("c[i * N + j] =").count(), 2);
    assert_eq!(k1.matches("c[i * N + j] =").count(), 1);
    assert!(k0.contains("dim3 dimGrid(GRID_CAP(N / (2 * B1)), GRID_CAP(N / B0));"));
    assert!(k1.contains("dim3 dimGrid(GRID_CAP(N / B1), GRID_CAP(N / B0));"));
    assert!(k0.contains("dim3 dimBlock(B1, B0);"));
    for k in [k0, k1] {
        assert!(!k.contains("__shared__") && !k.contains("__syncthreads"));
        assert!(k.contains("blockIdx.y") && k.contains("v += GRID_STRIDE"));
        assert!(k.contains("int q = threadIdx.x;"));
    }
}

#[test]
fn cached_kernels_load_and_synchronize() {
    let files = outputs("jacobi", "fermi");
    let k = file(&files, "jacobi.case0.cu");
    assert!(k.contains("extern __shared__ int shared_mem[];"));
    assert!(k.matches("__syncthreads();").count() >= 2);
    assert!(k.contains("assert(SHARED_WORDS <= Z_B);"));
    assert!(k.contains("#define SHARED_WORDS (2 * s * B + 2)"));
    assert!(k.contains("shared_mem[slot_a(p1, "));
    let plain = files.iter().find(|(_, t)| t.contains("__global__") && !t.contains("__shared__"));
    assert!(plain.is_some(), "the uncached case has no shared memory");
}

#[test]
fn kernels_are_structurally_valid() {
    for (name, machine) in [("addition", "addition"), ("jacobi", "fermi"), ("transpose", "fermi")] {
        for (f, text) in outputs(name, machine).iter().filter(|(f, _)| f.ends_with(".cu")) {
            assert!(balanced(text), "{f}");
            assert!(undeclared(text).is_empty(), "{f}: {:?}", undeclared(text));
        }
    }
}

#[test]
fn program_parameters_appear_once_in_the_signature() {
    for (name, machine) in [("addition", "addition"), ("jacobi", "fermi"), ("transpose", "fermi")] {
        let g = common::load(name);
        let (_, out) = run(&g, &common::machine(machine)).unwrap();
        for c in &out.cases {
            let k = emit_kernel(&c.g, "k", &KernelOptions::default()).unwrap();
            let sig = k.kernel.lines().next().unwrap();
            let args: Vec<&str> = sig[sig.find('(').unwrap() + 1..sig.rfind(')').unwrap()].split(", ").collect();
            for p in &c.g.params().program_params {
                assert_eq!(args.iter().filter(|a| **a == format!("int {p}")).count(), 1, "{name} {p}");
            }
            let unique: BTreeSet<&&str> = args.iter().collect();
            assert_eq!(unique.len(), args.len());
        }
    }
}

#[test]
fn shared_macro_is_the_counter_value() {
    let g = common::load("transpose");
    let spec = common::machine("fermi");
    let (_, out) = run(&g, &spec).unwrap();
    for c in out.cases.iter().filter(|c| !c.g.cache().is_empty()) {
        let words = compkern::counters::shared_words_per_block(&c.g).unwrap().value;
        let k = emit_kernel(&c.g, "k", &EmitOptions::for_machine(&spec).kernel).unwrap();
        let line = k.preamble.lines().find(|l| l.starts_with("#define SHARED_WORDS")).unwrap();
        let text = &line["#define SHARED_WORDS (".len()..line.len() - 1];
        let back = compkern::algebra::Poly::from_expr(&compkern::dsl::parse_expr(text).unwrap()).unwrap();
        assert_eq!(Some(&back), words.as_poly());
    }
}

#[test]
fn too_many_grid_loops_are_rejected() {
    let src = "int N;\nint a[N];\nmeta_schedule {\n  @grid meta_for (int i = 0; i < N; i++)\n    @grid meta_for (int j = 0; j < N; j++)\n      @grid meta_for (int k = 0; k < N; k++)\n        meta_for (int t = 0; t < N; t++)\n          a[t] = 1;\n}\n";
    let g = build_source_cfg(&parse(src).unwrap()).unwrap();
    assert_eq!(
        emit_kernel(&g, "k", &KernelOptions::default()),
        Err(EmitError::TooDeep { grid: 3, thread: 1 })
    );
}

#[test]
fn cache_free_one_dimensional_body() {
    let src = "int N, B;\nint dim = N / B;\nint a[N];\nmeta_schedule {\n  meta_for (int i = 0; i < dim; i++)\n    meta_for (int j = 0; j < B; j++)\n      a[i * B + j] = a[i * B + j] + 1;\n}\n";
    let g = build_source_cfg(&parse(src).unwrap()).unwrap();
    let k = emit_kernel(&g, "inc", &KernelOptions { grid_stride: 64, shared_limit: None }).unwrap();
    let text = k.to_source();
    assert!(!text.contains("__shared__") && !text.contains("__syncthreads"));
    assert!(text.contains("#define GRID_STRIDE 64"));
    assert!(text.contains("for (int i = blockIdx.x; i < dim; i += GRID_STRIDE)"));
    assert!(text.contains("dim3 dimGrid(GRID_CAP(N / B));"));
    assert!(undeclared(&text).is_empty());
}

#[test]
fn jacobi_report_shows_the_shared_memory_systems() {
    let files = outputs("jacobi", "fermi");
    let r = file(&files, "jacobi.report.txt");
    assert_eq!(r.matches("== case ").count(), 4);
    for want in ["2*s*B + 2 <= Z_B", "Z_B < 2*s*B + 2", "2*B + 2 <= Z_B", "Z_B < 2*B + 2"] {
        assert!(r.contains(want), "{want}");
    }
    assert!(r.contains("7 <= R_B < 14"));
    assert!(r.contains("trail: (1) (3b) (4b)"));
    assert!(!r.contains("== counter values =="));
}

#[test]
fn transposition_report_has_the_narrow_register_band() {
    let files = outputs("transpose", "fermi");
    let r = file(&files, "transpose.report.txt");
    assert!(r.contains("6 <= R_B < 7"));
    assert!(r.contains("Z_B < 2*B0*B1"));
}

#[test]
fn explain_only_changes_the_report() {
    let g = common::load("addition");
    let spec = common::machine("addition");
    let (setup, out) = run(&g, &spec).unwrap();
    let plain = EmitOptions::for_machine(&spec);
    let explained = EmitOptions { explain: true, ..plain.clone() };
    let a = artifacts("addition", &setup, &out, &plain).unwrap();
    let b = artifacts("addition", &setup, &out, &explained).unwrap();
    for ((fa, ta), (fb, tb)) in a.iter().zip(&b) {
        assert_eq!(fa, fb);
        if fa.ends_with("report.txt") {
            assert!(tb.starts_with(ta.as_str()));
            assert!(tb.contains("registers = 12"));
        } else {
            assert_eq!(ta, tb);
        }
    }
}

#[test]
fn addition_tree_export() {
    let g = common::load("addition");
    let (setup, out) = run(&g, &common::machine("addition")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&tree_json(&setup, &out)).unwrap();
    let edges = v["edges"].as_array().unwrap();
    let refuse: Vec<_> = edges.iter().filter(|e| e["kind"] == "refuse").collect();
    assert_eq!(refuse.len(), 1);
    assert_eq!(refuse[0]["constraints"][0], "R < 12");
    assert_eq!(refuse[0]["strategy"], "granularity");
    assert_eq!(v["cases"].as_array().unwrap().len(), 2);
    let root = &v["nodes"][0];
    assert_eq!(root["gamma"], serde_json::json!(["threads-per-block", "registers"]));
    assert_eq!(root["counter"], "threads-per-block");
    assert_eq!(root["value"], "B0*B1");
    let dot = compkern::emit::tree_dot(&setup, &out);
    assert_eq!(dot.matches("tailport=sw").count(), 1);
    assert!(dot.contains("R < 12"));
}

#[test]
fn empty_roster_tree_has_one_node() {
    let g = common::load("addition");
    let spec = MachineSpec::parse("[machine]\nname = \"bare\"\n\n[strategies]\norder = []\n").unwrap();
    let (setup, out) = run(&g, &spec).unwrap();
    let v: serde_json::Value = serde_json::from_str(&tree_json(&setup, &out)).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 1);
    assert!(v["edges"].as_array().unwrap().is_empty());
    let r = emit_report("addition", &setup, &out, false).unwrap();
    assert_eq!(r.matches("== case ").count(), 1);
}

#[test]
fn jacobi_tree_has_the_expected_shape() {
    let g = common::load("jacobi");
    let (setup, out) = run(&g, &common::machine("fermi")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&tree_json(&setup, &out)).unwrap();
    let leaves = v["nodes"].as_array().unwrap().iter().filter(|n| !n["case"].is_null()).count();
    let refuse = v["edges"].as_array().unwrap().iter().filter(|e| e["kind"] == "refuse").count();
    assert!(leaves >= 3 && refuse >= 2);
}

#[test]
fn artifacts_are_deterministic() {
    for (name, machine) in [("jacobi", "fermi"), ("transpose", "fermi"), ("addition", "addition")] {
        assert_eq!(outputs(name, machine), outputs(name, machine));
    }
}
