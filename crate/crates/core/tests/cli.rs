use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kernel(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("kernels").join(format!("{name}.mfk"))
}

fn machine(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("machines").join(format!("{name}.machine"))
}

fn compkern(args: &[&Path], flags: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compkern"))
        .args(args)
        .args(flags)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn jacobi_with_the_default_machine() {
    let dir = tempfile::tempdir().unwrap();
    let o = compkern(&[&kernel("jacobi")], &["--samples", "200"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("4 case(s), tree height "));
    for f in ["jacobi.case0.cu", "jacobi.case3.cu", "jacobi.report.txt", "jacobi.tree.json", "jacobi.tree.dot"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn two_schedule_blocks_are_a_syntax_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("two.mfk");
    std::fs::write(
        &src,
        "int N;\nint a[N];\nmeta_schedule {\n  meta_for (int i = 0; i < N; i++)\n    a[i] = 1;\n}\nmeta_schedule {\n  meta_for (int i = 0; i < N; i++)\n    a[i] = 2;\n}\n",
    )
    .unwrap();
    let o = compkern(&[&src], &[], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
}

#[test]
fn empty_counter_roster_keeps_the_original_program() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bare.machine");
    std::fs::write(&m, "[machine]\nname = \"bare\"\n\n[strategies]\norder = []\n").unwrap();
    let o = compkern(&[&kernel("addition"), &m], &[], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("1 case(s), tree height 0"));
}

#[test]
fn bad_machine_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bad.machine");
    std::fs::write(
        &m,
        "[machine]\nname = \"bad\"\n\n[[counter]]\nid = \"t\"\nmeasure = \"threads-per-block\"\nbound = \"T\"\nsigma = [\"granularity\"]\n",
    )
    .unwrap();
    let o = compkern(&[&kernel("addition"), &m], &[], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a declared"));
}

#[test]
fn uncovered_parameters_exit_with_two_and_still_write() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("tiny.machine");
    std::fs::write(
        &m,
        "[machine]\nname = \"tiny\"\n\n[[param]]\nname = \"T\"\nkind = \"resource-limit\"\nmax = 0\n\n[[counter]]\nid = \"t\"\nmeasure = \"threads-per-block\"\nbound = \"T\"\nsigma = [\"granularity\"]\n",
    )
    .unwrap();
    let o = compkern(&[&kernel("addition"), &m], &["--samples", "20"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no case covers"));
    assert!(dir.path().join("addition.report.txt").exists());
    let skipped = compkern(&[&kernel("addition"), &m], &["--no-verify"], dir.path());
    assert_eq!(skipped.status.code(), Some(0));
}

#[test]
fn flags_reach_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = compkern(
        &[&kernel("addition"), &machine("addition")],
        &["--grid-stride", "128", "--explain", "--no-verify"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let k = std::fs::read_to_string(dir.path().join("addition.case0.cu")).unwrap();
    assert!(k.contains("#define GRID_STRIDE 128"));
    let r = std::fs::read_to_string(dir.path().join("addition.report.txt")).unwrap();
    assert!(r.contains("== counter values =="));
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = compkern(&[&kernel("transpose")], &["--samples", "50"], d.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap());
    }
}
