use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faultalm"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("faultalm-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn run_constant_slip_twice_identical() {
    let (a, b) = (scratch("a"), scratch("b"));
    for d in [&a, &b] {
        ok(bin().current_dir(d).args(["run"]).arg(configs().join("constant_slip.toml")).output().unwrap());
    }
    for f in ["profile_000.csv", "fields_000.vtk", "fields_fault_000.vtk", "report.csv", "effective.toml"] {
        let p = Path::new("out/constant_slip").join(f);
        assert_eq!(fs::read(a.join(&p)).unwrap(), fs::read(b.join(&p)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("out/constant_slip/profile_000.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",slip")));
}

#[test]
fn echo_materializes_defaults() {
    let text = ok(bin().args(["run", "--echo"]).arg(configs().join("all_open.toml")).output().unwrap());
    assert!(text.contains("[penalty]\nscale = 10.0"), "{text}");
    assert!(text.contains("uzawa_tol"));
    assert!(text.contains("enriched = true"));
}

#[test]
fn bad_config_fails_with_key_path() {
    let d = scratch("bad");
    let cfg = fs::read_to_string(configs().join("all_open.toml")).unwrap().replace("nu = 0.25", "nu = 0.25\nshear = 1.0");
    fs::write(d.join("bad.toml"), cfg).unwrap();
    let out = bin().current_dir(&d).args(["run", "bad.toml"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("material.0") && err.contains("shear"), "{err}");
}

#[test]
fn nonconvergence_exits_nonzero_with_report() {
    let d = scratch("nc");
    let cfg = fs::read_to_string(configs().join("stick_slip_open.toml")).unwrap();
    let cfg = cfg.replace("[friction]", "[solver]\nmax_newton = 1\nmax_uzawa = 1\n\n[friction]");
    fs::write(d.join("nc.toml"), cfg).unwrap();
    let out = bin().current_dir(&d).args(["run", "nc.toml"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step"), "{err}");
    assert!(d.join("out/sso/report.csv").exists());
}

#[test]
fn infsup_table() {
    let text = ok(bin().args(["infsup", "--levels", "2"]).output().unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kind,h,beta_enriched,beta_unenriched");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let f: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert!(f[1] > 0.0 && f[1] >= f[2]);
    }
}

#[test]
fn bench_single_level_and_small_case() {
    let text = ok(bin().args(["bench", "inclined-fault", "--level", "0"]).output().unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "case,kind,h,err_traction,err_slip,rate");
    assert!(lines[1].starts_with("inclined-fault,hex8,"));
    let text = ok(bin().args(["bench", "constant-slip", "--kind", "tet4"]).output().unwrap());
    assert!(text.starts_with("step,uzawa_k,newton_l,krylov_total,residual\n"));
}

#[test]
fn unknown_case_rejected() {
    let out = bin().args(["bench", "square-fault"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("square-fault"));
}
