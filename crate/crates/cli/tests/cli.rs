use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nijhydro"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Fresh scratch directory per test.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nijhydro-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_with(config: &Path, cmd: &str, out: &Path) -> Output {
    bin()
        .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let dir = scratch("selftest");
    let o = run(&["selftest", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn injected_fault_is_caught() {
    let dir = scratch("fault");
    let o = run(&["selftest", "--out", dir.to_str().unwrap(), "--inject-fault", "recursion-sign"]);
    assert_eq!(o.status.code(), Some(1));
    let all = format!("{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert!(all.contains("Cayley"), "{all}");
}

#[test]
fn shipped_verify_configs_pass() {
    let dir = scratch("verify");
    for name in ["toeplitz-u3-verify.json", "counterexample-1-verify.json"] {
        let o = run_with(&configs().join(name), "verify", &dir);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
}

#[test]
fn flipped_expectation_fails() {
    let dir = scratch("flipped");
    let body = fs::read_to_string(configs().join("toeplitz-u3-verify.json")).unwrap();
    let flipped = body.replacen(
        r#"{"check": "torsion", "holds": true}"#,
        r#"{"check": "torsion", "holds": false}"#,
        1,
    );
    assert_ne!(body, flipped);
    let o = run_with(&write_config(&dir, &flipped), "verify", &dir);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("torsion"), "{}", stderr(&o));
}

#[test]
fn malformed_expression_is_a_config_error() {
    let dir = scratch("malformed");
    let body = fs::read_to_string(data("jordan-small.json")).unwrap().replace(r#""1 + x""#, r#""1 + * x""#);
    let o = run_with(&write_config(&dir, &body), "solve", &dir);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = scratch("unknown");
    let body = fs::read_to_string(data("jordan-small.json"))
        .unwrap()
        .replacen('{', r#"{"colour": "blue","#, 1);
    let o = run_with(&write_config(&dir, &body), "solve", &dir);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = scratch("missing");
    let o = run_with(&dir.join("nope.json"), "verify", &dir);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_cyclic_curve_is_reported() {
    let dir = scratch("noncyclic");
    let body = fs::read_to_string(data("jordan-small.json"))
        .unwrap()
        .replace(r#"["1", "x", "1", "1 + x"]"#, r#"["1 + x", "x^2", "3 + x", "x"]"#);
    let o = run_with(&write_config(&dir, &body), "solve", &dir);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not a cyclic vector"), "{}", stderr(&o));
}

#[test]
fn small_solve_writes_outputs() {
    let dir = scratch("solve");
    let o = run_with(&data("jordan-small.json"), "solve", &dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let solution = fs::read_to_string(dir.join("solution.csv")).unwrap();
    let mut lines = solution.lines();
    assert_eq!(lines.next(), Some("t1,t2,t3,x,u1,u2,u3,u4,converged"));
    assert_eq!(lines.count(), 5 * 27);
    let residuals = fs::read_to_string(dir.join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("equation,residual,t_spacing,x_spacing,nodes"));
    assert_eq!(residuals.lines().count(), 4);
    assert!(fs::read_to_string(dir.join("report.txt")).unwrap().contains("converged: 135/135"));
}

#[test]
fn hierarchy_command_writes_csv() {
    let dir = scratch("hierarchy");
    let o = run_with(&data("jordan-small.json"), "hierarchy", &dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("hierarchy.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("u1,u2,u3,u4,"), "{header}");
    assert!(header.ends_with("chain_residual,closedness_residual"), "{header}");
    assert_eq!(csv.lines().count(), 21);
}
