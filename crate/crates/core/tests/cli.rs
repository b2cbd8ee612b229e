use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wick-lab"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// The flat thermal scenario cut down to a few modes and the given checks.
fn small_config(dir: &Path, edit: &[(&str, &str)], checks: &str) -> PathBuf {
    let mut text = std::fs::read_to_string(scenarios().join("flat_thermal.cfg")).unwrap();
    text = text.replace("sigma.mode_max = 32", "sigma.mode_max = 2").replace("lorentzian.n_t = 4001", "lorentzian.n_t = 401");
    for (from, to) in edit {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let checks_line = text.lines().find(|l| l.starts_with("checks = ")).unwrap().to_string();
    text = text.replace(&checks_line, &format!("checks = {checks}"));
    let path = dir.join("scenario.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn passing_run_writes_one_csv_per_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[], r#"["calderon_sum", "ccr"]"#);
    let out = tmp.path().join("out");
    let o = run(&["all", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("calderon_sum.csv")).unwrap();
    assert!(csv.starts_with("scenario,check,mode,param1,param2,value_re,value_im,residual\n"));
    assert_eq!(csv.lines().count(), 1 + 5);
    assert!(out.join("ccr.csv").exists() && out.join("report.json").exists());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn both_boundary_conditions_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[("euclidean.beta = 2.0", "euclidean.beta = 2.0\neuclidean.L = 2.0")], r#"["ccr"]"#);
    let o = run(&["all", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("euclidean.bc"));
}

#[test]
fn missing_file_and_bad_flags_exit_2() {
    assert_eq!(run(&["all", "/nonexistent/scenario.cfg"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[], r#"["ccr"]"#);
    assert_eq!(run(&["all", s(&cfg), "--format", "xml"]).status.code(), Some(2));
    assert_eq!(run(&["converge", s(&cfg), "--levels", "2"]).status.code(), Some(2));
}

#[test]
fn zero_tolerance_scale_fails_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[], r#"["solve_residual"]"#);
    let o = run(&["check", s(&cfg), "--out", s(&tmp.path().join("out")), "--tol-scale", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("failed: solve_residual"));
}

#[test]
fn singular_solve_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let massless = (r#"metric.mu = {"family": "constant", "params": [1.0]}"#, r#"metric.mu = {"family": "constant", "params": [0.0]}"#);
    let cfg = small_config(tmp.path(), &[massless], r#"["solve_residual"]"#);
    let o = run(&["check", s(&cfg), "--out", s(&tmp.path().join("out")), "--modes", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));
}

#[test]
fn json_format_and_mode_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[], r#"["calderon_sum"]"#);
    let out = tmp.path().join("out");
    let o = run(&["calderon", s(&cfg), "--out", s(&out), "--format", "json", "--modes", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("calderon_sum.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    assert!(!out.join("calderon_sum.csv").exists());
}

#[test]
fn plot_exports_use_the_record_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[], r#"["ccr", "kms_closed_form"]"#);
    let out = tmp.path().join("out");
    assert_eq!(run(&["twopoint", s(&cfg), "--out", s(&out)]).status.code(), Some(0));
    assert_eq!(run(&["kms", s(&cfg), "--out", s(&out)]).status.code(), Some(0));
    for name in ["kernel", "strip"] {
        let text = std::fs::read_to_string(out.join(format!("{name}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "scenario,check,mode,param1,param2,value_re,value_im,residual");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[1], name);
        assert!(text.lines().skip(1).all(|l| l.split(',').skip(3).all(|x| x.parse::<f64>().unwrap().is_finite())));
    }
}

#[test]
fn converge_writes_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[("euclidean.n_s = 401", "euclidean.n_s = 201")], r#"["green_identity", "ccr"]"#);
    let out = tmp.path().join("out");
    let o = run(&["converge", s(&cfg), "--out", s(&out), "--levels", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(csv.starts_with("scenario,check,n_s,n_t,residual,order\n"));
    assert_eq!(csv.lines().count(), 1 + 6);
    // the closed-form evolution has no truncation error
    assert!(csv.lines().filter(|l| l.contains(",ccr,")).all(|l| l.ends_with(",floor")));
}

#[test]
fn output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &[], r#"["eta_positivity", "state_positivity", "wick_cone", "kms_strip"]"#);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(run(&["all", s(&cfg), "--out", s(dir)]).status.code(), Some(0));
    }
    for name in ["eta_positivity", "state_positivity", "wick_cone", "kms_strip"] {
        let file = format!("{name}.csv");
        assert_eq!(std::fs::read(a.join(&file)).unwrap(), std::fs::read(b.join(&file)).unwrap(), "{file}");
    }
}
