use std::fs;
use std::process::{Command, Output};

use qep_core::report::solve_report_from_json;

const HEADER: &str = "index,x_1,membership_residual,min_f,gap,status";

fn qep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qep"))
        .args(args)
        .output()
        .expect("qep runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_spec(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn figure1_run_is_empty_with_gap_floor() {
    let o = qep(&["catalog", "run", "figure1", "--eps", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), format!("{HEADER}\n"));
    let err = stderr(&o);
    let gap: f64 = err
        .lines()
        .find_map(|l| l.strip_prefix("min_gap_over_fixed_points: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((gap - 0.1).abs() < 1e-12, "{err}");
}

#[test]
fn quasiconvex_variant_has_one_row() {
    let o = qep(&["catalog", "run", "quasiconvex-variant"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), format!("{HEADER}\n1000,1,0,0,0,solution\n"));
}

#[test]
fn remark_verify_verdicts() {
    let o = qep(&["catalog", "verify", "remark"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdicts"]["ii"], "NO_VIOLATION_FOUND");
    assert_eq!(v["verdicts"]["qcvx_second"], "FAIL");
    assert_eq!(v["verdicts"]["diagonal_zero"], "FAIL");
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "json"] {
        let mut texts = Vec::new();
        for workers in ["1", "4", "4"] {
            let out = dir.path().join(format!("r{workers}.{format}"));
            let o = qep(&[
                "catalog",
                "run",
                "random-2d",
                "--seed",
                "11",
                "--grid",
                "61",
                "--workers",
                workers,
                "--format",
                format,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            assert!(stdout(&o).is_empty());
            texts.push(fs::read(&out).unwrap());
        }
        assert!(texts.windows(2).all(|w| w[0] == w[1]), "{format}");
    }
}

#[test]
fn json_reports_reload() {
    let o = qep(&["catalog", "run", "random-1d", "--seed", "2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let report = solve_report_from_json(&text).unwrap();
    assert!(report.solution_count() > 0);
    assert_eq!(qep_core::report::to_json(&report).unwrap(), text);
}

const LINEAR: &str = r#"
name = "linear"

[domain]
lower = [0.0]
upper = [1.0]

[map]
kind = "whole_domain"

[payload]
kind = "qvi_operator"
vertices = [["1"]]
"#;

#[test]
fn solve_spec_file_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "linear.toml", LINEAR);
    let o = qep(&["solve", &spec, "--eps", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), format!("{HEADER}\n0,0,0,0,,solution\n"));
    assert!(stderr(&o).contains("problem: QVI"));
    // default 201-point grid, default eps 1e-6
    let o = qep(&["solve", &spec, "--format", "json"]);
    let report = solve_report_from_json(&stdout(&o)).unwrap();
    assert_eq!(report.config.grid.points_per_axis, vec![201]);
    assert_eq!(report.config.eps, 1e-6);
}

#[test]
fn bad_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let outside = LINEAR.replace(
        "kind = \"whole_domain\"",
        "kind = \"moving_box\"\nlower = [\"x_1 + 0.5\"]\nupper = [\"x_1 + 0.6\"]",
    );
    let spec = write_spec(&dir, "outside.toml", &outside);
    // validated on the spec's 201-point grid
    let o = qep(&["solve", &spec]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("x = [0.505]"), "{}", stderr(&o));

    let broken = write_spec(&dir, "broken.toml", &LINEAR.replace("\"1\"", "\"1 +\""));
    let o = qep(&["solve", &broken]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parse error"));

    for args in [
        vec!["solve", "/nonexistent/spec.toml"],
        vec!["catalog", "run", "figure1", "--bogus"],
        vec!["catalog", "run", "nope"],
        vec!["catalog", "run", "figure1", "--eps", "-1"],
        vec!["frobnicate"],
    ] {
        let o = qep(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert!(stderr(&qep(&["--bogus"])).contains("Usage"));
}

#[test]
fn anomaly_exits_with_3() {
    // the only fixed point of K = {1/2} lies between the two grid points
    let dir = tempfile::tempdir().unwrap();
    let text = LINEAR
        .replace(
            "kind = \"whole_domain\"",
            "kind = \"constant\"\nlower = [\"0.5\"]\nupper = [\"0.5\"]",
        )
        .replace(
            "kind = \"qvi_operator\"\nvertices = [[\"1\"]]",
            "kind = \"objective\"\nexpression = \"x_1\"",
        );
    let spec = write_spec(&dir, "gap.toml", &text);
    let o = qep(&["verify", &spec, "--grid", "2", "--eps", "0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("ANOMALY"));
    let o = qep(&["verify", &spec, "--grid", "3", "--eps", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn catalog_list_names_every_entry() {
    let o = qep(&["catalog", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in [
        "figure1",
        "remark",
        "quasiconvex-variant",
        "random-1d",
        "random-2d",
        "qvi",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}
