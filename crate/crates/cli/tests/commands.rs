use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcprox_cli::report::{CompareReport, RunReport};

fn dcprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcprox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: serde_json::Value) -> PathBuf {
    let mut body = body;
    body["output"] = serde_json::json!({
        "trace_path": dir.join(format!("{name}.csv")),
        "report_path": dir.join(format!("{name}.report.json")),
    });
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

fn well(solver: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "version": 1,
        "problem": {"name": "quartic_well", "parameters": {"n": 1}},
        "solver": solver,
    })
}

fn least_squares(solver: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "version": 1,
        "problem": {"name": "l1_minus_l2", "seed": 3,
                    "parameters": {"m": 5, "n": 5, "rho": 0.1, "lipschitz_target": 0.9}},
        "solver": solver,
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ok", well(serde_json::json!({"kind": "bppa"})));
    let out = dcprox(&["--quiet", "run", s(&cfg)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let report: RunReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("ok.report.json")).unwrap()).unwrap();
    assert!((report.final_f.unwrap() + 0.25).abs() <= 1e-8);
    assert_eq!(report.status, "converged");

    let cfg = write_config(dir.path(), "short", well(serde_json::json!({"kind": "bppa", "max_iter": 1})));
    assert_eq!(code(&dcprox(&["run", s(&cfg)])), 2);

    let cfg = write_config(dir.path(), "gamma", least_squares(serde_json::json!({"kind": "inertial", "gamma": 0.4})));
    let out = dcprox(&["run", s(&cfg)]);
    assert_eq!(code(&out), 4);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("gamma_below_half"), "{err}");
    assert!(!dir.path().join("gamma.csv").exists());
}

#[test]
fn run_rejects_lambda_below_the_safe_range() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "version": 1,
        "problem": {"name": "boxed_indefinite_quadratic",
                    "parameters": {"q": [[-4.0]], "c": [0.0], "lo": [-10.0], "hi": [10.0]}},
        "solver": {"kind": "ppa", "lambda_rule": {"constant": 4.5}},
    });
    let cfg = write_config(dir.path(), "low", body);
    let out = dcprox(&["run", s(&cfg)]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8(out.stderr).unwrap().contains("lambda"));
    assert!(!dir.path().join("low.csv").exists());
    assert!(!dir.path().join("low.report.json").exists());
}

#[test]
fn compare_prefers_the_boosted_method() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "version": 1,
        "problem": {"name": "quartic_well", "parameters": {"n": 3}},
        "solvers": [{"kind": "bppa"}, {"kind": "ppa"}, {"kind": "inertial", "smooth_h": true}],
    });
    let cfg = write_config(dir.path(), "cmp", body);
    assert_eq!(code(&dcprox(&["--quiet", "compare", s(&cfg)])), 0);
    let report: CompareReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("cmp.report.json")).unwrap()).unwrap();
    let to_tol = |i: usize| report.legs[i].iterations_to_tolerance.unwrap();
    assert!(to_tol(0) <= to_tol(1));
    let d = report.dominance.unwrap();
    assert_eq!(d.boosted_no_worse, d.states);
    for leg in &report.legs {
        assert!(Path::new(leg.trace_path.as_ref().unwrap()).exists());
    }
}

#[test]
fn single_leg_compare_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a", well(serde_json::json!({"kind": "ppa"})));
    let b = write_config(dir.path(), "b", well(serde_json::json!({"kind": "ppa"})));
    assert_eq!(code(&dcprox(&["--quiet", "run", s(&a)])), 0);
    assert_eq!(code(&dcprox(&["--quiet", "compare", s(&b)])), 0);
    let ra = std::fs::read(dir.path().join("a.report.json")).unwrap();
    let rb = std::fs::read(dir.path().join("b.report.json")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), std::fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn compare_rejects_incompatible_pairings() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "version": 1,
        "problem": {"name": "boxed_indefinite_quadratic",
                    "parameters": {"q": [[-1.0]], "c": [0.0], "lo": [-1.0], "hi": [1.0]}},
        "solvers": [{"kind": "bppa"}, {"kind": "ppa"}],
    });
    let cfg = write_config(dir.path(), "inc", body);
    let out = dcprox(&["compare", s(&cfg)]);
    assert_eq!(code(&out), 4);
    assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);
}

#[test]
fn check_detects_injected_faults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t", well(serde_json::json!({"kind": "bppa"})));
    assert_eq!(code(&dcprox(&["--quiet", "run", s(&cfg)])), 0);
    let trace = dir.path().join("t.csv");
    assert_eq!(code(&dcprox(&["--quiet", "check", s(&trace), "--problem", s(&cfg)])), 0);

    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[3].split(',').map(String::from).collect();
    let f: f64 = fields[1].parse().unwrap();
    fields[1] = format!("{:.16e}", f + 0.1);
    lines[3] = fields.join(",");
    let edited = dir.path().join("edited.csv");
    std::fs::write(&edited, lines.join("\n") + "\n").unwrap();
    let out = dcprox(&["check", s(&edited), "--problem", s(&cfg)]);
    assert_eq!(code(&out), 1);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("monotone_f") && l.contains("FAIL")), "{table}");

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "k,f\n0,1\n").unwrap();
    assert_eq!(code(&dcprox(&["check", s(&broken), "--problem", s(&cfg)])), 4);
}

#[test]
fn check_warns_on_a_different_delta_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "i", least_squares(serde_json::json!({"kind": "inertial"})));
    assert_eq!(code(&dcprox(&["--quiet", "run", s(&cfg)])), 0);
    let trace = dir.path().join("i.csv");
    assert_eq!(code(&dcprox(&["--quiet", "check", s(&trace), "--problem", s(&cfg)])), 0);

    let other = write_config(
        dir.path(),
        "other",
        least_squares(serde_json::json!({"kind": "inertial", "delta_grid_size": 1})),
    );
    let out = dcprox(&["check", s(&trace), "--problem", s(&other)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stderr).unwrap().contains("warning: delta_grid"));
}

#[test]
fn rates_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r",
        serde_json::json!({
            "version": 1,
            "problem": {"name": "degenerate_quartic", "parameters": {"n": 1}},
            "solver": {"kind": "bppa", "max_iter": 2000},
        }),
    );
    assert_eq!(code(&dcprox(&["--quiet", "run", s(&cfg)])), 2);
    let out = dcprox(&["rates", s(&dir.path().join("r.csv")), "--fstar", "0"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["classification"]["kind"], "sublinear");
    let e = v["classification"]["exponent"].as_f64().unwrap();
    assert!((e + 2.0).abs() < 0.3);
    assert!((v["kl"]["kappa"].as_f64().unwrap() - 0.75).abs() < 0.05);

    let short = dir.path().join("short.csv");
    let head = "k,f,d_norm,m_k,eta_k,grad_res,sum_d_sq,energy_lo,energy_hi,lyapunov,coupling_norm,wall_time_s";
    std::fs::write(&short, format!("{head}\n0,1,0,,,,,,,,,\n1,0.5,0,,,,,,,,,\n")).unwrap();
    assert_eq!(code(&dcprox(&["rates", s(&short), "--fstar", "0"])), 2);
}

#[test]
fn malformed_configs_exit_4_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = [
        "",
        "{",
        "[]",
        r#"{"version": 1}"#,
        r#"{"version": 2, "problem": {"name": "quartic_well", "parameters": {"n": 1}}, "solver": {"kind": "bppa"}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": 1}}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": 0}}, "solver": {"kind": "bppa"}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": "one"}}, "solver": {"kind": "bppa"}}"#,
        r#"{"version": 1, "problem": {"name": "moon", "parameters": {}}, "solver": {"kind": "bppa"}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": 1}}, "solver": {"kind": "lbfgs"}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": 1}}, "solver": {"kind": "bppa", "eta": 1.5}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": 1}}, "solver": {"kind": "bppa", "speed": 2}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": 1}}, "solver": {"kind": "bppa"}, "start": {"x0": [1, 2]}}"#,
        r#"{"version": 1, "problem": {"name": "l1_minus_l2", "parameters": {"m": 3, "n": 3, "rho": -1}}, "solver": {"kind": "inertial"}}"#,
        r#"{"version": 1, "problem": {"name": "l1_minus_l2", "parameters": {"m": 3, "n": 3, "rho": 0.1}}, "solver": {"kind": "bppa"}}"#,
        r#"{"version": 1, "problem": {"name": "l1_minus_l2", "parameters": {"m": 5, "n": 5, "rho": 0.1, "lipschitz_target": 0.9}}, "solver": {"kind": "inertial", "mu": 0.3}}"#,
        r#"{"version": 1, "problem": {"name": "quartic_well", "parameters": {"n": 1}}, "solver": {"kind": "bppa"}, "output": {"colour": true}}"#,
    ];
    for (i, text) in corpus.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.json"));
        std::fs::write(&path, text).unwrap();
        let out = dcprox(&["run", s(&path)]);
        let err = String::from_utf8_lossy(&out.stderr).into_owned();
        assert_eq!(code(&out), 4, "case {i}: {text}\n{err}");
        assert_eq!(err.lines().count(), 1, "case {i}: {err}");
    }
    assert_eq!(code(&dcprox(&["run", s(&dir.path().join("missing.json"))])), 4);
}

#[test]
fn seed_flag_controls_random_instances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s", least_squares(serde_json::json!({"kind": "inertial"})));
    let trace = dir.path().join("s.csv");
    let mut runs = Vec::new();
    for seed in ["11", "11", "12"] {
        assert_eq!(code(&dcprox(&["--quiet", "--seed", seed, "run", s(&cfg)])), 0);
        runs.push(std::fs::read(&trace).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0], runs[2]);
    let report: RunReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("s.report.json")).unwrap()).unwrap();
    assert_eq!(report.seed, 12);
}
