use std::path::Path;
use std::process::{Command, Output};

use kcbs_selftest::analysis::{exact_counts, ContextPlan};
use kcbs_selftest::kcbs_model::ideal_configuration;
use kcbs_selftest::moment_relax::parse_sdpa;

fn kcbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcbs"))
        .args(args)
        .env_remove("KCBS_SOLVER_TOL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn config_ideal_prints_witness() {
    let o = kcbs(&["config", "ideal"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("witness: 2.2360680"));
}

#[test]
fn config_depolarized_prints_eigenvalues() {
    let o = kcbs(&["config", "depolarized", "--p", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("0.100000") && text.contains("0.800000"),
        "{text}"
    );
}

#[test]
fn config_tilted_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tilted.json");
    let o = kcbs(&[
        "config",
        "tilted",
        "--theta",
        "150.612",
        "--u0=-0.649,-0.400,-0.649",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["kind"], "tilted");
    assert!(v["validation"]["max_cyclic_overlap"].as_f64().unwrap() < 1e-10);
}

#[test]
fn bad_parameters_exit_with_input_error() {
    assert_eq!(
        kcbs(&["config", "depolarized", "--p", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        kcbs(&["curve", "--grid", "1:2", "--out", "x.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        kcbs(&["curve", "--grid", "7.0", "--out", "x.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        kcbs(&["analyze", "/nonexistent/counts.json"]).status.code(),
        Some(2)
    );
    assert_eq!(kcbs(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn export_witness_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.dat-s");
    let o = kcbs(&[
        "export",
        "--level",
        "1",
        "--mode",
        "witness",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let file = parse_sdpa(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(file.block_sizes, vec![8]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("w.json")).unwrap()).unwrap();
    assert_eq!(
        manifest["classes"].as_array().unwrap().len(),
        file.num_vars + 1
    );
}

#[test]
fn export_fidelity_needs_c() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.dat-s");
    let path = out.to_str().unwrap();
    assert_eq!(
        kcbs(&["export", "--level", "1", "--mode", "sum", "--out", path])
            .status
            .code(),
        Some(2)
    );
    let o = kcbs(&[
        "export", "--level", "1", "--mode", "sum", "--c", "2.2", "--out", path,
    ]);
    assert_eq!(o.status.code(), Some(0));
    let file = parse_sdpa(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(file.block_sizes.len() >= 2);
}

fn curve_run(dir: &Path, name: &str, extra: &[&str]) -> (Option<i32>, String) {
    let out = dir.join(name);
    let mut args = vec![
        "curve",
        "--level",
        "1",
        "--grid",
        "2.1,2.2",
        "--max-iter",
        "300",
        "--out",
    ];
    args.push(out.to_str().unwrap());
    args.extend_from_slice(extra);
    let o = kcbs(&args);
    (
        o.status.code(),
        std::fs::read_to_string(&out).unwrap_or_default(),
    )
}

#[test]
fn deterministic_curves_are_byte_identical_and_keep_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let (code_a, a) = curve_run(dir.path(), "a.csv", &["--deterministic", "--jobs", "2"]);
    let (code_b, b) = curve_run(dir.path(), "b.csv", &["--deterministic", "--jobs", "1"]);
    assert_eq!(a, b);
    // 300 iterations cannot converge: both points are kept with their status and the run exits 3
    assert_eq!(code_a, Some(3));
    assert_eq!(code_b, Some(3));
    assert_eq!(
        a.lines().filter(|l| l.contains("iteration-limit")).count(),
        2,
        "{a}"
    );
    assert!(!a.contains("# generated"));

    let (_, stamped) = curve_run(dir.path(), "c.csv", &[]);
    assert!(stamped
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("# generated unix="));
}

#[test]
fn export_only_curve_writes_one_file_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = curve_run(
        dir.path(),
        "e.csv",
        &["--solver", "export", "--deterministic"],
    );
    assert_eq!(code, Some(0));
    assert_eq!(text.matches("exported").count(), 2);
    assert!(dir.path().join("e.point0.dat-s").exists());
    assert!(dir.path().join("e.point1.dat-s").exists());
}

#[test]
fn analyze_reports_estimate_noise_and_lookup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ideal_configuration(5).unwrap();
    let counts =
        exact_counts(&cfg, &cfg.state_density(), 10_000.0, ContextPlan::default()).unwrap();
    let counts_path = dir.path().join("counts.json");
    std::fs::write(&counts_path, counts.to_json().unwrap()).unwrap();
    let curve_path = dir.path().join("curve.csv");
    std::fs::write(
        &curve_path,
        "# kcbs curve n=5 level=3 mode=sum\n\
         c,bound,status,gap,iterations,seconds,certified_bound\n\
         2.0,1.0,optimal,0,10,,0.99\n\
         2.2,4.5,near-optimal,0,10,,4.4\n\
         2.2360679775,6.0,optimal,0,10,,6.0\n",
    )
    .unwrap();
    let o = kcbs(&[
        "analyze",
        counts_path.to_str().unwrap(),
        "--curve",
        curve_path.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["estimate"]["sum"].as_f64().unwrap() - 5f64.sqrt()).abs() < 1e-12);
    let best = &v["best"];
    assert_eq!(best["grid_point"].as_f64().unwrap(), 2.2);
    assert_eq!(best["certified_bound"].as_f64().unwrap(), 4.4);
    assert_eq!(best["bound"].as_f64().unwrap(), 4.5);
    assert_eq!(best["status"], "near-optimal");
    let r = v["noise"]["repeatability"].as_array().unwrap();
    assert!(r.iter().all(|x| x.as_f64().unwrap() == 1.0));
}

#[test]
fn analyze_rejects_schema_violations_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(
        &p,
        r#"{"n": 5, "order": "normal", "contexts": [{"i": 1, "j": 3, "counts": {"00": 1, "01": 0, "10": 0, "11": 0}}]}"#,
    )
    .unwrap();
    let o = kcbs(&["analyze", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("contexts[0]"));
}
