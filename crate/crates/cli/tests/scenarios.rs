use sdefl::run::{execute, generate, run_table5_sweep, Phases};
use sdefl::{run_scenario, CliError, Scenario};

#[test]
fn ou_mle_recovers_the_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::builtin("ou_mle").unwrap();
    let report = run_scenario(&sc, dir.path()).unwrap();
    let est = report.estimation.as_ref().unwrap().params.to_vec();
    assert!((est[0] - 1.0).abs() <= 0.25, "{est:?}");
    assert!((est[1] - 2.0).abs() <= 0.30, "{est:?}");
    assert!((est[2] - 3.0).abs() <= 0.35, "{est:?}");
    assert!(report.estimation.unwrap().neg_log_lik <= report.truth_objective.unwrap());
    for f in &report.artifacts {
        assert!(f.is_file(), "{} missing", f.display());
    }
    let names: Vec<String> = report.artifacts.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for want in ["data.csv", "estimates.csv", "reconstructed.csv", "reconstruction.svg", "summary.csv", "timings.txt"] {
        assert!(names.iter().any(|n| n == want), "{want} not in {names:?}");
    }
}

#[test]
fn filter_scenarios_report_tracking_error() {
    let sc = Scenario::builtin("ou_kalman").unwrap();
    let r = execute(&sc, Phases::FILTER, None).unwrap();
    assert!(r.rmse.unwrap() <= 1e-2);
    assert!(r.artifacts.is_empty());
    let sc = Scenario::builtin("bates_ekf").unwrap();
    let r = execute(&sc, Phases::FILTER, None).unwrap();
    assert!(r.rmse.unwrap().is_finite() && r.rmse.unwrap() <= 20.0, "{:?}", r.rmse);
}

#[test]
fn incompatible_method_fails_before_compute() {
    let text = Scenario::builtin("ou_mle").map(|_| include_str!("../scenarios/ou_mle.toml")).unwrap();
    let bad = text.replace("kind = \"mle\"", "kind = \"particle_ekf\"");
    match Scenario::from_toml(&bad, None) {
        Err(CliError::Validation(m)) => assert!(m.contains("particle_ekf"), "{m}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let sc = Scenario::builtin("ou_mle").unwrap();
    let err = execute(&sc, Phases::SIMULATE, Some(&blocker)).unwrap_err();
    assert!(matches!(err, CliError::Io { .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn sweep_writes_four_rows_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let reports = run_table5_sweep(Some(dir.path()), None).unwrap();
    assert_eq!(reports.len(), 4);
    assert!(reports.iter().all(|r| r.rmse.unwrap().is_finite()));
    let file = dir.path().join("table5").join("table5.csv");
    let first = std::fs::read_to_string(&file).unwrap();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "task,mu_s,kappa,theta_v,xi,rho,rmse");
    run_table5_sweep(Some(dir.path()), None).unwrap();
    assert_eq!(std::fs::read_to_string(&file).unwrap(), first);
}

#[test]
fn provided_csv_replaces_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let src = Scenario::builtin("ou_mle").unwrap();
    let (data, _) = generate(&src).unwrap();
    sdefl::output::emit_path_csv(&data.joint().unwrap(), &dir.path().join("series.csv")).unwrap();
    let text = include_str!("../scenarios/ou_mle.toml").replace("x0 = 0.0", "x0 = 0.0\ninput_csv = \"series.csv\"");
    let file = dir.path().join("from_csv.toml");
    std::fs::write(&file, text).unwrap();
    let sc = Scenario::load(file.to_str().unwrap()).unwrap();
    let a = execute(&sc, Phases::ESTIMATE, None).unwrap();
    let b = execute(&src, Phases::ESTIMATE, None).unwrap();
    assert_eq!(a.estimation.unwrap().params, b.estimation.unwrap().params);
}

#[test]
fn seed_override_changes_the_series() {
    let sc = Scenario::builtin("ou_mle").unwrap();
    let (a, _) = generate(&sc).unwrap();
    let (b, _) = generate(&sc.clone().with_seed(Some(7))).unwrap();
    let (c, _) = generate(&sc.with_seed(None)).unwrap();
    assert_ne!(a.joint().unwrap(), b.joint().unwrap());
    assert_eq!(a.joint().unwrap(), c.joint().unwrap());
}
