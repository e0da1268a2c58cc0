use std::process::{Command, Output};

fn run(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdeproj")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn convergence_smoke_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "convergence", "--model", "kubo", "--methods", "euler,eulerP,t2", "--seed", "42", "--paths", "16",
            "--h-ref", "2^-9", "--out", "k.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("EulerP") && stdout.contains("order"));
    let csv = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 18);
}

#[test]
fn json_output_and_explicit_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "convergence", "--model", "pendulum", "--methods", "milsteinP", "--paths", "4", "--h-levels",
            "0.125,2^-4,2^-5", "--h-ref", "2^-8", "--format", "json", "--out", "p.json", "--x0", "0.2,-0.5",
            "--params", "c1=0.5,c2=0.5", "--workers", "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = sdeproj::harness::report::import_report(&dir.path().join("p.json")).unwrap();
    assert_eq!(report.metadata.x0, vec![0.2, -0.5]);
    assert_eq!(report.methods[0].h.len(), 3);
}

#[test]
fn configuration_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["convergence", "--model", "nosuch"], dir.path());
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kubo") && err.contains("pendulum") && err.contains("lotka"), "{err}");

    assert_eq!(code(&run(&["convergence", "--model", "kubo", "--bogus"], dir.path())), 1);
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&run(&["convergence", "--model", "kubo", "--h-levels", "0.3"], dir.path())), 1);
    assert_eq!(code(&run(&["drift", "--model", "kubo", "--method", "rk4"], dir.path())), 1);
    assert_eq!(
        code(&run(&["drift", "--model", "kubo", "--method", "mid", "--no-truncation", "--t-end", "1"], dir.path())),
        1
    );
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // One Newton iteration cannot meet a 1e-15 tolerance on the product invariant.
    let out = run(
        &[
            "drift", "--model", "lotka", "--method", "eulerP", "--h", "0.1", "--t-end", "10", "--newton-max-iter",
            "1", "--newton-tol", "1e-15", "--out", "d.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn drift_and_path_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["drift", "--model", "kubo", "--method", "eulerP", "--h", "0.02", "--t-end", "2", "--out", "d.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("max |I(X_n) - I(X_0)|"));
    let csv = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 101);

    let out = run(&["path", "--model", "lotka", "--method", "t2", "--t-end", "1", "--stride", "10"], dir.path());
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("step,t,x_1,x_2,x_3,inv_err_1,inv_err_2,combined_err"));
    assert_eq!(stdout.lines().count(), 1 + 11);
}

#[test]
fn list_models_and_help() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["list-models"], dir.path());
    assert_eq!(code(&out), 0);
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.contains("kubo") && s.contains("pendulum") && s.contains("lotka"));
    assert_eq!(code(&run(&["--help"], dir.path())), 0);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["selftest"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
