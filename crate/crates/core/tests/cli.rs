use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn isac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isac")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.cfg");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = isac(&["validate", "--config", "/nonexistent/scenario.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
}

#[test]
fn unknown_mode_is_rejected() {
    assert_eq!(isac(&["fig-b", "--mode", "sideways"]).status.code(), Some(2));
}

#[test]
fn malformed_config_line_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_tx 15\n");
    let o = isac(&["fig-a", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn sweep_needs_a_variable() {
    assert_eq!(isac(&["sweep"]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "criteria = 1\ntol.basis_unitarity = 0\n");
    let o = isac(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[1] FAIL basis_unitarity"));
}

#[test]
fn passing_validation_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "criteria = 1, 2\n");
    let out = dir.path().join("out");
    let o = isac(&["validate", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(report, stdout(&o));
    assert!(report.contains("seed = 7"));
    assert!(report.ends_with("summary: 8/8 checks passed\n"));
}

#[test]
fn fig_c_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "trials = 500\nintegration_samples = 2000\neps_points = 5\n");
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = isac(&["fig-c", "--config", &cfg, "--seed", "11", "--out", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(path).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("eps_db,ccdf_lower,ccdf_lower_err,ccdf_upper,"));
    assert!(header.ends_with("ccdf_mc_exact,ccdf_mc_exact_err"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn sweep_over_antennas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep_var = n_tx\nsweep_grid = 8, 16\ntrials = 200\nmean_trials = 200\nintegration_samples = 10000\n");
    let o = isac(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("n_tx,"));
    assert_eq!(text.lines().count(), 3);
}
