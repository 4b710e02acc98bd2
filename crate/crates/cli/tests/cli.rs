use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_res-sim"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(name: &str) -> String {
    scenarios().join(name).to_string_lossy().into_owned()
}

/// Copies the fixture inputs into `dir` and returns the path of a scenario
/// 1 copy with `extra` appended to its [controller] table.
fn patched_scenario(dir: &Path, extra: &str) -> PathBuf {
    for f in ["density.csv", "extraction.csv"] {
        fs::copy(scenarios().join(f), dir.join(f)).unwrap();
    }
    let text = fs::read_to_string(scenarios().join("scenario1.toml")).unwrap();
    let patched = text.replacen("[controller]\n", &format!("[controller]\n{extra}\n"), 1);
    assert_ne!(text, patched);
    let path = dir.join("patched.toml");
    fs::write(&path, patched).unwrap();
    path
}

#[test]
fn validate_accepts_scenario1() {
    let o = run(&["validate", "--config", &config("scenario1.toml")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for a in ["A1 pass", "A2 pass", "A3 pass", "A4 pass"] {
        assert!(out.contains(a), "{out}");
    }
}

#[test]
fn validate_rejects_overlap_with_exit_1() {
    let o = run(&["validate", "--config", &config("overlapping_regions.toml")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("A4"));
    assert!(stderr(&o).contains("disjoint"));
}

#[test]
fn validate_rejects_too_many_constraints() {
    let o = run(&["validate", "--config", &config("too_many_constraints.toml")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("too many constraints"));
}

#[test]
fn config_errors_exit_2() {
    let o = run(&["validate", "--config", &config("scenario1.toml"), "--dt", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dt must be positive"), "{}", stderr(&o));

    let o = run(&["run", "--config", "/no/such/file.toml"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["validate", "--config", &config("scenario1.toml"), "--grid", "forty"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\n[grid\n").unwrap();
    let o = run(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn gains_prints_inequality() {
    let o = run(&["gains", "--config", &config("scenario1.toml")]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("k1 = 6.660000e-1"), "{out}");
    assert!(out.contains("k2 = 9.000000e-2"), "{out}");
    assert!(out.contains("holds"));

    let o = run(&["gains", "--k-bar2", "1e4", "--l", "1e-4", "--b", "1"]);
    assert!(stdout(&o).contains("k1 = 2.220000e-2"), "{}", stdout(&o));
    assert!(stdout(&o).contains("k2 = 1.000000e-4"));
}

#[test]
fn gains_reject_delta_b_one_and_warn_near_one() {
    let o = run(&["gains", "--k-bar2", "1e4", "--l", "1e-4", "--b", "1", "--delta-b", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delta_b"));

    let o = run(&[
        "gains",
        "--k-bar2",
        "1e4",
        "--l",
        "1e-4",
        "--b",
        "1",
        "--delta-b",
        "0.97",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("close to 1"));
}

#[test]
fn run_writes_outputs_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--config".into(),
            config("scenario2.toml"),
            "--grid".into(),
            "20x20".into(),
            "--dt".into(),
            "0.01".into(),
            "--t-end".into(),
            "2".into(),
            "--out".into(),
            out.to_string_lossy().into_owned(),
        ]
    };
    let o = bin().args(args(a.path())).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bin().args(args(b.path())).arg("--threads").arg("1").output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "outputs.csv",
        "controls.csv",
        "demand.csv",
        "error_norm.csv",
        "events_cumulative.csv",
        "report.json",
    ] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let events = fs::read_to_string(a.path().join("events_cumulative.csv")).unwrap();
    assert!(events.starts_with("t_years,controlled,baseline,background"));
    let report = fs::read_to_string(a.path().join("report.json")).unwrap();
    assert!(report.contains("\"mass_balance\""));
}

#[test]
fn mass_balance_check_modes() {
    let base = [
        "mass-balance-check",
        "--config",
        &config("scenario1.toml"),
        "--grid",
        "20x20",
        "--dt",
        "0.01",
        "--t-end",
        "1",
    ];
    let o = run(&base);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Pass"));

    let mut dir = base.to_vec();
    dir.extend(["--bc", "dirichlet"]);
    let o = run(&dir);
    assert!(o.status.success());
    assert!(stdout(&o).contains("not applicable"), "{}", stdout(&o));
}

#[test]
fn saturation_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = |path: &Path| {
        vec![
            "run".to_string(),
            "--config".into(),
            path.to_string_lossy().into_owned(),
            "--grid".into(),
            "20x20".into(),
            "--dt".into(),
            "0.01".into(),
            "--t-end".into(),
            "4".into(),
            "--out".into(),
            out.to_string_lossy().into_owned(),
        ]
    };
    // below what the demand alone needs: rejected before running
    let path = patched_scenario(dir.path(), "saturation = 1e-6");
    let o = bin().args(args(&path)).output().unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("A1"));

    // feasible for the demand but breached by the controller: runtime abort
    let path = patched_scenario(dir.path(), "saturation = 0.01");
    let o = bin().args(args(&path)).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("saturation"));
}
