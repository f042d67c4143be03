use std::path::Path;
use std::process::{Command, Output};

const PARTICLES: &str = include_str!("../presets/particles.toml");

fn mediator(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mediator"))
        .args(args)
        .env_remove("MEDIATOR_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn negative_width_is_a_schema_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = PARTICLES.replace(
        "psi_c = { mean = 0.0, width = 1.0",
        "psi_c = { mean = 0.0, width = -1.0",
    );
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let o = mediator(&["run", "--config", &cfg, "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("psi_c"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = PARTICLES.replace("refine = true", "refine = true\nrefnie = 1");
    let cfg = write_config(dir.path(), "typo.toml", &text);
    let o = mediator(&["run", "--config", &cfg, "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("refnie"), "{}", stderr(&o));
}

#[test]
fn oversized_grid_is_a_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = PARTICLES.replace(
        "q_grid = { min = -8.0, max = 8.0, points = 129 }",
        "q_grid = { min = -8.0, max = 8.0, points = 4097 }",
    );
    let cfg = write_config(dir.path(), "big.toml", &text);
    let o = mediator(&["run", "--config", &cfg, "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn passing_and_failing_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "pass");
    let o = mediator(&["run", "--preset", "particles", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    for f in ["report.json", "postselected.csv", "timing.json"] {
        assert!(dir.path().join("pass").join(f).exists(), "{f}");
    }

    let text = format!("{PARTICLES}\n[scenario.tolerance]\nmin_entropy = 10.0\n");
    let cfg = write_config(dir.path(), "strict.toml", &text);
    let o = mediator(&["run", "--config", &cfg, "--out", &out_arg(dir.path(), "fail")]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAILED"));
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = out_arg(dir.path(), "a");
    let b = out_arg(dir.path(), "b");
    assert!(mediator(&["run", "--preset", "koopman", "--out", &a]).status.success());
    assert!(mediator(&["run", "--preset", "koopman", "--out", &b]).status.success());
    let read = |d: &str, f: &str| std::fs::read(Path::new(d).join(f)).unwrap();
    assert_eq!(read(&a, "report.json"), read(&b, "report.json"));
    assert_eq!(read(&a, "koopman.csv"), read(&b, "koopman.csv"));
}

#[test]
fn sweep_without_first_coupling_has_no_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let o = mediator(&[
        "sweep",
        "--preset",
        "particles",
        "--param",
        "g1",
        "--values",
        "0",
        "--out",
        &out_arg(dir.path(), "s"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "entropy").unwrap();
    assert!(row[col].parse::<f64>().unwrap().abs() <= 1e-8);
    assert!(dir.path().join("s").join("sweep.csv").exists());
}

#[test]
fn empty_sweep_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = mediator(&[
        "sweep",
        "--preset",
        "particles",
        "--param",
        "g1",
        "--values",
        "",
        "--out",
        &out_arg(dir.path(), "s"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "value,status\n");
}

#[test]
fn sweep_over_unknown_parameter_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = mediator(&[
        "sweep",
        "--preset",
        "particles",
        "--param",
        "nope",
        "--values",
        "1",
        "--out",
        &out_arg(dir.path(), "s"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn general_time_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let text = include_str!("../presets/general.toml").replace("points = 256", "points = 64");
    let cfg = write_config(dir.path(), "general.toml", &text);
    let o = mediator(&[
        "sweep",
        "--config",
        &cfg,
        "--param",
        "t",
        "--values",
        "0,0.5,1.0",
        "--out",
        &out_arg(dir.path(), "s"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let values: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert!(text.lines().skip(1).all(|l| l.contains(",pass,")), "{text}");
}

#[test]
fn tightened_acceptance_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = mediator(&[
        "accept",
        "--only",
        "1,4",
        "--tol",
        "koopman_nogo.negativity=-1",
        "--out",
        &out_arg(dir.path(), "a"),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("criterion 1 FAIL"));
    assert!(stdout(&o).contains("criterion 4 PASS"));
}

#[test]
fn acceptance_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = out_arg(dir.path(), "a");
    let b = out_arg(dir.path(), "b");
    for d in [&a, &b] {
        let o = mediator(&["accept", "--only", "1,2,4", "--out", d]);
        assert!(o.status.success(), "{}", stdout(&o));
    }
    let read = |d: &str| std::fs::read(Path::new(d).join("acceptance.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn lists_presets() {
    let o = mediator(&["list-scenarios"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["koopman", "meanfield", "particles", "general", "brackets"] {
        assert!(text.contains(name), "{name}");
    }
}
