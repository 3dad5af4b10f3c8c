use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mobo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobo"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MOBO_OUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

const SMALL: &str = r#"
[problem]
name = "bnh"

[engine]
workflow = "optim3"
initial_doe_size = 10
iterations = 2
batch_size = 2
seed = 3

[gp]
starts = 1
max_iterations = 20

[doe]
proposals_per_dim = 100

[acquisition]
mc_samples = 32
final_mc_samples = 64
restarts = 2
raw_samples = 16
max_evaluations_per_restart = 40

[moea]
population = 12
generations = 5
verification_points = 3
"#;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_twice_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    for out in ["a", "b"] {
        let o = mobo(&["run", "--config", "exp.toml", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = files(&dir.path().join("a"));
    assert_eq!(a, files(&dir.path().join("b")));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for f in ["evaluations.csv", "front.csv", "hv_trajectory.csv", "summary.json", "run.log", "checkpoint.json"] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
}

#[test]
fn flags_override_the_config_and_name_the_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let o = mobo(
        &["run", "--config", "exp.toml", "--workflow", "optim1", "--doe", "14", "--seed", "8"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("bnh-optim1-8");
    let evals = fs::read_to_string(out.join("evaluations.csv")).unwrap();
    assert_eq!(evals.lines().count(), 15);
    assert!(out.join("verification.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("extrapolation gap"));
}

#[test]
fn out_dir_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mobo"))
        .args(["run", "--config", "exp.toml", "--iters", "0"])
        .current_dir(dir.path())
        .env("MOBO_OUT_DIR", "runs")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("runs/bnh-optim3-3/summary.json").exists());
}

#[test]
fn resume_finishes_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    assert!(mobo(&["run", "--config", "exp.toml", "--out", "full"], dir.path()).status.success());
    assert!(mobo(&["run", "--config", "exp.toml", "--out", "part"], dir.path()).status.success());
    // a finished checkpoint resumes to the same state
    let o = mobo(&["run", "--resume", "part/checkpoint.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&dir.path().join("full")), files(&dir.path().join("part")));
}

#[test]
fn bad_configurations_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = mobo(&["run", "--problem", "nope", "--iters", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "[engine]\ncolour = 1\n").unwrap();
    assert_eq!(mobo(&["run", "--config", "bad.toml"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("budget.toml"), "[engine]\ntotal_budget = 7\n").unwrap();
    assert_eq!(mobo(&["run", "--config", "budget.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_external_evaluation_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sim.sh"), "read line\nexit 1\n").unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let o = mobo(
        &["run", "--config", "exp.toml", "--external-cmd", "sh sim.sh", "--dim", "2", "--out", "ext"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn compare_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let o = mobo(
        &["compare", "--config", "exp.toml", "--workflow", "optim1,optim3", "--repetitions", "2", "--out", "cmp"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("cmp/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(dir.path().join("cmp/comparison.json").exists());
}

#[test]
fn doe_writes_a_latin_design() {
    let dir = tempfile::tempdir().unwrap();
    let o = mobo(&["doe", "-n", "20", "-d", "3", "--seed", "2", "--out", "d.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("maximin distance"));
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,x3"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 20);
    for j in 0..3 {
        let mut strata: Vec<usize> = rows.iter().map(|r| (r[j] * 20.0).floor() as usize).collect();
        strata.sort();
        assert_eq!(strata, (0..20).collect::<Vec<_>>());
    }

    let o = mobo(&["doe", "-n", "12", "--problem", "synrel-toy", "--out", "s.csv"], dir.path());
    assert!(o.status.success());
    let header = fs::read_to_string(dir.path().join("s.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 12);
    assert_eq!(mobo(&["doe", "-n", "12", "--out", "x.csv"], dir.path()).status.code(), Some(2));
}
