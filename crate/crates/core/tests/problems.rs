use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mobo::pareto::{dominates, Objectives};
use mobo::problems::{builtin, external_adapter, Bnh, Problem, Simulator, Source, SynrelToy, FEM_THRESHOLD};
use mobo::Error;
use proptest::prelude::*;

/// A mock simulator: answers with `f1 = x1`, `f2 = 1 - x1`, `g = x2 - 0.5`.
const ECHO: &str = r#"read line
id=$(printf '%s' "$line" | sed 's/.*"id":\([0-9]*\).*/\1/')
xs=$(printf '%s' "$line" | sed 's/.*"x":\[\([^]]*\)\].*/\1/')
x1=$(printf '%s' "$xs" | cut -d, -f1)
x2=$(printf '%s' "$xs" | cut -d, -f2)
awk -v id="$id" -v a="$x1" -v b="$x2" 'BEGIN { printf "{\"id\":%s,\"f1\":%.17g,\"f2\":%.17g,\"g\":%.17g}\n", id, a, 1 - a, b - 0.5 }'
"#;

fn script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    format!("sh {}", path.display())
}

#[test]
fn external_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "echo.sh", ECHO);
    let problem = external_adapter(&cmd, 2, Duration::from_secs(20)).unwrap();
    let sim = Simulator::new(Arc::new(problem));
    let e = sim.evaluate(&[0.25, 0.75], Source::Doe).unwrap();
    assert_eq!((e.f1, e.f2, e.g), (0.25, 0.75, 0.25));
    let e = sim.evaluate(&[0.125, 0.0], Source::BoIteration(3)).unwrap();
    assert_eq!((e.f1, e.f2, e.g), (0.125, 0.875, -0.5));
    assert_eq!(e.source, Source::BoIteration(3));
}

#[test]
fn external_failures_are_evaluation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("nan.sh", "read line\necho '{\"id\":0,\"f1\":NaN,\"f2\":1,\"g\":0}'\n"),
        ("inf.sh", "read line\necho '{\"id\":0,\"f1\":1e999,\"f2\":1,\"g\":0}'\n"),
        ("silent.sh", "read line\n"),
        ("crash.sh", "read line\necho '{\"id\":0,\"f1\":1,\"f2\":1,\"g\":0}'\nexit 3\n"),
        ("wrong_id.sh", "read line\necho '{\"id\":42,\"f1\":1,\"f2\":1,\"g\":0}'\n"),
        ("garbage.sh", "read line\necho 'hello'\n"),
    ];
    for (name, body) in cases {
        let cmd = script(dir.path(), name, body);
        let problem = external_adapter(&cmd, 1, Duration::from_secs(20)).unwrap();
        let err = problem.evaluate_unit(&[0.5]).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }), "{name}: {err}");
    }
}

#[test]
fn external_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "slow.sh", "read line\nsleep 5\n");
    let problem = external_adapter(&cmd, 1, Duration::from_millis(300)).unwrap();
    let start = Instant::now();
    let err = problem.evaluate_unit(&[0.5]).unwrap_err();
    assert!(err.to_string().contains("timed out"), "{err}");
    assert!(start.elapsed() < Duration::from_secs(4));
}

#[test]
fn external_batches_run_concurrently() {
    let dir = tempfile::tempdir().unwrap();
    let marks = dir.path().join("marks");
    fs::create_dir(&marks).unwrap();
    // each child records its pid, then waits until four children exist
    let body = format!(
        "touch {m}/$$\nn=0\nwhile [ $(ls {m} | wc -l) -lt 4 ] && [ $n -lt 100 ]; do sleep 0.05; n=$((n+1)); done\n{echo}",
        m = marks.display(),
        echo = ECHO
    );
    let cmd = script(dir.path(), "conc.sh", &body);
    let problem = external_adapter(&cmd, 2, Duration::from_secs(30)).unwrap().with_concurrency(4);
    let sim = Simulator::new(Arc::new(problem));
    let points: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 / 4.0, 0.5]).collect();
    let start = Instant::now();
    let out = sim.evaluate_batch(&points, Source::Doe).unwrap();
    // serial execution would spin out every wait loop (about 5 s each)
    assert!(start.elapsed() < Duration::from_secs(5), "{:?}", start.elapsed());
    assert_eq!(fs::read_dir(&marks).unwrap().count(), 4);
    for (p, e) in points.iter().zip(&out) {
        assert_eq!(e.f1, p[0]);
    }
}

#[test]
fn external_adapter_validates_arguments() {
    assert!(external_adapter("  ", 2, Duration::from_secs(1)).is_err());
    assert!(external_adapter("true", 0, Duration::from_secs(1)).is_err());
}

#[test]
fn bnh_front_is_not_beaten_by_samples() {
    let bnh = Bnh::new();
    let front = bnh.known_front(400).unwrap();
    let sim = Simulator::new(builtin("bnh").unwrap());
    for i in 0..=40 {
        for j in 0..=40 {
            let e = sim.evaluate(&[i as f64 / 40.0, j as f64 / 40.0], Source::Doe).unwrap();
            if !e.feasible() {
                continue;
            }
            // allow for the front being a finite sample of the curve
            let o = e.objectives();
            let shrunk: Objectives = [o[0] * (1.0 + 1e-2) + 1e-2, o[1] * (1.0 + 1e-2) + 1e-2];
            assert!(!front.iter().any(|f| dominates(&shrunk, f)), "{o:?} beats the front");
        }
    }
}

#[test]
fn bnh_reference_values() {
    let o = Bnh::evaluate_real(0.0, 0.0);
    assert_eq!((o.f1, o.f2), (0.0, 50.0));
    assert!(o.g <= 0.0);
    let o = Bnh::evaluate_real(5.0, 3.0);
    assert_eq!((o.f1, o.f2), (136.0, 4.0));
}

#[test]
fn synrel_toy_is_reproducible_and_mixed() {
    let toy = SynrelToy::new();
    assert_eq!(toy.dimension(), 12);
    let mut feasible = 0;
    for k in 0..200 {
        let x: Vec<f64> = (0..12).map(|j| ((k * 37 + j * 11) % 101) as f64 / 100.0).collect();
        let a = toy.evaluate_unit(&x).unwrap();
        assert_eq!(a, toy.evaluate_unit(&x).unwrap());
        if a.g <= 0.0 {
            feasible += 1;
        }
    }
    assert!(feasible > 20 && feasible < 200, "{feasible} feasible of 200");
    assert!(SynrelToy::constraint_from_fem(FEM_THRESHOLD) == 0.0);
}

proptest! {
    #[test]
    fn variable_mapping_round_trips(u in 0.0f64..=1.0, var in 0usize..12) {
        let toy = SynrelToy::new();
        let v = &toy.variables()[var];
        let norm = v.from_unit(u);
        let real = v.denormalize(norm).unwrap();
        prop_assert!(real >= v.min_real - 1e-9 && real <= v.max_real + 1e-9);
        prop_assert!((v.normalize(real).unwrap() - norm).abs() < 1e-12);
        prop_assert!((v.to_unit(norm) - u).abs() < 1e-12);
    }
}
