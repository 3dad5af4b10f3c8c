//! Acceptance gate: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

mod common;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{cholesky, ei_monte_carlo, hv_inclusion_exclusion, hv_monte_carlo, random_front, uniform_points, DenseGp};
use mobo::acquisition::{ei_from_moments, InnerOptimizer};
use mobo::doe::{is_latin, lhs, lhs_maximin};
use mobo::engine::{compare_workflows_with, run, run_problem, ComparisonReport, ExperimentConfig, RunState, Workflow};
use mobo::export::{write_run_artifacts, CHECKPOINT_FILE};
use mobo::gp::{kernel_eval, GaussianProcessModel, KernelFamily, KernelSpec};
use mobo::pareto::{hypervolume_2d, Objectives};
use mobo::problems::{builtin, Outcome, Problem, Source, VariableSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: usize = 10;
const FAMILIES: [KernelFamily; 3] = [
    KernelFamily::Matern52,
    KernelFamily::Exponential,
    KernelFamily::SquaredExponential,
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// The evaluation protocol used for the workflow comparisons: budget 450,
/// either a 450-point design or 250 points plus 50 batches of 4.
fn protocol(problem: &str, workflow: Workflow) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.problem.name = problem.into();
    c.engine.workflow = workflow;
    c.engine.seed = 1;
    c.engine.initial_doe_size = if workflow == Workflow::Optim1 { 450 } else { 250 };
    c.engine.iterations = 50;
    c.engine.batch_size = 4;
    // desk-scale compute knobs, identical for every workflow that uses them
    c.gp.starts = 2;
    c.gp.refit_starts = 1;
    c.gp.refit_every = 10;
    c.gp.max_iterations = 50;
    c.acquisition.mc_samples = 128;
    c.acquisition.final_mc_samples = 1024;
    c.acquisition.restarts = 4;
    c.acquisition.raw_samples = 256;
    c.acquisition.initial_step = 0.2;
    c.acquisition.min_step = 1e-3;
    c.acquisition.max_evaluations_per_restart = 150;
    c.acquisition.optimizer = InnerOptimizer::Lbfgs;
    c.acquisition.lbfgs_iterations = 50;
    c
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut fails = 0;
    for _ in 0..100 {
        // incumbents within 3 sd of the mean, so the improvement event has
        // probability >= 0.13 % and the sample standard error is non-zero
        let sd = rng.gen_range(0.05..3.0);
        let mean = rng.gen_range(-5.0..5.0);
        let best = mean + sd * rng.gen_range(-3.0..3.0);
        let (mc, se) = ei_monte_carlo(mean, sd * sd, best, 1_000_000, &mut rng);
        let ei = ei_from_moments(mean, sd * sd, best);
        let z = (ei - mc).abs() / se;
        worst = worst.max(z);
        if !(z <= 3.0) {
            fails += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        fails == 0 && t < Duration::from_secs(10),
        format!("100 triples, max |EI - MC| = {worst:.2} SE, {fails} beyond 3 SE, {t:.1?} (limit 10 s)"),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let reference: Objectives = [1.0, 1.0];
    let (mut worst_rel, mut worst_z): (f64, f64) = (0.0, 0.0);
    let (mut ie_fails, mut mc_fails) = (0, 0);
    for _ in 0..50 {
        let front = random_front(rng.gen_range(1..=30), &mut rng);
        let hv = hypervolume_2d(&front, &reference);
        let ie = hv_inclusion_exclusion(&front, &reference);
        let rel = if ie == 0.0 { hv.abs() } else { (hv - ie).abs() / ie.abs() };
        worst_rel = worst_rel.max(rel);
        if !(rel <= 1e-10) {
            ie_fails += 1;
        }
        let (mc, se) = hv_monte_carlo(&front, &reference, 1_000_000, &mut rng);
        let z = if se > 0.0 { (hv - mc).abs() / se } else if hv == mc { 0.0 } else { f64::INFINITY };
        worst_z = worst_z.max(z);
        if !(z <= 3.0) {
            mc_fails += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        ie_fails == 0 && mc_fails == 0 && t < Duration::from_secs(30),
        format!(
            "50 fronts, max rel. dev. from inclusion-exclusion {worst_rel:.1e}, max |HV - MC| = {worst_z:.2} SE \
             ({ie_fails}+{mc_fails} failures), {t:.1?} (limit 30 s)"
        ),
    )
}

fn smooth(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(j, v)| ((j + 1) as f64 * 2.0 * v).sin()).sum::<f64>() + 2.0
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut notes = Vec::new();
    let mut pass = true;

    // noise-free interpolation: no noise term and no jitter in the factor
    let mut worst: f64 = 0.0;
    let mut jittered = 0;
    for family in FAMILIES {
        for (n, d, l) in [(10, 1, 0.15), (30, 3, 0.4), (50, 5, 0.6)] {
            let x = uniform_points(n, d, &mut rng);
            let y: Vec<f64> = x.iter().map(|p| smooth(p)).collect();
            let k = KernelSpec::isotropic(family, d, l, 1.0, 0.0).unwrap();
            let gp = GaussianProcessModel::with_hyperparameters(&x, &y, k).unwrap();
            if gp.state().jitter != 0.0 {
                jittered += 1;
            }
            for (xi, yi) in x.iter().zip(&y) {
                worst = worst.max((gp.predict(xi).unwrap().mean - yi).abs());
            }
        }
    }
    pass &= worst <= 1e-6 && jittered == 0;
    notes.push(format!("interpolation {worst:.1e} ({jittered} cases needed jitter)"));

    // dense-solve equivalence, normwise relative over the query set
    let mut worst: f64 = 0.0;
    for family in FAMILIES {
        for n in [5, 20, 35, 50] {
            let d = 4;
            let x = uniform_points(n, d, &mut rng);
            let y: Vec<f64> = x.iter().map(|p| smooth(p) + 0.05 * rng.gen::<f64>()).collect();
            let ls: Vec<f64> = (0..d).map(|_| rng.gen_range(0.3..1.5)).collect();
            let k = KernelSpec::new(family, ls, rng.gen_range(0.5..2.0), 1e-4).unwrap();
            let gp = GaussianProcessModel::with_hyperparameters(&x, &y, k.clone()).unwrap();
            let dense = DenseGp::new(&x, &y, &k);
            let (mut dm, mut nm, mut dv, mut nv) = (0.0, 0.0, 0.0, 0.0);
            for q in uniform_points(25, d, &mut rng) {
                let p = gp.predict(&q).unwrap();
                let (m, v) = dense.predict(&q);
                dm += (p.mean - m).powi(2);
                nm += m * m;
                dv += (p.variance - v).powi(2);
                nv += v * v;
            }
            worst = worst.max((dm / nm).sqrt()).max((dv / nv).sqrt());
        }
    }
    pass &= worst <= 1e-8;
    notes.push(format!("dense solve {worst:.1e} rel"));

    // variance never increases under conditioning
    let mut worst = f64::NEG_INFINITY;
    for family in FAMILIES {
        for _ in 0..20 {
            let x = uniform_points(15, 3, &mut rng);
            let y: Vec<f64> = x.iter().map(|p| smooth(p)).collect();
            let k = KernelSpec::isotropic(family, 3, rng.gen_range(0.2..1.0), 1.0, 1e-6).unwrap();
            let gp = GaussianProcessModel::with_hyperparameters(&x, &y, k).unwrap();
            let new: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let c = gp.condition_on_virtual(&new, rng.gen_range(0.0..4.0)).unwrap();
            for q in uniform_points(20, 3, &mut rng) {
                worst = worst.max(c.predict(&q).unwrap().variance - gp.predict(&q).unwrap().variance);
            }
        }
    }
    pass &= worst <= 1e-9;
    notes.push(format!("max variance increase {worst:.1e}"));

    // incremental factor against a full refactorization
    let mut worst: f64 = 0.0;
    for family in FAMILIES {
        let x = uniform_points(20, 3, &mut rng);
        let y: Vec<f64> = x.iter().map(|p| smooth(p)).collect();
        let k = KernelSpec::isotropic(family, 3, 0.6, 1.0, 1e-6).unwrap();
        let mut gp = GaussianProcessModel::with_hyperparameters(&x, &y, k).unwrap();
        for _ in 0..8 {
            let new: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            gp = gp.condition_on_virtual(&new, rng.gen_range(0.0..4.0)).unwrap();
        }
        let inputs = gp.training_inputs();
        let noise = gp.diagonal_noise();
        let n = inputs.len();
        let km = DMatrix::from_fn(n, n, |i, j| {
            kernel_eval(gp.kernel(), &inputs[i], &inputs[j]).unwrap() + if i == j { noise[i] } else { 0.0 }
        });
        worst = worst.max((gp.covariance_factor() - cholesky(&km)).abs().max());
    }
    pass &= worst <= 1e-8;
    notes.push(format!("incremental factor {worst:.1e}"));

    verdict(pass, notes.join(", "))
}

fn criterion_4() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for (n, d) in [(250, 12), (450, 12), (40, 6)] {
        let mut improved = 0;
        let mut latin = true;
        for seed in 0..SEEDS as u64 {
            let base = lhs(n, d, seed).unwrap();
            let opt = lhs_maximin(n, d, seed).unwrap();
            latin &= is_latin(&opt.points) && is_latin(&base.points);
            if opt.maximin_distance >= base.maximin_distance {
                improved += 1;
            }
        }
        pass &= latin && improved == SEEDS;
        notes.push(format!("({n},{d}): latin {latin}, maximin >= baseline {improved}/{SEEDS}"));
    }
    verdict(pass, notes.join("; "))
}

/// Counts every call that reaches the wrapped problem.
struct Counted {
    inner: Arc<dyn Problem>,
    calls: AtomicUsize,
}

impl Problem for Counted {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn variables(&self) -> &[VariableSpec] {
        self.inner.variables()
    }
    fn evaluate_unit(&self, x: &[f64]) -> mobo::Result<Outcome> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate_unit(x)
    }
}

fn criterion_5() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for wf in [Workflow::Optim1, Workflow::Optim2, Workflow::Optim3] {
        let c = protocol("bnh", wf);
        let counted = Arc::new(Counted {
            inner: builtin("bnh").unwrap(),
            calls: AtomicUsize::new(0),
        });
        let state = run_problem(&c, counted.clone(), &mut |_| Ok(())).unwrap();
        let calls = counted.calls.load(Ordering::SeqCst);
        // verification re-evaluations of the fixed-surrogate front are reported separately
        let charged = calls - state.verification.len();
        let by_source = state.evaluations.iter().filter(|e| e.source == Source::Doe).count();
        pass &= charged == 450 && state.budget_used() == 450 && c.total_budget() == 450;
        notes.push(format!("{wf}: {charged} charged calls ({by_source} design)"));
    }
    verdict(pass, notes.join(", "))
}

fn comparison(problem: &str) -> ComparisonReport {
    let configs: Vec<ExperimentConfig> = [Workflow::Optim1, Workflow::Optim2, Workflow::Optim3]
        .into_iter()
        .map(|w| protocol(problem, w))
        .collect();
    let start = Instant::now();
    compare_workflows_with(&configs, SEEDS, &mut |r| {
        eprintln!(
            "  [{problem}] {:>6.0?} seed {} {}: hv {:.4}",
            start.elapsed(),
            r.seed,
            r.workflow,
            r.hypervolume
        );
    })
    .unwrap()
}

fn criterion_6(reports: &[(&str, &ComparisonReport)], elapsed: Duration) -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, r) in reports {
        for (i, wf) in r.workflows.iter().enumerate().skip(1) {
            let k = r.at_least(i, 0);
            pass &= k >= 8;
            notes.push(format!(
                "{name} {wf} >= optim1 in {k}/{SEEDS} (median {:.4} vs {:.4})",
                r.median_hypervolume(i),
                r.median_hypervolume(0)
            ));
        }
    }
    pass &= elapsed <= Duration::from_secs(30 * 60);
    notes.push(format!("{elapsed:.0?} (limit 30 min)"));
    verdict(pass, notes.join("; "))
}

fn criterion_7(report: &ComparisonReport) -> Verdict {
    let ratios: Vec<f64> = report
        .runs
        .iter()
        .filter(|r| r.workflow == Workflow::Optim1)
        .map(|r| r.state.gap.as_ref().map_or(f64::NAN, |g| g.ratio))
        .collect();
    let k = ratios.iter().filter(|r| **r >= 2.0).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    verdict(k >= 8, format!("front/LOO error ratio >= 2 in {k}/{SEEDS} seeds [{}]", shown.join(", ")))
}

fn criterion_8() -> Verdict {
    let mut c = protocol("bnh", Workflow::Optim3);
    c.engine.initial_doe_size = 20;
    c.engine.iterations = 20;
    c.engine.batch_size = 4;
    c.acquisition.variance_scale = 1e-12;
    let state = run(&c).unwrap();
    let mut full = 0;
    let mut duplicates = 0;
    let mut fallbacks = 0;
    let mut closest = f64::INFINITY;
    for l in &state.log {
        if l.points.len() == 4 {
            full += 1;
        }
        for i in 0..l.points.len() {
            for j in 0..i {
                let d = l.points[i].iter().zip(&l.points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                closest = closest.min(d);
                if l.points[i] == l.points[j] {
                    duplicates += 1;
                }
            }
        }
        fallbacks += l.fallback.iter().filter(|f| **f).count();
    }
    verdict(
        full == 20 && duplicates == 0 && state.log.len() == 20,
        format!(
            "{full}/20 batches of 4, {duplicates} duplicate pairs (closest pair {closest:.2e} apart), \
             {fallbacks} space-filling fallbacks"
        ),
    )
}

fn artifacts(state: &RunState, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let problem = state.config.problem.instantiate().unwrap();
    write_run_artifacts(state, problem.as_ref(), dir).unwrap();
    state.save(&dir.join(CHECKPOINT_FILE)).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for wf in [Workflow::Optim1, Workflow::Optim2, Workflow::Optim3] {
        let mut c = protocol("synrel-toy", wf);
        c.engine.seed = 7;
        c.engine.initial_doe_size = 40;
        c.engine.iterations = 3;
        c.moea.generations = 30;
        let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                artifacts(&run(&c).unwrap(), dir.path())
            })
            .collect();
        let same = runs[0] == runs[1] && !runs[0].is_empty();
        pass &= same;
        notes.push(format!("{wf}: {} files {}", runs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    verdict(pass, notes.join(", "))
}

fn main() {
    let mut verdicts: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut report = |n: usize, name: &'static str, v: Verdict| {
        println!("{} criterion {n} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push((n, name, v));
    };
    report(1, "analytic EI fidelity", criterion_1());
    report(2, "hypervolume exactness", criterion_2());
    report(3, "GP correctness", criterion_3());
    report(4, "LHS validity", criterion_4());
    report(5, "budget parity", criterion_5());
    let start = Instant::now();
    let synrel = comparison("synrel-toy");
    let bnh = comparison("bnh");
    let elapsed = start.elapsed();
    report(6, "BO vs fixed surrogates", criterion_6(&[("synrel-toy", &synrel), ("bnh", &bnh)], elapsed));
    report(7, "extrapolation gap", criterion_7(&synrel));
    report(8, "greedy batch sanity", criterion_8());
    report(9, "determinism", criterion_9());

    let failed = verdicts.iter().filter(|(_, _, v)| !v.pass).count();
    println!("acceptance: {} of {} criteria pass", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
