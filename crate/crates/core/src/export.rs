//! Run artifacts: tidy CSV tables, a config snapshot, a JSON summary and a
//! JSON-lines run log. Every row carries the config hash and seed; nothing
//! time-dependent is written, so equal runs give equal bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::engine::{ComparisonReport, GapReport, RunState, Workflow};
use crate::error::Result;
use crate::pareto::Objectives;
use crate::problems::Problem;

pub const EVALUATIONS_FILE: &str = "evaluations.csv";
pub const FRONT_FILE: &str = "front.csv";
pub const PREDICTED_FRONT_FILE: &str = "predicted_front.csv";
pub const HV_FILE: &str = "hv_trajectory.csv";
pub const VERIFICATION_FILE: &str = "verification.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LOG_FILE: &str = "run.log";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

fn num(v: f64) -> String {
    format!("{v}")
}

fn point_columns(problem: &dyn Problem) -> Vec<String> {
    problem.variables().iter().map(|v| v.name.clone()).collect()
}

fn display_columns(problem: &dyn Problem) -> Vec<String> {
    problem.display_names().iter().map(|s| s.to_string()).collect()
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: Vec<String>) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(&header)?;
        Ok(Table { writer })
    }

    fn row(&mut self, row: Vec<String>) -> Result<()> {
        self.writer.write_record(&row)?;
        Ok(())
    }

    fn save(self, path: &Path) -> Result<()> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        fs::write(path, bytes)?;
        Ok(())
    }
}

fn header(prefix: &[&str], problem: &dyn Problem, with_point: bool, tail: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    if with_point {
        h.extend(point_columns(problem));
    }
    h.extend(tail.iter().map(|s| s.to_string()));
    h
}

/// Objective and constraint columns: internal `f1, f2, g` followed by the
/// displayed (negated) objectives.
fn outcome_cells(f1: f64, f2: f64, g: f64) -> Vec<String> {
    vec![num(f1), num(f2), num(g), num(-f1), num(-f2)]
}

fn outcome_header(problem: &dyn Problem) -> Vec<String> {
    let mut h = vec!["f1".to_string(), "f2".into(), "g".into()];
    h.extend(display_columns(problem));
    h
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: String,
    seed: u64,
    problem: &'a str,
    workflow: Workflow,
    dimension: usize,
    total_budget: usize,
    evaluations: usize,
    iterations: usize,
    complete: bool,
    reference: Option<Objectives>,
    hypervolume: f64,
    front_size: usize,
    feasible_evaluations: usize,
    verified: usize,
    gap: Option<&'a GapReport>,
    objective_names: [&'a str; 2],
    constraint_name: &'a str,
}

#[derive(Serialize)]
struct LogLine<'a> {
    config_hash: &'a str,
    seed: u64,
    iteration: usize,
    points: &'a [Vec<f64>],
    criterion: &'a [f64],
    weights: &'a [Option<f64>],
    fallback: &'a [bool],
    outcomes: &'a [[f64; 3]],
    hypervolume: f64,
    refit: bool,
}

/// Writes all artifacts of one run into `dir` (created if missing).
pub fn write_run_artifacts(state: &RunState, problem: &dyn Problem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let hash = state.config.hash();
    let seed = state.config.engine.seed;
    let tag = || vec![hash.clone(), seed.to_string()];

    let mut t = Table::new({
        let mut h = header(&["config_hash", "seed", "index", "source"], problem, true, &[]);
        h.extend(outcome_header(problem));
        h.push("feasible".into());
        h
    })?;
    for (i, e) in state.evaluations.iter().enumerate() {
        let mut r = tag();
        r.push(i.to_string());
        r.push(e.source.to_string());
        r.extend(e.point.iter().map(|v| num(*v)));
        r.extend(outcome_cells(e.f1, e.f2, e.g));
        r.push(e.feasible().to_string());
        t.row(r)?;
    }
    t.save(&dir.join(EVALUATIONS_FILE))?;

    let front = state.final_front();
    let mut t = Table::new({
        let mut h = header(&["config_hash", "seed", "order", "source"], problem, true, &[]);
        h.extend(outcome_header(problem));
        h
    })?;
    for (i, e) in front.iter().enumerate() {
        let mut r = tag();
        r.push(i.to_string());
        r.push(e.source.to_string());
        r.extend(e.point.iter().map(|v| num(*v)));
        r.extend(outcome_cells(e.f1, e.f2, e.g));
        t.row(r)?;
    }
    t.save(&dir.join(FRONT_FILE))?;

    let mut t = Table::new(header(
        &["config_hash", "seed", "iteration", "evaluations", "hypervolume"],
        problem,
        false,
        &[],
    ))?;
    let doe = state.config.engine.initial_doe_size;
    let q = state.config.engine.batch_size;
    for (k, hv) in state.hv_trajectory.iter().enumerate() {
        let mut r = tag();
        r.push(k.to_string());
        r.push((doe + k * q).to_string());
        r.push(num(*hv));
        t.row(r)?;
    }
    t.save(&dir.join(HV_FILE))?;

    if state.workflow() == Workflow::Optim1 {
        let mut t = Table::new({
            let mut h = header(&["config_hash", "seed", "index"], problem, true, &[]);
            h.extend(["predicted_f1", "predicted_f2", "predicted_g"].map(String::from));
            h.extend(outcome_header(problem));
            h.extend(["abs_error_f1", "abs_error_f2"].map(String::from));
            h
        })?;
        for (i, v) in state.verification.iter().enumerate() {
            let mut r = tag();
            r.push(i.to_string());
            r.extend(v.point.iter().map(|x| num(*x)));
            r.extend([num(v.predicted[0]), num(v.predicted[1]), num(v.predicted_g)]);
            let s = &v.simulated;
            r.extend(outcome_cells(s.f1, s.f2, s.g));
            r.extend([num(v.discrepancy[0]), num(v.discrepancy[1])]);
            t.row(r)?;
        }
        t.save(&dir.join(VERIFICATION_FILE))?;

        let mut t = Table::new({
            let mut h = header(&["config_hash", "seed", "order"], problem, true, &[]);
            h.extend(outcome_header(problem));
            h
        })?;
        for (i, ind) in state.front.iter().enumerate() {
            let mut r = tag();
            r.push(i.to_string());
            r.extend(ind.point.iter().map(|x| num(*x)));
            r.extend(outcome_cells(ind.objectives[0], ind.objectives[1], ind.constraint));
            t.row(r)?;
        }
        t.save(&dir.join(PREDICTED_FRONT_FILE))?;
    }

    fs::write(dir.join(CONFIG_FILE), state.config.to_toml())?;

    let summary = Summary {
        config_hash: hash.clone(),
        seed,
        problem: problem.name(),
        workflow: state.workflow(),
        dimension: problem.dimension(),
        total_budget: state.config.total_budget(),
        evaluations: state.budget_used(),
        iterations: state.iteration,
        complete: state.complete,
        reference: state.reference,
        hypervolume: state.final_hypervolume(),
        front_size: front.len(),
        feasible_evaluations: state.evaluations.iter().filter(|e| e.feasible()).count(),
        verified: state.verification.len(),
        gap: state.gap.as_ref(),
        objective_names: problem.display_names(),
        constraint_name: problem.constraint_name(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join(SUMMARY_FILE), text)?;

    let mut log = String::new();
    for l in &state.log {
        let line = LogLine {
            config_hash: &hash,
            seed,
            iteration: l.iteration,
            points: &l.points,
            criterion: &l.criterion,
            weights: &l.weights,
            fallback: &l.fallback,
            outcomes: &l.outcomes,
            hypervolume: l.hypervolume,
            refit: l.refit,
        };
        log.push_str(&serde_json::to_string(&line)?);
        log.push('\n');
    }
    fs::write(dir.join(LOG_FILE), log)?;
    Ok(())
}

/// File stem for workflow `index` of a comparison; the position is
/// appended only when a workflow appears more than once.
pub fn comparison_label(report: &ComparisonReport, index: usize) -> String {
    let w = report.workflows[index];
    if report.workflows.iter().filter(|&&x| x == w).count() > 1 {
        format!("{w}_{index}")
    } else {
        w.to_string()
    }
}

#[derive(Serialize)]
struct WorkflowSummary {
    label: String,
    workflow: Workflow,
    median_hypervolume: f64,
    wins: usize,
    /// Repetitions with hypervolume at least that of each listed workflow.
    at_least: Vec<usize>,
}

#[derive(Serialize)]
struct ComparisonSummary {
    problem: String,
    repetitions: usize,
    runs: usize,
    references: Vec<Objectives>,
    workflows: Vec<WorkflowSummary>,
}

/// Writes per-workflow front tables, hypervolume curves and a summary.
pub fn write_comparison(report: &ComparisonReport, problem: &dyn Problem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let n = report.workflows.len();
    for index in 0..n {
        let label = comparison_label(report, index);
        let mut t = Table::new({
            let mut h = header(&["config_hash", "seed", "repetition", "order", "source"], problem, true, &[]);
            h.extend(outcome_header(problem));
            h
        })?;
        for run in report.runs.iter().filter(|r| r.index == index) {
            for (i, e) in run.state.final_front().iter().enumerate() {
                let mut r = vec![run.state.config.hash(), run.seed.to_string()];
                r.push(run.repetition.to_string());
                r.push(i.to_string());
                r.push(e.source.to_string());
                r.extend(e.point.iter().map(|v| num(*v)));
                r.extend(outcome_cells(e.f1, e.f2, e.g));
                t.row(r)?;
            }
        }
        t.save(&dir.join(format!("front_{label}.csv")))?;
    }

    let mut t = Table::new(
        [
            "config_hash", "seed", "repetition", "workflow", "evaluations", "verified",
            "hypervolume", "reference_f1", "reference_f2",
        ]
        .map(String::from)
        .to_vec(),
    )?;
    for run in &report.runs {
        let reference = report.references[run.repetition];
        t.row(vec![
            run.state.config.hash(),
            run.seed.to_string(),
            run.repetition.to_string(),
            comparison_label(report, run.index),
            run.state.budget_used().to_string(),
            run.state.verification.len().to_string(),
            num(run.hypervolume),
            num(reference[0]),
            num(reference[1]),
        ])?;
    }
    t.save(&dir.join("summary.csv"))?;

    let mut t = Table::new(
        ["config_hash", "seed", "repetition", "workflow", "iteration", "evaluations", "hypervolume"]
            .map(String::from)
            .to_vec(),
    )?;
    for run in &report.runs {
        let c = &run.state.config.engine;
        for (k, hv) in run.state.hv_trajectory.iter().enumerate() {
            t.row(vec![
                run.state.config.hash(),
                run.seed.to_string(),
                run.repetition.to_string(),
                comparison_label(report, run.index),
                k.to_string(),
                (c.initial_doe_size + k * c.batch_size).to_string(),
                num(*hv),
            ])?;
        }
    }
    t.save(&dir.join("hv_curves.csv"))?;

    let summary = ComparisonSummary {
        problem: problem.name().to_string(),
        repetitions: report.repetitions,
        runs: report.runs.len(),
        references: report.references.clone(),
        workflows: (0..n)
            .map(|i| WorkflowSummary {
                label: comparison_label(report, i),
                workflow: report.workflows[i],
                median_hypervolume: report.median_hypervolume(i),
                wins: report.wins(i),
                at_least: (0..n).map(|j| report.at_least(i, j)).collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join("comparison.json"), text)?;
    Ok(())
}

/// Writes a design as CSV with one column per variable.
pub fn write_design(points: &[Vec<f64>], columns: &[String], path: &Path) -> Result<()> {
    let mut t = Table::new(columns.to_vec())?;
    for p in points {
        t.row(p.iter().map(|v| num(*v)).collect())?;
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    t.save(path)
}
