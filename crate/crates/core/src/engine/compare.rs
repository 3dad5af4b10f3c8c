use serde::{Deserialize, Serialize};

use super::{run, ExperimentConfig, RunState, Workflow};
use crate::error::{Error, Result};
use crate::pareto::{reference_point, Objectives};

/// One run of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRun {
    pub repetition: usize,
    /// Position of the workflow in the compared list.
    pub index: usize,
    pub workflow: Workflow,
    pub seed: u64,
    /// Final hypervolume under the repetition's common reference point.
    pub hypervolume: f64,
    pub state: RunState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub workflows: Vec<Workflow>,
    pub repetitions: usize,
    /// Common reference point per repetition.
    pub references: Vec<Objectives>,
    pub runs: Vec<ComparisonRun>,
}

impl ComparisonReport {
    pub fn hypervolume(&self, repetition: usize, index: usize) -> f64 {
        self.runs
            .iter()
            .find(|r| r.repetition == repetition && r.index == index)
            .map_or(0.0, |r| r.hypervolume)
    }

    pub fn hypervolumes(&self, index: usize) -> Vec<f64> {
        (0..self.repetitions).map(|r| self.hypervolume(r, index)).collect()
    }

    /// Repetitions in which workflow `a` reached at least the hypervolume of `b`.
    pub fn at_least(&self, a: usize, b: usize) -> usize {
        (0..self.repetitions)
            .filter(|&r| self.hypervolume(r, a) >= self.hypervolume(r, b))
            .count()
    }

    /// Repetitions in which workflow `index` had the largest hypervolume
    /// (ties count for every tied workflow).
    pub fn wins(&self, index: usize) -> usize {
        (0..self.repetitions)
            .filter(|&r| (0..self.workflows.len()).all(|j| self.hypervolume(r, index) >= self.hypervolume(r, j)))
            .count()
    }

    pub fn median_hypervolume(&self, index: usize) -> f64 {
        let mut v = self.hypervolumes(index);
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }
}

/// Runs every configuration `repetitions` times with seeds
/// `config.engine.seed + repetition`.
pub fn compare_workflows(configs: &[ExperimentConfig], repetitions: usize) -> Result<ComparisonReport> {
    compare_workflows_with(configs, repetitions, &mut |_| {})
}

/// As [`compare_workflows`], reporting each finished run.
pub fn compare_workflows_with(
    configs: &[ExperimentConfig],
    repetitions: usize,
    on_run: &mut dyn FnMut(&ComparisonRun),
) -> Result<ComparisonReport> {
    if repetitions == 0 {
        return Err(Error::config("repetitions must be >= 1"));
    }
    let first = configs
        .first()
        .ok_or_else(|| Error::config("nothing to compare"))?;
    for c in configs {
        c.validate()?;
        if c.problem != first.problem {
            return Err(Error::config("compared workflows must share the problem"));
        }
        if c.total_budget() != first.total_budget() {
            return Err(Error::config(format!(
                "compared workflows must share the budget ({} vs {})",
                c.total_budget(),
                first.total_budget()
            )));
        }
    }
    let mut report = ComparisonReport {
        workflows: configs.iter().map(|c| c.engine.workflow).collect(),
        repetitions,
        references: Vec::with_capacity(repetitions),
        runs: Vec::with_capacity(repetitions * configs.len()),
    };
    for rep in 0..repetitions {
        let mut states = Vec::with_capacity(configs.len());
        for c in configs {
            let mut c = c.clone();
            c.engine.seed = c.engine.seed.wrapping_add(rep as u64);
            log::info!("repetition {rep}: {} seed {}", c.engine.workflow, c.engine.seed);
            states.push(run(&c)?);
        }
        let reference = common_reference(&states, first.reference.margin);
        for (index, state) in states.into_iter().enumerate() {
            let entry = ComparisonRun {
                repetition: rep,
                index,
                workflow: state.workflow(),
                seed: state.config.engine.seed,
                hypervolume: state.hypervolume_with(&reference),
                state,
            };
            on_run(&entry);
            report.runs.push(entry);
        }
        report.references.push(reference);
    }
    Ok(report)
}

/// The reference-point rule applied to every feasible true evaluation of
/// the repetition, verification included.
fn common_reference(states: &[RunState], margin: f64) -> Objectives {
    let all = states.iter().flat_map(|s| {
        s.evaluations
            .iter()
            .chain(s.verification.iter().map(|v| &v.simulated))
    });
    let feasible: Vec<Objectives> = all.clone().filter(|e| e.feasible()).map(|e| e.objectives()).collect();
    let pool = if feasible.is_empty() {
        all.map(|e| e.objectives()).collect()
    } else {
        feasible
    };
    reference_point(&pool, margin).unwrap_or([0.0, 0.0])
}
