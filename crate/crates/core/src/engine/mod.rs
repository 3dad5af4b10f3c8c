//! The three workflows end to end, under one evaluation budget:
//! design, surrogate fits, batch selection or NSGA-II, true evaluations,
//! and the resumable run state that ties them together.

mod compare;
mod config;

pub use compare::{compare_workflows, compare_workflows_with, ComparisonReport, ComparisonRun};
pub use config::{
    CompareConfig, DoeConfig, EngineConfig, ExperimentConfig, GpConfig, MoeaConfig, ProblemConfig,
    ReferenceConfig, Workflow,
};

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::acquisition::{qehvi_select, qparego_select, AcquisitionContext, Observation};
use crate::doe::lhs_maximin_with;
use crate::error::{Error, Result};
use crate::gp::{fit_with, GaussianProcessModel, GpState, SurrogateSet};
use crate::moea::{final_front, nsga2_run, select_for_verification, verify_front, Individual, Verification};
use crate::pareto::{hypervolume_2d, non_dominated_filter, reference_point, Objectives, ParetoArchive};
use crate::problems::{Evaluation, Problem, Simulator, Source};
use crate::rng::{derive_seed, Stream};

/// Version tag of the serialized [`RunState`].
pub const STATE_VERSION: u32 = 1;

/// What one Bayesian iteration selected and observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    /// 1-based iteration number.
    pub iteration: usize,
    pub points: Vec<Vec<f64>>,
    pub criterion: Vec<f64>,
    pub weights: Vec<Option<f64>>,
    pub fallback: Vec<bool>,
    /// True `(f1, f2, g)` per point.
    pub outcomes: Vec<[f64; 3]>,
    /// Archive hypervolume after the iteration.
    pub hypervolume: f64,
    /// Whether hyperparameters were refitted for this iteration.
    pub refit: bool,
}

/// Surrogate error on verified front designs against in-design
/// cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Mean absolute leave-one-out residual per objective.
    pub loo_mae: [f64; 2],
    /// Mean absolute predicted-vs-true discrepancy per objective.
    pub front_mae: [f64; 2],
    /// Mean over objectives of `front_mae / loo_mae`.
    pub ratio: f64,
}

/// Everything needed to report on or continue a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    pub config: ExperimentConfig,
    /// True evaluations charged to the budget, in order.
    pub evaluations: Vec<Evaluation>,
    /// Hyperparameters of the last fitted `(f1, f2, g)` models.
    pub models: Option<[GpState; 3]>,
    /// Frozen after the design.
    pub reference: Option<Objectives>,
    /// Completed Bayesian iterations.
    pub iteration: usize,
    /// Archive hypervolume after the design, then after each iteration.
    pub hv_trajectory: Vec<f64>,
    pub log: Vec<IterationLog>,
    /// Predicted NSGA-II front (fixed-surrogate workflow).
    pub front: Vec<Individual>,
    /// Front designs re-evaluated on the true function, outside the budget.
    pub verification: Vec<Verification>,
    pub gap: Option<GapReport>,
    pub complete: bool,
}

impl RunState {
    pub fn new(config: ExperimentConfig) -> Self {
        RunState {
            version: STATE_VERSION,
            config,
            evaluations: Vec::new(),
            models: None,
            reference: None,
            iteration: 0,
            hv_trajectory: Vec::new(),
            log: Vec::new(),
            front: Vec::new(),
            verification: Vec::new(),
            gap: None,
            complete: false,
        }
    }

    /// True evaluations charged to the budget so far.
    pub fn budget_used(&self) -> usize {
        self.evaluations.len()
    }

    pub fn workflow(&self) -> Workflow {
        self.config.engine.workflow
    }

    /// Feasible non-dominated true evaluations.
    pub fn archive(&self) -> Option<ParetoArchive> {
        let reference = self.reference?;
        let mut a = ParetoArchive::new(reference);
        for e in &self.evaluations {
            a.insert(&e.point, e.objectives(), e.g);
        }
        Some(a)
    }

    /// The true-value front a workflow is judged on: the archive for the
    /// Bayesian workflows, the feasible non-dominated verified designs for
    /// the fixed-surrogate one.
    pub fn final_front(&self) -> Vec<Evaluation> {
        let pool: Vec<&Evaluation> = match self.workflow() {
            Workflow::Optim1 => self.verification.iter().map(|v| &v.simulated).collect(),
            _ => self.evaluations.iter().collect(),
        };
        let feasible: Vec<&Evaluation> = pool.into_iter().filter(|e| e.feasible()).collect();
        let objs: Vec<Objectives> = feasible.iter().map(|e| e.objectives()).collect();
        let mut front: Vec<Evaluation> = non_dominated_filter(&objs)
            .into_iter()
            .map(|i| feasible[i].clone())
            .collect();
        front.sort_by(|a, b| a.f1.total_cmp(&b.f1).then(a.f2.total_cmp(&b.f2)));
        front
    }

    pub fn hypervolume_with(&self, reference: &Objectives) -> f64 {
        let objs: Vec<Objectives> = self.final_front().iter().map(|e| e.objectives()).collect();
        hypervolume_2d(&objs, reference)
    }

    /// Final hypervolume under the run's own reference point.
    pub fn final_hypervolume(&self) -> f64 {
        self.reference.map_or(0.0, |r| self.hypervolume_with(&r))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: RunState = serde_json::from_str(text)?;
        if state.version != STATE_VERSION {
            return Err(Error::config(format!(
                "unsupported run state version {} (expected {STATE_VERSION})",
                state.version
            )));
        }
        Ok(state)
    }

    /// Writes the checkpoint through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Called with the state after the design and after every iteration.
pub type Observer<'a> = dyn FnMut(&RunState) -> Result<()> + 'a;

/// Runs the configured workflow on the configured problem.
pub fn run(config: &ExperimentConfig) -> Result<RunState> {
    run_with(config, &mut |_| Ok(()))
}

pub fn run_with(config: &ExperimentConfig, observer: &mut Observer<'_>) -> Result<RunState> {
    config.validate()?;
    let problem = config.problem.instantiate()?;
    execute(RunState::new(config.clone()), problem, observer)
}

/// Runs the configured workflow on a caller-supplied problem.
pub fn run_problem(
    config: &ExperimentConfig,
    problem: Arc<dyn Problem>,
    observer: &mut Observer<'_>,
) -> Result<RunState> {
    config.validate()?;
    execute(RunState::new(config.clone()), problem, observer)
}

/// Bayesian workflow (qParEGO or qEHVI).
pub fn run_bo(config: &ExperimentConfig) -> Result<RunState> {
    if !config.engine.workflow.is_bayesian() {
        return Err(Error::config("run_bo needs workflow optim2 or optim3"));
    }
    run(config)
}

/// Fixed-surrogate workflow with NSGA-II and verification.
pub fn run_fixed_surrogate(config: &ExperimentConfig) -> Result<RunState> {
    if config.engine.workflow != Workflow::Optim1 {
        return Err(Error::config("run_fixed_surrogate needs workflow optim1"));
    }
    run(config)
}

/// Continues a saved run; the remaining steps are identical to those of an
/// uninterrupted run.
pub fn resume(state: RunState, observer: &mut Observer<'_>) -> Result<RunState> {
    state.config.validate()?;
    let problem = state.config.problem.instantiate()?;
    execute(state, problem, observer)
}

pub fn resume_problem(
    state: RunState,
    problem: Arc<dyn Problem>,
    observer: &mut Observer<'_>,
) -> Result<RunState> {
    state.config.validate()?;
    execute(state, problem, observer)
}

fn execute(mut state: RunState, problem: Arc<dyn Problem>, observer: &mut Observer<'_>) -> Result<RunState> {
    let d = problem.dimension();
    if state.complete {
        return Ok(state);
    }
    let simulator = Simulator::new(problem);
    let cfg = state.config.clone();
    if state.evaluations.is_empty() {
        let design = lhs_maximin_with(
            cfg.engine.initial_doe_size,
            d,
            derive_seed(cfg.engine.seed, Stream::Doe, 0),
            cfg.doe.proposals_per_dim * d,
        )?;
        state.evaluations = simulator.evaluate_batch(&design.points, Source::Doe)?;
        let feasible: Vec<Objectives> = state
            .evaluations
            .iter()
            .filter(|e| e.feasible())
            .map(|e| e.objectives())
            .collect();
        let pool = if feasible.is_empty() {
            log::warn!("no feasible design point; reference point taken over all designs");
            state.evaluations.iter().map(|e| e.objectives()).collect()
        } else {
            feasible
        };
        state.reference = reference_point(&pool, cfg.reference.margin);
        let hv = state.archive().map_or(0.0, |a| a.hypervolume());
        state.hv_trajectory = vec![hv];
        log::info!(
            "design: {} evaluations, reference {:?}, hypervolume {hv:.6e}",
            state.evaluations.len(),
            state.reference
        );
        observer(&state)?;
    }
    match cfg.engine.workflow {
        Workflow::Optim1 => fixed_surrogate_stage(&mut state, &simulator)?,
        Workflow::Optim2 | Workflow::Optim3 => {
            while state.iteration < cfg.engine.iterations {
                bo_iteration(&mut state, &simulator)?;
                observer(&state)?;
            }
        }
    }
    state.complete = true;
    observer(&state)?;
    Ok(state)
}

fn training_data(state: &RunState) -> (Vec<Vec<f64>>, [Vec<f64>; 3]) {
    let inputs = state.evaluations.iter().map(|e| e.point.clone()).collect();
    let t = |f: fn(&Evaluation) -> f64| state.evaluations.iter().map(f).collect::<Vec<f64>>();
    (inputs, [t(|e| e.f1), t(|e| e.f2), t(|e| e.g)])
}

const OUTPUTS: [&str; 3] = ["f1", "f2", "g"];

/// Fits (or rebuilds from saved hyperparameters) the three surrogates.
fn build_models(state: &RunState, refit: bool, fit_index: u64) -> Result<SurrogateSet> {
    let cfg = &state.config;
    let (inputs, targets) = training_data(state);
    let kernels = cfg.gp.kernels();
    let mut models: Vec<GaussianProcessModel> = Vec::with_capacity(3);
    for j in 0..3 {
        let previous = state.models.as_ref().map(|m| &m[j]);
        let model = match previous {
            Some(p) if !refit => GaussianProcessModel::from_state(&inputs, &targets[j], p),
            _ => {
                let starts = if previous.is_some() { cfg.gp.refit_starts } else { cfg.gp.starts };
                let seed = derive_seed(cfg.engine.seed, Stream::Fit, fit_index * 3 + j as u64);
                fit_with(
                    &inputs,
                    &targets[j],
                    kernels[j],
                    &cfg.gp.fit_options(starts, seed),
                    previous.map(|p| &p.kernel),
                )
            }
        }
        .map_err(|e| {
            Error::Numerical(format!(
                "surrogate for {} on {} points failed: {e}",
                OUTPUTS[j],
                inputs.len()
            ))
        })?;
        models.push(model);
    }
    let g = models.pop().expect("three models");
    let f2 = models.pop().expect("three models");
    let f1 = models.pop().expect("three models");
    Ok(SurrogateSet { f1, f2, g })
}

fn bo_iteration(state: &mut RunState, simulator: &Simulator) -> Result<()> {
    let cfg = state.config.clone();
    let k = state.iteration;
    let refit = state.models.is_none() || k % cfg.gp.refit_every == 0;
    let models = build_models(state, refit, k as u64)?;
    let reference = state.reference.expect("reference fixed after the design");
    let observations: Vec<Observation> = state
        .evaluations
        .iter()
        .map(|e| Observation {
            objectives: e.objectives(),
            constraint: e.g,
        })
        .collect();
    let states = models.states();
    let archive = state.archive().expect("reference fixed after the design");
    let ctx = AcquisitionContext::new(models, observations, reference, cfg.acquisition.clone())?
        .with_archive(archive);
    let seed = derive_seed(cfg.engine.seed, Stream::Acquisition, k as u64);
    let batch = match cfg.engine.workflow {
        Workflow::Optim2 => qparego_select(&ctx, cfg.engine.batch_size, seed)?,
        _ => qehvi_select(&ctx, cfg.engine.batch_size, seed)?,
    };
    let evals = simulator.evaluate_batch(&batch.points, Source::BoIteration(k + 1))?;
    let outcomes = evals.iter().map(|e| [e.f1, e.f2, e.g]).collect();
    state.evaluations.extend(evals);
    let hv = state.archive().map_or(0.0, |a| a.hypervolume());
    state.hv_trajectory.push(hv);
    state.models = Some(states);
    state.iteration += 1;
    log::info!(
        "iteration {}/{}: {} evaluations, hypervolume {hv:.6e}",
        state.iteration,
        cfg.engine.iterations,
        state.evaluations.len()
    );
    state.log.push(IterationLog {
        iteration: state.iteration,
        points: batch.points,
        criterion: batch.values,
        weights: batch.weights,
        fallback: batch.fallback,
        outcomes,
        hypervolume: hv,
        refit,
    });
    Ok(())
}

fn fixed_surrogate_stage(state: &mut RunState, simulator: &Simulator) -> Result<()> {
    let cfg = state.config.clone();
    let models = build_models(state, true, 0)?;
    let population = nsga2_run(
        &models,
        &cfg.moea.nsga2(),
        derive_seed(cfg.engine.seed, Stream::Moea, 0),
    );
    let front = final_front(&population);
    let chosen: Vec<Individual> = select_for_verification(&front, cfg.moea.verification_points)
        .into_iter()
        .map(|i| front[i].clone())
        .collect();
    let verification = verify_front(&chosen, simulator)?;
    let loo = [models.f1.loo_residuals(), models.f2.loo_residuals()];
    let loo_mae = [mean_abs(&loo[0]), mean_abs(&loo[1])];
    let front_mae = [
        mean(verification.iter().map(|v| v.discrepancy[0])),
        mean(verification.iter().map(|v| v.discrepancy[1])),
    ];
    let ratio = mean((0..2).map(|m| front_mae[m] / loo_mae[m]));
    log::info!(
        "fixed surrogates: front of {}, {} verified, error ratio {ratio:.3}",
        front.len(),
        verification.len()
    );
    state.models = Some(models.states());
    state.front = front;
    state.verification = verification;
    state.gap = Some(GapReport {
        loo_mae,
        front_mae,
        ratio,
    });
    Ok(())
}

fn mean_abs(v: &[f64]) -> f64 {
    mean(v.iter().map(|x| x.abs()))
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
