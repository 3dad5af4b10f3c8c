use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::AcquisitionSettings;
use crate::doe::DEFAULT_PROPOSALS_PER_DIM;
use crate::error::{Error, Result};
use crate::gp::{FitOptions, KernelFamily};
use crate::moea::Nsga2Settings;
use crate::problems::{builtin, external_adapter, Problem};

/// Fixed surrogates + NSGA-II, qParEGO, or qEHVI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Workflow {
    Optim1,
    Optim2,
    Optim3,
}

impl Workflow {
    pub fn is_bayesian(self) -> bool {
        !matches!(self, Workflow::Optim1)
    }

    pub fn label(self) -> &'static str {
        match self {
            Workflow::Optim1 => "optim1",
            Workflow::Optim2 => "optim2",
            Workflow::Optim3 => "optim3",
        }
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Workflow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "optim1" => Ok(Workflow::Optim1),
            "optim2" => Ok(Workflow::Optim2),
            "optim3" => Ok(Workflow::Optim3),
            _ => Err(Error::config(format!(
                "unknown workflow `{s}` (expected optim1, optim2 or optim3)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Built-in problem name; ignored when `external_command` is set.
    pub name: String,
    /// Shell command of an external simulator speaking the NDJSON protocol.
    pub external_command: Option<String>,
    /// Dimension of the external problem.
    pub dimension: Option<usize>,
    pub timeout_secs: f64,
    /// In-flight evaluations for the external problem.
    pub concurrency: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            name: "synrel-toy".into(),
            external_command: None,
            dimension: None,
            timeout_secs: 600.0,
            concurrency: 4,
        }
    }
}

impl ProblemConfig {
    pub fn instantiate(&self) -> Result<Arc<dyn Problem>> {
        match &self.external_command {
            Some(cmd) => {
                let d = self.dimension.ok_or_else(|| {
                    Error::config("an external problem needs `dimension`")
                })?;
                let p = external_adapter(cmd, d, Duration::from_secs_f64(self.timeout_secs))?
                    .with_concurrency(self.concurrency);
                Ok(Arc::new(p))
            }
            None => builtin(&self.name).map_err(|e| Error::config(e.to_string())),
        }
    }

    pub fn label(&self) -> &str {
        match &self.external_command {
            Some(_) => "external",
            None => &self.name,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub workflow: Workflow,
    pub initial_doe_size: usize,
    pub iterations: usize,
    pub batch_size: usize,
    /// Defaults to `initial_doe_size + iterations * batch_size` (Bayesian
    /// workflows) or `initial_doe_size` (fixed surrogates).
    pub total_budget: Option<usize>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            workflow: Workflow::Optim3,
            initial_doe_size: 250,
            iterations: 50,
            batch_size: 4,
            total_budget: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub kernel_f1: KernelFamily,
    pub kernel_f2: KernelFamily,
    pub kernel_g: KernelFamily,
    pub noise_variance: f64,
    /// Optimizer starts of the first fit.
    pub starts: usize,
    /// Optimizer starts of later refits, the first warm-started from the
    /// previous hyperparameters.
    pub refit_starts: usize,
    /// Refit hyperparameters every this many iterations; in between, the
    /// models are rebuilt on the new data with the previous hyperparameters.
    pub refit_every: usize,
    pub max_iterations: usize,
    pub lengthscale_range: (f64, f64),
    pub signal_range: (f64, f64),
    pub lengthscale_bounds: (f64, f64),
    pub signal_bounds: (f64, f64),
}

impl Default for GpConfig {
    fn default() -> Self {
        let f = FitOptions::default();
        GpConfig {
            kernel_f1: KernelFamily::Matern52,
            kernel_f2: KernelFamily::Matern52,
            kernel_g: KernelFamily::Matern52,
            noise_variance: f.noise_variance,
            starts: f.starts,
            refit_starts: f.starts,
            refit_every: 1,
            max_iterations: f.max_iterations,
            lengthscale_range: f.lengthscale_range,
            signal_range: f.signal_range,
            lengthscale_bounds: f.lengthscale_bounds,
            signal_bounds: f.signal_bounds,
        }
    }
}

impl GpConfig {
    pub fn kernels(&self) -> [KernelFamily; 3] {
        [self.kernel_f1, self.kernel_f2, self.kernel_g]
    }

    pub fn fit_options(&self, starts: usize, seed: u64) -> FitOptions {
        FitOptions {
            noise_variance: self.noise_variance,
            starts,
            max_iterations: self.max_iterations,
            lengthscale_range: self.lengthscale_range,
            signal_range: self.signal_range,
            lengthscale_bounds: self.lengthscale_bounds,
            signal_bounds: self.signal_bounds,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoeConfig {
    pub proposals_per_dim: usize,
}

impl Default for DoeConfig {
    fn default() -> Self {
        DoeConfig {
            proposals_per_dim: DEFAULT_PROPOSALS_PER_DIM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoeaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_probability: f64,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    pub mutation_probability: Option<f64>,
    /// Front designs re-evaluated on the true function.
    pub verification_points: usize,
}

impl Default for MoeaConfig {
    fn default() -> Self {
        let n = Nsga2Settings::default();
        MoeaConfig {
            population: n.population,
            generations: n.generations,
            crossover_probability: n.crossover_probability,
            crossover_eta: n.crossover_eta,
            mutation_eta: n.mutation_eta,
            mutation_probability: n.mutation_probability,
            verification_points: 10,
        }
    }
}

impl MoeaConfig {
    pub fn nsga2(&self) -> Nsga2Settings {
        Nsga2Settings {
            population: self.population,
            generations: self.generations,
            crossover_probability: self.crossover_probability,
            crossover_eta: self.crossover_eta,
            mutation_eta: self.mutation_eta,
            mutation_probability: self.mutation_probability,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Padding beyond the worst feasible design objectives, as a fraction
    /// of each objective's range.
    pub margin: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig { margin: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub workflows: Vec<Workflow>,
    pub repetitions: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            workflows: vec![Workflow::Optim1, Workflow::Optim2, Workflow::Optim3],
            repetitions: 10,
        }
    }
}

/// Everything that determines a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub engine: EngineConfig,
    pub gp: GpConfig,
    pub doe: DoeConfig,
    pub acquisition: AcquisitionSettings,
    pub moea: MoeaConfig,
    pub reference: ReferenceConfig,
    pub compare: CompareConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn total_budget(&self) -> usize {
        let e = &self.engine;
        e.total_budget.unwrap_or(match e.workflow {
            Workflow::Optim1 => e.initial_doe_size,
            _ => e.initial_doe_size + e.iterations * e.batch_size,
        })
    }

    /// Checks the budget identity and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let e = &self.engine;
        let budget = self.total_budget();
        if e.initial_doe_size < 2 {
            return Err(Error::config("initial_doe_size must be >= 2"));
        }
        match e.workflow {
            Workflow::Optim1 => {
                if e.initial_doe_size != budget {
                    return Err(Error::config(format!(
                        "optim1 spends the whole budget on the design: initial_doe_size {} != total_budget {budget}",
                        e.initial_doe_size
                    )));
                }
            }
            _ => {
                if e.batch_size == 0 {
                    return Err(Error::config("batch_size must be >= 1"));
                }
                let spent = e.initial_doe_size + e.iterations * e.batch_size;
                if spent != budget {
                    return Err(Error::config(format!(
                        "initial_doe_size + iterations * batch_size = {spent} != total_budget {budget}"
                    )));
                }
            }
        }
        if self.problem.external_command.is_some() {
            if self.problem.dimension.unwrap_or(0) == 0 {
                return Err(Error::config("an external problem needs `dimension` >= 1"));
            }
            if self.problem.concurrency == 0 {
                return Err(Error::config("problem concurrency must be >= 1"));
            }
            if !(self.problem.timeout_secs > 0.0) {
                return Err(Error::config("problem timeout_secs must be > 0"));
            }
        } else if !crate::problems::builtin_problems().contains(&self.problem.name.as_str()) {
            return Err(Error::config(format!(
                "unknown problem `{}` (built-in: {})",
                self.problem.name,
                crate::problems::builtin_problems().join(", ")
            )));
        }
        let a = &self.acquisition;
        if a.mc_samples == 0 || a.final_mc_samples == 0 || a.restarts == 0 {
            return Err(Error::config("acquisition sample and restart counts must be >= 1"));
        }
        if !(a.alpha > 0.0) || !(a.sigmoid_temperature >= 0.0) || !(a.variance_scale >= 0.0) {
            return Err(Error::config("acquisition alpha must be > 0, temperature and variance_scale >= 0"));
        }
        if !(a.min_step > 0.0) || !(a.initial_step >= a.min_step) || a.max_evaluations_per_restart == 0 {
            return Err(Error::config("pattern search steps must satisfy 0 < min_step <= initial_step"));
        }
        let g = &self.gp;
        if g.starts == 0 || g.refit_starts == 0 || g.refit_every == 0 {
            return Err(Error::config("gp starts, refit_starts and refit_every must be >= 1"));
        }
        if !(g.noise_variance >= 0.0) {
            return Err(Error::config("gp noise_variance must be >= 0"));
        }
        for (name, (lo, hi)) in [
            ("lengthscale_range", g.lengthscale_range),
            ("signal_range", g.signal_range),
            ("lengthscale_bounds", g.lengthscale_bounds),
            ("signal_bounds", g.signal_bounds),
        ] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(Error::config(format!("gp {name} must satisfy 0 < lo <= hi")));
            }
        }
        if self.moea.population < 2 {
            return Err(Error::config("moea population must be >= 2"));
        }
        if !(self.reference.margin > 0.0) {
            return Err(Error::config("reference margin must be > 0"));
        }
        Ok(())
    }
}
