use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use mobo::doe::{lhs_maximin_with, DEFAULT_PROPOSALS_PER_DIM};
use mobo::engine::{compare_workflows_with, resume, run_with, ExperimentConfig, RunState, Workflow};
use mobo::export::{write_comparison, write_design, write_run_artifacts, CHECKPOINT_FILE};
use mobo::Error;

#[derive(Parser)]
#[command(name = "mobo", version, about = "Constrained bi-objective Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one workflow.
    Run(RunArgs),
    /// Run several workflows over several seeds.
    Compare(CompareArgs),
    /// Write a maximin Latin hypercube design.
    Doe(DoeArgs),
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem: synrel-toy, bnh or srn.
    #[arg(long)]
    problem: Option<String>,
    /// Shell command of an external simulator.
    #[arg(long)]
    external_cmd: Option<String>,
    /// Dimension of the external problem.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    doe: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    workflow: Option<Workflow>,
    /// Continue from a checkpoint; other options are ignored except `--out`.
    #[arg(long, conflicts_with_all = ["config", "problem", "workflow"])]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated workflows; defaults to the config's list.
    #[arg(long, value_delimiter = ',')]
    workflow: Vec<Workflow>,
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args)]
struct DoeArgs {
    #[arg(short = 'n', long)]
    size: usize,
    /// Dimension; taken from `--problem` when absent.
    #[arg(short = 'd', long)]
    dim: Option<usize>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PROPOSALS_PER_DIM)]
    proposals_per_dim: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Exit status 2 for rejected configurations, 1 for everything else.
struct Failure {
    error: Error,
    checkpoint: Option<PathBuf>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            checkpoint: None,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Doe(a) => cmd_doe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            if let Some(p) = f.checkpoint.filter(|p| p.exists()) {
                eprintln!("last checkpoint: {}", p.display());
            }
            ExitCode::from(if matches!(f.error, Error::Config(_)) { 2 } else { 1 })
        }
    }
}

fn build_config(o: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut c = match &o.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &o.problem {
        c.problem.name = p.clone();
    }
    if let Some(cmd) = &o.external_cmd {
        c.problem.external_command = Some(cmd.clone());
    }
    if let Some(d) = o.dim {
        c.problem.dimension = Some(d);
    }
    let e = &mut c.engine;
    let sized = o.doe.is_some() || o.iters.is_some() || o.q.is_some();
    if let Some(v) = o.doe {
        e.initial_doe_size = v;
    }
    if let Some(v) = o.iters {
        e.iterations = v;
    }
    if let Some(v) = o.q {
        e.batch_size = v;
    }
    if sized {
        // the budget follows the overridden sizes
        e.total_budget = None;
    }
    if let Some(v) = o.seed {
        e.seed = v;
    }
    if let Some(v) = o.mc_samples {
        c.acquisition.mc_samples = v;
    }
    if let Some(v) = o.restarts {
        c.acquisition.restarts = v;
    }
    Ok(c)
}

fn default_out(c: &ExperimentConfig, label: &str) -> PathBuf {
    let name = format!("{}-{label}-{}", c.problem.label(), c.engine.seed);
    match std::env::var_os("MOBO_OUT_DIR") {
        Some(base) => Path::new(&base).join(name),
        None => PathBuf::from(name),
    }
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let (state, out) = match &a.resume {
        Some(path) => {
            let state = RunState::load(path)?;
            let out = a
                .common
                .out
                .clone()
                .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
            (Some(state), out)
        }
        None => (None, PathBuf::new()),
    };
    let (config, out) = match &state {
        Some(s) => (s.config.clone(), out),
        None => {
            let mut c = build_config(&a.common)?;
            if let Some(w) = a.workflow {
                c.engine.workflow = w;
            }
            c.validate()?;
            let out = a.common.out.clone().unwrap_or_else(|| default_out(&c, c.engine.workflow.label()));
            (c, out)
        }
    };
    std::fs::create_dir_all(&out).map_err(Error::from)?;
    let checkpoint = out.join(CHECKPOINT_FILE);
    info!(
        "{} on {} (seed {}, budget {}), writing to {}",
        config.engine.workflow,
        config.problem.label(),
        config.engine.seed,
        config.total_budget(),
        out.display()
    );
    let mut observer = |s: &RunState| {
        s.save(&checkpoint)?;
        if let Some(hv) = s.hv_trajectory.last() {
            info!("iteration {}: {} evaluations, hypervolume {hv:.6}", s.iteration, s.budget_used());
        }
        Ok(())
    };
    let result = match state {
        Some(s) => resume(s, &mut observer),
        None => run_with(&config, &mut observer),
    };
    let finished = result.map_err(|error| Failure {
        error,
        checkpoint: Some(checkpoint.clone()),
    })?;
    finished.save(&checkpoint)?;
    let problem = config.problem.instantiate()?;
    write_run_artifacts(&finished, problem.as_ref(), &out)?;
    println!("hypervolume {:.6}", finished.final_hypervolume());
    if let Some(g) = &finished.gap {
        println!("extrapolation gap ratio {:.3}", g.ratio);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let mut base = build_config(&a.common)?;
    if let Some(r) = a.repetitions {
        base.compare.repetitions = r;
    }
    if !a.workflow.is_empty() {
        base.compare.workflows = a.workflow.clone();
    }
    let budget = {
        let mut bo = base.clone();
        bo.engine.workflow = Workflow::Optim3;
        bo.total_budget()
    };
    let configs: Vec<ExperimentConfig> = base
        .compare
        .workflows
        .iter()
        .map(|&w| {
            let mut c = base.clone();
            c.engine.workflow = w;
            if w == Workflow::Optim1 {
                // same number of true evaluations, all spent on the design
                c.engine.initial_doe_size = budget;
                c.engine.total_budget = None;
            }
            c
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let out = a.common.out.clone().unwrap_or_else(|| default_out(&base, "compare"));
    let report = compare_workflows_with(&configs, base.compare.repetitions, &mut |r| {
        info!("seed {} {}: hypervolume {:.6}", r.seed, r.workflow, r.hypervolume);
    })?;
    let problem = base.problem.instantiate()?;
    write_comparison(&report, problem.as_ref(), &out)?;
    for (i, w) in report.workflows.iter().enumerate() {
        println!("{w}: median hypervolume {:.6}, best in {}", report.median_hypervolume(i), report.wins(i));
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn cmd_doe(a: DoeArgs) -> Result<(), Failure> {
    let problem = match &a.problem {
        Some(name) => Some(mobo::problems::builtin(name).map_err(|e| Error::config(e.to_string()))?),
        None => None,
    };
    let d = match (a.dim, &problem) {
        (Some(d), _) => d,
        (None, Some(p)) => p.dimension(),
        (None, None) => return Err(Error::config("give --dim or --problem").into()),
    };
    let columns: Vec<String> = match &problem {
        Some(p) if p.dimension() == d => p.variables().iter().map(|v| v.name.clone()).collect(),
        Some(p) => {
            return Err(Error::config(format!("{} has dimension {}, not {d}", p.name(), p.dimension())).into())
        }
        None => (1..=d).map(|j| format!("x{j}")).collect(),
    };
    let design = lhs_maximin_with(a.size, d, a.seed, a.proposals_per_dim)?;
    write_design(&design.points, &columns, &a.out)?;
    println!("maximin distance {:.6}", design.maximin_distance);
    println!("design in {}", a.out.display());
    Ok(())
}
