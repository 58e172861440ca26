use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use optstop::bench::{self, BenchError, BenchmarkConfig, ScalingFit, ScalingModel};
use optstop::controller::{
    ControllerError, Decision, Policy, SessionConfig, SessionState, SessionSummary,
    DEFAULT_BURN_IN_LEN, DEFAULT_MAX_ITERATIONS, DEFAULT_OVERRIDE_LEVEL, DEFAULT_PRIOR_STRENGTH,
    DEFAULT_TAIL_OBS,
};
use optstop::dist::{build_empirical, DirichletPosterior, EnergyDistribution};
use optstop::io::{self, IoError};
use optstop::parallel::{
    effective_unit_cost, evaluate_plan, optimal_cores, HardwareCost, ParallelMode, ParallelPlan,
};
use optstop::solver::{derive_seed, sa_run, AnnealSchedule};
use optstop::stopping::CostModel;

#[derive(Parser)]
#[command(
    name = "optstop",
    version,
    about = "Optimal stopping for randomized optimizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark campaign and print its summary as JSON.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Anneal an instance until the stopping rule fires; prints the session summary as JSON.
    #[command(allow_negative_numbers = true)]
    Live {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyArg,
        /// Unit cost of computation time.
        #[arg(long)]
        c: f64,
        /// Time charged per annealing run.
        #[arg(long)]
        t_run: f64,
        /// Distribution (`support`, `weights`) or Dirichlet posterior
        /// (`support`, `concentrations`) JSON.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Concentration given to a distribution prior.
        #[arg(long, default_value_t = DEFAULT_PRIOR_STRENGTH)]
        prior_strength: f64,
        #[arg(long, default_value_t = 100)]
        sweeps: u64,
        #[arg(long, default_value_t = AnnealSchedule::DEFAULT_T_INIT)]
        t_init: f64,
        #[arg(long, default_value_t = AnnealSchedule::DEFAULT_T_FIN)]
        t_fin: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BURN_IN_LEN)]
        burn_in: usize,
        #[arg(long, default_value_t = DEFAULT_TAIL_OBS)]
        tail_obs: usize,
        #[arg(long, default_value_t = DEFAULT_OVERRIDE_LEVEL)]
        override_level: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: u64,
        /// Write the per-observation decision log here as CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Fit a scaling model to `size,value` rows; prints the fit as JSON.
    #[command(allow_negative_numbers = true)]
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Energy gap `E1 - E0`; adds the give-up size for exponential models.
        #[arg(long)]
        gap: Option<f64>,
    },
    /// Compare perfect and embarrassing parallelization on a sample file; prints CSV.
    #[command(allow_negative_numbers = true)]
    Parallel {
        /// Samples as `run_index,energy` CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ct: f64,
        #[arg(long)]
        ccpu: f64,
        #[arg(long)]
        max_cores: u64,
        #[arg(long, default_value_t = 1.0)]
        t_run: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    GaussianMl,
    BayesDirichlet,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::GaussianMl => Policy::GaussianMl,
            PolicyArg::BayesDirichlet => Policy::BayesDirichlet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    ExpSqrt,
    Quadratic,
    ExpLinear,
    #[value(name = "quadratic-2d")]
    Quadratic2d,
}

impl From<ModelArg> for ScalingModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::ExpSqrt => ScalingModel::ExpSqrt,
            ModelArg::Quadratic => ScalingModel::Quadratic,
            ModelArg::ExpLinear => ScalingModel::ExpLinear,
            ModelArg::Quadratic2d => ScalingModel::Quadratic2d,
        }
    }
}

/// Exit code 2 for bad configuration, 3 for bad or unusable data.
enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    fn config(e: impl ToString) -> Self {
        CliError::Config(e.to_string())
    }

    fn data(e: impl ToString) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(_) => CliError::config(e),
            _ => CliError::data(e),
        }
    }
}

impl From<ControllerError> for CliError {
    fn from(e: ControllerError) -> Self {
        match e {
            ControllerError::InvalidConfig(_) | ControllerError::Stop(_) => CliError::config(e),
            _ => CliError::data(e),
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(CliError::data)?;
    writeln!(out).map_err(CliError::data)
}

fn bench_cmd(path: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<(), CliError> {
    let config: BenchmarkConfig = io::read_json(path).map_err(CliError::config)?;
    let seed = seed
        .or(config.seed)
        .ok_or_else(|| CliError::config("no seed given on the command line or in the config"))?;
    let workers = workers.or(config.workers).unwrap_or(1);
    config.validate()?;
    let report = bench::run_benchmark(&config, seed, workers)?;
    print_json(&report)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PriorFile {
    Posterior { support: Vec<f64>, concentrations: Vec<f64> },
    Family { support: Vec<f64>, weights: Vec<f64> },
}

fn read_prior(path: &Path, strength: f64) -> Result<DirichletPosterior, CliError> {
    let raw: PriorFile = io::read_json(path).map_err(CliError::data)?;
    let prior = match raw {
        PriorFile::Posterior {
            support,
            concentrations,
        } => DirichletPosterior::new(support, concentrations),
        PriorFile::Family { support, weights } => EnergyDistribution::new(support, weights)
            .and_then(|d| DirichletPosterior::from_family(&d, strength)),
    };
    prior.map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct LiveReport {
    instance: String,
    n_sweeps: u64,
    seed: u64,
    #[serde(flatten)]
    summary: SessionSummary,
}

fn live_cmd(
    instance: &Path,
    config: SessionConfig,
    sched: AnnealSchedule,
    seed: u64,
    log: Option<&Path>,
) -> Result<(), CliError> {
    sched.validate().map_err(CliError::config)?;
    config.validate()?;
    let inst = io::read_instance(instance).map_err(CliError::data)?;
    let max = config.max_iterations;
    let mut state = SessionState::new(config)?;
    let mut stopped = false;
    for i in 0..max {
        let run = sa_run(&inst, &sched, derive_seed(seed, i)).map_err(CliError::data)?;
        if state.observe(run.energy)? == Decision::Stop {
            stopped = true;
            break;
        }
    }
    if let Some(path) = log {
        write_log(path, &state)?;
    }
    if !stopped {
        return Err(CliError::data(ControllerError::MaxIterations(max)));
    }
    let summary = state
        .summary()
        .ok_or_else(|| CliError::data("session ended without a summary"))?;
    print_json(&LiveReport {
        instance: instance.display().to_string(),
        n_sweeps: sched.n_sweeps,
        seed,
        summary,
    })
}

fn write_log(path: &Path, state: &SessionState) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::data(IoError::Io {
            path: path.display().to_string(),
            source: e,
        }))?;
    io::write_session_log(std::io::BufWriter::new(file), state.log())
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
struct FitRow {
    size: f64,
    value: f64,
}

#[derive(Serialize)]
struct FitReport {
    #[serde(flatten)]
    fit: ScalingFit,
    relative_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    giveup_size: Option<f64>,
}

fn fit_cmd(input: &Path, model: ScalingModel, gap: Option<f64>) -> Result<(), CliError> {
    let file = std::fs::File::open(input).map_err(|e| {
        CliError::data(IoError::Io {
            path: input.display().to_string(),
            source: e,
        })
    })?;
    let rows: Vec<FitRow> = io::read_csv_rows(file, input).map_err(CliError::data)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.size, r.value)).collect();
    let fit = bench::fit_scaling(&points, model)?;
    let giveup_size = gap.map(|g| bench::giveup_size(&fit, g)).transpose()?;
    print_json(&FitReport {
        relative_residual: fit.relative_residual(),
        fit,
        giveup_size,
    })
}

#[derive(Serialize)]
struct ParallelRow {
    n_cpu: u64,
    perfect_unit_cost: f64,
    c_star_perfect: f64,
    embarrassing_unit_cost: f64,
    c_star_embarrassing: f64,
    optimal: bool,
}

fn parallel_cmd(input: &Path, hc: HardwareCost, max_cores: u64, t_run: f64) -> Result<(), CliError> {
    if max_cores == 0 {
        return Err(CliError::config("max-cores must be >= 1"));
    }
    CostModel::new(hc.c_t + hc.c_cpu, t_run).map_err(CliError::config)?;
    let samples = io::read_samples(input).map_err(CliError::data)?;
    let d = build_empirical(&samples).map_err(CliError::data)?;
    let (best, _) = optimal_cores(&d, &hc, t_run, 1..=max_cores).map_err(CliError::data)?;
    let rows = (1..=max_cores)
        .map(|n| {
            let plan = ParallelPlan::perfect(n)?;
            Ok(ParallelRow {
                n_cpu: n,
                perfect_unit_cost: effective_unit_cost(&hc, &plan, ParallelMode::Perfect),
                c_star_perfect: evaluate_plan(&d, &hc, &plan, t_run, ParallelMode::Perfect)?,
                embarrassing_unit_cost: effective_unit_cost(&hc, &plan, ParallelMode::Embarrassing),
                c_star_embarrassing: evaluate_plan(&d, &hc, &plan, t_run, ParallelMode::Embarrassing)?,
                optimal: n == best,
            })
        })
        .collect::<Result<Vec<_>, optstop::parallel::ParallelError>>()
        .map_err(CliError::data)?;
    let stdout = std::io::stdout().lock();
    io::write_csv_rows(stdout, &rows).map_err(CliError::data)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench {
            config,
            seed,
            workers,
        } => bench_cmd(&config, seed, workers),
        Command::Live {
            instance,
            policy,
            c,
            t_run,
            prior,
            prior_strength,
            sweeps,
            t_init,
            t_fin,
            seed,
            burn_in,
            tail_obs,
            override_level,
            max_iterations,
            log,
        } => {
            let cost = CostModel::new(c, t_run).map_err(CliError::config)?;
            let mut config = SessionConfig::new(policy.into(), cost);
            config.burn_in_len = burn_in;
            config.tail_obs = tail_obs;
            config.override_level = override_level;
            config.max_iterations = max_iterations;
            if let Some(path) = prior {
                if !(prior_strength > 0.0 && prior_strength.is_finite()) {
                    return Err(CliError::config("prior-strength must be positive"));
                }
                config = config.with_prior(read_prior(&path, prior_strength)?);
            }
            let sched = AnnealSchedule::new(t_init, t_fin, sweeps).map_err(CliError::config)?;
            live_cmd(&instance, config, sched, seed, log.as_deref())
        }
        Command::Fit { input, model, gap } => fit_cmd(&input, model.into(), gap),
        Command::Parallel {
            input,
            ct,
            ccpu,
            max_cores,
            t_run,
        } => {
            let hc = HardwareCost::new(ct, ccpu).map_err(CliError::config)?;
            parallel_cmd(&input, hc, max_cores, t_run)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, msg) = match e {
                CliError::Config(m) => (2, m),
                CliError::Data(m) => (3, m),
            };
            let _ = writeln!(std::io::stderr(), "optstop: {msg}");
            ExitCode::from(code)
        }
    }
}
