//! Command-line front end for the toolkit: simulate paths, estimate
//! parameters from a path CSV, train the network estimator, and run the
//! benchmark grid. The binary is a thin dispatcher; numerics and parallelism
//! live in the library. Every run is deterministic given `--seed`; when the
//! flag is omitted a seed is drawn from entropy and printed so the run can
//! be reproduced.

use clap::{Args, Parser, Subcommand};
use oukit::bench::ExperimentGrid;
use oukit::kalman::{kalman_mle, MleConfig, ObsNoise};
use oukit::mlp::{load_checkpoint, predict_params, save_checkpoint, train, MlpModel, TrainConfig};
use oukit::ols::{ols_fit, recover_params};
use oukit::process::{OuParams, TimeGrid};
use oukit::report::{EstimateReport, Method};
use oukit::simulate::{simulate, PathSet};
use oukit::util::atomic_write;
use oukit::{bench, svg, Error};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "oukit",
    version,
    about = "Ornstein-Uhlenbeck simulation and parameter estimation"
)]
struct Cli {
    /// Directory that relative output file names are resolved against.
    #[arg(long, global = true, env = "OUKIT_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Cap on the number of worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths by exact discretization and write them as CSV.
    Simulate(SimulateArgs),
    /// Estimate (mu, theta, sigma) from a path CSV.
    Estimate(EstimateArgs),
    /// Train the network estimator on freshly simulated trajectories.
    Train(TrainArgs),
    /// Run the benchmark grid; write the result table and error chart.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Mean-reversion rate (> 0).
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,

    /// Long-run mean.
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,

    /// Diffusion coefficient (>= 0).
    #[arg(long, allow_negative_numbers = true)]
    sigma: f64,

    /// Initial value.
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,

    /// Time horizon (> 0); the step size is horizon / steps.
    #[arg(long, allow_negative_numbers = true)]
    horizon: f64,

    /// Number of update steps (the grid has steps + 1 points).
    #[arg(long)]
    steps: usize,

    /// Number of independent paths.
    #[arg(long)]
    paths: usize,

    /// RNG seed; drawn from entropy when omitted.
    #[arg(long)]
    seed: Option<u64>,

    /// Output file for the path CSV.
    #[arg(long, default_value = "paths.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input path CSV, as written by `simulate`.
    #[arg(long)]
    input: PathBuf,

    /// Estimation method: ols, kalman, or nn.
    #[arg(long, value_parser = parse_method)]
    method: Method,

    /// Network checkpoint file (required for --method nn).
    #[arg(long)]
    model: Option<PathBuf>,

    /// Observation-noise variance for the Kalman method: a number to fix
    /// it, or `free` to estimate it alongside the parameters.
    #[arg(long, default_value = "0", value_parser = parse_obs_noise, allow_negative_numbers = true)]
    obs_noise: ObsNoiseArg,

    /// Append the estimate as a CSV row to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Sampling range for theta, as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 10.0], allow_negative_numbers = true)]
    theta_range: Vec<f64>,

    /// Sampling range for mu, as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-1.0, 2.0], allow_negative_numbers = true)]
    mu_range: Vec<f64>,

    /// Sampling range for sigma, as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.1, 2.0], allow_negative_numbers = true)]
    sigma_range: Vec<f64>,

    /// Sampling range for the initial value, as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-1.0, 2.0], allow_negative_numbers = true)]
    x0_range: Vec<f64>,

    /// Sampling range for the horizon, as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 5.0], allow_negative_numbers = true)]
    horizon_range: Vec<f64>,

    /// Step-count choices for simulated trajectories, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000,5000")]
    steps_choices: Vec<usize>,

    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "128,128")]
    hidden: Vec<usize>,

    /// Number of training instances.
    #[arg(long, default_value_t = 20_000)]
    n_train: usize,

    /// Number of validation instances.
    #[arg(long, default_value_t = 2_000)]
    n_val: usize,

    /// Number of strided trajectory samples fed to the network.
    #[arg(long, default_value_t = 100)]
    feature_len: usize,

    /// Mini-batch size.
    #[arg(long, default_value_t = 128)]
    batch_size: usize,

    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    learning_rate: f64,

    /// Adam first-moment decay.
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    adam_beta1: f64,

    /// Adam second-moment decay.
    #[arg(long, default_value_t = 0.999, allow_negative_numbers = true)]
    adam_beta2: f64,

    /// Adam denominator guard.
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    adam_eps: f64,

    /// Number of training epochs.
    #[arg(long, default_value_t = 30)]
    epochs: usize,

    /// RNG seed; drawn from entropy when omitted.
    #[arg(long)]
    seed: Option<u64>,

    /// Output file for the model checkpoint.
    #[arg(long, default_value = "mlp_checkpoint.json")]
    checkpoint_out: PathBuf,

    /// Output file for the per-epoch loss history CSV.
    #[arg(long, default_value = "train_history.csv")]
    history_out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid-definition file; mutually exclusive with the grid flags.
    #[arg(long, conflicts_with_all = [
        "theta", "mu", "sigma", "x0", "paths", "steps", "horizons", "replicates", "methods",
    ])]
    grid_file: Option<PathBuf>,

    /// True mean-reversion rate of the simulated data.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    theta: f64,

    /// True long-run mean.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    mu: f64,

    /// True diffusion coefficient.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    sigma: f64,

    /// True initial value.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x0: f64,

    /// Path-count choices, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100,500")]
    paths: Vec<usize>,

    /// Step-count choices, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000,5000")]
    steps: Vec<usize>,

    /// Horizon choices, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,5", allow_negative_numbers = true)]
    horizons: Vec<f64>,

    /// Replicates per grid cell.
    #[arg(long, default_value_t = 20)]
    replicates: usize,

    /// Methods to run, comma separated (ols, kalman, nn).
    #[arg(long, value_delimiter = ',', default_value = "ols,kalman", value_parser = parse_method)]
    methods: Vec<Method>,

    /// Network checkpoint file (required when methods include nn).
    #[arg(long)]
    model: Option<PathBuf>,

    /// RNG seed; drawn from entropy when omitted.
    #[arg(long)]
    seed: Option<u64>,

    /// Output file for the per-replicate result table.
    #[arg(long, default_value = "bench_table.csv")]
    table_out: PathBuf,

    /// Output file for the mean-absolute-error chart.
    #[arg(long, default_value = "bench_errors.svg")]
    svg_out: PathBuf,
}

#[derive(Clone, Copy, Debug)]
enum ObsNoiseArg {
    Free,
    Fixed(f64),
}

fn parse_obs_noise(s: &str) -> Result<ObsNoiseArg, String> {
    if s == "free" {
        return Ok(ObsNoiseArg::Free);
    }
    s.parse::<f64>()
        .map(ObsNoiseArg::Fixed)
        .map_err(|_| "expected a number or `free`".to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random::<u64>)
}

fn resolve_out(dir: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        dir.join(file)
    }
}

fn pair(name: &'static str, values: &[f64]) -> Result<(f64, f64), Error> {
    match values {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(Error::InvalidConfig {
            reason: format!("--{name} takes exactly two values `lo,hi`"),
        }),
    }
}

fn cmd_simulate(args: SimulateArgs, out_dir: &Path) -> Result<(), Error> {
    let params = OuParams::new(args.theta, args.mu, args.sigma, args.x0, args.horizon)?;
    let grid = TimeGrid::for_params(&params, args.steps)?;
    let seed = resolve_seed(args.seed);
    let paths = simulate(&params, &grid, args.paths, seed)?;
    let out = resolve_out(out_dir, &args.out);
    paths.write_csv(&out)?;
    println!("seed: {seed}");
    println!(
        "wrote {} paths x {} points to {}",
        args.paths,
        grid.n_points(),
        out.display()
    );
    Ok(())
}

/// Appends one report row, creating the file with a header when missing.
/// The whole file is rewritten atomically so an interrupted run cannot
/// leave a truncated row behind.
fn append_report_row(target: &Path, report: &EstimateReport, paths: &PathSet) -> Result<(), Error> {
    let grid = paths.grid();
    let horizon = grid.time(grid.n_steps());
    let row = report.to_csv_row(paths.n_paths(), grid.n_steps(), horizon, paths.seed());
    let existing = match std::fs::read_to_string(target) {
        Ok(text) => {
            let header = text.lines().next().unwrap_or("");
            if header != EstimateReport::csv_header() {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("`{}` is not an estimate report file", target.display()),
                });
            }
            text
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            format!("{}\n", EstimateReport::csv_header())
        }
        Err(e) => return Err(Error::Io {
            path: target.display().to_string(),
            source: e,
        }),
    };
    atomic_write(target, |w| {
        write!(w, "{existing}{row}\n")?;
        Ok(())
    })
}

fn cmd_estimate(args: EstimateArgs, out_dir: &Path) -> Result<(), Error> {
    if args.method == Method::Nn && args.model.is_none() {
        return Err(Error::InvalidConfig {
            reason: "--model is required with --method nn".into(),
        });
    }
    let paths = PathSet::read_csv(&args.input)?;
    let report = match args.method {
        Method::Ols => {
            let fit = ols_fit(&paths)?;
            recover_params(&fit, paths.grid().dt())?
        }
        Method::Kalman => {
            let obs_noise = match args.obs_noise {
                ObsNoiseArg::Free => ObsNoise::Free,
                ObsNoiseArg::Fixed(v) => ObsNoise::Fixed(v),
            };
            kalman_mle(&paths, obs_noise, &MleConfig::default())?
        }
        Method::Nn => {
            let (model, _) = load_checkpoint(&args.model.expect("checked above"))?;
            predict_params(&model, &paths)?
        }
    };
    println!("method: {}", report.method);
    println!("mu_hat: {}", report.mu_hat);
    println!("theta_hat: {}", report.theta_hat);
    println!("sigma_hat: {}", report.sigma_hat);
    for (key, value) in &report.diagnostics {
        println!("{key}: {value}");
    }
    if let Some(file) = args.report {
        let target = resolve_out(out_dir, &file);
        append_report_row(&target, &report, &paths)?;
        println!("appended to {}", target.display());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs, out_dir: &Path) -> Result<(), Error> {
    let seed = resolve_seed(args.seed);
    let config = TrainConfig {
        prior_theta: pair("theta-range", &args.theta_range)?,
        prior_mu: pair("mu-range", &args.mu_range)?,
        prior_sigma: pair("sigma-range", &args.sigma_range)?,
        prior_x0: pair("x0-range", &args.x0_range)?,
        horizon_range: pair("horizon-range", &args.horizon_range)?,
        n_steps_choices: args.steps_choices,
        hidden_dims: args.hidden,
        n_train: args.n_train,
        n_val: args.n_val,
        feature_len: args.feature_len,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        adam_betas: (args.adam_beta1, args.adam_beta2),
        adam_eps: args.adam_eps,
        epochs: args.epochs,
        seed,
    };
    let (model, history) = train(&config)?;
    let history_out = resolve_out(out_dir, &args.history_out);
    let checkpoint_out = resolve_out(out_dir, &args.checkpoint_out);
    history.write_csv(&history_out)?;
    save_checkpoint(&model, &config.config_hash(), &checkpoint_out)?;
    let (best_epoch, best_val) = history.best_val().expect("history is never empty");
    println!("seed: {seed}");
    println!("best_val_loss: {best_val} (epoch {best_epoch})");
    println!("wrote {}", checkpoint_out.display());
    println!("wrote {}", history_out.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs, out_dir: &Path) -> Result<(), Error> {
    let grid = match &args.grid_file {
        Some(file) => ExperimentGrid::read_definition(file)?,
        None => ExperimentGrid {
            truth_theta: args.theta,
            truth_mu: args.mu,
            truth_sigma: args.sigma,
            truth_x0: args.x0,
            paths_choices: args.paths,
            n_steps_choices: args.steps,
            horizon_choices: args.horizons,
            replicates: args.replicates,
            methods: args.methods,
        },
    };
    let model: Option<MlpModel> = match &args.model {
        Some(path) => Some(load_checkpoint(path)?.0),
        None => None,
    };
    let seed = resolve_seed(args.seed);
    let result = bench::run_grid(&grid, model.as_ref(), seed)?;

    let table_out = resolve_out(out_dir, &args.table_out);
    let svg_out = resolve_out(out_dir, &args.svg_out);
    bench::write_table(&result, &table_out)?;
    svg::render_error_plot(&result, &svg_out)?;

    println!("seed: {seed}");
    println!("method,n_ok,n_failed,mu_mean,theta_mean,sigma_mean,mu_mae,theta_mae,sigma_mae");
    for s in &result.summaries {
        let fmt3 = |v: Option<[f64; 3]>| match v {
            Some([a, b, c]) => format!("{a},{b},{c}"),
            None => ",,".to_string(),
        };
        println!(
            "{},{},{},{},{}",
            s.method,
            s.n_ok,
            s.n_failed,
            fmt3(s.mean),
            fmt3(s.mae)
        );
    }
    println!("wrote {}", table_out.display());
    println!("wrote {}", svg_out.display());
    Ok(())
}

/// Library parameter names match CLI flag names apart from spelling, so
/// invalid-parameter errors can point at the flag that caused them.
fn flag_name(name: &str) -> String {
    let stem = match name {
        "n_steps" => "steps",
        other => other,
    };
    format!("--{}", stem.replace('_', "-"))
}

fn render_error(e: &Error) -> String {
    match e {
        Error::InvalidParam {
            name,
            reason,
            value,
        } => format!("{}: {reason}, got {value}", flag_name(name)),
        other => other.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args, &cli.out_dir),
        Command::Estimate(args) => cmd_estimate(args, &cli.out_dir),
        Command::Train(args) => cmd_train(args, &cli.out_dir),
        Command::Bench(args) => cmd_bench(args, &cli.out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render_error(&e));
            ExitCode::FAILURE
        }
    }
}
