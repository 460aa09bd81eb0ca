//! Command-line front end: generate instances, localize them, score
//! estimates, and run density sweeps.
//!
//! Exit codes: 0 success; 1 runtime or I/O failure; 2 invalid flags or
//! parameters; 3 unparseable input file; 4 no sign change found while
//! bracketing; 5 the root search finished without reaching the residual
//! tolerance (or with an infeasible witness).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netloc::error::Error;
use netloc::fileio::{self, fmt_real};
use netloc::harness::{
    self, error_metrics, generate_network, scatter_csv, scatter_svg, sweep_csv, GenerationSpec,
    SweepParams,
};
use netloc::root::{estimate_psi_with_warm, write_root_trace_csv, RootFinder, DEFAULT_ROOT_TOL};
use netloc::solver::{BoxRegion, SolverConfig};

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_NO_BRACKET: u8 = 4;
const EXIT_NO_CONVERGENCE: u8 = 5;

#[derive(Parser)]
#[command(
    name = "netloc",
    version,
    about = "Anchor-free localization of networks with noisy distance bounds"
)]
struct RunManifest {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random noisy instance plus its ground-truth positions.
    Generate(GenerateArgs),
    /// Localize an instance file by root finding on the value function.
    Solve(SolveArgs),
    /// Compare an estimate positions file against a ground-truth file.
    Evaluate(EvaluateArgs),
    /// Localize many random instances per density and tabulate errors.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of nodes (at least 2).
    #[arg(long)]
    n: usize,
    /// Target edge density in (0, 1].
    #[arg(long)]
    density: f64,
    /// Noise half-range as a fraction of the field diameter, in [0, 0.5].
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    field_lower: f64,
    #[arg(long, default_value_t = 10.0)]
    field_upper: f64,
    /// Instance output path.
    #[arg(long)]
    out_instance: PathBuf,
    /// Ground-truth positions output path.
    #[arg(long)]
    out_truth: PathBuf,
}

#[derive(Args, Clone, Default)]
struct SolverFlags {
    /// Sufficient-decrease constant in (0, 0.5).
    #[arg(long)]
    sigma1: Option<f64>,
    /// Curvature constant in (sigma1, 1).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Gradient threshold factor for smoothing shrinks.
    #[arg(long)]
    gamma: Option<f64>,
    /// Smoothing shrink factor in (0, 1).
    #[arg(long)]
    gamma1: Option<f64>,
    /// Terminal smoothing level.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Initial smoothing level.
    #[arg(long)]
    mu0: Option<f64>,
    /// Cap on descent iterations per solve.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Cap on probes per line search.
    #[arg(long)]
    max_ls: Option<usize>,
    /// Independent random starts per minimax solve.
    #[arg(long)]
    multistart: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file to localize.
    #[arg(long)]
    instance: PathBuf,
    /// Estimated positions output path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Seed for the multistart streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Residual half-band that counts as a root.
    #[arg(long)]
    root_tol: Option<f64>,
    /// Bisection interval tolerance (default 1e-3 * c_init).
    #[arg(long)]
    c_tol: Option<f64>,
    /// Starting budget for the bracket search (default: sum of squared
    /// upper bounds).
    #[arg(long)]
    c_init: Option<f64>,
    /// Half-width of the symmetric solve box (default: (n - 1) * max
    /// upper bound).
    #[arg(long)]
    box_half_width: Option<f64>,
    /// Key-value file supplying defaults for absent flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prefix for trace CSVs (<prefix>.root.csv, <prefix>.solver.csv).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth positions file.
    #[arg(long)]
    truth: PathBuf,
    /// Estimated positions file.
    #[arg(long)]
    estimate: PathBuf,
    /// Per-node scatter CSV output path.
    #[arg(long)]
    scatter: Option<PathBuf>,
    /// Scatter SVG output path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated densities in ascending order.
    #[arg(long, value_delimiter = ',')]
    densities: Vec<f64>,
    /// Trials per density.
    #[arg(long)]
    trials: usize,
    /// Nodes per instance.
    #[arg(long)]
    n: usize,
    /// Noise half-range as a fraction of the field diameter.
    #[arg(long, default_value_t = 0.10)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    field_lower: f64,
    #[arg(long, default_value_t = 10.0)]
    field_upper: f64,
    /// Worker threads for the trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Sweep CSV output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Key-value file supplying defaults for absent flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Parse { .. } => EXIT_PARSE,
            Error::NoBracket { .. } => EXIT_NO_BRACKET,
            Error::InvalidParameter(_)
            | Error::InvalidInstance(_)
            | Error::DegenerateNetwork(_)
            | Error::ShapeMismatch { .. } => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        CliError::new(code, err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::new(EXIT_RUNTIME, err.to_string())
    }
}

fn main() -> ExitCode {
    let manifest = RunManifest::parse();
    let outcome = match manifest.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

/// Key-value config file: one `key value` or `key = value` pair per line,
/// `#` comments.
fn read_config(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, |c: char| c == '=' || c.is_whitespace());
        let key = parts.next().unwrap_or("").trim();
        let value = parts.next().unwrap_or("").trim_start_matches('=').trim();
        if key.is_empty() || value.is_empty() {
            return Err(CliError::new(
                EXIT_PARSE,
                format!("{}:{}: expected `key value`", path.display(), line_no + 1),
            ));
        }
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(
    config: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    match config.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|_| {
            CliError::new(EXIT_PARSE, format!("config key {key}: cannot parse {raw:?}"))
        }),
    }
}

/// Flags win over config-file entries, which win over defaults.
fn build_solver_config(
    flags: &SolverFlags,
    seed: Option<u64>,
    config: &HashMap<String, String>,
) -> Result<SolverConfig, CliError> {
    let d = SolverConfig::default();
    let cfg = SolverConfig {
        sigma1: flags.sigma1.or(config_get(config, "sigma1")?).unwrap_or(d.sigma1),
        sigma2: flags.sigma2.or(config_get(config, "sigma2")?).unwrap_or(d.sigma2),
        gamma: flags.gamma.or(config_get(config, "gamma")?).unwrap_or(d.gamma),
        gamma1: flags.gamma1.or(config_get(config, "gamma1")?).unwrap_or(d.gamma1),
        epsilon: flags
            .epsilon
            .or(config_get(config, "epsilon")?)
            .unwrap_or(d.epsilon),
        mu0: flags.mu0.or(config_get(config, "mu0")?).unwrap_or(d.mu0),
        max_outer_iterations: flags
            .max_outer
            .or(config_get(config, "max-outer")?)
            .unwrap_or(d.max_outer_iterations),
        max_line_search_iterations: flags
            .max_ls
            .or(config_get(config, "max-ls")?)
            .unwrap_or(d.max_line_search_iterations),
        multistart_count: flags
            .multistart
            .or(config_get(config, "multistart")?)
            .unwrap_or(d.multistart_count),
        rng_seed: seed.or(config_get(config, "seed")?).unwrap_or(d.rng_seed),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_generate(args: GenerateArgs) -> Result<u8, CliError> {
    let spec = GenerationSpec {
        n: args.n,
        field_lower: args.field_lower,
        field_upper: args.field_upper,
        target_density: args.density,
        noise_fraction: args.noise,
        rng_seed: args.seed,
    };
    let generated = generate_network(&spec)?;
    fileio::write_instance(&args.out_instance, &generated.instance)?;
    fileio::write_positions(&args.out_truth, &generated.truth)?;
    println!("edges {}", generated.instance.edge_count());
    println!("density {}", fmt_real(generated.instance.density()));
    Ok(0)
}

fn cmd_solve(args: SolveArgs) -> Result<u8, CliError> {
    let config = match &args.config {
        Some(path) => read_config(path)?,
        None => HashMap::new(),
    };
    let cfg = build_solver_config(&args.solver, args.seed, &config)?;
    let net = fileio::read_instance(&args.instance)?;

    let max_upper = net
        .edges()
        .iter()
        .map(|e| e.upper_sq.sqrt())
        .fold(0.0f64, f64::max);
    let box_half_width = args
        .box_half_width
        .or(config_get(&config, "box-half-width")?)
        .unwrap_or((net.node_count() - 1) as f64 * max_upper);
    let c_init = args
        .c_init
        .or(config_get(&config, "c-init")?)
        .unwrap_or_else(|| net.edges().iter().map(|e| e.upper_sq).sum());
    let root_tol = args
        .root_tol
        .or(config_get(&config, "root-tol")?)
        .unwrap_or(DEFAULT_ROOT_TOL);
    let c_tol = args
        .c_tol
        .or(config_get(&config, "c-tol")?)
        .unwrap_or(1e-3 * c_init);

    let box_region = BoxRegion::centered(box_half_width)?;
    let mut finder = RootFinder::new(&net, box_region, cfg.clone(), root_tol, c_tol)?;
    if args.trace.is_some() {
        finder.enable_trace();
    }
    let result = finder.localize(c_init)?;

    fileio::write_positions(&args.out, &result.x_star)?;
    if let Some(prefix) = &args.trace {
        let mut root_path = prefix.as_os_str().to_owned();
        root_path.push(".root.csv");
        let file = std::fs::File::create(PathBuf::from(&root_path))?;
        write_root_trace_csv(finder.trace().unwrap_or(&[]), file)?;

        // descent trace of one final evaluation at the returned root,
        // warm-started from its witness
        let (_, trace) = estimate_psi_with_warm(
            &net,
            result.c0_star,
            &box_region,
            &cfg,
            1,
            Some(&result.x_star),
            true,
        )?;
        let mut solver_path = prefix.as_os_str().to_owned();
        solver_path.push(".solver.csv");
        let file = std::fs::File::create(PathBuf::from(&solver_path))?;
        if let Some(trace) = trace {
            trace.write_csv(file)?;
        }
    }

    println!(
        "{} {} {} {}",
        fmt_real(result.c0_star),
        fmt_real(result.residual),
        result.total_solver_iterations,
        result.feasibility.feasible
    );
    if result.converged && result.feasibility.feasible {
        Ok(0)
    } else {
        Ok(EXIT_NO_CONVERGENCE)
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<u8, CliError> {
    let truth = fileio::read_positions(&args.truth)?;
    let estimate = fileio::read_positions(&args.estimate)?;
    let report = error_metrics(&truth, &estimate)?;
    println!("mean_error {}", fmt_real(report.mean_error));
    println!("max_error {}", fmt_real(report.max_error));
    for (i, offset) in report.per_node_offsets.iter().enumerate() {
        println!("node {} offset {}", i + 1, fmt_real(*offset));
    }
    if let Some(path) = &args.scatter {
        std::fs::write(path, scatter_csv(&truth, &report))?;
    }
    if let Some(path) = &args.svg {
        std::fs::write(path, scatter_svg(&truth, &report))?;
    }
    Ok(0)
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, CliError> {
    let config = match &args.config {
        Some(path) => read_config(path)?,
        None => HashMap::new(),
    };
    // per-trial solver seeds are derived from the master seed
    let solver = build_solver_config(&args.solver, None, &config)?;
    let params = SweepParams {
        densities: args.densities.clone(),
        trials_per_density: args.trials,
        n: args.n,
        noise_fraction: args.noise,
        field_lower: args.field_lower,
        field_upper: args.field_upper,
        solver,
        rng_seed: args.seed,
        jobs: args.jobs,
    };
    let rows = harness::density_sweep(&params)?;
    let csv = sweep_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}
