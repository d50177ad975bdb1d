use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypercube::checks::{SweepMode, SweepTarget};
use hypercube::cube::CubeFunction;
use hypercube::report::{Tolerances, LINEAR_TOL, LOG_TOL};
use hypercube_cli::plan::{parse_delta_grid, resolve_param, DeltaPoint, FdeltaTask, JsonLines, DEFAULT_REFINE_TOL};
use hypercube_cli::{load_function, run_plan, CliError, Plan, Suite, SuiteConfig, Task, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

/// Exact and numerical checks of hypercontractivity on the Boolean cube.
///
/// Each check prints one JSON record; the last line is a summary. Exit
/// status is 0 when every check passes, 1 when any fails, 2 on a
/// configuration or I/O error.
#[derive(Parser)]
#[command(name = "verify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Absolute tolerance on log-scale margins.
    #[arg(long, global = true, default_value_t = LOG_TOL)]
    tol_log: f64,
    /// Absolute tolerance on linear-scale margins.
    #[arg(long, global = true, default_value_t = LINEAR_TOL)]
    tol_linear: f64,
    /// Write records here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Random,
}

impl From<Mode> for SweepMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exhaustive => SweepMode::Exhaustive,
            Mode::Random => SweepMode::Random,
        }
    }
}

#[derive(Args)]
struct ParamArgs {
    /// Cube dimension.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Agreement weight `r` (with --s).
    #[arg(long)]
    r: Option<u64>,
    /// Disagreement weight `s` (with --r).
    #[arg(long)]
    s: Option<u64>,
    /// Correlation as `p/q` or a decimal, instead of --r/--s.
    #[arg(long)]
    eps: Option<String>,
    /// Seed for random inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    param: ParamArgs,
    #[arg(long, value_enum, default_value_t = Mode::Random)]
    mode: Mode,
    /// Number of random inputs.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Function table for the first argument.
    #[arg(long)]
    f: Option<PathBuf>,
    /// Function table for the second argument.
    #[arg(long)]
    g: Option<PathBuf>,
}

#[derive(Args)]
struct EntropyArgs {
    #[command(flatten)]
    param: ParamArgs,
    /// Two indicator tables.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "random")]
    sets: Option<Vec<PathBuf>>,
    /// Random set pairs (the default without --sets).
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Also check every per-coordinate claim and conditioning step.
    #[arg(long)]
    per_step: bool,
}

#[derive(Args)]
struct FdeltaArgs {
    #[arg(long, conflicts_with = "delta_grid")]
    delta: Option<f64>,
    /// `start:step:end`.
    #[arg(long)]
    delta_grid: Option<String>,
    /// Lattice spacing of the simplex search (at most 0.01).
    #[arg(long, default_value_t = 1e-3)]
    grid_step: f64,
    #[arg(long, default_value_t = DEFAULT_REFINE_TOL)]
    refine_tol: f64,
    /// Boundary checks. Without any of --boundary, --stationarity and
    /// --finala-grid, all three families run.
    #[arg(long)]
    boundary: bool,
    /// Stationarity at the minimum point and the b = c equation.
    #[arg(long)]
    stationarity: bool,
    /// Points for the monotonicity and derivative checks of the reduction.
    #[arg(long)]
    finala_grid: Option<usize>,
    /// Dump `(delta, a, b, c, d, F)` samples as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    csv_step: f64,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[command(flatten)]
    param: ParamArgs,
    #[arg(long, value_enum, default_value_t = Mode::Random)]
    mode: Mode,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// `start:step:end` for the landscape suite (default `s/r`).
    #[arg(long)]
    delta_grid: Option<String>,
    #[arg(long, default_value_t = 1e-3)]
    grid_step: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Set inequality `E[1_A(X) 1_B(Y)] <= (mu(A) mu(B))^{1/(1+eps)}`.
    Eq1(CheckArgs),
    /// The set inequality in log form, in both of its parametrizations.
    Eq3(CheckArgs),
    /// Two-function form `E[f(X) g(Y)] <= |f|_{1+eps} |g|_{1+eps}`.
    Eq77(CheckArgs),
    /// Norm form `|T_eps f|_2 <= |f|_{1+eps^2}`.
    Eq88(CheckArgs),
    /// Integer-weighted log form for integer-valued `f`, `g`.
    Lognorm(CheckArgs),
    /// Integer-weighted form, two-function form and the weighted triple.
    General(CheckArgs),
    /// Entropy identities and inequalities of the correlated triple.
    Entropy(EntropyArgs),
    /// The two-bit functional: minimum, stationarity, reduction, boundary.
    Fdelta(FdeltaArgs),
    /// A named suite.
    Suite(SuiteArgs),
}

fn load(path: &Path) -> Result<CubeFunction, CliError> {
    Ok(load_function(path)?)
}

fn load_pair(f: &Option<PathBuf>, g: &Option<PathBuf>) -> Result<Option<(CubeFunction, Option<CubeFunction>)>, CliError> {
    match (f, g) {
        (None, None) => Ok(None),
        (Some(f), g) => Ok(Some((load(f)?, g.as_deref().map(load).transpose()?))),
        (None, Some(_)) => Err(CliError::Config("--g needs --f".into())),
    }
}

fn param_of(p: &ParamArgs) -> Result<hypercube::NoiseParam, CliError> {
    resolve_param(p.r, p.s, p.eps.as_deref())
}

fn deltas_of(delta: Option<f64>, grid: Option<&str>) -> Result<Option<Vec<DeltaPoint>>, CliError> {
    match (delta, grid) {
        (Some(d), None) => Ok(Some(vec![DeltaPoint::new(d)?])),
        (None, Some(g)) => Ok(Some(parse_delta_grid(g)?)),
        (None, None) => Ok(None),
        (Some(_), Some(_)) => Err(CliError::Config("give either --delta or --delta-grid".into())),
    }
}

fn build_plan(cli: &Cli) -> Result<Plan, CliError> {
    for (name, v) in [("--tol-log", cli.tol_log), ("--tol-linear", cli.tol_linear)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::Config(format!("{name} must be a finite nonnegative number")));
        }
    }
    let tol = Tolerances { log: cli.tol_log, linear: cli.tol_linear };
    let check = |target: SweepTarget, a: &CheckArgs| -> Result<Task, CliError> {
        let p = &a.param;
        Task::check(target, p.n, param_of(p)?, a.mode.into(), a.count, p.seed, load_pair(&a.f, &a.g)?)
    };
    let tasks = match &cli.command {
        Command::Eq1(a) => vec![check(SweepTarget::Eq1, a)?],
        Command::Eq3(a) => vec![check(SweepTarget::Eq2Eq3, a)?],
        Command::Eq77(a) => vec![check(SweepTarget::Eq77, a)?],
        Command::Eq88(a) => vec![check(SweepTarget::Eq88, a)?],
        Command::Lognorm(a) => vec![check(SweepTarget::LogNorm, a)?],
        Command::General(a) => {
            if matches!(a.mode, Mode::Exhaustive) {
                return Err(CliError::Config("general runs random inputs or --f/--g, not an exhaustive sweep".into()));
            }
            let files = match load_pair(&a.f, &a.g)? {
                Some((f, Some(g))) => Some((f, g)),
                Some((_, None)) => return Err(CliError::Config("general needs both --f and --g".into())),
                None => None,
            };
            vec![Task::general(param_of(&a.param)?, a.param.n, a.count, a.param.seed, files)?]
        }
        Command::Entropy(a) => {
            let sets = match &a.sets {
                Some(paths) => Some((load(&paths[0])?, load(&paths[1])?)),
                None => None,
            };
            vec![Task::entropy(param_of(&a.param)?, a.param.n, a.count, a.param.seed, sets, a.per_step)?]
        }
        Command::Fdelta(a) => {
            let deltas = deltas_of(a.delta, a.delta_grid.as_deref())?
                .ok_or_else(|| CliError::Config("fdelta needs --delta or --delta-grid".into()))?;
            let any = a.boundary || a.stationarity || a.finala_grid.is_some();
            let task = FdeltaTask {
                deltas,
                grid_step: a.grid_step,
                refine_tol: a.refine_tol,
                boundary: a.boundary || !any,
                stationarity: a.stationarity || !any,
                finala_grid: if any { a.finala_grid } else { Some(10_000) },
                csv: a.csv.clone().map(|p| (p, a.csv_step)),
            };
            vec![Task::fdelta(task)?]
        }
        Command::Suite(a) => {
            let cfg = SuiteConfig {
                suite: a.suite,
                n: a.param.n,
                param: param_of(&a.param)?,
                mode: a.mode.into(),
                count: a.count,
                seed: a.param.seed,
                deltas: deltas_of(None, a.delta_grid.as_deref())?,
                grid_step: a.grid_step,
                tol,
            };
            return cfg.plan();
        }
    };
    Ok(Plan { tasks, tol })
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let plan = build_plan(cli)?;
    let start = Instant::now();
    let out_name = cli.out.as_ref().map_or("standard output".to_string(), |p| p.display().to_string());
    let io_err = |e| CliError::Io(out_name.clone(), e);
    let writer: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(std::fs::File::create(path).map_err(io_err)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut sink = JsonLines(std::io::BufWriter::new(writer));
    let summary = run_plan(&plan, &mut sink)?;
    let line = serde_json::json!({ "summary": summary, "elapsed_seconds": start.elapsed().as_secs_f64() }).to_string();
    writeln!(sink.0, "{line}").map_err(io_err)?;
    sink.0.flush().map_err(io_err)?;
    if cli.out.is_some() {
        println!("{line}");
    }
    Ok(summary.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("verify: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
