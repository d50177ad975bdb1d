//! Validated work plans and their execution.
//!
//! Everything that can be rejected (dimensions, parameter ranges, input
//! files) is rejected while building a [`Plan`], before any report is
//! written. Execution then streams reports to a sink in a fixed order.

use std::io::Write;
use std::path::PathBuf;

use hypercube::checks::{
    check_eq1, check_eq2_eq3, check_eq77, check_eq88, check_general_lognorm, random_integer_function,
    random_nonempty_set, random_nonnegative, sweep, SweepConfig, SweepMode, SweepTarget, MAX_EXHAUSTIVE_DIM,
    RANDOM_INT_MAX,
};
use hypercube::cube::{fwht_forward, fwht_inverse, p_norm, CubeFunction, MAX_DIM};
use hypercube::entropy::{
    check_chain_rule, check_claim_assembly, check_entropy_of_z, check_global_entropy_inequality,
    check_marginal_bounds, conditioning_reduction_check, extended_triple_entropy, per_step_claims, TripleModel,
    MAX_TRIPLE_DIM,
};
use hypercube::fdelta::{
    boundary_three_zeros, boundary_two_zero_perturbation, check_b_equals_c_equation, check_derivative_sign,
    check_finala_monotone, check_grid_minimum, check_stationarity, grid_samples, BitJoint, LandscapeParams,
};
use hypercube::noise::{apply_kernel, apply_spectral, monte_carlo_correlation, rng_from_seed, NoiseParam};
use hypercube::report::{CheckReport, ReportParams, Scale, Summary, Tolerances};
use hypercube::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::CliError;

/// Smallest `delta` evaluated; smaller requests are raised to it.
pub const MIN_DELTA: f64 = 1e-6;
/// Default refinement tolerance of the grid search.
pub const DEFAULT_REFINE_TOL: f64 = 1e-12;
/// Tolerance on the relative gap between the two operator forms.
pub const OPERATOR_REL_TOL: f64 = 1e-10;
const MONTE_CARLO_SAMPLES: usize = 10_000;
const MONTE_CARLO_SE: f64 = 5.0;
const MONTE_CARLO_RUNS: usize = 5;
const PERTURBATIONS: [f64; 7] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 1e-6, 1e-7];
const BC_SUMS: [f64; 3] = [0.2, 0.5, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Fourier,
    Noise,
    Boolean,
    Entropy,
    Fdelta,
    General,
    All,
}

/// A `delta` to evaluate, with the note attached when it was raised to
/// [`MIN_DELTA`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPoint {
    pub delta: f64,
    pub note: Option<String>,
}

impl DeltaPoint {
    pub fn new(requested: f64) -> Result<Self, CliError> {
        if !(requested >= 0.0 && requested <= 1.0) {
            return Err(CliError::Config(format!("delta must lie in [0, 1], got {requested}")));
        }
        if requested < MIN_DELTA {
            return Ok(Self {
                delta: MIN_DELTA,
                note: Some(format!("delta {requested} raised to {MIN_DELTA}: log2(delta) diverges at 0")),
            });
        }
        Ok(Self { delta: requested, note: None })
    }
}

/// `start:step:end`, inclusive of `end` up to rounding.
pub fn parse_delta_grid(spec: &str) -> Result<Vec<DeltaPoint>, CliError> {
    let bad = || CliError::Config(format!("delta grid `{spec}` is not `start:step:end`"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, step, end] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(end >= start) {
        return Err(CliError::Config(format!("delta grid `{spec}` needs step > 0 and end >= start")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| DeltaPoint::new(((start + k as f64 * step) * 1e12).round() / 1e12))
        .collect()
}

/// `p/q` or a decimal in `[0, 1]`.
pub fn parse_eps(text: &str) -> Result<NoiseParam, CliError> {
    let param = match text.split_once('/') {
        Some((num, den)) => {
            let num: u64 = num.trim().parse().map_err(|_| CliError::Config(format!("bad eps `{text}`")))?;
            let den: u64 = den.trim().parse().map_err(|_| CliError::Config(format!("bad eps `{text}`")))?;
            NoiseParam::from_eps_ratio(num, den)
        }
        None => {
            let eps: f64 = text.trim().parse().map_err(|_| CliError::Config(format!("bad eps `{text}`")))?;
            NoiseParam::from_eps(eps, hypercube::noise::DEFAULT_MAX_DENOMINATOR)
        }
    };
    param.map_err(|e| CliError::Config(e.to_string()))
}

/// Resolves `--r/--s` or `--eps`; `(2, 1)` when neither is given.
pub fn resolve_param(r: Option<u64>, s: Option<u64>, eps: Option<&str>) -> Result<NoiseParam, CliError> {
    match (r, s, eps) {
        (None, None, None) => Ok(NoiseParam::new(2, 1).expect("valid")),
        (None, None, Some(e)) => parse_eps(e),
        (Some(r), Some(s), None) => NoiseParam::new(r, s).map_err(|e| CliError::Config(e.to_string())),
        (_, _, Some(_)) => Err(CliError::Config("give either --r/--s or --eps, not both".into())),
        _ => Err(CliError::Config("--r and --s must be given together".into())),
    }
}

fn check_dim(n: usize, max: usize, what: &str) -> Result<(), CliError> {
    if n > max {
        return Err(CliError::Config(format!("{what} needs n <= {max}, got n = {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FdeltaTask {
    pub deltas: Vec<DeltaPoint>,
    pub grid_step: f64,
    pub refine_tol: f64,
    pub boundary: bool,
    pub stationarity: bool,
    pub finala_grid: Option<usize>,
    pub csv: Option<(PathBuf, f64)>,
}

impl FdeltaTask {
    /// Everything on, `finala` grid of `10^4` points.
    pub fn full(deltas: Vec<DeltaPoint>, grid_step: f64) -> Self {
        Self {
            deltas,
            grid_step,
            refine_tol: DEFAULT_REFINE_TOL,
            boundary: true,
            stationarity: true,
            finala_grid: Some(10_000),
            csv: None,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.deltas.is_empty() {
            return Err(CliError::Config("no delta to evaluate".into()));
        }
        for d in &self.deltas {
            LandscapeParams::new(d.delta, self.grid_step, self.refine_tol).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(n) = self.finala_grid {
            if n < 3 {
                return Err(CliError::Config("--finala-grid needs at least 3 points".into()));
            }
        }
        if let Some((_, step)) = &self.csv {
            if !(*step > 0.0 && *step <= 0.5) {
                return Err(CliError::Config(format!("CSV step must lie in (0, 0.5], got {step}")));
            }
        }
        Ok(())
    }
}

/// Random draws unless explicit inputs are given.
#[derive(Debug, Clone)]
pub enum Inputs<T> {
    Random { n: usize, count: usize, seed: u64 },
    Given(T),
}

#[derive(Debug, Clone)]
pub enum Task {
    Sweep(SweepConfig),
    Pair { target: SweepTarget, f: CubeFunction, g: CubeFunction, param: NoiseParam },
    Fourier { n: usize, count: usize, seed: u64 },
    Noise { n: usize, param: NoiseParam, count: usize, seed: u64 },
    Entropy { param: NoiseParam, inputs: Inputs<Box<TripleModel>>, per_step: bool },
    General { param: NoiseParam, inputs: Inputs<(CubeFunction, CubeFunction)> },
    Fdelta(FdeltaTask),
}

impl Task {
    /// A sweep of `target`, or a single check on the given functions.
    pub fn check(
        target: SweepTarget,
        n: usize,
        param: NoiseParam,
        mode: SweepMode,
        count: usize,
        seed: u64,
        files: Option<(CubeFunction, Option<CubeFunction>)>,
    ) -> Result<Task, CliError> {
        match files {
            Some((f, g)) => {
                let g = match (g, target == SweepTarget::Eq88) {
                    (_, true) => f.clone(),
                    (Some(g), false) => g,
                    (None, false) => return Err(CliError::Config("this check needs both --f and --g".into())),
                };
                if f.n() != g.n() {
                    return Err(CliError::Config(format!("--f has n = {}, --g has n = {}", f.n(), g.n())));
                }
                // fail now on inputs the check would reject
                run_pair(target, &f, &g, param, &Tolerances::default()).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Task::Pair { target, f, g, param })
            }
            None => {
                if mode == SweepMode::Exhaustive {
                    check_dim(n, MAX_EXHAUSTIVE_DIM, "an exhaustive sweep")?;
                } else {
                    check_dim(n, MAX_DIM, "a random sweep")?;
                }
                if target == SweepTarget::LogNorm {
                    check_dim(n, MAX_TRIPLE_DIM, "the integer-weighted check")?;
                }
                Ok(Task::Sweep(SweepConfig { target, mode, n, param, count, seed }))
            }
        }
    }

    pub fn entropy(
        param: NoiseParam,
        n: usize,
        count: usize,
        seed: u64,
        sets: Option<(CubeFunction, CubeFunction)>,
        per_step: bool,
    ) -> Result<Task, CliError> {
        let inputs = match sets {
            Some((a, b)) => {
                let t = TripleModel::new(&a, &b, param).map_err(|e| CliError::Config(e.to_string()))?;
                Inputs::Given(Box::new(t))
            }
            None => {
                check_dim(n, MAX_TRIPLE_DIM, "the entropy checks")?;
                if n == 0 {
                    return Err(CliError::Config("the entropy checks need n >= 1".into()));
                }
                Inputs::Random { n, count, seed }
            }
        };
        Ok(Task::Entropy { param, inputs, per_step })
    }

    pub fn general(
        param: NoiseParam,
        n: usize,
        count: usize,
        seed: u64,
        files: Option<(CubeFunction, CubeFunction)>,
    ) -> Result<Task, CliError> {
        let inputs = match files {
            Some((f, g)) => {
                check_dim(f.n(), MAX_TRIPLE_DIM, "the general checks")?;
                let tol = Tolerances::default();
                general_reports(&f, &g, param, &tol).map_err(|e| CliError::Config(e.to_string()))?;
                Inputs::Given((f, g))
            }
            None => {
                check_dim(n, MAX_TRIPLE_DIM, "the general checks")?;
                Inputs::Random { n, count, seed }
            }
        };
        Ok(Task::General { param, inputs })
    }

    pub fn fdelta(task: FdeltaTask) -> Result<Task, CliError> {
        task.validate()?;
        Ok(Task::Fdelta(task))
    }
}

/// Settings shared by the suites.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub n: usize,
    pub param: NoiseParam,
    pub mode: SweepMode,
    pub count: usize,
    pub seed: u64,
    /// `None`: `s/r`, or `0.5` when `s = 0`.
    pub deltas: Option<Vec<DeltaPoint>>,
    pub grid_step: f64,
    pub tol: Tolerances,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            n: 3,
            param: NoiseParam::new(2, 1).expect("valid"),
            mode: SweepMode::Random,
            count: 100,
            seed: 0,
            deltas: None,
            grid_step: 1e-3,
            tol: Tolerances::default(),
        }
    }

    pub fn plan(&self) -> Result<Plan, CliError> {
        let SuiteConfig { n, param, mode, count, seed, .. } = *self;
        check_dim(n, MAX_DIM, "the cube")?;
        let fourier = || Ok::<_, CliError>(Task::Fourier { n, count, seed });
        let noise = || Ok::<_, CliError>(Task::Noise { n, param, count, seed: seed.wrapping_add(1) });
        let boolean = || -> Result<Vec<Task>, CliError> {
            if mode == SweepMode::Exhaustive {
                check_dim(n, MAX_EXHAUSTIVE_DIM, "the exhaustive boolean suite")?;
            }
            [SweepTarget::Eq1, SweepTarget::Eq2Eq3, SweepTarget::Eq77]
                .iter()
                .enumerate()
                .map(|(k, &t)| Task::check(t, n, param, mode, count, seed.wrapping_add(2 + k as u64), None))
                .collect()
        };
        let entropy = || Task::entropy(param, n, count, seed.wrapping_add(5), None, true);
        let general = || Task::general(param, n, count, seed.wrapping_add(6), None);
        let fdelta = || {
            let deltas = match &self.deltas {
                Some(d) => d.clone(),
                None if param.s() == 0 => vec![DeltaPoint::new(0.5)?],
                None => vec![DeltaPoint::new(param.delta())?],
            };
            Task::fdelta(FdeltaTask::full(deltas, self.grid_step))
        };
        let tasks = match self.suite {
            Suite::Fourier => vec![fourier()?],
            Suite::Noise => vec![noise()?],
            Suite::Boolean => boolean()?,
            Suite::Entropy => vec![entropy()?],
            Suite::Fdelta => vec![fdelta()?],
            Suite::General => vec![general()?],
            Suite::All => {
                let mut t = vec![fourier()?, noise()?];
                t.extend(boolean()?);
                t.extend([entropy()?, general()?, fdelta()?]);
                t
            }
        };
        Ok(Plan { tasks, tol: self.tol })
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub tasks: Vec<Task>,
    pub tol: Tolerances,
}

/// Receives each report as it is produced.
pub trait ReportSink {
    fn emit(&mut self, report: &CheckReport) -> std::io::Result<()>;
}

/// JSON lines to any writer.
pub struct JsonLines<W: Write>(pub W);

impl<W: Write> ReportSink for JsonLines<W> {
    fn emit(&mut self, report: &CheckReport) -> std::io::Result<()> {
        writeln!(self.0, "{}", report.to_json_line())
    }
}

impl ReportSink for Vec<CheckReport> {
    fn emit(&mut self, report: &CheckReport) -> std::io::Result<()> {
        self.push(report.clone());
        Ok(())
    }
}

struct Emitter<'a> {
    sink: &'a mut dyn ReportSink,
    summary: Summary,
}

impl Emitter<'_> {
    fn emit(&mut self, r: CheckReport) -> Result<(), CliError> {
        self.summary.push(&r);
        self.sink.emit(&r).map_err(|e| CliError::Io("report output".into(), e))
    }

    fn emit_all(&mut self, rs: impl IntoIterator<Item = CheckReport>) -> Result<(), CliError> {
        rs.into_iter().try_for_each(|r| self.emit(r))
    }
}

/// Runs every task in order; reports go to `sink`.
pub fn run_plan(plan: &Plan, sink: &mut dyn ReportSink) -> Result<Summary, CliError> {
    let mut out = Emitter { sink, summary: Summary::from_reports(std::iter::empty()) };
    for task in &plan.tasks {
        run_task(task, &plan.tol, &mut out)?;
    }
    Ok(out.summary)
}

/// Plans and runs a suite.
pub fn run_suite(cfg: &SuiteConfig, sink: &mut dyn ReportSink) -> Result<Summary, CliError> {
    run_plan(&cfg.plan()?, sink)
}

fn run_pair(target: SweepTarget, f: &CubeFunction, g: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<CheckReport, Error> {
    match target {
        SweepTarget::Eq1 => check_eq1(f, g, p, tol),
        SweepTarget::Eq2Eq3 => check_eq2_eq3(f, g, p, tol),
        SweepTarget::Eq77 => check_eq77(f, g, p, tol),
        SweepTarget::Eq88 => check_eq88(f, p, tol),
        SweepTarget::LogNorm => check_general_lognorm(f, g, p, tol),
    }
}

fn support_of(f: &CubeFunction) -> CubeFunction {
    CubeFunction::from_fn(f.n(), |x| if f.get(x) > 0.0 { 1.0 } else { 0.0 }).expect("same shape")
}

fn general_reports(f: &CubeFunction, g: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<Vec<CheckReport>, Error> {
    let mut out = vec![check_general_lognorm(f, g, p, tol)?, check_eq77(f, g, p, tol)?];
    let t = TripleModel::new(&support_of(f), &support_of(g), p)?;
    out.push(extended_triple_entropy(&t, f, g, tol)?);
    Ok(out)
}

fn entropy_reports(t: &TripleModel, per_step: bool, tol: &Tolerances) -> Result<Vec<CheckReport>, Error> {
    let mut out = vec![check_entropy_of_z(t, tol)];
    out.extend(check_chain_rule(t, tol));
    let (bx, by) = check_marginal_bounds(t, tol);
    out.extend([bx, by, check_global_entropy_inequality(t, tol), check_claim_assembly(t, tol)]);
    if per_step {
        for i in 1..=t.n() {
            let (cx, cy) = conditioning_reduction_check(t, i, tol)?;
            out.extend([cx, cy]);
            out.extend(per_step_claims(t, i, tol)?);
        }
    }
    Ok(out)
}

fn random_triple(rng: &mut ChaCha8Rng, n: usize, p: NoiseParam) -> TripleModel {
    loop {
        let a = random_nonempty_set(rng, n);
        let b = random_nonempty_set(rng, n);
        match TripleModel::new(&a, &b, p) {
            Ok(t) => return t,
            // s = 0 and disjoint sets: no triple, draw again
            Err(Error::EmptyTripleSupport) => continue,
            Err(e) => panic!("unexpected error for valid random sets: {e}"),
        }
    }
}

fn random_general_pair(rng: &mut ChaCha8Rng, n: usize, p: NoiseParam) -> (CubeFunction, CubeFunction) {
    loop {
        let f = random_integer_function(rng, n, RANDOM_INT_MAX);
        let g = random_integer_function(rng, n, RANDOM_INT_MAX);
        if p.s() > 0 || f.values().iter().zip(g.values()).any(|(a, b)| *a > 0.0 && *b > 0.0) {
            return (f, g);
        }
    }
}

fn labelled(r: CheckReport, index: usize, seed: Option<u64>) -> CheckReport {
    let mut r = r;
    r.params = r.params.with_label("index", index).with_seed(seed);
    r
}

fn fourier_reports(f: &CubeFunction, tol: &Tolerances) -> Result<Vec<CheckReport>, Error> {
    let params = ReportParams { n: Some(f.n()), ..ReportParams::default() }.with_digest(f.digest());
    let spec = fwht_forward(f);
    let back = fwht_inverse(&spec);
    let roundtrip = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let l2 = p_norm(f, 2.0)?;
    Ok(vec![
        CheckReport::identity("fourier_roundtrip", params.clone(), Scale::Linear, roundtrip, 0.0, tol),
        CheckReport::identity("parseval", params.clone(), Scale::Linear, spec.energy(), l2 * l2, tol),
        CheckReport::inequality("norm_monotone", params, Scale::Linear, p_norm(f, 1.5)?, p_norm(f, 3.0)?, tol),
    ])
}

fn noise_reports(f: &CubeFunction, p: NoiseParam, rng: Option<&mut ChaCha8Rng>, tol: &Tolerances) -> Result<Vec<CheckReport>, Error> {
    let params = ReportParams::for_param(f.n(), p).with_digest(f.digest());
    let a = apply_spectral(f, p);
    let b = apply_kernel(f, p);
    let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let rel = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
    let op_tol = Tolerances { linear: OPERATOR_REL_TOL, ..*tol };
    let mut out = vec![
        CheckReport::identity("operator_equivalence", params.clone(), Scale::Linear, rel, 0.0, &op_tol),
        CheckReport::identity("noise_mean", params.clone(), Scale::Linear, a.mean(), f.mean(), tol),
        check_eq88(f, p, tol)?,
    ];
    if let Some(rng) = rng {
        let exact = hypercube::noise::correlation_expectation(f, f, p)?;
        let (mean, se) = monte_carlo_correlation(rng, f, f, p, MONTE_CARLO_SAMPLES)?;
        out.push(
            CheckReport::inequality("monte_carlo", params, Scale::Linear, (mean - exact).abs(), MONTE_CARLO_SE * se, tol)
                .with_extra("exact", exact)
                .with_extra("estimate", mean),
        );
    }
    Ok(out)
}

fn run_task(task: &Task, tol: &Tolerances, out: &mut Emitter) -> Result<(), CliError> {
    match task {
        Task::Sweep(cfg) => out.emit_all(sweep(cfg, tol)?),
        Task::Pair { target, f, g, param } => out.emit(run_pair(*target, f, g, *param, tol)?),
        Task::Fourier { n, count, seed } => {
            let mut rng = rng_from_seed(*seed);
            for idx in 0..*count {
                let f = CubeFunction::from_fn(*n, |_| rng.gen_range(-1.0..1.0))?;
                out.emit_all(fourier_reports(&f, tol)?.into_iter().map(|r| labelled(r, idx, Some(*seed))))?;
            }
            Ok(())
        }
        Task::Noise { n, param, count, seed } => {
            let mut rng = rng_from_seed(*seed);
            for idx in 0..*count {
                let f = random_nonnegative(&mut rng, *n);
                let mc = (idx < MONTE_CARLO_RUNS).then_some(&mut rng);
                out.emit_all(noise_reports(&f, *param, mc, tol)?.into_iter().map(|r| labelled(r, idx, Some(*seed))))?;
            }
            Ok(())
        }
        Task::Entropy { param, inputs, per_step } => match inputs {
            Inputs::Given(t) => out.emit_all(entropy_reports(t, *per_step, tol)?),
            Inputs::Random { n, count, seed } => {
                let mut rng = rng_from_seed(*seed);
                for idx in 0..*count {
                    let t = random_triple(&mut rng, *n, *param);
                    out.emit_all(entropy_reports(&t, *per_step, tol)?.into_iter().map(|r| labelled(r, idx, Some(*seed))))?;
                }
                Ok(())
            }
        },
        Task::General { param, inputs } => match inputs {
            Inputs::Given((f, g)) => out.emit_all(general_reports(f, g, *param, tol)?),
            Inputs::Random { n, count, seed } => {
                let mut rng = rng_from_seed(*seed);
                for idx in 0..*count {
                    let (f, g) = random_general_pair(&mut rng, *n, *param);
                    out.emit_all(general_reports(&f, &g, *param, tol)?.into_iter().map(|r| labelled(r, idx, Some(*seed))))?;
                }
                Ok(())
            }
        },
        Task::Fdelta(task) => run_fdelta(task, tol, out),
    }
}

fn fdelta_reports(task: &FdeltaTask, delta: f64, tol: &Tolerances) -> Result<Vec<CheckReport>, Error> {
    let params = LandscapeParams::new(delta, task.grid_step, task.refine_tol)?;
    let mut out = vec![check_grid_minimum(&params, tol)];
    let interior = delta < 1.0;
    if task.stationarity {
        out.push(check_stationarity(delta, tol)?);
        if interior {
            for bc in BC_SUMS {
                out.push(check_b_equals_c_equation(delta, bc, 1000, tol)?);
            }
        }
    }
    if task.boundary {
        out.push(boundary_three_zeros(delta, tol)?);
        let shape = BitJoint::new(0.5, 0.5, 0.0, 0.0)?;
        out.push(boundary_two_zero_perturbation(delta, &shape, &PERTURBATIONS, tol)?);
    }
    if let (Some(grid), true) = (task.finala_grid, interior) {
        out.push(check_finala_monotone(delta, grid, tol)?);
        out.push(check_derivative_sign(delta, grid, tol)?);
    }
    Ok(out)
}

fn run_fdelta(task: &FdeltaTask, tol: &Tolerances, out: &mut Emitter) -> Result<(), CliError> {
    let mut csv = match &task.csv {
        Some((path, _)) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
            let mut w = std::io::BufWriter::new(file);
            writeln!(w, "delta,a,b,c,d,F").map_err(|e| CliError::Io(path.display().to_string(), e))?;
            Some((path, w))
        }
        None => None,
    };
    for point in &task.deltas {
        for mut r in fdelta_reports(task, point.delta, tol)? {
            if let Some(note) = &point.note {
                r.notes.push(note.clone());
            }
            out.emit(r)?;
        }
        if let (Some((path, w)), Some((_, step))) = (csv.as_mut(), &task.csv) {
            for (p, f) in grid_samples(point.delta, *step) {
                writeln!(w, "{},{},{},{},{},{}", point.delta, p.a, p.b, p.c, p.d, f)
                    .map_err(|e| CliError::Io(path.display().to_string(), e))?;
            }
        }
    }
    if let Some((path, mut w)) = csv {
        w.flush().map_err(|e| CliError::Io(path.display().to_string(), e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_grid_parsing() {
        let g = parse_delta_grid("0.05:0.05:0.95").unwrap();
        assert_eq!(g.len(), 19);
        assert_eq!(g[2].delta, 0.15);
        assert_eq!(g[18].delta, 0.95);
        assert!(parse_delta_grid("0.1:0:1").is_err());
        assert!(parse_delta_grid("0.1:0.1").is_err());
        let g = parse_delta_grid("0:0.5:1").unwrap();
        assert_eq!(g[0].delta, MIN_DELTA);
        assert!(g[0].note.is_some() && g[1].note.is_none());
        assert!(DeltaPoint::new(1.5).is_err());
        assert!(DeltaPoint::new(-0.1).is_err());
    }

    #[test]
    fn param_resolution() {
        assert_eq!(resolve_param(None, None, None).unwrap(), NoiseParam::new(2, 1).unwrap());
        assert_eq!(resolve_param(None, None, Some("1/3")).unwrap(), NoiseParam::new(2, 1).unwrap());
        assert_eq!(resolve_param(None, None, Some("0.2")).unwrap(), NoiseParam::new(3, 2).unwrap());
        assert_eq!(resolve_param(Some(5), Some(1), None).unwrap(), NoiseParam::new(5, 1).unwrap());
        assert!(resolve_param(Some(2), None, None).is_err());
        assert!(resolve_param(Some(2), Some(1), Some("1/3")).is_err());
        assert!(resolve_param(Some(1), Some(2), None).is_err());
        assert!(parse_eps("4/3").is_err());
    }

    #[test]
    fn exhaustive_boolean_is_guarded() {
        let cfg = SuiteConfig { n: 9, mode: SweepMode::Exhaustive, ..SuiteConfig::new(Suite::Boolean) };
        assert!(matches!(cfg.plan(), Err(CliError::Config(_))));
    }

    #[test]
    fn small_suites_pass() {
        for suite in [Suite::Fourier, Suite::Noise, Suite::Boolean, Suite::Entropy, Suite::General] {
            let cfg = SuiteConfig { count: 5, seed: 3, ..SuiteConfig::new(suite) };
            let mut reports: Vec<CheckReport> = Vec::new();
            let summary = run_suite(&cfg, &mut reports).unwrap();
            assert_eq!(summary.total, reports.len());
            assert!(summary.total > 0);
            assert!(summary.all_passed(), "{suite:?}: {summary:?}");
        }
    }
}
