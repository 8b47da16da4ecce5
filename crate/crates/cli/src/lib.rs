//! Command-line front end for `uhlmann-kit`.
//!
//! Every subcommand renders a single JSON report that starts with the
//! effective configuration and the library version, so a report file alone is
//! enough to rerun it. Reports contain no timestamps or worker counts, which
//! keeps them byte-identical for a fixed configuration.

use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use uhlmann_kit::estimation::{
    check_locally_unbiased, exact_covariance, monte_carlo_covariance, optimal_estimator,
    two_stage_adaptive, AdaptiveTrace, CovarianceReport, Estimator, UnbiasednessReport,
};
use uhlmann_kit::geometry::{
    classify_global, classify_local, curvature, flatness_check, sld_set, Classification,
    CurvatureEntry, FlatnessReport, LocalVerdict, Verdict, COMMUTATOR_TOL, CURVATURE_TOL,
};
use uhlmann_kit::matcore::{serde_cmatrix_vec, CMatrix, Hermitian, RMatrix};
use uhlmann_kit::model::{
    load_model_file, zoo, ModelDescription, ParametricModel, ZooParams, ZOO_NAMES,
};
use uhlmann_kit::transport::{
    path_rpf, random_loop, CurvePath, LiftOptions, TransportResult, DEFAULT_STEPS, RPF_TOL,
};
use uhlmann_kit::{Error, ErrorKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Caps the worker pool; deliberately absent from reports.
pub const THREADS_ENV: &str = "UHLMANN_KIT_THREADS";

pub const DEFAULT_GRID: usize = 5;
pub const DEFAULT_H: f64 = 1e-5;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_LOOPS: usize = 3;

#[derive(Debug, Parser)]
#[command(
    name = "uhlmann-kit",
    version,
    about = "SLD geometry, Uhlmann holonomy and optimal estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a model as quasi-classical, locally quasi-classical or neither.
    Classify(ClassifyArgs),
    /// Fisher matrix, SLDs and curvature at a point.
    Fisher(PointArgs),
    /// Horizontal lift and relative phase factor along a waypoint path.
    Holonomy(HolonomyArgs),
    /// Optimal estimator with exact and Monte Carlo covariance.
    Estimate(EstimateArgs),
    /// List the built-in models.
    Zoo(OutArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Built-in model name (see `zoo`).
    #[arg(long, conflicts_with = "model")]
    pub zoo: Option<String>,
    /// JSON model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of levels for `classical_simplex`.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sample points per axis of the classification grid.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Commutator tolerance.
    #[arg(long, default_value_t = COMMUTATOR_TOL)]
    pub tol: f64,
    /// Curvature tolerance.
    #[arg(long, default_value_t = CURVATURE_TOL)]
    pub curvature_tol: f64,
    /// RK4 steps per path segment for the loop spot checks.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Number of random loops to transport.
    #[arg(long, default_value_t = DEFAULT_LOOPS)]
    pub loops: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: String,
    /// Commutator tolerance.
    #[arg(long, default_value_t = COMMUTATOR_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HolonomyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Waypoints separated by `;`, coordinates by `,`. One-parameter models
    /// also accept a plain comma list of waypoints.
    #[arg(long, allow_hyphen_values = true)]
    pub path: String,
    /// RK4 steps per path segment.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Record the lift every this many steps (0 = end points only).
    #[arg(long, default_value_t = 0)]
    pub record_every: usize,
    /// Tolerance on `‖U − I‖_F` for declaring the RPF trivial.
    #[arg(long, default_value_t = RPF_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// True parameter point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: String,
    /// Commutator tolerance.
    #[arg(long, default_value_t = COMMUTATOR_TOL)]
    pub tol: f64,
    /// Central-difference step for the unbiasedness check.
    #[arg(long, default_value_t = DEFAULT_H)]
    pub h: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: u64,
    /// Also run the two-stage adaptive scheme starting from this point.
    #[arg(long, allow_hyphen_values = true)]
    pub adaptive_init: Option<String>,
    /// Write Monte Carlo outcome counts as CSV.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Failure of a CLI run together with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: exit_code(e.kind()),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Input => 2,
        ErrorKind::Domain => 3,
        ErrorKind::Convergence => 4,
        ErrorKind::Precondition => 5,
    }
}

/// Rendered output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub report: String,
    pub out: Option<PathBuf>,
    /// CSV text and destination for sample counts.
    pub counts: Option<(String, PathBuf)>,
}

/// Effective configuration, echoed at the top of every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub version: &'static str,
    pub model: ModelArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loops: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adaptive_init: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<PathBuf>,
}

impl RunConfig {
    fn new(command: &'static str, model: &ModelArgs, out: &OutArgs) -> Self {
        RunConfig {
            command,
            version: VERSION,
            model: model.clone(),
            theta: None,
            path: None,
            grid: None,
            tol: None,
            curvature_tol: None,
            steps: None,
            record_every: None,
            loops: None,
            h: None,
            seed: None,
            samples: None,
            adaptive_init: None,
            out: out.out.clone(),
            counts: None,
        }
    }
}

/// JSON formatting with every float printed to 17 significant digits.
pub struct ReportFormatter(PrettyFormatter<'static>);

impl Default for ReportFormatter {
    fn default() -> Self {
        ReportFormatter(PrettyFormatter::new())
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {$(
        fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        }
    )*};
}

impl Formatter for ReportFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ReportFormatter::default());
    value
        .serialize(&mut ser)
        .expect("reports serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("cannot parse `{s}` as a number in `{text}`")))
        })
        .collect()
}

/// Parses `a,b;c,d;...`. For one-parameter models a bare `a,b,c` lists waypoints.
pub fn parse_path(text: &str, param_dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    if param_dim == 1 && !text.contains(';') {
        return Ok(parse_vector(text)?.into_iter().map(|x| vec![x]).collect());
    }
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(parse_vector)
        .collect()
}

pub fn load_model(args: &ModelArgs) -> Result<ParametricModel, CliError> {
    match (&args.zoo, &args.model) {
        (Some(name), None) => Ok(zoo(
            name,
            &ZooParams {
                n: args.n,
                ..Default::default()
            },
        )?),
        (None, Some(path)) => Ok(load_model_file(path)?),
        _ => Err(CliError::input("give exactly one of --zoo or --model")),
    }
}

fn check_dim(theta: &[f64], model: &ParametricModel, field: &str) -> Result<(), CliError> {
    if theta.len() != model.param_dim() {
        return Err(CliError::input(format!(
            "--{field} has {} coordinates but model `{}` has {} parameters",
            theta.len(),
            model.name(),
            model.param_dim()
        )));
    }
    Ok(())
}

/// Runs a parsed command and renders its outputs without touching the filesystem
/// (model files excepted).
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Classify(a) => cmd_classify(a),
        Command::Fisher(a) => cmd_fisher(a),
        Command::Holonomy(a) => cmd_holonomy(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Zoo(a) => cmd_zoo(a),
    }
}

/// Writes the outputs of [`execute`] to their destinations.
pub fn emit(output: &Output) -> io::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, &output.report)?,
        None => io::Write::write_all(&mut io::stdout().lock(), output.report.as_bytes())?,
    }
    if let Some((csv, path)) = &output.counts {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

/// Applies the worker cap from the environment and runs the command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| {
                CliError::input(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            })?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::input(e.to_string()))?;
    let output = pool.install(|| execute(cli))?;
    emit(&output)?;
    Ok(())
}

#[derive(Serialize)]
struct LoopCheck {
    waypoints: Vec<Vec<f64>>,
    rpf_distance: f64,
    rpf_vanishes: bool,
}

#[derive(Serialize)]
struct ClassifyReport {
    config: RunConfig,
    model: ModelDescription,
    verdict: Verdict,
    verdict_names: Vec<&'static str>,
    classification: Classification,
    local: Vec<LocalVerdict>,
    flatness: Vec<FlatnessReport>,
    flatness_consistent: bool,
    loops: Vec<LoopCheck>,
    /// Whether the loop checks agree with the verdict: trivial phase factors
    /// for quasi-classical models, at least one nontrivial one otherwise.
    loops_agree: Option<bool>,
    loops_note: Option<&'static str>,
}

fn cmd_classify(a: &ClassifyArgs) -> Result<Output, CliError> {
    let model = load_model(&a.model)?;
    if a.grid == 0 {
        return Err(CliError::input("--grid must be at least 1"));
    }
    let mut config = RunConfig::new("classify", &a.model, &a.out);
    config.grid = Some(a.grid);
    config.tol = Some(a.tol);
    config.curvature_tol = Some(a.curvature_tol);
    config.steps = Some(a.steps);
    config.loops = Some(a.loops);
    config.seed = Some(a.seed);

    let grid = model.sample_grid(a.grid);
    let local = grid
        .iter()
        .map(|t| classify_local(&model, t, a.tol))
        .collect::<Result<Vec<_>, _>>()?;
    let classification = classify_global(&model, &grid, a.tol, Some(a.curvature_tol))?;
    let flatness = grid
        .iter()
        .map(|t| flatness_check(&model, t, a.tol, a.curvature_tol))
        .collect::<Result<Vec<_>, _>>()?;
    let flatness_consistent = flatness.iter().all(|r| r.consistent);

    let (loops, loops_agree, loops_note) = if model.is_lattice() {
        (
            Vec::new(),
            None,
            Some("loop transport needs a continuous model; skipped for lattice models"),
        )
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let opts = LiftOptions::with_steps(a.steps);
        let mut checks = Vec::with_capacity(a.loops);
        for _ in 0..a.loops {
            let path = random_loop(&model, &mut rng, 4)?;
            let r = path_rpf(&model, &path, &opts)?;
            checks.push(LoopCheck {
                waypoints: path.waypoints().to_vec(),
                rpf_distance: r.rpf_distance.unwrap_or(f64::NAN),
                rpf_vanishes: r.rpf_vanishes.unwrap_or(false),
            });
        }
        let agree = if checks.is_empty() {
            None
        } else if classification.verdict == Verdict::QuasiClassical {
            Some(checks.iter().all(|c| c.rpf_vanishes))
        } else {
            Some(checks.iter().any(|c| !c.rpf_vanishes))
        };
        (checks, agree, None)
    };

    let report = ClassifyReport {
        config,
        model: model.describe(),
        verdict: classification.verdict,
        verdict_names: classification.verdict_names.clone(),
        classification,
        local,
        flatness,
        flatness_consistent,
        loops,
        loops_agree,
        loops_note,
    };
    Ok(Output {
        report: to_json(&report),
        out: a.out.out.clone(),
        counts: None,
    })
}

#[derive(Serialize)]
struct FisherReport {
    config: RunConfig,
    model: ModelDescription,
    theta: Vec<f64>,
    #[serde(with = "uhlmann_kit::matcore::serde_rmatrix")]
    fisher: RMatrix,
    #[serde(with = "serde_cmatrix_vec")]
    slds: Vec<CMatrix>,
    worst_commutator: f64,
    locally_quasi_classical: bool,
    curvature: Vec<CurvatureEntry>,
    curvature_steps: Vec<f64>,
}

fn cmd_fisher(a: &PointArgs) -> Result<Output, CliError> {
    let model = load_model(&a.model)?;
    let theta = parse_vector(&a.theta)?;
    check_dim(&theta, &model, "theta")?;
    let mut config = RunConfig::new("fisher", &a.model, &a.out);
    config.theta = Some(theta.clone());
    config.tol = Some(a.tol);

    let set = sld_set(&model, &theta)?;
    let f = curvature(&model, &theta)?;
    let m = model.param_dim();
    let mut entries = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            entries.push(CurvatureEntry {
                i,
                j,
                f: f.get(i, j).clone(),
            });
        }
    }
    let (worst, ..) = set.worst_commutator();
    let report = FisherReport {
        config,
        model: model.describe(),
        theta,
        fisher: set.fisher.clone(),
        slds: set.slds.iter().map(Hermitian::matrix).cloned().collect(),
        worst_commutator: worst,
        locally_quasi_classical: worst <= a.tol,
        curvature: entries,
        curvature_steps: f.steps.clone(),
    };
    Ok(Output {
        report: to_json(&report),
        out: a.out.out.clone(),
        counts: None,
    })
}

#[derive(Serialize)]
struct HolonomyReport {
    config: RunConfig,
    model: ModelDescription,
    transport: TransportResult,
}

fn cmd_holonomy(a: &HolonomyArgs) -> Result<Output, CliError> {
    let model = load_model(&a.model)?;
    let waypoints = parse_path(&a.path, model.param_dim())?;
    for w in &waypoints {
        check_dim(w, &model, "path")?;
    }
    let mut config = RunConfig::new("holonomy", &a.model, &a.out);
    config.path = Some(waypoints.clone());
    config.steps = Some(a.steps);
    config.record_every = Some(a.record_every);
    config.tol = Some(a.tol);

    let path = CurvePath::new(&model, waypoints)?;
    let opts = LiftOptions {
        steps_per_segment: a.steps,
        record_every: a.record_every,
        ..Default::default()
    };
    let w0 = uhlmann_kit::transport::Amplitude::positive(&model.evaluate(path.start())?);
    let transport =
        uhlmann_kit::transport::relative_phase_factor(&model, &path, &w0, &opts, a.tol)?;
    let report = HolonomyReport {
        config,
        model: model.describe(),
        transport,
    };
    Ok(Output {
        report: to_json(&report),
        out: a.out.out.clone(),
        counts: None,
    })
}

#[derive(Serialize)]
struct EstimateReport {
    config: RunConfig,
    model: ModelDescription,
    theta: Vec<f64>,
    estimator: Estimator,
    unbiasedness: UnbiasednessReport,
    exact: CovarianceReport,
    monte_carlo: CovarianceReport,
    /// Largest `|cov_mc − cov_exact|` measured in Monte Carlo standard errors.
    max_mc_deviation_in_std_errors: f64,
    counts: Vec<u64>,
    adaptive: Option<AdaptiveTrace>,
}

pub fn counts_csv(labels: &[String], counts: &[u64]) -> String {
    let mut s = String::from("outcome,count\n");
    for (l, c) in labels.iter().zip(counts) {
        s.push_str(&format!("{l},{c}\n"));
    }
    s
}

fn cmd_estimate(a: &EstimateArgs) -> Result<Output, CliError> {
    let model = load_model(&a.model)?;
    let theta = parse_vector(&a.theta)?;
    check_dim(&theta, &model, "theta")?;
    let adaptive_init = a.adaptive_init.as_deref().map(parse_vector).transpose()?;
    if let Some(init) = &adaptive_init {
        check_dim(init, &model, "adaptive-init")?;
    }
    let mut config = RunConfig::new("estimate", &a.model, &a.out);
    config.theta = Some(theta.clone());
    config.tol = Some(a.tol);
    config.h = Some(a.h);
    config.seed = Some(a.seed);
    config.samples = Some(a.samples);
    config.adaptive_init = adaptive_init.clone();
    config.counts = a.counts.clone();

    model.domain().check(&theta)?;
    let estimator = optimal_estimator(&model, &theta, a.tol)?;
    let unbiasedness = check_locally_unbiased(&estimator, &model, &theta, a.h)?;
    let exact = exact_covariance(&estimator, &model, &theta)?;
    let monte_carlo = monte_carlo_covariance(&estimator, &model, &theta, a.samples, a.seed)?;
    let counts = uhlmann_kit::estimation::sample_outcomes(
        &estimator.povm,
        &model.evaluate(&theta)?,
        a.samples,
        a.seed,
    )?;
    let mut deviation = 0.0f64;
    if let Some(se) = &monte_carlo.std_errors {
        for (i, row) in se.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                let d = (monte_carlo.cov[(i, j)] - exact.cov[(i, j)]).abs();
                deviation = deviation.max(if *s > 0.0 {
                    d / s
                } else if d > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                });
            }
        }
    }
    let adaptive = adaptive_init
        .map(|init| two_stage_adaptive(&model, &theta, &init, a.samples, a.samples, a.seed, a.tol))
        .transpose()?;
    let csv = a
        .counts
        .clone()
        .map(|p| (counts_csv(estimator.povm.labels(), &counts), p));
    let report = EstimateReport {
        config,
        model: model.describe(),
        theta,
        estimator,
        unbiasedness,
        exact,
        monte_carlo,
        max_mc_deviation_in_std_errors: deviation,
        counts,
        adaptive,
    };
    Ok(Output {
        report: to_json(&report),
        out: a.out.out.clone(),
        counts: csv,
    })
}

#[derive(Serialize)]
struct ZooEntry {
    name: &'static str,
    summary: &'static str,
    default: Option<ModelDescription>,
}

#[derive(Serialize)]
struct ZooReport {
    version: &'static str,
    models: Vec<ZooEntry>,
}

fn summary(name: &str) -> &'static str {
    match name {
        "bloch_full" => "qubit (I + θ·σ)/2 on the open unit ball; SLDs do not commute",
        "bloch_equator2" => "qubit with θ¹σx + θ²σy; SLDs do not commute",
        "classical_simplex" => {
            "diagonal family diag(θ, 1 − Σθ) on n levels (--n, default 2); quasi-classical"
        }
        "parallel_exp" => "M(θ)ρ₀M(θ) with commuting exponential factors; parallel",
        "user_file" => "loaded from a JSON model file via --model",
        _ => "",
    }
}

fn cmd_zoo(a: &OutArgs) -> Result<Output, CliError> {
    let models = ZOO_NAMES
        .iter()
        .map(|&name| ZooEntry {
            name,
            summary: summary(name),
            default: zoo(name, &ZooParams::default()).ok().map(|m| m.describe()),
        })
        .collect();
    Ok(Output {
        report: to_json(&ZooReport {
            version: VERSION,
            models,
        }),
        out: a.out.clone(),
        counts: None,
    })
}
