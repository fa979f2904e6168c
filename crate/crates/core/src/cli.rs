//! The `lumpkit` command line.
//!
//! Exit codes: 0 success, 1 parse or usage error, 2 numeric failure, 3 I/O.
//! Every command that writes outputs also writes `manifest.json`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::artifacts::{self, ArtifactError, BasisFile, LumpingFile, SearchFile};
use crate::jacobian::{basis_from_points, sample_jacobian_basis, JacobianBasis, JacobianError, SamplingDomain, DEFAULT_CONFIRMATIONS};
use crate::lumping::{self, EpsilonSearchConfig, LumpingError, DEFAULT_D_MIN};
use crate::model::{parse_model, ModelError, OdeSystem};
use crate::simulate::{self, ReportOptions, SimError, SolveError, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "lumpkit", version, about = "Constrained approximate lumping of ODE models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lump at a fixed tolerance and write L.json.
    Lump(LumpArgs),
    /// Search for the tolerance reaching a target size.
    FindEpsilon(FindEpsilonArgs),
    /// Simulate the model and, given a lumping, its reduction.
    Simulate(SimulateArgs),
    /// Reduced size over a uniform grid of tolerances in [0, ε_max].
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for Jacobian sampling and the Lipschitz estimate.
    #[arg(long, env = "LUMPKIT_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BasisArgs {
    /// Consecutive dependent samples that end Jacobian sampling.
    #[arg(long, default_value_t = DEFAULT_CONFIRMATIONS)]
    pub confirmations: usize,
    /// JSON array of points; replaces random sampling of the Jacobian space.
    #[arg(long)]
    pub sample_points: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LumpArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Lumping tolerance, at least 0.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FindEpsilonArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Target size as a fraction of the variable count, in (0, 1].
    #[arg(long, allow_negative_numbers = true)]
    pub ratio: f64,
    /// Bisection stops once the bracket is narrower than this.
    #[arg(long, default_value_t = DEFAULT_D_MIN, allow_negative_numbers = true)]
    pub d_min: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Lumping matrix: L.json from `lump`, or a bare JSON array of rows.
    #[arg(long)]
    pub lumping: Option<PathBuf>,
    /// Overrides the model horizon.
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// Relative integration tolerance.
    #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
    pub rel_tol: f64,
    /// Absolute integration tolerance.
    #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
    pub abs_tol: f64,
    /// Output grid points.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// Random points for the Lipschitz estimate.
    #[arg(long, default_value_t = 200)]
    pub lipschitz_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Tolerance grid points, including 0 and ε_max.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
    #[error(transparent)]
    Jacobian(#[from] JacobianError),
    #[error(transparent)]
    Lumping(#[from] LumpingError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Monotonicity(#[from] lumping::MonotonicityViolation),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Simulation(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Model { .. } => 1,
            CliError::Artifact(ArtifactError::Io { .. }) => 3,
            CliError::Artifact(_) => 1,
            CliError::Jacobian(_) | CliError::Lumping(_) | CliError::Simulation(_) | CliError::Monotonicity(_) => 2,
        }
    }
}

#[derive(Debug, Default, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    model: PathBuf,
    out: PathBuf,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    confirmations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_points: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lumping: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    outputs: Vec<String>,
    timings_seconds: Vec<(String, f64)>,
}

impl Manifest {
    fn new(command: &'static str, common: &CommonArgs) -> Self {
        Manifest {
            tool: "lumpkit",
            version: env!("CARGO_PKG_VERSION"),
            command,
            model: common.model.clone(),
            out: common.out.clone(),
            seed: common.seed,
            ..Default::default()
        }
    }

    fn with_basis(mut self, b: &BasisArgs) -> Self {
        self.confirmations = Some(b.confirmations);
        self.sample_points = b.sample_points.clone();
        self
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let r = f();
        self.timings_seconds.push((phase.to_string(), start.elapsed().as_secs_f64()));
        r
    }

    fn write(&mut self, out: &Path, name: &str, text: &str) -> Result<(), CliError> {
        artifacts::write_text(&out.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, out: &Path, name: &str, value: &T) -> Result<(), CliError> {
        artifacts::write_json(&out.join(name), value)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, out: &Path) -> Result<(), CliError> {
        self.outputs.push("manifest.json".into());
        artifacts::write_json(&out.join("manifest.json"), &self)?;
        Ok(())
    }
}

fn load_model(path: &Path) -> Result<OdeSystem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ArtifactError::Io { path: path.to_path_buf(), source })?;
    parse_model(&text).map_err(|source| CliError::Model { path: path.to_path_buf(), source })
}

fn build_basis(sys: &OdeSystem, seed: u64, b: &BasisArgs) -> Result<JacobianBasis, CliError> {
    match &b.sample_points {
        Some(path) => Ok(basis_from_points(sys, &artifacts::read_points(path)?)?),
        None => {
            let dom = SamplingDomain::default_for(sys).with_seed(seed).with_confirmations(b.confirmations)?;
            Ok(sample_jacobian_basis(sys, &dom)?)
        }
    }
}

fn prepare(common: &CommonArgs) -> Result<OdeSystem, CliError> {
    let sys = load_model(&common.model)?;
    artifacts::ensure_dir(&common.out)?;
    Ok(sys)
}

fn cmd_lump(args: &LumpArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !(args.epsilon >= 0.0 && args.epsilon.is_finite()) {
        return Err(CliError::Usage(format!("--epsilon must be a non-negative number, got {}", args.epsilon)));
    }
    let mut manifest = Manifest::new("lump", &args.common).with_basis(&args.basis);
    manifest.epsilon = Some(args.epsilon);
    let sys = manifest.time("parse", || prepare(&args.common))?;
    let basis = manifest.time("basis", || build_basis(&sys, args.common.seed, &args.basis))?;
    let (lumping, eps_max) = manifest.time("lump", || -> Result<_, CliError> {
        let l = lumping::approximate_lump(&basis, sys.observables(), args.epsilon)?;
        let e = lumping::epsilon_max(&basis, sys.observables())?;
        Ok((l, e))
    })?;
    let out = &args.common.out;
    manifest.write_json(out, "basis.json", &BasisFile::new(&basis))?;
    let file = LumpingFile::new(sys.var_names(), &lumping, eps_max);
    manifest.write_json(out, "L.json", &file)?;
    manifest.finish(out)?;
    let _ = writeln!(stdout, "reduced size: {}", file.size);
    let _ = writeln!(stdout, "epsilon/epsilon_max: {}", file.epsilon_ratio);
    Ok(())
}

fn cmd_find_epsilon(args: &FindEpsilonArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !(args.ratio > 0.0 && args.ratio <= 1.0) {
        return Err(CliError::Usage(format!("--ratio must lie in (0, 1], got {}", args.ratio)));
    }
    if !(args.d_min > 0.0 && args.d_min.is_finite()) {
        return Err(CliError::Usage(format!("--d-min must be positive, got {}", args.d_min)));
    }
    let mut manifest = Manifest::new("find-epsilon", &args.common).with_basis(&args.basis);
    manifest.ratio = Some(args.ratio);
    manifest.d_min = Some(args.d_min);
    let sys = manifest.time("parse", || prepare(&args.common))?;
    let cutoff = cutoff_for(args.ratio, sys.dim());
    manifest.cutoff = Some(cutoff);
    let basis = manifest.time("basis", || build_basis(&sys, args.common.seed, &args.basis))?;
    let search = manifest.time("search", || -> Result<_, CliError> {
        let cfg = EpsilonSearchConfig::new(cutoff, args.d_min)?;
        Ok(lumping::find_epsilon(&basis, sys.observables(), &cfg)?)
    })?;
    let out = &args.common.out;
    manifest.write_json(out, "basis.json", &BasisFile::new(&basis))?;
    manifest.write_json(out, "L.json", &LumpingFile::new(sys.var_names(), &search.lumping, search.epsilon_max))?;
    let file = SearchFile::new(args.ratio, cutoff, args.d_min, &search);
    manifest.write_json(out, "search.json", &file)?;
    manifest.finish(out)?;
    let _ = writeln!(stdout, "cutoff: {cutoff}");
    let _ = writeln!(stdout, "epsilon: {}", file.epsilon);
    let _ = writeln!(stdout, "epsilon/epsilon_max: {}", file.epsilon_ratio);
    let _ = writeln!(stdout, "reduced size: {}", file.size);
    let _ = writeln!(stdout, "iterations: {}", file.iterations);
    Ok(())
}

/// Largest size allowed by `ratio`: `floor(ratio·m)`, at least 1. Products
/// within `1e-9` of an integer snap to it so that `(2/3)·3` gives 2.
pub fn cutoff_for(ratio: f64, m: usize) -> usize {
    let x = ratio * m as f64;
    let nearest = x.round();
    let c = if (x - nearest).abs() <= 1e-9 * x.max(1.0) { nearest } else { x.floor() };
    (c as usize).max(1)
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let solver = SolverConfig::with_tolerances(args.rel_tol, args.abs_tol);
    solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = Manifest::new("simulate", &args.common);
    manifest.solver = Some(solver);
    manifest.grid = Some(args.grid);
    manifest.lumping = args.lumping.clone();
    let sys = manifest.time("parse", || prepare(&args.common))?;
    let horizon = args.horizon.unwrap_or(sys.horizon());
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::Usage(format!("--horizon must be positive, got {horizon}")));
    }
    manifest.horizon = Some(horizon);
    let l = args.lumping.as_deref().map(artifacts::read_lumping_rows).transpose()?;
    let x0 = sys.initial_conditions()[0].clone();
    let out = args.common.out.clone();
    let names: Vec<String> = sys.var_names().to_vec();

    match l {
        None => {
            let times = simulate::uniform_grid(horizon, args.grid);
            let traj = manifest.time("simulate", || simulate::integrate_with_stops(&sys, &x0, horizon, &solver, &times))?;
            let states = traj.resample(&times);
            manifest.write(&out, "original.csv", &artifacts::series_csv("t", &names, &times, &states))?;
            manifest.finish(&out)?;
            let _ = writeln!(stdout, "steps: {} accepted, {} rejected", traj.accepted_steps(), traj.rejected_steps());
        }
        Some(l) => {
            let opts = ReportOptions { grid_points: args.grid, lipschitz_samples: args.lipschitz_samples, seed: args.common.seed };
            let report = manifest.time("simulate", || simulate::reduction_report(&sys, &l, &x0, horizon, &solver, &opts))?;
            let reduced_names: Vec<String> = (1..=l.nrows()).map(|i| format!("y{i}")).collect();
            manifest.write(&out, "original.csv", &artifacts::series_csv("t", &names, &report.times, &report.original_states))?;
            manifest.write(&out, "reduced.csv", &artifacts::series_csv("t", &reduced_names, &report.times, &report.reduced_states))?;
            manifest.write(&out, "error.csv", &artifacts::scalar_series_csv("error", &report.times, &report.error))?;
            manifest.write(&out, "deviation.csv", &artifacts::scalar_series_csv("deviation", &report.times, &report.deviation))?;
            manifest.write_json(&out, "report.json", &report)?;
            manifest.finish(&out)?;
            let _ = writeln!(stdout, "e(T): {}", report.e_at_t);
            let _ = writeln!(stdout, "e_max: {}", report.e_max);
            match report.e_rel_at_t {
                Some(r) => {
                    let _ = writeln!(stdout, "e_rel(T): {r}");
                }
                None => {
                    let _ = writeln!(stdout, "e_rel(T): undefined (observable below 1e-12)");
                }
            }
            let _ = writeln!(stdout, "eta: {}", report.eta);
            let _ = writeln!(stdout, "bound: {}", report.bound);
        }
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let mut manifest = Manifest::new("sweep", &args.common).with_basis(&args.basis);
    manifest.grid = Some(args.grid);
    let sys = manifest.time("parse", || prepare(&args.common))?;
    let basis = manifest.time("basis", || build_basis(&sys, args.common.seed, &args.basis))?;
    let (points, eps_max) = manifest.time("sweep", || -> Result<_, CliError> {
        let eps_max = lumping::epsilon_max(&basis, sys.observables())?;
        let n = args.grid;
        let grid: Vec<f64> = (0..n)
            .map(|k| if k + 1 == n { eps_max } else { eps_max * k as f64 / (n - 1) as f64 })
            .collect();
        Ok((lumping::staircase(&basis, sys.observables(), &grid)?, eps_max))
    })?;
    let out = &args.common.out;
    manifest.write_json(out, "basis.json", &BasisFile::new(&basis))?;
    manifest.write(out, "staircase.csv", &artifacts::staircase_csv(&points, eps_max))?;
    manifest.finish(out)?;
    lumping::check_monotone(&points)?;
    let _ = writeln!(stdout, "epsilon_max: {eps_max}");
    let _ = writeln!(
        stdout,
        "sizes: {} .. {}",
        points.first().map_or(0, |p| p.size),
        points.last().map_or(0, |p| p.size)
    );
    Ok(())
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Lump(a) => cmd_lump(a, stdout),
        Command::FindEpsilon(a) => cmd_find_epsilon(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
