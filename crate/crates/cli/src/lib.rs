//! Command-line front end: `generate`, `denoise`, `analyze`, `sweep` and
//! `spectrum`. Every run writes its fully resolved configuration next to its
//! main output as `<stem>.config.json`; `mfd --replay <file>` re-runs it.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mfd_core::analysis::{
    band_energy_profile, k_sweep, theory_report, write_profiles_csv, write_scale_bounds_csv, write_sweep_csv,
    EnergyProfile, TheoryConfig,
};
use mfd_core::denoise::{mfd_denoise, DenoiseConfig, DimensionReport};
use mfd_core::graph::{build_knn_graph, laplacian, SigmaMode};
use mfd_core::pointcloud::{
    add_gaussian_noise, load_csv, rmse_matrix, sample_manifold, save_csv, truth_sibling, ManifoldKind, PointCloud,
    ShapeParams,
};
use mfd_core::sgw::{design_filterbank, ChebyshevBank, FilterBankOptions};
use mfd_core::MfdError;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MFD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mfd", version, about = "Manifold denoising with spectral graph wavelets")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Re-run a configuration echo written by an earlier run.
    #[arg(long, value_name = "CONFIG_JSON")]
    replay: Option<PathBuf>,
}

/// One resolved invocation; this is what the `.config.json` echo holds.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Sample a manifold, optionally add Gaussian noise.
    Generate(GenerateArgs),
    /// Denoise a point cloud.
    Denoise(DenoiseArgs),
    /// Check the band-energy bounds on a cloud.
    Analyze(AnalyzeArgs),
    /// Denoising RMSE over a range of neighbourhood sizes.
    Sweep(SweepArgs),
    /// Per-band energy profile of every coordinate.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub kind: ManifoldKind,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Variance of the Gaussian noise added to every coordinate.
    #[arg(long, default_value_t = 0.0)]
    pub noise_var: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(skip)]
    #[serde(default)]
    pub shape: Option<ShapeParams>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FilterArgs {
    /// Number of wavelet scales.
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// Chebyshev order; defaults to max(ceil(k/2), 20).
    #[arg(long)]
    pub cheb_order: Option<usize>,
    /// Gaussian bandwidth: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub sigma: SigmaMode,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DenoiseOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub filter: FilterArgs,
    /// Cumulative band energy to keep; defaults from --noise-var.
    #[arg(long)]
    pub energy_threshold: Option<f64>,
    /// Noise variance hint: 0.99 threshold up to 0.15, 0.95 above.
    #[arg(long)]
    pub noise_var: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = mfd_core::sgw::CG_MAX_ITER)]
    pub cg_max_iter: usize,
}

impl DenoiseOpts {
    fn config(&self, k: usize) -> DenoiseConfig {
        let energy_threshold = self
            .energy_threshold
            .unwrap_or_else(|| DenoiseConfig::default_energy_threshold(self.noise_var.unwrap_or(0.0)));
        DenoiseConfig {
            k,
            sigma_mode: self.filter.sigma,
            j_scales: self.filter.levels,
            cheb_order: self.filter.cheb_order,
            energy_threshold,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            filter: FilterBankOptions::default(),
        }
        .resolved()
    }

    fn resolve(&mut self, k: usize) {
        let cfg = self.config(k);
        self.energy_threshold = Some(cfg.energy_threshold);
        self.filter.cheb_order = cfg.cheb_order;
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DenoiseArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub opts: DenoiseOpts,
    /// Band report path; defaults to `<stem>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifold kind, used for its analytic reach when --tau is absent.
    #[arg(long)]
    pub kind: Option<ManifoldKind>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// The constant C ≥ 1 in Δ = 4CT.
    #[arg(long = "c", default_value_t = 1.0)]
    pub c_const: f64,
    /// Covering radius; defaults to the sample resolution.
    #[arg(long)]
    pub covering_radius: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub filter: FilterArgs,
    /// Monte Carlo trials for the noise check (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.1)]
    pub mc_var: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the translation away from the origin.
    #[arg(long)]
    pub no_translate: bool,
    /// Also write `scale,empirical,bound,satisfied` for the first coordinate.
    #[arg(long)]
    pub bounds_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated k values; defaults to the even values 20..=50.
    #[arg(long, value_delimiter = ',')]
    pub k_values: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub opts: DenoiseOpts,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(MfdError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<MfdError> for CliError {
    fn from(e: MfdError) -> Self {
        match e {
            MfdError::InvalidParameter { .. } | MfdError::UnknownManifold(_) => CliError::Usage(e.to_string()),
            e => CliError::Runtime(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs the CLI on `argv` (program name first) and returns the exit code:
/// 0 on success, 1 on usage errors, 2 on runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| match (cli.command, cli.replay) {
        (Some(cmd), None) => execute(cmd),
        (None, Some(path)) => replay(&path),
        _ => Err(CliError::Usage("expected a command or --replay <config.json>; see `mfd --help`".into())),
    });
    match result {
        Ok(()) => 0,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // A pool may already exist when run is called repeatedly in one process.
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("global thread pool already initialised");
    }
    Ok(())
}

fn replay(path: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
    let cmd: Command = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config `{}`: {e}", path.display())))?;
    execute(cmd)
}

/// Path with the extension replaced by `suffix`: `d.csv` → `d.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Where the configuration echo of a run writing `out` goes.
pub fn config_path(out: &Path) -> PathBuf {
    sibling(out, "config.json")
}

fn require_input(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file `{}` does not exist", path.display())))
    }
}

/// Loads a cloud and, when present, its `<stem>.truth.csv` sibling.
fn load_with_truth(path: &Path) -> CliResult<PointCloud> {
    require_input(path)?;
    let pc = load_csv(path)?;
    let truth_path = truth_sibling(path);
    if truth_path.is_file() && truth_path != path {
        let truth = load_csv(&truth_path)?;
        return Ok(PointCloud::with_ground_truth(pc.coords().clone(), truth.coords().clone())?);
    }
    Ok(pc)
}

fn save_with_truth(pc: &PointCloud, path: &Path) -> CliResult<()> {
    save_csv(pc, path)?;
    if let Some(t) = pc.truth_cloud() {
        save_csv(&t, truth_sibling(path))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn echo(cmd: &Command, out: &Path) -> CliResult<()> {
    log::info!("resolved config: {}", serde_json::to_string(cmd)?);
    write_json(cmd, &config_path(out))
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Denoise(a) => denoise(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::Spectrum(a) => spectrum(a),
    }
}

fn shape_params(radius: Option<f64>) -> ShapeParams {
    let mut p = ShapeParams::default();
    if let Some(r) = radius {
        p.radius = r;
    }
    p
}

fn generate(mut a: GenerateArgs) -> CliResult<()> {
    let shape = a.shape.clone().unwrap_or_else(|| shape_params(a.radius));
    a.shape = Some(shape.clone());
    let clean = sample_manifold(a.kind, a.n, &shape, a.seed)?;
    let noisy = add_gaussian_noise(&clean, a.noise_var, a.seed.wrapping_add(1))?;
    save_with_truth(&noisy, &a.out)?;
    let out_path = a.out.clone();
    echo(&Command::Generate(a), &out_path)
}

#[derive(Serialize)]
struct BandReport<'a> {
    config: &'a DenoiseConfig,
    dimensions: Vec<DimensionReport>,
    n_edges: usize,
    graph_checksum: String,
    sigma_d: f64,
    lambda_max: f64,
    scales: &'a [f64],
    chebyshev_sup_errors: &'a [f64],
    cg_iterations: &'a [usize],
    rmse_input: Option<f64>,
    rmse_output: Option<f64>,
    warnings: &'a [String],
}

fn denoise(mut a: DenoiseArgs) -> CliResult<()> {
    let pc = load_with_truth(&a.input)?;
    a.opts.resolve(a.k);
    let cfg = a.opts.config(a.k);
    let out = mfd_denoise(&pc, &cfg)?;
    save_with_truth(&out.cloud, &a.out)?;
    let rmse_to_truth = |c: &PointCloud| c.ground_truth().map(|t| rmse_matrix(c.coords(), t)).transpose();
    let report = BandReport {
        config: &out.config,
        dimensions: out.dimension_reports(),
        n_edges: out.n_edges,
        graph_checksum: format!("{:016x}", out.graph_checksum),
        sigma_d: out.sigma_d,
        lambda_max: out.lambda_max,
        scales: &out.scales,
        chebyshev_sup_errors: &out.sup_errors,
        cg_iterations: &out.cg_iterations,
        rmse_input: rmse_to_truth(&pc)?,
        rmse_output: rmse_to_truth(&out.cloud)?,
        warnings: &out.warnings,
    };
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.out, "report.json"));
    a.report = Some(report_path.clone());
    write_json(&report, &report_path)?;
    let out_path = a.out.clone();
    echo(&Command::Denoise(a), &out_path)
}

fn analyze(mut a: AnalyzeArgs) -> CliResult<()> {
    let pc = load_with_truth(&a.input)?;
    let tau = match (a.tau, a.kind) {
        (Some(t), _) => t,
        (None, Some(kind)) => kind.analytic_tau(&shape_params(a.radius)).ok_or_else(|| {
            CliError::Usage(format!("no analytic reach for `{kind}`; pass --tau"))
        })?,
        (None, None) => return Err(CliError::Usage("pass --tau or a --kind with an analytic reach".into())),
    };
    a.tau = Some(tau);
    let cfg = TheoryConfig {
        k: a.k,
        sigma_mode: a.filter.sigma,
        j_scales: a.filter.levels,
        filter: FilterBankOptions::default(),
        tau,
        c_const: a.c_const,
        covering_radius: a.covering_radius,
        translate: !a.no_translate,
        mc_variance: a.mc_var,
        trials: a.trials,
        seed: a.seed,
    };
    let report = theory_report(&pc, &cfg)?;
    a.covering_radius = Some(report.meta.covering_radius);
    write_json(&report, &a.out)?;
    if let Some(path) = &a.bounds_csv {
        write_scale_bounds_csv(&report.clean[0].scales, path)?;
    }
    let out_path = a.out.clone();
    echo(&Command::Analyze(a), &out_path)
}

/// Even k from 20 to 50.
pub fn default_k_values() -> Vec<usize> {
    (20..=50).step_by(2).collect()
}

fn sweep(mut a: SweepArgs) -> CliResult<()> {
    let pc = load_with_truth(&a.input)?;
    if pc.ground_truth().is_none() {
        return Err(CliError::Usage(format!(
            "sweep needs ground truth in `{}`",
            truth_sibling(&a.input).display()
        )));
    }
    if a.k_values.is_empty() {
        a.k_values = default_k_values();
    }
    let first_k = a.k_values[0];
    a.opts.energy_threshold = Some(a.opts.config(first_k).energy_threshold);
    let template = DenoiseConfig {
        cheb_order: a.opts.filter.cheb_order,
        ..a.opts.config(first_k)
    };
    let rows = k_sweep(&pc, &a.k_values, &template)?;
    write_sweep_csv(&rows, &a.out)?;
    let out_path = a.out.clone();
    echo(&Command::Sweep(a), &out_path)
}

fn spectrum(mut a: SpectrumArgs) -> CliResult<()> {
    let pc = load_with_truth(&a.input)?;
    let cfg = DenoiseConfig {
        k: a.k,
        j_scales: a.filter.levels,
        cheb_order: a.filter.cheb_order,
        sigma_mode: a.filter.sigma,
        ..DenoiseConfig::default()
    };
    cfg.validate()?;
    let m = cfg.resolved_cheb_order();
    a.filter.cheb_order = Some(m);
    let g = build_knn_graph(&pc, a.k, a.filter.sigma)?;
    let l = laplacian(&g);
    let fb = design_filterbank(l.lambda_max_estimate(), a.filter.levels, &FilterBankOptions::default())?;
    let bank = ChebyshevBank::new(&fb, m)?;
    let profiles: Vec<EnergyProfile> = (0..pc.ambient_dim())
        .map(|r| Ok(band_energy_profile(&bank.forward(&l, &pc.signal(r))?)))
        .collect::<mfd_core::Result<_>>()?;
    write_profiles_csv(&profiles, fb.scales(), &a.out)?;
    let out_path = a.out.clone();
    echo(&Command::Spectrum(a), &out_path)
}
