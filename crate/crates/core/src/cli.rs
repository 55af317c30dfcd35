//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 a
//! verification check failed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fracops::{caputo_derivative, gl_derivative, rl_derivative, rl_integral, FracOrderParam, TimeSignal};
use crate::mittag_leffler::{ml_eval, MlParams};
use crate::solver::{solve, DuhamelQuadrature, Forcing, ProblemSpec, SolutionSnapshot};
use crate::spectral::{band_modes, min_points_per_axis, Mode, SpectralField};
use crate::verify::{
    initial_limit_check, kernel_estimate_suite, residual_check, truncation_study, InitialLimitReport,
    KernelSuiteReport, ResidualReport, TruncationReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "subdiff", version, about = "Time-fractional subdiffusion on the N-torus")]
pub struct Cli {
    /// Run configuration (JSON); a manifest from an earlier run is also accepted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `out_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write snapshots.
    Solve,
    /// Run the configured verification checks.
    Verify,
    /// Tabulate E_{rho,mu}(z) on evenly spaced z as CSV.
    #[command(allow_negative_numbers = true)]
    MlTable {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        z_min: f64,
        #[arg(long)]
        z_max: f64,
        #[arg(long)]
        count: usize,
    },
    /// Apply a fractional operator to a signal read from CSV (`t,value`,
    /// uniform `t` starting at 0).
    #[command(allow_negative_numbers = true)]
    Fracop {
        #[arg(long, value_enum)]
        op: FracOp,
        /// Integral order (negative) or derivative order in (0, 1].
        #[arg(long)]
        order: f64,
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// The file holds `g` with `h = t^beta g`.
        #[arg(long, default_value_t = 0.0)]
        leading_power: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FracOp {
    RlIntegral,
    RlDerivative,
    CaputoDerivative,
    GlDerivative,
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub eval_times: EvalTimes,
    #[serde(default)]
    pub quadrature: DuhamelQuadrature,
    /// Also write grid samples with this many points per axis.
    #[serde(default)]
    pub grid_points_per_axis: Option<usize>,
    #[serde(default = "yes")]
    pub write_csv: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Seeds the phases of decay-law initial data.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim_n: usize,
    pub rho: f64,
    pub horizon_t: f64,
    pub band_k: f64,
    pub initial: InitialData,
    #[serde(default = "no_forcing")]
    pub forcing: Forcing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// Explicit `[[n1, ..., nN], [re, im]]` pairs.
    Modes {
        coeffs: Vec<(Vec<i64>, [f64; 2])>,
    },
    /// `|phi_n| = amplitude |n|^-exponent` for `n != 0` in the band, with
    /// phases drawn from the seeded generator.
    Decay {
        exponent: f64,
        #[serde(default = "unit")]
        amplitude: f64,
        /// Make `phi_{-n} = conj(phi_n)`.
        #[serde(default)]
        real: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalTimes {
    List(Vec<f64>),
    /// `t_k = k T / steps`, `k = 1..steps`.
    Uniform {
        steps: usize,
    },
}

impl Default for EvalTimes {
    fn default() -> Self {
        EvalTimes::Uniform { steps: 16 }
    }
}

impl EvalTimes {
    fn resolve(&self, horizon: f64) -> Vec<f64> {
        match self {
            EvalTimes::List(v) => v.clone(),
            EvalTimes::Uniform { steps } => uniform_times(horizon, *steps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub residual: ResidualConfig,
    pub initial_limit: InitialLimitConfig,
    pub truncation: TruncationConfig,
    pub kernel_suite: KernelSuiteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualConfig {
    pub enabled: bool,
    /// Uniform steps on `(0, T]`.
    pub steps: usize,
    /// Bound on residual / solution norm over the window.
    pub tolerance: f64,
    /// The window starts at this fraction of `T`.
    pub window_start: f64,
    /// Repeat with half the steps and check the observed order.
    pub check_order: bool,
    /// Accepted order, relative to the scheme's nominal order.
    pub order_range: [f64; 2],
    /// Check snapshots written by an earlier `solve` instead of solving.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            steps: 4096,
            tolerance: 5e-3,
            window_start: 0.25,
            check_order: true,
            order_range: [0.8, 1.2],
            snapshot_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialLimitConfig {
    pub enabled: bool,
    /// Probes at `t = 2^-j`, `j = j_min..=j_max`.
    pub j_min: u32,
    pub j_max: u32,
    /// Relative agreement with the closed form (unforced problems only).
    pub tolerance: f64,
}

impl Default for InitialLimitConfig {
    fn default() -> Self {
        Self { enabled: true, j_min: 3, j_max: 20, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    pub enabled: bool,
    /// Defaults to `K/8, K/4, K/2, K`.
    pub band_k_values: Option<Vec<f64>>,
    /// Defaults to the horizon.
    pub t: Option<f64>,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { enabled: true, band_k_values: None, t: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSuiteConfig {
    pub enabled: bool,
    pub rho_values: Vec<f64>,
    pub epsilon_values: Vec<f64>,
    /// Bound on `max / min` of the per-decade constants; `null` checks only
    /// the uniform bound.
    pub max_decade_variation: Option<f64>,
}

impl Default for KernelSuiteConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            rho_values: vec![0.3, 0.5, 0.7],
            epsilon_values: vec![0.25, 0.5, 0.75],
            max_decade_variation: Some(1.05),
        }
    }
}

fn yes() -> bool {
    true
}

fn unit() -> f64 {
    1.0
}

fn no_forcing() -> Forcing {
    Forcing::None
}

/// Record of a `solve` run; accepted back as a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub library_version: String,
    pub config: RunConfig,
    pub outputs: Vec<OutputEntry>,
    /// The only field that differs between identical runs.
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputEntry {
    pub index: usize,
    pub t: f64,
    pub file: String,
}

// ---------------------------------------------------------------- errors

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(Error),
    CheckFailed(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(e) => write!(f, "numeric error: {e}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(m) => CliError::Validation(m),
            other => CliError::Numeric(other),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// 1-based line of the first occurrence of `"key"`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn config_error(path: &Path, text: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
    match line_of_key(text, key) {
        Some(line) => CliError::Validation(format!("{}:{line}: `{key}`: {msg}", path.display())),
        None => CliError::Validation(format!("{}: `{key}`: {msg}", path.display())),
    }
}

// ---------------------------------------------------------------- loading

/// A validated configuration together with the problem it describes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub problem: ProblemSpec,
    pub eval_times: Vec<f64>,
}

/// Parse a config or manifest and check every field against its domain.
pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(path, &text)
}

pub fn parse_config(path: &Path, text: &str) -> Result<LoadedConfig, CliError> {
    let parse_err = |e: serde_json::Error| CliError::Validation(format!("{}:{}: {e}", path.display(), e.line()));
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    let config = if value.get("manifest_version").is_some() {
        serde_json::from_str::<Manifest>(text).map_err(parse_err)?.config
    } else {
        serde_json::from_str::<RunConfig>(text).map_err(parse_err)?
    };
    validate_config(path, text, config)
}

fn validate_config(path: &Path, text: &str, config: RunConfig) -> Result<LoadedConfig, CliError> {
    let bad = |key: &str, msg: &dyn std::fmt::Display| config_error(path, text, key, msg);
    let p = &config.problem;
    if p.dim_n == 0 {
        return Err(bad("dim_n", &"must be at least 1"));
    }
    let phi = initial_field(p, config.seed).map_err(|e| bad("initial", &e))?;
    let problem = ProblemSpec::new(p.rho, p.horizon_t, phi, p.forcing.clone()).map_err(|e| {
        let key = match &e {
            Error::Coverage(_) => "forcing",
            Error::ParameterDomain(m) if m.contains("horizon") => "horizon_t",
            Error::ParameterDomain(_) => "rho",
            _ => "problem",
        };
        bad(key, &e)
    })?;
    config.quadrature.validate().map_err(|e| bad("quadrature", &e))?;

    let eval_times = config.eval_times.resolve(p.horizon_t);
    if eval_times.is_empty() {
        return Err(bad("eval_times", &"no evaluation times"));
    }
    if eval_times.iter().any(|&t| !(t > 0.0 && t <= p.horizon_t)) {
        return Err(bad("eval_times", &format!("times must lie in (0, {}]", p.horizon_t)));
    }
    if eval_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("eval_times", &"times must be strictly increasing"));
    }
    if let Some(m) = config.grid_points_per_axis {
        let need = min_points_per_axis(p.band_k);
        if m < need {
            return Err(bad("grid_points_per_axis", &format!("{m} points alias the band; need at least {need}")));
        }
    }

    let v = &config.verify;
    let r = &v.residual;
    if r.steps < 4 {
        return Err(bad("steps", &"need at least 4 steps"));
    }
    if !(r.tolerance > 0.0) {
        return Err(bad("tolerance", &"must be positive"));
    }
    if !(0.0..1.0).contains(&r.window_start) {
        return Err(bad("window_start", &"must lie in [0, 1)"));
    }
    if !(r.order_range[0] <= r.order_range[1]) {
        return Err(bad("order_range", &"lower end exceeds upper end"));
    }
    let il = &v.initial_limit;
    if il.j_min >= il.j_max || il.j_max > 60 {
        return Err(bad("j_max", &"need j_min < j_max <= 60"));
    }
    if !(il.tolerance > 0.0) {
        return Err(bad("initial_limit", &"tolerance must be positive"));
    }
    if let Some(ks) = &v.truncation.band_k_values {
        if ks.len() < 2 || ks.windows(2).any(|w| w[1] <= w[0]) || ks.iter().any(|&k| !(k > 0.0)) {
            return Err(bad("band_k_values", &"need at least two increasing positive values"));
        }
    }
    if let Some(t) = v.truncation.t {
        if !(t > 0.0 && t <= p.horizon_t) {
            return Err(bad("truncation", &format!("t must lie in (0, {}]", p.horizon_t)));
        }
    }
    let ks = &v.kernel_suite;
    if ks.rho_values.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(bad("rho_values", &"orders must lie in (0, 1)"));
    }
    if ks.epsilon_values.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(bad("epsilon_values", &"values must lie in (0, 1)"));
    }
    Ok(LoadedConfig { config, problem, eval_times })
}

/// Initial coefficients described by the problem config.
pub fn initial_field(p: &ProblemConfig, seed: u64) -> crate::Result<SpectralField> {
    let mut f = SpectralField::new(p.dim_n, p.band_k)?;
    match &p.initial {
        InitialData::Zero => {}
        InitialData::Modes { coeffs } => {
            for (n, [re, im]) in coeffs {
                if n.len() != p.dim_n {
                    return Err(Error::Validation(format!(
                        "mode {n:?} has dimension {}, expected {}",
                        n.len(),
                        p.dim_n
                    )));
                }
                f.insert(Mode::new(n.clone()), Complex64::new(*re, *im))?;
            }
        }
        InitialData::Decay { exponent, amplitude, real } => {
            if !exponent.is_finite() || !amplitude.is_finite() {
                return Err(Error::Validation("decay law needs finite exponent and amplitude".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut coeffs: BTreeMap<Mode, Complex64> = BTreeMap::new();
            for m in band_modes(p.dim_n, p.band_k)? {
                if m.is_zero() {
                    continue;
                }
                if *real {
                    if let Some(c) = coeffs.get(&m.neg()) {
                        let c = c.conj();
                        coeffs.insert(m, c);
                        continue;
                    }
                }
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let modulus = amplitude * m.eigenvalue().powf(-0.5 * exponent);
                coeffs.insert(m, Complex64::from_polar(modulus, phase));
            }
            for (m, c) in coeffs {
                f.insert(m, c)?;
            }
        }
    }
    Ok(f)
}

fn uniform_times(horizon: f64, steps: usize) -> Vec<f64> {
    (1..=steps).map(|k| k as f64 * horizon / steps as f64).collect()
}

// ---------------------------------------------------------------- commands

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let write_out = |out: &mut dyn Write, s: &str| out.write_all(s.as_bytes()).map_err(|e| CliError::Io(e.to_string()));
    match &cli.command {
        Command::Solve => {
            let cfg = require_config(cli)?;
            let dir = output_dir(cli, &cfg.config)?;
            let summary = cmd_solve(&cfg, &dir)?;
            if !cli.quiet {
                write_out(out, &summary)?;
            }
        }
        Command::Verify => {
            let cfg = require_config(cli)?;
            let dir = cli.out.clone().or_else(|| cfg.config.out_dir.clone());
            let outcome = cmd_verify(&cfg, dir.as_deref())?;
            if !cli.quiet {
                write_out(out, &outcome.summary())?;
            }
            if !outcome.pass() {
                return Err(CliError::CheckFailed(outcome.failed().join(", ")));
            }
        }
        Command::MlTable { rho, mu, z_min, z_max, count } => {
            write_out(out, &cmd_ml_table(*rho, *mu, *z_min, *z_max, *count)?)?;
        }
        Command::Fracop { op, order, input, leading_power } => {
            write_out(out, &cmd_fracop(*op, *order, input, *leading_power)?)?;
        }
    }
    Ok(())
}

fn require_config(cli: &Cli) -> Result<LoadedConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("--config PATH is required".into()))?;
    load_config(path)
}

fn output_dir(cli: &Cli, config: &RunConfig) -> Result<PathBuf, CliError> {
    cli.out
        .clone()
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out DIR or set out_dir".into()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn snapshot_name(k: usize) -> String {
    format!("u_{k:05}")
}

/// Solve and write `snapshots/u_NNNNN.{json,csv}`, optional grid CSVs,
/// `times.csv` and `manifest.json` under `dir`. Returns a short summary.
pub fn cmd_solve(cfg: &LoadedConfig, dir: &Path) -> Result<String, CliError> {
    let snaps = solve(&cfg.problem, &cfg.eval_times, &cfg.config.quadrature)?;
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| io_err(&snap_dir, e))?;

    let mut times = csv::Writer::from_writer(Vec::new());
    times.write_record(["index", "t", "file"]).expect("in-memory write");
    let mut outputs = Vec::with_capacity(snaps.len());
    for (i, s) in snaps.into_iter().enumerate() {
        let k = i + 1;
        let name = snapshot_name(k);
        let file = format!("snapshots/{name}.json");
        write_file(&dir.join(&file), &s.field.to_json())?;
        if cfg.config.write_csv {
            write_file(&snap_dir.join(format!("{name}.csv")), &s.field.to_csv())?;
        }
        let t = s.t;
        if let Some(m) = cfg.config.grid_points_per_axis {
            let s = s.with_grid(m)?;
            let grid = s.grid.as_ref().expect("grid attached");
            write_file(&snap_dir.join(format!("grid_{k:05}.csv")), &grid.to_csv())?;
        }
        times.write_record([k.to_string(), t.to_string(), file.clone()]).expect("in-memory write");
        outputs.push(OutputEntry { index: k, t, file });
    }
    let times = String::from_utf8(times.into_inner().expect("flush")).expect("utf8");
    write_file(&dir.join("times.csv"), &times)?;

    let mut config = cfg.config.clone();
    config.out_dir = Some(dir.to_path_buf());
    let n = outputs.len();
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        outputs,
        created_at: timestamp(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    write_file(&dir.join("manifest.json"), &text)?;
    Ok(format!("wrote {n} snapshots to {}\n", dir.display()))
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}

/// Read snapshots written by [`cmd_solve`].
pub fn load_snapshots(dir: &Path, rho: f64) -> Result<Vec<SolutionSnapshot>, CliError> {
    let index = dir.join("times.csv");
    let text = fs::read_to_string(&index).map_err(|e| io_err(&index, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut snaps = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CliError::Validation(format!("{}:{row}: {e}", index.display())))?;
        let t: f64 = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Validation(format!("{}:{row}: bad time", index.display())))?;
        let file = dir.join(rec.get(2).unwrap_or_default());
        let body = fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
        let field =
            SpectralField::from_json(&body).map_err(|e| CliError::Validation(format!("{}: {e}", file.display())))?;
        let scale = t.powf(1.0 - rho);
        let regularized = field.scale(scale);
        snaps.push(SolutionSnapshot { t, field, regularized, grid: None });
    }
    Ok(snaps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualOutcome {
    pub report: ResidualReport,
    pub window_start: f64,
    pub max_relative: f64,
    pub observed_order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialLimitOutcome {
    pub report: InitialLimitReport,
    /// Largest relative gap to the closed form; `None` with forcing.
    pub max_closed_form_gap: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationOutcome {
    pub report: TruncationReport,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSuiteOutcome {
    pub report: KernelSuiteReport,
    pub max_decade_variation: Option<f64>,
    pub pass: bool,
}

/// Results of the enabled checks; disabled ones are `None` and pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub residual: Option<ResidualOutcome>,
    pub initial_limit: Option<InitialLimitOutcome>,
    pub truncation: Option<TruncationOutcome>,
    pub kernel_suite: Option<KernelSuiteOutcome>,
}

impl VerifyOutcome {
    fn statuses(&self) -> [(&'static str, Option<bool>); 4] {
        [
            ("residual", self.residual.as_ref().map(|o| o.pass)),
            ("initial_limit", self.initial_limit.as_ref().map(|o| o.pass)),
            ("truncation", self.truncation.as_ref().map(|o| o.pass)),
            ("kernel_suite", self.kernel_suite.as_ref().map(|o| o.pass)),
        ]
    }

    pub fn pass(&self) -> bool {
        self.statuses().iter().all(|(_, s)| s.unwrap_or(true))
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.statuses().iter().filter(|(_, s)| *s == Some(false)).map(|(n, _)| *n).collect()
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (name, status) in self.statuses() {
            let word = match status {
                None => "skipped",
                Some(true) => "PASS",
                Some(false) => "FAIL",
            };
            let detail = match name {
                "residual" => self.residual.as_ref().map(|o| {
                    let order = o.observed_order.map_or("-".to_string(), |p| format!("{p:.3}"));
                    format!("max relative {:.3e}, order {order}", o.max_relative)
                }),
                "initial_limit" => self.initial_limit.as_ref().map(|o| {
                    let gap = o.max_closed_form_gap.map_or("-".to_string(), |g| format!("{g:.3e}"));
                    format!("monotone from {:?}, closed-form gap {gap}", o.report.monotone_from)
                }),
                "truncation" => self.truncation.as_ref().map(|o| format!("dominated {}", o.report.all_dominated())),
                _ => self.kernel_suite.as_ref().map(|o| {
                    let v = o.report.rows.iter().map(|r| r.decade_variation).fold(0.0, f64::max);
                    format!("uniform bound {}, max decade variation {v:.3e}", o.report.pass)
                }),
            };
            let _ = writeln!(s, "{name:<14} {word:<7} {}", detail.unwrap_or_default());
        }
        s
    }

    /// Aligned-column tables of every report.
    pub fn to_text(&self) -> String {
        let mut s = self.summary();
        if let Some(o) = &self.residual {
            let _ = write!(s, "\n[residual]\n{}", o.report.to_table());
        }
        if let Some(o) = &self.initial_limit {
            let _ = write!(s, "\n[initial_limit]\n{}", o.report.to_table());
        }
        if let Some(o) = &self.truncation {
            let _ = write!(s, "\n[truncation]\n{}", o.report.to_table());
        }
        if let Some(o) = &self.kernel_suite {
            let _ = write!(s, "\n[kernel_suite]\n{}", o.report.to_table());
        }
        s
    }
}

/// Run the enabled checks; reports go to `dir` when given.
pub fn cmd_verify(cfg: &LoadedConfig, dir: Option<&Path>) -> Result<VerifyOutcome, CliError> {
    let v = &cfg.config.verify;
    let p = &cfg.problem;
    let quad = &cfg.config.quadrature;
    let horizon = p.horizon_t;

    let residual = if v.residual.enabled {
        let r = &v.residual;
        let t_min = r.window_start * horizon;
        let (report, observed_order) = match &r.snapshot_dir {
            Some(d) => (residual_check(&load_snapshots(d, p.rho)?, &p.forcing, p.rho)?, None),
            None => {
                let fine = residual_check(&solve(p, &uniform_times(horizon, r.steps), quad)?, &p.forcing, p.rho)?;
                let order = if r.check_order {
                    let coarse =
                        residual_check(&solve(p, &uniform_times(horizon, r.steps / 2), quad)?, &p.forcing, p.rho)?;
                    Some((coarse.max_relative(t_min) / fine.max_relative(t_min)).log2())
                } else {
                    None
                };
                (fine, order)
            }
        };
        let max_relative = report.max_relative(t_min);
        let order_ok = observed_order.is_none_or(|q| {
            let e = report.expected_order;
            q >= r.order_range[0] * e && q <= r.order_range[1] * e
        });
        let pass = max_relative <= r.tolerance && order_ok;
        Some(ResidualOutcome { report, window_start: t_min, max_relative, observed_order, pass })
    } else {
        None
    };

    let initial_limit = if v.initial_limit.enabled {
        let il = &v.initial_limit;
        let probes: Vec<f64> = (il.j_min..=il.j_max).map(|j| 2f64.powi(-(j as i32))).collect();
        let report = initial_limit_check(p, &probes, quad)?;
        let gap = matches!(p.forcing, Forcing::None).then(|| {
            report
                .deviation
                .iter()
                .zip(&report.homogeneous_closed_form)
                .map(|(d, c)| if *c == 0.0 { d.abs() } else { (d - c).abs() / c })
                .fold(0.0, f64::max)
        });
        let pass = report.monotone_from.is_some() && gap.is_none_or(|g| g <= il.tolerance);
        Some(InitialLimitOutcome { report, max_closed_form_gap: gap, pass })
    } else {
        None
    };

    let truncation = if v.truncation.enabled {
        let k = p.band_k();
        let ks = v.truncation.band_k_values.clone().unwrap_or_else(|| vec![k / 8.0, k / 4.0, k / 2.0, k]);
        let report = truncation_study(p, &ks, v.truncation.t.unwrap_or(horizon), quad)?;
        let pass = report.all_dominated();
        Some(TruncationOutcome { report, pass })
    } else {
        None
    };

    let kernel_suite = if v.kernel_suite.enabled {
        let ks = &v.kernel_suite;
        let report = kernel_estimate_suite(&ks.rho_values, &ks.epsilon_values)?;
        let flat = ks.max_decade_variation.is_none_or(|m| report.rows.iter().all(|r| r.decade_variation <= m));
        let pass = report.pass && flat;
        Some(KernelSuiteOutcome { report, max_decade_variation: ks.max_decade_variation, pass })
    } else {
        None
    };

    let outcome = VerifyOutcome { residual, initial_limit, truncation, kernel_suite };
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let json = serde_json::to_string_pretty(&outcome).expect("report serialises");
        write_file(&dir.join("verify_report.json"), &json)?;
        write_file(&dir.join("verify_report.txt"), &outcome.to_text())?;
    }
    Ok(outcome)
}

/// `z,E` rows for `count` evenly spaced `z` in `[z_min, z_max]`.
pub fn cmd_ml_table(rho: f64, mu: f64, z_min: f64, z_max: f64, count: usize) -> Result<String, CliError> {
    let params = MlParams::new(rho, mu).map_err(|e| CliError::Validation(e.to_string()))?;
    if count < 2 {
        return Err(CliError::Validation(format!("count = {count} must be at least 2")));
    }
    if !(z_min < z_max) || !z_min.is_finite() || !z_max.is_finite() {
        return Err(CliError::Validation(format!("need finite z_min < z_max, got {z_min}, {z_max}")));
    }
    let mut s = String::from("z,E\n");
    let step = (z_max - z_min) / (count - 1) as f64;
    for i in 0..count {
        let z = if i == count - 1 { z_max } else { z_min + i as f64 * step };
        let e = ml_eval(params, z)?;
        let _ = writeln!(s, "{z},{e}");
    }
    Ok(s)
}

/// Apply `op` to the signal in `input` and return `t,value` CSV.
pub fn cmd_fracop(op: FracOp, order: f64, input: &Path, leading_power: f64) -> Result<String, CliError> {
    let param = match op {
        FracOp::RlIntegral => FracOrderParam::integral(order),
        _ => FracOrderParam::derivative(order),
    }
    .map_err(|e| CliError::Validation(e.to_string()))?;
    let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let signal = parse_signal(input, &text, leading_power)?;
    let result = match op {
        FracOp::RlIntegral => rl_integral(&signal, param),
        FracOp::RlDerivative => rl_derivative(&signal, param),
        FracOp::CaputoDerivative => caputo_derivative(&signal, param),
        FracOp::GlDerivative => gl_derivative(&signal, param),
    }?;
    let mut s = String::from("t,value\n");
    for (k, v) in result.to_plain().iter().enumerate() {
        let _ = writeln!(s, "{},{v}", result.time(k));
    }
    Ok(s)
}

fn parse_signal(path: &Path, text: &str, leading_power: f64) -> Result<TimeSignal<f64>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let bad = |what: &str| CliError::Validation(format!("{}:{row}: {what}", path.display()));
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad("expected two columns t,value"));
        }
        t.push(rec[0].trim().parse::<f64>().map_err(|_| bad("bad time"))?);
        v.push(rec[1].trim().parse::<f64>().map_err(|_| bad("bad value"))?);
    }
    if t.len() < 2 {
        return Err(CliError::Validation(format!("{}: need at least two samples", path.display())));
    }
    if t[0] != 0.0 {
        return Err(CliError::Validation(format!("{}:2: signal must start at t = 0", path.display())));
    }
    let dt = t[1];
    for (k, &tk) in t.iter().enumerate() {
        if (tk - k as f64 * dt).abs() > 1e-9 * dt.max(tk) {
            return Err(CliError::Validation(format!("{}:{}: times are not uniform", path.display(), k + 2)));
        }
    }
    TimeSignal::with_leading_power(0.0, dt, v, leading_power).map_err(|e| CliError::Validation(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_reference_points_at_the_key() {
        let text = "{\n  \"problem\": {\n    \"rho\": 1.5\n  }\n}";
        assert_eq!(line_of_key(text, "rho"), Some(3));
        assert_eq!(line_of_key(text, "missing"), None);
    }

    #[test]
    fn decay_law_is_seeded_and_real_when_asked() {
        let p = ProblemConfig {
            dim_n: 2,
            rho: 0.5,
            horizon_t: 1.0,
            band_k: 10.0,
            initial: InitialData::Decay { exponent: 2.0, amplitude: 1.0, real: true },
            forcing: Forcing::None,
        };
        let a = initial_field(&p, 7).unwrap();
        assert_eq!(a, initial_field(&p, 7).unwrap());
        assert_ne!(a, initial_field(&p, 8).unwrap());
        assert!(a.is_real(0.0));
        assert_eq!(a.get(&Mode::zero(2)), Complex64::default());
        let m = Mode::new([1, 2]);
        assert!((a.get(&m).norm() - 5f64.powf(-1.0)).abs() < 1e-15);
    }

    #[test]
    fn ml_table_domain() {
        assert!(matches!(cmd_ml_table(0.5, 0.5, 0.0, 0.0, 1), Err(CliError::Validation(_))));
        assert!(matches!(cmd_ml_table(0.5, 0.5, 1.0, 0.0, 3), Err(CliError::Validation(_))));
        assert!(matches!(cmd_ml_table(0.0, 0.5, -1.0, 0.0, 3), Err(CliError::Validation(_))));
        let s = cmd_ml_table(1.0, 1.0, -1.0, 0.0, 2).unwrap();
        let rows: Vec<&str> = s.lines().collect();
        assert_eq!(rows[0], "z,E");
        let e: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
        assert!((e - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(rows[2], "0,1");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numeric(Error::Range(String::new())).exit_code(), 3);
        assert_eq!(CliError::CheckFailed(String::new()).exit_code(), 4);
        assert_eq!(CliError::from(Error::Validation(String::new())).exit_code(), 2);
    }
}
