//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid flags/config/inputs, 2 filesystem
//! errors, 3 when `estimate --batch-check` finds a deviation above
//! [`BATCH_CHECK_LIMIT`].

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimator;
use crate::harness::{self, Example};
use crate::model::{self, SystemModel};
use crate::observability::{self, GrowthClass, Verdict};
use crate::stability;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_BATCH_CHECK: i32 = 3;

/// Largest recursive-versus-batch deviation accepted by `--batch-check`.
pub const BATCH_CHECK_LIMIT: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "isokal",
    version,
    about = "Recursive estimation of the initial state of linear systems"
)]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Suppress progress messages on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate noisy observations y(0..T) of a configured system.
    Simulate(SimulateArgs),
    /// Run the recursive estimator over an observation file.
    Estimate(EstimateArgs),
    /// Report observability and error-dynamics stability.
    Analyze(AnalyzeArgs),
    /// Reproduce one of the reference examples.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// True initial state, comma separated.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub x0: Vec64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Omit the observation noise.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    /// Prior guess x̂₀, comma separated (default: zero).
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub x0_guess: Option<Vec64>,
    /// Prior covariance: a scalar p (meaning p·I) or a JSON matrix file.
    #[arg(long)]
    pub p0: String,
    #[arg(long)]
    pub out: PathBuf,
    /// True initial state; adds an err_norm column.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub truth: Option<Vec64>,
    /// Compare every estimate with the batch least-squares solution.
    #[arg(long)]
    pub batch_check: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Largest observability window L to try.
    #[arg(long)]
    pub horizon: usize,
    /// Number of steps for the Gramian trace and the covariance run.
    #[arg(long)]
    pub k_max: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Observability threshold ρ (default: 1e-10 · λ_max(𝒪(min(d, T), 0))).
    #[arg(long)]
    pub rho_tol: Option<f64>,
    /// Prior covariance for the covariance run: scalar or JSON matrix file.
    #[arg(long, default_value = "0.01")]
    pub p0: String,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// example1 or example2.
    #[arg(value_parser = parse_example)]
    pub which: Example,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub outdir: PathBuf,
    /// Read the printed σ as a variance instead of a standard deviation.
    #[arg(long)]
    pub sigma_is_variance: bool,
}

/// Newtype so clap treats a parsed vector as a single value.
#[derive(Clone, Debug, PartialEq)]
pub struct Vec64(pub Vec<f64>);

impl Vec64 {
    fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

/// Parses `v1,v2,…` into a vector of finite numbers.
pub fn parse_vector(s: &str) -> std::result::Result<Vec64, String> {
    if s.trim().is_empty() {
        return Err("expected comma-separated numbers".into());
    }
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("invalid number {t:?}")),
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Vec64)
}

fn parse_example(s: &str) -> std::result::Result<Example, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `p` for `p·I`, otherwise a JSON file holding an array of rows.
pub fn parse_p0(arg: &str, d: usize) -> Result<DMatrix<f64>> {
    if let Ok(p) = arg.trim().parse::<f64>() {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::config("--p0", "scalar must be positive and finite"));
        }
        return Ok(DMatrix::identity(d, d) * p);
    }
    let text = fs::read_to_string(arg)?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("--p0 {arg}"), e.to_string()))?;
    let m = model::matrix_from_rows(&rows, "--p0")?;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::dimension(
            "--p0",
            format!("{d}x{d}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m)
}

fn check_len(flag: &str, v: &DVector<f64>, d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::dimension(flag, d, v.len()));
    }
    Ok(())
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub duration_seconds: f64,
}

fn resolve(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::File::create(path)?.write_all(bytes)?;
    Ok(())
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

struct Context {
    seed: u64,
    quiet: bool,
    args: Vec<String>,
    started: Instant,
}

impl Context {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn manifest(
        &self,
        command: &str,
        config: Option<&Path>,
        outputs: Vec<PathBuf>,
        at: &Path,
    ) -> Result<()> {
        let manifest = RunManifest {
            command: command.into(),
            args: self.args.clone(),
            config: config.map(resolve),
            seed: self.seed,
            outputs: outputs.iter().map(|p| resolve(p)).collect(),
            version: env!("CARGO_PKG_VERSION").into(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_file(at, text.as_bytes())
    }
}

fn cmd_simulate(ctx: &Context, a: &SimulateArgs) -> Result<i32> {
    let model = model::load_model_file(&a.config)?;
    let x0 = a.x0.to_dvector();
    check_len("--x0", &x0, model.state_dim())?;
    let obs = harness::simulate(&model, &x0, a.steps, ctx.seed, a.noiseless)?;
    write_file(&a.out, &harness::observations_csv(&obs)?)?;
    ctx.manifest(
        "simulate",
        Some(&a.config),
        vec![a.out.clone()],
        &sibling_manifest(&a.out),
    )?;
    ctx.note(format!(
        "wrote {} observations to {}",
        obs.len(),
        a.out.display()
    ));
    Ok(EXIT_OK)
}

fn cmd_estimate(ctx: &Context, a: &EstimateArgs) -> Result<i32> {
    let model = model::load_model_file(&a.config)?;
    let d = model.state_dim();
    let obs = harness::read_observations(&a.obs, model.obs_dim())?;
    let x_hat0 = a
        .x0_guess
        .as_ref()
        .map(Vec64::to_dvector)
        .unwrap_or_else(|| estimator::default_prior_mean(&model));
    check_len("--x0-guess", &x_hat0, d)?;
    let truth = a.truth.as_ref().map(Vec64::to_dvector);
    if let Some(t) = &truth {
        check_len("--truth", t, d)?;
    }
    let p0 = parse_p0(&a.p0, d)?;
    let states = estimator::run(&model, &x_hat0, &p0, &obs)?;
    write_file(&a.out, &harness::estimates_csv(&states, truth.as_ref())?)?;
    ctx.manifest(
        "estimate",
        Some(&a.config),
        vec![a.out.clone()],
        &sibling_manifest(&a.out),
    )?;
    ctx.note(format!(
        "wrote {} estimates to {}",
        states.len(),
        a.out.display()
    ));

    if a.batch_check {
        let mut worst = 0.0f64;
        for (k, s) in states.iter().enumerate() {
            let batch = estimator::batch_wls(&model, &x_hat0, &p0, &obs[..k])?;
            let dev = (s.estimate() - &batch).norm() / (1.0 + batch.norm());
            worst = worst.max(dev);
        }
        println!("batch-check max relative deviation: {worst:e}");
        if !(worst <= BATCH_CHECK_LIMIT) {
            eprintln!("error: batch-check deviation {worst:e} exceeds {BATCH_CHECK_LIMIT:e}");
            return Ok(EXIT_BATCH_CHECK);
        }
    }
    Ok(EXIT_OK)
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Merged observability and stability report as JSON.
pub fn analysis_report(
    model: &SystemModel,
    l_max: usize,
    k_max: usize,
    rho_tol: Option<f64>,
    p0: &DMatrix<f64>,
) -> Result<Value> {
    let rho_tol = match rho_tol {
        Some(r) => r,
        None => observability::default_rho_tol(model)?,
    };
    let report = observability::check_observability(model, l_max, rho_tol)?;
    let observable = report.verdict.is_observable();
    let k_cap = model.horizon().map_or(k_max, |n| k_max.min(n));

    let mut lambda_min_trace = report.lambda_min_trace.clone();
    let mut growth = GrowthClass::Undetermined;
    let mut beta_fit = None;
    if model.is_lti() && observable && k_cap >= 1 {
        let a = observability::lambda_min_asymptotics(model, k_cap)?;
        lambda_min_trace = a.lambda_min_trace;
        growth = a.growth_class;
        beta_fit = a.beta_fit;
    } else if k_cap >= 1 {
        lambda_min_trace = observability::gramian_sequence_dd(model, k_cap)?
            .iter()
            .map(observability::lambda_min)
            .collect();
    }

    let mut out = json!({
        "verdict": report.verdict.name(),
        "L": report.horizon_l,
        "rho": report.rho,
        "rho_tol": rho_tol,
        "not_observable_up_to": match report.verdict {
            Verdict::NotObservableUpTo(k) => Some(k),
            _ => None,
        },
        "lambda_min_trace": lambda_min_trace,
        "growth_class": growth.name(),
        "growth_limit": match growth {
            GrowthClass::BoundedLimit { limit, .. } => Some(limit),
            _ => None,
        },
        "growth_limit_converged": match growth {
            GrowthClass::BoundedLimit { converged, .. } => Some(converged),
            _ => None,
        },
        "beta_fit": beta_fit.map(|f| f.beta),
        "beta_fit_window": beta_fit.map(|f| [f.first_k, f.last_k]),
    });

    let fields = out.as_object_mut().expect("object");
    if model.is_lti() && observable {
        let d = model.state_dim();
        let z0 = DVector::from_element(d, 1.0 / (d as f64).sqrt());
        let s = stability::analyze(model, p0, &z0, k_cap)?;
        fields.insert("eigs_abs".into(), json!(s.eigs_abs));
        fields.insert("lambda_min_A".into(), json!(s.lambda_min_a));
        fields.insert("lambda_max_A".into(), json!(s.lambda_max_a));
        fields.insert("classification".into(), json!(s.classification.name()));
        fields.insert(
            "uniformly_stable_hint".into(),
            json!(s.uniformly_stable_hint),
        );
        fields.insert(
            "alpha".into(),
            s.exp_fit.map_or(Value::Null, |f| finite_or_null(f.alpha)),
        );
        fields.insert(
            "beta".into(),
            s.exp_fit.map_or(Value::Null, |f| finite_or_null(f.beta)),
        );
        fields.insert(
            "exp_fit_window".into(),
            json!(s.exp_fit.map(|f| [f.first_k, f.last_k])),
        );
        fields.insert("lyapunov_monotone".into(), json!(s.lyapunov_monotone));
        fields.insert("lyapunov_trace".into(), json!(s.lyapunov_trace));
        fields.insert("p_norm_trace".into(), json!(s.p_norm_trace));
    } else {
        let eigs = model
            .lti_dynamics()
            .map(crate::linalg::eigenvalue_magnitudes);
        fields.insert("eigs_abs".into(), json!(eigs));
        for key in [
            "classification",
            "alpha",
            "beta",
            "exp_fit_window",
            "lyapunov_monotone",
            "p_norm_trace",
        ] {
            fields.insert(key.into(), Value::Null);
        }
        let why = if observable {
            "stability classification needs a time-invariant model"
        } else {
            "model is not observable within the searched horizon"
        };
        fields.insert("stability_note".into(), json!(why));
    }
    Ok(out)
}

fn cmd_analyze(ctx: &Context, a: &AnalyzeArgs) -> Result<i32> {
    let model = model::load_model_file(&a.config)?;
    if let Some(r) = a.rho_tol {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::config("--rho-tol", "must be positive and finite"));
        }
    }
    if a.horizon == 0 {
        return Err(Error::config("--horizon", "must be at least 1"));
    }
    let p0 = parse_p0(&a.p0, model.state_dim())?;
    let report = analysis_report(&model, a.horizon, a.k_max, a.rho_tol, &p0)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_file(&a.out, text.as_bytes())?;
    ctx.manifest(
        "analyze",
        Some(&a.config),
        vec![a.out.clone()],
        &sibling_manifest(&a.out),
    )?;
    ctx.note(format!(
        "{} / {}",
        report["verdict"].as_str().unwrap_or("?"),
        report["classification"].as_str().unwrap_or("unclassified")
    ));
    Ok(EXIT_OK)
}

fn cmd_reproduce(ctx: &Context, a: &ReproduceArgs) -> Result<i32> {
    if a.trials == 0 {
        return Err(Error::config("--trials", "must be at least 1"));
    }
    let out =
        harness::reproduce_example(a.which, a.trials, ctx.seed, &a.outdir, a.sigma_is_variance)?;
    ctx.manifest(
        "reproduce",
        None,
        out.files.clone(),
        &a.outdir.join("manifest.json"),
    )?;
    let last = out.stats.mse.len() - 1;
    ctx.note(format!(
        "{}: {} trials, mse[1] = {:e}, mse[{last}] = {:e}; wrote {}",
        a.which.name(),
        a.trials,
        out.stats.mse[1],
        out.stats.mse[last],
        a.outdir.display()
    ));
    Ok(EXIT_OK)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_IO
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let ctx = Context {
        seed: cli.seed,
        quiet: cli.quiet,
        args: args
            .iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        started: Instant::now(),
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Estimate(a) => cmd_estimate(&ctx, a),
        Command::Analyze(a) => cmd_analyze(&ctx, a),
        Command::Reproduce(a) => cmd_reproduce(&ctx, a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
