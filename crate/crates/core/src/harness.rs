//! Noisy trajectories, seeded Monte Carlo ensembles and the two reference
//! examples.
//!
//! # Randomness
//!
//! Every random draw comes from `ChaCha8Rng` (rand_chacha). A run with master
//! seed `s` gives trial `t` the generator `ChaCha8Rng::seed_from_u64(s)` with
//! its stream set to `t`, so trials are independent of scheduling and
//! thread count. Normal variates use rand_distr's `StandardNormal` (ziggurat).
//!
//! Within a trial the draws are, in order: the observation noise for
//! `k = 0..T` (`m` variates per step, scaled by the lower Cholesky factor of
//! `R_k`), then `d` variates for the prior guess when it is sampled. Trial 0's
//! observations are therefore exactly those of [`simulate`] with the same seed.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dd;
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorState};
use crate::model::{ObserverCursor, SystemModel};

/// Environment variable capping the Monte Carlo worker count (0 = automatic).
pub const THREADS_ENV: &str = "ISOKAL_THREADS";

/// Generator for trial `trial_id` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_id);
    rng
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

fn lower_factor(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite { what: what.into() })
}

/// Observations `y(0..T)` drawn from `rng`.
pub fn simulate_with_rng(
    model: &SystemModel,
    x0: &DVector<f64>,
    steps: usize,
    rng: &mut ChaCha8Rng,
    noiseless: bool,
) -> Result<Vec<DVector<f64>>> {
    let d = model.state_dim();
    if x0.len() != d {
        return Err(Error::dimension("x0", d, x0.len()));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "at least one step is required".into(),
        ));
    }
    if let Some(h) = model.horizon() {
        if steps > h {
            return Err(Error::HorizonExceeded {
                requested: steps - 1,
                available: h - 1,
            });
        }
    }
    let x0_dd = dd::widen_vec(x0);
    let mut cursor = ObserverCursor::start(model)?;
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        if k > 0 {
            cursor = cursor.advance(model)?;
        }
        let mut y = dd::narrow_vec(&(cursor.h_tilde() * &x0_dd));
        if !noiseless {
            let l = lower_factor(model.noise_at(k)?.as_ref(), &format!("R_{k}"))?;
            y += l * standard_normal_vec(rng, model.obs_dim());
        }
        out.push(y);
    }
    Ok(out)
}

/// `y(k) = H̃_k x₀ + v_k` for `k = 0..T`, with `v_k ~ N(0, R_k)`. With
/// `noiseless` the noise is omitted. Uses trial stream 0 of `seed`.
pub fn simulate(
    model: &SystemModel,
    x0: &DVector<f64>,
    steps: usize,
    seed: u64,
    noiseless: bool,
) -> Result<Vec<DVector<f64>>> {
    simulate_with_rng(model, x0, steps, &mut trial_rng(seed, 0), noiseless)
}

/// Per-step record of one trial.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: usize,
    /// `e_k = x̂_k − x₀`.
    pub error: DVector<f64>,
    pub err_sq: f64,
    pub err_inf: f64,
    pub trace_p: f64,
    /// Eigenvalues of `P_k`, descending.
    pub p_eigs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial_id: usize,
    /// Master seed; the trial's generator is stream `trial_id` of it.
    pub seed: u64,
    /// Prior guess actually used by the trial.
    pub x_hat0: DVector<f64>,
    /// Records for `k = 0..=T`.
    pub records: Vec<StepRecord>,
}

/// Per-step ensemble statistics, indexed by `k = 0..=T`.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub trials: usize,
    /// Sample mean of `‖e_k‖²`.
    pub mse: Vec<f64>,
    /// Sample mean of `e_k`.
    pub bias: Vec<DVector<f64>>,
    pub bias_norm: Vec<f64>,
    pub mean_trace_p: Vec<f64>,
    /// `mean ‖e_k − ē_k‖²`, which equals `mse − ‖bias‖²`.
    pub spread: Vec<f64>,
    /// Standard error of `spread`: sample deviation of `‖e_k − ē_k‖²` over `√N`.
    pub spread_se: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct MonteCarloConfig {
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub noiseless: bool,
    /// Draw each trial's prior guess from `N(x̂₀, P₀)`, so that `P₀` is the
    /// covariance of the initial error. Otherwise every trial starts at `x̂₀`.
    pub sample_prior: bool,
}

fn record(state: &EstimatorState, x0: &DVector<f64>) -> StepRecord {
    let error = state.estimate() - x0;
    let p_eigs: Vec<f64> = dd::symmetric_eigenvalues(state.covariance_dd())
        .into_iter()
        .map(dd::to_f64)
        .collect();
    StepRecord {
        k: state.k(),
        err_sq: error.norm_squared(),
        err_inf: error.amax(),
        error,
        trace_p: state.trace(),
        p_eigs,
    }
}

/// One simulate-and-estimate trial.
pub fn run_trial(
    model: &SystemModel,
    x0: &DVector<f64>,
    x_hat0: &DVector<f64>,
    p0: &DMatrix<f64>,
    cfg: &MonteCarloConfig,
    trial_id: usize,
) -> Result<TrialResult> {
    let mut rng = trial_rng(cfg.seed, trial_id as u64);
    let obs = simulate_with_rng(model, x0, cfg.steps, &mut rng, cfg.noiseless)?;
    let x_hat0 = if cfg.sample_prior {
        x_hat0 + lower_factor(p0, "P0")? * standard_normal_vec(&mut rng, model.state_dim())
    } else {
        x_hat0.clone()
    };
    let states = estimator::run(model, &x_hat0, p0, &obs)?;
    Ok(TrialResult {
        trial_id,
        seed: cfg.seed,
        x_hat0,
        records: states.iter().map(|s| record(s, x0)).collect(),
    })
}

/// Worker count from [`THREADS_ENV`]; 0, unset or unparsable means automatic.
pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Runs `cfg.trials` independent trials in parallel and aggregates them in
/// trial order.
pub fn monte_carlo(
    model: &SystemModel,
    x0: &DVector<f64>,
    x_hat0: &DVector<f64>,
    p0: &DMatrix<f64>,
    cfg: &MonteCarloConfig,
) -> Result<(EnsembleStats, Vec<TrialResult>)> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(configured_threads())
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let trials = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(model, x0, x_hat0, p0, cfg, t))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((ensemble_stats(&trials), trials))
}

/// Aggregates trials; summation runs in the order of `trials`.
pub fn ensemble_stats(trials: &[TrialResult]) -> EnsembleStats {
    let n = trials.len();
    let steps = trials.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let nf = n as f64;
    let mut stats = EnsembleStats {
        trials: n,
        mse: Vec::with_capacity(steps),
        bias: Vec::with_capacity(steps),
        bias_norm: Vec::with_capacity(steps),
        mean_trace_p: Vec::with_capacity(steps),
        spread: Vec::with_capacity(steps),
        spread_se: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        let d = trials[0].records[k].error.len();
        let mut mean = DVector::zeros(d);
        let mut mse = 0.0;
        let mut trace = 0.0;
        for t in trials {
            let r = &t.records[k];
            mean += &r.error;
            mse += r.err_sq;
            trace += r.trace_p;
        }
        mean /= nf;
        let dev: Vec<f64> = trials
            .iter()
            .map(|t| (&t.records[k].error - &mean).norm_squared())
            .collect();
        let spread = dev.iter().sum::<f64>() / nf;
        let se = if n > 1 {
            let var = dev.iter().map(|x| (x - spread).powi(2)).sum::<f64>() / (nf - 1.0);
            (var / nf).sqrt()
        } else {
            f64::NAN
        };
        stats.mse.push(mse / nf);
        stats.bias_norm.push(mean.norm());
        stats.bias.push(mean);
        stats.mean_trace_p.push(trace / nf);
        stats.spread.push(spread);
        stats.spread_se.push(se);
    }
    stats
}

// ---------------------------------------------------------------------------
// Reference examples

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example {
    Example1,
    Example2,
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::Example1 => "example1",
            Example::Example2 => "example2",
        }
    }
}

impl std::str::FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Example::Example1),
            "example2" => Ok(Example::Example2),
            other => Err(Error::InvalidArgument(format!(
                "unknown example {other:?} (expected example1 or example2)"
            ))),
        }
    }
}

/// Number of steps run by [`reproduce_example`].
pub const EXAMPLE_STEPS: usize = 40;

#[derive(Clone, Debug)]
pub struct ExampleSetup {
    pub model: SystemModel,
    pub x0: DVector<f64>,
    pub x_hat0: DVector<f64>,
    pub p0: DMatrix<f64>,
    /// The noise level `σ` as printed.
    pub sigma: f64,
    /// `σ²` by default, `σ` with `sigma_is_variance`.
    pub sigma2: f64,
    pub snapshots: [usize; 3],
}

/// The examples' matrices, states and priors. `σ` is read as a standard
/// deviation unless `sigma_is_variance` is set.
pub fn example_setup(which: Example, sigma_is_variance: bool) -> ExampleSetup {
    let (a, h, sigma, x0, x_hat0, snapshots) = match which {
        Example::Example1 => (
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    1.99, -0.32, 0.0, 0.07, 0.43, 1.17, 0.02, 0.0, 0.13, -0.09, 1.52, -0.13, 0.28,
                    -0.14, 0.03, 1.22,
                ],
            ),
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            0.01,
            vec![0.2, 0.4, 0.5, 0.3],
            vec![0.376, 0.502, 0.421, 0.366],
            [5, 10, 40],
        ),
        Example::Example2 => (
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            0.001,
            vec![0.83053274, 0.35472554],
            vec![0.99065169, 0.19889222],
            [2, 5, 20],
        ),
    };
    let d = a.nrows();
    let sigma2 = if sigma_is_variance {
        sigma
    } else {
        sigma * sigma
    };
    ExampleSetup {
        model: SystemModel::lti(a, h, sigma2).expect("example models are valid"),
        x0: DVector::from_vec(x0),
        x_hat0: DVector::from_vec(x_hat0),
        p0: DMatrix::identity(d, d) * 1e-2,
        sigma,
        sigma2,
        snapshots,
    }
}

#[derive(Clone, Debug)]
pub struct ReproduceOutput {
    pub files: Vec<PathBuf>,
    pub stats: EnsembleStats,
    /// The single run written to `estimates.csv`.
    pub representative: Vec<EstimatorState>,
}

/// Runs an example and writes its file set into `out_dir`:
///
/// - `observations.csv`, `estimates.csv`: one run from the printed `x̂₀`
///   on the observations of [`simulate`] with `seed`;
/// - `snapshots.csv`: true and estimated coordinates at the snapshot steps;
/// - `mse.csv`: ensemble statistics for `k = 1..=T` over `trials` runs;
/// - `p_eigs.csv`: eigenvalues of `P_k` for `k = 0..=T`.
pub fn reproduce_example(
    which: Example,
    trials: usize,
    seed: u64,
    out_dir: &Path,
    sigma_is_variance: bool,
) -> Result<ReproduceOutput> {
    let setup = example_setup(which, sigma_is_variance);
    let steps = EXAMPLE_STEPS;
    let obs = simulate(&setup.model, &setup.x0, steps, seed, false)?;
    let states = estimator::run(&setup.model, &setup.x_hat0, &setup.p0, &obs)?;
    let cfg = MonteCarloConfig {
        steps,
        trials,
        seed,
        noiseless: false,
        sample_prior: true,
    };
    let (stats, _) = monte_carlo(&setup.model, &setup.x0, &setup.x_hat0, &setup.p0, &cfg)?;

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, body: Vec<u8>| -> Result<()> {
        let path = out_dir.join(name);
        File::create(&path)?.write_all(&body)?;
        files.push(path);
        Ok(())
    };
    emit("observations.csv", observations_csv(&obs)?)?;
    emit("estimates.csv", estimates_csv(&states, Some(&setup.x0))?)?;
    emit(
        "snapshots.csv",
        snapshots_csv(&states, &setup.x0, &setup.snapshots)?,
    )?;
    emit("mse.csv", mse_csv(&stats)?)?;
    emit("p_eigs.csv", p_eigs_csv(&states)?)?;
    Ok(ReproduceOutput {
        files,
        stats,
        representative: states,
    })
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest round-trip text for a float, in scientific notation outside
/// `[1e-4, 1e15)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn to_csv(header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

/// `k, y_0, …, y_{m−1}`.
pub fn observations_csv(obs: &[DVector<f64>]) -> Result<Vec<u8>> {
    let m = obs.first().map_or(0, |y| y.len());
    let header = std::iter::once("k".to_string())
        .chain(numbered("y_", m))
        .collect();
    to_csv(
        header,
        obs.iter().enumerate().map(|(k, y)| {
            std::iter::once(k.to_string())
                .chain(y.iter().map(|v| format_float(*v)))
                .collect()
        }),
    )
}

/// `k, xhat_0, …, trace_P[, err_norm]` for every state.
pub fn estimates_csv(states: &[EstimatorState], truth: Option<&DVector<f64>>) -> Result<Vec<u8>> {
    let d = states.first().map_or(0, |s| s.estimate().len());
    let mut header: Vec<String> = std::iter::once("k".to_string())
        .chain(numbered("xhat_", d))
        .collect();
    header.push("trace_P".into());
    if truth.is_some() {
        header.push("err_norm".into());
    }
    to_csv(
        header,
        states.iter().map(|s| {
            let x = s.estimate();
            let mut row: Vec<String> = std::iter::once(s.k().to_string())
                .chain(x.iter().map(|v| format_float(*v)))
                .collect();
            row.push(format_float(s.trace()));
            if let Some(x0) = truth {
                row.push(format_float((&x - x0).norm()));
            }
            row
        }),
    )
}

/// `k, coordinate, true_value, estimate` at the requested steps.
pub fn snapshots_csv(
    states: &[EstimatorState],
    x0: &DVector<f64>,
    steps: &[usize],
) -> Result<Vec<u8>> {
    let header = ["k", "coordinate", "true_value", "estimate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for &k in steps {
        let Some(s) = states.get(k) else { continue };
        let x = s.estimate();
        for i in 0..x0.len() {
            rows.push(vec![
                k.to_string(),
                i.to_string(),
                format_float(x0[i]),
                format_float(x[i]),
            ]);
        }
    }
    to_csv(header, rows)
}

/// `k, mse, bias_norm, mean_trace_P` for `k ≥ 1`.
pub fn mse_csv(stats: &EnsembleStats) -> Result<Vec<u8>> {
    let header = ["k", "mse", "bias_norm", "mean_trace_P"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    to_csv(
        header,
        (1..stats.mse.len()).map(|k| {
            vec![
                k.to_string(),
                format_float(stats.mse[k]),
                format_float(stats.bias_norm[k]),
                format_float(stats.mean_trace_p[k]),
            ]
        }),
    )
}

/// `k, eig_1, …, eig_d`, descending.
pub fn p_eigs_csv(states: &[EstimatorState]) -> Result<Vec<u8>> {
    let d = states.first().map_or(0, |s| s.estimate().len());
    let header = std::iter::once("k".to_string())
        .chain((1..=d).map(|i| format!("eig_{i}")))
        .collect();
    to_csv(
        header,
        states.iter().map(|s| {
            std::iter::once(s.k().to_string())
                .chain(
                    dd::symmetric_eigenvalues(s.covariance_dd())
                        .into_iter()
                        .map(|e| format_float(dd::to_f64(e))),
                )
                .collect()
        }),
    )
}

/// Reads an observations file (`k, y_0, …`). Rows must be numbered `0, 1, …`.
pub fn read_observations(path: &Path, m: usize) -> Result<Vec<DVector<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    })?;
    let where_ = path.display().to_string();
    let header = rdr.headers()?.clone();
    if header.len() != m + 1 {
        return Err(Error::config(
            format!("{where_}: header"),
            format!(
                "expected k and {m} observation columns, found {} columns",
                header.len()
            ),
        ));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let k: usize = rec[0].trim().parse().map_err(|_| {
            Error::config(
                format!("{where_}:{line}: k"),
                format!("invalid step {:?}", &rec[0]),
            )
        })?;
        if k != row {
            return Err(Error::config(
                format!("{where_}:{line}: k"),
                format!("expected step {row}, found {k}"),
            ));
        }
        let mut y = DVector::zeros(m);
        for i in 0..m {
            let v: f64 = rec[i + 1].trim().parse().map_err(|_| {
                Error::config(
                    format!("{where_}:{line}: y_{i}"),
                    format!("invalid number {:?}", &rec[i + 1]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::config(
                    format!("{where_}:{line}: y_{i}"),
                    "must be finite",
                ));
            }
            y[i] = v;
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_observations() {
        let s = example_setup(Example::Example2, false);
        let a = simulate(&s.model, &s.x0, 25, 7, false).unwrap();
        let b = simulate(&s.model, &s.x0, 25, 7, false).unwrap();
        let c = simulate(&s.model, &s.x0, 25, 8, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_observations_are_exact() {
        let s = example_setup(Example::Example2, false);
        let y = simulate(&s.model, &s.x0, 4, 0, true).unwrap();
        for (k, yk) in y.iter().enumerate() {
            let expect = crate::model::observed_evolution(&s.model, k).unwrap() * &s.x0;
            assert!((yk - expect).amax() <= 1e-15);
        }
        assert!(simulate(&s.model, &s.x0, 0, 0, true).is_err());
    }

    #[test]
    fn noise_covariance_matches_r() {
        // x₀ = 0, so every observation is pure noise.
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let model = SystemModel::new(
            2,
            2,
            crate::model::Dynamics::Lti(DMatrix::identity(2, 2)),
            crate::model::Observation::Lti(DMatrix::identity(2, 2)),
            crate::model::Noise::PerStep(vec![r.clone(); 1]),
        )
        .unwrap();
        let mut rng = trial_rng(3, 0);
        let mut cov = DMatrix::zeros(2, 2);
        let n = 100_000;
        let x0 = DVector::zeros(2);
        for _ in 0..n {
            let y = &simulate_with_rng(&model, &x0, 1, &mut rng, false).unwrap()[0];
            cov += y * y.transpose();
        }
        cov /= n as f64;
        let gap = crate::linalg::spectral_norm(&(cov - &r)) / crate::linalg::spectral_norm(&r);
        assert!(gap < 0.02, "relative gap {gap}");
    }

    #[test]
    fn trials_do_not_depend_on_thread_count() {
        let s = example_setup(Example::Example1, false);
        let cfg = MonteCarloConfig {
            steps: 10,
            trials: 12,
            seed: 5,
            noiseless: false,
            sample_prior: true,
        };
        let (a, ta) = monte_carlo(&s.model, &s.x0, &s.x_hat0, &s.p0, &cfg).unwrap();
        let serial: Vec<_> = (0..12)
            .map(|t| run_trial(&s.model, &s.x0, &s.x_hat0, &s.p0, &cfg, t).unwrap())
            .collect();
        let b = ensemble_stats(&serial);
        assert_eq!(a.mse, b.mse);
        assert_eq!(ta[7].x_hat0, serial[7].x_hat0);
        // Trial 0 sees the observations of `simulate` with the same seed.
        let obs = simulate(&s.model, &s.x0, 10, 5, false).unwrap();
        let mut rng = trial_rng(5, 0);
        assert_eq!(
            obs,
            simulate_with_rng(&s.model, &s.x0, 10, &mut rng, false).unwrap()
        );
    }

    #[test]
    fn single_noiseless_trial_recovers_x0() {
        let model = SystemModel::lti(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.0, 1.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            1.0,
        )
        .unwrap();
        let x0 = DVector::from_column_slice(&[0.4, -0.9]);
        let cfg = MonteCarloConfig {
            steps: 12,
            trials: 1,
            seed: 1,
            noiseless: true,
            sample_prior: false,
        };
        let (stats, _) = monte_carlo(
            &model,
            &x0,
            &DVector::zeros(2),
            &(DMatrix::identity(2, 2) * 1e6),
            &cfg,
        )
        .unwrap();
        // A vague prior leaves only a pull of order ‖P_k P₀⁻¹‖ toward x̂₀.
        for k in 8..=12 {
            assert!(stats.mse[k] <= 1e-12, "k={k}: {}", stats.mse[k]);
        }
    }

    #[test]
    fn trace_equals_sum_of_eigenvalues() {
        let s = example_setup(Example::Example1, false);
        let cfg = MonteCarloConfig {
            steps: 40,
            trials: 1,
            seed: 0,
            noiseless: false,
            sample_prior: false,
        };
        let t = run_trial(&s.model, &s.x0, &s.x_hat0, &s.p0, &cfg, 0).unwrap();
        for w in t.records.windows(2) {
            assert!(w[1].trace_p <= w[0].trace_p);
        }
        for r in &t.records {
            let sum: f64 = r.p_eigs.iter().sum();
            assert!((sum - r.trace_p).abs() <= 1e-10 * r.trace_p);
        }
    }

    #[test]
    fn sigma_readings() {
        assert_eq!(example_setup(Example::Example1, false).sigma2, 1e-4);
        assert_eq!(example_setup(Example::Example1, true).sigma2, 0.01);
        assert_eq!(example_setup(Example::Example2, false).sigma2, 1e-6);
        assert_eq!("example2".parse::<Example>().unwrap(), Example::Example2);
        assert!("example3".parse::<Example>().is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.0, 1.5, -2.25e-7, 3e20, 0.1, 123456.789, 1e-4] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(1e-20), "1e-20");
        assert_eq!(format_float(0.25), "0.25");
    }

    #[test]
    fn observations_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let obs = vec![
            DVector::from_column_slice(&[0.1, -3e-9]),
            DVector::from_column_slice(&[2.5, 1e30]),
        ];
        let path = dir.path().join("obs.csv");
        fs::write(&path, observations_csv(&obs).unwrap()).unwrap();
        assert_eq!(read_observations(&path, 2).unwrap(), obs);
        assert!(read_observations(&path, 3).is_err());
        fs::write(&path, "k,y_0\n1,0.5\n").unwrap();
        assert!(matches!(
            read_observations(&path, 1),
            Err(Error::Config { .. })
        ));
    }
}
