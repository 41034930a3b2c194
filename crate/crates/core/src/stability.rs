//! Stability of the estimation-error dynamics.
//!
//! The mean error evolves as `e_k = Ψ_k e_{k−1}` with `Ψ_k = I − K_k H̃_{k−1}`,
//! and the transition satisfies `Ψ(k, j) = P_k P_j⁻¹`. `V(k, z) = zᵀ P_k⁻¹ z`
//! is a Lyapunov function for it: along trajectories
//! `ΔV = −z(k−1)ᵀ H̃ᵀ Σ⁻¹ H̃ z(k−1) ≤ 0`.
//!
//! For time-invariant dynamics the smallest eigenvalue modulus of `A`
//! separates the regimes: above 1 the error decays exponentially, below 1
//! the covariance stays bounded away from zero.

use nalgebra::{DMatrix, DVector};

use crate::dd::{self, Cholesky, Dd, DdMatrix, DdVector};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorState};
use crate::linalg;
use crate::model::SystemModel;
use crate::observability;

/// Band around `|λ_min(A)| = 1` treated as the boundary case.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// Relative tolerance of the normality test `‖AᵀA − AAᵀ‖ ≤ tol·‖A‖²`.
pub const NORMALITY_TOL: f64 = 1e-12;

/// Slack, relative to `V(0)`, allowed for a Lyapunov increase.
pub const LYAPUNOV_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    UniformlyAsymptoticallyStable,
    LyapunovStableOnly,
    Indeterminate,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::UniformlyAsymptoticallyStable => "UniformlyAsymptoticallyStable",
            Classification::LyapunovStableOnly => "LyapunovStableOnly",
            Classification::Indeterminate => "Indeterminate",
        }
    }
}

fn require_lti(model: &SystemModel) -> Result<&DMatrix<f64>> {
    model
        .lti_dynamics()
        .ok_or_else(|| Error::InvalidArgument("a time-invariant model is required".into()))
}

/// Stability class of the error dynamics of a time-invariant model.
///
/// The model must be observable within `d` steps.
pub fn classify(model: &SystemModel) -> Result<Classification> {
    let a = require_lti(model)?;
    let d = model.state_dim();
    let report =
        observability::check_observability(model, d, observability::default_rho_tol(model)?)?;
    if !report.verdict.is_observable() {
        return Err(Error::NotObservable { horizon: d });
    }
    let lam = linalg::eigenvalue_magnitudes(a)
        .last()
        .copied()
        .unwrap_or(0.0);
    Ok(classify_spectrum(lam, linalg::is_normal(a, NORMALITY_TOL)))
}

fn classify_spectrum(lambda_min: f64, normal: bool) -> Classification {
    if lambda_min > 1.0 + CLASSIFY_TOL {
        Classification::UniformlyAsymptoticallyStable
    } else if lambda_min < 1.0 - CLASSIFY_TOL {
        Classification::LyapunovStableOnly
    } else if normal && lambda_min >= 1.0 {
        Classification::UniformlyAsymptoticallyStable
    } else {
        Classification::Indeterminate
    }
}

/// `Ψ(k, j) = P_k P_j⁻¹` in double-double.
pub fn psi_transition_dd(p_k: &DdMatrix, p_j: &DdMatrix) -> Result<DdMatrix> {
    let chol = Cholesky::new(&dd::symmetrize(p_j)).ok_or_else(|| Error::Singular {
        what: "P_j".into(),
        condition: f64::INFINITY,
    })?;
    // P_j X = P_k gives X = P_j⁻¹ P_k, whose transpose is P_k P_j⁻¹.
    Ok(chol.solve(p_k).transpose())
}

/// `Ψ(k, j) = P_k P_j⁻¹`.
pub fn psi_transition(p_k: &DMatrix<f64>, p_j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(dd::narrow(&psi_transition_dd(
        &dd::widen(p_k),
        &dd::widen(p_j),
    )?))
}

/// `V = zᵀ P⁻¹ z` in double-double.
pub fn lyapunov_value_dd(p: &DdMatrix, z: &DdVector) -> Result<Dd> {
    let chol = Cholesky::new(&dd::symmetrize(p)).ok_or_else(|| Error::Singular {
        what: "P_k".into(),
        condition: f64::INFINITY,
    })?;
    Ok(chol.inverse_quadratic_form(z))
}

/// `V(k, z) = zᵀ P_k⁻¹ z`.
pub fn lyapunov_value(p: &DMatrix<f64>, z: &DVector<f64>) -> Result<f64> {
    Ok(dd::to_f64(lyapunov_value_dd(
        &dd::widen(p),
        &dd::widen_vec(z),
    )?))
}

/// Closed-form decrement `−zᵀ H̃ᵀ Σ⁻¹ H̃ z` for the step that uses observer
/// `h` and innovation covariance `sigma`.
pub fn lyapunov_decrement_dd(h: &DdMatrix, sigma: &DdMatrix, z: &DdVector) -> Result<Dd> {
    let chol = Cholesky::new(sigma).ok_or(Error::NotPositiveDefinite {
        what: "innovation covariance".into(),
    })?;
    Ok(-chol.inverse_quadratic_form(&(h * z)))
}

/// One step of the error dynamics.
#[derive(Clone, Debug)]
pub struct ErrorStep {
    /// `Ψ_k = I − K_k H̃_{k−1}`.
    pub psi: DdMatrix,
    /// `H̃_{k−1}`.
    pub h_tilde: DdMatrix,
    /// `Σ_{k−1}`.
    pub sigma: DdMatrix,
}

/// Error-dynamics matrices of a covariance run. `covariances[k]` is `P_k`,
/// `steps[k−1]` holds `Ψ_k`.
#[derive(Clone, Debug)]
pub struct ErrorDynamics {
    pub covariances: Vec<DdMatrix>,
    /// Lower Cholesky factors `L_k` of the covariances.
    pub factors: Vec<DdMatrix>,
    pub information: Vec<DdMatrix>,
    pub steps: Vec<ErrorStep>,
}

impl ErrorDynamics {
    /// Runs the covariance recursion from `P₀` for `steps` observations.
    pub fn run(model: &SystemModel, p0: &DMatrix<f64>, steps: usize) -> Result<Self> {
        let states = estimator::covariance_run(model, p0, steps)?;
        ErrorDynamics::from_states(model, &states)
    }

    /// Rebuilds `Ψ_k` from consecutive estimator states.
    pub fn from_states(model: &SystemModel, states: &[EstimatorState]) -> Result<Self> {
        let d = model.state_dim();
        let mut steps = Vec::with_capacity(states.len().saturating_sub(1));
        for (t, s) in states.iter().enumerate().skip(1) {
            let prev = &states[t - 1];
            let r = model.noise_at(t - 1)?;
            let g = estimator::gain(prev, r.as_ref())?;
            let h = prev.next_observer_dd()?.clone();
            let psi = dd::identity(d) - g.value_dd() * &h;
            debug_assert_eq!(s.k(), t);
            steps.push(ErrorStep {
                psi,
                h_tilde: h,
                sigma: g.innovation_covariance_dd().clone(),
            });
        }
        let covariances: Vec<DdMatrix> = states.iter().map(|s| s.covariance_dd().clone()).collect();
        let factors: Vec<DdMatrix> = states
            .iter()
            .map(|s| s.covariance_factor_dd().clone())
            .collect();
        let information = states
            .iter()
            .map(EstimatorState::information_dd)
            .collect::<Result<Vec<_>>>()?;
        Ok(ErrorDynamics {
            covariances,
            factors,
            information,
            steps,
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn psi(&self, k: usize) -> DMatrix<f64> {
        dd::narrow(&self.steps[k - 1].psi)
    }

    /// `Ψ(k, 0)` as the ordered product `Ψ_k ⋯ Ψ_1`.
    pub fn psi_product(&self, k: usize) -> DdMatrix {
        let d = self.covariances[0].nrows();
        self.steps[..k]
            .iter()
            .fold(dd::identity(d), |acc, s| &s.psi * acc)
    }

    /// `Ψ(k, j) = P_k P_j⁻¹` from the stored covariance and information.
    pub fn transition(&self, k: usize, j: usize) -> DdMatrix {
        &self.covariances[k] * &self.information[j]
    }

    /// `‖P_k‖` for every `k`.
    pub fn p_norms(&self) -> Vec<f64> {
        self.covariances
            .iter()
            .map(|p| dd::to_f64(dd::symmetric_eigenvalues(p)[0]))
            .collect()
    }

    /// `‖Ψ(k, 0)‖ = ‖P_k P₀⁻¹‖` for every `k`.
    pub fn psi_norms(&self) -> Vec<f64> {
        let info0 = &self.information[0];
        self.covariances
            .iter()
            .map(|p| dd::to_f64(dd::spectral_norm(&(p * info0))))
            .collect()
    }

    /// `V(k, z(k))` along `z(k) = Ψ_k z(k−1)`.
    ///
    /// `Ψ_k` is applied as `L_k L_kᵀ P_{k−1}⁻¹` rather than through the
    /// explicit `I − K_k H̃_{k−1}`, whose norm grows with `‖H̃_{k−1}‖` and
    /// whose rounding error `P_k⁻¹` would amplify in `V`.
    pub fn lyapunov_trace(&self, z0: &DVector<f64>) -> LyapunovTrace {
        let chols: Vec<Option<Cholesky>> = self
            .factors
            .iter()
            .map(|l| Cholesky::from_lower(l.clone()))
            .collect();
        let value = |k: usize, z: &DdVector| {
            chols[k]
                .as_ref()
                .map_or(f64::NAN, |c| dd::to_f64(c.inverse_quadratic_form(z)))
        };
        let mut z = dd::widen_vec(z0);
        let mut values = vec![value(0, &z)];
        let mut decrements = Vec::with_capacity(self.len());
        let mut norms = vec![dd::to_f64(dd::dot(&z, &z).sqrt())];
        for (i, s) in self.steps.iter().enumerate() {
            let hz = &s.h_tilde * &z;
            let dec = Cholesky::new(&s.sigma)
                .map(|c| -dd::to_f64(c.inverse_quadratic_form(&hz)))
                .unwrap_or(f64::NAN);
            decrements.push(dec);
            z = match &chols[i] {
                Some(prev) => {
                    let l = &self.factors[i + 1];
                    let u = prev.solve_vec(&z);
                    l * (l.transpose() * u)
                }
                None => &s.psi * z,
            };
            values.push(value(i + 1, &z));
            norms.push(dd::to_f64(dd::dot(&z, &z).sqrt()));
        }
        LyapunovTrace::new(values, decrements, norms)
    }
}

#[derive(Clone, Debug)]
pub struct LyapunovTrace {
    /// `V(k, z(k))` for `k = 0..=n`.
    pub values: Vec<f64>,
    /// Closed-form `ΔV` of step `k` at index `k − 1`.
    pub decrements: Vec<f64>,
    /// `‖z(k)‖`.
    pub z_norms: Vec<f64>,
    /// Largest `V(k) − V(k−1)`.
    pub max_increase: f64,
    /// `max_increase ≤ LYAPUNOV_SLACK · V(0)`.
    pub monotone: bool,
}

impl LyapunovTrace {
    fn new(values: Vec<f64>, decrements: Vec<f64>, z_norms: Vec<f64>) -> Self {
        let max_increase = values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let monotone = values.len() < 2 || max_increase <= LYAPUNOV_SLACK * values[0];
        LyapunovTrace {
            values,
            decrements,
            z_norms,
            max_increase,
            monotone,
        }
    }
}

/// Parameters of `‖Ψ(k,0)‖ ≈ α e^{−βk}` fitted over `k ∈ [first_k, last_k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialFit {
    pub alpha: f64,
    pub beta: f64,
    pub first_k: usize,
    pub last_k: usize,
}

/// Fits `log ‖Ψ(k,0)‖ = log α − βk` over the tail half of the sequence,
/// where `psi_norms[k]` is the norm at step `k`.
///
/// A zero norm truncates the sequence to the prefix before it; at least five
/// values must remain.
pub fn exponential_fit(psi_norms: &[f64]) -> Result<ExponentialFit> {
    let n = positive_prefix(psi_norms)?;
    exponential_fit_range(psi_norms, n / 2, n - 1)
}

/// Same fit over the explicit window `k ∈ [first_k, last_k]`.
pub fn exponential_fit_range(
    psi_norms: &[f64],
    first_k: usize,
    last_k: usize,
) -> Result<ExponentialFit> {
    let n = positive_prefix(psi_norms)?;
    let last_k = last_k.min(n - 1);
    if last_k <= first_k {
        return Err(Error::InvalidArgument(format!(
            "fit window [{first_k}, {last_k}] is empty"
        )));
    }
    let (ks, logs): (Vec<f64>, Vec<f64>) = (first_k..=last_k)
        .map(|k| (k as f64, psi_norms[k].ln()))
        .unzip();
    let (intercept, slope) = linalg::fit_line(&ks, &logs)
        .ok_or_else(|| Error::InvalidArgument("degenerate fit window".into()))?;
    Ok(ExponentialFit {
        alpha: intercept.exp(),
        beta: -slope,
        first_k,
        last_k,
    })
}

fn positive_prefix(values: &[f64]) -> Result<usize> {
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "norms must be finite and non-negative, got {bad}"
        )));
    }
    let n = values
        .iter()
        .position(|&v| v == 0.0)
        .unwrap_or(values.len());
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "exponential fit needs at least 5 positive values, got {n}"
        )));
    }
    Ok(n)
}

/// `s_i(Aⁿ)^{1/n}` for one power `n`, singular values descending.
#[derive(Clone, Debug, PartialEq)]
pub struct GelfandRow {
    pub n: usize,
    pub roots: Vec<f64>,
}

fn scale_by_pow2(x: Dd, e: i32) -> Dd {
    let f = 2f64.powi(e);
    qd::Quad(x.0 * f, x.1 * f)
}

/// `s_i(Aⁿ)^{1/n}` for `n = 1..=n_max`.
///
/// Powers are accumulated in double-double and renormalized by an exact
/// power of two after each product; the exponent is carried separately.
pub fn gelfand_diagnostic(a: &DMatrix<f64>, n_max: usize) -> Result<Vec<GelfandRow>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if !a.is_square() {
        return Err(Error::dimension(
            "A",
            "square",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    let ad = dd::widen(a);
    let mut m = dd::identity(a.nrows());
    let mut log2_scale: i64 = 0;
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        m = &m * &ad;
        let top = dd::to_f64(dd::max_abs(&m));
        if !top.is_finite() {
            return Err(Error::Overflow(format!("A^{n} is not finite")));
        }
        if top > 0.0 {
            let e = top.log2().floor() as i32;
            m = m.map(|x| scale_by_pow2(x, -e));
            log2_scale += e as i64;
        }
        let roots = dd::singular_values(&m)
            .into_iter()
            .map(|s| {
                let s = dd::to_f64(s);
                if s > 0.0 {
                    ((s.ln() + log2_scale as f64 * std::f64::consts::LN_2) / n as f64).exp()
                } else {
                    0.0
                }
            })
            .collect::<Vec<_>>();
        if roots.iter().any(|r| !r.is_finite()) {
            return Err(Error::Overflow(format!("singular values of A^{n}")));
        }
        rows.push(GelfandRow { n, roots });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    /// Eigenvalue moduli of `A`, descending.
    pub eigs_abs: Vec<f64>,
    pub lambda_min_a: f64,
    pub lambda_max_a: f64,
    pub classification: Classification,
    /// Set when `λ_max(A) < 1`.
    pub uniformly_stable_hint: bool,
    pub exp_fit: Option<ExponentialFit>,
    pub lyapunov_trace: Vec<f64>,
    pub lyapunov_monotone: bool,
    /// `‖P_k‖` for `k = 0..=K`.
    pub p_norm_trace: Vec<f64>,
}

/// Classification plus a `K`-step covariance run from `P₀`, with the
/// Lyapunov trace started at `z₀`.
pub fn analyze(
    model: &SystemModel,
    p0: &DMatrix<f64>,
    z0: &DVector<f64>,
    k_max: usize,
) -> Result<StabilityReport> {
    let a = require_lti(model)?;
    let classification = classify(model)?;
    let eigs_abs = linalg::eigenvalue_magnitudes(a);
    let lambda_max_a = eigs_abs.first().copied().unwrap_or(0.0);
    let lambda_min_a = eigs_abs.last().copied().unwrap_or(0.0);

    let dynamics = ErrorDynamics::run(model, p0, k_max)?;
    let exp_fit = exponential_fit(&dynamics.psi_norms()).ok();
    let lyap = dynamics.lyapunov_trace(z0);
    Ok(StabilityReport {
        eigs_abs,
        lambda_min_a,
        lambda_max_a,
        classification,
        uniformly_stable_hint: lambda_max_a < 1.0,
        exp_fit,
        lyapunov_trace: lyap.values,
        lyapunov_monotone: lyap.monotone,
        p_norm_trace: dynamics.p_norms(),
    })
}
