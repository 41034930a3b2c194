//! Observability Gramians and the growth of their smallest eigenvalue.
//!
//! The windowed Gramian is
//!
//! ```text
//! 𝒪(k+L, k) = Σ_{j=k}^{k+L−1} A(j,k)ᵀ H_jᵀ R_j⁻¹ H_j A(j,k)
//! ```
//!
//! and a model is uniformly observable when some window `L` gives
//! `𝒪(k+L, k) ⪰ ρI` for every `k`. For time-invariant models the window
//! starting at 0 decides; for time-varying models only the windows inside the
//! supplied sequences are checked.

use nalgebra::DMatrix;

use crate::dd::{self, Cholesky, DdMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ObserverCursor, SystemModel};

/// Band around `|λ| = 1` inside which the growth class is left undetermined.
pub const SPEC_TOL: f64 = 1e-9;

/// Relative step-to-step change below which a bounded trace counts as converged.
pub const LIMIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Observable {
        horizon: usize,
        rho: f64,
    },
    /// No window up to the given length reached the threshold.
    NotObservableUpTo(usize),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Observable { .. } => "Observable",
            Verdict::NotObservableUpTo(_) => "NotObservableUpTo",
        }
    }

    pub fn is_observable(&self) -> bool {
        matches!(self, Verdict::Observable { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GrowthClass {
    Unbounded,
    /// `limit` is the last computed value; `converged` records whether the
    /// trace had settled to [`LIMIT_TOL`] by then.
    BoundedLimit {
        limit: f64,
        converged: bool,
    },
    Undetermined,
}

impl GrowthClass {
    pub fn name(&self) -> &'static str {
        match self {
            GrowthClass::Unbounded => "Unbounded",
            GrowthClass::BoundedLimit { .. } => "BoundedLimit",
            GrowthClass::Undetermined => "Undetermined",
        }
    }
}

/// Fit of `log λ_min(𝒪(k,0)) ≈ βk + c` over `k ∈ [first_k, last_k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthFit {
    pub beta: f64,
    pub intercept: f64,
    pub first_k: usize,
    pub last_k: usize,
}

#[derive(Clone, Debug)]
pub struct ObservabilityReport {
    pub horizon_l: Option<usize>,
    pub rho: Option<f64>,
    /// `𝒪(k, 0)` for `k = 1..=gramians.len()`.
    pub gramians: Vec<DMatrix<f64>>,
    /// `λ_min(𝒪(k, 0))`, aligned with `gramians`.
    pub lambda_min_trace: Vec<f64>,
    pub verdict: Verdict,
    pub growth_class: GrowthClass,
    pub beta_fit: Option<GrowthFit>,
}

#[derive(Clone, Debug)]
pub struct Asymptotics {
    pub growth_class: GrowthClass,
    pub lambda_min_trace: Vec<f64>,
    pub beta_fit: Option<GrowthFit>,
}

impl ObservabilityReport {
    /// Replaces the trace and growth fields with a longer asymptotic sweep.
    pub fn with_asymptotics(mut self, a: Asymptotics, gramians: Vec<DMatrix<f64>>) -> Self {
        self.lambda_min_trace = a.lambda_min_trace;
        self.gramians = gramians;
        self.growth_class = a.growth_class;
        self.beta_fit = a.beta_fit;
        self
    }
}

fn observation_count(model: &SystemModel) -> Option<usize> {
    model.horizon()
}

fn check_window(model: &SystemModel, k0: usize, l: usize) -> Result<()> {
    if let Some(n) = observation_count(model) {
        if k0 + l > n {
            return Err(Error::HorizonExceeded {
                requested: k0 + l - 1,
                available: n.saturating_sub(1),
            });
        }
    }
    Ok(())
}

/// `A(j,k)ᵀ H_jᵀ R_j⁻¹ H_j A(j,k)` for the observer `h = H_j A(j,k)`.
fn gramian_term(model: &SystemModel, j: usize, h: &DdMatrix) -> Result<DdMatrix> {
    let r = model.noise_at(j)?;
    let chol = Cholesky::new(&dd::widen(r.as_ref())).ok_or_else(|| Error::NotPositiveDefinite {
        what: format!("R_{j}"),
    })?;
    Ok(h.transpose() * chol.solve(h))
}

/// Windowed Gramian `𝒪(k0+L, k0)` in double-double.
pub fn gramian_dd(model: &SystemModel, k0: usize, l: usize) -> Result<DdMatrix> {
    let d = model.state_dim();
    let mut sum = DdMatrix::zeros(d, d);
    if l == 0 {
        return Ok(sum);
    }
    check_window(model, k0, l)?;
    let mut phi = dd::identity(d);
    for j in k0..k0 + l {
        if j > k0 {
            phi = dd::widen(model.dynamics_at(j)?) * phi;
        }
        let h = dd::widen(model.observation_at(j)?) * &phi;
        sum += gramian_term(model, j, &h)?;
        sum = dd::symmetrize(&sum);
    }
    Ok(sum)
}

/// Windowed Gramian `𝒪(k0+L, k0)`.
pub fn gramian(model: &SystemModel, k0: usize, l: usize) -> Result<DMatrix<f64>> {
    Ok(dd::narrow(&gramian_dd(model, k0, l)?))
}

/// `𝒪(k, 0)` for `k = 1..=count`, accumulated incrementally.
pub fn gramian_sequence_dd(model: &SystemModel, count: usize) -> Result<Vec<DdMatrix>> {
    check_window(model, 0, count)?;
    let d = model.state_dim();
    let mut out = Vec::with_capacity(count);
    let mut sum = DdMatrix::zeros(d, d);
    let mut cursor = ObserverCursor::start(model)?;
    for j in 0..count {
        if j > 0 {
            cursor = cursor.advance(model)?;
        }
        sum += gramian_term(model, j, cursor.h_tilde())?;
        sum = dd::symmetrize(&sum);
        out.push(sum.clone());
    }
    Ok(out)
}

/// Smallest eigenvalue of a symmetric double-double matrix, rounded.
pub fn lambda_min(g: &DdMatrix) -> f64 {
    dd::symmetric_eigenvalues(g)
        .last()
        .map(|x| dd::to_f64(*x))
        .unwrap_or(0.0)
}

/// Threshold used when the caller does not give one: `1e-10 · λ_max(𝒪(L,0))`
/// with `L = min(d, available observations)`, so exact rank deficiency is
/// separated from rounding.
pub fn default_rho_tol(model: &SystemModel) -> Result<f64> {
    let mut l = model.state_dim();
    if let Some(n) = model.horizon() {
        l = l.min(n);
    }
    let g = gramian_dd(model, 0, l)?;
    let top = dd::to_f64(dd::symmetric_eigenvalues(&g)[0]);
    Ok((1e-10 * top).max(f64::MIN_POSITIVE))
}

/// Searches for the shortest window `L ≤ l_max` with `λ_min ≥ rho_tol`.
///
/// Time-invariant models use the window starting at 0. Time-varying models
/// require every window `𝒪(k+L, k)` inside the supplied sequences to pass;
/// `l_max` is capped at the number of available observations.
pub fn check_observability(
    model: &SystemModel,
    l_max: usize,
    rho_tol: f64,
) -> Result<ObservabilityReport> {
    if l_max == 0 {
        return Err(Error::InvalidArgument("L_max must be at least 1".into()));
    }
    if !(rho_tol > 0.0) {
        return Err(Error::InvalidArgument("rho_tol must be positive".into()));
    }
    let l_cap = match observation_count(model) {
        Some(n) => l_max.min(n),
        None => l_max,
    };
    let seq = gramian_sequence_dd(model, l_cap)?;
    let lambda_min_trace: Vec<f64> = seq.iter().map(lambda_min).collect();

    let mut found = None;
    if let Some(n) = observation_count(model).filter(|_| !model.is_lti()) {
        for l in 1..=l_cap {
            let mut rho = f64::INFINITY;
            for k0 in 0..=n - l {
                let g = if k0 == 0 {
                    seq[l - 1].clone()
                } else {
                    gramian_dd(model, k0, l)?
                };
                rho = rho.min(lambda_min(&g));
                if rho < rho_tol {
                    break;
                }
            }
            if rho >= rho_tol {
                found = Some((l, rho));
                break;
            }
        }
    } else {
        found = lambda_min_trace
            .iter()
            .position(|&lm| lm >= rho_tol)
            .map(|i| (i + 1, lambda_min_trace[i]));
    }

    let verdict = match found {
        Some((horizon, rho)) => Verdict::Observable { horizon, rho },
        None => Verdict::NotObservableUpTo(l_cap),
    };
    Ok(ObservabilityReport {
        horizon_l: found.map(|f| f.0),
        rho: found.map(|f| f.1),
        gramians: seq.iter().map(dd::narrow).collect(),
        lambda_min_trace,
        verdict,
        growth_class: GrowthClass::Undetermined,
        beta_fit: None,
    })
}

/// Smallest eigenvalue modulus of the dynamics of a time-invariant model.
pub fn lambda_min_dynamics(model: &SystemModel) -> Result<f64> {
    let a = model
        .lti_dynamics()
        .ok_or_else(|| Error::InvalidArgument("a time-invariant model is required".into()))?;
    Ok(linalg::eigenvalue_magnitudes(a)
        .last()
        .copied()
        .unwrap_or(0.0))
}

/// `λ_min(𝒪(k,0))` for `k = 1..=K` and its growth class.
///
/// The class follows the smallest eigenvalue modulus of `A`: above `1 + SPEC_TOL`
/// the trace is unbounded and a log-linear fit over the tail half estimates
/// its exponential rate; below `1 − SPEC_TOL` it converges to a positive limit.
pub fn lambda_min_asymptotics(model: &SystemModel, k_max: usize) -> Result<Asymptotics> {
    let lam = lambda_min_dynamics(model)?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let seq = gramian_sequence_dd(model, k_max)?;
    let trace: Vec<f64> = seq.iter().map(lambda_min).collect();
    let last = *trace.last().unwrap();
    if !(last > 0.0) {
        return Err(Error::NotObservable { horizon: k_max });
    }

    let (growth_class, beta_fit) = if lam > 1.0 + SPEC_TOL {
        (GrowthClass::Unbounded, growth_fit(&trace))
    } else if lam < 1.0 - SPEC_TOL {
        let converged = k_max >= 2 && (last - trace[k_max - 2]).abs() <= LIMIT_TOL * last;
        (
            GrowthClass::BoundedLimit {
                limit: last,
                converged,
            },
            None,
        )
    } else {
        (GrowthClass::Undetermined, None)
    };
    Ok(Asymptotics {
        growth_class,
        lambda_min_trace: trace,
        beta_fit,
    })
}

fn growth_fit(trace: &[f64]) -> Option<GrowthFit> {
    let n = trace.len();
    let first = n / 2;
    let (ks, logs): (Vec<f64>, Vec<f64>) = (first..n)
        .filter(|&i| trace[i] > 0.0)
        .map(|i| ((i + 1) as f64, trace[i].ln()))
        .unzip();
    let (intercept, beta) = linalg::fit_line(&ks, &logs)?;
    Some(GrowthFit {
        beta,
        intercept,
        first_k: first + 1,
        last_k: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dynamics, Noise, Observation};

    fn example2(sigma2: f64) -> SystemModel {
        SystemModel::lti(
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            sigma2,
        )
        .unwrap()
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64) -> bool {
        (a - b).amax() <= rel * b.amax().max(1e-300)
    }

    #[test]
    fn identity_single_window() {
        let m = SystemModel::lti(DMatrix::identity(3, 3), DMatrix::identity(3, 3), 1.0).unwrap();
        assert_eq!(gramian(&m, 0, 1).unwrap(), DMatrix::identity(3, 3));
        assert_eq!(gramian(&m, 4, 0).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn example2_two_step_gramian() {
        let g = gramian(&example2(1e-6), 0, 2).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.25, -0.5, -0.5, 2.0]) * 1e6;
        assert!(close(&g, &expect, 1e-15));
    }

    #[test]
    fn full_observation_is_observable_in_one_step() {
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, -0.1, 0.7]);
        let m = SystemModel::lti(a, DMatrix::identity(2, 2), 0.5).unwrap();
        let rep = check_observability(&m, 1, 1e-10).unwrap();
        assert_eq!(rep.horizon_l, Some(1));
        assert!((rep.rho.unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn example2_observable_with_two_steps() {
        let rep = check_observability(&example2(1e-6), 5, 1e-4).unwrap();
        assert!(matches!(
            rep.verdict,
            Verdict::Observable { horizon: 2, .. }
        ));
        assert!(rep.rho.unwrap() > 0.0);
        assert_eq!(rep.lambda_min_trace[0], 0.0);
        assert_eq!(rep.gramians.len(), 5);
    }

    #[test]
    fn unobserved_coordinate_is_reported() {
        let m = SystemModel::lti(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            1.0,
        )
        .unwrap();
        let rep = check_observability(&m, 7, 1e-12).unwrap();
        assert_eq!(rep.verdict, Verdict::NotObservableUpTo(7));
        assert!(rep.lambda_min_trace.iter().all(|&x| x == 0.0));
        assert!(matches!(
            lambda_min_asymptotics(&m, 5),
            Err(Error::NotObservable { .. })
        ));
    }

    #[test]
    fn ltv_checks_every_window() {
        // The second coordinate is observed only at step 1: the length-2
        // window starting at 2 misses it, every length-3 window covers it.
        let m = SystemModel::new(
            2,
            1,
            Dynamics::Lti(DMatrix::identity(2, 2)),
            Observation::Ltv(vec![
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            ]),
            Noise::Isotropic { sigma2: 1.0 },
        )
        .unwrap();
        let rep = check_observability(&m, 10, 1e-9).unwrap();
        assert_eq!(
            rep.verdict,
            Verdict::Observable {
                horizon: 3,
                rho: 1.0
            }
        );
        let rep = check_observability(&m, 2, 1e-9).unwrap();
        assert_eq!(rep.verdict, Verdict::NotObservableUpTo(2));

        let m = SystemModel::new(
            2,
            1,
            Dynamics::Lti(DMatrix::identity(2, 2)),
            Observation::Ltv(vec![
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            ]),
            Noise::Isotropic { sigma2: 1.0 },
        )
        .unwrap();
        let rep = check_observability(&m, 10, 1e-9).unwrap();
        assert_eq!(
            rep.verdict,
            Verdict::Observable {
                horizon: 2,
                rho: 1.0
            }
        );
    }

    #[test]
    fn window_beyond_ltv_horizon_is_an_error() {
        let m = SystemModel::new(
            1,
            1,
            Dynamics::Ltv(vec![DMatrix::from_element(1, 1, 2.0)]),
            Observation::Lti(DMatrix::from_element(1, 1, 1.0)),
            Noise::Isotropic { sigma2: 1.0 },
        )
        .unwrap();
        assert!(gramian(&m, 0, 2).is_ok());
        assert!(matches!(
            gramian(&m, 1, 2),
            Err(Error::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn doubling_dynamics_has_geometric_trace() {
        let m =
            SystemModel::lti(DMatrix::identity(2, 2) * 2.0, DMatrix::identity(2, 2), 1.0).unwrap();
        let a = lambda_min_asymptotics(&m, 12).unwrap();
        assert_eq!(a.growth_class, GrowthClass::Unbounded);
        for (i, lm) in a.lambda_min_trace.iter().enumerate() {
            let k = i as i32 + 1;
            let expect: f64 = (0..k).map(|j| 4f64.powi(j)).sum();
            assert!((lm - expect).abs() <= 1e-12 * expect);
        }
        let fit = a.beta_fit.unwrap();
        assert!((fit.beta - 4f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn example2_trace_converges() {
        let a = lambda_min_asymptotics(&example2(1e-6), 60).unwrap();
        match a.growth_class {
            GrowthClass::BoundedLimit { limit, converged } => {
                assert!(converged);
                assert!(limit > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(a.beta_fit.is_none());
    }

    #[test]
    fn unit_modulus_is_undetermined() {
        let (c, s) = (0.4f64.cos(), 0.4f64.sin());
        let m = SystemModel::lti(
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            1.0,
        )
        .unwrap();
        let a = lambda_min_asymptotics(&m, 10).unwrap();
        assert_eq!(a.growth_class, GrowthClass::Undetermined);
    }
}
