//! Recursive minimum-variance estimation of the initial state `x₀`.
//!
//! Each observation `y(k−1)` refines the running estimate:
//!
//! ```text
//! Σ_{k−1} = H̃_{k−1} P_{k−1} H̃_{k−1}ᵀ + R_{k−1}
//! K_k     = P_{k−1} H̃_{k−1}ᵀ Σ_{k−1}⁻¹
//! x̂_k     = x̂_{k−1} + K_k (y(k−1) − H̃_{k−1} x̂_{k−1})
//! P_k     = (I − K_k H̃_{k−1}) P_{k−1} (I − K_k H̃_{k−1})ᵀ + K_k R_{k−1} K_kᵀ
//! ```
//!
//! with `H̃_k = H_k A(k, 0)`. The covariance is carried as a Cholesky factor
//! `P_k = L_k L_kᵀ`: writing the Joseph form as `[Ψ_k L, K_k S][Ψ_k L, K_k S]ᵀ`
//! (`R = S Sᵀ`), the factor follows from an orthogonal triangularization of
//! the pre-array
//!
//! ```text
//! [ S   H̃_{k−1} L_{k−1} ]        [ Σ^{1/2}  0   ]
//! [ 0   L_{k−1}         ]  Θ  =  [ ·        L_k ]
//! ```
//!
//! which never forms `Ψ_k`, whose norm grows with `‖H̃_k‖`. Forming the
//! Joseph product entrywise loses about `ε·cond(P_k)` relative accuracy per
//! step; the factor loses `ε·cond(L_k) = ε·cond(P_k)^{1/2}`. In debug builds
//! every step is checked against [`joseph_update`] and [`simplified_update`].
//! All arithmetic is double-double (see [`crate::dd`]).
//!
//! [`batch_wls`] solves the same problem in one shot by a QR factorization
//! of the whitened stacked system and is the independent reference for the
//! recursion.

use nalgebra::{DMatrix, DVector};

use crate::dd::{self, Cholesky, DdMatrix, DdVector};
use crate::error::{Error, Result};
use crate::model::{ObserverCursor, SystemModel};

/// Relative agreement required between the Joseph and simplified updates.
pub const SIMPLIFIED_FORM_TOL: f64 = 1e-8;

/// Estimator state after `k` observations.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    k: usize,
    x_hat: DdVector,
    p: DdMatrix,
    /// Lower Cholesky factor of `p`.
    l: DdMatrix,
    /// Observer for the next observation `y(k)`; `None` past the model horizon.
    observer: Option<ObserverCursor>,
}

impl EstimatorState {
    /// Initial state from the prior guess `x̂₀` and its covariance `P₀ ≻ 0`.
    pub fn init(model: &SystemModel, x_hat0: &DVector<f64>, p0: &DMatrix<f64>) -> Result<Self> {
        let d = model.state_dim();
        if x_hat0.len() != d {
            return Err(Error::dimension("x_hat0", d, x_hat0.len()));
        }
        if p0.nrows() != d || p0.ncols() != d {
            return Err(Error::dimension(
                "P0",
                format!("{d}x{d}"),
                format!("{}x{}", p0.nrows(), p0.ncols()),
            ));
        }
        if x_hat0.iter().chain(p0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "prior mean and covariance must be finite".into(),
            ));
        }
        if crate::linalg::max_asymmetry(p0) > crate::model::SYMMETRY_TOL * p0.amax() {
            return Err(Error::InvalidArgument("P0 must be symmetric".into()));
        }
        let p = dd::symmetrize(&dd::widen(p0));
        let l = Cholesky::new(&p)
            .ok_or_else(|| Error::NotPositiveDefinite { what: "P0".into() })?
            .l()
            .clone();
        Ok(EstimatorState {
            k: 0,
            x_hat: dd::widen_vec(x_hat0),
            p,
            l,
            observer: Some(ObserverCursor::start(model)?),
        })
    }

    /// `init` with `P₀ = p · I`.
    pub fn init_isotropic(model: &SystemModel, x_hat0: &DVector<f64>, p: f64) -> Result<Self> {
        let d = model.state_dim();
        EstimatorState::init(model, x_hat0, &(DMatrix::identity(d, d) * p))
    }

    /// Number of observations consumed.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn estimate(&self) -> DVector<f64> {
        dd::narrow_vec(&self.x_hat)
    }

    pub fn estimate_dd(&self) -> &DdVector {
        &self.x_hat
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        dd::narrow(&self.p)
    }

    pub fn covariance_dd(&self) -> &DdMatrix {
        &self.p
    }

    /// `P_k⁻¹`, computed in double-double and rounded.
    pub fn information(&self) -> Result<DMatrix<f64>> {
        Ok(dd::narrow(&self.information_dd()?))
    }

    /// Lower Cholesky factor `L_k` of `P_k`.
    pub fn covariance_factor_dd(&self) -> &DdMatrix {
        &self.l
    }

    /// `P_k⁻¹ = L_k⁻ᵀ L_k⁻¹`.
    pub fn information_dd(&self) -> Result<DdMatrix> {
        let chol =
            Cholesky::from_lower(self.l.clone()).ok_or_else(|| Error::NotPositiveDefinite {
                what: format!("P_{}", self.k),
            })?;
        Ok(chol.inverse())
    }

    pub fn trace(&self) -> f64 {
        dd::to_f64(self.p.trace())
    }

    /// `H̃_k`, the observer applied to the next observation.
    pub fn next_observer(&self) -> Option<DMatrix<f64>> {
        self.observer.as_ref().map(|c| dd::narrow(c.h_tilde()))
    }

    pub fn next_observer_dd(&self) -> Result<&DdMatrix> {
        self.observer
            .as_ref()
            .map(ObserverCursor::h_tilde)
            .ok_or(Error::HorizonExceeded {
                requested: self.k,
                available: self.k.saturating_sub(1),
            })
    }
}

/// The gain `K_k` together with the innovation covariance `Σ_{k−1}` it inverts.
#[derive(Clone, Debug)]
pub struct GainMatrix {
    value: DdMatrix,
    innovation_covariance: DdMatrix,
}

impl GainMatrix {
    pub fn value(&self) -> DMatrix<f64> {
        dd::narrow(&self.value)
    }

    pub fn value_dd(&self) -> &DdMatrix {
        &self.value
    }

    pub fn innovation_covariance(&self) -> DMatrix<f64> {
        dd::narrow(&self.innovation_covariance)
    }

    pub fn innovation_covariance_dd(&self) -> &DdMatrix {
        &self.innovation_covariance
    }
}

fn check_noise_shape(r: &DMatrix<f64>, m: usize) -> Result<()> {
    if r.nrows() != m || r.ncols() != m {
        return Err(Error::dimension(
            "R",
            format!("{m}x{m}"),
            format!("{}x{}", r.nrows(), r.ncols()),
        ));
    }
    Ok(())
}

/// `K_k = P_{k−1} H̃ᵀ Σ⁻¹`, obtained by solving `Σ Kᵀ = H̃ P_{k−1}` with a
/// Cholesky factorization of `Σ`.
pub fn gain(state: &EstimatorState, r_prev: &DMatrix<f64>) -> Result<GainMatrix> {
    let h = state.next_observer_dd()?;
    check_noise_shape(r_prev, h.nrows())?;
    gain_dd(&state.p, h, &dd::widen(r_prev), state.k)
}

pub(crate) fn gain_dd(p: &DdMatrix, h: &DdMatrix, r: &DdMatrix, step: usize) -> Result<GainMatrix> {
    let hp = dd::matmul(h, p);
    let sigma = dd::symmetrize(&(dd::matmul(&hp, &h.transpose()) + r));
    let chol = Cholesky::new(&sigma).ok_or(Error::IndefiniteInnovation { step })?;
    let value = chol.solve(&hp).transpose();
    Ok(GainMatrix {
        value,
        innovation_covariance: sigma,
    })
}

/// Joseph-form update `(I − K H) P (I − K H)ᵀ + K R Kᵀ`, symmetrized.
pub fn joseph_update(p: &DdMatrix, k: &DdMatrix, h: &DdMatrix, r: &DdMatrix) -> DdMatrix {
    let psi = dd::identity(p.nrows()) - dd::matmul(k, h);
    let kr = dd::matmul(&dd::matmul(k, r), &k.transpose());
    let pp = dd::matmul(&dd::matmul(&psi, p), &psi.transpose());
    dd::symmetrize(&pp.zip_map(&kr, |a, b| a.add_accurate(b)))
}

/// Simplified update `(I − K H) P`; exact only for the optimal gain.
pub fn simplified_update(p: &DdMatrix, k: &DdMatrix, h: &DdMatrix) -> DdMatrix {
    (dd::identity(p.nrows()) - k * h) * p
}

/// Consumes `y(k−1)` (with noise covariance `R_{k−1}`) and returns the state
/// after `k` observations.
pub fn step(
    state: &EstimatorState,
    y_prev: &DVector<f64>,
    r_prev: &DMatrix<f64>,
    model: &SystemModel,
) -> Result<EstimatorState> {
    let cursor = state.observer.as_ref().ok_or(Error::HorizonExceeded {
        requested: state.k,
        available: state.k.saturating_sub(1),
    })?;
    let h = cursor.h_tilde();
    if y_prev.len() != h.nrows() {
        return Err(Error::dimension(
            format!("observation y({})", state.k),
            h.nrows(),
            y_prev.len(),
        ));
    }
    check_noise_shape(r_prev, h.nrows())?;
    if y_prev.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "observation y({}) has non-finite entries",
            state.k
        )));
    }

    let r = dd::widen(r_prev);
    let gain = gain_dd(&state.p, h, &r, state.k)?;
    let k_gain = &gain.value;

    let innovation = dd::widen_vec(y_prev) - h * &state.x_hat;
    let x_hat = &state.x_hat + k_gain * innovation;
    let noise_factor = Cholesky::new(&r).ok_or_else(|| Error::NotPositiveDefinite {
        what: format!("R_{}", state.k),
    })?;
    let l =
        factor_update(&state.l, h, noise_factor.l()).ok_or_else(|| Error::NotPositiveDefinite {
            what: format!("P_{}", state.k + 1),
        })?;
    let p = dd::symmetrize(&dd::matmul(&l, &l.transpose()));

    if cfg!(debug_assertions) {
        let joseph = joseph_update(&state.p, k_gain, h, &r);
        let simplified = simplified_update(&state.p, k_gain, h);
        let scale = dd::to_f64(dd::max_abs(&state.p));
        for (name, other) in [("Joseph", &joseph), ("simplified", &simplified)] {
            let gap = dd::to_f64(dd::max_abs(&(&p - other)));
            debug_assert!(
                gap <= SIMPLIFIED_FORM_TOL * scale,
                "{name} covariance update disagrees at step {}: {gap:e} vs scale {scale:e}",
                state.k + 1
            );
        }
    }

    // Past the last observation the next observer may not exist; that only
    // becomes an error if another step is requested.
    let observer = cursor.advance(model).ok();

    Ok(EstimatorState {
        k: state.k + 1,
        x_hat,
        p,
        l,
        observer,
    })
}

/// Triangularizes the pre-array `[[S, H L], [0, L]]` and returns the lower
/// factor of `P − P Hᵀ Σ⁻¹ H P`, with a positive diagonal.
fn factor_update(l: &DdMatrix, h: &DdMatrix, s: &DdMatrix) -> Option<DdMatrix> {
    let (m, d) = h.shape();
    let mut pre_t = DdMatrix::zeros(m + d, m + d);
    pre_t.view_mut((0, 0), (m, m)).copy_from(&s.transpose());
    pre_t
        .view_mut((m, 0), (d, m))
        .copy_from(&dd::matmul(h, l).transpose());
    pre_t.view_mut((m, m), (d, d)).copy_from(&l.transpose());
    let (u, _) = dd::householder_qr(&pre_t, &DdMatrix::zeros(m + d, 0));
    let mut next = u.view((m, m), (d, d)).transpose();
    for j in 0..d {
        if next[(j, j)] < dd::Dd::ZERO {
            next.column_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    Cholesky::from_lower(next).map(|c| c.l().clone())
}

fn check_observation_count(model: &SystemModel, n: usize) -> Result<()> {
    match model.horizon() {
        Some(h) if n > h => Err(Error::HorizonExceeded {
            requested: n - 1,
            available: h - 1,
        }),
        _ => Ok(()),
    }
}

/// Folds [`step`] over `observations[t] = y(t)` and returns every
/// intermediate state, starting with the prior.
pub fn run(
    model: &SystemModel,
    x_hat0: &DVector<f64>,
    p0: &DMatrix<f64>,
    observations: &[DVector<f64>],
) -> Result<Vec<EstimatorState>> {
    check_observation_count(model, observations.len())?;
    let mut states = Vec::with_capacity(observations.len() + 1);
    states.push(EstimatorState::init(model, x_hat0, p0)?);
    for (t, y) in observations.iter().enumerate() {
        let r = model.noise_at(t)?;
        let next = step(&states[t], y, &r, model)?;
        states.push(next);
    }
    Ok(states)
}

/// Covariance sequence `P_0, …, P_steps`. The covariances do not depend on
/// the observed values, so the recursion is driven with zero innovations.
pub fn covariance_run(
    model: &SystemModel,
    p0: &DMatrix<f64>,
    steps: usize,
) -> Result<Vec<EstimatorState>> {
    check_observation_count(model, steps)?;
    let d = model.state_dim();
    let zeros = DVector::zeros(d);
    let y = DVector::zeros(model.obs_dim());
    let mut states = Vec::with_capacity(steps + 1);
    states.push(EstimatorState::init(model, &zeros, p0)?);
    for t in 0..steps {
        let r = model.noise_at(t)?;
        let next = step(&states[t], &y, &r, model)?;
        states.push(next);
    }
    Ok(states)
}

/// Weighted least-squares estimate of `x₀` from the prior and the first
/// `N = observations.len()` observations:
///
/// ```text
/// argmin_x (x − x̂₀)ᵀ P₀⁻¹ (x − x̂₀) + Σ_{j<N} (y(j) − H̃_j x)ᵀ R_j⁻¹ (y(j) − H̃_j x)
/// ```
///
/// Whitens every block (`L₀⁻¹` for the prior, `S_j⁻¹` with `R_j = S_j S_jᵀ`
/// for the observations), stacks them and solves the least-squares problem
/// by Householder QR. Unlike the normal equations this does not square the
/// condition number of the stacked system.
pub fn batch_wls(
    model: &SystemModel,
    x_hat0: &DVector<f64>,
    p0: &DMatrix<f64>,
    observations: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let d = model.state_dim();
    let m = model.obs_dim();
    if x_hat0.len() != d {
        return Err(Error::dimension("x_hat0", d, x_hat0.len()));
    }
    if p0.nrows() != d || p0.ncols() != d {
        return Err(Error::dimension(
            "P0",
            format!("{d}x{d}"),
            format!("{}x{}", p0.nrows(), p0.ncols()),
        ));
    }
    check_observation_count(model, observations.len())?;

    let prior = Cholesky::new(&dd::symmetrize(&dd::widen(p0)))
        .ok_or_else(|| Error::NotPositiveDefinite { what: "P0".into() })?;
    let rows = d + m * observations.len();
    let mut a = DdMatrix::zeros(rows, d);
    let mut b = DdMatrix::zeros(rows, 1);
    a.view_mut((0, 0), (d, d))
        .copy_from(&forward_solve(prior.l(), &dd::identity(d)));
    b.view_mut((0, 0), (d, 1)).copy_from(&forward_solve(
        prior.l(),
        &dd::widen(&DMatrix::from_column_slice(d, 1, x_hat0.as_slice())),
    ));

    let mut cursor = ObserverCursor::start(model)?;
    for (j, y) in observations.iter().enumerate() {
        if j > 0 {
            cursor = cursor.advance(model)?;
        }
        if y.len() != m {
            return Err(Error::dimension(format!("observation y({j})"), m, y.len()));
        }
        let noise = Cholesky::new(&dd::widen(model.noise_at(j)?.as_ref())).ok_or_else(|| {
            Error::NotPositiveDefinite {
                what: format!("R_{j}"),
            }
        })?;
        let row = d + j * m;
        a.view_mut((row, 0), (m, d))
            .copy_from(&forward_solve(noise.l(), cursor.h_tilde()));
        b.view_mut((row, 0), (m, 1)).copy_from(&forward_solve(
            noise.l(),
            &dd::widen(&DMatrix::from_column_slice(m, 1, y.as_slice())),
        ));
    }

    let (r, c) = dd::householder_qr(&a, &b);
    let mut x = DdVector::zeros(d);
    for i in (0..d).rev() {
        let mut s = c[(i, 0)];
        for k in (i + 1)..d {
            s -= r[(i, k)] * x[k];
        }
        if r[(i, i)] == dd::Dd::ZERO || !s.is_finite() {
            return Err(Error::Singular {
                what: "stacked least-squares system".into(),
                condition: f64::INFINITY,
            });
        }
        x[i] = s / r[(i, i)];
    }
    Ok(dd::narrow_vec(&x))
}

/// `L⁻¹ B` for lower-triangular `L`.
fn forward_solve(l: &DdMatrix, b: &DdMatrix) -> DdMatrix {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Convenience: `x̂₀ = 0` when no prior mean is supplied.
pub fn default_prior_mean(model: &SystemModel) -> DVector<f64> {
    DVector::zeros(model.state_dim())
}
