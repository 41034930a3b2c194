//! System descriptions: dynamics `A_k`, observation `H_k`, noise `R_k`.
//!
//! The state evolves without process noise, `x(k+1) = A_{k+1} x(k)`, and is
//! observed as `y(k) = H_k x(k) + v_k` with `v_k ~ N(0, R_k)`. A model is
//! validated once at construction and is immutable afterwards.

use std::borrow::Cow;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dd::{self, DdMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// Smallest admissible noise eigenvalue.
pub const SIGMA2_FLOOR: f64 = 1e-15;
/// Largest admissible condition number of a dynamics matrix.
pub const MAX_DYNAMICS_CONDITION: f64 = 1e12;
/// Relative asymmetry tolerated in a noise covariance.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Dynamics {
    Lti(DMatrix<f64>),
    /// `seq[t]` is `A_{t+1}`.
    Ltv(Vec<DMatrix<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Lti(DMatrix<f64>),
    /// `seq[t]` is `H_t`.
    Ltv(Vec<DMatrix<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Noise {
    /// `R_k = sigma2 · I` for every step.
    Isotropic { sigma2: f64 },
    /// `seq[t]` is `R_t`.
    PerStep(Vec<DMatrix<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    d: usize,
    m: usize,
    dynamics: Dynamics,
    observation: Observation,
    noise: Noise,
}

impl SystemModel {
    pub fn new(
        d: usize,
        m: usize,
        dynamics: Dynamics,
        observation: Observation,
        noise: Noise,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::config("d", "state dimension must be positive"));
        }
        if m == 0 {
            return Err(Error::config("m", "observation dimension must be positive"));
        }
        if m > d {
            return Err(Error::config(
                "m",
                format!("observation dimension {m} exceeds state dimension {d}"),
            ));
        }

        match &dynamics {
            Dynamics::Lti(a) => check_dynamics(a, d, "dynamics.A")?,
            Dynamics::Ltv(seq) => {
                if seq.is_empty() {
                    return Err(Error::config("dynamics.A_seq", "sequence is empty"));
                }
                for (t, a) in seq.iter().enumerate() {
                    check_dynamics(a, d, &format!("dynamics.A_seq[{t}]"))?;
                }
            }
        }
        match &observation {
            Observation::Lti(h) => check_shape(h, m, d, "observation.H")?,
            Observation::Ltv(seq) => {
                if seq.is_empty() {
                    return Err(Error::config("observation.H_seq", "sequence is empty"));
                }
                for (t, h) in seq.iter().enumerate() {
                    check_shape(h, m, d, &format!("observation.H_seq[{t}]"))?;
                }
            }
        }
        match &noise {
            Noise::Isotropic { sigma2 } => {
                if !sigma2.is_finite() || *sigma2 < SIGMA2_FLOOR {
                    return Err(Error::config(
                        "noise.sigma2",
                        format!(
                            "variance must be finite and at least {SIGMA2_FLOOR:e}, got {sigma2}"
                        ),
                    ));
                }
            }
            Noise::PerStep(seq) => {
                if seq.is_empty() {
                    return Err(Error::config("noise.R_seq", "sequence is empty"));
                }
                for (t, r) in seq.iter().enumerate() {
                    check_noise(r, m, &format!("noise.R_seq[{t}]"))?;
                }
            }
        }

        Ok(SystemModel {
            d,
            m,
            dynamics,
            observation,
            noise,
        })
    }

    /// LTI model with isotropic noise `R = sigma2 · I`.
    pub fn lti(a: DMatrix<f64>, h: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let (d, m) = (a.nrows(), h.nrows());
        SystemModel::new(
            d,
            m,
            Dynamics::Lti(a),
            Observation::Lti(h),
            Noise::Isotropic { sigma2 },
        )
    }

    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn obs_dim(&self) -> usize {
        self.m
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn noise(&self) -> &Noise {
        &self.noise
    }

    /// True when both dynamics and observation are time invariant.
    pub fn is_lti(&self) -> bool {
        matches!(self.dynamics, Dynamics::Lti(_)) && matches!(self.observation, Observation::Lti(_))
    }

    /// The constant dynamics matrix of an LTI model.
    pub fn lti_dynamics(&self) -> Option<&DMatrix<f64>> {
        match &self.dynamics {
            Dynamics::Lti(a) => Some(a),
            Dynamics::Ltv(_) => None,
        }
    }

    /// Last state index reachable by the dynamics (`None` when unbounded).
    pub fn max_state_step(&self) -> Option<usize> {
        match &self.dynamics {
            Dynamics::Lti(_) => None,
            Dynamics::Ltv(seq) => Some(seq.len()),
        }
    }

    /// Number of observations `y(0), …, y(T−1)` the model describes
    /// (`None` when unbounded).
    pub fn horizon(&self) -> Option<usize> {
        let mut limit: Option<usize> = self.max_state_step().map(|n| n + 1);
        let mut clamp = |n: usize| limit = Some(limit.map_or(n, |l| l.min(n)));
        if let Observation::Ltv(seq) = &self.observation {
            clamp(seq.len());
        }
        if let Noise::PerStep(seq) = &self.noise {
            clamp(seq.len());
        }
        limit
    }

    /// `A_k` for `k ≥ 1`.
    pub fn dynamics_at(&self, k: usize) -> Result<&DMatrix<f64>> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "dynamics are indexed from A_1".to_string(),
            ));
        }
        match &self.dynamics {
            Dynamics::Lti(a) => Ok(a),
            Dynamics::Ltv(seq) => seq.get(k - 1).ok_or(Error::HorizonExceeded {
                requested: k,
                available: seq.len(),
            }),
        }
    }

    /// `H_k`.
    pub fn observation_at(&self, k: usize) -> Result<&DMatrix<f64>> {
        match &self.observation {
            Observation::Lti(h) => Ok(h),
            Observation::Ltv(seq) => seq.get(k).ok_or(Error::HorizonExceeded {
                requested: k,
                available: seq.len() - 1,
            }),
        }
    }

    /// `R_k`.
    pub fn noise_at(&self, k: usize) -> Result<Cow<'_, DMatrix<f64>>> {
        match &self.noise {
            Noise::Isotropic { sigma2 } => {
                Ok(Cow::Owned(DMatrix::identity(self.m, self.m) * *sigma2))
            }
            Noise::PerStep(seq) => seq.get(k).map(Cow::Borrowed).ok_or(Error::HorizonExceeded {
                requested: k,
                available: seq.len() - 1,
            }),
        }
    }

    /// Smallest eigenvalue over all noise covariances (the `σ²` lower bound).
    pub fn noise_floor(&self) -> f64 {
        match &self.noise {
            Noise::Isotropic { sigma2 } => *sigma2,
            Noise::PerStep(seq) => seq
                .iter()
                .map(|r| {
                    linalg::symmetric_eigenvalues_desc(r)
                        .last()
                        .copied()
                        .unwrap_or(0.0)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn check_state_step(&self, k: usize) -> Result<()> {
        match self.max_state_step() {
            Some(n) if k > n => Err(Error::HorizonExceeded {
                requested: k,
                available: n,
            }),
            _ => Ok(()),
        }
    }

    pub fn to_config(&self) -> ModelConfig {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        ModelConfig {
            d: self.d,
            m: self.m,
            dynamics: match &self.dynamics {
                Dynamics::Lti(a) => DynamicsConfig::Lti { a: rows(a) },
                Dynamics::Ltv(seq) => DynamicsConfig::Ltv {
                    a_seq: seq.iter().map(rows).collect(),
                },
            },
            observation: match &self.observation {
                Observation::Lti(h) => ObservationConfig::Lti { h: rows(h) },
                Observation::Ltv(seq) => ObservationConfig::Ltv {
                    h_seq: seq.iter().map(rows).collect(),
                },
            },
            noise: match &self.noise {
                Noise::Isotropic { sigma2 } => NoiseConfig::Isotropic { sigma2: *sigma2 },
                Noise::PerStep(seq) => NoiseConfig::PerStep {
                    r_seq: seq.iter().map(rows).collect(),
                },
            },
        }
    }
}

fn check_shape(m: &DMatrix<f64>, rows: usize, cols: usize, path: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::config(
            path,
            format!(
                "expected a {rows}x{cols} matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            ),
        ));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::config(path, "entries must be finite"));
    }
    Ok(())
}

fn check_dynamics(a: &DMatrix<f64>, d: usize, path: &str) -> Result<()> {
    check_shape(a, d, d, path)?;
    let cond = linalg::condition_number(a);
    if !(cond <= MAX_DYNAMICS_CONDITION) {
        return Err(Error::config(
            path,
            format!("dynamics matrix is not invertible (condition estimate {cond:.3e})"),
        ));
    }
    Ok(())
}

fn check_noise(r: &DMatrix<f64>, m: usize, path: &str) -> Result<()> {
    check_shape(r, m, m, path)?;
    let asym = linalg::max_asymmetry(r);
    if asym > SYMMETRY_TOL * r.amax() {
        return Err(Error::config(
            path,
            format!("noise covariance is not symmetric (max asymmetry {asym:.3e})"),
        ));
    }
    let lambda_min = linalg::symmetric_eigenvalues_desc(r)
        .last()
        .copied()
        .unwrap_or(0.0);
    if !(lambda_min >= SIGMA2_FLOOR) {
        return Err(Error::config(
            path,
            format!(
                "noise covariance must be positive definite with smallest eigenvalue at least {SIGMA2_FLOOR:e}, got {lambda_min:.3e}"
            ),
        ));
    }
    Ok(())
}

/// State-transition matrix `A(k, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub value: DMatrix<f64>,
    pub from_step: usize,
    pub to_step: usize,
}

/// `A(k, j)`: the ordered product `A_k ⋯ A_{j+1}` for `k > j`, the identity
/// for `k = j`, and the inverse of `A(j, k)` (by linear solve) for `k < j`.
pub fn transition(model: &SystemModel, k: usize, j: usize) -> Result<TransitionMatrix> {
    Ok(TransitionMatrix {
        value: dd::narrow(&transition_dd(model, k, j)?),
        from_step: j,
        to_step: k,
    })
}

pub(crate) fn transition_dd(model: &SystemModel, k: usize, j: usize) -> Result<DdMatrix> {
    model.check_state_step(k)?;
    model.check_state_step(j)?;
    let d = model.state_dim();
    if k >= j {
        let mut acc = dd::identity(d);
        for t in (j + 1)..=k {
            acc = dd::widen(model.dynamics_at(t)?) * acc;
        }
        Ok(acc)
    } else {
        let forward = transition_dd(model, j, k)?;
        dd::lu_solve(&forward, &dd::identity(d)).ok_or_else(|| Error::Singular {
            what: format!("transition A({j},{k})"),
            condition: f64::INFINITY,
        })
    }
}

/// `H̃_k = H_k A(k, 0)`, the observer of the initial state at step `k`.
pub fn observed_evolution(model: &SystemModel, k: usize) -> Result<DMatrix<f64>> {
    Ok(dd::narrow(&observed_evolution_dd(model, k)?))
}

pub(crate) fn observed_evolution_dd(model: &SystemModel, k: usize) -> Result<DdMatrix> {
    let h = dd::widen(model.observation_at(k)?);
    Ok(h * transition_dd(model, k, 0)?)
}

/// Incremental computation of `H̃_k`: `H̃_k = H̃_{k−1} A` for LTI models and
/// `H̃_k = H_k A_k A(k−1, 0)` otherwise.
#[derive(Clone, Debug)]
pub struct ObserverCursor {
    k: usize,
    h_tilde: DdMatrix,
    /// `A(k, 0)`, kept only for time-varying models.
    transition: Option<DdMatrix>,
}

impl ObserverCursor {
    pub fn start(model: &SystemModel) -> Result<Self> {
        let h0 = dd::widen(model.observation_at(0)?);
        let transition = if model.is_lti() {
            None
        } else {
            Some(dd::identity(model.state_dim()))
        };
        Ok(ObserverCursor {
            k: 0,
            h_tilde: h0,
            transition,
        })
    }

    pub fn step(&self) -> usize {
        self.k
    }

    pub fn h_tilde(&self) -> &DdMatrix {
        &self.h_tilde
    }

    pub fn advance(&self, model: &SystemModel) -> Result<Self> {
        let k = self.k + 1;
        match &self.transition {
            None => {
                let a = dd::widen(model.dynamics_at(k)?);
                Ok(ObserverCursor {
                    k,
                    h_tilde: &self.h_tilde * a,
                    transition: None,
                })
            }
            Some(phi) => {
                model.check_state_step(k)?;
                let phi = dd::widen(model.dynamics_at(k)?) * phi;
                let h = dd::widen(model.observation_at(k)?);
                Ok(ObserverCursor {
                    k,
                    h_tilde: h * &phi,
                    transition: Some(phi),
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration documents

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub m: usize,
    pub dynamics: DynamicsConfig,
    pub observation: ObservationConfig,
    pub noise: NoiseConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsConfig {
    Lti {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    Ltv {
        #[serde(rename = "A_seq")]
        a_seq: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationConfig {
    Lti {
        #[serde(rename = "H")]
        h: Vec<Vec<f64>>,
    },
    Ltv {
        #[serde(rename = "H_seq")]
        h_seq: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Isotropic {
        sigma2: f64,
    },
    PerStep {
        #[serde(rename = "R_seq")]
        r_seq: Vec<Vec<Vec<f64>>>,
    },
}

/// Builds a matrix from an array of rows, rejecting ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::config(path, "matrix is empty"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::config(
                format!("{path}[{i}]"),
                format!("row has {} entries, expected {ncols}", row.len()),
            ));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrices_from_seq(seq: &[Vec<Vec<f64>>], path: &str) -> Result<Vec<DMatrix<f64>>> {
    seq.iter()
        .enumerate()
        .map(|(t, rows)| matrix_from_rows(rows, &format!("{path}[{t}]")))
        .collect()
}

impl TryFrom<ModelConfig> for SystemModel {
    type Error = Error;

    fn try_from(cfg: ModelConfig) -> Result<Self> {
        let dynamics = match &cfg.dynamics {
            DynamicsConfig::Lti { a } => Dynamics::Lti(matrix_from_rows(a, "dynamics.A")?),
            DynamicsConfig::Ltv { a_seq } => {
                Dynamics::Ltv(matrices_from_seq(a_seq, "dynamics.A_seq")?)
            }
        };
        let observation = match &cfg.observation {
            ObservationConfig::Lti { h } => Observation::Lti(matrix_from_rows(h, "observation.H")?),
            ObservationConfig::Ltv { h_seq } => {
                Observation::Ltv(matrices_from_seq(h_seq, "observation.H_seq")?)
            }
        };
        let noise = match &cfg.noise {
            NoiseConfig::Isotropic { sigma2 } => Noise::Isotropic { sigma2: *sigma2 },
            NoiseConfig::PerStep { r_seq } => {
                Noise::PerStep(matrices_from_seq(r_seq, "noise.R_seq")?)
            }
        };
        SystemModel::new(cfg.d, cfg.m, dynamics, observation, noise)
    }
}

/// Parses and validates a JSON configuration document.
pub fn load_model(document: &str) -> Result<SystemModel> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let cfg: ModelConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(
            if path == "." {
                "<root>".to_string()
            } else {
                path
            },
            e.into_inner().to_string(),
        )
    })?;
    SystemModel::try_from(cfg)
}

pub fn load_model_file(path: &Path) -> Result<SystemModel> {
    let text = std::fs::read_to_string(path)?;
    load_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example2() -> SystemModel {
        SystemModel::lti(
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn identity_dynamics_transition_is_identity() {
        let m = SystemModel::lti(DMatrix::identity(3, 3), DMatrix::identity(2, 3), 1.0).unwrap();
        for (k, j) in [(0, 0), (4, 1), (1, 4), (7, 7)] {
            assert_eq!(transition(&m, k, j).unwrap().value, DMatrix::identity(3, 3));
        }
    }

    #[test]
    fn transition_same_step_is_identity() {
        let t = transition(&example2(), 5, 5).unwrap();
        assert_eq!(t.value, DMatrix::identity(2, 2));
        assert_eq!((t.from_step, t.to_step), (5, 5));
    }

    #[test]
    fn example2_transition_two_steps() {
        // [[1,-.5],[-.5,1]]² = [[1.25,-1],[-1,1.25]]
        let t = transition(&example2(), 2, 0).unwrap().value;
        let expect = DMatrix::from_row_slice(2, 2, &[1.25, -1.0, -1.0, 1.25]);
        assert!((t - expect).amax() < 1e-15);
    }

    #[test]
    fn backward_transition_inverts_forward() {
        let m = example2();
        let fwd = transition(&m, 3, 1).unwrap().value;
        let back = transition(&m, 1, 3).unwrap().value;
        assert!((fwd * back - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn observed_evolution_cases() {
        let m = example2();
        assert_eq!(
            observed_evolution(&m, 0).unwrap(),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0])
        );
        let h1 = observed_evolution(&m, 1).unwrap();
        assert_eq!(h1, DMatrix::from_row_slice(1, 2, &[-0.5, 1.0]));

        let scalar =
            SystemModel::lti(DMatrix::identity(2, 2) * 2.0, DMatrix::identity(2, 2), 1.0).unwrap();
        assert_eq!(
            observed_evolution(&scalar, 3).unwrap(),
            DMatrix::identity(2, 2) * 8.0
        );
    }

    #[test]
    fn ltv_horizon_is_enforced() {
        let a = vec![DMatrix::identity(2, 2) * 2.0, DMatrix::identity(2, 2) * 3.0];
        let m = SystemModel::new(
            2,
            1,
            Dynamics::Ltv(a),
            Observation::Lti(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
            Noise::Isotropic { sigma2: 1.0 },
        )
        .unwrap();
        assert_eq!(m.horizon(), Some(3));
        assert_eq!(
            transition(&m, 2, 0).unwrap().value,
            DMatrix::identity(2, 2) * 6.0
        );
        assert!(matches!(
            transition(&m, 3, 0),
            Err(Error::HorizonExceeded {
                requested: 3,
                available: 2
            })
        ));
        let c = ObserverCursor::start(&m).unwrap();
        let c = c.advance(&m).unwrap().advance(&m).unwrap();
        assert_eq!(
            dd::narrow(c.h_tilde()),
            DMatrix::from_row_slice(1, 2, &[6.0, 0.0])
        );
        assert!(c.advance(&m).is_err());
    }

    #[test]
    fn load_example1_config() {
        let doc = r#"{
            "d": 4, "m": 2,
            "dynamics": {"kind": "lti", "A": [[1.99,-0.32,0.0,0.07],[0.43,1.17,0.02,0.0],[0.13,-0.09,1.52,-0.13],[0.28,-0.14,0.03,1.22]]},
            "observation": {"kind": "lti", "H": [[1,0,0,0],[0,0,1,0]]},
            "noise": {"kind": "isotropic", "sigma2": 1e-4}
        }"#;
        let m = load_model(doc).unwrap();
        assert_eq!((m.state_dim(), m.obs_dim()), (4, 2));
        assert!(m.is_lti());
        assert_eq!(m.noise_floor(), 1e-4);
        assert_eq!(SystemModel::try_from(m.to_config()).unwrap(), m);
    }

    #[test]
    fn load_rejects_m_greater_than_d() {
        let doc = r#"{"d": 1, "m": 2,
            "dynamics": {"kind": "lti", "A": [[1.0]]},
            "observation": {"kind": "lti", "H": [[1.0],[1.0]]},
            "noise": {"kind": "isotropic", "sigma2": 1.0}}"#;
        let err = load_model(doc).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref path, .. } if path == "m"),
            "{err}"
        );
    }

    #[test]
    fn load_rejects_indefinite_noise() {
        let doc = r#"{"d": 2, "m": 2,
            "dynamics": {"kind": "lti", "A": [[1,0],[0,1]]},
            "observation": {"kind": "lti", "H": [[1,0],[0,1]]},
            "noise": {"kind": "per_step", "R_seq": [[[1,0],[0,1]], [[1,0],[0,-0.5]]]}}"#;
        let err = load_model(doc).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref path, .. } if path == "noise.R_seq[1]"),
            "{err}"
        );
    }

    #[test]
    fn load_rejects_singular_dynamics_and_bad_schema() {
        let singular = r#"{"d": 2, "m": 1,
            "dynamics": {"kind": "lti", "A": [[1,2],[2,4]]},
            "observation": {"kind": "lti", "H": [[1,0]]},
            "noise": {"kind": "isotropic", "sigma2": 1.0}}"#;
        assert!(matches!(
            load_model(singular),
            Err(Error::Config { ref path, .. }) if path == "dynamics.A"
        ));

        let ragged = r#"{"d": 2, "m": 1,
            "dynamics": {"kind": "lti", "A": [[1,0],[0]]},
            "observation": {"kind": "lti", "H": [[1,0]]},
            "noise": {"kind": "isotropic", "sigma2": 1.0}}"#;
        assert!(matches!(
            load_model(ragged),
            Err(Error::Config { ref path, .. }) if path == "dynamics.A[1]"
        ));

        let unknown_kind = r#"{"d": 2, "m": 1,
            "dynamics": {"kind": "lti", "A": [[1,0],[0,1]]},
            "observation": {"kind": "lti", "H": [[1,0]]},
            "noise": {"kind": "gaussian", "sigma2": 1.0}}"#;
        let err = load_model(unknown_kind).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref path, .. } if path.starts_with("noise")),
            "{err}"
        );

        let zero_sigma = r#"{"d": 2, "m": 1,
            "dynamics": {"kind": "lti", "A": [[1,0],[0,1]]},
            "observation": {"kind": "lti", "H": [[1,0]]},
            "noise": {"kind": "isotropic", "sigma2": 0.0}}"#;
        assert!(matches!(
            load_model(zero_sigma),
            Err(Error::Config { ref path, .. }) if path == "noise.sigma2"
        ));
    }
}
