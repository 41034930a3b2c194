//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use isokal::model::SystemModel;
use isokal::observability;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Case {
    pub model: SystemModel,
    pub eigenvalues: Vec<f64>,
    pub x0: DVector<f64>,
    pub x_hat0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    normal_matrix(rng, n, n).qr().q()
}

/// SPD matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let diag = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(lo..=hi)));
    let p = &q * diag * q.transpose();
    (&p + p.transpose()) * 0.5
}

/// Random observable time-invariant system: `d ∈ 2..=6`, `m ∈ 1..d`,
/// `A = V Λ V⁻¹` with real eigenvalues uniform in `[0.3, 2.5]` and
/// `cond(V) ≤ 50`, Gaussian `H`, `σ²` log-uniform in `[1e-4, 1e-2]`, and a
/// prior covariance with eigenvalues in `[1e-3, 1]`.
pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    loop {
        let d = rng.random_range(2..=6usize);
        let m = rng.random_range(1..d);
        let v = loop {
            let v = normal_matrix(rng, d, d);
            if isokal::linalg::condition_number(&v) <= 50.0 {
                break v;
            }
        };
        let eigenvalues: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..=2.5)).collect();
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
        let a = &v * lambda * v.clone().try_inverse().expect("well conditioned");
        let h = normal_matrix(rng, m, d);
        let sigma2 = 10f64.powf(rng.random_range(-4.0..=-2.0));
        let Ok(model) = SystemModel::lti(a, h, sigma2) else {
            continue;
        };
        let tol = observability::default_rho_tol(&model).unwrap();
        let rep = observability::check_observability(&model, d, tol).unwrap();
        if !rep.verdict.is_observable() {
            continue;
        }
        let x0 = normal_vector(rng, d);
        let x_hat0 = &x0 + normal_vector(rng, d) * 0.1;
        let p0 = random_spd(rng, d, 1e-3, 1.0);
        return Case {
            model,
            eigenvalues,
            x0,
            x_hat0,
            p0,
        };
    }
}

pub fn cases(seed: u64, count: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_case(&mut rng)).collect()
}

pub fn example1_a() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.99, -0.32, 0.0, 0.07, 0.43, 1.17, 0.02, 0.0, 0.13, -0.09, 1.52, -0.13, 0.28, -0.14,
            0.03, 1.22,
        ],
    )
}
