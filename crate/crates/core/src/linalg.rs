//! Small f64 helpers over nalgebra.

use nalgebra::DMatrix;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Ratio of largest to smallest singular value (`inf` when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Eigenvalues of the symmetric part of `m`, descending.
pub fn symmetric_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eigs: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    eigs
}

/// Moduli of the (possibly complex) eigenvalues of a square matrix,
/// descending. Uses nalgebra's real Schur form (Hessenberg reduction plus
/// shifted QR iteration).
pub fn eigenvalue_magnitudes(m: &DMatrix<f64>) -> Vec<f64> {
    let mut mags: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags
}

/// `max |m_ij - m_ji|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// `‖AᵀA − AAᵀ‖_F ≤ tol · ‖A‖²_F`.
pub fn is_normal(a: &DMatrix<f64>, tol: f64) -> bool {
    let ata = a.transpose() * a;
    let aat = a * a.transpose();
    (ata - aat).norm() <= tol * a.norm_squared()
}

/// Least-squares line through `(x_i, y_i)`; returns `(intercept, slope)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnitudes_of_rotation_scaling() {
        // 2·rotation has eigenvalues 2e^{±iθ}.
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let a = DMatrix::from_row_slice(2, 2, &[2.0 * c, -2.0 * s, 2.0 * s, 2.0 * c]);
        let mags = eigenvalue_magnitudes(&a);
        assert!(mags.iter().all(|m| (m - 2.0).abs() < 1e-12));
        assert!(is_normal(&a, 1e-12));
    }

    #[test]
    fn jordan_block_is_not_normal() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(!is_normal(&a, 1e-12));
        assert!(condition_number(&a) > 2.0);
    }

    #[test]
    fn line_fit_is_exact_on_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 2.0 * x).collect();
        let (c, s) = fit_line(&xs, &ys).unwrap();
        assert!((c - 0.5).abs() < 1e-14 && (s + 2.0).abs() < 1e-14);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
