//! Double-double dense kernels.
//!
//! The estimator, the Gramians and the error-dynamics analysis run on
//! matrices of [`Dd`] (an unevaluated sum of two `f64`, ~106 significant
//! bits). The observers `H A^k` grow geometrically, and the covariance
//! recursion has to resolve eigenvalues spread over more than twenty orders
//! of magnitude, which plain `f64` cannot do.
//!
//! nalgebra provides storage and the ring operations for `DMatrix<Dd>`; the
//! factorizations below are written out because nalgebra's decompositions
//! require `ComplexField`.

use nalgebra::{DMatrix, DVector};

pub type Dd = qd::Quad;
pub type DdMatrix = DMatrix<Dd>;
pub type DdVector = DVector<Dd>;

/// Unit roundoff of the double-double format.
pub const DD_EPSILON: f64 = 4.93038065763132e-32;

const MAX_JACOBI_SWEEPS: usize = 80;

#[inline]
pub fn dd(x: f64) -> Dd {
    Dd::from_f64(x)
}

#[inline]
pub fn to_f64(x: Dd) -> f64 {
    x.0 + x.1
}

pub fn widen(m: &DMatrix<f64>) -> DdMatrix {
    m.map(dd)
}

pub fn widen_vec(v: &DVector<f64>) -> DdVector {
    v.map(dd)
}

pub fn narrow(m: &DdMatrix) -> DMatrix<f64> {
    m.map(to_f64)
}

pub fn narrow_vec(v: &DdVector) -> DVector<f64> {
    v.map(to_f64)
}

pub fn identity(n: usize) -> DdMatrix {
    DdMatrix::identity(n, n)
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DdMatrix) -> DdMatrix {
    (m + m.transpose()) * dd(0.5)
}

pub fn max_abs(m: &DdMatrix) -> Dd {
    m.iter().fold(Dd::ZERO, |acc, x| {
        let a = x.abs();
        if a > acc {
            a
        } else {
            acc
        }
    })
}

pub fn is_finite(m: &DdMatrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// `A B` with accurately rounded double-double accumulation.
pub fn matmul(a: &DdMatrix, b: &DdMatrix) -> DdMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    DdMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        (0..a.ncols()).fold(Dd::ZERO, |acc, k| acc.add_accurate(a[(i, k)] * b[(k, j)]))
    })
}

pub fn dot(a: &DdVector, b: &DdVector) -> Dd {
    a.iter()
        .zip(b.iter())
        .fold(Dd::ZERO, |acc, (x, y)| acc + *x * *y)
}

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a symmetric positive
/// definite matrix. Only the lower triangle of the input is read.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DdMatrix,
}

impl Cholesky {
    /// Returns `None` when a pivot is not strictly positive (or not finite).
    pub fn new(a: &DdMatrix) -> Option<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return None;
        }
        let mut l = DdMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > Dd::ZERO) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(Cholesky { l })
    }

    /// Wraps an existing lower-triangular factor. Returns `None` unless the
    /// diagonal is strictly positive and finite.
    pub fn from_lower(l: DdMatrix) -> Option<Self> {
        let ok =
            l.is_square() && (0..l.nrows()).all(|i| l[(i, i)] > Dd::ZERO && l[(i, i)].is_finite());
        ok.then_some(Cholesky { l })
    }

    pub fn l(&self) -> &DdMatrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &DdMatrix) -> DdMatrix {
        let mut x = b.clone();
        for c in 0..b.ncols() {
            let col = self.solve_vec(&b.column(c).into_owned());
            x.set_column(c, &col);
        }
        x
    }

    pub fn solve_vec(&self, b: &DdVector) -> DdVector {
        let n = self.dim();
        let l = &self.l;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    /// `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> DdMatrix {
        symmetrize(&self.solve(&identity(self.dim())))
    }

    /// `bᵀ A⁻¹ b` via the triangular factor: `‖L⁻¹ b‖²`.
    pub fn inverse_quadratic_form(&self, b: &DdVector) -> Dd {
        let n = self.dim();
        let l = &self.l;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        dot(&y, &y)
    }
}

/// Householder triangularization of a tall `A` (`rows ≥ cols`), applied to
/// `B` as well. Returns `(R, C)` with `R` the leading `cols × cols` upper
/// triangle of `Qᵀ A` and `C` the first `cols` rows of `Qᵀ B`.
pub fn householder_qr(a: &DdMatrix, b: &DdMatrix) -> (DdMatrix, DdMatrix) {
    let (rows, cols) = a.shape();
    assert!(
        rows >= cols && b.nrows() == rows,
        "householder_qr shape mismatch"
    );
    let mut a = a.clone();
    let mut b = b.clone();
    for j in 0..cols {
        let norm = (j..rows)
            .fold(Dd::ZERO, |acc, i| acc + a[(i, j)] * a[(i, j)])
            .sqrt();
        if norm == Dd::ZERO {
            continue;
        }
        let alpha = if a[(j, j)] > Dd::ZERO { -norm } else { norm };
        let mut v: Vec<Dd> = (j..rows).map(|i| a[(i, j)]).collect();
        v[0] -= alpha;
        let beta = v.iter().fold(Dd::ZERO, |acc, x| acc + *x * *x);
        if beta == Dd::ZERO {
            continue;
        }
        let reflect = |m: &mut DdMatrix, c: usize| {
            let s = v
                .iter()
                .enumerate()
                .fold(Dd::ZERO, |acc, (t, x)| acc + *x * m[(j + t, c)]);
            let f = dd(2.0) * s / beta;
            for (t, x) in v.iter().enumerate() {
                m[(j + t, c)] -= f * *x;
            }
        };
        for c in (j + 1)..cols {
            reflect(&mut a, c);
        }
        for c in 0..b.ncols() {
            reflect(&mut b, c);
        }
        a[(j, j)] = alpha;
        for i in (j + 1)..rows {
            a[(i, j)] = Dd::ZERO;
        }
    }
    (a.rows(0, cols).into_owned(), b.rows(0, cols).into_owned())
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting. Returns
/// `None` for an exactly singular pivot column.
pub fn lu_solve(a: &DdMatrix, b: &DdMatrix) -> Option<DdMatrix> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return None;
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[(col, col)].abs();
        for r in (col + 1)..n {
            let v = m[(r, col)].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == Dd::ZERO || !best.is_finite() {
            return None;
        }
        if piv != col {
            m.swap_rows(piv, col);
            x.swap_rows(piv, col);
        }
        let p = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / p;
            if f == Dd::ZERO {
                continue;
            }
            for c in col..n {
                let v = m[(col, c)];
                m[(r, c)] -= f * v;
            }
            for c in 0..x.ncols() {
                let v = x[(col, c)];
                x[(r, c)] -= f * v;
            }
        }
    }
    for c in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= m[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / m[(i, i)];
        }
    }
    Some(x)
}

fn sort_desc(mut v: Vec<Dd>) -> Vec<Dd> {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted in
/// descending order. The rotation threshold is relative to the diagonal,
/// which keeps small eigenvalues of graded positive definite matrices
/// accurate to working precision.
pub fn symmetric_eigenvalues(a: &DdMatrix) -> Vec<Dd> {
    let n = a.nrows();
    let mut m = symmetrize(a);
    let tol = dd(4.0 * DD_EPSILON);
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == Dd::ZERO {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let scale = (app * aqq).abs().sqrt();
                if apq.abs() <= tol * scale || to_f64(apq.abs()) < 1e-290 {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (dd(2.0) * apq);
                let t = if to_f64(theta.abs()) > 1e100 {
                    Dd::ONE / (dd(2.0) * theta)
                } else {
                    let r = (theta * theta + Dd::ONE).sqrt();
                    if theta >= Dd::ZERO {
                        Dd::ONE / (theta + r)
                    } else {
                        -Dd::ONE / (r - theta)
                    }
                };
                let c = Dd::ONE / (t * t + Dd::ONE).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = Dd::ZERO;
                m[(q, p)] = Dd::ZERO;
            }
        }
        if !rotated {
            break;
        }
    }
    sort_desc((0..n).map(|i| m[(i, i)]).collect())
}

/// Singular values by one-sided (Hestenes) Jacobi orthogonalization of the
/// columns, sorted in descending order.
pub fn singular_values(a: &DdMatrix) -> Vec<Dd> {
    // Work on the orientation with at least as many rows as columns.
    let mut u = if a.nrows() >= a.ncols() {
        a.clone()
    } else {
        a.transpose()
    };
    let n = u.ncols();
    let tol = dd(4.0 * DD_EPSILON);
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let cp = u.column(p).into_owned();
                let cq = u.column(q).into_owned();
                let alpha = dot(&cp, &cp);
                let beta = dot(&cq, &cq);
                let gamma = dot(&cp, &cq);
                if gamma == Dd::ZERO
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                    || to_f64(gamma.abs()) < 1e-290
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (dd(2.0) * gamma);
                let t = if to_f64(zeta.abs()) > 1e100 {
                    Dd::ONE / (dd(2.0) * zeta)
                } else {
                    let r = (zeta * zeta + Dd::ONE).sqrt();
                    if zeta >= Dd::ZERO {
                        Dd::ONE / (zeta + r)
                    } else {
                        -Dd::ONE / (r - zeta)
                    }
                };
                let c = Dd::ONE / (t * t + Dd::ONE).sqrt();
                let s = t * c;
                u.set_column(p, &(&cp * c - &cq * s));
                u.set_column(q, &(&cp * s + &cq * c));
            }
        }
        if !rotated {
            break;
        }
    }
    sort_desc(
        (0..n)
            .map(|j| {
                let c = u.column(j).into_owned();
                dot(&c, &c).sqrt()
            })
            .collect(),
    )
}

/// Largest singular value.
pub fn spectral_norm(a: &DdMatrix) -> Dd {
    singular_values(a).first().copied().unwrap_or(Dd::ZERO)
}
