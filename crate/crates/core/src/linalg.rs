//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter of the first retry; multiplied by 100 on each further retry.
const JITTER_START: f64 = 1e-12;
const JITTER_RETRIES: usize = 4;
/// From this many right-hand sides on, solves go through an explicit
/// triangular inverse and matrix products.
const BLOCKED_MIN_RHS: usize = 16;

/// In-place `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// If the plain factorization fails the diagonal is lifted by a jitter
/// proportional to the mean diagonal, growing over a few retries.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    /// Diagonal jitter actually added (0 when none was needed).
    pub jitter: f64,
}

impl SpdFactor {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Dimension(format!("matrix is {:?}, not square", a.shape())));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix to factor has non-finite entries".into()));
        }
        if let Some(chol) = a.clone().cholesky() {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let scale = (a.trace() / n.max(1) as f64).abs().max(f64::MIN_POSITIVE);
        let mut rel = JITTER_START;
        for _ in 0..JITTER_RETRIES {
            let mut lifted = a.clone();
            for i in 0..n {
                lifted[(i, i)] += rel * scale;
            }
            if let Some(chol) = lifted.cholesky() {
                return Ok(Self { chol, jitter: rel * scale });
            }
            rel *= 100.0;
        }
        Err(Error::Numerical("matrix is not positive definite".into()))
    }

    /// Lower-triangular factor `L` with `A = L Lᵀ`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        if b.ncols() < BLOCKED_MIN_RHS {
            return self.chol.solve(b);
        }
        let l_inv = self.l_inverse();
        l_inv.transpose() * (&l_inv * b)
    }

    /// `L⁻¹`.
    pub fn l_inverse(&self) -> DMatrix<f64> {
        lower_inverse(&self.chol.l())
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `L⁻¹ B`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        if b.ncols() >= BLOCKED_MIN_RHS {
            return self.l_inverse() * b;
        }
        let mut out = b.clone();
        self.chol.l_dirty().solve_lower_triangular_unchecked_mut(&mut out);
        out
    }

    pub fn ln_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// Solves `A X = B` for symmetric positive-definite `A` after scaling `A` to
/// unit diagonal, which keeps matrices whose diagonal spans many orders of
/// magnitude factorizable. Returns the solution and the jitter used on the
/// scaled matrix.
pub fn solve_spd_equilibrated(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = a[(i, i)];
            if v > 0.0 && v.is_finite() { 1.0 / v.sqrt() } else { 1.0 }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * a[(i, j)] * d[j]);
    let factor = SpdFactor::new(scaled)?;
    let rhs = DMatrix::from_fn(n, b.ncols(), |i, j| d[i] * b[(i, j)]);
    let mut x = factor.solve(&rhs);
    for i in 0..n {
        for j in 0..x.ncols() {
            x[(i, j)] *= d[i];
        }
    }
    Ok((x, factor.jitter))
}

/// Inverse of a nonsingular lower-triangular matrix.
///
/// Recursive 2×2 blocking, `inv([A 0; C D]) = [A⁻¹ 0; -D⁻¹ C A⁻¹ D⁻¹]`, so the
/// bulk of the work runs through matrix products.
pub fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    if n <= 16 {
        let mut out = DMatrix::identity(n, n);
        l.solve_lower_triangular_unchecked_mut(&mut out);
        return out;
    }
    let k = n / 2;
    let a_inv = lower_inverse(&l.view((0, 0), (k, k)).into_owned());
    let d_inv = lower_inverse(&l.view((k, k), (n - k, n - k)).into_owned());
    let c = l.view((k, 0), (n - k, k));
    let lower_left = -(&d_inv * c * &a_inv);
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (k, k)).copy_from(&a_inv);
    out.view_mut((k, k), (n - k, n - k)).copy_from(&d_inv);
    out.view_mut((k, 0), (n - k, k)).copy_from(&lower_left);
    out
}

/// `max |a_ij - b_ij| / max(max |b_ij|, floor)`.
pub fn rel_max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    let scale = b.amax().max(floor);
    (a - b).amax() / scale
}
