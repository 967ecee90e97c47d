//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use permsbl::PermutationMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn rand_gamma(rng: &mut ChaCha8Rng, l: usize) -> DVector<f64> {
    DVector::from_fn(l, |_, _| rng.random_range(0.2..2.0))
}

/// `‖a - b‖_F / ‖b‖_F`, with the denominator floored at `floor`.
pub fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

/// Dense inverse through LU, deliberately not the Cholesky path the library uses.
pub fn lu_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().lu().try_inverse().expect("oracle matrix is invertible")
}

/// Row-permutation matrix with `(P v)(i) = v(p(i))`.
pub fn perm_matrix(p: &PermutationMap) -> DMatrix<f64> {
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| if p.source(i) == j { 1.0 } else { 0.0 })
}

/// Posterior of the stacked state `[x_1; ..; x_M]` under the stationary AR(1)
/// prior `Cov(x_i, x_j) = ρ^|i-j| Γ`, given the first `upto` columns of `y`.
pub struct JointPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub l: usize,
}

impl JointPosterior {
    pub fn mean_block(&self, t: usize) -> DVector<f64> {
        self.mean.rows(t * self.l, self.l).into_owned()
    }

    pub fn cov_block(&self, s: usize, t: usize) -> DMatrix<f64> {
        self.cov.view((s * self.l, t * self.l), (self.l, self.l)).into_owned()
    }
}

pub fn joint_posterior(
    y: &DMatrix<f64>,
    phis: &[DMatrix<f64>],
    perms: &[PermutationMap],
    gamma: &DVector<f64>,
    rho: f64,
    sigma2: f64,
    upto: usize,
) -> JointPosterior {
    let l = gamma.len();
    let n = y.nrows();
    let m = phis.len();
    let prior = DMatrix::from_fn(l * m, l * m, |r, c| {
        let (i, a) = (r / l, r % l);
        let (j, b) = (c / l, c % l);
        if a == b { rho.powi((i as i32 - j as i32).abs()) * gamma[a] } else { 0.0 }
    });
    let mut h = DMatrix::zeros(n * upto, l * m);
    for t in 0..upto {
        let block = perm_matrix(&perms[t]) * &phis[t];
        h.view_mut((t * n, t * l), (n, l)).copy_from(&block);
    }
    let obs = DVector::from_fn(n * upto, |r, _| y[(r % n, r / n)]);
    let s = &h * &prior * h.transpose() + DMatrix::identity(n * upto, n * upto) * sigma2;
    let s_inv = lu_inverse(&s);
    let k = &prior * h.transpose() * &s_inv;
    let mean = &k * obs;
    let cov = &prior - &k * &h * &prior;
    JointPosterior { mean, cov, l }
}

/// Log-density of `N(0, C)` at `y`, through the LU determinant.
pub fn gaussian_log_density(y: &DVector<f64>, c: &DMatrix<f64>) -> f64 {
    let n = y.len() as f64;
    let det = c.clone().lu().determinant();
    let quad = (y.transpose() * lu_inverse(c) * y)[(0, 0)];
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad)
}
