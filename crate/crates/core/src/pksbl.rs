//! EM solver for AR(1)-correlated columns.
//!
//! The E-step runs a Kalman filter over the columns followed by an RTS
//! smoother and the lag-one covariance recursion; the M-step updates `γ` from
//! the smoothed second moments and the permutations from the filtered means.
//!
//! State model: `x_m = ρ x_{m-1} + u_m`, `u_m ~ N(0, (1 - ρ²) Γ)`, started
//! from `x̂_{0|0} = 0`, `Σ_{0|0} = Γ`. Observation model:
//! `y_m = P_m Φ_m x_m + n_m`.
//!
//! Indices are zero-based: column `t` here is column `t + 1` in the usual
//! one-based notation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd_equilibrated, symmetrize, SpdFactor};
use crate::model::{MeasurementMatrix, PermutationMap};
use crate::permutation::PartialMap;
use crate::pmsbl::{
    expand_anchors, full_anchors, gamma_change, initial_perms, predictors, run_pmsbl,
    update_permutations,
    EmOptions, EmState, HyperParams, InitStrategy, StopReason,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Forward, backward and lag-one quantities of one E-step.
#[derive(Debug, Clone)]
pub struct KalmanState {
    /// `x̂_{t|t-1}`.
    pub pred_mean: Vec<DVector<f64>>,
    /// `Σ_{t|t-1}`.
    pub pred_cov: Vec<DMatrix<f64>>,
    /// `x̂_{t|t}`.
    pub filt_mean: Vec<DVector<f64>>,
    /// `Σ_{t|t}`.
    pub filt_cov: Vec<DMatrix<f64>>,
    /// Kalman gain `G_t` (L×N), acting on the observations as received.
    pub gain: Vec<DMatrix<f64>>,
    /// `x̂_{t|M}`; empty until [`rts_smooth`] has run.
    pub smooth_mean: Vec<DVector<f64>>,
    /// `Σ_{t|M}`; empty until [`rts_smooth`] has run.
    pub smooth_cov: Vec<DMatrix<f64>>,
    /// `J_t = ρ Σ_{t|t} Σ_{t+1|t}⁻¹` for `t = 0..M-1`.
    pub smoother_gain: Vec<DMatrix<f64>>,
    /// `log p(Y; γ, P)` accumulated from the innovations.
    pub log_evidence: f64,
    /// Set when a predicted covariance needed diagonal jitter to be inverted.
    pub regularized: bool,
}

impl KalmanState {
    pub fn len(&self) -> usize {
        self.filt_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filt_mean.is_empty()
    }

    fn is_smoothed(&self) -> bool {
        self.smooth_mean.len() == self.filt_mean.len()
    }
}

/// Diagonals of the smoothed moment matrices entering the `γ` update:
/// `M_{1|M} = E[x_1 x_1ᵀ]` and, for `t ≥ 2`,
/// `M_{t|M} = E[(x_t - ρ x_{t-1})(x_t - ρ x_{t-1})ᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedMoments {
    pub first: DVector<f64>,
    pub transitions: Vec<DVector<f64>>,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("rho ({rho}) must lie in [0, 1]")));
    }
    Ok(())
}

/// Kalman filter over the columns of `y`.
pub fn kalman_forward(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    perms: &[PermutationMap],
    hp: &HyperParams,
    rho: f64,
    sigma2: f64,
) -> Result<KalmanState> {
    check_rho(rho)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Config(format!("sigma2 must be positive, got {sigma2}")));
    }
    let (n, m) = y.shape();
    let l = hp.len();
    phi.check(n, l, m)?;
    if perms.len() != m || perms.iter().any(|p| p.len() != n) {
        return Err(Error::Dimension("one permutation of length N per column required".into()));
    }

    let mut state = KalmanState {
        pred_mean: Vec::with_capacity(m),
        pred_cov: Vec::with_capacity(m),
        filt_mean: Vec::with_capacity(m),
        filt_cov: Vec::with_capacity(m),
        gain: Vec::with_capacity(m),
        smooth_mean: Vec::new(),
        smooth_cov: Vec::new(),
        smoother_gain: Vec::new(),
        log_evidence: 0.0,
        regularized: false,
    };
    let drive = 1.0 - rho * rho;
    let mut prev_mean = DVector::zeros(l);
    let mut prev_cov = DMatrix::from_diagonal(&hp.gamma);

    for t in 0..m {
        let x_pred = &prev_mean * rho;
        let mut s_pred = &prev_cov * (rho * rho);
        for i in 0..l {
            s_pred[(i, i)] += drive * hp.gamma[i];
        }

        let phi_t = phi.for_column(t);
        // Work in source order: Pᵀ y_t against Φ_t.
        let y_src = DVector::from_vec(perms[t].apply_transpose(y.column(t).as_slice()));
        let b = phi_t * &s_pred; // Φ Σ_pred, N×L
        let mut lambda = &b * phi_t.transpose();
        for i in 0..n {
            lambda[(i, i)] += sigma2;
        }
        symmetrize(&mut lambda);
        let factor = SpdFactor::new(lambda)?;

        let innovation = &y_src - phi_t * &x_pred;
        let l_inv = factor.l_inverse();
        let w = &l_inv * &b; // L⁻¹ Φ Σ_pred
        let e = &l_inv * &innovation;
        let x_filt = &x_pred + w.transpose() * &e;
        let mut s_filt = &s_pred - w.transpose() * &w;
        symmetrize(&mut s_filt);

        state.log_evidence += -0.5 * (n as f64 * LN_2PI + factor.ln_det() + e.norm_squared());

        // K = Σ_pred Φᵀ Λ⁻¹ in source order; G = K Pᵀ acts on received rows.
        let k_src = (l_inv.transpose() * &w).transpose();
        let gain = DMatrix::from_fn(l, n, |r, i| k_src[(r, perms[t].source(i))]);

        state.pred_mean.push(x_pred);
        state.pred_cov.push(s_pred);
        state.filt_mean.push(x_filt.clone());
        state.filt_cov.push(s_filt.clone());
        state.gain.push(gain);
        prev_mean = x_filt;
        prev_cov = s_filt;
    }
    if !state.log_evidence.is_finite() {
        return Err(Error::Numerical("log-evidence is not finite".into()));
    }
    Ok(state)
}

/// `J_t = ρ Σ_{t|t} Σ_{t+1|t}⁻¹`, computed as the transpose of
/// `ρ Σ_{t+1|t}⁻¹ Σ_{t|t}`. Returns the gain and whether jitter was needed.
fn smoother_gain(filt_cov: &DMatrix<f64>, next_pred_cov: &DMatrix<f64>, rho: f64) -> Result<(DMatrix<f64>, bool)> {
    let l = filt_cov.nrows();
    if rho == 0.0 {
        return Ok((DMatrix::zeros(l, l), false));
    }
    let (jt, jitter) = solve_spd_equilibrated(next_pred_cov, filt_cov)?;
    Ok((jt.transpose() * rho, jitter > 0.0))
}

/// RTS backward pass.
pub fn rts_smooth(mut state: KalmanState, rho: f64) -> Result<KalmanState> {
    check_rho(rho)?;
    let m = state.len();
    if m == 0 {
        return Err(Error::Dimension("empty Kalman state".into()));
    }
    let mut smooth_mean = state.filt_mean.clone();
    let mut smooth_cov = state.filt_cov.clone();
    let mut gains = Vec::with_capacity(m.saturating_sub(1));
    for t in (0..m - 1).rev() {
        let (j, jittered) = smoother_gain(&state.filt_cov[t], &state.pred_cov[t + 1], rho)?;
        state.regularized |= jittered;
        let dm = &smooth_mean[t + 1] - &state.pred_mean[t + 1];
        smooth_mean[t] = &state.filt_mean[t] + &j * dm;
        let dc = &smooth_cov[t + 1] - &state.pred_cov[t + 1];
        let mut cov = &state.filt_cov[t] + &j * dc * j.transpose();
        symmetrize(&mut cov);
        smooth_cov[t] = cov;
        gains.push(j);
    }
    gains.reverse();
    state.smooth_mean = smooth_mean;
    state.smooth_cov = smooth_cov;
    state.smoother_gain = gains;
    Ok(state)
}

/// Smoothed lag-one covariances `Σ_{t,t-1|M}` for `t = 1..M`, by the backward
/// recursion
///
/// * `Σ_{M,M-1|M} = ρ (I - G_M P_M Φ_M) Σ_{M-1|M-1}`
/// * `Σ_{t-1,t-2|M} = Σ_{t-1|t-1} J_{t-2}ᵀ + J_{t-1} (Σ_{t,t-1|M} - ρ Σ_{t-1|t-1}) J_{t-2}ᵀ`
///
/// (one-based). Entry `k` of the result is `Σ_{k+1,k|M}` in zero-based columns.
pub fn lag_one_covariances(
    state: &KalmanState,
    perms: &[PermutationMap],
    phi: &MeasurementMatrix,
    rho: f64,
) -> Result<Vec<DMatrix<f64>>> {
    check_rho(rho)?;
    let m = state.len();
    if !state.is_smoothed() || state.smoother_gain.len() + 1 != m {
        return Err(Error::Dimension("lag-one covariances need a smoothed state".into()));
    }
    if m < 2 {
        return Ok(Vec::new());
    }
    let l = state.filt_mean[0].len();
    let last = m - 1;
    let phi_last = phi.for_column(last);
    // G P Φ = K Φ with K in source order.
    let gpphi = DMatrix::from_fn(l, l, |r, c| {
        (0..perms[last].len())
            .map(|i| state.gain[last][(r, i)] * phi_last[(perms[last].source(i), c)])
            .sum()
    });
    let mut out = vec![DMatrix::zeros(l, l); m - 1];
    let id = DMatrix::<f64>::identity(l, l);
    out[last - 1] = (id - gpphi) * &state.filt_cov[last - 1] * rho;
    // out[k] = Σ_{k+1,k|M}; walk k = last-1 down to 1.
    for k in (1..last).rev() {
        let j_prev = &state.smoother_gain[k - 1];
        let j_cur = &state.smoother_gain[k];
        let inner = &out[k] - &state.filt_cov[k] * rho;
        out[k - 1] = &state.filt_cov[k] * j_prev.transpose() + j_cur * inner * j_prev.transpose();
    }
    Ok(out)
}

/// Diagonals of `Σ_{t,t-1|M}` via `Σ_{t,t-1|M} = Σ_{t|M} J_{t-1}ᵀ`, which the
/// recursion in [`lag_one_covariances`] also produces. Only the diagonal
/// enters the `γ` update, so this costs O(L²) per column instead of O(L³).
fn lag_one_diagonals(state: &KalmanState) -> Vec<DVector<f64>> {
    (1..state.len())
        .map(|t| {
            let s = &state.smooth_cov[t];
            let j = &state.smoother_gain[t - 1];
            DVector::from_fn(s.nrows(), |i, _| s.row(i).dot(&j.row(i)))
        })
        .collect()
}

/// Moment diagonals from a smoothed state and the diagonals of its lag-one
/// covariances (entry `k` is `Σ_{k+1,k|M}`).
pub fn smoothed_moments(state: &KalmanState, lag_one_diag: &[DVector<f64>], rho: f64) -> Result<SmoothedMoments> {
    let m = state.len();
    if !state.is_smoothed() || lag_one_diag.len() + 1 != m {
        return Err(Error::Dimension("moments need a smoothed state and M-1 lag-one terms".into()));
    }
    let second = |t: usize| -> DVector<f64> {
        let mean = &state.smooth_mean[t];
        DVector::from_fn(mean.len(), |i, _| state.smooth_cov[t][(i, i)] + mean[i] * mean[i])
    };
    let first = second(0);
    let mut prev = first.clone();
    let mut transitions = Vec::with_capacity(m - 1);
    for t in 1..m {
        let cur = second(t);
        let (a, b) = (&state.smooth_mean[t], &state.smooth_mean[t - 1]);
        let diag = DVector::from_fn(cur.len(), |i, _| {
            let cross = lag_one_diag[t - 1][i] + a[i] * b[i];
            (cur[i] + rho * rho * prev[i] - 2.0 * rho * cross).max(0.0)
        });
        transitions.push(diag);
        prev = cur;
    }
    Ok(SmoothedMoments { first, transitions })
}

/// `γ(l) = (1/M) (Σ_{t≥2} M_{t|M}(l,l) / (1 - ρ²) + M_{1|M}(l,l))`, floored.
pub fn gamma_from_moments(moments: &SmoothedMoments, rho: f64, floor_eps: f64) -> Result<HyperParams> {
    check_rho(rho)?;
    if rho >= 1.0 {
        return Err(Error::Unsupported("the AR γ update divides by 1 - ρ², so ρ = 1 is rejected".into()));
    }
    let m = moments.transitions.len() + 1;
    let scale = 1.0 / (1.0 - rho * rho);
    let mut gamma = moments.first.clone();
    for d in &moments.transitions {
        gamma.axpy(scale, d, 1.0);
    }
    gamma /= m as f64;
    Ok(HyperParams::new(gamma, floor_eps))
}

/// `γ` update from a smoothed state, with lag-one covariances from the
/// backward recursion.
pub fn update_gamma_ar(
    state: &KalmanState,
    perms: &[PermutationMap],
    phi: &MeasurementMatrix,
    rho: f64,
    floor_eps: f64,
) -> Result<HyperParams> {
    if rho >= 1.0 {
        return Err(Error::Unsupported("the AR γ update divides by 1 - ρ², so ρ = 1 is rejected".into()));
    }
    let lag = lag_one_covariances(state, perms, phi, rho)?;
    let diags: Vec<DVector<f64>> = lag.iter().map(|c| c.diagonal()).collect();
    gamma_from_moments(&smoothed_moments(state, &diags, rho)?, rho, floor_eps)
}

/// Options for [`run_pksbl`].
#[derive(Debug, Clone)]
pub struct KsblOptions {
    pub em: EmOptions,
    pub rho: f64,
    /// Update permutations from the smoothed means `x̂_{t|M}` instead of the
    /// filtered means `x̂_{t|t}`.
    pub perm_from_smoothed: bool,
}

impl KsblOptions {
    pub fn new(sigma2: f64, rho: f64) -> Self {
        Self { em: EmOptions::new(sigma2), rho, perm_from_smoothed: false }
    }
}

struct KalmanEStep {
    state: KalmanState,
    lag_diag: Vec<DVector<f64>>,
}

fn kalman_e_step(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    perms: &[PermutationMap],
    gamma: &HyperParams,
    rho: f64,
    sigma2: f64,
) -> Result<KalmanEStep> {
    let forward = kalman_forward(y, phi, perms, gamma, rho, sigma2)?;
    let state = rts_smooth(forward, rho)?;
    let lag_diag = lag_one_diagonals(&state);
    Ok(KalmanEStep { state, lag_diag })
}

fn columns(vs: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_columns(vs)
}

/// Runs the EM iterations for AR(1)-correlated columns.
///
/// Returns the smoothed means under the final parameters (L×M) and the EM state.
pub fn run_pksbl(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    anchors: &[PartialMap],
    opts: &KsblOptions,
) -> Result<(DMatrix<f64>, EmState)> {
    let em = &opts.em;
    em.validate()?;
    check_rho(opts.rho)?;
    if opts.rho >= 1.0 {
        return Err(Error::Unsupported("the AR γ update divides by 1 - ρ², so ρ = 1 is rejected".into()));
    }
    let (n, m) = y.shape();
    let l = phi.ncols();
    phi.check(n, l, m)?;
    let anchors = expand_anchors(anchors, n, m, em.shared_perm)?;
    let constraints: Vec<PartialMap> = if em.anchors_enforced {
        anchors.clone()
    } else {
        vec![PartialMap::empty(n); m]
    };

    let mut gamma = HyperParams::ones(l, em.floor_eps);
    // The anchored-row fit ignores the column correlation; it only seeds the
    // permutations and is far cheaper than a Kalman run on the subsystem.
    let mut perms = initial_perms(y, phi, &anchors, em.shared_perm, em.init, |y_sub, phi_sub| {
        let sub = EmOptions { init: InitStrategy::AscendingCompletion, ..em.clone() };
        run_pmsbl(y_sub, phi_sub, &[full_anchors(y_sub.nrows())], &sub).map(|(x, _)| x)
    })?;
    let mut trace = Vec::with_capacity(em.max_iter + 1);
    let mut stop = StopReason::MaxIters;
    let mut iter = 0;

    while iter < em.max_iter {
        let est = kalman_e_step(y, phi, &perms, &gamma, opts.rho, em.sigma2)?;
        trace.push(est.state.log_evidence);

        let moments = smoothed_moments(&est.state, &est.lag_diag, opts.rho)?;
        let new_gamma = gamma_from_moments(&moments, opts.rho, em.floor_eps)?;

        let means = if opts.perm_from_smoothed { &est.state.smooth_mean } else { &est.state.filt_mean };
        let v = predictors(phi, &columns(means));
        let new_perms = update_permutations(y, &v, &constraints, &perms, em.shared_perm)?;

        let change = gamma_change(&new_gamma.gamma, &gamma.gamma, em.floor_eps);
        let perms_same = new_perms == perms;
        gamma = new_gamma;
        perms = new_perms;
        iter += 1;
        if change < em.tol && perms_same {
            stop = StopReason::Tolerance;
            break;
        }
    }

    let last = kalman_e_step(y, phi, &perms, &gamma, opts.rho, em.sigma2)?;
    trace.push(last.state.log_evidence);
    let x_hat = columns(&last.state.smooth_mean);
    Ok((x_hat, EmState { iter, gamma, perms, log_evidence_trace: trace, stop }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmsbl::{posterior, DEFAULT_FLOOR_EPS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    struct Small {
        y: DMatrix<f64>,
        phi: MeasurementMatrix,
        perms: Vec<PermutationMap>,
        hp: HyperParams,
    }

    fn small(seed: u64, l: usize, n: usize, m: usize) -> Small {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = MeasurementMatrix::shared(randn(&mut rng, n, l));
        let y = randn(&mut rng, n, m);
        let perms = (0..m).map(|_| PermutationMap::random(n, &mut rng)).collect();
        let hp = HyperParams::new(DVector::from_fn(l, |_, _| rng.random_range(0.2..2.0)), DEFAULT_FLOOR_EPS);
        Small { y, phi, perms, hp }
    }

    #[test]
    fn rho_zero_filter_is_the_static_posterior() {
        let s = small(1, 6, 4, 3);
        let st = kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 0.0, 0.3).unwrap();
        for t in 0..3 {
            let yc = s.y.column(t);
            let post = posterior(yc.as_slice(), &s.phi.entries, &s.perms[t], &s.hp, 0.3).unwrap();
            assert!((&st.filt_mean[t] - &post.mu).amax() < 1e-10);
            assert!((&st.filt_cov[t] - &post.sigma).amax() < 1e-10);
        }
    }

    #[test]
    fn rho_one_prediction_keeps_covariance() {
        let s = small(2, 5, 3, 4);
        let st = kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 1.0, 0.5).unwrap();
        for t in 1..4 {
            assert_eq!(st.pred_cov[t], st.filt_cov[t - 1]);
            assert_eq!(st.pred_mean[t], st.filt_mean[t - 1]);
        }
    }

    #[test]
    fn single_column_smoothing_is_filtering() {
        let s = small(3, 5, 3, 1);
        let st = rts_smooth(kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 0.8, 0.5).unwrap(), 0.8).unwrap();
        assert_eq!(st.smooth_mean, st.filt_mean);
        assert_eq!(st.smooth_cov, st.filt_cov);
        assert!(lag_one_covariances(&st, &s.perms, &s.phi, 0.8).unwrap().is_empty());
    }

    #[test]
    fn rho_zero_smoothing_is_filtering_and_lag_one_vanishes() {
        let s = small(4, 5, 3, 4);
        let st = rts_smooth(kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 0.0, 0.5).unwrap(), 0.0).unwrap();
        assert_eq!(st.smooth_mean, st.filt_mean);
        assert_eq!(st.smooth_cov, st.filt_cov);
        for c in lag_one_covariances(&st, &s.perms, &s.phi, 0.0).unwrap() {
            assert_eq!(c.amax(), 0.0);
        }
    }

    #[test]
    fn two_columns_use_initializer_only() {
        let s = small(5, 4, 3, 2);
        let st = rts_smooth(kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 0.6, 0.4).unwrap(), 0.6).unwrap();
        let lag = lag_one_covariances(&st, &s.perms, &s.phi, 0.6).unwrap();
        assert_eq!(lag.len(), 1);
        let kphi = &st.gain[1] * s.perms[1].permute_rows(&s.phi.entries);
        let expect = (DMatrix::identity(4, 4) - kphi) * &st.filt_cov[0] * 0.6;
        assert!((&lag[0] - expect).amax() < 1e-12);
    }

    #[test]
    fn recursion_matches_gain_identity() {
        let s = small(6, 6, 4, 5);
        let st = rts_smooth(kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 0.9, 0.2).unwrap(), 0.9).unwrap();
        let lag = lag_one_covariances(&st, &s.perms, &s.phi, 0.9).unwrap();
        let diag = lag_one_diagonals(&st);
        for t in 1..5 {
            let identity = &st.smooth_cov[t] * st.smoother_gain[t - 1].transpose();
            assert!((&lag[t - 1] - &identity).amax() < 1e-10, "t = {t}");
            assert!((lag[t - 1].diagonal() - &diag[t - 1]).amax() < 1e-10);
        }
    }

    #[test]
    fn covariances_are_exactly_symmetric() {
        let s = small(7, 6, 4, 5);
        let st = rts_smooth(kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 0.95, 0.01).unwrap(), 0.95).unwrap();
        for c in st.pred_cov.iter().chain(&st.filt_cov).chain(&st.smooth_cov) {
            assert_eq!((c - c.transpose()).amax(), 0.0);
        }
    }

    #[test]
    fn rho_zero_single_column_gamma_matches_static_update() {
        let s = small(8, 5, 3, 1);
        let st = rts_smooth(kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 0.0, 0.5).unwrap(), 0.0).unwrap();
        let g = update_gamma_ar(&st, &s.perms, &s.phi, 0.0, DEFAULT_FLOOR_EPS).unwrap();
        let yc = s.y.column(0);
        let post = posterior(yc.as_slice(), &s.phi.entries, &s.perms[0], &s.hp, 0.5).unwrap();
        let expect = crate::pmsbl::update_gamma(&[post], DEFAULT_FLOOR_EPS).unwrap();
        assert!((&g.gamma - &expect.gamma).amax() < 1e-12);
    }

    #[test]
    fn zero_moments_floor_gamma() {
        let moments = SmoothedMoments { first: DVector::zeros(3), transitions: vec![DVector::zeros(3); 2] };
        let g = gamma_from_moments(&moments, 0.5, 1e-10).unwrap();
        assert!(g.gamma.iter().all(|&v| v == 1e-10));
    }

    #[test]
    fn rho_one_is_rejected_for_gamma() {
        let moments = SmoothedMoments { first: DVector::zeros(1), transitions: vec![] };
        assert!(matches!(gamma_from_moments(&moments, 1.0, 1e-12), Err(Error::Unsupported(_))));
        let s = small(9, 5, 3, 2);
        let opts = KsblOptions::new(0.1, 1.0);
        assert!(matches!(run_pksbl(&s.y, &s.phi, &[], &opts), Err(Error::Unsupported(_))));
        assert!(matches!(kalman_forward(&s.y, &s.phi, &s.perms, &s.hp, 1.2, 0.1), Err(Error::Config(_))));
    }
}
