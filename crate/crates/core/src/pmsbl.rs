//! EM solver for independent columns: Gaussian posterior E-step, closed-form
//! `γ` update and rearrangement-based permutation update.
//!
//! With `Λ = σ²I + PΦΓΦᵀPᵀ` the posterior of column `m` is
//!
//! * `Σ_m = Γ - ΓΦᵀPᵀ Λ⁻¹ PΦΓ`
//! * `μ_m = σ⁻² Σ_m Φᵀ Pᵀ y_m = ΓΦᵀPᵀ Λ⁻¹ y_m`
//!
//! Because `P` is orthogonal, `Λ_m = P Λ₀ Pᵀ` with `Λ₀ = σ²I + ΦΓΦᵀ`, so the
//! solver factors the N×N matrix `Λ₀` once per iteration and applies the
//! permutation to the observations instead (`Pᵀ y_m`). `Σ_m` does not depend
//! on the permutation at all.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, SpdFactor};
use crate::model::{MeasurementMatrix, PermutationMap};
use crate::permutation::{
    constrained_rearrangement_argmax, select_shared_permutation, PartialMap, PermObjective,
};

pub const DEFAULT_FLOOR_EPS: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;

/// A row counts as active when its `γ` exceeds both `SUPPORT_RATIO · floor_eps`
/// and `max γ / SUPPORT_RATIO`.
pub const SUPPORT_RATIO: f64 = 1e3;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Prior variances `γ` (the diagonal of `Γ`), clamped below at `floor_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub gamma: DVector<f64>,
    pub floor_eps: f64,
}

impl HyperParams {
    /// The non-informative start `γ = 1`.
    pub fn ones(l: usize, floor_eps: f64) -> Self {
        Self { gamma: DVector::from_element(l, 1.0), floor_eps }
    }

    /// Wraps `gamma`, clamping every entry to at least `floor_eps`.
    pub fn new(mut gamma: DVector<f64>, floor_eps: f64) -> Self {
        for g in gamma.iter_mut() {
            if !(*g >= floor_eps) {
                *g = floor_eps;
            }
        }
        Self { gamma, floor_eps }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Rows whose `γ` exceeds `SUPPORT_RATIO · floor_eps` and lies within a
    /// factor `SUPPORT_RATIO` of the largest `γ`. EM shrinks inactive rows
    /// only slowly, so the relative bound is the one that usually binds.
    pub fn support(&self) -> Vec<usize> {
        let largest = self.gamma.iter().copied().fold(0.0, f64::max);
        let threshold = (SUPPORT_RATIO * self.floor_eps).max(largest / SUPPORT_RATIO);
        (0..self.gamma.len()).filter(|&l| self.gamma[l] > threshold).collect()
    }
}

/// Posterior mean and covariance of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStats {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Why the EM loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative `γ` change below tolerance with unchanged permutations.
    Tolerance,
    MaxIters,
}

/// Final state of an EM run.
#[derive(Debug, Clone)]
pub struct EmState {
    /// Number of completed M-steps.
    pub iter: usize,
    pub gamma: HyperParams,
    pub perms: Vec<PermutationMap>,
    /// Log-evidence at every visited parameter pair, starting at the initial one.
    pub log_evidence_trace: Vec<f64>,
    pub stop: StopReason,
}

impl EmState {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Tolerance
    }
}

/// How the starting permutations are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Estimate `X` from the anchored rows alone (their sources are known),
    /// then take one permutation M-step against all rows.
    #[default]
    AnchorSubsystem,
    /// Anchors completed by pairing free observations and free sources in
    /// ascending index order.
    AscendingCompletion,
}

/// Options shared by both EM solvers.
#[derive(Debug, Clone)]
pub struct EmOptions {
    /// Known noise variance.
    pub sigma2: f64,
    /// One permutation for all columns.
    pub shared_perm: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub floor_eps: f64,
    /// Keep anchor assignments fixed in every permutation update, not only at
    /// initialization.
    pub anchors_enforced: bool,
    pub init: InitStrategy,
}

impl EmOptions {
    pub fn new(sigma2: f64) -> Self {
        Self {
            sigma2,
            shared_perm: true,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            floor_eps: DEFAULT_FLOOR_EPS,
            anchors_enforced: true,
            init: InitStrategy::default(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Config(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.floor_eps > 0.0) {
            return Err(Error::Config("floor_eps must be positive".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// `Λ₀ = σ²I + ΦΓΦᵀ`, factored.
fn factor_lambda(phi: &DMatrix<f64>, gamma: &DVector<f64>, sigma2: f64) -> Result<SpdFactor> {
    let mut scaled = phi.clone();
    for (l, mut col) in scaled.column_iter_mut().enumerate() {
        col *= gamma[l];
    }
    let mut lambda = scaled * phi.transpose();
    for i in 0..lambda.nrows() {
        lambda[(i, i)] += sigma2;
    }
    symmetrize(&mut lambda);
    SpdFactor::new(lambda)
}

fn check_column_inputs(y_m: &[f64], phi: &DMatrix<f64>, perm: &PermutationMap, hp: &HyperParams) -> Result<()> {
    let (n, l) = phi.shape();
    if y_m.len() != n || perm.len() != n {
        return Err(Error::Dimension(format!(
            "observation length {} / permutation length {} do not match N = {n}",
            y_m.len(),
            perm.len()
        )));
    }
    if hp.len() != l {
        return Err(Error::Dimension(format!("γ has length {}, expected L = {l}", hp.len())));
    }
    Ok(())
}

/// Posterior `N(μ, Σ)` of one column given `γ`, the permutation and `σ²`.
pub fn posterior(
    y_m: &[f64],
    phi: &DMatrix<f64>,
    perm: &PermutationMap,
    hp: &HyperParams,
    sigma2: f64,
) -> Result<PosteriorStats> {
    check_column_inputs(y_m, phi, perm, hp)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Config(format!("sigma2 must be positive, got {sigma2}")));
    }
    let factor = factor_lambda(phi, &hp.gamma, sigma2)?;
    // W = L⁻¹ Φ Γ, so that ΓΦᵀΛ⁻¹ΦΓ = WᵀW.
    let mut w = factor.solve_lower(phi);
    for (l, mut col) in w.column_iter_mut().enumerate() {
        col *= hp.gamma[l];
    }
    let mut sigma = DMatrix::from_diagonal(&hp.gamma) - w.transpose() * &w;
    symmetrize(&mut sigma);

    let y_src = DVector::from_vec(perm.apply_transpose(y_m));
    let z = factor.solve_vec(&y_src);
    let mu = (phi.transpose() * z).component_mul(&hp.gamma);
    Ok(PosteriorStats { mu, sigma })
}

/// `γ(l) = (1/M) Σ_m (Σ_m(l,l) + μ_m(l)²)`, floored.
pub fn update_gamma(stats: &[PosteriorStats], floor_eps: f64) -> Result<HyperParams> {
    let first = stats.first().ok_or_else(|| Error::Dimension("no posterior columns".into()))?;
    let l = first.mu.len();
    let mut gamma = DVector::zeros(l);
    for s in stats {
        if s.mu.len() != l || s.sigma.shape() != (l, l) {
            return Err(Error::Dimension("posterior columns differ in dimension".into()));
        }
        for i in 0..l {
            gamma[i] += s.sigma[(i, i)] + s.mu[i] * s.mu[i];
        }
    }
    gamma /= stats.len() as f64;
    Ok(HyperParams::new(gamma, floor_eps))
}

fn check_block(y: &DMatrix<f64>, phi: &MeasurementMatrix, perms: &[PermutationMap], l: usize) -> Result<()> {
    let (n, m) = y.shape();
    phi.check(n, l, m)?;
    if perms.len() != m {
        return Err(Error::Dimension(format!("{} permutations for {m} columns", perms.len())));
    }
    if perms.iter().any(|p| p.len() != n) {
        return Err(Error::Dimension("permutation length differs from N".into()));
    }
    Ok(())
}

/// `log p(Y; γ, P) = Σ_m -½ (N ln 2π + ln det Λ_m + y_mᵀ Λ_m⁻¹ y_m)`.
pub fn log_evidence(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    perms: &[PermutationMap],
    hp: &HyperParams,
    sigma2: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Config(format!("sigma2 must be positive, got {sigma2}")));
    }
    check_block(y, phi, perms, hp.len())?;
    Ok(e_step(y, phi, perms, &hp.gamma, sigma2)?.log_evidence)
}

/// Batched E-step output: posterior means, posterior variances and evidence.
pub(crate) struct EStep {
    /// μ_m as columns (L×M).
    pub mu: DMatrix<f64>,
    /// diag Σ_m as columns (L×M).
    pub var: DMatrix<f64>,
    pub log_evidence: f64,
}

pub(crate) fn e_step(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    perms: &[PermutationMap],
    gamma: &DVector<f64>,
    sigma2: f64,
) -> Result<EStep> {
    let (n, m) = y.shape();
    let l = gamma.len();
    let y_src = unpermute(y, perms);
    let mut mu = DMatrix::zeros(l, m);
    let mut var = DMatrix::zeros(l, m);
    let mut log_evidence = 0.0;

    let mut run = |cols: &[usize], phi_m: &DMatrix<f64>| -> Result<()> {
        let factor = factor_lambda(phi_m, gamma, sigma2)?;
        let w = factor.solve_lower(phi_m);
        let diag: DVector<f64> = DVector::from_fn(l, |j, _| {
            let g = gamma[j];
            (g - g * g * w.column(j).norm_squared()).max(0.0)
        });
        let ln_det = factor.ln_det();
        let block = y_src.select_columns(cols);
        let z = factor.solve(&block);
        let mut mu_block = phi_m.transpose() * &z;
        for (row, &g) in gamma.iter().enumerate() {
            mu_block.row_mut(row).scale_mut(g);
        }
        for (k, &c) in cols.iter().enumerate() {
            mu.set_column(c, &mu_block.column(k));
            var.set_column(c, &diag);
            let quad = block.column(k).dot(&z.column(k));
            log_evidence += -0.5 * (n as f64 * LN_2PI + ln_det + quad);
        }
        Ok(())
    };

    if phi.is_shared() {
        let all: Vec<usize> = (0..m).collect();
        run(&all, &phi.entries)?;
    } else {
        for c in 0..m {
            run(&[c], phi.for_column(c))?;
        }
    }
    if !log_evidence.is_finite() {
        return Err(Error::Numerical("log-evidence is not finite".into()));
    }
    Ok(EStep { mu, var, log_evidence })
}

/// Columns `Pᵀ_m y_m` (observations returned to source order).
pub(crate) fn unpermute(y: &DMatrix<f64>, perms: &[PermutationMap]) -> DMatrix<f64> {
    let (n, m) = y.shape();
    let mut out = DMatrix::zeros(n, m);
    for c in 0..m {
        let src = perms[c].apply_transpose(y.column(c).as_slice());
        out.column_mut(c).copy_from_slice(&src);
    }
    out
}

/// Predictors `Φ_m x_m` for the columns of `x` (N×M).
pub(crate) fn predictors(phi: &MeasurementMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    if phi.is_shared() {
        &phi.entries * x
    } else {
        let mut out = DMatrix::zeros(phi.nrows(), x.ncols());
        for c in 0..x.ncols() {
            out.set_column(c, &(phi.for_column(c) * x.column(c)));
        }
        out
    }
}

/// Anchor maps per column, expanded from one shared map or validated per column.
pub(crate) fn expand_anchors(anchors: &[PartialMap], n: usize, m: usize, shared: bool) -> Result<Vec<PartialMap>> {
    let per_column: Vec<PartialMap> = match anchors.len() {
        0 => vec![PartialMap::empty(n); m],
        1 => vec![anchors[0].clone(); m],
        k if k == m => anchors.to_vec(),
        k => return Err(Error::Dimension(format!("{k} anchor maps for {m} columns"))),
    };
    if per_column.iter().any(|a| a.len() != n) {
        return Err(Error::Dimension("anchor map length differs from N".into()));
    }
    if shared && per_column.iter().any(|a| a != &per_column[0]) {
        return Err(Error::InvalidAnchor("shared permutation with differing anchor maps".into()));
    }
    Ok(per_column)
}

/// Permutation M-step shared by both solvers: per-column constrained optima,
/// or the best shared candidate.
pub(crate) fn update_permutations(
    y: &DMatrix<f64>,
    v: &DMatrix<f64>,
    constraints: &[PartialMap],
    current: &[PermutationMap],
    shared: bool,
) -> Result<Vec<PermutationMap>> {
    let m = y.ncols();
    if shared {
        let p = select_shared_permutation(y, v, &constraints[0], &current[0])?;
        Ok(vec![p; m])
    } else {
        (0..m)
            .map(|c| {
                let (yc, vc) = (y.column(c), v.column(c));
                let obj = PermObjective::new(yc.as_slice(), vc.as_slice())?;
                constrained_rearrangement_argmax(&obj, &constraints[c])
            })
            .collect()
    }
}

/// Observations whose source is known in every column, as a standalone
/// problem with the identity permutation.
pub(crate) fn anchor_subsystem(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    anchors: &[PartialMap],
) -> Option<(DMatrix<f64>, MeasurementMatrix)> {
    let (n, m) = y.shape();
    let rows: Vec<usize> = (0..n).filter(|&i| anchors[0].get(i).is_some()).collect();
    if rows.is_empty() || anchors.iter().any(|a| (0..n).any(|i| a.get(i).is_some() != anchors[0].get(i).is_some())) {
        return None;
    }
    let y_sub = y.select_rows(&rows);
    let sources = |a: &PartialMap| -> Vec<usize> { rows.iter().map(|&i| a.get(i).unwrap()).collect() };
    let phi_sub = if phi.is_shared() && anchors.iter().all(|a| a == &anchors[0]) {
        MeasurementMatrix::shared(phi.entries.select_rows(&sources(&anchors[0])))
    } else {
        let list = (0..m).map(|c| phi.for_column(c).select_rows(&sources(&anchors[c]))).collect();
        MeasurementMatrix::time_varying(list).ok()?
    };
    Some((y_sub, phi_sub))
}

/// Starting permutations per [`InitStrategy`].
///
/// `solve_subsystem` estimates `X` (L×M) from the anchored rows.
pub(crate) fn initial_perms<F>(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    anchors: &[PartialMap],
    shared: bool,
    init: InitStrategy,
    solve_subsystem: F,
) -> Result<Vec<PermutationMap>>
where
    F: FnOnce(&DMatrix<f64>, &MeasurementMatrix) -> Result<DMatrix<f64>>,
{
    let completed: Vec<PermutationMap> = anchors.iter().map(PartialMap::complete_ascending).collect();
    let n = y.nrows();
    let fully_anchored = anchors.iter().all(|a| a.anchored_count() == n);
    if init == InitStrategy::AscendingCompletion || fully_anchored {
        return Ok(completed);
    }
    let Some((y_sub, phi_sub)) = anchor_subsystem(y, phi, anchors) else {
        return Ok(completed);
    };
    let x0 = solve_subsystem(&y_sub, &phi_sub)?;
    let v = predictors(phi, &x0);
    update_permutations(y, &v, anchors, &completed, shared)
}

/// Identity anchors covering all `b` rows of a subsystem.
pub(crate) fn full_anchors(b: usize) -> PartialMap {
    PartialMap::new((0..b).map(Some).collect()).expect("identity is injective")
}

/// `max |γ' - γ| / max(max γ, floor)`.
pub(crate) fn gamma_change(new: &DVector<f64>, old: &DVector<f64>, floor: f64) -> f64 {
    let scale = old.amax().max(floor);
    (new - old).amax() / scale
}

/// Runs the EM iterations for independent columns.
///
/// Starts from `γ = 1` and the anchor maps completed in ascending index order.
/// Returns the posterior means under the final parameters (L×M) and the EM
/// state.
pub fn run_pmsbl(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    anchors: &[PartialMap],
    opts: &EmOptions,
) -> Result<(DMatrix<f64>, EmState)> {
    opts.validate()?;
    let (n, m) = y.shape();
    let l = phi.ncols();
    phi.check(n, l, m)?;
    let anchors = expand_anchors(anchors, n, m, opts.shared_perm)?;
    let constraints: Vec<PartialMap> = if opts.anchors_enforced {
        anchors.clone()
    } else {
        vec![PartialMap::empty(n); m]
    };

    let mut gamma = HyperParams::ones(l, opts.floor_eps);
    let mut perms = initial_perms(y, phi, &anchors, opts.shared_perm, opts.init, |y_sub, phi_sub| {
        let sub_opts = EmOptions { init: InitStrategy::AscendingCompletion, ..opts.clone() };
        run_pmsbl(y_sub, phi_sub, &[full_anchors(y_sub.nrows())], &sub_opts).map(|(x, _)| x)
    })?;
    let mut trace = Vec::with_capacity(opts.max_iter + 1);
    let mut stop = StopReason::MaxIters;
    let mut iter = 0;

    while iter < opts.max_iter {
        let est = e_step(y, phi, &perms, &gamma.gamma, opts.sigma2)?;
        trace.push(est.log_evidence);

        let mut second = est.var;
        second += est.mu.component_mul(&est.mu);
        let new_gamma = HyperParams::new(second.column_mean(), opts.floor_eps);

        let v = predictors(phi, &est.mu);
        let new_perms = update_permutations(y, &v, &constraints, &perms, opts.shared_perm)?;

        let change = gamma_change(&new_gamma.gamma, &gamma.gamma, opts.floor_eps);
        let perms_same = new_perms == perms;
        gamma = new_gamma;
        perms = new_perms;
        iter += 1;
        if change < opts.tol && perms_same {
            stop = StopReason::Tolerance;
            break;
        }
    }

    let last = e_step(y, phi, &perms, &gamma.gamma, opts.sigma2)?;
    trace.push(last.log_evidence);
    Ok((last.mu, EmState { iter, gamma, perms, log_evidence_trace: trace, stop }))
}
