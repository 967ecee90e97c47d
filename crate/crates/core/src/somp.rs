//! Simultaneous orthogonal matching pursuit on the anchored rows, followed by
//! a single permutation M-step. This is the two-stage baseline: the signal is
//! estimated from rows whose sources are known, then the permutation is read
//! off once, with no joint refinement.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{MeasurementMatrix, PermutationMap};
use crate::permutation::{constrained_rearrangement_argmax, select_shared_permutation, PartialMap, PermObjective};
use crate::pmsbl::{anchor_subsystem, expand_anchors, predictors};

/// Baseline output.
#[derive(Debug, Clone)]
pub struct SompResult {
    /// Selected rows, in selection order.
    pub support_est: Vec<usize>,
    /// L×M estimate, zero off the selected rows.
    pub x_hat: DMatrix<f64>,
    pub perms_est: Vec<PermutationMap>,
    /// The least-squares refit was rank deficient at some step.
    pub rank_deficient: bool,
}

/// S-OMP support and coefficients.
#[derive(Debug, Clone)]
pub struct SompFit {
    pub support: Vec<usize>,
    pub x_hat: DMatrix<f64>,
    pub rank_deficient: bool,
}

/// Greedy S-OMP on `y` (B×M) with dictionaries `dicts` (one B×L matrix shared
/// by all columns, or one per column).
///
/// Each step picks the atom maximizing `Σ_m |⟨r_m, φ_l⟩| / ‖φ_l‖`, refits
/// every column by least squares on the support and updates the residuals.
/// Stops after `min(k_max, B)` atoms, or early when all residuals vanish.
pub fn somp_recover(y: &DMatrix<f64>, dicts: &MeasurementMatrix, k_max: usize) -> Result<SompFit> {
    let (b, m) = y.shape();
    if b == 0 {
        return Err(Error::Dimension("S-OMP needs at least one row".into()));
    }
    let l = dicts.ncols();
    dicts.check(b, l, m)?;

    let col_norms: Vec<DVector<f64>> = (0..if dicts.is_shared() { 1 } else { m })
        .map(|c| {
            let d = dicts.for_column(c);
            DVector::from_fn(l, |j, _| d.column(j).norm())
        })
        .collect();
    let norm_of = |c: usize| if dicts.is_shared() { &col_norms[0] } else { &col_norms[c] };

    let scale = y.amax().max(f64::MIN_POSITIVE);
    let mut residual = y.clone();
    let mut support: Vec<usize> = Vec::new();
    let mut coeffs = DMatrix::zeros(0, m);
    let mut rank_deficient = false;
    let steps = k_max.min(b);

    while support.len() < steps {
        if residual.amax() <= 1e-14 * scale {
            break;
        }
        let mut score = DVector::zeros(l);
        for c in 0..m {
            let corr = dicts.for_column(c).transpose() * residual.column(c);
            let norms = norm_of(c);
            for j in 0..l {
                if norms[j] > 0.0 {
                    score[j] += corr[j].abs() / norms[j];
                }
            }
        }
        for &s in &support {
            score[s] = f64::NEG_INFINITY;
        }
        let (best, best_score) = score
            .iter()
            .enumerate()
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        if best == usize::MAX || !(best_score > 0.0) {
            break;
        }
        support.push(best);

        coeffs = DMatrix::zeros(support.len(), m);
        for c in 0..m {
            let sub = dicts.for_column(c).select_columns(&support);
            let (x, deficient) = least_squares(&sub, &y.column(c).into_owned());
            rank_deficient |= deficient;
            coeffs.set_column(c, &x);
            let r = y.column(c) - &sub * x;
            residual.set_column(c, &r);
        }
    }

    let mut x_hat = DMatrix::zeros(l, m);
    for (k, &row) in support.iter().enumerate() {
        x_hat.set_row(row, &coeffs.row(k));
    }
    Ok(SompFit { support, x_hat, rank_deficient })
}

/// Minimum-norm least squares through the SVD. Reports rank deficiency.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    let deficient = svd.singular_values.iter().any(|&s| s <= eps);
    let x = svd.solve(b, eps).expect("both singular vector sets were computed");
    (x, deficient)
}

/// One permutation M-step from a fixed estimate `x_hat`.
///
/// Per column the constrained rearrangement optimum on `(y_m, Φ x̂_m)`; with a
/// shared permutation the best candidate against the anchors completed in
/// ascending order.
pub fn one_shot_perm(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    x_hat: &DMatrix<f64>,
    anchors: &[PartialMap],
    shared: bool,
) -> Result<Vec<PermutationMap>> {
    let (n, m) = y.shape();
    phi.check(n, x_hat.nrows(), m)?;
    if x_hat.ncols() != m {
        return Err(Error::Dimension("estimate and observations differ in column count".into()));
    }
    let anchors = expand_anchors(anchors, n, m, shared)?;
    let v = predictors(phi, x_hat);
    if shared {
        let incumbent = anchors[0].complete_ascending();
        let p = select_shared_permutation(y, &v, &anchors[0], &incumbent)?;
        Ok(vec![p; m])
    } else {
        (0..m)
            .map(|c| {
                let (yc, vc) = (y.column(c), v.column(c));
                constrained_rearrangement_argmax(&PermObjective::new(yc.as_slice(), vc.as_slice())?, &anchors[c])
            })
            .collect()
    }
}

/// Full baseline: S-OMP on the anchored rows, then [`one_shot_perm`].
///
/// Without anchored rows the estimate is zero.
pub fn run_somp(
    y: &DMatrix<f64>,
    phi: &MeasurementMatrix,
    anchors: &[PartialMap],
    k_max: usize,
    shared: bool,
) -> Result<SompResult> {
    let (n, m) = y.shape();
    let l = phi.ncols();
    phi.check(n, l, m)?;
    let expanded = expand_anchors(anchors, n, m, shared)?;
    let fit = match anchor_subsystem(y, phi, &expanded) {
        Some((y_sub, phi_sub)) => somp_recover(&y_sub, &phi_sub, k_max)?,
        None => SompFit { support: Vec::new(), x_hat: DMatrix::zeros(l, m), rank_deficient: false },
    };
    let perms_est = one_shot_perm(y, phi, &fit.x_hat, &expanded, shared)?;
    Ok(SompResult { support_est: fit.support, x_hat: fit.x_hat, perms_est, rank_deficient: fit.rank_deficient })
}
