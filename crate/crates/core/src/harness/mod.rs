//! Seeded Monte Carlo trials: generate an instance, solve it, score it.

mod sweep;
mod table;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gen_problem, PermutationMap, ProblemConfig, ProblemInstance};
use crate::pksbl::{run_pksbl, KsblOptions};
use crate::pmsbl::{run_pmsbl, EmOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::somp::run_somp;

pub use sweep::{run_sweep, Axis, SweepSpec};
pub use table::{emit_plot_data, parse_csv, to_csv_string, write_csv, SweepRow, CSV_HEADER};

/// Solver under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// P-MSBL with one permutation for all columns.
    #[serde(rename = "pmsbl-shared")]
    PmsblShared,
    /// P-MSBL with one permutation per column.
    #[serde(rename = "pmsbl-indep")]
    PmsblIndep,
    /// P-KSBL with the AR coefficient of the generating config.
    #[serde(rename = "pksbl")]
    Pksbl,
    /// S-OMP on the anchored rows followed by one permutation step.
    #[serde(rename = "somp")]
    Somp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::PmsblShared, Self::PmsblIndep, Self::Pksbl, Self::Somp];

    pub fn name(self) -> &'static str {
        match self {
            Self::PmsblShared => "pmsbl-shared",
            Self::PmsblIndep => "pmsbl-indep",
            Self::Pksbl => "pksbl",
            Self::Somp => "somp",
        }
    }

    /// The permutation model both generated and assumed for a trial. The
    /// P-MSBL variants fix it; the others follow the config.
    pub fn shared_perm(self, config: &ProblemConfig) -> bool {
        match self {
            Self::PmsblShared => true,
            Self::PmsblIndep => false,
            Self::Pksbl | Self::Somp => config.shared_perm,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Iteration controls shared by the EM solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub anchors_enforced: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL, anchors_enforced: true }
    }
}

/// Estimates returned by [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub x_hat: DMatrix<f64>,
    pub perms: Vec<PermutationMap>,
    pub iters: usize,
    /// Empty for S-OMP.
    pub log_evidence_trace: Vec<f64>,
}

/// Runs `algorithm` on `inst`, assuming a shared permutation iff `shared`.
/// P-KSBL uses `rho`.
pub fn solve(
    inst: &ProblemInstance,
    algorithm: Algorithm,
    shared: bool,
    rho: f64,
    settings: &SolverSettings,
) -> Result<Solution> {
    let anchors = inst.anchor_maps();
    let em = EmOptions {
        shared_perm: shared,
        max_iter: settings.max_iter,
        tol: settings.tol,
        anchors_enforced: settings.anchors_enforced,
        ..EmOptions::new(inst.noise.sigma2)
    };
    match algorithm {
        Algorithm::PmsblShared | Algorithm::PmsblIndep => {
            let (x_hat, st) = run_pmsbl(&inst.y, &inst.phi, &anchors, &em)?;
            Ok(Solution { x_hat, perms: st.perms, iters: st.iter, log_evidence_trace: st.log_evidence_trace })
        }
        Algorithm::Pksbl => {
            let opts = KsblOptions { em, ..KsblOptions::new(inst.noise.sigma2, rho) };
            let (x_hat, st) = run_pksbl(&inst.y, &inst.phi, &anchors, &opts)?;
            Ok(Solution { x_hat, perms: st.perms, iters: st.iter, log_evidence_trace: st.log_evidence_trace })
        }
        Algorithm::Somp => {
            let r = run_somp(&inst.y, &inst.phi, &anchors, inst.config.k, shared)?;
            Ok(Solution { x_hat: r.x_hat, perms: r.perms_est, iters: r.support_est.len(), log_evidence_trace: Vec::new() })
        }
    }
}

/// Scores of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// `‖X̂ - X‖_F² / ‖X‖_F²`.
    pub nmse: f64,
    pub nmse_db: f64,
    /// Every estimated map equals the true one.
    pub perm_exact: bool,
    /// Fraction of non-anchored rows mapped to the right source, over all
    /// columns. 1 when every row is anchored.
    pub row_accuracy: f64,
    pub iters: usize,
    /// Seconds. Not part of any aggregate.
    pub wall_time: f64,
}

/// Scores `estimate` against the ground truth of `inst`.
pub fn score(inst: &ProblemInstance, x_hat: &DMatrix<f64>, perms: &[PermutationMap]) -> Result<(f64, bool, f64)> {
    let x = &inst.x_true.entries;
    if x_hat.shape() != x.shape() || perms.len() != inst.perms_true.len() {
        return Err(Error::Dimension("estimate does not match the instance".into()));
    }
    let nmse = (x_hat - x).norm_squared() / x.norm_squared();
    let perm_exact = perms == inst.perms_true.as_slice();
    let n = inst.config.n;
    let mut anchored = vec![false; n];
    for &a in &inst.anchors {
        anchored[a] = true;
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (est, truth) in perms.iter().zip(&inst.perms_true) {
        for i in (0..n).filter(|&i| !anchored[i]) {
            total += 1;
            hit += usize::from(est.source(i) == truth.source(i));
        }
    }
    let row_accuracy = if total == 0 { 1.0 } else { hit as f64 / total as f64 };
    Ok((nmse, perm_exact, row_accuracy))
}

/// Generates the instance of `config` with seed `trial_seed`, solves it and
/// scores it. The permutation model comes from [`Algorithm::shared_perm`].
pub fn run_trial(config: &ProblemConfig, algorithm: Algorithm, trial_seed: u64) -> Result<TrialResult> {
    run_trial_with(config, algorithm, trial_seed, &SolverSettings::default())
}

pub fn run_trial_with(
    config: &ProblemConfig,
    algorithm: Algorithm,
    trial_seed: u64,
    settings: &SolverSettings,
) -> Result<TrialResult> {
    let shared = algorithm.shared_perm(config);
    let config = ProblemConfig { seed: trial_seed, shared_perm: shared, ..config.clone() };
    let inst = gen_problem(&config)?;
    let start = Instant::now();
    let sol = solve(&inst, algorithm, shared, config.rho, settings)?;
    let wall_time = start.elapsed().as_secs_f64();
    let (nmse, perm_exact, row_accuracy) = score(&inst, &sol.x_hat, &sol.perms)?;
    if !nmse.is_finite() {
        return Err(Error::Numerical("estimate is not finite".into()));
    }
    Ok(TrialResult { nmse, nmse_db: 10.0 * nmse.log10(), perm_exact, row_accuracy, iters: sol.iters, wall_time })
}
