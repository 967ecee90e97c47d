use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::SweepRow;
use super::{run_trial_with, Algorithm, SolverSettings, TrialResult};
use crate::error::{Error, Result};
use crate::model::{trial_seed, ProblemConfig};

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "anchor_fraction")]
    AnchorFraction,
    #[serde(rename = "M")]
    M,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Self::SnrDb => "snr_db",
            Self::AnchorFraction => "anchor_fraction",
            Self::M => "M",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &ProblemConfig, value: f64) -> Result<ProblemConfig> {
        let mut c = base.clone();
        match self {
            Self::SnrDb => c.snr_db = value,
            Self::AnchorFraction => c.anchor_fraction = value,
            Self::M => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::Config(format!("M axis value {value} is not a positive integer")));
                }
                c.m = value as usize;
            }
        }
        Ok(c)
    }
}

/// A grid of trials: every `(value, algorithm)` pair runs `trials` trials.
///
/// Trial `t` uses seed `trial_seed(master_seed, t)` for every value and
/// algorithm, so all curves see the same problem draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ProblemConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn default_trials() -> usize {
    200
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms given".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("axis values must be finite".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("axis values must be strictly increasing".into()));
        }
        if self.solver.max_iter == 0 || !(self.solver.tol > 0.0) {
            return Err(Error::Config("solver needs max_iter >= 1 and tol > 0".into()));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v)?.validate()?;
        }
        Ok(())
    }
}

/// Runs every trial of `spec` on up to `workers` threads and aggregates per
/// `(value, algorithm)` in grid order.
///
/// Trials are collected by index and reduced sequentially, so the table does
/// not depend on `workers`. Failed trials are left out of the means and
/// counted; more than 1% failures overall is an error.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let configs = spec
        .values
        .iter()
        .map(|&v| spec.axis.apply(&spec.base, v))
        .collect::<Result<Vec<_>>>()?;
    let n_alg = spec.algorithms.len();
    let units = configs.len() * n_alg * spec.trials;

    let run_unit = |u: usize| -> Option<TrialResult> {
        let trial = u % spec.trials;
        let alg = spec.algorithms[(u / spec.trials) % n_alg];
        let config = &configs[u / (spec.trials * n_alg)];
        run_trial_with(config, alg, trial_seed(spec.master_seed, trial as u64), &spec.solver).ok()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Option<TrialResult>> = pool.install(|| (0..units).into_par_iter().map(run_unit).collect());

    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed * 100 > units {
        return Err(Error::FailureBudget { failed, total: units });
    }

    let rows = results
        .chunks(spec.trials)
        .enumerate()
        .map(|(k, chunk)| {
            let value = spec.values[k / n_alg];
            let algorithm = spec.algorithms[k % n_alg];
            aggregate(spec.axis, algorithm, value, chunk)
        })
        .collect();
    Ok(rows)
}

fn aggregate(axis: Axis, algorithm: Algorithm, value: f64, trials: &[Option<TrialResult>]) -> SweepRow {
    let ok: Vec<&TrialResult> = trials.iter().flatten().collect();
    let count = ok.len() as f64;
    let mean = |f: &dyn Fn(&TrialResult) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / count
        }
    };
    SweepRow {
        axis: axis.name().to_string(),
        algorithm,
        value,
        nmse_db: mean(&|r| r.nmse_db),
        success_rate: mean(&|r| f64::from(u8::from(r.perm_exact))),
        row_accuracy: mean(&|r| r.row_accuracy),
        trials: trials.len(),
        failures: trials.len() - ok.len(),
    }
}
