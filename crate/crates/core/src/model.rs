//! Data model of the unlabeled-sensing MMV problem and its synthetic generator.
//!
//! Observation model, column by column:
//!
//! `y_m = P_m Φ x_m + n_m`, `n_m ~ N(0, σ² I_N)`
//!
//! with `X = [x_1 .. x_M]` sharing a support of `K` rows and, for a nonzero AR
//! coefficient `ρ`, `x_{m+1} = ρ x_m + u_{m+1}` with `u ~ N(0, (1 - ρ²) I)` on
//! the support. Every generated quantity is a pure function of the config seed.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::PartialMap;

/// Dimensions and parameters of one synthetic problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// Signal dimension.
    #[serde(rename = "L")]
    pub l: usize,
    /// Observation dimension.
    #[serde(rename = "N")]
    pub n: usize,
    /// Number of measurement columns.
    #[serde(rename = "M")]
    pub m: usize,
    /// Row sparsity.
    #[serde(rename = "K")]
    pub k: usize,
    /// AR(1) coefficient between adjacent columns.
    #[serde(default)]
    pub rho: f64,
    pub snr_db: f64,
    /// Fraction of observation rows whose source row is known.
    #[serde(default)]
    pub anchor_fraction: f64,
    /// All columns share one permutation.
    #[serde(default = "default_true")]
    pub shared_perm: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl Default for ProblemConfig {
    /// The simulation setup with `L = 100`, `N = 30`, `K = 4`, `M = 20` at 60 dB.
    fn default() -> Self {
        Self {
            l: 100,
            n: 30,
            m: 20,
            k: 4,
            rho: 0.0,
            snr_db: 60.0,
            anchor_fraction: 0.5,
            shared_perm: true,
            seed: 0,
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be positive".into()));
        }
        if self.k > self.n {
            return Err(Error::Config(format!("K ({}) must not exceed N ({})", self.k, self.n)));
        }
        if self.n >= self.l {
            return Err(Error::Config(format!("N ({}) must be smaller than L ({})", self.n, self.l)));
        }
        if self.m == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho ({}) must lie in [0, 1]", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.anchor_fraction) {
            return Err(Error::Config(format!(
                "anchor_fraction ({}) must lie in [0, 1]",
                self.anchor_fraction
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config("snr_db must be finite".into()));
        }
        Ok(())
    }

    /// Number of anchored observation rows, `⌈anchor_fraction · N⌉`.
    pub fn anchor_count(&self) -> usize {
        anchor_count(self.anchor_fraction, self.n)
    }

    /// Anchored observation indices: the lowest `anchor_count()` indices.
    pub fn anchor_indices(&self) -> Vec<usize> {
        (0..self.anchor_count()).collect()
    }
}

/// `⌈fraction · n⌉`, with the product snapped to the nearest integer first so
/// that e.g. `0.3 · 30` gives 9 rather than 10.
pub fn anchor_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let snapped = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw.ceil() };
    (snapped.max(0.0) as usize).min(n)
}

/// Measurement matrix `Φ` (N×L), optionally one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub entries: DMatrix<f64>,
    pub per_column: Option<Vec<DMatrix<f64>>>,
}

impl MeasurementMatrix {
    pub fn shared(entries: DMatrix<f64>) -> Self {
        Self { entries, per_column: None }
    }

    /// Time-varying matrices; `entries` is set to the first one.
    pub fn time_varying(per_column: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = per_column
            .first()
            .ok_or_else(|| Error::Dimension("per-column measurement list is empty".into()))?;
        let shape = first.shape();
        if per_column.iter().any(|p| p.shape() != shape) {
            return Err(Error::Dimension("per-column measurement matrices differ in shape".into()));
        }
        Ok(Self { entries: first.clone(), per_column: Some(per_column) })
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_shared(&self) -> bool {
        self.per_column.is_none()
    }

    /// `Φ_m` for column `m`.
    pub fn for_column(&self, m: usize) -> &DMatrix<f64> {
        match &self.per_column {
            Some(list) => &list[m],
            None => &self.entries,
        }
    }

    /// Checks that the matrix fits an `n`×`l` problem with `m` columns.
    pub fn check(&self, n: usize, l: usize, m: usize) -> Result<()> {
        if self.entries.shape() != (n, l) {
            return Err(Error::Dimension(format!(
                "measurement matrix is {:?}, expected ({n}, {l})",
                self.entries.shape()
            )));
        }
        if let Some(list) = &self.per_column {
            if list.len() != m {
                return Err(Error::Dimension(format!(
                    "{} per-column measurement matrices for {m} columns",
                    list.len()
                )));
            }
            if list.iter().any(|p| p.shape() != (n, l)) {
                return Err(Error::Dimension("per-column measurement matrix has wrong shape".into()));
            }
        }
        Ok(())
    }
}

/// Row-sparse signal `X` (L×M) together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub entries: DMatrix<f64>,
    /// Sorted active row indices.
    pub support: Vec<usize>,
}

impl SignalMatrix {
    /// Wraps `entries`, taking the support to be the rows with any nonzero entry.
    pub fn from_entries(entries: DMatrix<f64>) -> Self {
        let support = (0..entries.nrows())
            .filter(|&r| entries.row(r).iter().any(|&v| v != 0.0))
            .collect();
        Self { entries, support }
    }
}

/// A bijection `p` on observation indices: row `i` of `PΦ` is row `p(i)` of `Φ`.
///
/// Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PermutationMap {
    map: Vec<usize>,
}

impl PermutationMap {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &s in &map {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return Err(Error::Dimension(format!("{map:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Self { map })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Source row feeding observation `i`.
    #[inline]
    pub fn source(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &s) in self.map.iter().enumerate() {
            inv[s] = i;
        }
        Self { map: inv }
    }

    /// `P v`: `out(i) = v(p(i))`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.map.len(), "permutation length mismatch");
        self.map.iter().map(|&s| v[s]).collect()
    }

    /// `Pᵀ v`: `out(p(i)) = v(i)`, i.e. observations put back in source order.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.map.len(), "permutation length mismatch");
        let mut out = vec![0.0; v.len()];
        for (i, &s) in self.map.iter().enumerate() {
            out[s] = v[i];
        }
        out
    }

    /// `P A`: row `i` of the result is row `p(i)` of `a`.
    pub fn permute_rows(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.map.len(), "permutation length mismatch");
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(self.map[i], j)])
    }

    /// Restriction of the map to the given observation indices.
    pub fn restrict(&self, observations: &[usize]) -> PartialMap {
        let mut assignments = vec![None; self.map.len()];
        for &i in observations {
            assignments[i] = Some(self.map[i]);
        }
        PartialMap::new(assignments).expect("restriction of a bijection is injective")
    }
}

impl TryFrom<Vec<usize>> for PermutationMap {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<PermutationMap> for Vec<usize> {
    fn from(p: PermutationMap) -> Self {
        p.map
    }
}

/// `P v` for a dense vector.
pub fn apply_perm(perm: &PermutationMap, v: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(perm.apply(v.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
}

/// A generated (or loaded) problem together with its ground truth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub phi: MeasurementMatrix,
    pub x_true: SignalMatrix,
    /// One map per column; all equal when `config.shared_perm`.
    pub perms_true: Vec<PermutationMap>,
    /// Anchored observation indices.
    pub anchors: Vec<usize>,
    /// Observations (N×M).
    pub y: DMatrix<f64>,
    /// Noise realization added to the noiseless observations.
    pub noise_realization: DMatrix<f64>,
    pub noise: NoiseModel,
    pub config: ProblemConfig,
}

impl ProblemInstance {
    /// Noiseless observations `P_m Φ_m x_m`, column by column.
    pub fn clean_observations(&self) -> DMatrix<f64> {
        clean_observations(&self.phi, &self.x_true.entries, &self.perms_true)
    }

    /// Known anchor assignments per column.
    pub fn anchor_maps(&self) -> Vec<PartialMap> {
        self.perms_true.iter().map(|p| p.restrict(&self.anchors)).collect()
    }
}

pub(crate) fn clean_observations(
    phi: &MeasurementMatrix,
    x: &DMatrix<f64>,
    perms: &[PermutationMap],
) -> DMatrix<f64> {
    let n = phi.nrows();
    let mut out = DMatrix::zeros(n, x.ncols());
    for m in 0..x.ncols() {
        let v = phi.for_column(m) * x.column(m);
        let pv = perms[m].apply(v.as_slice());
        out.column_mut(m).copy_from_slice(&pv);
    }
    out
}

/// Noise variance giving the requested SNR:
/// `σ² = ‖ΦX‖_F² / (N · M · 10^{snr_db/10})`.
pub fn sigma_from_snr(snr_db: f64, phi: &MeasurementMatrix, x: &SignalMatrix) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::Config("snr_db must be finite".into()));
    }
    let m = x.entries.ncols();
    let n = phi.nrows();
    let mut energy = 0.0;
    for col in 0..m {
        energy += (phi.for_column(col) * x.entries.column(col)).norm_squared();
    }
    if energy == 0.0 || !energy.is_finite() {
        return Err(Error::DegenerateSignal("‖ΦX‖_F is zero".into()));
    }
    Ok(energy / ((n * m) as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Draws a problem instance. Deterministic in `config` (including its seed).
pub fn gen_problem(config: &ProblemConfig) -> Result<ProblemInstance> {
    config.validate()?;
    let ProblemConfig { l, n, m, k, rho, .. } = *config;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let phi = DMatrix::from_fn(n, l, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut support = index::sample(&mut rng, l, k).into_vec();
    support.sort_unstable();

    let drive = (1.0 - rho * rho).max(0.0).sqrt();
    let mut x = DMatrix::zeros(l, m);
    for &row in &support {
        let mut prev: f64 = rng.sample(StandardNormal);
        x[(row, 0)] = prev;
        for col in 1..m {
            let u: f64 = rng.sample(StandardNormal);
            prev = rho * prev + drive * u;
            x[(row, col)] = prev;
        }
    }

    let perms_true: Vec<PermutationMap> = if config.shared_perm {
        let p = PermutationMap::random(n, &mut rng);
        vec![p; m]
    } else {
        (0..m).map(|_| PermutationMap::random(n, &mut rng)).collect()
    };

    let phi = MeasurementMatrix::shared(phi);
    let x_true = SignalMatrix { entries: x, support };
    let sigma2 = sigma_from_snr(config.snr_db, &phi, &x_true)?;
    let sigma = sigma2.sqrt();
    let noise_realization =
        DMatrix::from_fn(n, m, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let y = clean_observations(&phi, &x_true.entries, &perms_true) + &noise_realization;

    Ok(ProblemInstance {
        phi,
        x_true,
        perms_true,
        anchors: config.anchor_indices(),
        y,
        noise_realization,
        noise: NoiseModel { sigma2 },
        config: config.clone(),
    })
}

/// Seed for trial `index` of a run with master seed `master`.
///
/// Two rounds of the splitmix64 finalizer over `master` and `index`, so trial
/// streams do not depend on execution order.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
