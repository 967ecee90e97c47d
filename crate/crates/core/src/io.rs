//! JSON encoding of problem instances and configs.
//!
//! An instance is stored as
//!
//! ```text
//! { "phi": [[..], ..] | [[[..], ..], ..],   // N×L, or M matrices of N×L
//!   "x_true": [[..], ..],                   // L×M
//!   "perms": [[..], ..],                    // M maps, p(i) = source row
//!   "anchors": [..],                        // anchored observation indices
//!   "y": [[..], ..],                        // N×M
//!   "sigma2": 1e-6,
//!   "config": { "L": .., "N": .., .. } }
//! ```
//!
//! with every matrix a row-major nested array. The noise realization is not
//! stored; on load it is recovered as `Y - P Φ X`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    clean_observations, MeasurementMatrix, NoiseModel, PermutationMap, ProblemConfig, ProblemInstance,
    SignalMatrix,
};

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PhiJson {
    Shared(Rows),
    PerColumn(Vec<Rows>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    phi: PhiJson,
    x_true: Rows,
    perms: Vec<Vec<usize>>,
    anchors: Vec<usize>,
    y: Rows,
    sigma2: f64,
    config: ProblemConfig,
}

/// Row-major nested arrays of a matrix.
pub fn matrix_to_rows(a: &DMatrix<f64>) -> Rows {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Matrix from row-major nested arrays. Rows must have equal length and
/// entries must be finite. An empty outer array gives a 0×0 matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Parse(format!("{what}: row {i} has {} entries, expected {ncols}", r.len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn expect_shape(a: &DMatrix<f64>, shape: (usize, usize), what: &str) -> Result<()> {
    if a.shape() != shape {
        return Err(Error::Parse(format!("{what} is {:?}, expected {shape:?}", a.shape())));
    }
    Ok(())
}

impl ProblemInstance {
    pub fn to_json(&self) -> Result<String> {
        let phi = match &self.phi.per_column {
            Some(mats) => PhiJson::PerColumn(mats.iter().map(matrix_to_rows).collect()),
            None => PhiJson::Shared(matrix_to_rows(&self.phi.entries)),
        };
        let doc = InstanceJson {
            phi,
            x_true: matrix_to_rows(&self.x_true.entries),
            perms: self.perms_true.iter().map(|p| p.as_slice().to_vec()).collect(),
            anchors: self.anchors.clone(),
            y: matrix_to_rows(&self.y),
            sigma2: self.noise.sigma2,
            config: self.config.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parses and validates an instance document. Dimensions are taken from
    /// `config` and every array is checked against them.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let config = doc.config;
        config.validate()?;
        let (l, n, m) = (config.l, config.n, config.m);

        let phi = match doc.phi {
            PhiJson::Shared(rows) => {
                let a = matrix_from_rows(&rows, "phi")?;
                expect_shape(&a, (n, l), "phi")?;
                MeasurementMatrix::shared(a)
            }
            PhiJson::PerColumn(mats) => {
                if mats.len() != m {
                    return Err(Error::Parse(format!("phi holds {} matrices, expected M = {m}", mats.len())));
                }
                let mats = mats
                    .iter()
                    .map(|rows| {
                        let a = matrix_from_rows(rows, "phi")?;
                        expect_shape(&a, (n, l), "phi")?;
                        Ok(a)
                    })
                    .collect::<Result<Vec<_>>>()?;
                MeasurementMatrix::time_varying(mats)?
            }
        };

        let x = matrix_from_rows(&doc.x_true, "x_true")?;
        expect_shape(&x, (l, m), "x_true")?;
        let y = matrix_from_rows(&doc.y, "y")?;
        expect_shape(&y, (n, m), "y")?;

        if doc.perms.len() != m {
            return Err(Error::Parse(format!("{} permutations, expected M = {m}", doc.perms.len())));
        }
        let perms_true = doc
            .perms
            .into_iter()
            .map(|p| {
                if p.len() != n {
                    return Err(Error::Parse(format!("permutation of length {}, expected N = {n}", p.len())));
                }
                PermutationMap::new(p).map_err(|e| Error::Parse(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if config.shared_perm && perms_true.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Parse("shared_perm is set but the permutations differ".into()));
        }

        let mut seen = vec![false; n];
        for &a in &doc.anchors {
            if a >= n || std::mem::replace(&mut seen[a], true) {
                return Err(Error::Parse(format!("anchor index {a} is out of range or repeated")));
            }
        }
        if !(doc.sigma2 >= 0.0 && doc.sigma2.is_finite()) {
            return Err(Error::Parse(format!("sigma2 must be finite and non-negative, got {}", doc.sigma2)));
        }

        let noise_realization = &y - clean_observations(&phi, &x, &perms_true);
        Ok(Self {
            phi,
            x_true: SignalMatrix::from_entries(x),
            perms_true,
            anchors: doc.anchors,
            y,
            noise_realization,
            noise: NoiseModel { sigma2: doc.sigma2 },
            config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Parses and validates a [`ProblemConfig`] document.
pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let config: ProblemConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
