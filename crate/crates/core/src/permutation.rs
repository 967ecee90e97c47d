//! The permutation subproblem `max_{P} yᵀ P v`.
//!
//! The objective is `Σ_i y(i) v(p(i))`, a sum of pairwise products, so the
//! rearrangement inequality solves it exactly: pair the k-th largest entry of
//! `y` with the k-th largest entry of `v`. Ties are broken by ascending index
//! on both sides.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::PermutationMap;

/// Largest number of free indices [`brute_force_argmax`] will enumerate.
pub const BRUTE_FORCE_MAX_FREE: usize = 9;

/// The pair `(y, v)` of the objective `Σ_i y(i) v(p(i))`, with `v = Φμ`.
#[derive(Debug, Clone, Copy)]
pub struct PermObjective<'a> {
    pub y: &'a [f64],
    pub v: &'a [f64],
}

impl<'a> PermObjective<'a> {
    pub fn new(y: &'a [f64], v: &'a [f64]) -> Result<Self> {
        if y.len() != v.len() {
            return Err(Error::Dimension(format!(
                "objective vectors differ in length ({} vs {})",
                y.len(),
                v.len()
            )));
        }
        Ok(Self { y, v })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Known assignments observation → source for a subset of observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialMap {
    assignments: Vec<Option<usize>>,
}

impl PartialMap {
    /// Builds the map, rejecting out-of-range or repeated sources.
    pub fn new(assignments: Vec<Option<usize>>) -> Result<Self> {
        let n = assignments.len();
        let mut used = vec![false; n];
        for (i, a) in assignments.iter().enumerate() {
            if let Some(s) = *a {
                if s >= n {
                    return Err(Error::InvalidAnchor(format!(
                        "observation {i} anchored to source {s}, outside 0..{n}"
                    )));
                }
                if std::mem::replace(&mut used[s], true) {
                    return Err(Error::InvalidAnchor(format!(
                        "source {s} is anchored to more than one observation"
                    )));
                }
            }
        }
        Ok(Self { assignments })
    }

    pub fn empty(n: usize) -> Self {
        Self { assignments: vec![None; n] }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.assignments[i]
    }

    pub fn anchored_count(&self) -> usize {
        self.assignments.iter().filter(|a| a.is_some()).count()
    }

    /// Free observation indices and free source indices, both ascending.
    pub fn free_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.assignments.len();
        let mut used = vec![false; n];
        let mut free_obs = Vec::new();
        for (i, a) in self.assignments.iter().enumerate() {
            match a {
                Some(s) => used[*s] = true,
                None => free_obs.push(i),
            }
        }
        let free_src = (0..n).filter(|&s| !used[s]).collect();
        (free_obs, free_src)
    }

    /// Completes the map by pairing free observations with free sources in
    /// ascending index order.
    pub fn complete_ascending(&self) -> PermutationMap {
        let (free_obs, free_src) = self.free_indices();
        let mut map: Vec<usize> = self.assignments.iter().map(|a| a.unwrap_or(usize::MAX)).collect();
        for (o, s) in free_obs.into_iter().zip(free_src) {
            map[o] = s;
        }
        PermutationMap::new(map).expect("ascending completion is a bijection")
    }

    /// Whether `p` agrees with every anchored assignment.
    pub fn is_consistent(&self, p: &PermutationMap) -> bool {
        p.len() == self.len()
            && self.assignments.iter().enumerate().all(|(i, a)| a.is_none_or(|s| p.source(i) == s))
    }
}

/// `Σ_i y(i) v(p(i))`.
pub fn perm_objective(obj: &PermObjective<'_>, p: &PermutationMap) -> f64 {
    obj.y.iter().zip(p.as_slice()).map(|(&yi, &s)| yi * obj.v[s]).sum()
}

/// Indices of `idx` ordered by descending `values`, ties by ascending index.
fn rank_descending(values: &[f64], idx: &mut [usize]) {
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
}

/// Pairs the k-th largest `y` among `obs` with the k-th largest `v` among
/// `src`. Within a run of equal `v` values the matched observations and
/// sources are re-paired in ascending order, so a constant predictor yields
/// the ascending completion.
fn pair_ranks(obj: &PermObjective<'_>, mut obs: Vec<usize>, mut src: Vec<usize>, map: &mut [usize]) {
    rank_descending(obj.y, &mut obs);
    rank_descending(obj.v, &mut src);
    let mut start = 0;
    while start < src.len() {
        let mut end = start + 1;
        while end < src.len() && obj.v[src[end]] == obj.v[src[start]] {
            end += 1;
        }
        let group = &mut obs[start..end];
        group.sort_unstable();
        for (&o, &s) in group.iter().zip(&src[start..end]) {
            map[o] = s;
        }
        start = end;
    }
}

/// Exact unconstrained maximizer via the rearrangement inequality.
pub fn rearrangement_argmax(obj: &PermObjective<'_>) -> PermutationMap {
    let n = obj.len();
    let mut map = vec![0; n];
    pair_ranks(obj, (0..n).collect(), (0..n).collect(), &mut map);
    PermutationMap::new(map).expect("rank pairing is a bijection")
}

/// Maximizer over permutations that agree with `anchors`.
///
/// Anchored observations keep their sources; the free observations are
/// rank-paired with the free sources.
pub fn constrained_rearrangement_argmax(
    obj: &PermObjective<'_>,
    anchors: &PartialMap,
) -> Result<PermutationMap> {
    let n = obj.len();
    if anchors.len() != n {
        return Err(Error::Dimension(format!(
            "anchor map has length {}, objective has length {n}",
            anchors.len()
        )));
    }
    let (free_obs, free_src) = anchors.free_indices();
    let mut map: Vec<usize> = (0..n).map(|i| anchors.get(i).unwrap_or(usize::MAX)).collect();
    pair_ranks(obj, free_obs, free_src, &mut map);
    PermutationMap::new(map)
}

/// Exhaustive maximizer over anchor-consistent permutations. Among equal
/// objective values the lexicographically smallest map wins.
pub fn brute_force_argmax(obj: &PermObjective<'_>, anchors: &PartialMap) -> Result<PermutationMap> {
    let n = obj.len();
    if anchors.len() != n {
        return Err(Error::Dimension(format!(
            "anchor map has length {}, objective has length {n}",
            anchors.len()
        )));
    }
    let (free_obs, free_src) = anchors.free_indices();
    if free_obs.len() > BRUTE_FORCE_MAX_FREE {
        return Err(Error::SizeGuard { got: free_obs.len(), max: BRUTE_FORCE_MAX_FREE });
    }

    let mut map: Vec<usize> = (0..n).map(|i| anchors.get(i).unwrap_or(usize::MAX)).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    // Free sources are ascending, so lexicographic order over the choices of
    // the free observations (ascending) is lexicographic order over maps.
    let mut chosen = vec![false; free_src.len()];
    enumerate(obj, &free_obs, &free_src, 0, &mut chosen, &mut map, &mut best);
    let (_, map) = best.expect("at least one permutation exists");
    PermutationMap::new(map)
}

fn enumerate(
    obj: &PermObjective<'_>,
    free_obs: &[usize],
    free_src: &[usize],
    depth: usize,
    chosen: &mut [bool],
    map: &mut [usize],
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if depth == free_obs.len() {
        let value: f64 = obj.y.iter().zip(map.iter()).map(|(&yi, &s)| yi * obj.v[s]).sum();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            *best = Some((value, map.to_vec()));
        }
        return;
    }
    for k in 0..free_src.len() {
        if chosen[k] {
            continue;
        }
        chosen[k] = true;
        map[free_obs[depth]] = free_src[k];
        enumerate(obj, free_obs, free_src, depth + 1, chosen, map, best);
        chosen[k] = false;
    }
}

/// Cross-products `C(i, s) = Σ_m y(i, m) v(s, m)`; the shared objective of a
/// map `p` is then `Σ_i C(i, p(i))`.
fn cross_products(y_cols: &DMatrix<f64>, v_cols: &DMatrix<f64>) -> DMatrix<f64> {
    y_cols * v_cols.transpose()
}

fn shared_score(cross: &DMatrix<f64>, p: &PermutationMap) -> f64 {
    p.as_slice().iter().enumerate().map(|(i, &s)| cross[(i, s)]).sum()
}

/// `Σ_m y_mᵀ P v_m` for one shared map.
pub fn shared_objective(y_cols: &DMatrix<f64>, v_cols: &DMatrix<f64>, p: &PermutationMap) -> f64 {
    (0..y_cols.ncols())
        .map(|m| {
            let y = y_cols.column(m);
            let v = v_cols.column(m);
            p.as_slice().iter().enumerate().map(|(i, &s)| y[i] * v[s]).sum::<f64>()
        })
        .sum()
}

/// Best shared map among the per-column optima and the incumbent.
///
/// Each column pair `(y_m, v_m)` yields its own constrained optimum; the
/// candidate with the largest `Σ_m y_mᵀ P v_m` is returned. The incumbent is
/// scored first and only replaced on strict improvement, so the result never
/// scores below it.
pub fn select_shared_permutation(
    y_cols: &DMatrix<f64>,
    v_cols: &DMatrix<f64>,
    anchors: &PartialMap,
    incumbent: &PermutationMap,
) -> Result<PermutationMap> {
    if y_cols.shape() != v_cols.shape() {
        return Err(Error::Dimension(format!(
            "observation block {:?} and predictor block {:?} differ",
            y_cols.shape(),
            v_cols.shape()
        )));
    }
    if incumbent.len() != y_cols.nrows() {
        return Err(Error::Dimension("incumbent permutation has wrong length".into()));
    }
    let cross = cross_products(y_cols, v_cols);
    let mut best = incumbent.clone();
    let mut best_score = shared_score(&cross, incumbent);
    for m in 0..y_cols.ncols() {
        let y = y_cols.column(m);
        let v = v_cols.column(m);
        let obj = PermObjective::new(y.as_slice(), v.as_slice())?;
        let candidate = constrained_rearrangement_argmax(&obj, anchors)?;
        if candidate == best {
            continue;
        }
        let score = shared_score(&cross, &candidate);
        if score > best_score {
            best_score = score;
            best = candidate;
        }
    }
    Ok(best)
}
