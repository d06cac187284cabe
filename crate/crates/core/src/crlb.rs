//! Fisher information and Cramér–Rao bounds for cascaded TOA localization.
//!
//! For a level-`k` target the parameter vector stacks the target position and
//! every node below level `k`: `θ = (p, L_{k−1}, …, L_0)`. Each range link
//! between nodes `a` and `b` with unit direction `u` contributes `u uᵀ / σ²`
//! to both diagonal blocks and `−u uᵀ / σ²` to the two cross blocks; each
//! base anchor's diagonal block gains `I / δ²` from its position prior.
//! Node `j`'s coordinate `q` lives at index `2·rank(j) + q`, target rank 0.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{dynamic_anchor_set, LevelMap};
use crate::model::{NodeId, Position2D, Scenario};

/// Condition-number ceiling for Fisher matrices we are willing to invert.
pub const MAX_CONDITION: f64 = 1e12;

/// Substitute for a zero prior variance (perfect anchor).
pub const CRLB_FLOOR: f64 = 1e-18;

/// Order of the nodes in the stacked parameter vector; the target is rank 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamIndex {
    pub ordering: Vec<NodeId>,
}

impl ParamIndex {
    pub fn dim(&self) -> usize {
        2 * self.ordering.len()
    }

    pub fn rank(&self, id: &str) -> Option<usize> {
        self.ordering.iter().position(|n| n.as_str() == id)
    }

    /// Row of coordinate `q` (0 = x, 1 = y) of node `id`.
    pub fn coord(&self, id: &str, q: usize) -> Option<usize> {
        self.rank(id).map(|r| 2 * r + q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub entries: DMatrix<f64>,
    pub index: ParamIndex,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A CRLB in m².
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CrlbValue {
    pub value: f64,
}

impl CrlbValue {
    pub fn sqrt(self) -> f64 {
        self.value.sqrt()
    }
}

/// `u uᵀ / σ²` for the link between `a` and `b`.
pub fn link_information(a: Position2D, b: Position2D, sigma: f64) -> Result<Matrix2<f64>> {
    let d = a - b;
    let dist = d.norm();
    if !(dist > 0.0) {
        return Err(Error::DegenerateGeometry(format!("coincident nodes at {a}")));
    }
    let u = nalgebra::Vector2::new(d.x / dist, d.y / dist);
    Ok(u * u.transpose() / (sigma * sigma))
}

fn add_block(m: &mut DMatrix<f64>, r: usize, c: usize, block: &Matrix2<f64>, sign: f64) {
    for i in 0..2 {
        for j in 0..2 {
            m[(2 * r + i, 2 * c + j)] += sign * block[(i, j)];
        }
    }
}

/// Fisher information of `θ = (p, L_{k−1}, …, L_0)` for a level-`k` target,
/// evaluated at true positions.
pub fn build_fim(scenario: &Scenario, level_map: &LevelMap, target: &str) -> Result<FisherMatrix> {
    let sigma = scenario.noise.sigma;
    let delta = scenario.noise.delta;
    if !(sigma > 0.0) {
        return Err(Error::InvalidNoise("Fisher information needs sigma > 0".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidNoise("Fisher information needs delta > 0".into()));
    }
    let k = match level_map.level(target) {
        Some(k) if k >= 1 => k,
        _ => {
            scenario.index_of(target)?;
            return Err(Error::Unleveled(target.to_owned()));
        }
    };
    let target_id = scenario.node(target)?.id.clone();
    let mut ordering = vec![target_id];
    ordering.extend(level_map.below(k));
    let index = ParamIndex { ordering };

    let positions: Vec<Position2D> =
        index.ordering.iter().map(|id| scenario.position(id.as_str())).collect::<Result<_>>()?;
    let mut f = DMatrix::zeros(index.dim(), index.dim());

    // every node in θ that has dynamic anchors (the target and levels >= 1)
    for (rank, id) in index.ordering.iter().enumerate() {
        let level = if rank == 0 { k } else { level_map.level(id.as_str()).unwrap_or(0) };
        if level == 0 {
            let prior = Matrix2::identity() / (delta * delta);
            add_block(&mut f, rank, rank, &prior, 1.0);
            continue;
        }
        let anchors = dynamic_anchor_set(scenario, level_map, id.as_str())?;
        for a in &anchors.anchors {
            let other = index
                .rank(a.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("anchor `{a}` missing from parameter index")))?;
            let j = link_information(positions[rank], positions[other], sigma)?;
            add_block(&mut f, rank, rank, &j, 1.0);
            add_block(&mut f, other, other, &j, 1.0);
            add_block(&mut f, rank, other, &j, -1.0);
            add_block(&mut f, other, rank, &j, -1.0);
        }
    }
    Ok(FisherMatrix { entries: f, index })
}

fn checked_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularFisher { condition });
    }
    Ok(eig)
}

/// Inverse of a symmetric positive definite matrix, refusing condition
/// numbers above [`MAX_CONDITION`].
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = checked_eigen(m)?;
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose())
}

/// Sum of the first two diagonal entries of `F⁻¹`.
pub fn crlb_of_target(fim: &FisherMatrix) -> Result<CrlbValue> {
    if fim.dim() < 2 {
        return Err(Error::InvalidInput("Fisher matrix smaller than 2x2".into()));
    }
    let eig = checked_eigen(&fim.entries)?;
    let v = &eig.eigenvectors;
    let value = (0..fim.dim())
        .map(|k| (v[(0, k)] * v[(0, k)] + v[(1, k)] * v[(1, k)]) / eig.eigenvalues[k])
        .sum();
    Ok(CrlbValue { value })
}

/// CRLB an anchor carries into the localization of higher-level nodes:
/// `δ²` for base anchors, its own target CRLB otherwise.
pub fn anchor_crlb_for_localization(scenario: &Scenario, level_map: &LevelMap, anchor: &str) -> Result<CrlbValue> {
    match level_map.level(anchor) {
        None => {
            scenario.index_of(anchor)?;
            Err(Error::Unleveled(anchor.to_owned()))
        }
        Some(0) => Ok(CrlbValue { value: scenario.noise.delta.powi(2) }),
        Some(_) => crlb_of_target(&build_fim(scenario, level_map, anchor)?),
    }
}

// ---------------------------------------------------------------------------
// Local (single-hop) bounds
// ---------------------------------------------------------------------------

/// A reference node as seen from one target: position and the scalar prior
/// variance per coordinate, `σ_ci²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAnchor {
    pub pos: Position2D,
    pub prior_var: f64,
}

/// Bounds from the single-hop model `θ = (p, s_1, …, s_N)` with priors
/// `s_i ~ N(s̃_i, σ_ci² I)` and one range per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBounds {
    /// Trace of the target block of the inverse information.
    pub target: f64,
    /// Per-anchor updated bound, half the trace of the anchor block so that it
    /// is on the same per-coordinate scale as `prior_var`.
    pub anchors: Vec<f64>,
}

fn inv2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det.is_finite() && det != 0.0) {
        return None;
    }
    Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

fn condition2(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
    let (hi, lo) = (tr / 2.0 + disc, tr / 2.0 - disc);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Single-hop bounds, the updated anchor bound of the refresh step included.
///
/// The information is assembled in units of `σ²` (link blocks `u uᵀ`, prior
/// blocks `σ²/σ_ci² I`) and the anchor blocks are block-diagonal, so the
/// target is eliminated with 2×2 algebra. Scaling `σ²` and every `σ_ci²` by a
/// common factor scales every returned bound by exactly that factor.
pub fn local_bounds(target: Position2D, anchors: &[LocalAnchor], sigma: f64) -> Result<LocalBounds> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidNoise("local bounds need sigma > 0".into()));
    }
    let s2 = sigma * sigma;
    let mut p_block = Matrix2::zeros();
    let mut parts = Vec::with_capacity(anchors.len());
    for a in anchors {
        let link = link_information(target, a.pos, 1.0)?;
        let w = s2 / a.prior_var.max(CRLB_FLOOR);
        let d = link + Matrix2::identity() * w;
        let d_inv = inv2(&d).ok_or_else(|| Error::NumericalFailure("singular anchor block".into()))?;
        p_block += link;
        parts.push((link, d_inv));
    }
    // Schur complement of the anchors: cross blocks are −link.
    let mut schur = p_block;
    for (link, d_inv) in &parts {
        schur -= link * d_inv * link;
    }
    let condition = condition2(&schur);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularFisher { condition });
    }
    let schur_inv = inv2(&schur).ok_or(Error::SingularFisher { condition })?;
    let target_bound = schur_inv.trace() * s2;
    let anchors = parts
        .iter()
        .map(|(link, d_inv)| {
            // block (i,i) of the inverse: D⁻¹ + D⁻¹ C S⁻¹ Cᵀ D⁻¹ with C = −link
            let g = d_inv * link;
            let block = d_inv + g * schur_inv * g.transpose();
            0.5 * block.trace() * s2
        })
        .collect();
    Ok(LocalBounds { target: target_bound, anchors })
}

/// Updated bound of `anchor` once it also serves `target`: the anchor's prior
/// information is augmented with the target's position and its range links
/// to every one of its dynamic anchors. Evaluated at true positions.
pub fn updated_crlb(scenario: &Scenario, level_map: &LevelMap, anchor: &str, target: &str) -> Result<CrlbValue> {
    let set = dynamic_anchor_set(scenario, level_map, target)?;
    let slot = set.anchors.iter().position(|a| a.as_str() == anchor).ok_or_else(|| Error::NotAnAnchor {
        anchor: anchor.to_owned(),
        target: target.to_owned(),
    })?;
    let locals = set
        .anchors
        .iter()
        .map(|a| {
            Ok(LocalAnchor {
                pos: scenario.position(a.as_str())?,
                prior_var: anchor_crlb_for_localization(scenario, level_map, a.as_str())?.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bounds = local_bounds(scenario.position(target)?, &locals, scenario.noise.sigma)?;
    Ok(CrlbValue { value: bounds.anchors[slot] })
}
