//! Iterative Chan (iChan) estimator.
//!
//! Each round solves the linearised squared-range system
//! `h = G z_m + e` with `h_i = r_i² − ‖s_i‖²`, `G_i = (−2x_i, −2y_i, 1)` and
//! `z_m = (x, y, x² + y²)` by weighted least squares, then enforces the
//! relation between the first two components and the third with a second
//! two-parameter WLS. The per-range error variances are re-estimated from the
//! residuals of the current estimate and the two solves repeat.
//!
//! The second stage weights depend on where the origin is, so
//! [`ichan_estimate`] runs in a canonical frame built from the anchors and the
//! first linear solution; the result is then translation and rotation
//! equivariant to rounding.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Position2D;

/// Floor applied to squared residuals when refreshing Q (m²).
pub const Q_FLOOR: f64 = 1e-6;

const PSI_FLOOR: f64 = 1e-12;
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IchanConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_max_iter() -> usize {
    20
}
fn default_eps() -> f64 {
    1e-3
}

impl Default for IchanConfig {
    fn default() -> Self {
        Self { max_iter: default_max_iter(), eps: default_eps() }
    }
}

impl IchanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidInput("ichan.max_iter must be >= 1".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidInput("ichan.eps must be > 0".into()));
        }
        Ok(())
    }
}

/// First-stage solution and its covariance `(Gᵀ W G)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub zm: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

/// Result of [`ichan_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IchanOutcome {
    pub pos: Position2D,
    pub iterations: usize,
    /// Whether the displacement test fired before `max_iter`.
    pub converged: bool,
    /// RMS of `r_i − ‖ẑ − s_i‖` at the returned estimate.
    pub residual_rms: f64,
}

fn check_inputs(anchors: &[Position2D], ranges: &[f64]) -> Result<()> {
    if anchors.len() != ranges.len() {
        return Err(Error::InvalidInput(format!("{} anchors but {} ranges", anchors.len(), ranges.len())));
    }
    if anchors.len() < 3 {
        return Err(Error::DegenerateGeometry(format!("need at least 3 anchors, got {}", anchors.len())));
    }
    if anchors.iter().any(|a| !a.is_finite()) || ranges.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("non-finite anchor or range".into()));
    }
    Ok(())
}

/// Weighted LS solution of the linearised system with error covariance
/// `diag(q)`.
pub fn first_wls(anchors: &[Position2D], ranges: &[f64], q: &[f64]) -> Result<FirstStage> {
    check_inputs(anchors, ranges)?;
    if q.len() != anchors.len() || q.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("Q must hold one positive entry per anchor".into()));
    }
    let n = anchors.len();
    let mut a = DMatrix::zeros(n, 3);
    let mut b = DVector::zeros(n);
    for (i, ((s, r), qi)) in anchors.iter().zip(ranges).zip(q).enumerate() {
        let w = 1.0 / qi.sqrt();
        a[(i, 0)] = -2.0 * s.x * w;
        a[(i, 1)] = -2.0 * s.y * w;
        a[(i, 2)] = w;
        b[i] = (r * r - (s.x * s.x + s.y * s.y)) * w;
    }
    // equilibrate columns so the rank test is scale free
    let mut scale = Vector3::zeros();
    for j in 0..3 {
        let norm = a.column(j).norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateGeometry("anchors are collinear".into()));
        }
        scale[j] = norm;
        a.column_mut(j).unscale_mut(norm);
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (max, min) = (sv.max(), sv.min());
    if !(min > RANK_TOL * max) {
        return Err(Error::DegenerateGeometry("anchors are collinear".into()));
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let utb = u.transpose() * &b;
    let mut y = Vector3::zeros();
    let mut cov = Matrix3::zeros();
    for k in 0..3 {
        let vk = Vector3::new(vt[(k, 0)], vt[(k, 1)], vt[(k, 2)]);
        y += vk * (utb[k] / sv[k]);
        cov += vk * vk.transpose() / (sv[k] * sv[k]);
    }
    let zm = y.component_div(&scale);
    let cov = Matrix3::from_fn(|i, j| cov[(i, j)] / (scale[i] * scale[j]));
    Ok(FirstStage { zm, cov })
}

/// Second-stage WLS; returns `ẑ_p` (estimated squared coordinates) and the
/// position with per-component sign taken from `ẑ_m`.
pub fn second_wls(zm: &Vector3<f64>, cov: &Matrix3<f64>) -> Result<(Vector2<f64>, Position2D)> {
    let bp = Matrix3::from_diagonal(&Vector3::new(zm[0], zm[1], 0.5));
    let psi = bp * cov * bp * 4.0;
    let psi = (psi + psi.transpose()) * 0.5;
    let psi_inv = psi
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NumericalFailure("second-stage covariance is not positive definite".into()))?;
    let g = nalgebra::Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 1.0, 1.0);
    let h = Vector3::new(zm[0] * zm[0], zm[1] * zm[1], zm[2]);
    let normal: Matrix2<f64> = g.transpose() * psi_inv * g;
    let zp = normal
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular second-stage normal matrix".into()))?
        * (g.transpose() * psi_inv * h);
    if zp[0] < 0.0 && zp[1] < 0.0 {
        return Err(Error::NumericalFailure("both squared coordinates negative".into()));
    }
    let root = |v: f64, sign_of: f64| v.max(0.0).sqrt().copysign(sign_of);
    Ok((zp, Position2D::new(root(zp[0], zm[0]), root(zp[1], zm[1]))))
}

/// Squared range residuals at `z`, floored at [`Q_FLOOR`].
pub fn update_q(z: Position2D, anchors: &[Position2D], ranges: &[f64]) -> Vec<f64> {
    anchors.iter().zip(ranges).map(|(s, r)| (r - z.distance(*s)).powi(2).max(Q_FLOOR)).collect()
}

/// RMS of the range residuals at `z`.
pub fn residual_rms(z: Position2D, anchors: &[Position2D], ranges: &[f64]) -> f64 {
    let ss: f64 = anchors.iter().zip(ranges).map(|(s, r)| (r - z.distance(*s)).powi(2)).sum();
    (ss / anchors.len() as f64).sqrt()
}

/// Ψ = 4 B Q B with B = diag(r).
fn psi_weights(ranges: &[f64], q: &[f64]) -> Vec<f64> {
    ranges.iter().zip(q).map(|(r, qi)| (4.0 * r * r * qi).max(PSI_FLOOR)).collect()
}

/// Rigid map between input coordinates and the solver frame:
/// `local = R(α)(x − centroid) + offset`.
struct Frame {
    centroid: Position2D,
    cos: f64,
    sin: f64,
    offset: Position2D,
}

impl Frame {
    fn rotate(&self, d: Position2D) -> Position2D {
        Position2D::new(self.cos * d.x - self.sin * d.y, self.sin * d.x + self.cos * d.y)
    }

    fn to_local(&self, p: Position2D) -> Position2D {
        self.rotate(p - self.centroid) + self.offset
    }

    fn to_global(&self, p: Position2D) -> Position2D {
        let d = p - self.offset;
        Position2D::new(self.cos * d.x + self.sin * d.y, -self.sin * d.x + self.cos * d.y) + self.centroid
    }
}

/// Frame centred on the anchors, rotated so the first linear solution lies on
/// the diagonal, and shifted so that solution sits at `(c, c)` with `c` the
/// RMS anchor spread. Both second-stage coordinates are then well away from
/// zero and the frame moves rigidly with the input.
fn canonical_frame(anchors: &[Position2D], ranges: &[f64]) -> Result<Frame> {
    let n = anchors.len() as f64;
    let centroid = anchors.iter().fold(Position2D::new(0.0, 0.0), |acc, &a| acc + a) * (1.0 / n);
    let centred: Vec<Position2D> = anchors.iter().map(|&a| a - centroid).collect();
    let spread = (centred.iter().map(|a| a.dot(*a)).sum::<f64>() / n).sqrt();
    if !(spread > 0.0) {
        return Err(Error::DegenerateGeometry("anchors coincide".into()));
    }
    let first = first_wls(&centred, ranges, &psi_weights(ranges, &vec![1.0; anchors.len()]))?;
    let guess = Position2D::new(first.zm[0], first.zm[1]);
    // a target at the centroid has no preferred direction; use the first anchor
    let dir = if guess.norm() > 1e-9 * spread { guess } else { centred[0] };
    let alpha = std::f64::consts::FRAC_PI_4 - dir.y.atan2(dir.x);
    let mut frame = Frame { centroid, cos: alpha.cos(), sin: alpha.sin(), offset: Position2D::new(0.0, 0.0) };
    frame.offset = Position2D::new(spread, spread) - frame.rotate(guess);
    Ok(frame)
}

/// Iterative Chan estimate from `anchors` and measured `ranges`.
pub fn ichan_estimate(anchors: &[Position2D], ranges: &[f64], config: &IchanConfig) -> Result<IchanOutcome> {
    check_inputs(anchors, ranges)?;
    config.validate()?;
    let frame = canonical_frame(anchors, ranges)?;
    let local: Vec<Position2D> = anchors.iter().map(|&a| frame.to_local(a)).collect();

    let mut psi = psi_weights(ranges, &vec![1.0; anchors.len()]);
    let mut z = Position2D::new(0.0, 0.0);
    let mut iterations = 0;
    let mut converged = false;
    for n in 1..=config.max_iter {
        let first = first_wls(&local, ranges, &psi)?;
        let next = match second_wls(&first.zm, &first.cov) {
            Ok((_, z)) => z,
            // heavy-noise fallback: keep the unconstrained linear estimate
            Err(Error::NumericalFailure(_)) => Position2D::new(first.zm[0], first.zm[1]),
            Err(e) => return Err(e),
        };
        if !next.is_finite() {
            return Err(Error::NumericalFailure("non-finite iChan iterate".into()));
        }
        iterations = n;
        let step = next.distance(z);
        z = next;
        if step <= config.eps {
            converged = true;
            break;
        }
        psi = psi_weights(ranges, &update_q(z, &local, ranges));
    }
    Ok(IchanOutcome {
        pos: frame.to_global(z),
        iterations,
        converged,
        residual_rms: residual_rms(z, &local, ranges),
    })
}

/// Single pass of the two-stage estimator (Q = I), i.e. iChan with one round.
pub fn cwlls(anchors: &[Position2D], ranges: &[f64]) -> Result<Position2D> {
    let config = IchanConfig { max_iter: 1, ..IchanConfig::default() };
    Ok(ichan_estimate(anchors, ranges, &config)?.pos)
}

/// Unweighted linear least squares: the `(x, y)` part of `first_wls` with Q = I.
pub fn lls(anchors: &[Position2D], ranges: &[f64]) -> Result<Position2D> {
    let first = first_wls(anchors, ranges, &vec![1.0; anchors.len()])?;
    Ok(Position2D::new(first.zm[0], first.zm[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Position2D {
        Position2D::new(x, y)
    }

    fn exact(anchors: &[Position2D], t: Position2D) -> Vec<f64> {
        anchors.iter().map(|a| a.distance(t)).collect()
    }

    fn square() -> Vec<Position2D> {
        vec![p(0.0, 0.0), p(10.0, 0.0), p(0.0, 10.0), p(10.0, 10.0)]
    }

    #[test]
    fn first_stage_square() {
        let a = square();
        let f = first_wls(&a, &exact(&a, p(5.0, 5.0)), &[1.0; 4]).unwrap();
        assert_relative_eq!(f.zm, Vector3::new(5.0, 5.0, 50.0), epsilon = 1e-9);
    }

    #[test]
    fn first_stage_triangle() {
        // determined system: 3 equations, 3 unknowns
        let a = [p(0.0, 0.0), p(10.0, 0.0), p(0.0, 10.0)];
        let f = first_wls(&a, &exact(&a, p(2.0, 3.0)), &[1.0; 3]).unwrap();
        assert_relative_eq!(f.zm, Vector3::new(2.0, 3.0, 13.0), epsilon = 1e-9);
    }

    #[test]
    fn collinear_anchors_are_rejected() {
        let a = [p(0.0, 0.0), p(5.0, 0.0), p(10.0, 0.0)];
        assert!(matches!(first_wls(&a, &[1.0, 2.0, 3.0], &[1.0; 3]), Err(Error::DegenerateGeometry(_))));
        let a = [p(0.0, 0.0), p(5.0, 5.0), p(10.0, 10.0)];
        assert!(matches!(first_wls(&a, &[1.0, 2.0, 3.0], &[1.0; 3]), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn covariance_matches_normal_equations() {
        let a = [p(0.0, 0.0), p(40.0, 5.0), p(3.0, 50.0), p(60.0, 70.0)];
        let q = [1.0, 2.0, 0.5, 4.0];
        let f = first_wls(&a, &[30.0, 28.0, 31.0, 50.0], &q).unwrap();
        let mut normal = Matrix3::zeros();
        for (s, qi) in a.iter().zip(q) {
            let g = Vector3::new(-2.0 * s.x, -2.0 * s.y, 1.0);
            normal += g * g.transpose() / qi;
        }
        assert_relative_eq!(f.cov * normal, Matrix3::identity(), epsilon = 1e-8);
    }

    #[test]
    fn second_stage_passes_consistent_input() {
        let (_, z) = second_wls(&Vector3::new(5.0, 5.0, 50.0), &(Matrix3::identity() * 1e-6)).unwrap();
        assert!(z.distance(p(5.0, 5.0)) < 1e-3);
        let (_, z) = second_wls(&Vector3::new(-4.0, 3.0, 25.0), &(Matrix3::identity() * 1e-6)).unwrap();
        assert!(z.distance(p(-4.0, 3.0)) < 1e-3);
    }

    #[test]
    fn second_stage_low_weight_third_row() {
        let cov = Matrix3::from_diagonal(&Vector3::new(0.01, 0.01, 1.0));
        let (zp, z) = second_wls(&Vector3::new(2.0, 3.0, 13.5), &cov).unwrap();
        // oracle: Ψ′ = diag(0.16, 0.36, 1); closed form of the 2-parameter WLS
        let w = [1.0 / 0.16, 1.0 / 0.36, 1.0];
        let h = [4.0, 9.0, 13.5];
        let n = Matrix2::new(w[0] + w[2], w[2], w[2], w[1] + w[2]);
        let rhs = Vector2::new(w[0] * h[0] + w[2] * h[2], w[1] * h[1] + w[2] * h[2]);
        let expect = n.try_inverse().unwrap() * rhs;
        assert_relative_eq!(zp, expect, epsilon = 1e-9);
        assert!(z.distance(p(2.0, 3.0)) < 0.05, "{z}");
    }

    #[test]
    fn second_stage_rejects_all_negative() {
        let r = second_wls(&Vector3::new(1.0, 1.0, -50.0), &(Matrix3::identity() * 1e-6));
        assert!(matches!(r, Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn q_refresh() {
        let a = square();
        let t = p(5.0, 5.0);
        assert_eq!(update_q(t, &a, &exact(&a, t)), vec![Q_FLOOR; 4]);
        let q = update_q(p(0.0, 0.0), &[p(3.0, 4.0)], &[7.0]);
        assert_eq!(q, vec![4.0]);
    }

    #[test]
    fn noiseless_fixed_point() {
        let a = [p(431.0, 232.0), p(324.0, 577.0), p(200.0, 398.0), p(498.0, 245.0)];
        let t = p(600.0, 450.0);
        let out = ichan_estimate(&a, &exact(&a, t), &IchanConfig { max_iter: 20, eps: 1e-6 }).unwrap();
        assert!(out.pos.distance(t) < 1e-6, "{}", out.pos);
        assert!(out.converged);
    }

    #[test]
    fn symmetric_ranges_give_the_centre() {
        let out = ichan_estimate(&square(), &[7.0711; 4], &IchanConfig::default()).unwrap();
        assert!(out.pos.distance(p(5.0, 5.0)) < 1e-3);
    }

    #[test]
    fn cwlls_is_one_round() {
        let a = [p(431.0, 232.0), p(324.0, 577.0), p(200.0, 398.0), p(498.0, 245.0)];
        let r = [280.0, 300.0, 405.0, 226.0];
        let one = ichan_estimate(&a, &r, &IchanConfig { max_iter: 1, eps: 1e-3 }).unwrap();
        assert_eq!(one.iterations, 1);
        assert_eq!(cwlls(&a, &r).unwrap(), one.pos);
        let first = first_wls(&a, &r, &[1.0; 4]).unwrap();
        assert_eq!(lls(&a, &r).unwrap(), p(first.zm[0], first.zm[1]));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let a = [p(431.0, 232.0), p(324.0, 577.0), p(200.0, 398.0), p(498.0, 245.0)];
        let r = [283.0, 297.0, 409.0, 224.0];
        let out = ichan_estimate(&a, &r, &IchanConfig { max_iter: 3, eps: 1e-12 }).unwrap();
        assert!(out.iterations <= 3);
        assert!(out.pos.is_finite());
    }
}
