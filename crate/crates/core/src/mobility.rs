//! Random-direction mobility with a random speed component.
//!
//! Every step a node moves `(v_mean + v_n)·dt` along a fresh uniform heading,
//! `v_n ~ U[0, v_n_max]`. Walls reflect specularly, so the path length of a
//! step is preserved.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Position2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub v_mean: f64,
    pub v_n_max: f64,
    pub dt: f64,
    /// `[x0, y0, x1, y1]`.
    pub bounds: [f64; 4],
}

impl MobilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_mean >= 0.0 && self.v_mean.is_finite()) {
            return Err(Error::InvalidInput(format!("v_mean must be >= 0, got {}", self.v_mean)));
        }
        if !(self.v_n_max >= 0.0 && self.v_n_max.is_finite()) {
            return Err(Error::InvalidInput(format!("v_n_max must be >= 0, got {}", self.v_n_max)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {}", self.dt)));
        }
        let [x0, y0, x1, y1] = self.bounds;
        if !(x1 > x0 && y1 > y0) || self.bounds.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("empty bounds {:?}", self.bounds)));
        }
        Ok(())
    }

    pub fn contains(&self, p: Position2D) -> bool {
        let [x0, y0, x1, y1] = self.bounds;
        (x0..=x1).contains(&p.x) && (y0..=y1).contains(&p.y)
    }
}

/// Fold `v` into `[lo, hi]` by repeated mirror reflection.
fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let mut t = (v - lo).rem_euclid(2.0 * width);
    if t > width {
        t = 2.0 * width - t;
    }
    (lo + t).clamp(lo, hi)
}

/// One step with the random speed and heading supplied by the caller.
pub fn step_with(pos: Position2D, params: &MobilityParams, v_n: f64, heading: f64) -> Position2D {
    let travel = (params.v_mean + v_n) * params.dt;
    let raw = pos + Position2D::new(heading.cos(), heading.sin()) * travel;
    let [x0, y0, x1, y1] = params.bounds;
    Position2D::new(reflect(raw.x, x0, x1), reflect(raw.y, y0, y1))
}

pub fn step<R: Rng + ?Sized>(pos: Position2D, params: &MobilityParams, rng: &mut R) -> Position2D {
    let v_n = if params.v_n_max > 0.0 { rng.gen_range(0.0..=params.v_n_max) } else { 0.0 };
    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
    step_with(pos, params, v_n, heading)
}
