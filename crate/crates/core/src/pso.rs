//! Particle swarm minimisation over a product of discs.
//!
//! A candidate is one point per region. Particles that leave their disc are
//! projected back onto it, and the velocity is reset to the displacement that
//! actually happened, so a particle stuck on the boundary does not keep
//! accumulating momentum outward.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Position2D;
use crate::rng::SimRng;

/// Closed disc `{q : ‖q − center‖ ≤ radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallRegion {
    pub center: Position2D,
    pub radius: f64,
}

impl BallRegion {
    pub fn new(center: Position2D, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("ball radius must be > 0, got {radius}")));
        }
        if !center.is_finite() {
            return Err(Error::InvalidInput("ball center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, q: Position2D) -> bool {
        q.distance(self.center) <= self.radius
    }

    /// Nearest point of the disc. The result always satisfies [`contains`];
    /// non-finite input maps to the centre.
    ///
    /// [`contains`]: BallRegion::contains
    pub fn project(&self, q: Position2D) -> Position2D {
        if !q.is_finite() {
            return self.center;
        }
        let d = q - self.center;
        let dist = d.norm();
        if dist <= self.radius {
            return q;
        }
        let mut factor = self.radius / dist;
        loop {
            let p = self.center + d * factor;
            if self.contains(p) {
                return p;
            }
            factor *= 1.0 - 4.0 * f64::EPSILON;
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Position2D {
        let rho = self.radius * rng.gen::<f64>().sqrt();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        self.project(self.center + Position2D::new(rho * theta.cos(), rho * theta.sin()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmConfig {
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_acceleration")]
    pub cognitive: f64,
    #[serde(default = "default_acceleration")]
    pub social: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_particles() -> usize {
    60
}
fn default_iterations() -> usize {
    300
}
fn default_inertia() -> f64 {
    0.72
}
fn default_acceleration() -> f64 {
    1.49
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            particles: default_particles(),
            iterations: default_iterations(),
            inertia: default_inertia(),
            cognitive: default_acceleration(),
            social: default_acceleration(),
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::InvalidInput("pso.particles must be >= 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidInput("pso.iterations must be >= 1".into()));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(Error::InvalidInput("pso.inertia must be in (0, 1)".into()));
        }
        if !(self.cognitive > 0.0 && self.cognitive.is_finite()) {
            return Err(Error::InvalidInput("pso.cognitive must be > 0".into()));
        }
        if !(self.social > 0.0 && self.social.is_finite()) {
            return Err(Error::InvalidInput("pso.social must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmResult {
    /// Best point, one entry per region.
    pub point: Vec<Position2D>,
    pub value: f64,
    /// Best value after initialisation and after every iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

fn eval<F: Fn(&[Position2D]) -> f64>(objective: &F, x: &[Position2D]) -> f64 {
    let v = objective(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimise `objective` over `regions[0] × regions[1] × …`.
///
/// Particle 0 starts at the region centres, the rest uniformly over the discs.
/// Non-finite objective values count as `+∞`.
pub fn minimize<F>(objective: F, regions: &[BallRegion], config: &SwarmConfig) -> Result<SwarmResult>
where
    F: Fn(&[Position2D]) -> f64,
{
    config.validate()?;
    if regions.is_empty() {
        return Err(Error::InvalidInput("no search regions".into()));
    }
    let mut rng = SimRng::seed_from_u64(config.seed);
    let m = regions.len();
    let np = config.particles;

    let mut x: Vec<Vec<Position2D>> = Vec::with_capacity(np);
    let mut v: Vec<Vec<Position2D>> = Vec::with_capacity(np);
    for k in 0..np {
        let pos: Vec<Position2D> =
            if k == 0 { regions.iter().map(|r| r.center).collect() } else { regions.iter().map(|r| r.sample(&mut rng)).collect() };
        let vel: Vec<Position2D> = regions
            .iter()
            .map(|r| {
                let target = r.sample(&mut rng);
                (target - r.center) * 0.5
            })
            .collect();
        x.push(pos);
        v.push(vel);
    }
    let mut fx: Vec<f64> = x.iter().map(|p| eval(&objective, p)).collect();
    let mut evaluations = np;
    let mut pbest = x.clone();
    let mut pbest_f = fx.clone();
    let mut g = 0;
    for k in 1..np {
        if pbest_f[k] < pbest_f[g] {
            g = k;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_f = pbest_f[g];
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(gbest_f);

    let vmax: Vec<f64> = regions.iter().map(|r| 2.0 * r.radius).collect();
    for _ in 0..config.iterations {
        for k in 0..np {
            for j in 0..m {
                let (r1x, r1y, r2x, r2y): (f64, f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen(), rng.gen());
                let cur = x[k][j];
                let pb = pbest[k][j] - cur;
                let gb = gbest[j] - cur;
                let mut vel = Position2D::new(
                    config.inertia * v[k][j].x + config.cognitive * r1x * pb.x + config.social * r2x * gb.x,
                    config.inertia * v[k][j].y + config.cognitive * r1y * pb.y + config.social * r2y * gb.y,
                );
                let speed = vel.norm();
                if speed > vmax[j] {
                    vel = vel * (vmax[j] / speed);
                }
                let next = regions[j].project(cur + vel);
                v[k][j] = next - cur;
                x[k][j] = next;
            }
            fx[k] = eval(&objective, &x[k]);
            evaluations += 1;
            if fx[k] < pbest_f[k] {
                pbest_f[k] = fx[k];
                pbest[k].clone_from(&x[k]);
                if fx[k] < gbest_f {
                    gbest_f = fx[k];
                    gbest.clone_from(&x[k]);
                }
            }
        }
        trace.push(gbest_f);
    }

    if !gbest_f.is_finite() {
        return Err(Error::OptimizationFailed("objective was non-finite at every sampled point".into()));
    }
    Ok(SwarmResult { point: gbest, value: gbest_f, trace, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Position2D {
        Position2D::new(x, y)
    }

    #[test]
    fn sphere_minimum_at_center() {
        let c = p(3.0, -2.0);
        let ball = BallRegion::new(c, 10.0).unwrap();
        let r = minimize(|q| q[0].distance(c).powi(2), &[ball], &SwarmConfig::default()).unwrap();
        assert!(r.point[0].distance(c) < 1e-3);
        assert!(r.value <= 1e-6);
    }

    #[test]
    fn exterior_minimum_lands_on_boundary() {
        let ball = BallRegion::new(p(0.0, 0.0), 10.0).unwrap();
        let z = p(30.0, 40.0);
        let r = minimize(|q| q[0].distance(z).powi(2), &[ball], &SwarmConfig::default().with_seed(3)).unwrap();
        assert!(r.point[0].distance(p(6.0, 8.0)) < 1e-2, "{}", r.point[0]);
        assert!(ball.contains(r.point[0]));
    }

    #[test]
    fn projection_is_always_feasible() {
        let ball = BallRegion::new(p(431.123456789, 232.987654321), 0.123456789).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..10_000 {
            let q = p(rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4));
            assert!(ball.contains(ball.project(q)));
        }
        assert_eq!(ball.project(p(f64::NAN, 0.0)), ball.center);
        assert_eq!(ball.project(p(f64::INFINITY, 1.0)), ball.center);
    }

    #[test]
    fn trace_is_non_increasing_and_seeded() {
        let regions = [BallRegion::new(p(0.0, 0.0), 5.0).unwrap(), BallRegion::new(p(10.0, 0.0), 5.0).unwrap()];
        let f = |q: &[Position2D]| (q[0].x - 1.0).powi(2) + q[0].y.powi(2) + (q[1].distance(p(12.0, 1.0)) - 1.0).powi(2);
        let cfg = SwarmConfig { particles: 20, iterations: 50, seed: 9, ..SwarmConfig::default() };
        let a = minimize(f, &regions, &cfg).unwrap();
        let b = minimize(f, &regions, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.trace.len(), 51);
        assert_eq!(a.evaluations, 20 * 51);
    }

    #[test]
    fn non_finite_everywhere_fails() {
        let ball = BallRegion::new(p(0.0, 0.0), 1.0).unwrap();
        let cfg = SwarmConfig { particles: 4, iterations: 3, ..SwarmConfig::default() };
        assert!(matches!(minimize(|_| f64::NAN, &[ball], &cfg), Err(Error::OptimizationFailed(_))));
        // partially finite is fine
        let r = minimize(|q| if q[0].x > 0.0 { f64::NAN } else { q[0].x }, &[ball], &cfg).unwrap();
        assert!(r.value.is_finite());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let ball = BallRegion::new(p(0.0, 0.0), 1.0).unwrap();
        for cfg in [
            SwarmConfig { particles: 1, ..SwarmConfig::default() },
            SwarmConfig { inertia: 1.0, ..SwarmConfig::default() },
            SwarmConfig { social: 0.0, ..SwarmConfig::default() },
        ] {
            assert!(minimize(|q| q[0].x, &[ball], &cfg).is_err());
        }
        assert!(BallRegion::new(p(0.0, 0.0), 0.0).is_err());
    }
}
