//! Position estimators: level-1 MLE, two-step CRLB-weighted localization
//! (static and mobility-penalised), direct swarm search and the linear
//! baselines.
//!
//! The CRLB-weighted objective for a target `p` with anchor beliefs
//! `(s̃_i, σ_ci²)` and ranges `r_i` is
//!
//! ```text
//! f(p, s) = Σ (r_i − ‖p − s_i‖)² / σ² + Σ ‖s̃_i − s_i‖² / σ_ci²  [+ η (‖p − p_prev‖ − d)²]
//! ```
//!
//! with `s_i ∈ B(s̃_i, r_s,i)` and `p ∈ B(p̃, r_p)`. For fixed `p` each anchor
//! term is minimised independently and in closed form: the best `s_i` lies on
//! the ray from `p` through `s̃_i`. The default [`Route::Profiled`] therefore
//! searches over `p` alone; [`Route::Joint`] runs the swarm over every
//! coordinate and exists as a cross-check.

use serde::{Deserialize, Serialize};

use crate::crlb::{local_bounds, LocalAnchor};
use crate::error::{Error, Result};
use crate::ichan::{cwlls, ichan_estimate, lls, IchanConfig};
use crate::model::{NodeId, Position2D};
use crate::pso::{minimize, BallRegion, SwarmConfig};
use crate::rng::{derive_seed, label_hash};

/// Substitute for a zero anchor CRLB (perfect anchor), m².
pub const CRLB_FLOOR: f64 = 1e-9;

/// Largest increase of the (χ²-scaled) range objective the motion penalty
/// may buy: the 0.999 quantile of χ² with 2 degrees of freedom. Beyond it the
/// previous estimate is treated as stale and step two runs without it.
pub const STALE_PRIOR_GATE: f64 = 13.815_510_557_964_274;

/// A reference node as the localizer sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorBelief {
    pub id: NodeId,
    /// Observed or previously estimated position `s̃_i`.
    pub observed_pos: Position2D,
    /// Per-coordinate variance `σ_ci²` (m²).
    pub crlb: f64,
}

impl AnchorBelief {
    pub fn new(id: impl Into<NodeId>, observed_pos: Position2D, crlb: f64) -> Self {
        Self { id: id.into(), observed_pos, crlb }
    }

    pub fn variance(&self) -> f64 {
        self.crlb.max(CRLB_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeProblem {
    pub anchors: Vec<AnchorBelief>,
    /// `ranges[i]` is the measured range to `anchors[i]`.
    pub ranges: Vec<f64>,
    pub sigma: f64,
    /// Anchor search radius `r_s`; `None` uses `anchor_sigmas · √σ_ci²` per anchor.
    pub search_radius_anchor: Option<f64>,
    /// Target search radius `r_p`; `None` derives it from the coarse fit.
    pub search_radius_target: Option<f64>,
}

impl LocalizeProblem {
    pub fn new(anchors: Vec<AnchorBelief>, ranges: Vec<f64>, sigma: f64) -> Self {
        Self { anchors, ranges, sigma, search_radius_anchor: None, search_radius_target: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.len() != self.ranges.len() {
            return Err(Error::InvalidInput(format!(
                "{} anchors but {} ranges",
                self.anchors.len(),
                self.ranges.len()
            )));
        }
        if self.anchors.len() < 3 {
            return Err(Error::DegenerateGeometry(format!("need at least 3 anchors, got {}", self.anchors.len())));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidNoise(format!("sigma must be > 0, got {}", self.sigma)));
        }
        for a in &self.anchors {
            if !a.observed_pos.is_finite() || !(a.crlb >= 0.0 && a.crlb.is_finite()) {
                return Err(Error::InvalidInput(format!("bad belief for anchor `{}`", a.id)));
            }
        }
        if self.ranges.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("non-finite range".into()));
        }
        for r in [self.search_radius_anchor, self.search_radius_target].into_iter().flatten() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("search radius must be > 0, got {r}")));
            }
        }
        Ok(())
    }

    fn observed(&self) -> Vec<Position2D> {
        self.anchors.iter().map(|a| a.observed_pos).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "level1-mle")]
    Level1Mle,
    #[serde(rename = "two-step")]
    TwoStepStatic,
    #[serde(rename = "dynamic")]
    TwoStepDynamic,
    #[serde(rename = "lls")]
    Lls,
    #[serde(rename = "cwlls")]
    Cwlls,
    #[serde(rename = "pso")]
    DirectPso,
    #[serde(rename = "ichan")]
    Ichan,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Level1Mle,
        Method::TwoStepStatic,
        Method::TwoStepDynamic,
        Method::Lls,
        Method::Cwlls,
        Method::DirectPso,
        Method::Ichan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Level1Mle => "level1-mle",
            Method::TwoStepStatic => "two-step",
            Method::TwoStepDynamic => "dynamic",
            Method::Lls => "lls",
            Method::Cwlls => "cwlls",
            Method::DirectPso => "pso",
            Method::Ichan => "ichan",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A refreshed anchor produced by step one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdatedAnchor {
    pub id: NodeId,
    pub pos: Position2D,
    pub crlb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub pos: Position2D,
    /// Single-hop CRLB (m²) of the target given its anchors' beliefs.
    pub crlb: f64,
    pub method: Method,
    pub updated_anchors: Vec<UpdatedAnchor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Swarm over `p`; anchors solved in closed form.
    #[default]
    Profiled,
    /// Swarm over `p` and every anchor.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeOptions {
    pub swarm: SwarmConfig,
    pub ichan: IchanConfig,
    pub route: Route,
    /// Width of the anchor search discs in standard deviations.
    pub anchor_sigmas: f64,
    /// Deployment rectangle `[x0, y0, x1, y1]`; swarm estimates never leave it.
    pub area: Option<[f64; 4]>,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            ichan: IchanConfig::default(),
            route: Route::Profiled,
            anchor_sigmas: 3.0,
            area: None,
        }
    }
}

impl LocalizeOptions {
    fn in_area(&self, p: Position2D) -> bool {
        self.area.map_or(true, |[x0, y0, x1, y1]| (x0..=x1).contains(&p.x) && (y0..=y1).contains(&p.y))
    }

    fn meets_area(&self, region: &BallRegion) -> bool {
        self.area.map_or(true, |[x0, y0, x1, y1]| {
            let nearest = Position2D::new(region.center.x.clamp(x0, x1), region.center.y.clamp(y0, y1));
            region.contains(nearest)
        })
    }
}

/// Soft constraint tying the estimate to the previous one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPenalty {
    pub prev: Position2D,
    /// Expected travel `v_mean · dt`.
    pub travel: f64,
    pub eta: f64,
}

impl MotionPenalty {
    pub fn new(prev: Position2D, v_mean: f64, dt: f64, eta: f64) -> Result<Self> {
        if !prev.is_finite() {
            return Err(Error::InvalidInput("previous estimate must be finite".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        if !(v_mean >= 0.0 && v_mean.is_finite()) {
            return Err(Error::InvalidInput(format!("v_mean must be >= 0, got {v_mean}")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidInput(format!("eta must be >= 0, got {eta}")));
        }
        Ok(Self { prev, travel: v_mean * dt, eta })
    }

    fn value(&self, p: Position2D) -> f64 {
        self.eta * (p.distance(self.prev) - self.travel).powi(2)
    }

    fn gradient(&self, p: Position2D) -> Position2D {
        let d = p - self.prev;
        let dist = d.norm();
        if dist == 0.0 {
            return Position2D::new(0.0, 0.0);
        }
        d * (2.0 * self.eta * (dist - self.travel) / dist)
    }
}

/// One anchor term of the objective with its search disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorTerm {
    pub center: Position2D,
    pub variance: f64,
    pub range: f64,
    pub radius: f64,
}

/// The CRLB-weighted objective of one localization step.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub terms: Vec<AnchorTerm>,
    pub range_variance: f64,
    pub penalty: Option<MotionPenalty>,
}

impl Objective {
    /// Full objective at target `p` and anchor positions `s`.
    pub fn value(&self, p: Position2D, s: &[Position2D]) -> f64 {
        let mut total = 0.0;
        for (t, si) in self.terms.iter().zip(s) {
            total += (t.range - p.distance(*si)).powi(2) / self.range_variance + si.distance(t.center).powi(2) / t.variance;
        }
        total + self.penalty.map_or(0.0, |m| m.value(p))
    }

    /// Gradient of [`value`](Self::value): `(∂/∂p, ∂/∂s_i …)`.
    pub fn gradient(&self, p: Position2D, s: &[Position2D]) -> (Position2D, Vec<Position2D>) {
        let mut gp = self.penalty.map_or(Position2D::new(0.0, 0.0), |m| m.gradient(p));
        let mut gs = Vec::with_capacity(s.len());
        for (t, si) in self.terms.iter().zip(s) {
            let d = p - *si;
            let dist = d.norm();
            let e = t.range - dist;
            let u = if dist > 0.0 { d * (1.0 / dist) } else { Position2D::new(0.0, 0.0) };
            gp = gp - u * (2.0 * e / self.range_variance);
            gs.push(u * (2.0 * e / self.range_variance) + (*si - t.center) * (2.0 / t.variance));
        }
        (gp, gs)
    }

    /// Best anchor position for a fixed target: on the ray from `p` through
    /// the disc centre, at the variance-weighted blend of range and prior
    /// distance, clamped to the disc.
    pub fn best_anchor(&self, p: Position2D, i: usize) -> Position2D {
        let t = &self.terms[i];
        let d = t.center - p;
        let dist = d.norm();
        if dist == 0.0 {
            return t.center;
        }
        let blend = (t.range / self.range_variance + dist / t.variance) / (1.0 / self.range_variance + 1.0 / t.variance);
        let rho = blend.clamp((dist - t.radius).max(0.0), dist + t.radius);
        let s = p + d * (rho / dist);
        // same rounding guard as the swarm projection
        BallRegion { center: t.center, radius: t.radius }.project(s)
    }

    pub fn best_anchors(&self, p: Position2D) -> Vec<Position2D> {
        (0..self.terms.len()).map(|i| self.best_anchor(p, i)).collect()
    }

    /// Objective minimised over the anchors for fixed `p`.
    pub fn profiled_value(&self, p: Position2D) -> f64 {
        let mut total = 0.0;
        for (i, t) in self.terms.iter().enumerate() {
            let s = self.best_anchor(p, i);
            total += (t.range - p.distance(s)).powi(2) / self.range_variance + s.distance(t.center).powi(2) / t.variance;
        }
        total + self.penalty.map_or(0.0, |m| m.value(p))
    }

    /// Gradient of [`profiled_value`](Self::profiled_value) (envelope theorem).
    pub fn profiled_gradient(&self, p: Position2D) -> Position2D {
        let s = self.best_anchors(p);
        self.gradient(p, &s).0
    }
}

fn belief_regions(problem: &LocalizeProblem, options: &LocalizeOptions) -> Vec<(Position2D, f64, f64)> {
    problem
        .anchors
        .iter()
        .map(|a| {
            let var = a.variance();
            let radius = problem.search_radius_anchor.unwrap_or(options.anchor_sigmas * var.sqrt());
            (a.observed_pos, var, radius)
        })
        .collect()
}

fn objective_from(regions: &[(Position2D, f64, f64)], ranges: &[f64], sigma: f64, penalty: Option<MotionPenalty>) -> Objective {
    Objective {
        terms: regions
            .iter()
            .zip(ranges)
            .map(|(&(center, variance, radius), &range)| AnchorTerm { center, variance, range, radius })
            .collect(),
        range_variance: sigma * sigma,
        penalty,
    }
}

struct StepResult {
    pos: Position2D,
    anchors: Vec<Position2D>,
    value: f64,
}

fn run_step(objective: &Objective, target: BallRegion, options: &LocalizeOptions, label: &str) -> Result<StepResult> {
    let swarm = options.swarm.with_seed(derive_seed(options.swarm.seed, &[label_hash(label)]));
    match options.route {
        Route::Profiled => {
            let f = |q: &[Position2D]| if options.in_area(q[0]) { objective.profiled_value(q[0]) } else { f64::INFINITY };
            let r = minimize(f, &[target], &swarm)?;
            let pos = r.point[0];
            Ok(StepResult { pos, anchors: objective.best_anchors(pos), value: r.value })
        }
        Route::Joint => {
            let mut regions = vec![target];
            for t in &objective.terms {
                regions.push(BallRegion::new(t.center, t.radius)?);
            }
            let f = |q: &[Position2D]| if options.in_area(q[0]) { objective.value(q[0], &q[1..]) } else { f64::INFINITY };
            let r = minimize(f, &regions, &swarm)?;
            Ok(StepResult { pos: r.point[0], anchors: r.point[1..].to_vec(), value: r.value })
        }
    }
}

/// Target discs to search.
///
/// When the iChan fit agrees with every range to within `3σ + anchor_sigmas·σ_ci`
/// the disc is centred on it, and the disc mirrored across the anchors'
/// best-fit line is added if its centre fits the ranges as well: nearly
/// collinear anchors leave one likelihood basin on each side of the line and
/// a swarm started in one rarely crosses to the other. An inconsistent fit is
/// replaced by the intersections of the range circles of the two most widely
/// separated anchors.
fn target_regions(problem: &LocalizeProblem, options: &LocalizeOptions) -> Result<Vec<BallRegion>> {
    let fit = match ichan_estimate(&problem.observed(), &problem.ranges, &options.ichan) {
        Ok(fit) => Some(fit),
        Err(Error::NumericalFailure(_)) => None,
        Err(e) => return Err(e),
    };
    if let (Some(fit), Some(r)) = (&fit, problem.search_radius_target) {
        return Ok(vec![BallRegion::new(fit.pos, r)?]);
    }
    let consistent = |q: Position2D, slack: f64| {
        problem
            .anchors
            .iter()
            .zip(&problem.ranges)
            .all(|(a, &r)| (q.distance(a.observed_pos) - r).abs() <= range_margin(problem, options, a) + slack)
    };
    let slack = fit.as_ref().map_or(0.0, |f| f.residual_rms);
    let mut regions = Vec::new();
    if let Some(fit) = fit.filter(|f| consistent(f.pos, 0.0)) {
        let primary = BallRegion::new(fit.pos, target_radius(problem, options, fit.pos, fit.residual_rms)?)?;
        regions.push(primary);
        if let Some(m) = reflect_across_anchor_line(primary.center, &problem.observed()) {
            if m.distance(primary.center) > primary.radius && consistent(m, primary.radius) {
                regions.push(BallRegion::new(m, primary.radius)?);
            }
        }
    } else {
        for c in widest_pair_intersections(problem) {
            regions.push(BallRegion::new(c, target_radius(problem, options, c, slack)?)?);
        }
    }
    if regions.iter().any(|r| options.meets_area(r)) {
        regions.retain(|r| options.meets_area(r));
    }
    if regions.is_empty() {
        return Err(Error::DegenerateGeometry("no starting region for the target".into()));
    }
    Ok(regions)
}

fn range_margin(problem: &LocalizeProblem, options: &LocalizeOptions, a: &AnchorBelief) -> f64 {
    3.0 * problem.sigma + options.anchor_sigmas * a.variance().sqrt()
}

/// Disc radius around a coarse centre: range noise (or the fit residual), the
/// worst anchor spread and three single-hop standard deviations at `center`,
/// so poorly conditioned geometry widens the search.
fn target_radius(problem: &LocalizeProblem, options: &LocalizeOptions, center: Position2D, residual: f64) -> Result<f64> {
    let worst = problem.anchors.iter().map(|a| a.variance()).fold(0.0, f64::max);
    let spread = target_crlb(center, problem)?;
    Ok((3.0 * problem.sigma).max(residual) + options.anchor_sigmas * worst.sqrt() + 3.0 * spread.sqrt())
}

/// Intersections of the range circles of the two most separated anchors; one
/// point when the circles miss each other.
fn widest_pair_intersections(problem: &LocalizeProblem) -> Vec<Position2D> {
    let obs = problem.observed();
    let mut pair = (0, 1);
    let mut widest = -1.0;
    for i in 0..obs.len() {
        for j in i + 1..obs.len() {
            let d = obs[i].distance(obs[j]);
            if d > widest {
                widest = d;
                pair = (i, j);
            }
        }
    }
    let (a, b) = (obs[pair.0], obs[pair.1]);
    let (ra, rb) = (problem.ranges[pair.0].abs(), problem.ranges[pair.1].abs());
    if widest <= 0.0 {
        return Vec::new();
    }
    let u = (b - a) * (1.0 / widest);
    let along = ((widest * widest + ra * ra - rb * rb) / (2.0 * widest)).clamp(-ra, ra);
    let h = (ra * ra - along * along).max(0.0).sqrt();
    let foot = a + u * along;
    let normal = Position2D::new(-u.y, u.x);
    if h == 0.0 {
        vec![foot]
    } else {
        vec![foot + normal * h, foot - normal * h]
    }
}

/// Reflection of `p` across the total-least-squares line through `points`.
fn reflect_across_anchor_line(p: Position2D, points: &[Position2D]) -> Option<Position2D> {
    let n = points.len() as f64;
    let c = points.iter().fold(Position2D::new(0.0, 0.0), |acc, &q| acc + q) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for q in points {
        let d = *q - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    if sxx + syy == 0.0 {
        return None;
    }
    // principal direction of the scatter
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let u = Position2D::new(angle.cos(), angle.sin());
    let d = p - c;
    let along = d.x * u.x + d.y * u.y;
    Some(c + u * (2.0 * along) - d)
}

fn target_crlb(pos: Position2D, problem: &LocalizeProblem) -> Result<f64> {
    let locals: Vec<LocalAnchor> =
        problem.anchors.iter().map(|a| LocalAnchor { pos: a.observed_pos, prior_var: a.variance() }).collect();
    Ok(local_bounds(pos, &locals, problem.sigma)?.target)
}

/// Step one: joint CRLB-weighted fit against the anchors as given.
fn step_one(problem: &LocalizeProblem, options: &LocalizeOptions) -> Result<(BallRegion, Objective, StepResult)> {
    problem.validate()?;
    let objective = objective_from(&belief_regions(problem, options), &problem.ranges, problem.sigma, None);
    let mut best: Option<(BallRegion, StepResult)> = None;
    for (k, region) in target_regions(problem, options)?.into_iter().enumerate() {
        let label = if k == 0 { "step-one".to_owned() } else { format!("step-one-{k}") };
        // a disc that only grazes the deployment area may hold no feasible sample
        let r = match run_step(&objective, region, options, &label) {
            Ok(r) => r,
            Err(Error::OptimizationFailed(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().map_or(true, |(_, b)| r.value < b.value) {
            best = Some((region, r));
        }
    }
    let (target, result) = best.ok_or_else(|| Error::OptimizationFailed("no feasible point in any target disc".into()))?;
    Ok((target, objective, result))
}

fn finish(pos: Position2D, problem: &LocalizeProblem, method: Method, updated_anchors: Vec<UpdatedAnchor>) -> Result<Estimate> {
    if !pos.is_finite() {
        return Err(Error::NumericalFailure(format!("{method} produced a non-finite estimate")));
    }
    Ok(Estimate { pos, crlb: target_crlb(pos, problem)?, method, updated_anchors })
}

/// Level-1 maximum-likelihood fit: the target and its (base) anchors jointly.
pub fn locate_level1(problem: &LocalizeProblem, options: &LocalizeOptions) -> Result<Estimate> {
    let (_, _, r) = step_one(problem, options)?;
    finish(r.pos, problem, Method::Level1Mle, Vec::new())
}

/// Single CRLB-weighted swarm fit, no anchor refresh.
pub fn direct_pso(problem: &LocalizeProblem, options: &LocalizeOptions) -> Result<Estimate> {
    let (_, _, r) = step_one(problem, options)?;
    finish(r.pos, problem, Method::DirectPso, Vec::new())
}

fn two_step(problem: &LocalizeProblem, options: &LocalizeOptions, penalty: Option<MotionPenalty>, method: Method) -> Result<Estimate> {
    let (target, _, first) = step_one(problem, options)?;

    // refreshed beliefs: s̃′ from step one, (σ_ci²)′ from the single-hop bound at p̂₁
    let locals: Vec<LocalAnchor> = first
        .anchors
        .iter()
        .zip(&problem.anchors)
        .map(|(&pos, a)| LocalAnchor { pos, prior_var: a.variance() })
        .collect();
    let refreshed = local_bounds(first.pos, &locals, problem.sigma)?.anchors;
    let updated: Vec<UpdatedAnchor> = problem
        .anchors
        .iter()
        .zip(&first.anchors)
        .zip(&refreshed)
        .map(|((a, &pos), &crlb)| UpdatedAnchor { id: a.id.clone(), pos, crlb: crlb.max(CRLB_FLOOR) })
        .collect();

    let regions: Vec<(Position2D, f64, f64)> = updated
        .iter()
        .map(|u| (u.pos, u.crlb, problem.search_radius_anchor.unwrap_or(options.anchor_sigmas * u.crlb.sqrt())))
        .collect();
    let plain = objective_from(&regions, &problem.ranges, problem.sigma, None);
    let fixed = run_step(&plain, target, options, "step-two")?;
    let pos = match penalty.filter(|m| m.eta > 0.0) {
        None => fixed.pos,
        Some(m) => {
            let moved = run_step(&objective_from(&regions, &problem.ranges, problem.sigma, Some(m)), target, options, "step-two")?.pos;
            // a previous estimate the current ranges reject is stale: drop it
            let excess = plain.profiled_value(moved) - plain.profiled_value(fixed.pos);
            if excess > STALE_PRIOR_GATE {
                fixed.pos
            } else {
                moved
            }
        }
    };
    finish(pos, problem, method, updated)
}

/// Two-step CRLB-weighted localization.
pub fn two_step_static(problem: &LocalizeProblem, options: &LocalizeOptions) -> Result<Estimate> {
    two_step(problem, options, None, Method::TwoStepStatic)
}

/// Two-step localization with the motion penalty added to step two. The
/// penalised fit is kept only while the ranges accept it (see
/// [`STALE_PRIOR_GATE`]); otherwise the static step-two fit is returned.
pub fn two_step_dynamic(problem: &LocalizeProblem, options: &LocalizeOptions, penalty: MotionPenalty) -> Result<Estimate> {
    two_step(problem, options, Some(penalty), Method::TwoStepDynamic)
}

pub fn lls_baseline(problem: &LocalizeProblem) -> Result<Estimate> {
    problem.validate()?;
    let pos = lls(&problem.observed(), &problem.ranges)?;
    finish(pos, problem, Method::Lls, Vec::new())
}

pub fn cwlls_baseline(problem: &LocalizeProblem) -> Result<Estimate> {
    problem.validate()?;
    let pos = cwlls(&problem.observed(), &problem.ranges)?;
    finish(pos, problem, Method::Cwlls, Vec::new())
}

pub fn ichan_method(problem: &LocalizeProblem, options: &LocalizeOptions) -> Result<Estimate> {
    problem.validate()?;
    let pos = ichan_estimate(&problem.observed(), &problem.ranges, &options.ichan)?.pos;
    finish(pos, problem, Method::Ichan, Vec::new())
}

/// Dispatch by method. `penalty` is used by [`Method::TwoStepDynamic`] only;
/// without one that method falls back to the static two-step result.
pub fn locate(method: Method, problem: &LocalizeProblem, options: &LocalizeOptions, penalty: Option<MotionPenalty>) -> Result<Estimate> {
    match method {
        Method::Level1Mle => locate_level1(problem, options),
        Method::TwoStepStatic => two_step_static(problem, options),
        Method::TwoStepDynamic => match penalty {
            Some(m) => two_step_dynamic(problem, options, m),
            None => two_step(problem, options, None, Method::TwoStepDynamic),
        },
        Method::DirectPso => direct_pso(problem, options),
        Method::Lls => lls_baseline(problem),
        Method::Cwlls => cwlls_baseline(problem),
        Method::Ichan => ichan_method(problem, options),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level2_problem(sigma: f64, crlb: f64) -> (LocalizeProblem, Position2D) {
        let t = Position2D::new(600.0, 450.0);
        let anchors: Vec<AnchorBelief> = [("L1", 431.0, 232.0), ("L2", 324.0, 577.0), ("L3", 200.0, 398.0), ("L4", 498.0, 245.0)]
            .iter()
            .map(|&(id, x, y)| AnchorBelief::new(id, Position2D::new(x, y), crlb))
            .collect();
        let ranges = anchors.iter().map(|a| a.observed_pos.distance(t)).collect();
        (LocalizeProblem::new(anchors, ranges, sigma), t)
    }

    #[test]
    fn noiseless_two_step_recovers_truth_and_anchors() {
        let (pr, t) = level2_problem(1e-6, 1e-12);
        let e = two_step_static(&pr, &LocalizeOptions::default()).unwrap();
        assert!(e.pos.distance(t) < 1e-2, "{}", e.pos);
        for (u, a) in e.updated_anchors.iter().zip(&pr.anchors) {
            assert!(u.pos.distance(a.observed_pos) < 1e-2);
        }
        assert!(e.crlb > 0.0);
    }

    #[test]
    fn three_anchor_exact_case() {
        let t = Position2D::new(20.0, 30.0);
        let anchors = vec![
            AnchorBelief::new("a", Position2D::new(0.0, 0.0), 1e-12),
            AnchorBelief::new("b", Position2D::new(100.0, 0.0), 1e-12),
            AnchorBelief::new("c", Position2D::new(0.0, 100.0), 1e-12),
        ];
        let ranges = anchors.iter().map(|a| a.observed_pos.distance(t)).collect();
        let pr = LocalizeProblem::new(anchors, ranges, 1e-6);
        let e = locate_level1(&pr, &LocalizeOptions::default()).unwrap();
        assert!(e.pos.distance(t) < 1e-2);
    }

    #[test]
    fn best_anchor_is_the_profile_minimum() {
        // compare the closed form with a dense scan over the disc
        let obj = Objective {
            terms: vec![AnchorTerm { center: Position2D::new(10.0, 5.0), variance: 4.0, range: 9.0, radius: 6.0 }],
            range_variance: 25.0,
            penalty: None,
        };
        let p = Position2D::new(-3.0, 1.0);
        let best = obj.best_anchor(p, 0);
        let closed = obj.value(p, &[best]);
        let mut scan = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let s = Position2D::new(4.0 + 12.0 * i as f64 / 400.0, -1.0 + 12.0 * j as f64 / 400.0);
                if s.distance(Position2D::new(10.0, 5.0)) <= 6.0 {
                    scan = scan.min(obj.value(p, &[s]));
                }
            }
        }
        assert!(closed <= scan + 1e-12);
        assert!(scan - closed < 1e-3);
        // unclamped profile value (r − D)² / (σ² + σ_c²)
        let d = p.distance(Position2D::new(10.0, 5.0));
        assert!((obj.profiled_value(p) - (9.0 - d).powi(2) / 29.0).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        let (mut pr, _) = level2_problem(5.0, 9.0);
        pr.ranges.pop();
        assert!(matches!(two_step_static(&pr, &LocalizeOptions::default()), Err(Error::InvalidInput(_))));
        let (mut pr, _) = level2_problem(5.0, 9.0);
        pr.anchors.truncate(2);
        pr.ranges.truncate(2);
        assert!(matches!(lls_baseline(&pr), Err(Error::DegenerateGeometry(_))));
        assert!(MotionPenalty::new(Position2D::new(0.0, 0.0), 10.0, 0.0, 0.1).is_err());
        assert_eq!(Method::parse("two-step"), Some(Method::TwoStepStatic));
        assert_eq!(Method::parse("nope"), None);
    }
}
