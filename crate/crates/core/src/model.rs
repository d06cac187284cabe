//! Domain types, scenario construction and synthesis of noisy observations.
//!
//! Base-anchor positions are observed with additive isotropic Gaussian noise
//! of standard deviation `delta` per component; every link within the
//! communication radius yields one range sample `‖p − s‖ + n` with
//! `n ~ N(0, sigma²)`. Negative ranges are kept as drawn.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Position2D) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Position2D) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotate counter-clockwise by `angle` radians about the origin.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Position2D {
    type Output = Position2D;
    fn add(self, rhs: Position2D) -> Position2D {
        Position2D::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Position2D {
    type Output = Position2D;
    fn sub(self, rhs: Position2D) -> Position2D {
        Position2D::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Position2D {
    type Output = Position2D;
    fn mul(self, k: f64) -> Position2D {
        Position2D::new(self.x * k, self.y * k)
    }
}

impl fmt::Display for Position2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

// ---------------------------------------------------------------------------
// Nodes and scenarios
// ---------------------------------------------------------------------------

/// Opaque node identifier, unique within a scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "base")]
    BaseAnchor,
    #[serde(rename = "blind")]
    Blind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub true_pos: Position2D,
    pub role: Role,
}

impl Node {
    pub fn new(id: impl Into<String>, true_pos: Position2D, role: Role) -> Self {
        Self { id: NodeId::new(id), true_pos, role }
    }

    pub fn is_base(&self) -> bool {
        self.role == Role::BaseAnchor
    }
}

/// Ranging noise `sigma` and base-anchor position noise `delta`, both standard
/// deviations in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma: f64,
    pub delta: f64,
}

impl NoiseParams {
    pub fn new(sigma: f64, delta: f64) -> Result<Self> {
        let n = Self { sigma, delta };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidNoise(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidNoise(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// The simulated world: nodes, communication radius, noise and root seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    pub comm_radius: f64,
    pub noise: NoiseParams,
    pub dimension: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(nodes: Vec<Node>, comm_radius: f64, noise: NoiseParams, seed: u64) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if !n.true_pos.is_finite() {
                return Err(Error::InvalidScenario(format!("node `{}` has a non-finite position", n.id)));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::InvalidScenario(format!("duplicate node id `{}`", n.id)));
            }
        }
        if !(comm_radius > 0.0) {
            return Err(Error::InvalidScenario(format!("comm_radius must be > 0, got {comm_radius}")));
        }
        noise.validate()?;
        let dimension = 2;
        let bases = nodes.iter().filter(|n| n.is_base()).count();
        if bases < dimension + 1 {
            return Err(Error::InvalidScenario(format!(
                "at least {} base anchors required, got {bases}",
                dimension + 1
            )));
        }
        Ok(Self { nodes, index, comm_radius, noise, dimension, seed })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    pub fn node(&self, id: &str) -> Result<&Node> {
        Ok(&self.nodes[self.index_of(id)?])
    }

    pub fn position(&self, id: &str) -> Result<Position2D> {
        Ok(self.node(id)?.true_pos)
    }

    /// Replace every true position (same order as `nodes()`).
    pub fn set_positions(&mut self, positions: &[Position2D]) -> Result<()> {
        if positions.len() != self.nodes.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} positions, got {}",
                self.nodes.len(),
                positions.len()
            )));
        }
        for (n, &p) in self.nodes.iter_mut().zip(positions) {
            n.true_pos = p;
        }
        Ok(())
    }

    pub fn with_noise(&self, noise: NoiseParams) -> Result<Self> {
        noise.validate()?;
        let mut s = self.clone();
        s.noise = noise;
        Ok(s)
    }

    /// True if the two nodes are within communication range.
    pub fn linked(&self, a: usize, b: usize) -> bool {
        a != b && self.nodes[a].true_pos.distance(self.nodes[b].true_pos) <= self.comm_radius
    }
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey(NodeId, NodeId);

impl LinkKey {
    pub fn new(a: &NodeId, b: &NodeId) -> Self {
        if a <= b {
            Self(a.clone(), b.clone())
        } else {
            Self(b.clone(), a.clone())
        }
    }

    pub fn ends(&self) -> (&NodeId, &NodeId) {
        (&self.0, &self.1)
    }
}

/// Observations for one sampling instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    pub observed_anchor_pos: BTreeMap<NodeId, Position2D>,
    pub ranges: BTreeMap<LinkKey, f64>,
    /// Reserved per-link standard deviations; no algorithm reads it.
    pub link_sigma: Option<BTreeMap<LinkKey, f64>>,
}

impl MeasurementSet {
    /// Range between `a` and `b` in either order.
    pub fn range(&self, a: &NodeId, b: &NodeId) -> Option<f64> {
        self.ranges.get(&LinkKey::new(a, b)).copied()
    }

    pub fn anchor(&self, id: &str) -> Option<Position2D> {
        self.observed_anchor_pos.get(id).copied()
    }

    pub fn to_record(&self) -> MeasurementRecord {
        MeasurementRecord {
            anchors: self
                .observed_anchor_pos
                .iter()
                .map(|(id, p)| AnchorObservation { id: id.clone(), x: p.x, y: p.y })
                .collect(),
            ranges: self
                .ranges
                .iter()
                .map(|(k, &r)| RangeObservation {
                    a: k.0.clone(),
                    b: k.1.clone(),
                    range: r,
                    sigma: self.link_sigma.as_ref().and_then(|m| m.get(k).copied()),
                })
                .collect(),
        }
    }
}

/// Serializable form of a [`MeasurementSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub anchors: Vec<AnchorObservation>,
    pub ranges: Vec<RangeObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorObservation {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeObservation {
    pub a: NodeId,
    pub b: NodeId,
    pub range: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Observed base-anchor position: `pos + β`, `β ~ N(0, delta² I)`.
pub fn perturb_anchor<R: Rng + ?Sized>(pos: Position2D, delta: f64, rng: &mut R) -> Position2D {
    let bx = gaussian(rng);
    let by = gaussian(rng);
    Position2D::new(pos.x + delta * bx, pos.y + delta * by)
}

/// Observed distance `‖p − s‖ + n`, `n ~ N(0, sigma²)`.
pub fn observe_distance<R: Rng + ?Sized>(p: Position2D, s: Position2D, sigma: f64, rng: &mut R) -> f64 {
    p.distance(s) + sigma * gaussian(rng)
}

/// Draw one observation set: a perturbed position per base anchor, one range
/// per unordered pair within the communication radius.
pub fn synthesize_measurements<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> MeasurementSet {
    let NoiseParams { sigma, delta } = scenario.noise;
    let mut out = MeasurementSet::default();
    for n in scenario.nodes().iter().filter(|n| n.is_base()) {
        out.observed_anchor_pos.insert(n.id.clone(), perturb_anchor(n.true_pos, delta, rng));
    }
    let nodes = scenario.nodes();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if scenario.linked(i, j) {
                let r = observe_distance(nodes[i].true_pos, nodes[j].true_pos, sigma, rng);
                out.ranges.insert(LinkKey::new(&nodes[i].id, &nodes[j].id), r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};
    use crate::scenarios::nine_node_scenario;

    #[test]
    fn zero_delta_is_identity() {
        let mut rng = substream(1, 0, Purpose::Other(0));
        let p = Position2D::new(134.0, 103.0);
        assert_eq!(perturb_anchor(p, 0.0, &mut rng), p);
    }

    #[test]
    fn anchor_noise_moments() {
        let mut rng = substream(11, 0, Purpose::Other(0));
        let n = 100_000;
        let (mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let q = perturb_anchor(Position2D::new(0.0, 0.0), 3.0, &mut rng);
            sx += q.x;
            sy += q.y;
            sxx += q.x * q.x;
            syy += q.y * q.y;
        }
        let nf = n as f64;
        let (mx, my) = (sx / nf, sy / nf);
        let sdx = (sxx / nf - mx * mx).sqrt();
        let sdy = (syy / nf - my * my).sqrt();
        assert!(mx.abs() < 0.05 && my.abs() < 0.05, "means {mx} {my}");
        assert!((2.95..=3.05).contains(&sdx) && (2.95..=3.05).contains(&sdy), "sds {sdx} {sdy}");
    }

    #[test]
    fn anchor_noise_is_seed_deterministic() {
        let p = Position2D::new(35.0, 264.0);
        let a = perturb_anchor(p, 3.0, &mut substream(42, 1, Purpose::Measurements));
        let b = perturb_anchor(p, 3.0, &mut substream(42, 1, Purpose::Measurements));
        assert_eq!(a.x.to_bits(), b.x.to_bits());
        assert_eq!(a.y.to_bits(), b.y.to_bits());
    }

    #[test]
    fn noiseless_distances() {
        let mut rng = substream(1, 0, Purpose::Other(0));
        let d = observe_distance(Position2D::new(0.0, 0.0), Position2D::new(3.0, 4.0), 0.0, &mut rng);
        assert_eq!(d, 5.0);
        let d = observe_distance(Position2D::new(600.0, 450.0), Position2D::new(431.0, 232.0), 0.0, &mut rng);
        // √(169² + 218²)
        assert!((d - 275.835).abs() < 1e-3, "{d}");
    }

    #[test]
    fn range_noise_mean() {
        let mut rng = substream(5, 0, Purpose::Other(0));
        let n = 100_000;
        let mean = (0..n)
            .map(|_| observe_distance(Position2D::new(0.0, 0.0), Position2D::new(100.0, 0.0), 5.0, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 100.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn synthesized_links_follow_radius() {
        let sc = nine_node_scenario(5.0, 3.0);
        let m = synthesize_measurements(&sc, &mut substream(3, 0, Purpose::Measurements));
        let id = |x: f64, y: f64| {
            sc.nodes().iter().find(|n| n.true_pos == Position2D::new(x, y)).unwrap().id.clone()
        };
        assert!(m.range(&id(431.0, 232.0), &id(134.0, 103.0)).is_some());
        assert!(m.range(&id(600.0, 450.0), &id(134.0, 103.0)).is_none());
        // symmetric lookup
        assert_eq!(m.range(&id(431.0, 232.0), &id(134.0, 103.0)), m.range(&id(134.0, 103.0), &id(431.0, 232.0)));
        assert_eq!(m.observed_anchor_pos.len(), 4);
        let edges = (0..sc.len())
            .flat_map(|i| ((i + 1)..sc.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| sc.linked(i, j))
            .count();
        assert_eq!(m.ranges.len(), edges);
    }

    #[test]
    fn noiseless_synthesis_is_exact() {
        let sc = nine_node_scenario(0.0, 0.0);
        let m = synthesize_measurements(&sc, &mut substream(9, 0, Purpose::Measurements));
        for (k, &r) in &m.ranges {
            let (a, b) = k.ends();
            let d = sc.position(a.as_str()).unwrap().distance(sc.position(b.as_str()).unwrap());
            assert_eq!(r, d);
        }
        for (id, p) in &m.observed_anchor_pos {
            assert_eq!(*p, sc.position(id.as_str()).unwrap());
        }
    }

    #[test]
    fn synthesis_is_byte_deterministic() {
        let sc = nine_node_scenario(5.0, 3.0);
        let a = synthesize_measurements(&sc, &mut substream(77, 2, Purpose::Measurements));
        let b = synthesize_measurements(&sc, &mut substream(77, 2, Purpose::Measurements));
        let ja = serde_json::to_string(&a.to_record()).unwrap();
        let jb = serde_json::to_string(&b.to_record()).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn scenario_validation() {
        let noise = NoiseParams::new(1.0, 1.0).unwrap();
        let base = |id: &str, x: f64| Node::new(id, Position2D::new(x, 0.0), Role::BaseAnchor);
        assert!(Scenario::new(vec![base("a", 0.0), base("b", 1.0)], 10.0, noise, 0).is_err());
        assert!(Scenario::new(vec![base("a", 0.0), base("a", 1.0), base("c", 2.0)], 10.0, noise, 0).is_err());
        assert!(Scenario::new(vec![base("a", 0.0), base("b", 1.0), base("c", 2.0)], 0.0, noise, 0).is_err());
        assert!(Scenario::new(vec![base("a", 0.0), base("b", 1.0), base("c", 2.0)], 10.0, noise, 0).is_ok());
        assert!(NoiseParams::new(-1.0, 0.0).is_err());
    }
}
