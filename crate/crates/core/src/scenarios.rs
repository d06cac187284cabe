//! Bundled scenarios: the nine-node desk scenario and a seeded generator for
//! the 50-node mobile network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Node, NoiseParams, Position2D, Role, Scenario};
use crate::rng::{substream, Purpose};

/// Communication radius of the bundled scenarios.
pub const REFERENCE_RADIUS: f64 = 500.0;

/// Base anchors `A..D`, level-1 nodes `L1..L4`, level-2 target `T`.
pub const NINE_NODE_LAYOUT: [(&str, f64, f64, Role); 9] = [
    ("A", 134.0, 103.0, Role::BaseAnchor),
    ("B", 155.0, 205.0, Role::BaseAnchor),
    ("C", 103.0, 220.0, Role::BaseAnchor),
    ("D", 35.0, 264.0, Role::BaseAnchor),
    ("L1", 431.0, 232.0, Role::Blind),
    ("L2", 324.0, 577.0, Role::Blind),
    ("L3", 200.0, 398.0, Role::Blind),
    ("L4", 498.0, 245.0, Role::Blind),
    ("T", 600.0, 450.0, Role::Blind),
];

/// Deployment rectangle of the nine-node scenario.
pub const NINE_NODE_AREA: [f64; 4] = [0.0, 0.0, 1000.0, 1000.0];

/// Id of the level-2 node of the nine-node scenario.
pub const NINE_NODE_TARGET: &str = "T";

/// The nine-node scenario: four noisy base anchors, four level-1 nodes and one
/// level-2 node, radius 500 m.
pub fn nine_node_scenario(sigma: f64, delta: f64) -> Scenario {
    let nodes = NINE_NODE_LAYOUT
        .iter()
        .map(|&(id, x, y, role)| Node::new(id, Position2D::new(x, y), role))
        .collect();
    Scenario::new(nodes, REFERENCE_RADIUS, NoiseParams { sigma, delta }, 0)
        .expect("nine-node layout is valid")
}

/// Layout of the random mobile network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManetLayout {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_base")]
    pub base_nodes: usize,
    /// Arena `[x0, y0, x1, y1]`.
    #[serde(default = "default_area")]
    pub area: [f64; 4],
    /// Region the base anchors are drawn from, `[x0, y0, x1, y1]`.
    #[serde(default = "default_base_region")]
    pub base_region: [f64; 4],
}

fn default_nodes() -> usize {
    50
}
fn default_base() -> usize {
    4
}
fn default_area() -> [f64; 4] {
    [0.0, 0.0, 1000.0, 1000.0]
}
fn default_base_region() -> [f64; 4] {
    [0.0, 0.0, 300.0, 300.0]
}

impl Default for ManetLayout {
    fn default() -> Self {
        Self {
            nodes: default_nodes(),
            base_nodes: default_base(),
            area: default_area(),
            base_region: default_base_region(),
        }
    }
}

/// Uniform placement over the arena with the base anchors drawn uniformly from
/// the corner base region. Base ids are `b0..`, blind ids `n00..`.
pub fn manet_scenario(layout: &ManetLayout, comm_radius: f64, noise: NoiseParams, seed: u64) -> Result<Scenario> {
    if layout.base_nodes > layout.nodes {
        return Err(Error::InvalidScenario("more base nodes than nodes".into()));
    }
    for r in [&layout.area, &layout.base_region] {
        if !(r[2] > r[0] && r[3] > r[1]) {
            return Err(Error::InvalidScenario(format!("empty rectangle {r:?}")));
        }
    }
    let mut rng = substream(seed, 0, Purpose::Placement);
    let mut draw = |r: &[f64; 4]| Position2D::new(rng.gen_range(r[0]..r[2]), rng.gen_range(r[1]..r[3]));
    let mut nodes = Vec::with_capacity(layout.nodes);
    for i in 0..layout.base_nodes {
        nodes.push(Node::new(format!("b{i}"), draw(&layout.base_region), Role::BaseAnchor));
    }
    let blind = layout.nodes - layout.base_nodes;
    let width = blind.saturating_sub(1).to_string().len().max(2);
    for i in 0..blind {
        nodes.push(Node::new(format!("n{i:0width$}"), draw(&layout.area), Role::Blind));
    }
    Scenario::new(nodes, comm_radius, noise, seed)
}
