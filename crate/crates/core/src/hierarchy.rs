//! Localization levels and dynamic anchor sets.
//!
//! Base anchors sit at level 0. A blind node gets level `k` at the first round
//! in which it has at least `dimension + 1` neighbors of level `< k`, one of
//! them at exactly `k − 1`. Levels come from true positions; a node never
//! anchors on a peer of its own level.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NodeId, Scenario};

/// Level of every localizable node plus the set that never qualified.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LevelMap {
    pub levels: BTreeMap<NodeId, u32>,
    pub unlocalizable: BTreeSet<NodeId>,
}

impl LevelMap {
    pub fn level(&self, id: &str) -> Option<u32> {
        self.levels.get(id).copied()
    }

    pub fn max_level(&self) -> u32 {
        self.levels.values().copied().max().unwrap_or(0)
    }

    /// Nodes at `level`, ascending id.
    pub fn at_level(&self, level: u32) -> Vec<NodeId> {
        self.levels.iter().filter(|(_, &l)| l == level).map(|(id, _)| id.clone()).collect()
    }

    /// Nodes strictly below `level`, ordered by descending level then id.
    pub fn below(&self, level: u32) -> Vec<NodeId> {
        let mut v: Vec<(u32, &NodeId)> =
            self.levels.iter().filter(|(_, &l)| l < level).map(|(id, &l)| (l, id)).collect();
        v.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        v.into_iter().map(|(_, id)| id.clone()).collect()
    }
}

/// Lower-level neighbors usable as references for `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DynamicAnchorSet {
    pub target: NodeId,
    /// Ascending `(level, id)`.
    pub anchors: Vec<NodeId>,
}

impl DynamicAnchorSet {
    pub fn count(&self) -> usize {
        self.anchors.len()
    }
}

/// All nodes other than `node` within the communication radius.
pub fn neighbor_set(scenario: &Scenario, node: &str) -> Result<BTreeSet<NodeId>> {
    let i = scenario.index_of(node)?;
    Ok(neighbor_indices(scenario, i)
        .into_iter()
        .map(|j| scenario.nodes()[j].id.clone())
        .collect())
}

fn neighbor_indices(scenario: &Scenario, i: usize) -> Vec<usize> {
    (0..scenario.len()).filter(|&j| scenario.linked(i, j)).collect()
}

pub fn assign_levels(scenario: &Scenario) -> LevelMap {
    let n = scenario.len();
    let need = scenario.dimension + 1;
    let adjacency: Vec<Vec<usize>> = (0..n).map(|i| neighbor_indices(scenario, i)).collect();
    let mut level: Vec<Option<u32>> =
        scenario.nodes().iter().map(|nd| if nd.is_base() { Some(0) } else { None }).collect();

    let mut k = 1u32;
    loop {
        // Decide the whole round against the previous state so that peers
        // leveled in the same round never count for each other.
        let newly: Vec<usize> = (0..n)
            .filter(|&i| level[i].is_none())
            .filter(|&i| {
                let lower: Vec<u32> = adjacency[i].iter().filter_map(|&j| level[j]).filter(|&l| l < k).collect();
                lower.len() >= need && lower.contains(&(k - 1))
            })
            .collect();
        if newly.is_empty() {
            break;
        }
        for i in newly {
            level[i] = Some(k);
        }
        k += 1;
    }

    let mut map = LevelMap::default();
    for (nd, l) in scenario.nodes().iter().zip(level) {
        match l {
            Some(l) => {
                map.levels.insert(nd.id.clone(), l);
            }
            None => {
                map.unlocalizable.insert(nd.id.clone());
            }
        }
    }
    map
}

pub fn dynamic_anchor_set(scenario: &Scenario, level_map: &LevelMap, target: &str) -> Result<DynamicAnchorSet> {
    let i = scenario.index_of(target)?;
    let k = match level_map.level(target) {
        Some(k) if k >= 1 => k,
        _ => return Err(Error::Unleveled(target.to_owned())),
    };
    let mut anchors: Vec<(u32, NodeId)> = neighbor_indices(scenario, i)
        .into_iter()
        .filter_map(|j| {
            let id = &scenario.nodes()[j].id;
            level_map.level(id.as_str()).filter(|&l| l < k).map(|l| (l, id.clone()))
        })
        .collect();
    anchors.sort();
    Ok(DynamicAnchorSet {
        target: scenario.nodes()[i].id.clone(),
        anchors: anchors.into_iter().map(|(_, id)| id).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Node, NoiseParams, Position2D, Role};
    use crate::scenarios::nine_node_scenario;

    fn ids(v: &[&str]) -> BTreeSet<NodeId> {
        v.iter().map(|s| NodeId::from(*s)).collect()
    }

    #[test]
    fn target_neighbors_are_the_level_one_nodes() {
        let sc = nine_node_scenario(5.0, 3.0);
        assert_eq!(neighbor_set(&sc, "T").unwrap(), ids(&["L1", "L2", "L3", "L4"]));
        assert!(neighbor_set(&sc, "nope").is_err());
    }

    #[test]
    fn radius_limits() {
        let sc = nine_node_scenario(5.0, 3.0);
        let tiny = Scenario::new(sc.nodes().to_vec(), 1e-3, sc.noise, 0).unwrap();
        assert!(neighbor_set(&tiny, "T").unwrap().is_empty());
        let huge = Scenario::new(sc.nodes().to_vec(), 1e6, sc.noise, 0).unwrap();
        assert_eq!(neighbor_set(&huge, "T").unwrap().len(), 8);
    }

    #[test]
    fn nine_node_levels() {
        let sc = nine_node_scenario(5.0, 3.0);
        let lm = assign_levels(&sc);
        for b in ["A", "B", "C", "D"] {
            assert_eq!(lm.level(b), Some(0));
        }
        for l in ["L1", "L2", "L3", "L4"] {
            assert_eq!(lm.level(l), Some(1), "{l}");
        }
        assert_eq!(lm.level("T"), Some(2));
        assert!(lm.unlocalizable.is_empty());
        // L2 sees exactly three base anchors
        let l2 = dynamic_anchor_set(&sc, &lm, "L2").unwrap();
        assert_eq!(l2.count(), 3);
    }

    #[test]
    fn dynamic_anchor_sets() {
        let sc = nine_node_scenario(5.0, 3.0);
        let lm = assign_levels(&sc);
        let t = dynamic_anchor_set(&sc, &lm, "T").unwrap();
        assert_eq!(t.anchors, vec![NodeId::from("L1"), "L2".into(), "L3".into(), "L4".into()]);
        let l1 = dynamic_anchor_set(&sc, &lm, "L1").unwrap();
        assert_eq!(l1.anchors, vec![NodeId::from("A"), "B".into(), "C".into(), "D".into()]);
        assert!(matches!(dynamic_anchor_set(&sc, &lm, "A"), Err(Error::Unleveled(_))));
    }

    #[test]
    fn isolated_node_is_unlocalizable() {
        let mut nodes: Vec<Node> = ["A", "B", "C", "D"]
            .iter()
            .enumerate()
            .map(|(i, id)| Node::new(*id, Position2D::new(10.0 * i as f64, 0.0), Role::BaseAnchor))
            .collect();
        nodes.push(Node::new("far", Position2D::new(1e4, 1e4), Role::Blind));
        let sc = Scenario::new(nodes, 100.0, NoiseParams { sigma: 1.0, delta: 1.0 }, 0).unwrap();
        let lm = assign_levels(&sc);
        assert!(lm.unlocalizable.contains("far"));
    }

    #[test]
    fn fig_one_style_level_one_node() {
        // F sees exactly the four base anchors A-D.
        let mut nodes: Vec<Node> = [("A", 0.0, 0.0), ("B", 100.0, 0.0), ("C", 0.0, 100.0), ("D", 100.0, 100.0)]
            .iter()
            .map(|&(id, x, y)| Node::new(id, Position2D::new(x, y), Role::BaseAnchor))
            .collect();
        nodes.push(Node::new("F", Position2D::new(50.0, 50.0), Role::Blind));
        let sc = Scenario::new(nodes, 80.0, NoiseParams { sigma: 1.0, delta: 1.0 }, 0).unwrap();
        let lm = assign_levels(&sc);
        assert_eq!(lm.level("F"), Some(1));
        let d = dynamic_anchor_set(&sc, &lm, "F").unwrap();
        assert_eq!(d.anchors, vec![NodeId::from("A"), "B".into(), "C".into(), "D".into()]);
    }

    #[test]
    fn same_round_peers_do_not_anchor_each_other() {
        // P and Q each see two base anchors and each other; neither qualifies.
        let nodes = vec![
            Node::new("A", Position2D::new(0.0, 0.0), Role::BaseAnchor),
            Node::new("B", Position2D::new(10.0, 0.0), Role::BaseAnchor),
            Node::new("C", Position2D::new(200.0, 0.0), Role::BaseAnchor),
            Node::new("P", Position2D::new(5.0, 8.0), Role::Blind),
            Node::new("Q", Position2D::new(5.0, -8.0), Role::Blind),
        ];
        let sc = Scenario::new(nodes, 20.0, NoiseParams { sigma: 1.0, delta: 1.0 }, 0).unwrap();
        let lm = assign_levels(&sc);
        assert!(lm.unlocalizable.contains("P") && lm.unlocalizable.contains("Q"));
    }
}
