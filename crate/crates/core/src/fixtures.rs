//! The small reference trees used throughout the tests and examples.

use crate::tree::{Node, ScenarioTree};

pub const THREE_STAGE_LEFT: &str = include_str!("../data/three_stage_left.json");
pub const THREE_STAGE_RIGHT: &str = include_str!("../data/three_stage_right.json");

fn node(id: i64, parent: Option<i64>, state: f64, prob: f64) -> Node {
    Node {
        id,
        parent,
        state,
        cond_prob: prob,
    }
}

/// Two-stage pair with identical leaf distributions but different
/// information flow. The left tree reveals the outcome at stage 1 (through
/// the state `2 + eps`), the right tree only at stage 2.
///
/// Leaves are ordered so that the flat cost matrix reads
/// `[[eps, 2 + eps], [2, 0]]`.
pub fn information_pair(eps: f64) -> (ScenarioTree, ScenarioTree) {
    let left = ScenarioTree::new(vec![
        node(0, None, 2.0, 1.0),
        node(1, Some(0), 2.0 + eps, 0.5),
        node(2, Some(0), 2.0, 0.5),
        node(3, Some(1), 3.0, 1.0),
        node(4, Some(2), 1.0, 1.0),
    ])
    .expect("information pair left tree is valid");
    let right = ScenarioTree::new(vec![
        node(0, None, 2.0, 1.0),
        node(1, Some(0), 2.0, 1.0),
        node(2, Some(1), 3.0, 0.5),
        node(3, Some(1), 1.0, 0.5),
    ])
    .expect("information pair right tree is valid");
    (left, right)
}

/// Three-stage pair: the left tree has 4 leaves, the right tree 9.
pub fn three_stage_pair() -> (ScenarioTree, ScenarioTree) {
    (
        THREE_STAGE_LEFT
            .parse()
            .expect("three-stage pair left tree is valid"),
        THREE_STAGE_RIGHT
            .parse()
            .expect("three-stage pair right tree is valid"),
    )
}

/// A single path of the given states (every node has one child).
pub fn path(states: &[f64]) -> ScenarioTree {
    let nodes = states
        .iter()
        .enumerate()
        .map(|(k, &s)| node(k as i64, k.checked_sub(1).map(|p| p as i64), s, 1.0))
        .collect();
    ScenarioTree::new(nodes).expect("a path is a valid tree")
}
