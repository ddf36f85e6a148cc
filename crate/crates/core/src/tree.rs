//! Scenario trees: finite filtered processes with node states and
//! conditional branch probabilities.
//!
//! A tree is read from a small JSON document
//!
//! ```json
//! {"nodes": [{"id": 0, "parent": null, "state": 10.0, "prob": 1.0},
//!            {"id": 1, "parent": 0,    "state": 12.0, "prob": 0.5}, ...]}
//! ```
//!
//! Node order in the file does not matter for validity, but it fixes the
//! order of siblings and therefore the order of leaves and trajectories.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Children probabilities within this distance of 1 are renormalized.
pub const PARSE_PROB_TOL: f64 = 1e-9;

/// One record of the tree file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: i64,
    pub parent: Option<i64>,
    pub state: f64,
    /// Probability of this node given its parent; 1 for the root.
    #[serde(rename = "prob")]
    pub cond_prob: f64,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    nodes: Vec<Node>,
}

/// A validated scenario tree. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ScenarioTree {
    nodes: Vec<Node>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    stage_pos: Vec<usize>,
    stages: Vec<Vec<usize>>,
    root: usize,
}

/// A root-to-leaf path with its unconditional probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<f64>,
    pub leaf_id: i64,
    pub prob: f64,
}

impl Trajectory {
    pub fn cost(&self, other: &Trajectory, r: f64) -> Result<f64> {
        ground_cost(&self.states, &other.states, r)
    }
}

impl ScenarioTree {
    /// Validates the node list and builds the tree. Children probabilities
    /// off by at most [`PARSE_PROB_TOL`] are renormalized to sum to one.
    pub fn new(mut nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTree("tree has no nodes".into()));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (k, node) in nodes.iter().enumerate() {
            if index.insert(node.id, k).is_some() {
                return Err(Error::InvalidTree(format!("duplicate id {}", node.id)));
            }
            if !node.state.is_finite() {
                return Err(Error::InvalidTree(format!(
                    "node {} has non-finite state",
                    node.id
                )));
            }
            if !(node.cond_prob.is_finite() && node.cond_prob > 0.0) {
                return Err(Error::InvalidTree(format!(
                    "node {} has nonpositive probability {}",
                    node.id, node.cond_prob
                )));
            }
        }

        let mut parent = vec![None; nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        let mut roots = Vec::new();
        for (k, node) in nodes.iter().enumerate() {
            match node.parent {
                None => roots.push(k),
                Some(pid) => {
                    let p = *index.get(&pid).ok_or_else(|| {
                        Error::InvalidTree(format!("node {} has dangling parent {}", node.id, pid))
                    })?;
                    parent[k] = Some(p);
                    children[p].push(k);
                }
            }
        }
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::InvalidTree("no root node".into())),
            _ => {
                return Err(Error::InvalidTree(format!(
                    "{} root nodes, expected exactly one",
                    roots.len()
                )))
            }
        };
        if (nodes[root].cond_prob - 1.0).abs() > PARSE_PROB_TOL {
            return Err(Error::InvalidTree(format!(
                "root probability is {}, expected 1",
                nodes[root].cond_prob
            )));
        }
        nodes[root].cond_prob = 1.0;

        // Depth-first preorder from the root; unreachable nodes sit on a cycle.
        let mut depth = vec![usize::MAX; nodes.len()];
        let mut order = Vec::with_capacity(nodes.len());
        let mut stack = vec![root];
        depth[root] = 0;
        while let Some(k) = stack.pop() {
            order.push(k);
            for &c in children[k].iter().rev() {
                depth[c] = depth[k] + 1;
                stack.push(c);
            }
        }
        if order.len() != nodes.len() {
            return Err(Error::InvalidTree("parent links contain a cycle".into()));
        }

        for k in 0..nodes.len() {
            if children[k].is_empty() {
                continue;
            }
            let sum: f64 = children[k].iter().map(|&c| nodes[c].cond_prob).sum();
            if (sum - 1.0).abs() > PARSE_PROB_TOL {
                return Err(Error::InvalidTree(format!(
                    "children probabilities of node {} sum to {}",
                    nodes[k].id, sum
                )));
            }
            // Sums already within rounding of one are kept bit-exact so that
            // a written tree reads back unchanged.
            if (sum - 1.0).abs() > 8.0 * f64::EPSILON {
                for &c in &children[k] {
                    nodes[c].cond_prob /= sum;
                }
            }
        }

        let leaf_depths: Vec<usize> = order
            .iter()
            .filter(|&&k| children[k].is_empty())
            .map(|&k| depth[k])
            .collect();
        let height = leaf_depths[0];
        if leaf_depths.iter().any(|&d| d != height) {
            return Err(Error::InvalidTree("leaves at unequal depths".into()));
        }

        let mut stages = vec![Vec::new(); height + 1];
        let mut stage_pos = vec![0; nodes.len()];
        for &k in &order {
            stage_pos[k] = stages[depth[k]].len();
            stages[depth[k]].push(k);
        }

        Ok(Self {
            nodes,
            parent,
            children,
            depth,
            stage_pos,
            stages,
            root,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    /// Serializes to the tree file format, nodes in stored order.
    pub fn to_json(&self) -> String {
        let file = TreeFile {
            nodes: self.nodes.clone(),
        };
        serde_json::to_string_pretty(&file).expect("tree serialization cannot fail")
    }

    /// Number of stages `T`; leaves sit at stage `T`.
    pub fn height(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    pub fn children(&self, k: usize) -> &[usize] {
        &self.children[k]
    }

    pub fn stage(&self, k: usize) -> usize {
        self.depth[k]
    }

    /// Position of node `k` within [`Self::stage_nodes`] of its stage.
    pub fn stage_position(&self, k: usize) -> usize {
        self.stage_pos[k]
    }

    /// Nodes at stage `t` in depth-first order, so the descendants of any
    /// node form a contiguous block of every later stage.
    pub fn stage_nodes(&self, t: usize) -> &[usize] {
        &self.stages[t]
    }

    pub fn leaves(&self) -> &[usize] {
        &self.stages[self.height()]
    }

    /// Conditional probabilities of the children of `k`, in child order.
    pub fn child_probs(&self, k: usize) -> Vec<f64> {
        self.children[k]
            .iter()
            .map(|&c| self.nodes[c].cond_prob)
            .collect()
    }

    /// Node indices from the root to `k`, inclusive.
    pub fn path(&self, k: usize) -> Vec<usize> {
        let mut path = vec![k];
        let mut cur = k;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Unconditional probability of reaching node `k`.
    pub fn node_prob(&self, k: usize) -> f64 {
        self.path(k)
            .iter()
            .map(|&n| self.nodes[n].cond_prob)
            .product()
    }

    pub fn leaf_probs(&self) -> Vec<f64> {
        self.leaves().iter().map(|&k| self.node_prob(k)).collect()
    }

    /// Largest number of immediate successors over all inner nodes.
    pub fn max_branching(&self) -> usize {
        self.children.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.leaves()
            .iter()
            .map(|&leaf| {
                let path = self.path(leaf);
                Trajectory {
                    states: path.iter().map(|&n| self.nodes[n].state).collect(),
                    leaf_id: self.nodes[leaf].id,
                    prob: path.iter().map(|&n| self.nodes[n].cond_prob).product(),
                }
            })
            .collect()
    }
}

impl FromStr for ScenarioTree {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let file: TreeFile = serde_json::from_str(text)?;
        Self::new(file.nodes)
    }
}

pub fn parse_tree(text: &str) -> Result<ScenarioTree> {
    text.parse()
}

/// `(Σ_t |a_t − b_t|)^r`, the ℓ¹ path distance raised to the order `r`.
pub fn ground_cost(a: &[f64], b: &[f64], r: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "trajectories of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_order(r)?;
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok(if r == 1.0 { l1 } else { l1.powf(r) })
}

pub(crate) fn check_order(r: f64) -> Result<()> {
    if r.is_finite() && r >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "order r must be >= 1, got {r}"
        )))
    }
}

/// Pairwise `ground_cost` between the leaf trajectories of two trees.
pub fn cost_matrix(a: &ScenarioTree, b: &ScenarioTree, r: f64) -> Result<Array2<f64>> {
    if a.height() != b.height() {
        return Err(Error::HeightMismatch(a.height(), b.height()));
    }
    let ta = a.trajectories();
    let tb = b.trajectories();
    let mut cost = Array2::zeros((ta.len(), tb.len()));
    for (i, x) in ta.iter().enumerate() {
        for (j, y) in tb.iter().enumerate() {
            cost[[i, j]] = x.cost(y, r)?;
        }
    }
    Ok(cost)
}

/// Random tree with `branching[t]` children per node at stage `t − 1`.
///
/// `branching[0]` must be 1 (the root). States follow a Gaussian random walk
/// from a root state of 0; each sibling group gets probabilities drawn
/// uniformly from the simplex.
pub fn generate_random_tree(branching: &[usize], seed: u64) -> Result<ScenarioTree> {
    match branching.first() {
        None => return Err(Error::InvalidArgument("empty branching list".into())),
        Some(&1) => {}
        Some(&b) => {
            return Err(Error::InvalidArgument(format!(
                "branching must start with 1 (the root), got {b}"
            )))
        }
    }
    if branching.contains(&0) {
        return Err(Error::InvalidArgument(
            "branching entries must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![Node {
        id: 0,
        parent: None,
        state: 0.0,
        cond_prob: 1.0,
    }];
    let mut frontier = vec![0usize];
    for &width in &branching[1..] {
        let mut next = Vec::with_capacity(frontier.len() * width);
        for &p in &frontier {
            let weights: Vec<f64> = (0..width)
                .map(|_| {
                    let w: f64 = rng.sample(Exp1);
                    w.max(f64::MIN_POSITIVE)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            for w in weights {
                let step: f64 = rng.sample(StandardNormal);
                let id = nodes.len();
                nodes.push(Node {
                    id: id as i64,
                    parent: Some(nodes[p].id),
                    state: nodes[p].state + step,
                    cond_prob: w / total,
                });
                next.push(id);
            }
        }
        frontier = next;
    }
    ScenarioTree::new(nodes)
}

/// Draws a random branching vector of `stages + 1` entries, each non-root
/// entry uniform on `1..=max_branching`.
pub fn random_branching<R: Rng>(rng: &mut R, stages: usize, max_branching: usize) -> Vec<usize> {
    std::iter::once(1)
        .chain((0..stages).map(|_| rng.random_range(1..=max_branching)))
        .collect()
}
