//! Tree search over predicted states: recognize affordances on every node,
//! predict each child from the root through its whole action chain, and pick
//! the path whose final state best matches (or avoids) the goal.

mod plan_file;

pub use plan_file::{GoalRecord, PlanFile};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affordance::{AffordanceKind, Detection, ParametrizedAffordance, TurnDirection};
use crate::error::{Error, Result};
use crate::forward_model::{Backend, ChainState};
use crate::microworld::{render, step, WorldState};
use crate::raster::{goal_loss, GoalSpec, Polarity, RasterState};
use crate::recognition::{recognize, RecognitionConfig};

/// Items handed to the backend per call while expanding a level.
const ADVANCE_CHUNK: usize = 128;

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    /// Longest plan considered; plans of every length `0..=n_max` compete.
    pub n_max: usize,
    pub recognition: RecognitionConfig,
    /// Executed positive plans succeed at or below this loss.
    pub tau_pos: f64,
    /// Executed negative plans succeed at or above this loss.
    pub tau_neg: f64,
}

impl PlannerConfig {
    pub fn new(resolution: usize) -> Self {
        Self {
            n_max: 4,
            recognition: RecognitionConfig::new(resolution),
            tau_pos: 0.01,
            tau_neg: 0.02,
        }
    }

    pub fn success(&self, polarity: Polarity, loss: f64) -> bool {
        match polarity {
            Polarity::Positive => loss <= self.tau_pos,
            Polarity::Negative => loss >= self.tau_neg,
        }
    }
}

/// Turns become one entry per direction; grasps and places pass through.
pub fn parametrize(dets: &[Detection]) -> Vec<ParametrizedAffordance> {
    dets.iter()
        .flat_map(|&d| match d.kind {
            AffordanceKind::Turn => vec![
                ParametrizedAffordance::turn(d, TurnDirection::Ccw),
                ParametrizedAffordance::turn(d, TurnDirection::Cw),
            ],
            _ => vec![ParametrizedAffordance::plain(d)],
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub action: Option<ParametrizedAffordance>,
    pub depth: usize,
    pub loss: f64,
    /// Offset of the best goal window.
    pub window: (usize, usize),
    /// Predicted state and backend context. Dropped for nodes at the last
    /// depth once scored, since nothing expands from them.
    pub chain: Option<ChainState>,
}

impl SearchNode {
    pub fn state(&self) -> Option<&RasterState> {
        self.chain.as_ref().map(|c| &c.state)
    }
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    pub goal: GoalSpec,
    /// Nodes in creation order; `nodes[i].id == i`, the root is node 0.
    pub nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn new(root: ChainState, goal: GoalSpec) -> Result<Self> {
        let m = goal_loss(&goal, &root.state)?;
        Ok(Self {
            goal,
            nodes: vec![SearchNode {
                id: 0,
                parent: None,
                action: None,
                depth: 0,
                loss: m.loss,
                window: (m.x, m.y),
                chain: Some(root),
            }],
        })
    }

    pub fn depth(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.depth)
    }

    pub fn level(&self, depth: usize) -> impl Iterator<Item = &SearchNode> {
        self.nodes.iter().filter(move |n| n.depth == depth)
    }

    /// Actions from the root to `id`.
    pub fn path(&self, id: usize) -> Vec<ParametrizedAffordance> {
        let mut out = Vec::new();
        let mut cur = &self.nodes[id];
        while let (Some(a), Some(p)) = (cur.action, cur.parent) {
            out.push(a);
            cur = &self.nodes[p];
        }
        out.reverse();
        out
    }

    /// Drop the predicted states of the given depth.
    pub fn release(&mut self, depth: usize) {
        for n in self.nodes.iter_mut().filter(|n| n.depth == depth) {
            n.chain = None;
        }
    }
}

/// Affordances recognized on a node's state, filtered and parametrized.
pub fn node_affordances(
    state: &RasterState,
    cfg: &RecognitionConfig,
) -> Vec<ParametrizedAffordance> {
    parametrize(&recognize(state, cfg))
}

/// Add every child of the nodes at `depth`. Children appear in parent order,
/// then in recognition order, whatever the thread schedule.
pub fn expand_level(
    tree: &mut SearchTree,
    depth: usize,
    backend: Backend,
    cfg: &RecognitionConfig,
) -> Result<()> {
    let parents: Vec<&SearchNode> = tree.level(depth).collect();
    let per_parent: Vec<Vec<ParametrizedAffordance>> = parents
        .par_iter()
        .map(|n| {
            let state = n.state().ok_or_else(|| {
                Error::Precondition(format!("node {} has no predicted state", n.id))
            })?;
            Ok(node_affordances(state, cfg))
        })
        .collect::<Result<_>>()?;
    let items: Vec<(usize, &ChainState, ParametrizedAffordance)> = parents
        .iter()
        .zip(&per_parent)
        .flat_map(|(n, acts)| {
            let chain = n.chain.as_ref().expect("checked above");
            acts.iter().map(move |&a| (n.id, chain, a))
        })
        .collect();
    let goal = &tree.goal;
    let children: Vec<SearchNode> = items
        .par_chunks(ADVANCE_CHUNK)
        .map(|chunk| {
            let batch: Vec<(&ChainState, &ParametrizedAffordance)> =
                chunk.iter().map(|(_, c, a)| (*c, a)).collect();
            let results = backend.advance(&batch).map_err(|e| {
                Error::Precondition(format!(
                    "predicting children of node {} at depth {depth}: {e}",
                    chunk[0].0
                ))
            })?;
            chunk
                .iter()
                .zip(results)
                .map(|(&(parent, _, action), (_, chain))| {
                    let m = goal_loss(goal, &chain.state)?;
                    Ok(SearchNode {
                        id: 0,
                        parent: Some(parent),
                        action: Some(action),
                        depth: depth + 1,
                        loss: m.loss,
                        window: (m.x, m.y),
                        chain: Some(chain),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let first = tree.nodes.len();
    for (i, mut c) in children.into_iter().enumerate() {
        c.id = first + i;
        tree.nodes.push(c);
    }
    Ok(())
}

/// Index of the best node: lowest loss for positive goals, highest for
/// negative ones; ties go to the shallower node, then the earlier one.
pub fn select_plan(nodes: &[SearchNode], polarity: Polarity) -> usize {
    let key = |n: &SearchNode| match polarity {
        Polarity::Positive => n.loss,
        Polarity::Negative => -n.loss,
    };
    select_by(nodes, key)
}

/// Index of the node with the smallest `key`, ties by depth then id.
pub fn select_by(nodes: &[SearchNode], key: impl Fn(&SearchNode) -> f64) -> usize {
    nodes
        .iter()
        .min_by(|a, b| {
            key(a)
                .total_cmp(&key(b))
                .then(a.depth.cmp(&b.depth))
                .then(a.id.cmp(&b.id))
        })
        .map(|n| n.id)
        .expect("the tree always has a root")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub steps: Vec<ParametrizedAffordance>,
    pub residual_loss: f64,
    pub root_loss: f64,
    /// Best goal window in the final predicted state.
    pub window: (usize, usize),
    /// Predicted state after each step.
    #[serde(skip)]
    pub frames: Vec<RasterState>,
    pub nodes_expanded: usize,
    /// No affordance was recognized anywhere, so only the root was scored.
    pub no_affordances: bool,
}

/// Search every action sequence of up to `n_max` recognized affordances.
/// `world` is required by the oracle backend and ignored otherwise.
pub fn plan(
    root: &RasterState,
    world: Option<&WorldState>,
    goal: &GoalSpec,
    cfg: &PlannerConfig,
    backend: Backend,
) -> Result<(PlanResult, SearchTree)> {
    if cfg.n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let mut tree = SearchTree::new(backend.start(root, world)?, goal.clone())?;
    for d in 0..cfg.n_max {
        expand_level(&mut tree, d, backend, &cfg.recognition)?;
        // Nodes at the last level are never expanded.
        if d + 1 == cfg.n_max {
            tree.release(d + 1);
        }
    }
    let best = select_plan(&tree.nodes, goal.polarity());
    let steps = tree.path(best);
    let frames = crate::forward_model::rollout(root, world, &steps, backend)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let node = &tree.nodes[best];
    let result = PlanResult {
        residual_loss: node.loss,
        root_loss: tree.nodes[0].loss,
        window: node.window,
        frames,
        nodes_expanded: tree.nodes.len(),
        no_affordances: tree.nodes.len() == 1,
        steps,
    };
    Ok((result, tree))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub world: WorldState,
    pub success: bool,
    /// Step whose precondition failed, if any.
    pub failed_step: Option<usize>,
    /// Goal loss of the rendered final world.
    pub final_loss: f64,
}

/// Run a plan in the simulator and score the outcome against the goal.
pub fn execute_plan(
    world: &WorldState,
    steps: &[ParametrizedAffordance],
    goal: &GoalSpec,
    cfg: &PlannerConfig,
    resolution: usize,
) -> Result<Execution> {
    let mut cur = world.clone();
    for (i, a) in steps.iter().enumerate() {
        match step(&cur, a) {
            Ok(w) => cur = w,
            Err(Error::Precondition(_)) => {
                let final_loss = goal_loss(goal, &render(&cur, resolution))?.loss;
                return Ok(Execution {
                    world: cur,
                    success: false,
                    failed_step: Some(i),
                    final_loss,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let final_loss = goal_loss(goal, &render(&cur, resolution))?.loss;
    Ok(Execution {
        success: cfg.success(goal.polarity(), final_loss),
        world: cur,
        failed_step: None,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::Point3;

    fn det(kind: AffordanceKind) -> Detection {
        Detection {
            kind,
            position: Point3::new(0.5, 0.5, 0.0),
            angle: 0.0,
            symmetry: 0.0,
            confidence: 1.0,
        }
    }

    #[test]
    fn turns_get_both_directions() {
        let p = parametrize(&[det(AffordanceKind::Turn)]);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].turn, Some(TurnDirection::Ccw));
        assert_eq!(p[1].turn, Some(TurnDirection::Cw));
        let p = parametrize(&[det(AffordanceKind::Grasp), det(AffordanceKind::Place)]);
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|a| a.turn.is_none() && a.is_well_formed()));
        assert!(parametrize(&[]).is_empty());
    }

    fn node(id: usize, depth: usize, loss: f64) -> SearchNode {
        SearchNode {
            id,
            parent: None,
            action: None,
            depth,
            loss,
            window: (0, 0),
            chain: None,
        }
    }

    #[test]
    fn selection_breaks_ties_by_depth_then_order() {
        let nodes = [
            node(0, 0, 0.5),
            node(1, 1, 0.2),
            node(2, 2, 0.1),
            node(3, 1, 0.1),
            node(4, 1, 0.1),
        ];
        assert_eq!(select_plan(&nodes, Polarity::Positive), 3);
        assert_eq!(select_plan(&nodes, Polarity::Negative), 0);
        let nodes = [node(0, 0, 0.1), node(1, 1, 0.1)];
        assert_eq!(select_plan(&nodes, Polarity::Positive), 0);
    }
}
