//! Environment generators with their ground-truth partitions and
//! aggregation schemes.
//!
//! All kernels are horizon-homogeneous and start in state 0.

use crate::aggregation::{AggregateShape, AggregationScheme, Partition};
use crate::error::{Error, Result};
use crate::mdp::EpisodicMdp;

/// Action index of "left" in the river environments.
pub const LEFT: usize = 0;
/// Action index of "right" in the river environments.
pub const RIGHT: usize = 1;

/// Reward for swimming left at the river bank.
pub const BANK_REWARD: f64 = 0.005;
/// Reward for swimming right at the far end.
pub const GOAL_REWARD: f64 = 1.0;

/// An environment bundled with its partition and aggregation.
#[derive(Debug, Clone)]
pub struct HierarchicalEnv {
    pub mdp: EpisodicMdp,
    pub scheme: AggregationScheme,
}

impl HierarchicalEnv {
    pub fn partition(&self) -> &Partition {
        self.scheme.partition()
    }
}

struct KernelBuilder {
    states: usize,
    actions: usize,
    kernel: Vec<f64>,
    reward: Vec<f64>,
}

impl KernelBuilder {
    fn new(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            kernel: vec![0.0; states * actions * states],
            reward: vec![0.0; states * actions],
        }
    }

    fn edge(&mut self, s: usize, a: usize, next: usize, p: f64) {
        self.kernel[(s * self.actions + a) * self.states + next] += p;
    }

    fn reward(&mut self, s: usize, a: usize, r: f64) {
        self.reward[s * self.actions + a] = r;
    }

    fn build(self, horizon: usize) -> Result<EpisodicMdp> {
        EpisodicMdp::stationary(self.states, self.actions, horizon, 0, self.kernel, self.reward)
    }
}

/// Classic RiverSwim chain with `states ≥ 3` states.
pub fn make_riverswim(states: usize, horizon: usize) -> Result<EpisodicMdp> {
    if states < 3 {
        return Err(Error::InvalidParameter(format!("RiverSwim needs S >= 3, got {states}")));
    }
    let last = states - 1;
    let mut b = KernelBuilder::new(states, 2);
    for s in 0..states {
        b.edge(s, LEFT, s.saturating_sub(1), 1.0);
    }
    b.reward(0, LEFT, BANK_REWARD);

    b.edge(0, RIGHT, 0, 0.4);
    b.edge(0, RIGHT, 1, 0.6);
    for s in 1..last {
        b.edge(s, RIGHT, s - 1, 0.05);
        b.edge(s, RIGHT, s, 0.6);
        b.edge(s, RIGHT, s + 1, 0.35);
    }
    b.edge(last, RIGHT, last - 1, 0.4);
    b.edge(last, RIGHT, last, 0.6);
    b.reward(last, RIGHT, GOAL_REWARD);
    b.build(horizon)
}

/// RiverSwim with singleton subMDPs and three aggregates: the bank, every
/// interior state (one internal state, back and forward exits), and the far
/// end.
pub fn riverswim_hierarchy(states: usize, horizon: usize) -> Result<HierarchicalEnv> {
    let mdp = make_riverswim(states, horizon)?;
    let last = states - 1;
    let shapes = vec![
        AggregateShape { internal: 1, exits: 1 },
        AggregateShape { internal: 1, exits: 2 },
        AggregateShape { internal: 1, exits: 1 },
    ];
    let mut aggregate_of = vec![1; states];
    aggregate_of[0] = 0;
    aggregate_of[last] = 2;
    let mut images = vec![(0, 0, 0), (0, 1, 1), (last, last, 0), (last, last - 1, 1)];
    for s in 1..last {
        images.extend([(s, s, 0), (s, s - 1, 1), (s, s + 1, 2)]);
    }
    let scheme = AggregationScheme::new(&mdp, Partition::singletons(states), shapes, aggregate_of, &images)?;
    Ok(HierarchicalEnv { mdp, scheme })
}

/// State layout of Block-RiverSwim with `blocks` blocks.
///
/// State 0 is the bank, block `b` holds `entry(b) = 1 + 3b`,
/// `bottom(b) = 2 + 3b` and `connector(b) = 3 + 3b`, and the far end is
/// `3R + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub blocks: usize,
}

impl BlockLayout {
    pub fn states(&self) -> usize {
        3 * self.blocks + 2
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn entry(&self, b: usize) -> usize {
        1 + 3 * b
    }

    pub fn bottom(&self, b: usize) -> usize {
        2 + 3 * b
    }

    pub fn connector(&self, b: usize) -> usize {
        3 + 3 * b
    }

    pub fn goal(&self) -> usize {
        3 * self.blocks + 1
    }

    /// State preceding block `b` along the river.
    pub fn before(&self, b: usize) -> usize {
        if b == 0 {
            self.start()
        } else {
            self.connector(b - 1)
        }
    }

    /// State following block `b` along the river.
    pub fn after(&self, b: usize) -> usize {
        if b + 1 == self.blocks {
            self.goal()
        } else {
            self.entry(b + 1)
        }
    }
}

/// Block-RiverSwim with `blocks ≥ 1` identical three-state blocks,
/// `S = 3R + 2`, `L = R + 2` subMDPs and `N = 3` aggregates.
pub fn make_block_riverswim(blocks: usize, horizon: usize) -> Result<HierarchicalEnv> {
    if blocks < 1 {
        return Err(Error::InvalidParameter("Block-RiverSwim needs R >= 1".into()));
    }
    let layout = BlockLayout { blocks };
    let states = layout.states();
    let mut b = KernelBuilder::new(states, 2);

    b.edge(0, LEFT, 0, 1.0);
    for s in 1..states {
        b.edge(s, LEFT, s - 1, 1.0);
    }
    b.reward(0, LEFT, BANK_REWARD);

    b.edge(0, RIGHT, 0, 0.4);
    b.edge(0, RIGHT, layout.entry(0), 0.6);
    for k in 0..blocks {
        let (entry, bottom, connector) = (layout.entry(k), layout.bottom(k), layout.connector(k));
        b.edge(entry, RIGHT, layout.before(k), 0.05);
        b.edge(entry, RIGHT, bottom, 0.35);
        b.edge(entry, RIGHT, connector, 0.6);

        b.edge(bottom, RIGHT, entry, 0.05);
        b.edge(bottom, RIGHT, bottom, 0.6);
        b.edge(bottom, RIGHT, connector, 0.35);

        b.edge(connector, RIGHT, connector, 0.3);
        b.edge(connector, RIGHT, layout.after(k), 0.7);
    }
    let goal = layout.goal();
    b.edge(goal, RIGHT, layout.connector(blocks - 1), 0.4);
    b.edge(goal, RIGHT, goal, 0.6);
    b.reward(goal, RIGHT, GOAL_REWARD);
    let mdp = b.build(horizon)?;

    // cells: bank, one per block, far end
    let mut assignment = vec![0; states];
    for k in 0..blocks {
        for s in [layout.entry(k), layout.bottom(k), layout.connector(k)] {
            assignment[s] = 1 + k;
        }
    }
    assignment[goal] = blocks + 1;
    let partition = Partition::new(assignment)?;

    let shapes = vec![
        AggregateShape { internal: 1, exits: 1 },
        AggregateShape { internal: 3, exits: 2 },
        AggregateShape { internal: 1, exits: 1 },
    ];
    let mut aggregate_of = vec![1; blocks + 2];
    aggregate_of[0] = 0;
    aggregate_of[blocks + 1] = 2;

    let mut images = vec![(0, 0, 0), (0, layout.entry(0), 1)];
    for k in 0..blocks {
        let i = k + 1;
        images.extend([
            (i, layout.entry(k), 0),
            (i, layout.bottom(k), 1),
            (i, layout.connector(k), 2),
            (i, layout.before(k), 3),
            (i, layout.after(k), 4),
        ]);
    }
    images.extend([(blocks + 1, goal, 0), (blocks + 1, layout.connector(blocks - 1), 1)]);

    let scheme = AggregationScheme::new(&mdp, partition, shapes, aggregate_of, &images)?;
    Ok(HierarchicalEnv { mdp, scheme })
}

/// Moves `shift` of block `block`'s bottom-state forward probability onto
/// its self-loop, making the returned scheme approximate with
/// `ε_p = 2·shift`.
pub fn perturb_block_bottom(env: &HierarchicalEnv, block: usize, shift: f64) -> Result<HierarchicalEnv> {
    let blocks = env.scheme.submdps() - 2;
    if block >= blocks {
        return Err(Error::OutOfRange(format!("block {block} >= R={blocks}")));
    }
    if !(0.0..=0.35).contains(&shift) {
        return Err(Error::InvalidParameter(format!("shift {shift} outside [0, 0.35]")));
    }
    let layout = BlockLayout { blocks };
    let mut mdp = env.mdp.clone();
    let bottom = layout.bottom(block);
    for h in 0..mdp.horizon() {
        let mut row = mdp.transition_row(h, bottom, RIGHT).to_vec();
        row[bottom] += shift;
        row[layout.connector(block)] -= shift;
        mdp.set_transition_row(h, bottom, RIGHT, &row)?;
    }
    let scheme = AggregationScheme::new(
        &mdp,
        env.scheme.partition().clone(),
        env.scheme.shapes().to_vec(),
        (0..env.scheme.submdps()).map(|i| env.scheme.aggregate_of(i)).collect(),
        &env.scheme.image_triples(),
    )?;
    Ok(HierarchicalEnv { mdp, scheme })
}

/// Grid actions.
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const WEST: usize = 2;
pub const EAST: usize = 3;

/// Number of rows in the hallway gridworld.
pub const HALLWAY_ROWS: usize = 4;

/// Deterministic `4 × length` hallway. Moves into walls leave the agent in
/// place; stepping east from the last column (the exit) pays 1. Each row
/// is a subMDP. The two middle rows share one aggregate, so `N = 3`.
pub fn make_hallway_gridworld(length: usize, horizon: usize) -> Result<HierarchicalEnv> {
    if length < 2 {
        return Err(Error::InvalidParameter(format!(
            "hallway length must be >= 2, got {length}"
        )));
    }
    let rows = HALLWAY_ROWS;
    let states = rows * length;
    let idx = |row: usize, col: usize| row * length + col;
    let mut b = KernelBuilder::new(states, 4);
    for row in 0..rows {
        for col in 0..length {
            let s = idx(row, col);
            b.edge(s, UP, idx(row.saturating_sub(1), col), 1.0);
            b.edge(s, DOWN, idx((row + 1).min(rows - 1), col), 1.0);
            b.edge(s, WEST, idx(row, col.saturating_sub(1)), 1.0);
            b.edge(s, EAST, idx(row, (col + 1).min(length - 1)), 1.0);
        }
        b.reward(idx(row, length - 1), EAST, 1.0);
    }
    let mdp = b.build(horizon)?;

    let partition = Partition::new((0..states).map(|s| s / length).collect())?;
    // top: exits below; middle: exits above then below; bottom: exits above
    let shapes = vec![
        AggregateShape {
            internal: length,
            exits: length,
        },
        AggregateShape {
            internal: length,
            exits: 2 * length,
        },
        AggregateShape {
            internal: length,
            exits: length,
        },
    ];
    let aggregate_of = vec![0, 1, 1, 2];
    let mut images = Vec::new();
    for row in 0..rows {
        for col in 0..length {
            images.push((row, idx(row, col), col));
            let (above, below) = match row {
                0 => (None, Some(length + col)),
                r if r == rows - 1 => (Some(length + col), None),
                _ => (Some(length + col), Some(2 * length + col)),
            };
            if let Some(slot) = above {
                images.push((row, idx(row - 1, col), slot));
            }
            if let Some(slot) = below {
                images.push((row, idx(row + 1, col), slot));
            }
        }
    }
    let scheme = AggregationScheme::new(&mdp, partition, shapes, aggregate_of, &images)?;
    Ok(HierarchicalEnv { mdp, scheme })
}
