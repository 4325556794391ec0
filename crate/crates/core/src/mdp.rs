//! Finite inhomogeneous episodic MDPs, simulation, and exact dynamic
//! programming.
//!
//! Indices are zero-based throughout: states `0..S`, actions `0..A` and
//! steps `0..H`. Kernels are stored dense and row-major, one `(S·A) × S`
//! block per step.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Allowed deviation of a kernel row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicMdp {
    states: usize,
    actions: usize,
    horizon: usize,
    initial_state: usize,
    /// `transitions[h][(s * A + a) * S + s']`
    transitions: Vec<Vec<f64>>,
    /// `rewards[h][s * A + a]`
    rewards: Vec<Vec<f64>>,
}

impl EpisodicMdp {
    /// Builds an MDP from per-step kernels and reward tables.
    ///
    /// Only shapes are checked here. Stochasticity, reward bounds and
    /// accessibility are reported by [`EpisodicMdp::validate`].
    pub fn new(
        states: usize,
        actions: usize,
        horizon: usize,
        initial_state: usize,
        transitions: Vec<Vec<f64>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::InvalidParameter(format!(
                "S, A and H must be positive (got S={states}, A={actions}, H={horizon})"
            )));
        }
        if initial_state >= states {
            return Err(Error::OutOfRange(format!(
                "initial state {initial_state} >= S={states}"
            )));
        }
        if transitions.len() != horizon || rewards.len() != horizon {
            return Err(Error::InvalidParameter(format!(
                "expected {horizon} kernels and reward tables, got {} and {}",
                transitions.len(),
                rewards.len()
            )));
        }
        for (h, (p, r)) in transitions.iter().zip(&rewards).enumerate() {
            if p.len() != states * actions * states {
                return Err(Error::InvalidParameter(format!(
                    "kernel at step {h} has {} entries, expected {}",
                    p.len(),
                    states * actions * states
                )));
            }
            if r.len() != states * actions {
                return Err(Error::InvalidParameter(format!(
                    "reward table at step {h} has {} entries, expected {}",
                    r.len(),
                    states * actions
                )));
            }
        }
        Ok(Self {
            states,
            actions,
            horizon,
            initial_state,
            transitions,
            rewards,
        })
    }

    /// Replicates one kernel and one reward table across all `horizon` steps.
    pub fn stationary(
        states: usize,
        actions: usize,
        horizon: usize,
        initial_state: usize,
        kernel: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            states,
            actions,
            horizon,
            initial_state,
            vec![kernel; horizon],
            vec![reward; horizon],
        )
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// `P_h(· | s, a)` as a slice of length `S`.
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = (s * self.actions + a) * self.states;
        &self.transitions[h][start..start + self.states]
    }

    pub fn probability(&self, h: usize, s: usize, a: usize, next: usize) -> f64 {
        self.transition_row(h, s, a)[next]
    }

    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[h][s * self.actions + a]
    }

    /// Raw row-major kernel of step `h`.
    pub fn kernel(&self, h: usize) -> &[f64] {
        &self.transitions[h]
    }

    pub fn reward_table(&self, h: usize) -> &[f64] {
        &self.rewards[h]
    }

    /// Kernel of step `h` as an `(S·A) × S` matrix, rows ordered `(s, a)`.
    pub fn kernel_matrix(&self, h: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.states * self.actions, self.states, &self.transitions[h])
    }

    /// Overwrites one kernel row. Used to build perturbed fixtures.
    pub fn set_transition_row(&mut self, h: usize, s: usize, a: usize, row: &[f64]) -> Result<()> {
        self.check_indices(s, a, h)?;
        if row.len() != self.states {
            return Err(Error::InvalidParameter(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.states
            )));
        }
        let start = (s * self.actions + a) * self.states;
        self.transitions[h][start..start + self.states].copy_from_slice(row);
        Ok(())
    }

    /// `Σ_{s'} P_h(s'|s,a) v(s')`, summed in ascending state order.
    pub fn expected_next(&self, h: usize, s: usize, a: usize, values: &[f64]) -> f64 {
        self.transition_row(h, s, a)
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum()
    }

    fn check_indices(&self, s: usize, a: usize, h: usize) -> Result<()> {
        if s >= self.states {
            return Err(Error::OutOfRange(format!("state {s} >= S={}", self.states)));
        }
        if a >= self.actions {
            return Err(Error::OutOfRange(format!("action {a} >= A={}", self.actions)));
        }
        if h >= self.horizon {
            return Err(Error::OutOfRange(format!("step {h} >= H={}", self.horizon)));
        }
        Ok(())
    }

    /// Checks every structural invariant and reports all offenders.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut inflow = vec![false; self.states];
        for h in 0..self.horizon {
            for s in 0..self.states {
                for a in 0..self.actions {
                    let row = self.transition_row(h, s, a);
                    let mut sum = 0.0;
                    for (next, &p) in row.iter().enumerate() {
                        if !(0.0..=1.0).contains(&p) {
                            report.probability_range.push(EntryIssue {
                                step: h,
                                state: s,
                                action: a,
                                value: p,
                            });
                        }
                        if p > 0.0 {
                            inflow[next] = true;
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        report.row_sums.push(EntryIssue {
                            step: h,
                            state: s,
                            action: a,
                            value: sum,
                        });
                    }
                    let r = self.reward(h, s, a);
                    if !(0.0..=1.0).contains(&r) {
                        report.rewards.push(EntryIssue {
                            step: h,
                            state: s,
                            action: a,
                            value: r,
                        });
                    }
                }
            }
        }
        report.inaccessible = inflow
            .iter()
            .enumerate()
            .filter(|(_, &reached)| !reached)
            .map(|(s, _)| s)
            .collect();
        report
    }

    /// Samples one transition: returns `r_h(s,a)` and a successor drawn by
    /// inverse CDF over the row in ascending state order.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, h: usize, rng: &mut R) -> Result<(f64, usize)> {
        self.check_indices(s, a, h)?;
        let u: f64 = rng.random();
        let row = self.transition_row(h, s, a);
        let mut cumulative = 0.0;
        let mut last_positive = None;
        for (next, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            cumulative += p;
            last_positive = Some(next);
            if u < cumulative {
                return Ok((self.reward(h, s, a), next));
            }
        }
        // Rounding can leave the cumulative sum a hair under one.
        let next = last_positive.ok_or_else(|| Error::Internal(format!("empty kernel row at ({h}, {s}, {a})")))?;
        Ok((self.reward(h, s, a), next))
    }
}

/// One offending kernel or reward entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryIssue {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub value: f64,
}

/// Outcome of [`EpisodicMdp::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Rows whose sum differs from one by more than [`ROW_SUM_TOLERANCE`].
    pub row_sums: Vec<EntryIssue>,
    /// Probabilities outside `[0, 1]`.
    pub probability_range: Vec<EntryIssue>,
    /// Rewards outside `[0, 1]`.
    pub rewards: Vec<EntryIssue>,
    /// States with no inflow under any `(s, a, h)`.
    pub inaccessible: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.row_sums.is_empty()
            && self.probability_range.is_empty()
            && self.rewards.is_empty()
            && self.inaccessible.is_empty()
    }

    /// Human-readable pass/fail lines, one per invariant.
    pub fn summary(&self) -> Vec<String> {
        fn line(name: &str, issues: usize) -> String {
            if issues == 0 {
                format!("{name}: pass")
            } else {
                format!("{name}: FAIL ({issues} offending entries)")
            }
        }
        vec![
            line("row-stochastic", self.row_sums.len()),
            line("probability range", self.probability_range.len()),
            line("reward range", self.rewards.len()),
            line("accessibility", self.inaccessible.len()),
        ]
    }
}

/// Deterministic non-stationary policy `π(s, h)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    states: usize,
    horizon: usize,
    /// `table[h * S + s]`
    table: Vec<usize>,
}

impl Policy {
    pub fn new(mdp: &EpisodicMdp, table: Vec<usize>) -> Result<Self> {
        if table.len() != mdp.states() * mdp.horizon() {
            return Err(Error::InvalidParameter(format!(
                "policy table has {} entries, expected {}",
                table.len(),
                mdp.states() * mdp.horizon()
            )));
        }
        if let Some(bad) = table.iter().find(|&&a| a >= mdp.actions()) {
            return Err(Error::OutOfRange(format!("policy action {bad} >= A={}", mdp.actions())));
        }
        Ok(Self {
            states: mdp.states(),
            horizon: mdp.horizon(),
            table,
        })
    }

    pub fn from_fn(mdp: &EpisodicMdp, mut f: impl FnMut(usize, usize) -> usize) -> Result<Self> {
        let mut table = Vec::with_capacity(mdp.states() * mdp.horizon());
        for h in 0..mdp.horizon() {
            for s in 0..mdp.states() {
                table.push(f(s, h));
            }
        }
        Self::new(mdp, table)
    }

    pub fn constant(mdp: &EpisodicMdp, action: usize) -> Result<Self> {
        Self::from_fn(mdp, |_, _| action)
    }

    pub fn action(&self, s: usize, h: usize) -> usize {
        self.table[h * self.states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub total_return: f64,
}

/// Plays `policy` for one episode from the MDP's initial state.
pub fn run_episode<R: Rng + ?Sized>(mdp: &EpisodicMdp, policy: &Policy, rng: &mut R) -> Result<Trajectory> {
    if policy.horizon() != mdp.horizon() {
        return Err(Error::InvalidParameter("policy horizon does not match MDP".into()));
    }
    let mut state = mdp.initial_state();
    let mut transitions = Vec::with_capacity(mdp.horizon());
    let mut total_return = 0.0;
    for h in 0..mdp.horizon() {
        let action = policy.action(state, h);
        let (reward, next_state) = mdp.step(state, action, h, rng)?;
        transitions.push(Transition {
            step: h,
            state,
            action,
            reward,
            next_state,
        });
        total_return += reward;
        state = next_state;
    }
    Ok(Trajectory {
        transitions,
        total_return,
    })
}

/// Action-value and value tables for every step. `v` has `H + 1` entries,
/// the last one identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    states: usize,
    actions: usize,
    /// `q[h][s * A + a]`
    pub q: Vec<Vec<f64>>,
    /// `v[h][s]`
    pub v: Vec<Vec<f64>>,
}

impl ValueTables {
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[h][s * self.actions + a]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h][s]
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Greedy policy with ties broken toward the lowest action index.
    pub fn greedy_policy(&self, mdp: &EpisodicMdp) -> Result<Policy> {
        Policy::from_fn(mdp, |s, h| {
            argmax_lowest(&self.q[h][s * self.actions..(s + 1) * self.actions])
        })
    }

    /// `max |Q_h(s,a) − r_h(s,a) − P_h V_{h+1}(s,a)|` over all entries.
    pub fn bellman_residual(&self, mdp: &EpisodicMdp) -> f64 {
        let mut worst: f64 = 0.0;
        for h in 0..mdp.horizon() {
            for s in 0..mdp.states() {
                for a in 0..mdp.actions() {
                    let target = mdp.reward(h, s, a) + mdp.expected_next(h, s, a, &self.v[h + 1]);
                    worst = worst.max((self.q(h, s, a) - target).abs());
                }
            }
        }
        worst
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn backward_induction(mdp: &EpisodicMdp, mut choose: impl FnMut(usize, usize, &[f64]) -> f64) -> ValueTables {
    let (s_count, a_count, horizon) = (mdp.states(), mdp.actions(), mdp.horizon());
    let mut q = vec![vec![0.0; s_count * a_count]; horizon];
    let mut v = vec![vec![0.0; s_count]; horizon + 1];
    for h in (0..horizon).rev() {
        let (head, tail) = v.split_at_mut(h + 1);
        let next = &tail[0];
        for s in 0..s_count {
            for a in 0..a_count {
                q[h][s * a_count + a] = mdp.reward(h, s, a) + mdp.expected_next(h, s, a, next);
            }
            head[h][s] = choose(s, h, &q[h][s * a_count..(s + 1) * a_count]);
        }
    }
    ValueTables {
        states: s_count,
        actions: a_count,
        q,
        v,
    }
}

/// `Q*` and `V*` by backward induction from `V_{H+1} = 0`.
pub fn optimal_values(mdp: &EpisodicMdp) -> ValueTables {
    backward_induction(mdp, |_, _, q| q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Exact evaluation of a deterministic policy.
pub fn policy_values(mdp: &EpisodicMdp, policy: &Policy) -> ValueTables {
    backward_induction(mdp, |s, h, q| q[policy.action(s, h)])
}
