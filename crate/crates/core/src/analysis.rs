//! Rank auditing of transition kernels and exact regret accounting.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::error::{Error, Result};
use crate::mdp::{optimal_values, policy_values, EpisodicMdp};

/// Default relative singular-value threshold.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-9;

/// `U`: the largest number of successors with probability above
/// `threshold` over every `(s, a, h)`.
pub fn directly_reachable_max(mdp: &EpisodicMdp, threshold: f64) -> usize {
    let mut best = 0;
    for h in 0..mdp.horizon() {
        for s in 0..mdp.states() {
            for a in 0..mdp.actions() {
                let support = mdp.transition_row(h, s, a).iter().filter(|&&p| p > threshold).count();
                best = best.max(support);
            }
        }
    }
    best
}

/// Kernel row `(s, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIndex {
    pub state: usize,
    pub action: usize,
}

/// Audit of one step's kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub step: usize,
    pub rank: usize,
    pub largest_singular_value: f64,
    /// Rows kept by the greedy independence scan.
    pub certificate: Vec<RowIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAuditReport {
    pub states: usize,
    pub actions: usize,
    pub directly_reachable: usize,
    /// `⌊S / U⌋`
    pub bound: usize,
    pub min_rank: usize,
    pub satisfied: bool,
    pub tolerance: f64,
    pub steps: Vec<StepAudit>,
}

impl RankAuditReport {
    /// Certificate of the step with the smallest rank.
    pub fn certificate(&self) -> &[RowIndex] {
        self.steps
            .iter()
            .min_by_key(|s| s.rank)
            .map(|s| s.certificate.as_slice())
            .unwrap_or(&[])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }
}

/// Numerical rank as the count of singular values above `tol · σ₁`.
pub fn numerical_rank(matrix: &DMatrix<f64>, tolerance: f64) -> (usize, f64) {
    let sv = matrix.singular_values();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return (0, 0.0);
    }
    (sv.iter().filter(|&&x| x > tolerance * largest).count(), largest)
}

/// Scans rows in `(s, a)` order and keeps every row whose residual after
/// projection onto the kept rows exceeds `tolerance` times its norm.
pub fn independent_rows(matrix: &DMatrix<f64>, tolerance: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for r in 0..matrix.nrows() {
        let row: DVector<f64> = matrix.row(r).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut residual = row.clone();
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&residual);
                residual.axpy(-c, q, 1.0);
            }
        }
        let rnorm = residual.norm();
        if rnorm > tolerance * norm {
            basis.push(residual / rnorm);
            kept.push(r);
        }
    }
    kept
}

/// `det(V Vᵀ)` for the given rows of `matrix`.
pub fn gram_determinant(matrix: &DMatrix<f64>, rows: &[usize]) -> f64 {
    let sub = DMatrix::from_fn(rows.len(), matrix.ncols(), |i, j| matrix[(rows[i], j)]);
    (&sub * sub.transpose()).determinant()
}

/// Checks `rank(P_h) ≥ ⌊S/U⌋` for every step and records a certificate of
/// independent rows. Identical consecutive kernels are audited once.
pub fn rank_audit(mdp: &EpisodicMdp, tolerance: f64) -> Result<RankAuditReport> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let u = directly_reachable_max(mdp, 0.0);
    if u == 0 {
        return Err(Error::Audit("kernel is identically zero".into()));
    }
    let bound = mdp.states() / u;
    let mut steps: Vec<StepAudit> = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        if h > 0 && mdp.kernel(h) == mdp.kernel(h - 1) {
            let mut prev = steps[h - 1].clone();
            prev.step = h;
            steps.push(prev);
            continue;
        }
        let matrix = mdp.kernel_matrix(h);
        let (rank, largest) = numerical_rank(&matrix, tolerance);
        if largest == 0.0 {
            return Err(Error::Audit(format!("kernel at step {h} is identically zero")));
        }
        let certificate = independent_rows(&matrix, tolerance)
            .into_iter()
            .map(|r| RowIndex {
                state: r / mdp.actions(),
                action: r % mdp.actions(),
            })
            .collect();
        steps.push(StepAudit {
            step: h,
            rank,
            largest_singular_value: largest,
            certificate,
        });
    }
    let min_rank = steps.iter().map(|s| s.rank).min().unwrap_or(0);
    Ok(RankAuditReport {
        states: mdp.states(),
        actions: mdp.actions(),
        directly_reachable: u,
        bound,
        min_rank,
        satisfied: min_rank >= bound,
        tolerance,
        steps,
    })
}

/// One episode of a learning run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRow {
    /// One-based episode number.
    pub episode: usize,
    /// Realised return of the sampled trajectory.
    pub episode_return: f64,
    /// `V^{π_k}_1(s_1)` by exact evaluation.
    pub policy_value: f64,
    /// `V*_1(s_1) − V^{π_k}_1(s_1)`
    pub regret: f64,
    pub cum_regret: f64,
}

/// Trajectory log of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub config_hash: String,
    pub optimal_value: f64,
    pub rows: Vec<EpisodeRow>,
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// `cum_regret(k) / k` for one-based `k`.
    pub fn average_regret_at(&self, k: usize) -> f64 {
        self.rows[k - 1].cum_regret / k as f64
    }

    /// Mean exact policy value over the last `n` episodes.
    pub fn final_policy_value(&self, n: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        tail.iter().map(|r| r.policy_value).sum::<f64>() / tail.len() as f64
    }
}

/// Runs `episodes` episodes of `agent` on `mdp`. Regret is computed from
/// exact evaluation of each episode's greedy policy.
pub fn regret_curve<A: Agent + ?Sized, R: Rng + ?Sized>(
    mdp: &EpisodicMdp,
    agent: &mut A,
    episodes: usize,
    rng: &mut R,
) -> Result<RunRecord> {
    let start = Instant::now();
    let optimal = optimal_values(mdp);
    let s0 = mdp.initial_state();
    let best = optimal.v(0, s0);
    let mut rows = Vec::with_capacity(episodes);
    let mut cum = 0.0;
    for k in 1..=episodes {
        agent.begin_episode(k)?;
        let policy = agent.greedy_policy(mdp)?;
        let value = policy_values(mdp, &policy).v(0, s0);
        let regret = best - value;
        if regret < -1e-10 {
            return Err(Error::Internal(format!("negative regret {regret} at episode {k}")));
        }
        cum += regret;

        let mut state = s0;
        let mut ret = 0.0;
        for h in 0..mdp.horizon() {
            let action = agent.act(state, h)?;
            let (reward, next) = mdp.step(state, action, h, rng)?;
            agent.observe(state, action, reward, next, h)?;
            ret += reward;
            state = next;
        }
        rows.push(EpisodeRow {
            episode: k,
            episode_return: ret,
            policy_value: value,
            regret,
            cum_regret: cum,
        });
    }
    Ok(RunRecord {
        algorithm: agent.name().to_string(),
        seed: 0,
        config_hash: String::new(),
        optimal_value: best,
        rows,
        wall_time: start.elapsed(),
    })
}
