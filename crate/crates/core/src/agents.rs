//! Episode-level learning agents.
//!
//! [`UcHrlAgent`] learns one transition model per aggregated subMDP and
//! step, and plans separately for every concrete subMDP by stitching values
//! across exit states. [`LsviUcbAgent`] is the flat least-squares value
//! iteration baseline on one-hot features over the original `(s, a)`.

use nalgebra::DVector;

use crate::aggregation::{collapse_transitions, AggregationScheme, CollapseWeights, Partition};
use crate::error::{Error, Result};
use crate::linear_model::{tabular_features, FeatureMap, GramState, MeasureEstimate, TabularFeatures};
use crate::mdp::{argmax_lowest, EpisodicMdp, Policy};

/// Common interface the harness drives every agent through.
pub trait Agent {
    fn name(&self) -> &str;

    /// Prepares the episode-`k` policy. Must be called before `act`.
    fn begin_episode(&mut self, episode: usize) -> Result<()>;

    fn act(&self, state: usize, step: usize) -> Result<usize>;

    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize, step: usize) -> Result<()>;

    /// Greedy policy of the current episode over every state and step.
    fn greedy_policy(&self, mdp: &EpisodicMdp) -> Result<Policy>;
}

/// Hyper-parameters shared by the agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub lambda: f64,
    pub beta: f64,
}

/// Per-episode optimistic tables, indexed by concrete subMDP `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticPlan {
    actions: usize,
    horizon: usize,
    /// `q[i][h][s̄ * A + a]` over internal aggregated states
    q: Vec<Vec<Vec<f64>>>,
    /// `v[i][h][s̄]` over the local aggregated space, `h ∈ 0..=H`
    v: Vec<Vec<Vec<f64>>>,
}

impl OptimisticPlan {
    pub fn q(&self, i: usize, h: usize, local: usize, a: usize) -> f64 {
        self.q[i][h][local * self.actions + a]
    }

    pub fn q_row(&self, i: usize, h: usize, local: usize) -> &[f64] {
        &self.q[i][h][local * self.actions..(local + 1) * self.actions]
    }

    /// Stitched value vector `V̄^{ψ(i)}_h` over the local aggregated space.
    pub fn stitched_values(&self, i: usize, h: usize) -> &[f64] {
        &self.v[i][h]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn subs(&self) -> usize {
        self.q.len()
    }

    /// `Q̄_{k,h}(s, a) = Q̄^{ψ(i)}_{k,h}(ψ(s), a)` for a concrete state.
    pub fn state_q(&self, scheme: &AggregationScheme, s: usize, h: usize, a: usize) -> Result<f64> {
        let (i, local) = locate(scheme, s)?;
        Ok(self.q(i, h, local, a))
    }

    /// Greedy action for concrete state `s`, lowest index on ties.
    pub fn act(&self, scheme: &AggregationScheme, s: usize, h: usize) -> Result<usize> {
        let (i, local) = locate(scheme, s)?;
        Ok(argmax_lowest(self.q_row(i, h, local)))
    }
}

fn locate(scheme: &AggregationScheme, s: usize) -> Result<(usize, usize)> {
    if s >= scheme.partition().len() {
        return Err(Error::OutOfRange(format!("state {s} outside the partition")));
    }
    let i = scheme.submdp_of(s);
    let local = scheme
        .image(i, s)
        .ok_or_else(|| Error::scheme("psi-total", format!("state {s} of subMDP {i} is unmapped")))?;
    Ok((i, local))
}

/// Hierarchical optimistic agent over a dynamics aggregation.
#[derive(Debug, Clone)]
pub struct UcHrlAgent {
    name: String,
    scheme: AggregationScheme,
    horizon: usize,
    actions: usize,
    beta: f64,
    features: Vec<TabularFeatures>,
    /// `[n][h]`
    grams: Vec<Vec<GramState>>,
    measures: Vec<Vec<MeasureEstimate>>,
    stale: Vec<Vec<bool>>,
    /// `rewards[i][h][s̄ * A + a]`, read from a representative preimage
    rewards: Vec<Vec<Vec<f64>>>,
    plan: Option<OptimisticPlan>,
    episode: usize,
}

impl UcHrlAgent {
    pub fn new(mdp: &EpisodicMdp, scheme: AggregationScheme, params: AgentParams) -> Result<Self> {
        if params.beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= 0, got {}",
                params.beta
            )));
        }
        let (horizon, actions) = (mdp.horizon(), mdp.actions());
        let features: Vec<_> = (0..scheme.aggregates())
            .map(|n| tabular_features(&scheme, n, actions))
            .collect();
        let grams = (0..scheme.aggregates())
            .map(|n| {
                (0..horizon)
                    .map(|_| GramState::new(features[n].dim(), scheme.shape(n).total(), params.lambda))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let measures = (0..scheme.aggregates())
            .map(|n| vec![MeasureEstimate::zeros(features[n].dim(), scheme.shape(n).total()); horizon])
            .collect();
        let rewards = (0..scheme.submdps())
            .map(|i| {
                let n = scheme.aggregate_of(i);
                (0..horizon)
                    .map(|h| {
                        (0..scheme.shape(n).internal)
                            .flat_map(|local| {
                                let rep = scheme.reward_representative(i, local);
                                (0..actions).map(move |a| mdp.reward(h, rep, a))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            name: "uc-hrl".to_string(),
            stale: vec![vec![false; horizon]; scheme.aggregates()],
            scheme,
            horizon,
            actions,
            beta: params.beta,
            features,
            grams,
            measures,
            rewards,
            plan: None,
            episode: 0,
        })
    }

    /// The no-aggregation ablation: every subMDP is its own aggregate.
    pub fn naive(mdp: &EpisodicMdp, partition: Partition, params: AgentParams) -> Result<Self> {
        let scheme = AggregationScheme::identity(mdp, partition)?;
        Ok(Self::new(mdp, scheme, params)?.into_naive())
    }

    /// Relabels the agent as the no-aggregation ablation.
    pub fn into_naive(mut self) -> Self {
        self.name = "uc-hrl-naive".to_string();
        self
    }

    pub fn scheme(&self) -> &AggregationScheme {
        &self.scheme
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn gram(&self, n: usize, h: usize) -> &GramState {
        &self.grams[n][h]
    }

    pub fn measure(&self, n: usize, h: usize) -> &MeasureEstimate {
        &self.measures[n][h]
    }

    pub fn features(&self, n: usize) -> &TabularFeatures {
        &self.features[n]
    }

    /// Plan of the current episode, if one has been built.
    pub fn plan(&self) -> Option<&OptimisticPlan> {
        self.plan.as_ref()
    }

    fn refresh_measures(&mut self) {
        for n in 0..self.grams.len() {
            for h in 0..self.horizon {
                if self.stale[n][h] {
                    self.measures[n][h] = self.grams[n][h].estimate_measure();
                    self.stale[n][h] = false;
                }
            }
        }
    }

    /// Optimistic plan from the agent's own estimates.
    pub fn compute_plan(&self) -> Result<OptimisticPlan> {
        self.plan_with(&self.measures, self.beta)
    }

    /// Backward sweep of the optimistic aggregated Q-values using the given
    /// measures `[n][h]` and bonus scale.
    pub fn plan_with(&self, measures: &[Vec<MeasureEstimate>], beta: f64) -> Result<OptimisticPlan> {
        let scheme = &self.scheme;
        let subs = scheme.submdps();
        let (horizon, actions) = (self.horizon, self.actions);
        let cap = horizon as f64;
        let mut q: Vec<Vec<Vec<f64>>> = (0..subs)
            .map(|i| vec![vec![0.0; scheme.shape(scheme.aggregate_of(i)).internal * actions]; horizon])
            .collect();
        let mut v: Vec<Vec<Vec<f64>>> = (0..subs)
            .map(|i| vec![vec![0.0; scheme.shape(scheme.aggregate_of(i)).total()]; horizon + 1])
            .collect();

        for h in (0..horizon).rev() {
            for i in 0..subs {
                let n = scheme.aggregate_of(i);
                let shape = scheme.shape(n);
                let next = DVector::from_column_slice(&v[i][h + 1]);
                let projected = &measures[n][h].0 * &next;
                for local in 0..shape.internal {
                    for a in 0..actions {
                        let phi = self.features[n].features(local, a);
                        let bonus = self.grams[n][h].ucb_bonus(&phi, beta)?;
                        let raw = self.rewards[i][h][local * actions + a] + phi.dot(&projected) + bonus;
                        q[i][h][local * actions + a] = raw.min(cap);
                    }
                }
            }
            // stitch V̄_h for every subMDP now that all Q̄_h are known
            for i in 0..subs {
                let n = scheme.aggregate_of(i);
                let shape = scheme.shape(n);
                for local in 0..shape.total() {
                    v[i][h][local] = if local < shape.internal {
                        max_of(&q[i][h][local * actions..(local + 1) * actions])
                    } else {
                        match scheme.exit_preimage(i, local) {
                            Some(s) => {
                                let (j, target) = locate(scheme, s)?;
                                max_of(&q[j][h][target * actions..(target + 1) * actions])
                            }
                            None => 0.0,
                        }
                    };
                }
            }
        }
        Ok(OptimisticPlan { actions, horizon, q, v })
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl Agent for UcHrlAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_episode(&mut self, episode: usize) -> Result<()> {
        self.refresh_measures();
        self.plan = Some(self.compute_plan()?);
        self.episode = episode;
        Ok(())
    }

    fn act(&self, state: usize, step: usize) -> Result<usize> {
        let plan = self
            .plan
            .as_ref()
            .ok_or_else(|| Error::Internal("act called before begin_episode".into()))?;
        plan.act(&self.scheme, state, step)
    }

    fn observe(&mut self, state: usize, action: usize, _reward: f64, next: usize, step: usize) -> Result<()> {
        let (i, local) = locate(&self.scheme, state)?;
        let n = self.scheme.aggregate_of(i);
        let image = self.scheme.image(i, next).ok_or_else(|| {
            Error::scheme(
                "psi-total",
                format!("successor {next} of state {state} lies outside subMDP {i} and its exits"),
            )
        })?;
        let phi = self.features[n].features(local, action);
        self.grams[n][step].update(&phi, image)?;
        self.stale[n][step] = true;
        Ok(())
    }

    fn greedy_policy(&self, mdp: &EpisodicMdp) -> Result<Policy> {
        let plan = self
            .plan
            .as_ref()
            .ok_or_else(|| Error::Internal("no plan for the current episode".into()))?;
        let mut table = Vec::with_capacity(mdp.states() * mdp.horizon());
        for h in 0..mdp.horizon() {
            for s in 0..mdp.states() {
                table.push(plan.act(&self.scheme, s, h)?);
            }
        }
        Policy::new(mdp, table)
    }
}

/// Ground-truth measures `[n][h]` for one-hot features: the row of
/// `(s̄, a)` is the collapsed transition of the lowest-index preimage of
/// `s̄`; exit rows are zero.
pub fn true_measures(mdp: &EpisodicMdp, scheme: &AggregationScheme) -> Result<Vec<Vec<MeasureEstimate>>> {
    let collapsed = collapse_transitions(mdp, scheme, &CollapseWeights::point_mass(scheme))?;
    let actions = mdp.actions();
    Ok(collapsed
        .into_iter()
        .enumerate()
        .map(|(n, per_step)| {
            let features = tabular_features(scheme, n, actions);
            per_step
                .into_iter()
                .map(|kernel| {
                    let mut mu = MeasureEstimate::zeros(features.dim(), scheme.shape(n).total());
                    for r in 0..kernel.nrows() {
                        mu.0.row_mut(r).copy_from(&kernel.row(r));
                    }
                    mu
                })
                .collect()
        })
        .collect())
}

/// Least-squares value iteration with a UCB bonus on one-hot `(s, a)`
/// features of the original MDP.
#[derive(Debug, Clone)]
pub struct LsviUcbAgent {
    states: usize,
    actions: usize,
    horizon: usize,
    beta: f64,
    features: TabularFeatures,
    grams: Vec<GramState>,
    /// `data[h]` holds `(s, a, r, s')`
    data: Vec<Vec<(usize, usize, f64, usize)>>,
    /// `q[h][s * A + a]`
    q: Vec<Vec<f64>>,
}

impl LsviUcbAgent {
    pub fn new(mdp: &EpisodicMdp, params: AgentParams) -> Result<Self> {
        if params.beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= 0, got {}",
                params.beta
            )));
        }
        let features = TabularFeatures::new(mdp.states(), mdp.actions());
        let grams = (0..mdp.horizon())
            .map(|_| GramState::new(features.dim(), 0, params.lambda))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            states: mdp.states(),
            actions: mdp.actions(),
            horizon: mdp.horizon(),
            beta: params.beta,
            features,
            grams,
            data: vec![Vec::new(); mdp.horizon()],
            q: vec![vec![mdp.horizon() as f64; mdp.states() * mdp.actions()]; mdp.horizon()],
        })
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[h][s * self.actions + a]
    }

    pub fn value(&self, h: usize, s: usize) -> f64 {
        max_of(&self.q[h][s * self.actions..(s + 1) * self.actions])
    }
}

impl Agent for LsviUcbAgent {
    fn name(&self) -> &str {
        "lsvi-ucb"
    }

    fn begin_episode(&mut self, _episode: usize) -> Result<()> {
        let cap = self.horizon as f64;
        let dim = self.features.dim();
        let mut next_v = vec![0.0; self.states];
        for h in (0..self.horizon).rev() {
            let mut rhs = DVector::zeros(dim);
            for &(s, a, r, next) in &self.data[h] {
                rhs[self.features.index(s, a)] += r + next_v[next];
            }
            let weights = self.grams[h].inverse() * rhs;
            for s in 0..self.states {
                for a in 0..self.actions {
                    let phi = self.features.features(s, a);
                    let bonus = self.grams[h].ucb_bonus(&phi, self.beta)?;
                    self.q[h][s * self.actions + a] = (phi.dot(&weights) + bonus).min(cap);
                }
            }
            next_v = (0..self.states).map(|s| self.value(h, s)).collect();
        }
        Ok(())
    }

    fn act(&self, state: usize, step: usize) -> Result<usize> {
        if state >= self.states || step >= self.horizon {
            return Err(Error::OutOfRange(format!("(state {state}, step {step})")));
        }
        Ok(argmax_lowest(
            &self.q[step][state * self.actions..(state + 1) * self.actions],
        ))
    }

    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize, step: usize) -> Result<()> {
        let phi = self.features.features(state, action);
        self.grams[step].absorb(&phi);
        self.data[step].push((state, action, reward, next));
        Ok(())
    }

    fn greedy_policy(&self, mdp: &EpisodicMdp) -> Result<Policy> {
        Policy::from_fn(mdp, |s, h| {
            argmax_lowest(&self.q[h][s * self.actions..(s + 1) * self.actions])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_block_riverswim;

    fn params(beta: f64) -> AgentParams {
        AgentParams { lambda: 1.0, beta }
    }

    #[test]
    fn saturating_bonus_gives_flat_plan() {
        let env = make_block_riverswim(2, 4).unwrap();
        let mut agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params(100.0)).unwrap();
        agent.begin_episode(1).unwrap();
        let plan = agent.plan().unwrap();
        for i in 0..plan.subs() {
            for h in 0..4 {
                assert!(plan.q[i][h].iter().all(|&x| x == 4.0));
            }
        }
    }

    #[test]
    fn terminal_step_ignores_model() {
        let env = make_block_riverswim(1, 3).unwrap();
        let agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params(0.5)).unwrap();
        let truth = true_measures(&env.mdp, &env.scheme).unwrap();
        let plan = agent.plan_with(&truth, 0.5).unwrap();
        let goal = env.mdp.states() - 1;
        let i = env.scheme.submdp_of(goal);
        // fresh Gram, λ = 1: bonus = β
        assert_eq!(plan.q(i, 2, 0, 1), 1.5);
        assert_eq!(plan.q(i, 2, 0, 0), 0.5);
        assert!(plan.stitched_values(i, 3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn act_before_begin_is_an_error() {
        let env = make_block_riverswim(1, 3).unwrap();
        let agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params(0.5)).unwrap();
        assert!(agent.act(0, 0).is_err());
    }

    #[test]
    fn tie_goes_to_action_zero() {
        let env = make_block_riverswim(1, 3).unwrap();
        let mut agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params(50.0)).unwrap();
        agent.begin_episode(1).unwrap();
        for s in 0..env.mdp.states() {
            assert_eq!(agent.act(s, 0).unwrap(), 0);
        }
    }

    #[test]
    fn shared_aggregate_update() {
        let env = make_block_riverswim(2, 3).unwrap();
        let mut agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params(1.0)).unwrap();
        agent.begin_episode(1).unwrap();
        // bottom of block 1 (state 2) and block 2 (state 5) share aggregate 1
        agent.observe(2, 1, 0.0, 3, 0).unwrap();
        assert_eq!(agent.gram(1, 0).count(), 1);
        agent.observe(5, 1, 0.0, 6, 0).unwrap();
        assert_eq!(agent.gram(1, 0).count(), 2);
        assert_eq!(agent.gram(1, 0).gram()[(3, 3)], 3.0);
        assert_eq!(agent.gram(0, 0).count(), 0);
    }

    #[test]
    fn naive_keeps_blocks_apart() {
        let env = make_block_riverswim(2, 3).unwrap();
        let mut agent = UcHrlAgent::naive(&env.mdp, env.partition().clone(), params(1.0)).unwrap();
        assert_eq!(agent.scheme().aggregates(), 4);
        agent.begin_episode(1).unwrap();
        agent.observe(2, 1, 0.0, 3, 0).unwrap();
        agent.observe(5, 1, 0.0, 6, 0).unwrap();
        assert_eq!(agent.gram(1, 0).count(), 1);
        assert_eq!(agent.gram(2, 0).count(), 1);
    }

    #[test]
    fn lsvi_degenerate_chain_converges() {
        let (horizon, reward, lambda, beta) = (3usize, 0.5, 1.0, 0.01);
        let mdp = EpisodicMdp::stationary(1, 1, horizon, 0, vec![1.0], vec![reward]).unwrap();
        let mut agent = LsviUcbAgent::new(&mdp, AgentParams { lambda, beta }).unwrap();
        let episodes = 500;
        for k in 0..episodes {
            agent.begin_episode(k).unwrap();
            for h in 0..horizon {
                agent.observe(0, 0, reward, 0, h).unwrap();
            }
        }
        agent.begin_episode(episodes).unwrap();
        // closed form: V_h = n/(n+λ) (r + V_{h+1}) + β/√(n+λ)
        let n = episodes as f64;
        let mut expected = 0.0;
        for _ in 0..horizon {
            expected = n / (n + lambda) * (reward + expected) + beta / (n + lambda).sqrt();
        }
        assert!((agent.value(0, 0) - expected).abs() < 1e-9);
        assert!((agent.value(0, 0) - horizon as f64 * reward).abs() < 1e-2);
    }

    #[test]
    fn lsvi_initial_optimism() {
        let env = make_block_riverswim(1, 4).unwrap();
        let mut agent = LsviUcbAgent::new(&env.mdp, params(100.0)).unwrap();
        agent.begin_episode(0).unwrap();
        for s in 0..env.mdp.states() {
            assert_eq!(agent.value(0, s), 4.0);
        }
    }
}
