//! Library results checked against independent oracles: brute-force policy
//! enumeration, Monte-Carlo estimates and direct scans of one-step supports.

use nalgebra::DMatrix;
use rand::Rng;

use uchrl::agents::{Agent, AgentParams, LsviUcbAgent, UcHrlAgent};
use uchrl::aggregation::{
    aggregation_error, build_kernel, collapse_transitions, induce_submdps, AggregationScheme, CollapseWeights,
};
use uchrl::analysis::{directly_reachable_max, rank_audit, regret_curve};
use uchrl::envs::{
    make_block_riverswim, make_hallway_gridworld, make_riverswim, perturb_block_bottom, BlockLayout, BANK_REWARD, LEFT,
    RIGHT,
};
use uchrl::mdp::{optimal_values, policy_values, run_episode, EpisodicMdp, Policy};
use uchrl::rng::{run_stream, seeded};

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn optimal_value_matches_policy_enumeration() {
    let env = make_block_riverswim(1, 3).unwrap();
    let mdp = &env.mdp;
    let cells = mdp.states() * mdp.horizon();
    let best = optimal_values(mdp).v(0, mdp.initial_state());
    let mut enumerated = f64::NEG_INFINITY;
    for code in 0u32..(1 << cells) {
        let table: Vec<usize> = (0..cells).map(|bit| ((code >> bit) & 1) as usize).collect();
        let policy = Policy::new(mdp, table).unwrap();
        let value = policy_values(mdp, &policy).v(0, mdp.initial_state());
        assert!(value <= best + 1e-12);
        enumerated = enumerated.max(value);
    }
    assert!((enumerated - best).abs() < 1e-12, "{enumerated} vs {best}");
}

#[test]
fn bellman_residual_is_tiny_on_shipped_envs() {
    let envs = [
        make_riverswim(12, 15).unwrap(),
        make_block_riverswim(3, 20).unwrap().mdp,
        make_hallway_gridworld(4, 10).unwrap().mdp,
    ];
    for mdp in &envs {
        assert!(mdp.validate().is_valid());
        assert!(optimal_values(mdp).bellman_residual(mdp) <= 1e-10);
    }
}

/// Mean return over `n` episodes is within 3σ of the exact value.
fn assert_monte_carlo(mdp: &EpisodicMdp, policy: &Policy, n: usize, seed: u64) {
    let exact = policy_values(mdp, policy).v(0, mdp.initial_state());
    let mut rng = seeded(seed);
    let returns: Vec<f64> = (0..n)
        .map(|_| run_episode(mdp, policy, &mut rng).unwrap().total_return)
        .collect();
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma = (var / n as f64).sqrt().max(1e-12);
    assert!(
        (mean - exact).abs() <= 3.0 * sigma,
        "mean {mean}, exact {exact}, sigma {sigma}"
    );
}

#[test]
fn episode_returns_agree_with_policy_values() {
    let env = make_block_riverswim(2, 12).unwrap();
    let always_right = Policy::constant(&env.mdp, RIGHT).unwrap();
    assert_monte_carlo(&env.mdp, &always_right, 10_000, 7);
    let optimal = optimal_values(&env.mdp).greedy_policy(&env.mdp).unwrap();
    assert_monte_carlo(&env.mdp, &optimal, 10_000, 8);
}

#[test]
fn uniform_random_policy_as_a_mixture() {
    // Draw one deterministic policy uniformly per episode. The mixture's value
    // is the mean of the exact values of the drawn policies.
    let mdp = make_riverswim(5, 6).unwrap();
    let mut rng = seeded(3);
    let n = 4000;
    let (mut returns, mut exact) = (Vec::with_capacity(n), 0.0);
    for _ in 0..n {
        let policy = Policy::from_fn(&mdp, |_, _| rng.random_range(0..mdp.actions())).unwrap();
        exact += policy_values(&mdp, &policy).v(0, 0) / n as f64;
        returns.push(run_episode(&mdp, &policy, &mut rng).unwrap().total_return);
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - exact).abs() <= 3.0 * (var / n as f64).sqrt());
}

#[test]
fn riverswim_start_row_frequency() {
    let mdp = make_riverswim(6, 1).unwrap();
    let mut rng = seeded(11);
    let n = 100_000;
    let advanced = (0..n)
        .filter(|_| mdp.step(0, RIGHT, 0, &mut rng).unwrap().1 == 1)
        .count();
    let p = 0.6;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((advanced as f64 - n as f64 * p).abs() <= 3.0 * sigma);
    assert_eq!(mdp.reward(0, 0, LEFT), BANK_REWARD);
}

fn support_scan(mdp: &EpisodicMdp, cells: &[usize], i: usize) -> Vec<usize> {
    let mut exits = Vec::new();
    for s in (0..mdp.states()).filter(|&s| cells[s] == i) {
        for h in 0..mdp.horizon() {
            for a in 0..mdp.actions() {
                for (next, &cell) in cells.iter().enumerate() {
                    if mdp.probability(h, s, a, next) > 0.0 && cell != i && !exits.contains(&next) {
                        exits.push(next);
                    }
                }
            }
        }
    }
    exits.sort();
    exits
}

#[test]
fn exit_sets_match_a_support_scan() {
    let env = make_block_riverswim(4, 5).unwrap();
    let views = induce_submdps(&env.mdp, env.partition()).unwrap();
    assert_eq!(views.len(), 6);
    // the first block's exits are the start state and the next block's entry
    assert_eq!(views[1].exits, vec![0, 4]);
    for (i, view) in views.iter().enumerate() {
        assert_eq!(view.exits, support_scan(&env.mdp, env.partition().assignment(), i));
    }
}

#[test]
fn block_kernel_has_one_entry_per_mapped_row() {
    let env = make_block_riverswim(3, 2).unwrap();
    let layout = BlockLayout { blocks: 3 };
    let psi = build_kernel(&env.scheme, 2);
    let mapped = [
        layout.entry(1),
        layout.bottom(1),
        layout.connector(1),
        layout.before(1),
        layout.after(1),
    ];
    for s in 0..env.mdp.states() {
        let row_sum: f64 = psi.row(s).iter().sum();
        let ones = psi.row(s).iter().filter(|&&x| x == 1.0).count();
        if mapped.contains(&s) {
            assert_eq!((row_sum, ones), (1.0, 1));
        } else {
            assert_eq!(row_sum, 0.0);
        }
    }
}

/// L1 gap between collapsed rows by direct enumeration of states with equal
/// images.
fn brute_force_eps_p(mdp: &EpisodicMdp, scheme: &AggregationScheme) -> f64 {
    let kernels: Vec<DMatrix<f64>> = (0..scheme.submdps()).map(|i| build_kernel(scheme, i)).collect();
    let mut worst = 0.0f64;
    for h in 0..mdp.horizon() {
        let p = mdp.kernel_matrix(h);
        for i in 0..scheme.submdps() {
            for j in 0..scheme.submdps() {
                if scheme.aggregate_of(i) != scheme.aggregate_of(j) {
                    continue;
                }
                for &s1 in scheme.internal_states(i) {
                    for &s2 in scheme.internal_states(j) {
                        if scheme.image(i, s1) != scheme.image(j, s2) {
                            continue;
                        }
                        for a in 0..mdp.actions() {
                            let r1 = p.row(s1 * mdp.actions() + a) * &kernels[i];
                            let r2 = p.row(s2 * mdp.actions() + a) * &kernels[j];
                            worst = worst.max((r1 - r2).abs().sum());
                        }
                    }
                }
            }
        }
    }
    worst
}

#[test]
fn perturbed_block_error_matches_enumeration() {
    let env = make_block_riverswim(2, 3).unwrap();
    let perturbed = perturb_block_bottom(&env, 0, 0.1).unwrap();
    let err = aggregation_error(&perturbed.mdp, &perturbed.scheme);
    let brute = brute_force_eps_p(&perturbed.mdp, &perturbed.scheme);
    assert!((err.eps_p - 0.2).abs() < 1e-12);
    assert!((err.eps_p - brute).abs() < 1e-12);
    assert_eq!(err.eps_r, 0.0);
    assert_eq!(brute_force_eps_p(&env.mdp, &env.scheme), 0.0);
}

#[test]
fn collapse_is_weight_free_on_exact_schemes() {
    let env = make_block_riverswim(4, 2).unwrap();
    let uniform = collapse_transitions(&env.mdp, &env.scheme, &CollapseWeights::uniform(&env.scheme)).unwrap();
    let point = collapse_transitions(&env.mdp, &env.scheme, &CollapseWeights::point_mass(&env.scheme)).unwrap();
    let last = collapse_transitions(&env.mdp, &env.scheme, &CollapseWeights::last_point_mass(&env.scheme)).unwrap();
    for n in 0..env.scheme.aggregates() {
        for h in 0..2 {
            assert!((&uniform[n][h] - &point[n][h]).abs().max() < 1e-15);
            assert!((&last[n][h] - &point[n][h]).abs().max() < 1e-15);
        }
    }
}

#[test]
fn reachability_counts() {
    for s in [3, 4, 10, 57, 100] {
        assert_eq!(directly_reachable_max(&make_riverswim(s, 2).unwrap(), 0.0), 3);
    }
    assert_eq!(
        directly_reachable_max(&make_hallway_gridworld(5, 3).unwrap().mdp, 0.0),
        1
    );

    // torus grid where every move spreads over the cell and its four neighbours
    let (w, h) = (4, 3);
    let states = w * h;
    let mut kernel = vec![0.0; states * states];
    for s in 0..states {
        let (x, y) = (s % w, s / w);
        for (dx, dy) in [(0, 0), (1, 0), (w - 1, 0), (0, 1), (0, h - 1)] {
            kernel[s * states + ((y + dy) % h) * w + (x + dx) % w] += 0.2;
        }
    }
    let mdp = EpisodicMdp::stationary(states, 1, 1, 0, kernel, vec![0.0; states]).unwrap();
    assert_eq!(directly_reachable_max(&mdp, 0.0), 5);
    let report = rank_audit(&mdp, 1e-9).unwrap();
    assert_eq!(report.bound, 2);
    assert!(report.satisfied);
}

#[test]
fn deterministic_identity_kernel_has_full_rank() {
    let s = 7;
    let mut kernel = vec![0.0; s * s];
    for i in 0..s {
        kernel[i * s + i] = 1.0;
    }
    let mdp = EpisodicMdp::stationary(s, 1, 3, 0, kernel, vec![0.0; s]).unwrap();
    let report = rank_audit(&mdp, 1e-9).unwrap();
    assert_eq!((report.min_rank, report.bound, report.satisfied), (s, s, true));
}

#[test]
fn audit_is_insensitive_to_tolerance() {
    let mdp = make_riverswim(40, 1).unwrap();
    for tol in [1e-12, 1e-9, 1e-6] {
        assert_eq!(rank_audit(&mdp, tol).unwrap().min_rank, 40);
    }
}

#[test]
fn lsvi_regret_exceeds_uc_hrl() {
    let env = make_block_riverswim(4, 20).unwrap();
    let (episodes, seeds) = (2000, 3);
    let beta_for = |dim: usize| uchrl::linear_model::beta_schedule(2e-4, dim, 20, episodes * 20, 0.05).unwrap();
    let mut hier = Vec::new();
    let mut lsvi = Vec::new();
    for seed in 0..seeds {
        let params = AgentParams {
            lambda: 0.01,
            beta: beta_for(env.scheme.max_aggregate_size() * 2),
        };
        let mut agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params).unwrap();
        let mut rng = run_stream("lsvi-check", agent.name(), seed);
        hier.push(
            regret_curve(&env.mdp, &mut agent, episodes, &mut rng)
                .unwrap()
                .cumulative_regret(),
        );

        let params = AgentParams {
            lambda: 0.01,
            beta: beta_for(env.mdp.states() * 2),
        };
        let mut agent = LsviUcbAgent::new(&env.mdp, params).unwrap();
        let mut rng = run_stream("lsvi-check", agent.name(), seed);
        lsvi.push(
            regret_curve(&env.mdp, &mut agent, episodes, &mut rng)
                .unwrap()
                .cumulative_regret(),
        );
    }
    assert!(
        median(lsvi.clone()) > median(hier.clone()),
        "lsvi {lsvi:?} vs uc-hrl {hier:?}"
    );
}

#[test]
fn optimal_agent_has_zero_regret() {
    struct Oracle(Policy);
    impl Agent for Oracle {
        fn name(&self) -> &str {
            "oracle"
        }
        fn begin_episode(&mut self, _: usize) -> uchrl::Result<()> {
            Ok(())
        }
        fn act(&self, s: usize, h: usize) -> uchrl::Result<usize> {
            Ok(self.0.action(s, h))
        }
        fn observe(&mut self, _: usize, _: usize, _: f64, _: usize, _: usize) -> uchrl::Result<()> {
            Ok(())
        }
        fn greedy_policy(&self, _: &EpisodicMdp) -> uchrl::Result<Policy> {
            Ok(self.0.clone())
        }
    }
    let env = make_block_riverswim(2, 8).unwrap();
    let mut agent = Oracle(optimal_values(&env.mdp).greedy_policy(&env.mdp).unwrap());
    let record = regret_curve(&env.mdp, &mut agent, 20, &mut seeded(0)).unwrap();
    assert!(record.rows.iter().all(|r| r.regret.abs() < 1e-12));
}
