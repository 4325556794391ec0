//! Runs UC-HRL with and without aggregation on Block-RiverSwim and prints
//! cumulative regret per seed.
//!
//! ```bash
//! cargo run --release --example hierarchical_vs_naive -- 4 1000 3
//! ```

use uchrl::agents::{AgentParams, UcHrlAgent};
use uchrl::analysis::regret_curve;
use uchrl::envs::make_block_riverswim;
use uchrl::linear_model::beta_schedule;
use uchrl::rng::run_stream;

fn main() -> uchrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| args.get(i).map_or(default, |a| a.parse().expect("integer argument"));
    let (blocks, episodes, seeds) = (arg(0, 4), arg(1, 1000), arg(2, 3) as u64);
    let horizon = 20;

    let env = make_block_riverswim(blocks, horizon)?;
    let dim = env.scheme.max_aggregate_size() * env.mdp.actions();
    let beta = beta_schedule(2e-4, dim, horizon, episodes * horizon, 0.05)?;
    let params = AgentParams { lambda: 0.01, beta };
    println!(
        "S={} aggregates={} beta={beta:.4}",
        env.mdp.states(),
        env.scheme.aggregates()
    );

    for seed in 0..seeds {
        let mut hier = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params)?;
        let mut naive = UcHrlAgent::naive(&env.mdp, env.partition().clone(), params)?;
        let a = regret_curve(
            &env.mdp,
            &mut hier,
            episodes,
            &mut run_stream("example", "uc-hrl", seed),
        )?;
        let b = regret_curve(
            &env.mdp,
            &mut naive,
            episodes,
            &mut run_stream("example", "uc-hrl-naive", seed),
        )?;
        println!(
            "seed {seed}: uc-hrl {:.1} ({:.3} V* at the end), naive {:.1}",
            a.cumulative_regret(),
            a.final_policy_value(100) / a.optimal_value,
            b.cumulative_regret()
        );
    }
    Ok(())
}
