//! Builds the hallway gridworld, shows how its rows collapse into shared
//! aggregates and lets UC-HRL learn it.
//!
//! ```bash
//! cargo run --release --example hallway_gridworld -- 5 2000
//! ```

use uchrl::agents::{AgentParams, UcHrlAgent};
use uchrl::aggregation::aggregation_error;
use uchrl::analysis::regret_curve;
use uchrl::envs::make_hallway_gridworld;
use uchrl::linear_model::beta_schedule;
use uchrl::rng::seeded;

fn main() -> uchrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let length: usize = args.first().map_or(5, |a| a.parse().expect("hallway length"));
    let episodes: usize = args.get(1).map_or(2000, |a| a.parse().expect("episodes"));
    let horizon = 12;

    let env = make_hallway_gridworld(length, horizon)?;
    let scheme = &env.scheme;
    println!(
        "S={} A={} subMDPs={} aggregates={}",
        env.mdp.states(),
        env.mdp.actions(),
        scheme.submdps(),
        scheme.aggregates()
    );
    for i in 0..scheme.submdps() {
        println!(
            "subMDP {i} -> aggregate {} internal {:?} exits {:?}",
            scheme.aggregate_of(i),
            scheme.internal_states(i),
            scheme.exit_states(i)
        );
    }
    let err = aggregation_error(&env.mdp, scheme);
    println!("eps_r={} eps_p={}", err.eps_r, err.eps_p);

    let dim = scheme.max_aggregate_size() * env.mdp.actions();
    let beta = beta_schedule(2e-4, dim, horizon, episodes * horizon, 0.05)?;
    let mut agent = UcHrlAgent::new(&env.mdp, scheme.clone(), AgentParams { lambda: 0.01, beta })?;
    let record = regret_curve(&env.mdp, &mut agent, episodes, &mut seeded(1))?;
    println!(
        "cumulative regret {:.2}, final policy value {:.4} of V* {:.4}",
        record.cumulative_regret(),
        record.final_policy_value(50),
        record.optimal_value
    );
    Ok(())
}
