//! Plans on the aggregated model with exact measures and no bonus, and
//! checks the stitched policy against value iteration on the full MDP.
//!
//! ```bash
//! cargo run --release --example exact_planning -- 3 10
//! ```

use uchrl::agents::{true_measures, AgentParams, UcHrlAgent};
use uchrl::envs::make_block_riverswim;
use uchrl::mdp::{optimal_values, policy_values, Policy};

fn main() -> uchrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let blocks: usize = args.first().map_or(3, |a| a.parse().expect("block count"));
    let horizon: usize = args.get(1).map_or(10, |a| a.parse().expect("horizon"));

    let env = make_block_riverswim(blocks, horizon)?;
    let agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), AgentParams { lambda: 1.0, beta: 0.0 })?;
    let plan = agent.plan_with(&true_measures(&env.mdp, &env.scheme)?, 0.0)?;
    let policy = Policy::from_fn(&env.mdp, |s, h| plan.act(&env.scheme, s, h).expect("state is covered"))?;

    let s0 = env.mdp.initial_state();
    let optimal = optimal_values(&env.mdp).v(0, s0);
    let stitched = policy_values(&env.mdp, &policy).v(0, s0);
    println!("V* = {optimal:.12}");
    println!("V^pi = {stitched:.12}");
    println!("gap = {:.3e}", optimal - stitched);
    Ok(())
}
