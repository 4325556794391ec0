//! Runs the flat LSVI-UCB baseline on RiverSwim and reports how its
//! average regret decays.
//!
//! ```bash
//! cargo run --release --example lsvi_baseline -- 6 1000
//! ```

use uchrl::agents::{AgentParams, LsviUcbAgent};
use uchrl::analysis::regret_curve;
use uchrl::envs::make_riverswim;
use uchrl::linear_model::beta_schedule;
use uchrl::rng::seeded;

fn main() -> uchrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let states: usize = args.first().map_or(6, |a| a.parse().expect("state count"));
    let episodes: usize = args.get(1).map_or(1000, |a| a.parse().expect("episodes"));
    let horizon = 20;

    let mdp = make_riverswim(states, horizon)?;
    let beta = beta_schedule(2e-4, states * mdp.actions(), horizon, episodes * horizon, 0.05)?;
    let mut agent = LsviUcbAgent::new(&mdp, AgentParams { lambda: 0.01, beta })?;
    let record = regret_curve(&mdp, &mut agent, episodes, &mut seeded(0))?;

    println!("V* = {:.4}", record.optimal_value);
    for k in [10, 100, episodes / 2, episodes] {
        println!(
            "average regret after {k:>5} episodes: {:.4}",
            record.average_regret_at(k)
        );
    }
    println!("wall time {:?}", record.wall_time);
    Ok(())
}
