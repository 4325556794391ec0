//! Sweeps the bonus constant `C` on Block-RiverSwim and reports median
//! cumulative regret of UC-HRL and its no-aggregation ablation.
//!
//! ```bash
//! cargo run --release --example beta_sweep -- 4 20 2000 10 0.01
//! ```
//!
//! Arguments: blocks, horizon, episodes, seeds, ridge λ.

use rayon::prelude::*;
use uchrl::agents::{AgentParams, UcHrlAgent};
use uchrl::analysis::regret_curve;
use uchrl::envs::make_block_riverswim;
use uchrl::linear_model::beta_schedule;
use uchrl::rng::run_stream;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn main() -> uchrl::Result<()> {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| raw.get(i).map_or(default, |a| a.parse().expect("integer argument"));
    let blocks = arg(0, 4);
    let horizon = arg(1, 20);
    let episodes = arg(2, 2000);
    let seeds = arg(3, 10) as u64;
    let lambda: f64 = raw.get(4).map_or(0.01, |a| a.parse().expect("numeric λ"));

    let env = make_block_riverswim(blocks, horizon)?;
    let dim = env.scheme.max_aggregate_size() * env.mdp.actions();
    println!("C, beta, median cum regret (uc-hrl), (naive), ratio, uc-hrl avg@200, avg@K, final value / V*");
    for constant in [5e-5, 1e-4, 1.5e-4, 2e-4, 3e-4, 5e-4, 1e-3] {
        let beta = beta_schedule(constant, dim, horizon, episodes * horizon, 0.05)?;
        let params = AgentParams { lambda, beta };
        let runs: Vec<_> = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                let mut hier = UcHrlAgent::new(&env.mdp, env.scheme.clone(), params).unwrap();
                let mut naive = UcHrlAgent::naive(&env.mdp, env.partition().clone(), params).unwrap();
                let a = regret_curve(&env.mdp, &mut hier, episodes, &mut run_stream("sweep", "uc-hrl", seed)).unwrap();
                let b = regret_curve(
                    &env.mdp,
                    &mut naive,
                    episodes,
                    &mut run_stream("sweep", "uc-hrl-naive", seed),
                )
                .unwrap();
                (a, b)
            })
            .collect();
        let hier = median(runs.iter().map(|(a, _)| a.cumulative_regret()).collect());
        let naive = median(runs.iter().map(|(_, b)| b.cumulative_regret()).collect());
        let early = median(
            runs.iter()
                .map(|(a, _)| a.average_regret_at(200.min(episodes)))
                .collect(),
        );
        let late = median(runs.iter().map(|(a, _)| a.average_regret_at(episodes)).collect());
        let value = median(
            runs.iter()
                .map(|(a, _)| a.final_policy_value(100) / a.optimal_value)
                .collect(),
        );
        println!(
            "{constant:>7} {beta:>8.3} {hier:>10.2} {naive:>10.2} {:>6.3} {early:>8.4} {late:>8.4} {value:>6.3}",
            hier / naive
        );
    }
    Ok(())
}
