//! Measures the aggregation error of Block-RiverSwim before and after
//! perturbing one block, and collapses the perturbed kernel with uniform
//! weights.
//!
//! ```bash
//! cargo run --release --example aggregation_check -- 3 0.1
//! ```

use uchrl::aggregation::{aggregation_error, collapse_transitions, CollapseWeights};
use uchrl::envs::{make_block_riverswim, perturb_block_bottom};

fn main() -> uchrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let blocks: usize = args.first().map_or(3, |a| a.parse().expect("block count"));
    let shift: f64 = args.get(1).map_or(0.1, |a| a.parse().expect("shift"));

    let env = make_block_riverswim(blocks, 5)?;
    let exact = aggregation_error(&env.mdp, &env.scheme);
    println!(
        "S={} subMDPs={} aggregates={} eps_r={} eps_p={}",
        env.mdp.states(),
        env.scheme.submdps(),
        env.scheme.aggregates(),
        exact.eps_r,
        exact.eps_p
    );

    let perturbed = perturb_block_bottom(&env, 0, shift)?;
    let err = aggregation_error(&perturbed.mdp, &perturbed.scheme);
    println!(
        "after shifting {shift} of block 0: eps_r={} eps_p={:.6}",
        err.eps_r, err.eps_p
    );

    let collapsed = collapse_transitions(
        &perturbed.mdp,
        &perturbed.scheme,
        &CollapseWeights::uniform(&perturbed.scheme),
    )?;
    let shared = perturbed.scheme.aggregate_of(1);
    println!("collapsed step-0 kernel of aggregate {shared} (rows s̄·A+a):");
    println!("{:.4}", collapsed[shared][0]);
    Ok(())
}
