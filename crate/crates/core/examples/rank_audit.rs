//! Audits the rank of RiverSwim kernels against `⌊S/U⌋` and inspects the
//! independent-row certificate of a hand-built kernel.
//!
//! ```bash
//! cargo run --release --example rank_audit -- 100
//! ```

use uchrl::analysis::{directly_reachable_max, rank_audit, DEFAULT_RANK_TOLERANCE};
use uchrl::envs::make_riverswim;
use uchrl::mdp::EpisodicMdp;

fn main() -> uchrl::Result<()> {
    let states: usize = std::env::args().nth(1).map_or(100, |a| a.parse().expect("state count"));
    let mdp = make_riverswim(states, 20)?;
    let report = rank_audit(&mdp, DEFAULT_RANK_TOLERANCE)?;
    println!(
        "riverswim S={} U={} bound={} min rank={} satisfied={}",
        report.states, report.directly_reachable, report.bound, report.min_rank, report.satisfied
    );

    // A three-state chain that always moves right: rank 3 with U = 1.
    let mut kernel = vec![0.0; 9];
    for s in 0..3 {
        kernel[s * 3 + (s + 1) % 3] = 1.0;
    }
    let cycle = EpisodicMdp::stationary(3, 1, 1, 0, kernel, vec![0.0; 3])?;
    println!("cycle U={}", directly_reachable_max(&cycle, 0.0));
    print!("{}", rank_audit(&cycle, DEFAULT_RANK_TOLERANCE)?.to_toml());
    Ok(())
}
