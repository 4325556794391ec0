//! Drives the experiment harness from an inline config, writes the CSVs
//! and renders the return curves.
//!
//! ```bash
//! cargo run --release --example run_experiment -- /tmp/uchrl-demo
//! ```

use uchrl::harness::{run_experiment, write_outputs, ExperimentConfig};
use uchrl::plot::{read_aggregate, render_svg};

const CONFIG: &str = r#"
env = "block-riverswim"
R = 3
H = 20
algorithms = ["uc-hrl", "uc-hrl-naive", "lsvi-ucb"]
K = 500
seeds = [0, 1, 2]
lambda = 0.01

[beta]
mode = "auto"
C = 0.0002
"#;

fn main() -> uchrl::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "results/example".into());
    let mut config = ExperimentConfig::parse(CONFIG)?;
    config.output_dir = dir.into();
    println!("config hash {}", config.hash());

    let records = run_experiment(&config)?;
    for r in &records {
        println!(
            "{:<13} seed {} cumulative regret {:.1}",
            r.algorithm,
            r.seed,
            r.cumulative_regret()
        );
    }
    let files = write_outputs(&config, &records, &config.output_dir)?;
    let curves = files
        .aggregates
        .iter()
        .map(|p| read_aggregate(p))
        .collect::<uchrl::Result<Vec<_>>>()?;
    let svg = config.output_dir.join("returns.svg");
    std::fs::write(&svg, render_svg(&curves)?)?;
    println!(
        "wrote {} CSVs and {}",
        files.runs.len() + files.aggregates.len(),
        svg.display()
    );
    Ok(())
}
