//! Reads an MDP written with exact fractions, prints it back in canonical
//! form and round-trips a scheme file.
//!
//! ```bash
//! cargo run --release --example file_formats
//! ```

use uchrl::envs::make_block_riverswim;
use uchrl::io::{format_mdp, format_scheme, parse_mdp, parse_scheme};

const COIN: &str = r#"
S = 3
A = 1
H = 2
transitions = [
  [0, 0, 0, 1, "1/3"],
  [0, 0, 0, 2, "2/3"],
  [0, 1, 0, 1, 1.0],
  [0, 2, 0, 2, 1],
  [1, 0, 0, 0, 1.0],
  [1, 1, 0, 1, 1.0],
  [1, 2, 0, 2, 1.0],
]
rewards = [
  [1, 2, 0, 1.0],
]
"#;

fn main() -> uchrl::Result<()> {
    let mdp = parse_mdp(COIN)?;
    println!("P(0 -> 1) = {}", mdp.probability(0, 0, 0, 1));
    print!("{}", format_mdp(&mdp));

    let env = make_block_riverswim(2, 1)?;
    let text = format_scheme(&env.scheme);
    let back = parse_scheme(&text, &env.mdp)?;
    println!("scheme round trip exact: {}", back == env.scheme);

    match parse_mdp("S = 2\nA = 1\nH = 1\ntransitions = [\n  [0, 0, 0, 0, \"1/0\"],\n]\n") {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
