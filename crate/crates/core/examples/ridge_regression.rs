//! Fits the ridge estimate of a transition measure from sampled
//! transitions and shows the exploration bonus shrinking with visits.
//!
//! ```bash
//! cargo run --release --example ridge_regression
//! ```

use rand::Rng;
use uchrl::linear_model::{beta_schedule, FeatureMap, GramState, TabularFeatures};
use uchrl::rng::seeded;

fn main() -> uchrl::Result<()> {
    // Two states, two actions, three successor columns.
    let truth = [[0.7, 0.3, 0.0], [0.0, 0.5, 0.5], [0.2, 0.2, 0.6], [1.0, 0.0, 0.0]];
    let features = TabularFeatures::new(2, 2);
    let mut gram = GramState::new(features.dim(), 3, 1.0)?;
    let beta = beta_schedule(1.0, features.dim(), 10, 1000, 0.05)?;
    let probe = features.features(1, 1);
    let mut rng = seeded(7);

    for round in 0..=500 {
        if round % 100 == 0 {
            println!("n={round:>3} bonus(s=1,a=1)={:.4}", gram.ucb_bonus(&probe, beta)?);
        }
        let (s, a) = (rng.random_range(0..2), rng.random_range(0..2));
        let row = truth[features.index(s, a)];
        let u: f64 = rng.random();
        let next = if u < row[0] {
            0
        } else if u < row[0] + row[1] {
            1
        } else {
            2
        };
        gram.update(&features.features(s, a), next)?;
    }

    let mu = gram.estimate_measure();
    for (row, target) in truth.iter().enumerate() {
        let fitted: Vec<String> = mu.0.row(row).iter().map(|p| format!("{p:.3}")).collect();
        println!("row {row}: fitted [{}] true {target:?}", fitted.join(", "));
    }
    Ok(())
}
