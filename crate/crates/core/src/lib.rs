pub mod agents;
pub mod aggregation;
pub mod analysis;
pub mod cli;
pub mod envs;
pub mod error;
pub mod harness;
pub mod io;
pub mod linear_model;
pub mod mdp;
pub mod plot;
pub mod rng;

pub use error::{Error, Result};
