//! Tiered recommendations under a sequential multinomial logit choice model.
//!
//! Customers scan tiers in order. In each tier they buy a product with MNL
//! probabilities or, on a no-purchase, move on to the next tier. The crate
//! provides the choice model, an exact offline solver, epoch-based valuation
//! estimates, online learning policies and a seeded regret simulator.

pub mod catalog;
pub mod choice;
pub mod error;
pub mod estimation;
pub mod offline;
pub mod parallel;
pub mod policies;
pub mod simulator;
pub mod stats;
pub mod verify;

pub use catalog::{Catalog, Product, ProductId, TieredOffer};
pub use choice::{expected_profit, ChoiceOutcome, Sampler};
pub use error::{Error, Result};
pub use offline::{solve_two_tier, SolveResult};
pub use parallel::Execution;
pub use policies::{Policy, PolicySpec};
pub use simulator::{run, run_experiment, ExperimentConfig, RegretTrace};
