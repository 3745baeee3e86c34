//! Command-line front end of the evaluation server: configuration, the
//! template and collection verbs, result export and the scenario simulator.

pub mod commands;
pub mod config;
pub mod error;
pub mod scenario;

pub use config::Config;
pub use error::HarnessError;
pub use scenario::{simulate, simulate_with, ClockMode, Plan, Scenario, Transcript};
