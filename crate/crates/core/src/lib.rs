//! Monte Carlo estimation of voltage stability margins under stochastic
//! load fluctuations.

pub mod case;
pub mod engine;
pub mod mc;
pub mod error;
pub mod models;
pub mod network;
pub mod numfmt;
pub mod rng;
pub mod scenario;

pub use case::{ieee14, parse_case, NetworkCase};
pub use error::{CaseError, PowerFlowError, ScenarioError, SimError, StatsError};
pub use scenario::{emit_scenario, parse_scenario, Scenario};
