//! System-level simulator for common radio frame configuration selection in
//! a macro TDD cluster, with URLLC latency tail statistics.

pub mod coordination;
pub mod engine;
pub mod error;
pub mod frame;
pub mod mac;
pub mod output;
pub mod phy;
pub mod rng;
pub mod scenario;
pub mod selftest;
pub mod stats;
pub mod sweep;
pub mod topology;
pub mod traffic;

pub use engine::{run, RunOptions, RunResult};
pub use error::{Error, Result};
pub use scenario::{load_scenario, PolicyKind, Scenario};
