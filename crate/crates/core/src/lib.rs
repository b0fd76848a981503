//! Privacy-intent orchestration over a simulated cloud-edge world.
//!
//! Natural-language privacy requirements are translated into structured
//! intents, enforced through workload placement and per-hop flow rules, and
//! then re-checked against the deployed state.

pub mod fixtures;
pub mod flow;
pub mod frontend;
pub mod harness;
pub mod infra;
pub mod intent;
pub mod path;
pub mod orchestrator;
pub mod placement;
pub mod validator;
