//! Bundled topologies.

use crate::infra::{load_topology, InfraSnapshot};

pub const FIVE_WORKER_JSON: &str = include_str!("../data/fixture-5w.json");
pub const THIRTEEN_WORKER_JSON: &str = include_str!("../data/fixture-13w.json");

/// Five workers, nine switches, thirty links.
pub fn five_worker() -> InfraSnapshot {
    load_topology(FIVE_WORKER_JSON).expect("bundled five-worker fixture is valid")
}

/// Thirteen workers, twenty-five switches, seventy-four links.
pub fn thirteen_worker() -> InfraSnapshot {
    load_topology(THIRTEEN_WORKER_JSON).expect("bundled thirteen-worker fixture is valid")
}

/// Resolves `five-worker`/`thirteen-worker` (or `5w`/`13w`) to a bundled fixture.
pub fn by_name(name: &str) -> Option<InfraSnapshot> {
    match name {
        "five-worker" | "5w" => Some(five_worker()),
        "thirteen-worker" | "13w" => Some(thirteen_worker()),
        _ => None,
    }
}
