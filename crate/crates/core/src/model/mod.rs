pub mod capacity;
pub mod cost;
pub mod dag;
pub mod flow;
pub mod radio;
pub mod session;
pub mod state;
pub mod topology;

pub use capacity::CapacityFn;
pub use cost::{Cost, LinkCostFn};
pub use flow::{compute_flows, total_cost, FlowState};
pub use radio::{compute_radio, RadioState};
pub use session::{Demand, Session, UtilityFn};
pub use state::{validate_state, Diagnostic, NetworkState, ETA_FLOOR};
pub use topology::{Link, LinkId, Topology};

use crate::error::Result;

/// Total cost of a decision vector, recomputing radio and flow state.
pub fn network_cost(
    topo: &Topology,
    sessions: &[Session],
    capacity: &CapacityFn,
    cost: &LinkCostFn,
    state: &NetworkState,
) -> Result<Cost> {
    let radio = compute_radio(topo, capacity, state);
    let flow = compute_flows(topo, sessions, state)?;
    Ok(total_cost(&flow, &radio, cost, sessions))
}
