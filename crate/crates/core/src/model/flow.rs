use serde::{Deserialize, Serialize};

use super::cost::{Cost, LinkCostFn};
use super::dag::topo_order;
use super::radio::RadioState;
use super::session::Session;
use super::state::NetworkState;
use super::topology::Topology;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    /// `node_rate[w][i]` = t_i(w).
    pub node_rate: Vec<Vec<f64>>,
    /// Total flow per link.
    pub link_flow: Vec<f64>,
    /// Rejected rate per session (zero for inelastic sessions).
    pub overflow_rate: Vec<f64>,
    /// Delivered rate per session.
    pub admitted_rate: Vec<f64>,
    /// Topological order of each session's active graph.
    pub order: Vec<Vec<usize>>,
}

/// Topological order of session `w`'s active routing graph.
pub fn session_order(topo: &Topology, session: &Session, phi: &[f64], w: usize) -> Result<Vec<usize>> {
    topo_order(topo, |id| phi[id] > 0.0 && topo.link(id).from != session.destination)
        .map_err(|cycle| Error::RoutingCycle { session: w, cycle })
}

/// Node throughputs of one session in a given topological order.
pub fn session_rates(topo: &Topology, session: &Session, phi: &[f64], order: &[usize]) -> Vec<f64> {
    let mut t = vec![0.0; topo.num_nodes()];
    t[session.origin] = session.source_rate();
    for &i in order {
        if i == session.destination || t[i] == 0.0 {
            continue;
        }
        for &id in topo.out_links(i) {
            let p = phi[id];
            if p > 0.0 {
                t[topo.link(id).to] += t[i] * p;
            }
        }
    }
    t
}

pub fn compute_flows(topo: &Topology, sessions: &[Session], state: &NetworkState) -> Result<FlowState> {
    let mut link_flow = vec![0.0; topo.num_links()];
    let mut node_rate = Vec::with_capacity(sessions.len());
    let mut overflow_rate = Vec::with_capacity(sessions.len());
    let mut admitted_rate = Vec::with_capacity(sessions.len());
    let mut orders = Vec::with_capacity(sessions.len());
    for (w, s) in sessions.iter().enumerate() {
        let phi = &state.phi[w];
        let order = session_order(topo, s, phi, w)?;
        let t = session_rates(topo, s, phi, &order);
        for (id, link) in topo.links().iter().enumerate() {
            if link.from != s.destination && phi[id] > 0.0 {
                link_flow[id] += t[link.from] * phi[id];
            }
        }
        let over = if s.is_elastic() { t[s.origin] * state.phi_overflow[w] } else { 0.0 };
        overflow_rate.push(over);
        admitted_rate.push(s.source_rate() - over);
        node_rate.push(t);
        orders.push(order);
    }
    Ok(FlowState { node_rate, link_flow, overflow_rate, admitted_rate, order: orders })
}

/// Sum of link costs plus utility losses of elastic sessions.
pub fn total_cost(flow: &FlowState, radio: &RadioState, cost: &LinkCostFn, sessions: &[Session]) -> Cost {
    let mut total = 0.0;
    for (id, &f) in flow.link_flow.iter().enumerate() {
        match cost.eval(radio.capacity[id], f) {
            Cost::Finite(v) => total += v,
            Cost::Infinite => return Cost::Infinite,
        }
    }
    for (w, s) in sessions.iter().enumerate() {
        if let Some(u) = s.utility() {
            total += u.loss(s.source_rate(), flow.overflow_rate[w]);
        }
    }
    if total.is_finite() {
        Cost::Finite(total)
    } else {
        Cost::Infinite
    }
}

/// Per-link cost vector (infinite entries for overloaded links).
pub fn link_costs(flow: &FlowState, radio: &RadioState, cost: &LinkCostFn) -> Vec<Cost> {
    flow.link_flow
        .iter()
        .enumerate()
        .map(|(id, &f)| cost.eval(radio.capacity[id], f))
        .collect()
}
