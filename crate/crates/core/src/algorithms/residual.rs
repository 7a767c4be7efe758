use serde::{Deserialize, Serialize};

use crate::marginal::MarginalReport;
use crate::model::{CapacityFn, FlowState, NetworkState, RadioState, Session, Topology, ETA_FLOOR};
use crate::scaling::floor_allocations;

/// Distance from the optimality conditions, per block. Zero exactly when
/// every condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimalityResidual {
    pub routing: f64,
    pub power_alloc: f64,
    pub power_ctrl: f64,
    pub congestion: f64,
}

impl OptimalityResidual {
    pub fn max(&self) -> f64 {
        self.routing.max(self.power_alloc).max(self.power_ctrl).max(self.congestion)
    }
}

/// Routing residual at one node: spread of marginal costs over coordinates
/// carrying traffic above the cheapest allowed price `λ`.
pub fn routing_residual_at(values: &[f64], prices: &[f64], blocked: &[bool]) -> f64 {
    let lambda = (0..prices.len()).filter(|&j| !blocked[j]).map(|j| prices[j]).fold(f64::INFINITY, f64::min);
    if !lambda.is_finite() {
        return 0.0;
    }
    (0..prices.len()).filter(|&j| values[j] > 0.0).map(|j| (prices[j] - lambda).abs()).fold(0.0, f64::max)
}

/// Lower limits the allocation and power control residuals respect.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBounds {
    /// Per link, the allocation at or below which the link counts as empty.
    pub eta_low: Vec<f64>,
    /// Nodes that cannot lower their power because an out-link sits at the capacity floor.
    pub gamma_pinned: Vec<bool>,
}

impl ResidualBounds {
    pub fn unconstrained(topo: &Topology) -> Self {
        ResidualBounds { eta_low: vec![ETA_FLOOR; topo.num_links()], gamma_pinned: vec![false; topo.num_nodes()] }
    }

    pub fn with_floor(topo: &Topology, radio: &RadioState, capacity: &CapacityFn, floor: Option<f64>) -> Self {
        let Some(c) = floor else {
            return Self::unconstrained(topo);
        };
        let gamma_pinned = (0..topo.num_nodes())
            .map(|i| topo.out_links(i).iter().any(|&id| radio.capacity[id] <= c * (1.0 + 1e-9)))
            .collect();
        ResidualBounds { eta_low: floor_allocations(topo, radio, capacity, floor), gamma_pinned }
    }
}

/// Residuals of every block at a state. Routing residuals only count nodes
/// with positive throughput. `blocked` gives per-session blocked links;
/// links at their lower allocation count as empty in the allocation residual.
#[allow(clippy::too_many_arguments)]
pub fn optimality_residuals(
    topo: &Topology,
    sessions: &[Session],
    state: &NetworkState,
    flow: &FlowState,
    marg: &MarginalReport,
    blocked: &[Vec<bool>],
    node_power: &[f64],
    bounds: &ResidualBounds,
) -> OptimalityResidual {
    let mut r = OptimalityResidual::default();
    for (w, s) in sessions.iter().enumerate() {
        for i in 0..topo.num_nodes() {
            if i == s.destination || flow.node_rate[w][i] <= 0.0 {
                continue;
            }
            let out = topo.out_links(i);
            let mut values: Vec<f64> = out.iter().map(|&id| state.phi[w][id]).collect();
            let mut prices: Vec<f64> = out.iter().map(|&id| marg.delta_phi[w][id]).collect();
            let mut bl: Vec<bool> = out.iter().map(|&id| blocked[w][id]).collect();
            let elastic_origin = i == s.origin && s.is_elastic();
            if elastic_origin {
                values.push(state.phi_overflow[w]);
                prices.push(marg.delta_phi_overflow[w]);
                bl.push(false);
            }
            let res = routing_residual_at(&values, &prices, &bl);
            if elastic_origin {
                r.congestion = r.congestion.max(res);
            } else {
                r.routing = r.routing.max(res);
            }
        }
    }
    for i in 0..topo.num_nodes() {
        let out = topo.out_links(i);
        if out.len() >= 2 {
            let nu = out.iter().map(|&id| marg.delta_eta[id]).fold(f64::INFINITY, f64::min);
            for &id in out {
                if state.eta[id] > bounds.eta_low[id] * (1.0 + 1e-9) {
                    r.power_alloc = r.power_alloc.max(marg.delta_eta[id] - nu);
                }
            }
        }
        let g = marg.delta_gamma[i] / node_power[i];
        let can_raise = state.gamma[i] < 1.0;
        let can_lower = !bounds.gamma_pinned[i];
        let res = if g > 0.0 { if can_lower { g } else { 0.0 } } else if can_raise { -g } else { 0.0 };
        r.power_ctrl = r.power_ctrl.max(res);
    }
    r
}
