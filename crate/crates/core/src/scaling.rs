//! Diagonal Hessian upper bounds and the step sizes derived from them.
//!
//! Every bound is a maximum of a second derivative over a cost sublevel set.
//! Routing and power-control bounds use a network budget (the initial cost,
//! or the current cost when restarting the argument from a later iterate);
//! power-allocation bounds use the node's local cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CapacityFn, FlowState, LinkCostFn, LinkId, NetworkState, RadioState, Topology, ETA_FLOOR};

/// Sublevel set over which [`cost_curvature_extrema`] maximizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvatureMode {
    /// `{F >= 0 : D(C, F) <= budget}` at the given capacity.
    FixedCapacity(f64),
    /// `{C >= floor : D(C, F) <= budget}` at the given flow.
    FixedFlow { flow: f64, capacity_floor: Option<f64> },
    /// `{(C, F) : F >= 0, C >= floor, D(C, F) <= budget}`.
    Joint { capacity_floor: Option<f64> },
}

/// Extremal second-order quantities of a link cost on a sublevel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureExtrema {
    pub max_d_flow2: f64,
    pub max_d_cap2: f64,
    /// Most negative `∂D/∂C` (attained where the budget binds).
    pub min_d_cap: f64,
}

pub fn cost_curvature_extrema(cost: &LinkCostFn, budget: f64, mode: CurvatureMode) -> Result<CurvatureExtrema> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::DegenerateBound(format!("cost budget {budget}")));
    }
    let b = budget;
    match mode {
        CurvatureMode::FixedCapacity(c) => {
            // largest admissible flow, where the slack C - F is smallest
            let f_max = match *cost {
                LinkCostFn::Mm1Delay => c - 1.0 / b,
                LinkCostFn::Mm1Packets { guard } => (b * c - guard) / (1.0 + b),
            }
            .max(0.0);
            Ok(at_point(cost, c, f_max))
        }
        CurvatureMode::FixedFlow { flow, capacity_floor } => {
            let c_min = cost.min_capacity(flow, b).max(capacity_floor.unwrap_or(0.0));
            Ok(at_point(cost, c_min, flow))
        }
        CurvatureMode::Joint { capacity_floor } => match *cost {
            LinkCostFn::Mm1Delay => Ok(CurvatureExtrema {
                max_d_flow2: 2.0 * b.powi(3),
                max_d_cap2: 2.0 * b.powi(3),
                min_d_cap: -b * b,
            }),
            LinkCostFn::Mm1Packets { guard } => {
                let floor = capacity_floor.ok_or(Error::UnboundedCurvature("M/M/1 packet cost without a capacity floor"))?;
                if !(floor > 0.0) {
                    return Err(Error::UnboundedCurvature("M/M/1 packet cost without a capacity floor"));
                }
                // The slack s = C - F is at least max(u/b, floor + guard - u)
                // with u = F + guard; each quantity peaks where the two meet.
                let w = floor + guard;
                Ok(CurvatureExtrema {
                    max_d_flow2: 2.0 * (1.0 + b).powi(3) / (w * w),
                    max_d_cap2: 2.0 * b * (1.0 + b).powi(2) / (w * w),
                    min_d_cap: -b * (1.0 + b) / w,
                })
            }
        },
    }
}

fn at_point(cost: &LinkCostFn, c: f64, f: f64) -> CurvatureExtrema {
    CurvatureExtrema { max_d_flow2: cost.d_flow2(c, f), max_d_cap2: cost.d_cap2(c, f), min_d_cap: cost.d_cap(c, f) }
}

/// `A_ij(D⁰)` for every link at the current capacities.
pub fn link_flow_curvature(cost: &LinkCostFn, radio: &RadioState, budget: f64) -> Result<Vec<f64>> {
    radio
        .capacity
        .iter()
        .map(|&c| Ok(cost_curvature_extrema(cost, budget, CurvatureMode::FixedCapacity(c))?.max_d_flow2))
        .collect()
}

/// Scaling for one routing update at node `i`, session `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingScaling {
    /// Allowed out-links, in the order of `diag`.
    pub links: Vec<LinkId>,
    /// Diagonal of `M_i(w) = (t/2) diag(A_ij + |AN| h_j A)`.
    pub diag: Vec<f64>,
    /// BRT step size `α_i(w)`.
    pub alpha: f64,
    /// Diagonal entry for the overflow coordinate when the node is an elastic origin.
    pub overflow_diag: Option<f64>,
}

/// Largest link curvature on any active path from each node to the
/// destination of one session, 0 at the destination.
pub fn downstream_curvature(topo: &Topology, phi: &[f64], order: &[usize], destination: usize, link_curvature: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0f64; topo.num_nodes()];
    for &i in order.iter().rev() {
        if i == destination {
            continue;
        }
        d[i] = topo
            .out_links(i)
            .iter()
            .filter(|&&id| phi[id] > 0.0)
            .map(|&id| link_curvature[id].max(d[topo.link(id).to]))
            .fold(0.0, f64::max);
    }
    d
}

/// Routing scaling from per-link curvature bounds.
///
/// With `downstream` the hop term uses the largest curvature reachable from
/// each neighbor (see [`downstream_curvature`]) instead of the network-wide
/// maximum. Only links downstream of the neighbor see the flow change, so
/// the bound stays valid and is never looser.
///
/// `overflow_curvature` is the bound on `B''` for an elastic origin; the
/// overflow coordinate counts as one more allowed neighbor with zero hops.
#[allow(clippy::too_many_arguments)]
pub fn routing_scaling(
    topo: &Topology,
    allowed: &[LinkId],
    link_curvature: &[f64],
    hops: &[usize],
    downstream: Option<&[f64]>,
    throughput: f64,
    overflow_curvature: Option<f64>,
    node: usize,
    session: usize,
) -> Result<RoutingScaling> {
    if allowed.is_empty() && overflow_curvature.is_none() {
        return Err(Error::EmptyAllowedSet { node, session });
    }
    let a_max = link_curvature.iter().copied().fold(0.0, f64::max);
    let n_allowed = (allowed.len() + overflow_curvature.is_some() as usize) as f64;
    let raw: Vec<f64> = allowed
        .iter()
        .map(|&id| {
            let j = topo.link(id).to;
            let a = downstream.map_or(a_max, |d| d[j]);
            link_curvature[id] + n_allowed * hops[j] as f64 * a
        })
        .collect();
    let peak = raw.iter().copied().chain(overflow_curvature).fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::DegenerateBound(format!("routing curvature {peak} at node {node}")));
    }
    Ok(RoutingScaling {
        links: allowed.to_vec(),
        diag: raw.iter().map(|a| 0.5 * throughput * a).collect(),
        alpha: 2.0 / (n_allowed * peak),
        overflow_diag: overflow_curvature.map(|b| 0.5 * throughput * b),
    })
}

/// Scaling for one power allocation update at a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocScaling {
    /// Out-links, in the order of the other vectors.
    pub links: Vec<LinkId>,
    /// Hessian bound entries `β_ij`.
    pub bound: Vec<f64>,
    /// Lower bound on each `η_ij` over the step.
    pub eta_low: Vec<f64>,
    /// GPA diagonal `Q_i = diag(β_ij) / (2 P_i)`.
    pub diag: Vec<f64>,
    /// BPA step size `β_i`.
    pub beta: f64,
}

impl PowerAllocScaling {
    fn from_bound(links: Vec<LinkId>, bound: Vec<f64>, eta_low: Vec<f64>, power: f64, node: usize) -> Result<Self> {
        let peak = bound.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(Error::DegenerateBound(format!("power allocation curvature {peak} at node {node}")));
        }
        Ok(PowerAllocScaling {
            diag: bound.iter().map(|b| b / (2.0 * power)).collect(),
            beta: 2.0 * power * power / (links.len() as f64 * peak),
            links,
            bound,
            eta_low,
        })
    }
}

/// Local cost `D_i = Σ_{j∈O(i)} D_ij` (infinite if any out-link is overloaded).
pub fn local_cost(topo: &Topology, flow: &FlowState, radio: &RadioState, cost: &LinkCostFn, node: usize) -> f64 {
    topo.out_links(node)
        .iter()
        .map(|&id| cost.eval(radio.capacity[id], flow.link_flow[id]).as_f64())
        .sum()
}

/// Received power from every transmitter but the link's own, plus noise.
fn outside_interference(topo: &Topology, radio: &RadioState, id: LinkId) -> f64 {
    let l = topo.link(id);
    let own = topo.gain(l.from, l.to) * (radio.node_power[l.from] - radio.link_power[id]);
    (radio.interference[id] - own).max(topo.noise(l.to))
}

/// SINR of link `id` when its transmitter puts fraction `eta` of its power on it.
fn sinr_at(g: f64, power: f64, outside: f64, eta: f64) -> f64 {
    g * power * eta / (g * power * (1.0 - eta) + outside)
}

/// Smallest `η` reachable while the link cost stays within `budget`.
///
/// Bisection on `[ε_η, η]`. If the cost at the floor is still within budget
/// the floor itself is returned. A capacity floor raises the result to the
/// allocation that attains it.
#[allow(clippy::too_many_arguments)]
pub fn eta_lower_bound(
    cost: &LinkCostFn,
    capacity: &CapacityFn,
    g: f64,
    power: f64,
    outside: f64,
    eta: f64,
    flow: f64,
    budget: f64,
    capacity_floor: Option<f64>,
) -> f64 {
    let d = |e: f64| cost.eval(capacity.value(sinr_at(g, power, outside, e)), flow).as_f64();
    let mut low = if d(ETA_FLOOR) <= budget {
        ETA_FLOOR
    } else {
        let (mut lo, mut hi) = (ETA_FLOOR, eta.max(ETA_FLOOR));
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if d(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 {
                break;
            }
        }
        lo
    };
    if let Some(floor) = capacity_floor {
        low = low.max(eta_for_capacity(capacity, g, power, outside, floor).min(eta));
    }
    low
}

/// Allocation at which a link reaches capacity `c`, nudged up so rounding
/// never lands below it.
pub fn eta_for_capacity(capacity: &CapacityFn, g: f64, power: f64, outside: f64, c: f64) -> f64 {
    let x = capacity.sinr_for(c);
    // invert x = a η / (a (1 - η) + b)
    let a = g * power;
    x * (a + outside) / (a * (1.0 + x)) * (1.0 + 1e-12)
}

/// Per-link allocation below which the capacity floor binds, or the
/// allocation floor when there is none.
pub fn floor_allocations(topo: &Topology, radio: &RadioState, capacity: &CapacityFn, floor: Option<f64>) -> Vec<f64> {
    (0..topo.num_links())
        .map(|id| match floor {
            Some(c) => {
                let l = topo.link(id);
                let e = eta_for_capacity(capacity, topo.gain(l.from, l.to), radio.node_power[l.from], outside_interference(topo, radio, id), c);
                e.max(ETA_FLOOR)
            }
            None => ETA_FLOOR,
        })
        .collect()
}

/// Power allocation scaling at `node` for the log-SINR capacity models.
#[allow(clippy::too_many_arguments)]
pub fn pa_scaling(
    topo: &Topology,
    state: &NetworkState,
    flow: &FlowState,
    radio: &RadioState,
    cost: &LinkCostFn,
    capacity: &CapacityFn,
    node: usize,
    capacity_floor: Option<f64>,
) -> Result<PowerAllocScaling> {
    let budget = local_cost(topo, flow, radio, cost, node);
    let power = radio.node_power[node];
    let links = topo.out_links(node).to_vec();
    let mut bound = Vec::with_capacity(links.len());
    let mut eta_low = Vec::with_capacity(links.len());
    for &id in &links {
        let l = topo.link(id);
        let g = topo.gain(l.from, l.to);
        let outside = outside_interference(topo, radio, id);
        let f = flow.link_flow[id];
        let low = eta_lower_bound(cost, capacity, g, power, outside, state.eta[id], f, budget, capacity_floor);
        let x_min = sinr_at(g, power, outside, low);
        let x_max = g * power / outside;
        let ext = cost_curvature_extrema(cost, budget, CurvatureMode::FixedFlow { flow: f, capacity_floor })?;
        let b = (ext.max_d_cap2 * capacity.max_elasticity_sq_1px(x_min, x_max)
            + ext.min_d_cap * capacity.min_curvature_x2_1px(x_min, x_max))
            / (low * low);
        bound.push(b);
        eta_low.push(low);
    }
    PowerAllocScaling::from_bound(links, bound, eta_low, power, node)
}

/// Noise-plus-remote-interference ratio `NR_ij = G_ij P_i / (Σ_{m≠i} G_mj P_m + N_j)`.
pub fn noise_ratio(topo: &Topology, radio: &RadioState, id: LinkId) -> f64 {
    let l = topo.link(id);
    topo.gain(l.from, l.to) * radio.node_power[l.from] / outside_interference(topo, radio, id)
}

/// Power allocation scaling for the precise capacity `ln(1 + K x)`.
#[allow(clippy::too_many_arguments)]
pub fn refined_pa_scaling(
    topo: &Topology,
    state: &NetworkState,
    flow: &FlowState,
    radio: &RadioState,
    cost: &LinkCostFn,
    k: f64,
    node: usize,
    capacity_floor: Option<f64>,
) -> Result<PowerAllocScaling> {
    if !(k > 2.0) {
        return Err(Error::Config(format!("refined power allocation needs K > 2, got {k}")));
    }
    let budget = local_cost(topo, flow, radio, cost, node);
    let links = topo.out_links(node).to_vec();
    let mut bound = Vec::with_capacity(links.len());
    for &id in &links {
        let f = flow.link_flow[id];
        let ext = cost_curvature_extrema(cost, budget, CurvatureMode::FixedFlow { flow: f, capacity_floor })?;
        let nr = noise_ratio(topo, radio, id);
        bound.push((ext.max_d_cap2 * k * k - ext.min_d_cap * (k - 1.0) * (k - 1.0)) * nr * nr);
    }
    // the bound holds for any allocation, so only the capacity floor limits the step
    let precise = CapacityFn::PreciseLog { k };
    let eta_low = links
        .iter()
        .map(|&id| match capacity_floor {
            Some(c) => {
                let l = topo.link(id);
                let outside = outside_interference(topo, radio, id);
                eta_for_capacity(&precise, topo.gain(l.from, l.to), radio.node_power[node], outside, c)
                    .clamp(ETA_FLOOR, state.eta[id])
            }
            None => ETA_FLOOR,
        })
        .collect();
    PowerAllocScaling::from_bound(links, bound, eta_low, radio.node_power[node], node)
}

/// `κ = max C'(x)² x²` and `φ = min C''(x) x²` over all SINRs.
pub fn capacity_curvature(capacity: &CapacityFn) -> Result<(f64, f64)> {
    if !capacity.is_high_sinr() {
        return Err(Error::CapacityModelMismatch);
    }
    // both products are constant for the log-SINR family
    let e = capacity.elasticity(1.0);
    Ok((e * e, capacity.curvature_x2(1.0)))
}

/// Power control scaling `v_i = (ln P̄_i / 2) |N| |E| [B̄ κ + B̲ φ]`.
pub fn pc_scaling(
    topo: &Topology,
    cost: &LinkCostFn,
    capacity: &CapacityFn,
    budget: f64,
    capacity_floor: Option<f64>,
) -> Result<Vec<f64>> {
    if topo.num_links() == 0 {
        return Err(Error::DegenerateBound("network has no links".into()));
    }
    let (kappa, varphi) = capacity_curvature(capacity)?;
    let ext = cost_curvature_extrema(cost, budget, CurvatureMode::Joint { capacity_floor })?;
    let bracket = ext.max_d_cap2 * kappa + ext.min_d_cap * varphi;
    if !(bracket > 0.0) || !bracket.is_finite() {
        return Err(Error::DegenerateBound(format!("power control bracket {bracket}")));
    }
    let size = (topo.num_nodes() * topo.num_links()) as f64;
    Ok((0..topo.num_nodes()).map(|i| 0.5 * topo.power_cap(i).ln() * size * bracket).collect())
}

/// Hessian bound `V̄ = 2 diag(v_i) ln P̄_i` matching [`pc_scaling`].
pub fn pc_hessian_bound(topo: &Topology, v: &[f64]) -> Vec<f64> {
    v.iter().enumerate().map(|(i, vi)| 2.0 * vi * topo.power_cap(i).ln()).collect()
}

/// Everything a driver needs for one sweep, besides per-node quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingBundle {
    pub budget: f64,
    pub link_curvature: Vec<f64>,
    /// Power control scaling, absent when power control is off.
    pub power_ctrl: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let d = LinkCostFn::Mm1Delay;
        let p = LinkCostFn::Mm1Packets { guard: 0.0 };
        let e = cost_curvature_extrema(&d, 1.0, CurvatureMode::Joint { capacity_floor: None }).unwrap();
        assert_eq!(e.max_d_flow2, 2.0);
        let e = cost_curvature_extrema(&d, 2.0, CurvatureMode::Joint { capacity_floor: None }).unwrap();
        assert_eq!(e.min_d_cap, -4.0);
        let e = cost_curvature_extrema(&p, 1.0, CurvatureMode::FixedCapacity(2.0)).unwrap();
        assert!((e.max_d_flow2 - 4.0).abs() < 1e-12);
        assert!(matches!(
            cost_curvature_extrema(&LinkCostFn::default(), 1.0, CurvatureMode::Joint { capacity_floor: None }),
            Err(Error::UnboundedCurvature(_))
        ));
    }

    #[test]
    fn fixed_flow_delay_bounds() {
        let d = LinkCostFn::Mm1Delay;
        let e = cost_curvature_extrema(&d, 3.0, CurvatureMode::FixedFlow { flow: 0.7, capacity_floor: None }).unwrap();
        assert!((e.max_d_cap2 - 54.0).abs() < 1e-9);
        assert!((e.min_d_cap + 9.0).abs() < 1e-9);
    }

    /// Dense sampling of the sublevel set never exceeds the closed forms.
    #[test]
    fn extrema_dominate_sampled_sublevel_set() {
        for cost in [LinkCostFn::Mm1Delay, LinkCostFn::Mm1Packets { guard: 1e-3 }] {
            let budget = 2.5;
            let floor = 0.4;
            let joint = cost_curvature_extrema(&cost, budget, CurvatureMode::Joint { capacity_floor: Some(floor) }).unwrap();
            for a in 0..200 {
                for b in 0..200 {
                    let c = floor + 6.0 * a as f64 / 200.0;
                    let f = c * b as f64 / 200.0;
                    match cost.eval(c, f).finite() {
                        Some(v) if v <= budget => {}
                        _ => continue,
                    }
                    assert!(cost.d_flow2(c, f) <= joint.max_d_flow2 * (1.0 + 1e-12));
                    assert!(cost.d_cap2(c, f) <= joint.max_d_cap2 * (1.0 + 1e-12));
                    assert!(cost.d_cap(c, f) >= joint.min_d_cap * (1.0 + 1e-12));
                    let fc = cost_curvature_extrema(&cost, budget, CurvatureMode::FixedCapacity(c)).unwrap();
                    assert!(cost.d_flow2(c, f) <= fc.max_d_flow2 * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn bounds_grow_with_budget() {
        for cost in [LinkCostFn::Mm1Delay, LinkCostFn::default()] {
            let mut prev = 0.0;
            for b in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let e = cost_curvature_extrema(&cost, b, CurvatureMode::FixedCapacity(3.0)).unwrap();
                assert!(e.max_d_flow2 >= prev);
                prev = e.max_d_flow2;
            }
        }
    }

    #[test]
    fn routing_example() {
        let (topo, _) = crate::fixtures::diamond();
        let curv = vec![2.0; topo.num_links()];
        let mut hops = vec![1; 4];
        hops[3] = 0;
        let out = topo.out_links(0).to_vec();
        let r = routing_scaling(&topo, &out, &curv, &hops, None, 1.0, None, 0, 0).unwrap();
        assert_eq!(r.diag, vec![3.0, 3.0]);
        assert!((r.alpha - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pc_delay_example() {
        let (kappa, varphi) = capacity_curvature(&CapacityFn::high_sinr(1e5)).unwrap();
        assert_eq!((kappa, varphi), (1.0, -1.0));
        assert_eq!(capacity_curvature(&CapacityFn::PreciseLog { k: 10.0 }), Err(Error::CapacityModelMismatch));
        let ext = cost_curvature_extrema(&LinkCostFn::Mm1Delay, 1.0, CurvatureMode::Joint { capacity_floor: None }).unwrap();
        let bracket = ext.max_d_cap2 * kappa + ext.min_d_cap * varphi;
        let v = 0.5 * 100f64.ln() * 25.0 * 80.0 * bracket;
        assert!((v - 3000.0 * 100f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn eta_bound_hits_budget() {
        let cap = CapacityFn::high_sinr(1e5);
        let cost = LinkCostFn::Mm1Delay;
        let (g, p, out) = (1.0, 10.0, 0.5);
        let eta = 0.5;
        let c_now = cap.value(sinr_at(g, p, out, eta));
        let budget = 1.0 / (c_now - 1.0) * 1.5;
        let low = eta_lower_bound(&cost, &cap, g, p, out, eta, 1.0, budget, None);
        let c_low = cap.value(sinr_at(g, p, out, low));
        assert!(low < eta);
        assert!((cost.value(c_low, 1.0) - budget).abs() < 1e-8);
        // budget binding at the current point
        let tight = eta_lower_bound(&cost, &cap, g, p, out, eta, 1.0, cost.value(c_now, 1.0), None);
        assert!((tight - eta).abs() < 1e-9);
    }
}
