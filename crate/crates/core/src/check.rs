//! Finite-difference oracles for the analytic marginals and curvature bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::blocked::{allowed_graph_acyclic, blocked_links_at, blocked_sets};
use crate::error::Result;
use crate::marginal::{hop_counts, lemma1_residual, marginal_report, MarginalOptions};
use crate::model::{
    compute_flows, compute_radio, network_cost, CapacityFn, LinkCostFn, LinkId, NetworkState, Session, Topology,
};
use crate::scaling::{downstream_curvature, link_flow_curvature, pa_scaling, pc_hessian_bound, pc_scaling, refined_pa_scaling, routing_scaling};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradientReport {
    pub phi_max_rel: f64,
    pub eta_max_rel: f64,
    pub gamma_max_rel: f64,
    pub lemma1: f64,
    pub checked: usize,
}

fn cost_at(topo: &Topology, sessions: &[Session], cap: &CapacityFn, cost: &LinkCostFn, st: &NetworkState) -> f64 {
    network_cost(topo, sessions, cap, cost, st).map_or(f64::NAN, |c| c.as_f64())
}

fn rel_err(fd: f64, analytic: f64, floor: f64) -> f64 {
    (fd - analytic).abs() / analytic.abs().max(floor)
}

/// Compares analytic gradients with central differences of the total cost.
///
/// Routing fractions are perturbed one active coordinate at a time, power
/// allocations along random zero-sum directions at each node, and power
/// controls one node at a time.
pub fn gradient_check(
    topo: &Topology,
    sessions: &[Session],
    capacity: &CapacityFn,
    cost: &LinkCostFn,
    state: &NetworkState,
    rng: &mut impl Rng,
) -> Result<GradientReport> {
    let radio = compute_radio(topo, capacity, state);
    let flow = compute_flows(topo, sessions, state)?;
    let rep = marginal_report(topo, sessions, state, &flow, &radio, cost, capacity, MarginalOptions::default())?;
    let f = |st: &NetworkState| cost_at(topo, sessions, capacity, cost, st);
    let base = f(state);
    // gradients below this magnitude are compared in absolute terms
    let floor = 1e-6 * base.abs().max(1.0);
    let mut out = GradientReport {
        lemma1: lemma1_residual(sessions, &flow, &rep.d_flow, &rep.node_potential),
        ..Default::default()
    };

    for (w, _) in sessions.iter().enumerate() {
        for (id, link) in topo.links().iter().enumerate() {
            let phi = state.phi[w][id];
            let t = flow.node_rate[w][link.from];
            if phi < 1e-4 || t <= 0.0 {
                continue;
            }
            let h = 1e-5;
            let mut a = state.clone();
            a.phi[w][id] += h;
            let mut b = state.clone();
            b.phi[w][id] -= h;
            let fd = (f(&a) - f(&b)) / (2.0 * h);
            let analytic = t * rep.delta_phi[w][id];
            out.phi_max_rel = out.phi_max_rel.max(rel_err(fd, analytic, floor));
            out.checked += 1;
        }
    }

    for i in 0..topo.num_nodes() {
        let out_links = topo.out_links(i);
        if out_links.len() < 2 {
            continue;
        }
        let mut v: Vec<f64> = out_links.iter().map(|_| rng.gen::<f64>() - 0.5).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let min_eta = out_links.iter().map(|&id| state.eta[id]).fold(f64::INFINITY, f64::min);
        let h = 1e-4 * min_eta;
        let mut a = state.clone();
        let mut b = state.clone();
        for (&id, &vj) in out_links.iter().zip(&v) {
            a.eta[id] += h * vj;
            b.eta[id] -= h * vj;
        }
        let fd = (f(&a) - f(&b)) / (2.0 * h);
        let analytic: f64 = radio.node_power[i]
            * out_links.iter().zip(&v).map(|(&id, &vj)| vj * rep.delta_eta[id]).sum::<f64>();
        out.eta_max_rel = out.eta_max_rel.max(rel_err(fd, analytic, floor));
        out.checked += 1;
    }

    for i in 0..topo.num_nodes() {
        let h = 1e-5;
        let mut a = state.clone();
        a.gamma[i] += h;
        let mut b = state.clone();
        b.gamma[i] -= h;
        let fd = (f(&a) - f(&b)) / (2.0 * h);
        let analytic = topo.power_cap(i).ln() * rep.delta_gamma[i];
        out.gamma_max_rel = out.gamma_max_rel.max(rel_err(fd, analytic, floor));
        out.checked += 1;
    }
    Ok(out)
}

/// Variable block whose Hessian bound is tested.
#[derive(Debug, Clone, PartialEq)]
pub enum HessianBlock {
    /// Routing fractions of `session` at `node` over the given allowed links;
    /// `downstream` selects the path-restricted hop term.
    Routing { node: usize, session: usize, allowed: Vec<LinkId>, budget: f64, downstream: bool },
    /// Power allocation at `node` under a log-SINR capacity model.
    PowerAlloc { node: usize, capacity_floor: Option<f64> },
    /// Power allocation at `node` under the precise capacity model.
    RefinedPowerAlloc { node: usize, capacity_floor: Option<f64> },
    /// All power controls at once.
    PowerControl { budget: f64, capacity_floor: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HessianReport {
    pub trials: usize,
    /// Largest `(v'Hv - v'M̄v) / (|v|² max M̄)` over the trials.
    pub max_rel_gap: f64,
    /// Largest `v'Hv / v'M̄v`, for seeing how tight the bound is.
    pub max_ratio: f64,
}

/// Second derivative of `f` at zero by central differences.
pub fn second_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
}

fn zero_sum_direction(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let mean = v.iter().sum::<f64>() / len as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}

/// Compares finite-difference quadratic forms `v'Hv` with the diagonal
/// bound `v'M̄v` along random directions in the block's tangent space.
#[allow(clippy::too_many_arguments)]
pub fn hessian_bound_check(
    topo: &Topology,
    sessions: &[Session],
    capacity: &CapacityFn,
    cost: &LinkCostFn,
    state: &NetworkState,
    block: &HessianBlock,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<HessianReport> {
    let radio = compute_radio(topo, capacity, state);
    let flow = compute_flows(topo, sessions, state)?;
    let f = |st: &NetworkState| cost_at(topo, sessions, capacity, cost, st);
    let (coords, bound): (Vec<usize>, Vec<f64>) = match block {
        HessianBlock::Routing { node, session, allowed, budget, downstream } => {
            let t = flow.node_rate[*session][*node];
            if t <= 0.0 || allowed.len() < 2 {
                return Ok(HessianReport::default());
            }
            let curv = link_flow_curvature(cost, &radio, *budget)?;
            let hops = hop_counts(topo, sessions, state, &flow);
            let w = *session;
            let down = downstream
                .then(|| downstream_curvature(topo, &state.phi[w], &flow.order[w], sessions[w].destination, &curv));
            let sc = routing_scaling(topo, allowed, &curv, &hops[w], down.as_deref(), t, None, *node, w)?;
            (allowed.clone(), sc.diag.iter().map(|m| 2.0 * t * m).collect())
        }
        HessianBlock::PowerAlloc { node, capacity_floor } => {
            let sc = pa_scaling(topo, state, &flow, &radio, cost, capacity, *node, *capacity_floor)?;
            (sc.links, sc.bound)
        }
        HessianBlock::RefinedPowerAlloc { node, capacity_floor } => {
            let sc = refined_pa_scaling(topo, state, &flow, &radio, cost, capacity.gain_factor(), *node, *capacity_floor)?;
            (sc.links, sc.bound)
        }
        HessianBlock::PowerControl { budget, capacity_floor } => {
            let v = pc_scaling(topo, cost, capacity, *budget, *capacity_floor)?;
            ((0..topo.num_nodes()).collect(), pc_hessian_bound(topo, &v))
        }
    };
    if coords.len() < 2 && !matches!(block, HessianBlock::PowerControl { .. }) {
        return Ok(HessianReport::default());
    }
    let perturb = |v: &[f64], s: f64| -> NetworkState {
        let mut st = state.clone();
        for (&c, &vc) in coords.iter().zip(v) {
            match block {
                HessianBlock::Routing { session, .. } => st.phi[*session][c] += s * vc,
                HessianBlock::PowerAlloc { .. } | HessianBlock::RefinedPowerAlloc { .. } => st.eta[c] += s * vc,
                HessianBlock::PowerControl { .. } => st.gamma[c] += s * vc,
            }
        }
        st
    };
    let h = match block {
        HessianBlock::Routing { .. } => 1e-4,
        HessianBlock::PowerAlloc { .. } | HessianBlock::RefinedPowerAlloc { .. } => {
            1e-3 * coords.iter().map(|&id| state.eta[id]).fold(f64::INFINITY, f64::min)
        }
        HessianBlock::PowerControl { .. } => 1e-4,
    };
    let scale = bound.iter().copied().fold(0.0, f64::max);
    let mut report = HessianReport { trials, ..Default::default() };
    for _ in 0..trials {
        let v = match block {
            HessianBlock::PowerControl { .. } => (0..coords.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
            _ => zero_sum_direction(coords.len(), rng),
        };
        let vhv = match block {
            // Link flows are affine in one node's routing fractions and the cost
            // is separable over links, so the form is Σ D''(F) (dF)². Taking
            // dF from the flow solver avoids the cancellation a second
            // difference of the total cost suffers when the node's traffic is tiny.
            HessianBlock::Routing { .. } => {
                let up = compute_flows(topo, sessions, &perturb(&v, h))?;
                let down = compute_flows(topo, sessions, &perturb(&v, -h))?;
                (0..topo.num_links())
                    .map(|l| {
                        let df = (up.link_flow[l] - down.link_flow[l]) / (2.0 * h);
                        cost.d_flow2(radio.capacity[l], flow.link_flow[l]) * df * df
                    })
                    .sum()
            }
            _ => second_difference(|s| f(&perturb(&v, s)), h),
        };
        let vmv: f64 = v.iter().zip(&bound).map(|(x, m)| x * x * m).sum();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        report.max_rel_gap = report.max_rel_gap.max((vhv - vmv) / (norm2 * scale));
        report.max_ratio = report.max_ratio.max(vhv / vmv);
    }
    Ok(report)
}

/// Every Hessian block worth testing at `state`: both routing bounds at each
/// node with at least two allowed links, power allocation at each node with
/// at least two out-links (refined under the precise capacity), and power
/// control under a log-SINR capacity.
pub fn standard_blocks(
    topo: &Topology,
    sessions: &[Session],
    capacity: &CapacityFn,
    cost: &LinkCostFn,
    state: &NetworkState,
) -> Result<Vec<HessianBlock>> {
    let radio = compute_radio(topo, capacity, state);
    let flow = compute_flows(topo, sessions, state)?;
    let budget = cost_at(topo, sessions, capacity, cost, state);
    let marg = marginal_report(topo, sessions, state, &flow, &radio, cost, capacity, MarginalOptions::default())?;
    let mut blocks = Vec::new();
    for (w, s) in sessions.iter().enumerate() {
        for i in 0..topo.num_nodes() {
            if i == s.destination || flow.node_rate[w][i] <= 0.0 {
                continue;
            }
            let blocked = blocked_links_at(topo, s, &state.phi[w], &marg.node_potential[w], i);
            let allowed: Vec<LinkId> = topo.out_links(i).iter().copied().filter(|id| !blocked.contains(id)).collect();
            if allowed.len() >= 2 {
                for downstream in [false, true] {
                    blocks.push(HessianBlock::Routing { node: i, session: w, allowed: allowed.clone(), budget, downstream });
                }
            }
        }
    }
    for i in 0..topo.num_nodes() {
        if topo.out_links(i).len() >= 2 {
            blocks.push(if capacity.is_high_sinr() {
                HessianBlock::PowerAlloc { node: i, capacity_floor: None }
            } else {
                HessianBlock::RefinedPowerAlloc { node: i, capacity_floor: None }
            });
        }
    }
    if capacity.is_high_sinr() {
        let floor = 0.5 * radio.capacity.iter().copied().fold(f64::INFINITY, f64::min);
        blocks.push(HessianBlock::PowerControl { budget, capacity_floor: Some(floor) });
    }
    Ok(blocks)
}

/// Outcome of [`check_state`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateCheck {
    pub gradient: GradientReport,
    pub hessian_blocks: usize,
    pub hessian_max_gap: f64,
    pub allowed_acyclic: bool,
}

impl StateCheck {
    pub fn passes(&self, gradient_tol: f64, lemma1_tol: f64, hessian_slack: f64) -> bool {
        let g = &self.gradient;
        g.phi_max_rel.max(g.eta_max_rel).max(g.gamma_max_rel) <= gradient_tol
            && g.lemma1 <= lemma1_tol
            && self.hessian_max_gap <= hessian_slack
            && self.allowed_acyclic
    }
}

/// Gradient, identity, Hessian-bound and loop-freedom checks at one state.
#[allow(clippy::too_many_arguments)]
pub fn check_state(
    topo: &Topology,
    sessions: &[Session],
    capacity: &CapacityFn,
    cost: &LinkCostFn,
    state: &NetworkState,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<StateCheck> {
    let gradient = gradient_check(topo, sessions, capacity, cost, state, rng)?;
    let mut out = StateCheck { gradient, hessian_max_gap: f64::NEG_INFINITY, ..Default::default() };
    for block in standard_blocks(topo, sessions, capacity, cost, state)? {
        let r = hessian_bound_check(topo, sessions, capacity, cost, state, &block, trials, rng)?;
        if r.trials > 0 {
            out.hessian_blocks += 1;
            out.hessian_max_gap = out.hessian_max_gap.max(r.max_rel_gap);
        }
    }
    let radio = compute_radio(topo, capacity, state);
    let flow = compute_flows(topo, sessions, state)?;
    let marg = marginal_report(topo, sessions, state, &flow, &radio, cost, capacity, MarginalOptions::default())?;
    let sets = blocked_sets(topo, sessions, &state.phi, &marg.node_potential);
    out.allowed_acyclic = allowed_graph_acyclic(topo, &state.phi, &sets);
    Ok(out)
}
