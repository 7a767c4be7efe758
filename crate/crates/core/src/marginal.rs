//! First-derivative prices: node potentials, marginal routing, power
//! allocation and power control costs, power-control messages and hop counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CapacityFn, FlowState, LinkCostFn, NetworkState, RadioState, Session, Topology};

/// Which power-control messages a node folds into its marginal cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum MsgScope {
    #[default]
    All,
    /// Messages from the `k` other nodes with the largest path gain from the receiver.
    KNearest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MarginalOptions {
    /// Use the precise-capacity form of the power allocation price.
    pub refined: bool,
    pub scope: MsgScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    /// `node_potential[w][i]` = ∂D/∂r_i(w).
    pub node_potential: Vec<Vec<f64>>,
    /// `delta_phi[w][link]`; zero on links leaving the destination.
    pub delta_phi: Vec<Vec<f64>>,
    pub delta_phi_overflow: Vec<f64>,
    pub delta_eta: Vec<f64>,
    pub msg: Vec<f64>,
    pub delta_gamma: Vec<f64>,
    /// `hop_count[w][i]`, longest active path to the destination.
    pub hop_count: Vec<Vec<usize>>,
    /// ∂D_ij/∂F_ij per link.
    pub d_flow: Vec<f64>,
    /// ∂D_ij/∂C_ij per link.
    pub d_cap: Vec<f64>,
}

/// Per-link partial derivatives `(∂D/∂F, ∂D/∂C)` at the current operating point.
pub fn link_partials(flow: &FlowState, radio: &RadioState, cost: &LinkCostFn) -> (Vec<f64>, Vec<f64>) {
    flow.link_flow
        .iter()
        .zip(&radio.capacity)
        .map(|(&f, &c)| (cost.d_flow(c, f), cost.d_cap(c, f)))
        .unzip()
}

/// Marginal overflow cost `B'_w(F_wb)` (zero for inelastic sessions).
pub fn overflow_marginals(sessions: &[Session], flow: &FlowState) -> Vec<f64> {
    sessions
        .iter()
        .enumerate()
        .map(|(w, s)| s.utility().map_or(0.0, |u| u.loss_d1(s.source_rate(), flow.overflow_rate[w])))
        .collect()
}

/// Node potentials in reverse topological order of each session's active graph.
pub fn node_potentials(
    topo: &Topology,
    sessions: &[Session],
    state: &NetworkState,
    flow: &FlowState,
    d_flow: &[f64],
) -> Vec<Vec<f64>> {
    let overflow = overflow_marginals(sessions, flow);
    sessions
        .iter()
        .enumerate()
        .map(|(w, s)| {
            let phi = &state.phi[w];
            let mut p = vec![0.0; topo.num_nodes()];
            for &i in flow.order[w].iter().rev() {
                if i == s.destination {
                    continue;
                }
                let mut v = 0.0;
                for &id in topo.out_links(i) {
                    if phi[id] > 0.0 {
                        v += phi[id] * (d_flow[id] + p[topo.link(id).to]);
                    }
                }
                if i == s.origin && s.is_elastic() {
                    v += state.phi_overflow[w] * overflow[w];
                }
                p[i] = v;
            }
            p
        })
        .collect()
}

/// `δφ_ij(w) = ∂D_ij/∂F_ij + ∂D/∂r_j(w)` on every link not leaving `D(w)`.
pub fn marginal_routing_costs(
    topo: &Topology,
    sessions: &[Session],
    potentials: &[Vec<f64>],
    d_flow: &[f64],
) -> Vec<Vec<f64>> {
    sessions
        .iter()
        .enumerate()
        .map(|(w, s)| {
            topo.links()
                .iter()
                .enumerate()
                .map(|(id, l)| if l.from == s.destination { 0.0 } else { d_flow[id] + potentials[w][l.to] })
                .collect()
        })
        .collect()
}

/// Marginal power allocation cost per link.
pub fn marginal_power_alloc_costs(
    topo: &Topology,
    state: &NetworkState,
    radio: &RadioState,
    d_cap: &[f64],
    capacity: &CapacityFn,
    refined: bool,
) -> Vec<f64> {
    topo.links()
        .iter()
        .enumerate()
        .map(|(id, l)| {
            let x = radio.sinr[id];
            if refined {
                let k = capacity.gain_factor();
                let g = topo.gain(l.from, l.to);
                let inr = radio.interference[id];
                let pi = radio.node_power[l.from];
                d_cap[id] * ((k - 1.0) * g / (k * g * pi * state.eta[id] + inr) + g / inr)
            } else {
                d_cap[id] * capacity.elasticity(x) * (1.0 + x) / radio.link_power[id]
            }
        })
        .collect()
}

/// `MSG(n) = Σ_{m∈I(n)} -∂D_mn/∂C_mn · C'_mn x_mn / IN_mn`.
pub fn power_control_messages(topo: &Topology, radio: &RadioState, d_cap: &[f64], capacity: &CapacityFn) -> Vec<f64> {
    (0..topo.num_nodes())
        .map(|n| {
            topo.in_links(n)
                .iter()
                .map(|&id| -d_cap[id] * capacity.elasticity(radio.sinr[id]) / radio.interference[id])
                .sum()
        })
        .collect()
}

/// Other nodes whose messages node `i` uses under `scope`, as a membership mask.
pub fn scope_mask(topo: &Topology, i: usize, scope: MsgScope) -> Result<Vec<bool>> {
    let n = topo.num_nodes();
    match scope {
        MsgScope::All => Ok((0..n).map(|m| m != i).collect()),
        MsgScope::KNearest(k) => {
            if k > n - 1 {
                return Err(Error::ScopeTooLarge { k, max: n - 1 });
            }
            let mut others: Vec<usize> = (0..n).filter(|&m| m != i).collect();
            others.sort_by(|&a, &b| topo.gain(i, b).total_cmp(&topo.gain(i, a)).then(a.cmp(&b)));
            let mut mask = vec![false; n];
            for &m in &others[..k] {
                mask[m] = true;
            }
            Ok(mask)
        }
    }
}

/// `δγ_i = P_i [Σ_n G_in MSG(n) + Σ_{j∈O(i)} δη_ij η_ij]` with the node's own
/// message always included and remote messages restricted to `scope`.
pub fn marginal_power_control_costs(
    topo: &Topology,
    msgs: &[f64],
    delta_eta: &[f64],
    state: &NetworkState,
    radio: &RadioState,
    scope: MsgScope,
) -> Result<Vec<f64>> {
    (0..topo.num_nodes())
        .map(|i| {
            let mask = scope_mask(topo, i, scope)?;
            Ok(power_control_cost_at(topo, i, msgs, &mask, delta_eta, state, radio))
        })
        .collect()
}

/// δγ at one node from an explicit set of (possibly received) messages.
pub fn power_control_cost_at(
    topo: &Topology,
    i: usize,
    msgs: &[f64],
    mask: &[bool],
    delta_eta: &[f64],
    state: &NetworkState,
    radio: &RadioState,
) -> f64 {
    let mut s = 0.0;
    for n in 0..topo.num_nodes() {
        if n == i || mask[n] {
            s += topo.gain(i, n) * msgs[n];
        }
    }
    for &id in topo.out_links(i) {
        s += delta_eta[id] * state.eta[id];
    }
    radio.node_power[i] * s
}

/// Longest hop count to `D(w)` over each session's active routing graph.
pub fn hop_counts(topo: &Topology, sessions: &[Session], state: &NetworkState, flow: &FlowState) -> Vec<Vec<usize>> {
    sessions
        .iter()
        .enumerate()
        .map(|(w, s)| {
            let phi = &state.phi[w];
            let mut h = vec![0usize; topo.num_nodes()];
            for &i in flow.order[w].iter().rev() {
                if i == s.destination {
                    continue;
                }
                h[i] = topo
                    .out_links(i)
                    .iter()
                    .filter(|&&id| phi[id] > 0.0)
                    .map(|&id| h[topo.link(id).to] + 1)
                    .max()
                    .unwrap_or(0);
            }
            h
        })
        .collect()
}

/// Relative gap in `Σ ∂D/∂F·F (+ Σ B'·F_wb) = Σ_w ∂D/∂r_{O(w)}·r_w`.
pub fn lemma1_residual(sessions: &[Session], flow: &FlowState, d_flow: &[f64], potentials: &[Vec<f64>]) -> f64 {
    let overflow = overflow_marginals(sessions, flow);
    let mut lhs: f64 = d_flow.iter().zip(&flow.link_flow).map(|(d, f)| d * f).sum();
    lhs += overflow.iter().zip(&flow.overflow_rate).map(|(b, f)| b * f).sum::<f64>();
    let rhs: f64 = sessions
        .iter()
        .enumerate()
        .map(|(w, s)| potentials[w][s.origin] * s.source_rate())
        .sum();
    (lhs - rhs).abs() / lhs.abs().max(1.0)
}

#[allow(clippy::too_many_arguments)]
pub fn marginal_report(
    topo: &Topology,
    sessions: &[Session],
    state: &NetworkState,
    flow: &FlowState,
    radio: &RadioState,
    cost: &LinkCostFn,
    capacity: &CapacityFn,
    opts: MarginalOptions,
) -> Result<MarginalReport> {
    let (d_flow, d_cap) = link_partials(flow, radio, cost);
    let node_potential = node_potentials(topo, sessions, state, flow, &d_flow);
    let delta_phi = marginal_routing_costs(topo, sessions, &node_potential, &d_flow);
    let delta_phi_overflow = overflow_marginals(sessions, flow);
    let delta_eta = marginal_power_alloc_costs(topo, state, radio, &d_cap, capacity, opts.refined);
    let msg = power_control_messages(topo, radio, &d_cap, capacity);
    let delta_gamma = marginal_power_control_costs(topo, &msg, &delta_eta, state, radio, opts.scope)?;
    let hop_count = hop_counts(topo, sessions, state, flow);
    Ok(MarginalReport {
        node_potential,
        delta_phi,
        delta_phi_overflow,
        delta_eta,
        msg,
        delta_gamma,
        hop_count,
        d_flow,
        d_cap,
    })
}
