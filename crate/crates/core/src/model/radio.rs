use serde::{Deserialize, Serialize};

use super::capacity::CapacityFn;
use super::state::NetworkState;
use super::topology::Topology;

/// Physical-layer quantities derived from the power variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioState {
    pub node_power: Vec<f64>,
    pub link_power: Vec<f64>,
    pub interference: Vec<f64>,
    pub sinr: Vec<f64>,
    pub capacity: Vec<f64>,
}

/// Node power `P_i = P̄_i^γ_i`.
pub fn node_power(topo: &Topology, gamma: &[f64]) -> Vec<f64> {
    (0..topo.num_nodes()).map(|i| topo.power_cap(i).powf(gamma[i])).collect()
}

/// Interference-plus-noise and SINR of every link for given node and link powers.
pub fn interference_and_sinr(topo: &Topology, node_power: &[f64], link_power: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = topo.num_nodes();
    let mut interference = Vec::with_capacity(topo.num_links());
    let mut sinr = Vec::with_capacity(topo.num_links());
    for (id, link) in topo.links().iter().enumerate() {
        let (i, j) = (link.from, link.to);
        let g = topo.gain(i, j);
        let own: f64 = topo
            .out_links(i)
            .iter()
            .filter(|&&k| k != id)
            .map(|&k| link_power[k])
            .sum();
        let mut others = 0.0;
        for m in 0..n {
            if m != i {
                others += topo.gain(m, j) * node_power[m];
            }
        }
        let inr = g * own + others + topo.noise(j);
        interference.push(inr);
        sinr.push(g * link_power[id] / inr);
    }
    (interference, sinr)
}

pub fn compute_radio(topo: &Topology, capacity: &CapacityFn, state: &NetworkState) -> RadioState {
    let node_power = node_power(topo, &state.gamma);
    let link_power: Vec<f64> = topo
        .links()
        .iter()
        .enumerate()
        .map(|(id, l)| node_power[l.from] * state.eta[id])
        .collect();
    let (interference, sinr) = interference_and_sinr(topo, &node_power, &link_power);
    let capacity = sinr.iter().map(|&x| capacity.value(x)).collect();
    RadioState { node_power, link_power, interference, sinr, capacity }
}

impl RadioState {
    /// Fixed-capacity radio for routing-only studies; power quantities are placeholders.
    pub fn with_capacities(capacity: Vec<f64>, num_nodes: usize) -> Self {
        let l = capacity.len();
        RadioState {
            node_power: vec![1.0; num_nodes],
            link_power: vec![1.0; l],
            interference: vec![1.0; l],
            sinr: vec![1.0; l],
            capacity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::topology::Link;

    #[test]
    fn two_pair_sinr() {
        // nodes 0..3; links 0->1 and 2->3 carry traffic, 1->2 and 3->0 close the ring
        let links = vec![
            Link { from: 0, to: 1 },
            Link { from: 2, to: 3 },
            Link { from: 1, to: 2 },
            Link { from: 3, to: 0 },
        ];
        let mut gain = vec![None; 16];
        let mut set = |m: usize, j: usize, g: f64| gain[m * 4 + j] = Some(g);
        for m in 0..4 {
            for j in 0..4 {
                if m != j {
                    set(m, j, 1e-9);
                }
            }
        }
        set(0, 1, 1.0);
        set(2, 3, 1.0);
        set(2, 1, 0.5);
        set(0, 3, 0.5);
        let topo = Topology::new(4, links, gain, vec![0.1; 4], vec![10.0; 4]).unwrap();
        // nodes 1 and 3 silent: link powers P_12 = P_34 = 10, the rest ~ 0
        let node_power = vec![10.0, 0.0, 10.0, 0.0];
        let link_power = vec![10.0, 10.0, 0.0, 0.0];
        let (inr, x) = interference_and_sinr(&topo, &node_power, &link_power);
        assert!((inr[0] - 5.1).abs() < 1e-12);
        assert!((x[0] - 10.0 / 5.1).abs() < 1e-12);
    }

    #[test]
    fn lone_link_sinr() {
        let topo = Topology::new(
            2,
            vec![Link { from: 0, to: 1 }, Link { from: 1, to: 0 }],
            vec![None, Some(1.0), Some(1.0), None],
            vec![0.1, 0.1],
            vec![10.0, 10.0],
        )
        .unwrap();
        let (_, x) = interference_and_sinr(&topo, &[10.0, 0.0], &[10.0, 0.0]);
        assert!((x[0] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn full_power_uniform_split() {
        let (t, s) = crate::fixtures::diamond();
        let st = NetworkState::uniform(&t, &s);
        let r = compute_radio(&t, &CapacityFn::high_sinr(1e5), &st);
        for (id, l) in t.links().iter().enumerate() {
            let d = t.out_links(l.from).len() as f64;
            assert!((r.link_power[id] - t.power_cap(l.from) / d).abs() < 1e-12);
        }
    }
}
