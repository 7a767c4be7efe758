use serde::{Deserialize, Serialize};

use super::dag::topo_order;
use super::session::Session;
use super::topology::Topology;

/// Lower bound kept on every power allocation fraction.
pub const ETA_FLOOR: f64 = 1e-6;

const SUM_TOL: f64 = 1e-9;

/// Decision vector: routing fractions, overflow fractions, power allocation and power control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// `phi[w][link]`.
    pub phi: Vec<Vec<f64>>,
    /// `phi_overflow[w]`, always zero for inelastic sessions.
    pub phi_overflow: Vec<f64>,
    /// `eta[link]`.
    pub eta: Vec<f64>,
    /// `gamma[node]`.
    pub gamma: Vec<f64>,
}

impl NetworkState {
    /// Zero routing, uniform power allocation and full power.
    pub fn blank(topo: &Topology, sessions: &[Session]) -> Self {
        let mut eta = vec![0.0; topo.num_links()];
        for i in 0..topo.num_nodes() {
            let out = topo.out_links(i);
            for &l in out {
                eta[l] = 1.0 / out.len() as f64;
            }
        }
        NetworkState {
            phi: vec![vec![0.0; topo.num_links()]; sessions.len()],
            phi_overflow: vec![0.0; sessions.len()],
            eta,
            gamma: vec![1.0; topo.num_nodes()],
        }
    }

    /// Routing that splits evenly over every out-link at each non-destination node.
    pub fn uniform(topo: &Topology, sessions: &[Session]) -> Self {
        let mut s = Self::blank(topo, sessions);
        for (w, sess) in sessions.iter().enumerate() {
            for i in 0..topo.num_nodes() {
                if i == sess.destination {
                    continue;
                }
                let out = topo.out_links(i);
                for &l in out {
                    s.phi[w][l] = 1.0 / out.len() as f64;
                }
            }
        }
        s
    }

    /// Routing fraction on the link `from -> to`, zero if the link is absent.
    pub fn phi_on(&self, topo: &Topology, w: usize, from: usize, to: usize) -> f64 {
        topo.find_link(from, to).map_or(0.0, |l| self.phi[w][l])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    Shape(String),
    SimplexViolation { session: usize, node: usize, sum: f64 },
    NegativeFraction { session: usize, link: usize, value: f64 },
    DestinationForwards { session: usize, link: usize },
    OverflowOnInelastic { session: usize },
    EtaSimplexViolation { node: usize, sum: f64 },
    EtaBelowFloor { link: usize, value: f64 },
    GammaAboveOne { node: usize, value: f64 },
    RoutingCycle { session: usize, cycle: Vec<usize> },
}

/// Lists every violated state constraint; empty iff the state is valid.
pub fn validate_state(topo: &Topology, sessions: &[Session], state: &NetworkState) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let (n, l) = (topo.num_nodes(), topo.num_links());
    if state.phi.len() != sessions.len()
        || state.phi.iter().any(|p| p.len() != l)
        || state.phi_overflow.len() != sessions.len()
        || state.eta.len() != l
        || state.gamma.len() != n
    {
        out.push(Diagnostic::Shape("state dimensions do not match topology and sessions".into()));
        return out;
    }
    for (w, sess) in sessions.iter().enumerate() {
        let phi = &state.phi[w];
        let overflow = state.phi_overflow[w];
        if !sess.is_elastic() && overflow != 0.0 {
            out.push(Diagnostic::OverflowOnInelastic { session: w });
        }
        for (id, &v) in phi.iter().enumerate() {
            if !(v >= 0.0) {
                out.push(Diagnostic::NegativeFraction { session: w, link: id, value: v });
            }
        }
        for i in 0..n {
            let sum: f64 = topo.out_links(i).iter().map(|&id| phi[id]).sum();
            if i == sess.destination {
                for &id in topo.out_links(i) {
                    if phi[id] != 0.0 {
                        out.push(Diagnostic::DestinationForwards { session: w, link: id });
                    }
                }
                continue;
            }
            let extra = if i == sess.origin { overflow } else { 0.0 };
            if (sum + extra - 1.0).abs() > SUM_TOL {
                out.push(Diagnostic::SimplexViolation { session: w, node: i, sum: sum + extra });
            }
        }
        if let Err(cycle) = topo_order(topo, |id| phi[id] > 0.0 && topo.link(id).from != sess.destination) {
            out.push(Diagnostic::RoutingCycle { session: w, cycle });
        }
    }
    for i in 0..n {
        let sum: f64 = topo.out_links(i).iter().map(|&id| state.eta[id]).sum();
        if (sum - 1.0).abs() > SUM_TOL {
            out.push(Diagnostic::EtaSimplexViolation { node: i, sum });
        }
    }
    for (id, &e) in state.eta.iter().enumerate() {
        if !(e >= ETA_FLOOR * (1.0 - 1e-9)) {
            out.push(Diagnostic::EtaBelowFloor { link: id, value: e });
        }
    }
    for (i, &g) in state.gamma.iter().enumerate() {
        if !(g <= 1.0) {
            out.push(Diagnostic::GammaAboveOne { node: i, value: g });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::diamond;

    #[test]
    fn uniform_state_is_valid() {
        let (t, s) = diamond();
        assert!(validate_state(&t, &s, &NetworkState::uniform(&t, &s)).is_empty());
    }

    #[test]
    fn simplex_violation_reported_once() {
        let (t, s) = diamond();
        let mut st = NetworkState::uniform(&t, &s);
        let l = t.find_link(0, 1).unwrap();
        st.phi[0][l] = 0.4;
        let d = validate_state(&t, &s, &st);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::SimplexViolation { session: 0, node: 0, .. }));
    }

    #[test]
    fn two_cycle_reported() {
        let (t, s) = crate::fixtures::bidirectional_line(3);
        let mut st = NetworkState::blank(&t, &s);
        // session 0 -> 2: node 0 forwards to 1, node 1 sends back to 0
        st.phi[0][t.find_link(0, 1).unwrap()] = 1.0;
        st.phi[0][t.find_link(1, 0).unwrap()] = 1.0;
        let d = validate_state(&t, &s, &st);
        assert_eq!(d.len(), 1);
        assert!(matches!(&d[0], Diagnostic::RoutingCycle { session: 0, .. }));
    }
}
