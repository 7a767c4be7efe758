use crate::error::{Error, Result};
use crate::model::{NetworkState, Session, Topology};

use super::generate::hops_to;

/// Min-hop single-path routing toward each destination. Among equal-hop
/// next hops the smallest node id wins. Every node forwards along its own
/// min-hop tree so the state is complete even off the session's path.
/// Power defaults are full power with an even split over out-links.
pub fn aodv_route(topo: &Topology, sessions: &[Session]) -> Result<NetworkState> {
    let mut st = NetworkState::blank(topo, sessions);
    for (w, s) in sessions.iter().enumerate() {
        let dist = hops_to(topo, s.destination);
        for i in 0..topo.num_nodes() {
            if i == s.destination {
                continue;
            }
            if dist[i] == usize::MAX {
                return Err(Error::NoPath { from: i, to: s.destination });
            }
            let next = topo
                .out_links(i)
                .iter()
                .copied()
                .filter(|&id| dist[topo.link(id).to] + 1 == dist[i])
                .min_by_key(|&id| topo.link(id).to)
                .expect("bfs predecessor");
            st.phi[w][next] = 1.0;
        }
    }
    Ok(st)
}
