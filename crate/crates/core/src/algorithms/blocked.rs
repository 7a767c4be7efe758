use crate::model::{LinkId, Session, Topology};

/// Per (session, node) blocked out-links. `blocked[w][link]` is true when
/// node `link.from` may not shift session `w` traffic onto `link`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedSets {
    pub blocked: Vec<Vec<bool>>,
}

impl BlockedSets {
    /// Out-links of `node` that session `w` may use (`AN_i(w)`).
    pub fn allowed(&self, topo: &Topology, w: usize, node: usize) -> Vec<LinkId> {
        topo.out_links(node).iter().copied().filter(|&id| !self.blocked[w][id]).collect()
    }
}

/// Blocked links for one session, seen from `node`.
///
/// A link already carrying traffic is never blocked; its fraction can only
/// be reduced gradually by the update. A zero-fraction link `(i, j)` is
/// blocked when `p_j >= p_i`, when `j` forwards traffic downstream over an
/// improper link (one leading to a higher potential), or when `i` is
/// reachable from `j` over active links. The last rule alone keeps the
/// active graph acyclic under a single-node update.
pub fn blocked_links_at(topo: &Topology, session: &Session, phi: &[f64], potential: &[f64], node: usize) -> Vec<LinkId> {
    if node == session.destination {
        return topo.out_links(node).to_vec();
    }
    let n = topo.num_nodes();
    let active = |id: LinkId| phi[id] > 0.0;
    // nodes that can reach `node` along active links
    let mut reaches = vec![false; n];
    reaches[node] = true;
    let mut stack = vec![node];
    while let Some(v) = stack.pop() {
        for &id in topo.in_links(v) {
            let u = topo.link(id).from;
            if active(id) && !reaches[u] {
                reaches[u] = true;
                stack.push(u);
            }
        }
    }
    let tainted = tainted_nodes(topo, phi, potential);
    topo.out_links(node)
        .iter()
        .copied()
        .filter(|&id| {
            if active(id) {
                return false;
            }
            let j = topo.link(id).to;
            potential[j] >= potential[node] || tainted[j] || reaches[j]
        })
        .collect()
}

/// Nodes with an improper active link somewhere downstream (including their own).
fn tainted_nodes(topo: &Topology, phi: &[f64], potential: &[f64]) -> Vec<bool> {
    let n = topo.num_nodes();
    let mut tainted = vec![false; n];
    let mut stack = Vec::new();
    for (id, l) in topo.links().iter().enumerate() {
        if phi[id] > 0.0 && potential[l.to] > potential[l.from] && !tainted[l.from] {
            tainted[l.from] = true;
            stack.push(l.from);
        }
    }
    while let Some(v) = stack.pop() {
        for &id in topo.in_links(v) {
            let u = topo.link(id).from;
            if phi[id] > 0.0 && !tainted[u] {
                tainted[u] = true;
                stack.push(u);
            }
        }
    }
    tainted
}

/// Blocked sets for every session and node from one set of potentials.
pub fn blocked_sets(topo: &Topology, sessions: &[Session], phi: &[Vec<f64>], potentials: &[Vec<f64>]) -> BlockedSets {
    let blocked = sessions
        .iter()
        .enumerate()
        .map(|(w, s)| {
            let mut b = vec![false; topo.num_links()];
            for i in 0..topo.num_nodes() {
                for id in blocked_links_at(topo, s, &phi[w], &potentials[w], i) {
                    b[id] = true;
                }
            }
            b
        })
        .collect();
    BlockedSets { blocked }
}

/// True when the graph of active or allowed links of every session is acyclic.
pub fn allowed_graph_acyclic(topo: &Topology, phi: &[Vec<f64>], sets: &BlockedSets) -> bool {
    phi.iter().zip(&sets.blocked).all(|(p, b)| {
        crate::model::dag::topo_order(topo, |id| p[id] > 0.0 || !b[id]).is_ok()
    })
}
