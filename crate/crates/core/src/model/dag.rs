use super::topology::Topology;

/// Topological order of all nodes over the edges selected by `active`.
/// On failure returns one directed cycle as a node list.
pub fn topo_order(
    topo: &Topology,
    active: impl Fn(usize) -> bool,
) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = topo.num_nodes();
    let mut indeg = vec![0usize; n];
    for (id, link) in topo.links().iter().enumerate() {
        if active(id) {
            indeg[link.to] += 1;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut stack: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
    while let Some(u) = stack.pop() {
        order.push(u);
        for &id in topo.out_links(u) {
            if active(id) {
                let v = topo.link(id).to;
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // every leftover node has an active in-edge from another leftover node;
    // walking those edges backwards must revisit a node
    let leftover: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();
    let start = leftover.iter().position(|&b| b).expect("leftover node");
    let mut seen = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut u = start;
    while seen[u] == usize::MAX {
        seen[u] = path.len();
        path.push(u);
        u = topo
            .in_links(u)
            .iter()
            .filter(|&&id| active(id))
            .map(|&id| topo.link(id).from)
            .find(|&m| leftover[m])
            .expect("leftover predecessor");
    }
    let mut cycle = path[seen[u]..].to_vec();
    cycle.reverse();
    Err(cycle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::topology::Link;

    fn ring(n: usize) -> Topology {
        let mut links = Vec::new();
        for i in 0..n {
            links.push(Link { from: i, to: (i + 1) % n });
            links.push(Link { from: (i + 1) % n, to: i });
        }
        let gain = (0..n * n).map(|k| if k / n == k % n { None } else { Some(1.0) }).collect();
        Topology::new(n, links, gain, vec![0.1; n], vec![10.0; n]).unwrap()
    }

    #[test]
    fn orders_a_path() {
        let t = ring(4);
        // forward edges 0->1->2->3 only
        let order = topo_order(&t, |id| id % 2 == 0 && id < 6).unwrap();
        let pos: Vec<usize> = (0..4).map(|v| order.iter().position(|&u| u == v).unwrap()).collect();
        assert!(pos[0] < pos[1] && pos[1] < pos[2] && pos[2] < pos[3]);
    }

    #[test]
    fn reports_cycle() {
        let t = ring(4);
        let cycle = topo_order(&t, |id| id == 2 || id == 3).unwrap_err();
        let mut sorted = cycle.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2]);
        // consecutive cycle nodes are joined by active links
        for w in 0..cycle.len() {
            let (a, b) = (cycle[w], cycle[(w + 1) % cycle.len()]);
            assert!(t.find_link(a, b).is_some());
        }
    }
}
