//! Small reference networks used by tests, examples and the `check` command.

use crate::model::session::Session;
use crate::model::topology::{Link, Topology};

fn dense_gains(n: usize, gain: impl Fn(usize, usize) -> f64) -> Vec<Option<f64>> {
    (0..n * n)
        .map(|k| {
            let (m, j) = (k / n, k % n);
            (m != j).then(|| gain(m, j))
        })
        .collect()
}

/// Nodes 0..3 with links 0->1, 0->2, 1->3, 2->3 and a return link 3->0;
/// one unit-rate session from 0 to 3.
pub fn diamond() -> (Topology, Vec<Session>) {
    let links = vec![
        Link { from: 0, to: 1 },
        Link { from: 0, to: 2 },
        Link { from: 1, to: 3 },
        Link { from: 2, to: 3 },
        Link { from: 3, to: 0 },
    ];
    let topo = Topology::new(
        4,
        links,
        dense_gains(4, |m, j| if (m + j) % 2 == 1 || (m, j) == (3, 0) { 1.0 } else { 0.05 }),
        vec![0.1; 4],
        vec![10.0; 4],
    )
    .expect("diamond fixture");
    (topo, vec![Session::inelastic(0, 3, 1.0)])
}

/// `n` nodes on a line with links in both directions between neighbours,
/// gains `|i - j|^-4`, and one unit-rate session from 0 to `n - 1`.
pub fn bidirectional_line(n: usize) -> (Topology, Vec<Session>) {
    let mut links = Vec::new();
    for i in 0..n - 1 {
        links.push(Link { from: i, to: i + 1 });
        links.push(Link { from: i + 1, to: i });
    }
    let topo = Topology::new(
        n,
        links,
        dense_gains(n, |m, j| (m.abs_diff(j) as f64).powi(-4)),
        vec![0.1; n],
        vec![10.0; n],
    )
    .expect("line fixture");
    (topo, vec![Session::inelastic(0, n - 1, 1.0)])
}
