use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
}

/// Directed radio graph with path gains, receiver noise and per-node power caps.
///
/// Gains are stored densely; `None` marks a pair with no gain entry. Every
/// transmitter/receiver pair `(m, j)` with `m != j` that enters an SINR
/// denominator must carry a gain. Self gains `G_jj` are optional and only
/// contribute interference when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyDoc", into = "TopologyDoc")]
pub struct Topology {
    num_nodes: usize,
    links: Vec<Link>,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
    gain: Vec<Option<f64>>,
    noise: Vec<f64>,
    power_cap: Vec<f64>,
    index: HashMap<(usize, usize), LinkId>,
}

/// Wire form of [`Topology`] used by the JSON instance schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub num_nodes: usize,
    pub links: Vec<[usize; 2]>,
    /// Row-major `num_nodes x num_nodes` gain matrix, `gain[m][j]` = G_mj.
    pub gain: Vec<Vec<Option<f64>>>,
    pub noise: Vec<f64>,
    pub power_cap: Vec<f64>,
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = Error;

    fn try_from(doc: TopologyDoc) -> Result<Self> {
        let n = doc.num_nodes;
        if doc.gain.len() != n || doc.gain.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidTopology(format!(
                "gain matrix must be {n}x{n}"
            )));
        }
        let gain = doc.gain.into_iter().flatten().collect();
        let links = doc
            .links
            .into_iter()
            .map(|[from, to]| Link { from, to })
            .collect();
        Topology::new(n, links, gain, doc.noise, doc.power_cap)
    }
}

impl From<Topology> for TopologyDoc {
    fn from(t: Topology) -> Self {
        let n = t.num_nodes;
        TopologyDoc {
            num_nodes: n,
            links: t.links.iter().map(|l| [l.from, l.to]).collect(),
            gain: t.gain.chunks(n.max(1)).map(|c| c.to_vec()).collect(),
            noise: t.noise,
            power_cap: t.power_cap,
        }
    }
}

impl Topology {
    /// Builds and validates a topology. `gain` is row-major with `gain[m * n + j]` = G_mj.
    pub fn new(
        num_nodes: usize,
        links: Vec<Link>,
        gain: Vec<Option<f64>>,
        noise: Vec<f64>,
        power_cap: Vec<f64>,
    ) -> Result<Self> {
        let n = num_nodes;
        if n == 0 {
            return Err(Error::InvalidTopology("no nodes".into()));
        }
        if gain.len() != n * n || noise.len() != n || power_cap.len() != n {
            return Err(Error::InvalidTopology(
                "gain, noise and power_cap sizes must match the node count".into(),
            ));
        }
        let mut index = HashMap::with_capacity(links.len());
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (id, link) in links.iter().enumerate() {
            if link.from >= n || link.to >= n {
                return Err(Error::InvalidTopology(format!(
                    "link ({}, {}) references an unknown node",
                    link.from, link.to
                )));
            }
            if link.from == link.to {
                return Err(Error::InvalidTopology(format!("self loop at node {}", link.from)));
            }
            if index.insert((link.from, link.to), id).is_some() {
                return Err(Error::InvalidTopology(format!(
                    "duplicate link ({}, {})",
                    link.from, link.to
                )));
            }
            out_links[link.from].push(id);
            in_links[link.to].push(id);
        }
        for (j, &nj) in noise.iter().enumerate() {
            if !(nj > 0.0 && nj.is_finite()) {
                return Err(Error::InvalidTopology(format!("noise at node {j} must be positive")));
            }
        }
        for (i, &p) in power_cap.iter().enumerate() {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::InvalidTopology(format!(
                    "power cap at node {i} must exceed 1"
                )));
            }
        }
        for (k, g) in gain.iter().enumerate() {
            if let Some(g) = g {
                if !(*g > 0.0 && g.is_finite()) {
                    return Err(Error::InvalidTopology(format!(
                        "gain from {} to {} must be positive",
                        k / n,
                        k % n
                    )));
                }
            }
        }
        let topo = Topology {
            num_nodes: n,
            links,
            out_links,
            in_links,
            gain,
            noise,
            power_cap,
            index,
        };
        topo.check_required_gains()?;
        if !topo.is_strongly_connected() {
            return Err(Error::InvalidTopology("graph is not strongly connected".into()));
        }
        Ok(topo)
    }

    fn check_required_gains(&self) -> Result<()> {
        let receivers: Vec<usize> = (0..self.num_nodes)
            .filter(|&j| !self.in_links[j].is_empty())
            .collect();
        for m in 0..self.num_nodes {
            if self.out_links[m].is_empty() {
                continue;
            }
            for &j in &receivers {
                if m != j && self.gain[m * self.num_nodes + j].is_none() {
                    return Err(Error::MissingGain { from: m, to: j });
                }
            }
        }
        Ok(())
    }

    fn is_strongly_connected(&self) -> bool {
        if self.num_nodes == 1 {
            return true;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; self.num_nodes];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                let adj = if forward { &self.out_links[u] } else { &self.in_links[u] };
                for &l in adj {
                    let v = if forward { self.links[l].to } else { self.links[l].from };
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Link {
        self.links[id]
    }

    pub fn out_links(&self, node: usize) -> &[LinkId] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: usize) -> &[LinkId] {
        &self.in_links[node]
    }

    pub fn find_link(&self, from: usize, to: usize) -> Option<LinkId> {
        self.index.get(&(from, to)).copied()
    }

    /// Path gain G_mj, zero when the pair has no entry.
    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.gain[from * self.num_nodes + to].unwrap_or(0.0)
    }

    pub fn has_gain(&self, from: usize, to: usize) -> bool {
        self.gain[from * self.num_nodes + to].is_some()
    }

    pub fn noise(&self, node: usize) -> f64 {
        self.noise[node]
    }

    pub fn power_cap(&self, node: usize) -> f64 {
        self.power_cap[node]
    }

    /// Returns a copy with the gain matrix replaced; links, noise and caps are kept.
    pub fn with_gains(&self, gain: Vec<Option<f64>>) -> Result<Topology> {
        Topology::new(
            self.num_nodes,
            self.links.clone(),
            gain,
            self.noise.clone(),
            self.power_cap.clone(),
        )
    }
}
