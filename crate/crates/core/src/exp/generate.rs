use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Link, NetworkState, Session, Topology, ETA_FLOOR};

/// Random geometric instance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub num_nodes: usize,
    pub radius: f64,
    pub gain_exponent: f64,
    pub k: f64,
    pub power_cap: f64,
    pub noise: f64,
    pub session_prob: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_nodes: 25,
            radius: 0.5,
            gain_exponent: 4.0,
            k: 1e5,
            power_cap: 100.0,
            noise: 0.1,
            session_prob: 0.5,
            rate_min: 0.0,
            rate_max: 10.0,
            seed: 0,
            max_attempts: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub topology: Topology,
    pub sessions: Vec<Session>,
    pub positions: Vec<[f64; 2]>,
}

/// Dense gain matrix `d^-exponent` for every ordered pair of distinct nodes.
pub fn gains_from_positions(positions: &[[f64; 2]], exponent: f64) -> Vec<Option<f64>> {
    let n = positions.len();
    let mut gain = vec![None; n * n];
    for m in 0..n {
        for j in 0..n {
            if m != j {
                let d = distance(positions[m], positions[j]).max(1e-9);
                gain[m * n + j] = Some(d.powf(-exponent));
            }
        }
    }
    gain
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn unit_disc_point(rng: &mut impl Rng) -> [f64; 2] {
    let r = rng.gen::<f64>().sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    [r * theta.cos(), r * theta.sin()]
}

/// Draws node positions until the radius graph is strongly connected, then draws sessions.
pub fn generate_instance(cfg: &GenConfig) -> Result<Instance> {
    if cfg.num_nodes < 2 {
        return Err(Error::Config("need at least two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_nodes;
    for _ in 0..cfg.max_attempts.max(1) {
        let positions: Vec<[f64; 2]> = (0..n).map(|_| unit_disc_point(&mut rng)).collect();
        let mut links = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && distance(positions[i], positions[j]) < cfg.radius {
                    links.push(Link { from: i, to: j });
                }
            }
        }
        let gain = gains_from_positions(&positions, cfg.gain_exponent);
        let Ok(topology) = Topology::new(n, links, gain, vec![cfg.noise; n], vec![cfg.power_cap; n]) else {
            continue;
        };
        let mut sessions = Vec::new();
        for origin in 0..n {
            if rng.gen::<f64>() < cfg.session_prob {
                let mut dest = rng.gen_range(0..n - 1);
                if dest >= origin {
                    dest += 1;
                }
                let rate = rng.gen_range(cfg.rate_min..=cfg.rate_max).max(1e-6);
                sessions.push(Session::inelastic(origin, dest, rate));
            }
        }
        if sessions.is_empty() {
            let dest = if n > 1 { 1 } else { 0 };
            sessions.push(Session::inelastic(0, dest, rng.gen_range(cfg.rate_min..=cfg.rate_max).max(1e-6)));
        }
        return Ok(Instance { topology, sessions, positions });
    }
    Err(Error::ConnectivityFailure { attempts: cfg.max_attempts })
}

/// Hop distance from every node to `dest` (`usize::MAX` if unreachable).
pub fn hops_to(topo: &Topology, dest: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; topo.num_nodes()];
    dist[dest] = 0;
    let mut queue = std::collections::VecDeque::from([dest]);
    while let Some(v) = queue.pop_front() {
        for &id in topo.in_links(v) {
            let u = topo.link(id).from;
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Random loop-free state with every routing fraction on a random DAG face
/// strictly positive, interior power allocations and `γ ∈ [gamma_min, 1]`.
pub fn random_interior_state(topo: &Topology, sessions: &[Session], gamma_min: f64, rng: &mut impl Rng) -> NetworkState {
    let n = topo.num_nodes();
    let mut st = NetworkState::blank(topo, sessions);
    for (w, s) in sessions.iter().enumerate() {
        let dist = hops_to(topo, s.destination);
        let mut tie: Vec<usize> = (0..n).collect();
        tie.shuffle(rng);
        let rank = |v: usize| (dist[v], tie[v]);
        for i in 0..n {
            if i == s.destination {
                continue;
            }
            let down: Vec<usize> = topo
                .out_links(i)
                .iter()
                .copied()
                .filter(|&id| rank(topo.link(id).to) < rank(i))
                .collect();
            let weights: Vec<f64> = down.iter().map(|_| 0.2 + rng.gen::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            for (&id, wt) in down.iter().zip(&weights) {
                st.phi[w][id] = wt / total;
            }
        }
        if s.is_elastic() {
            let keep = 0.2 + 0.6 * rng.gen::<f64>();
            for i in topo.out_links(s.origin) {
                st.phi[w][*i] *= keep;
            }
            st.phi_overflow[w] = 1.0 - keep;
        }
    }
    for i in 0..n {
        let out = topo.out_links(i);
        let weights: Vec<f64> = out.iter().map(|_| 0.3 + rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for (&id, wt) in out.iter().zip(&weights) {
            st.eta[id] = (wt / total).max(ETA_FLOOR);
        }
        st.gamma[i] = gamma_min + (1.0 - gamma_min) * rng.gen::<f64>();
    }
    st
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_state;

    #[test]
    fn two_nodes_close_together() {
        let cfg = GenConfig { num_nodes: 2, radius: 2.0, ..GenConfig::default() };
        let inst = generate_instance(&cfg).unwrap();
        assert_eq!(inst.topology.num_links(), 2);
        assert_eq!(inst.topology.gain(0, 1), inst.topology.gain(1, 0));
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let cfg = GenConfig { seed: 17, ..GenConfig::default() };
        assert_eq!(generate_instance(&cfg).unwrap(), generate_instance(&cfg).unwrap());
    }

    #[test]
    fn default_instances_look_sane() {
        let mut degree = 0.0;
        let mut sessions = 0.0;
        for seed in 0..100 {
            let inst = generate_instance(&GenConfig { seed, ..GenConfig::default() }).unwrap();
            degree += inst.topology.num_links() as f64 / 25.0;
            sessions += inst.sessions.len() as f64;
            for p in &inst.positions {
                assert!(p[0] * p[0] + p[1] * p[1] <= 1.0);
            }
        }
        // radius 0.5 in the unit disc covers roughly a fifth of the area
        let degree = degree / 100.0;
        let sessions = sessions / 100.0;
        assert!(degree > 3.0 && degree < 8.0, "mean out-degree {degree}");
        assert!(sessions > 10.0 && sessions < 15.0, "mean sessions {sessions}");
    }

    #[test]
    fn interior_states_are_valid() {
        let inst = generate_instance(&GenConfig { num_nodes: 10, radius: 0.8, seed: 3, ..GenConfig::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let st = random_interior_state(&inst.topology, &inst.sessions, 0.5, &mut rng);
        assert!(validate_state(&inst.topology, &inst.sessions, &st).is_empty());
    }
}
