//! Distributed message exchange: node potentials and power control messages
//! pass through a ledger of published values and a noisy channel before the
//! update rules see them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::driver::{optimize, PriceOracle, Snapshot};
use crate::algorithms::{GuardExhaustion, OptimizerConfig, Problem, Trajectory};
use crate::error::{Error, Result};
use crate::marginal::{overflow_marginals, power_control_cost_at, scope_mask, MsgScope};
use crate::model::NetworkState;

/// When consumers see a producer's latest value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Staleness {
    /// Every read sees the producer's current value.
    #[default]
    Fresh,
    /// Reads see the value the producer published at its last iteration.
    /// Potentials are published after the producer's routing update, power
    /// control messages after the power control phase read its inputs.
    Cached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    /// Received values are scaled by an independent factor from `U[1-s, 1+s]`.
    pub noise_scale: f64,
    pub staleness: Staleness,
    pub msg_scope: MsgScope,
    pub seed: u64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel { noise_scale: 0.0, staleness: Staleness::Fresh, msg_scope: MsgScope::All, seed: 0 }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.noise_scale) {
            return Err(Error::Config("noise scale must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Multiplicative corruption factor for one delivery.
    pub fn factor(&self, rng: &mut impl Rng) -> f64 {
        if self.noise_scale == 0.0 {
            1.0
        } else {
            rng.gen_range(1.0 - self.noise_scale..=1.0 + self.noise_scale)
        }
    }
}

/// Last published value and publication iteration per producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLedger {
    /// `potential[w][node]`.
    pub potential: Vec<Vec<f64>>,
    pub potential_stamp: Vec<Vec<usize>>,
    pub msg: Vec<f64>,
    pub msg_stamp: Vec<usize>,
}

impl MessageLedger {
    /// Ledger holding the given exact values, stamped at iteration 0.
    pub fn new(potential: Vec<Vec<f64>>, msg: Vec<f64>) -> Self {
        let potential_stamp = potential.iter().map(|p| vec![0; p.len()]).collect();
        let msg_stamp = vec![0; msg.len()];
        MessageLedger { potential, potential_stamp, msg, msg_stamp }
    }

    pub fn publish_potential(&mut self, node: usize, w: usize, value: f64, iteration: usize) {
        self.potential[w][node] = value;
        self.potential_stamp[w][node] = iteration;
    }

    pub fn publish_msg(&mut self, node: usize, value: f64, iteration: usize) {
        self.msg[node] = value;
        self.msg_stamp[node] = iteration;
    }
}

/// Values of `source` as `consumer` receives them: every entry except the
/// consumer's own is scaled by a fresh channel factor.
pub fn deliver(source: &[f64], consumer: usize, channel: &ChannelModel, rng: &mut impl Rng) -> Vec<f64> {
    source
        .iter()
        .enumerate()
        .map(|(n, &v)| if n == consumer { v } else { v * channel.factor(rng) })
        .collect()
}

struct LedgerPrices {
    channel: ChannelModel,
    ledger: MessageLedger,
    rng: ChaCha8Rng,
}

impl PriceOracle for LedgerPrices {
    fn potentials(&mut self, node: usize, w: usize, prob: &Problem, state: &NetworkState, cur: &Snapshot) -> Vec<f64> {
        let source = match self.channel.staleness {
            Staleness::Fresh => &cur.marg.node_potential[w],
            Staleness::Cached => &self.ledger.potential[w],
        };
        let mut seen = deliver(source, node, &self.channel, &mut self.rng);
        // own potential from local link marginals and the received downstream values,
        // with the same arithmetic as the exact recursion
        let topo = &prob.topology;
        let s = &prob.sessions[w];
        let phi = &state.phi[w];
        let mut v = 0.0;
        for &id in topo.out_links(node) {
            if phi[id] > 0.0 {
                v += phi[id] * (cur.marg.d_flow[id] + seen[topo.link(id).to]);
            }
        }
        if node == s.origin && s.is_elastic() {
            v += state.phi_overflow[w] * overflow_marginals(&prob.sessions, &cur.flow)[w];
        }
        seen[node] = v;
        seen
    }

    fn routed(&mut self, node: usize, w: usize, iteration: usize, cur: &Snapshot) {
        self.ledger.publish_potential(node, w, cur.marg.node_potential[w][node], iteration);
    }

    fn delta_gamma(&mut self, node: usize, prob: &Problem, state: &NetworkState, cur: &Snapshot) -> Result<f64> {
        let source = match self.channel.staleness {
            Staleness::Fresh => &cur.marg.msg,
            Staleness::Cached => &self.ledger.msg,
        };
        let mut msgs = deliver(source, node, &self.channel, &mut self.rng);
        msgs[node] = cur.marg.msg[node];
        let mask = scope_mask(&prob.topology, node, self.channel.msg_scope)?;
        Ok(power_control_cost_at(&prob.topology, node, &msgs, &mask, &cur.marg.delta_eta, state, &cur.radio))
    }

    fn power_controlled(&mut self, updated: &[bool], iteration: usize, cur: &Snapshot) {
        for (n, &u) in updated.iter().enumerate() {
            if u {
                self.ledger.publish_msg(n, cur.marg.msg[n], iteration);
            }
        }
    }
}

/// Runs the optimizer with every cross-node price read through the channel.
///
/// The channel's scope replaces the configured one, and guard exhaustion
/// reverts the update and is counted instead of failing the run.
pub fn run_distributed(
    prob: &Problem,
    init: &NetworkState,
    cfg: &OptimizerConfig,
    channel: &ChannelModel,
) -> Result<Trajectory> {
    channel.validate()?;
    let mut cfg = cfg.clone();
    cfg.msg_scope = channel.msg_scope;
    cfg.guard.on_exhaustion = GuardExhaustion::Revert;
    let snap = prob.snapshot(init, prob.marginal_options(&cfg))?;
    if !snap.cost.is_finite() {
        return Err(Error::InitialInfeasible);
    }
    let mut oracle = LedgerPrices {
        channel: *channel,
        ledger: MessageLedger::new(snap.marg.node_potential, snap.marg.msg),
        rng: ChaCha8Rng::seed_from_u64(channel.seed),
    };
    optimize(prob, init, &cfg, &mut oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_jopr, PowerAllocAlg};
    use crate::fixtures::diamond;
    use crate::model::{CapacityFn, LinkCostFn};

    #[test]
    fn zero_noise_passes_through() {
        let ch = ChannelModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(deliver(&[1.0, 2.0, 3.0], 1, &ch, &mut rng), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn noise_factors_stay_in_range() {
        let ch = ChannelModel { noise_scale: 0.9, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let f = ch.factor(&mut rng);
            assert!((0.1..=1.9).contains(&f));
        }
        let got = deliver(&[5.0, 5.0], 0, &ch, &mut rng);
        assert_eq!(got[0], 5.0);
    }

    #[test]
    fn ledger_keeps_latest_and_stamps() {
        let mut l = MessageLedger::new(vec![vec![0.0; 3]], vec![0.0; 3]);
        l.publish_potential(1, 0, 2.0, 3);
        l.publish_potential(1, 0, 4.0, 5);
        assert_eq!(l.potential[0][1], 4.0);
        assert_eq!(l.potential_stamp[0], vec![0, 5, 0]);
        l.publish_msg(2, 1.5, 7);
        assert_eq!(l.msg_stamp, vec![0, 0, 7]);
    }

    #[test]
    fn degenerate_channel_reproduces_centralized_run() {
        let (topology, sessions) = diamond();
        let prob = Problem { topology, sessions, capacity: CapacityFn::high_sinr(1e5), cost: LinkCostFn::Mm1Delay };
        let init = NetworkState::uniform(&prob.topology, &prob.sessions);
        let cfg = OptimizerConfig { power_alloc: PowerAllocAlg::Bpa, power_ctrl: true, max_iters: 30, ..Default::default() };
        let a = run_jopr(&prob, &init, &cfg).unwrap();
        let b = run_distributed(&prob, &init, &cfg, &ChannelModel::default()).unwrap();
        assert_eq!(a, b);
    }
}
