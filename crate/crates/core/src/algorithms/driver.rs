use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::{marginal_report, MarginalOptions, MarginalReport, MsgScope};
use crate::model::{
    compute_flows, compute_radio, total_cost, CapacityFn, FlowState, LinkCostFn, NetworkState, RadioState, Session,
    Topology,
};
use crate::scaling::{downstream_curvature, link_flow_curvature, pa_scaling, pc_scaling, refined_pa_scaling, routing_scaling};

use super::blocked::{blocked_links_at, blocked_sets};
use super::residual::{optimality_residuals, OptimalityResidual, ResidualBounds};
use super::steps::{bpa_step, brt_step, gpa_step, grt_step, pc_step};

/// A network, its traffic and the capacity and cost models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub topology: Topology,
    pub sessions: Vec<Session>,
    pub capacity: CapacityFn,
    pub cost: LinkCostFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingAlg {
    Off,
    #[default]
    Brt,
    Grt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerAllocAlg {
    #[default]
    Off,
    Bpa,
    Gpa,
}

/// Which cost bounds the sublevel sets behind the step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetPolicy {
    /// The cost of the initial state, fixed for the whole run.
    #[default]
    Initial,
    /// The cost just before each update. Descent makes every iterate a valid
    /// starting point, so the same bounds apply with the smaller budget.
    Current,
}

/// Curvature used for the downstream term of the routing bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingBound {
    /// Largest link curvature in the network.
    #[default]
    NetworkMax,
    /// Largest curvature on the active paths below each neighbor.
    Downstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    #[default]
    RoundRobin,
    /// A fresh random permutation every sweep.
    RandomPermutation,
}

/// Which nodes iterate in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    All,
    /// Each node independently iterates with probability `prob`.
    RandomSubset { prob: f64 },
}

/// What to do when halving never produces an acceptable step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardExhaustion {
    #[default]
    Fail,
    /// Keep the previous point and count a violation.
    Revert,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentGuard {
    pub max_halvings: usize,
    /// Allowed relative cost increase, for rounding. A negative value demands
    /// a relative decrease instead.
    pub slack: f64,
    pub on_exhaustion: GuardExhaustion,
}

impl Default for DescentGuard {
    fn default() -> Self {
        DescentGuard { max_halvings: 40, slack: 1e-12, on_exhaustion: GuardExhaustion::Fail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub routing: RoutingAlg,
    pub power_alloc: PowerAllocAlg,
    /// Precise-capacity power allocation prices and scaling.
    pub refined_power_alloc: bool,
    pub power_ctrl: bool,
    pub congestion: bool,
    pub max_iters: usize,
    pub tol: f64,
    pub order: NodeOrder,
    pub schedule: Schedule,
    pub seed: u64,
    pub budget: BudgetPolicy,
    pub routing_bound: RoutingBound,
    /// Capacities no update may push a link below. Needed for bounded
    /// curvature of the packet-count cost on idle links. A floor above half
    /// the smallest initial capacity is lowered to that value.
    pub capacity_floor: Option<f64>,
    pub msg_scope: MsgScope,
    pub guard: DescentGuard,
    pub record_states: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            routing: RoutingAlg::Brt,
            power_alloc: PowerAllocAlg::Off,
            refined_power_alloc: false,
            power_ctrl: false,
            congestion: false,
            max_iters: 500,
            tol: 1e-4,
            order: NodeOrder::RoundRobin,
            schedule: Schedule::All,
            seed: 0,
            budget: BudgetPolicy::Initial,
            routing_bound: RoutingBound::NetworkMax,
            capacity_floor: None,
            msg_scope: MsgScope::All,
            guard: DescentGuard::default(),
            record_states: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("iteration budget must be at least 1".into()));
        }
        if let Schedule::RandomSubset { prob } = self.schedule {
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(Error::Config("subset probability must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub residual: OptimalityResidual,
    pub admitted_rate: f64,
    pub guard_halvings: usize,
    pub guard_reverts: usize,
    pub loop_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Entry 0 is the initial state; entry k follows sweep k.
    pub records: Vec<IterationRecord>,
    pub final_state: NetworkState,
    /// Per-sweep states when requested (entry 0 is the initial state).
    pub states: Vec<NetworkState>,
    pub converged_at: Option<usize>,
    pub initial_budget: f64,
}

impl Trajectory {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.cost)
    }

    pub fn final_residual(&self) -> OptimalityResidual {
        self.records.last().map(|r| r.residual).unwrap_or_default()
    }

    /// True when no sweep raised the cost by more than `slack` relative.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records.windows(2).all(|p| p[1].cost <= p[0].cost + slack * p[0].cost.abs().max(1.0))
    }
}

/// Derived quantities at one state.
#[derive(Debug, Clone)]
pub(crate) struct Snapshot {
    pub radio: RadioState,
    pub flow: FlowState,
    pub marg: MarginalReport,
    pub cost: f64,
}

impl Problem {
    pub fn marginal_options(&self, cfg: &OptimizerConfig) -> MarginalOptions {
        MarginalOptions { refined: cfg.refined_power_alloc, scope: cfg.msg_scope }
    }

    pub(crate) fn snapshot(&self, state: &NetworkState, opts: MarginalOptions) -> Result<Snapshot> {
        let radio = compute_radio(&self.topology, &self.capacity, state);
        let flow = compute_flows(&self.topology, &self.sessions, state)?;
        let cost = total_cost(&flow, &radio, &self.cost, &self.sessions).as_f64();
        let marg =
            marginal_report(&self.topology, &self.sessions, state, &flow, &radio, &self.cost, &self.capacity, opts)?;
        Ok(Snapshot { radio, flow, marg, cost })
    }

    pub fn cost_of(&self, state: &NetworkState) -> Result<f64> {
        let radio = compute_radio(&self.topology, &self.capacity, state);
        let flow = compute_flows(&self.topology, &self.sessions, state)?;
        Ok(total_cost(&flow, &radio, &self.cost, &self.sessions).as_f64())
    }

    /// Residuals with exact prices and the exact blocked sets.
    pub fn residuals(
        &self,
        state: &NetworkState,
        marg: &MarginalReport,
        flow: &FlowState,
        radio: &RadioState,
        capacity_floor: Option<f64>,
    ) -> OptimalityResidual {
        let sets = blocked_sets(&self.topology, &self.sessions, &state.phi, &marg.node_potential);
        let bounds = ResidualBounds::with_floor(&self.topology, radio, &self.capacity, capacity_floor);
        optimality_residuals(&self.topology, &self.sessions, state, flow, marg, &sets.blocked, &radio.node_power, &bounds)
    }
}

/// Source of the cross-node prices an update consumes. The centralized
/// driver reads exact values; the protocol simulation routes them through a
/// message ledger and a noisy channel.
pub(crate) trait PriceOracle {
    /// Node potentials of session `w` as node `node` sees them.
    fn potentials(&mut self, node: usize, w: usize, prob: &Problem, state: &NetworkState, cur: &Snapshot) -> Vec<f64>;
    /// Called after node `node` has run its routing update for session `w`.
    fn routed(&mut self, node: usize, w: usize, iteration: usize, cur: &Snapshot);
    /// Marginal power control cost as node `node` computes it.
    fn delta_gamma(&mut self, node: usize, prob: &Problem, state: &NetworkState, cur: &Snapshot) -> Result<f64>;
    /// Called after the power control phase read its inputs.
    fn power_controlled(&mut self, updated: &[bool], iteration: usize, cur: &Snapshot);
}

pub(crate) struct ExactPrices;

impl PriceOracle for ExactPrices {
    fn potentials(&mut self, _: usize, w: usize, _: &Problem, _: &NetworkState, cur: &Snapshot) -> Vec<f64> {
        cur.marg.node_potential[w].clone()
    }

    fn routed(&mut self, _: usize, _: usize, _: usize, _: &Snapshot) {}

    fn delta_gamma(&mut self, node: usize, _: &Problem, _: &NetworkState, cur: &Snapshot) -> Result<f64> {
        Ok(cur.marg.delta_gamma[node])
    }

    fn power_controlled(&mut self, _: &[bool], _: usize, _: &Snapshot) {}
}

/// Runs routing, power allocation and power control sweeps from `init`.
///
/// One sweep lets every scheduled node update its routing for each session,
/// then its power allocation, then all scheduled nodes update power control
/// together. Every update passes through the descent guard.
pub fn run_jopr(prob: &Problem, init: &NetworkState, cfg: &OptimizerConfig) -> Result<Trajectory> {
    optimize(prob, init, cfg, &mut ExactPrices)
}

struct Counters {
    halvings: usize,
    reverts: usize,
    loops: usize,
}

struct Runner<'a> {
    prob: &'a Problem,
    cfg: &'a OptimizerConfig,
    opts: MarginalOptions,
    state: NetworkState,
    cur: Snapshot,
    d0: f64,
    floor: Option<f64>,
    iteration: usize,
    counters: Counters,
}

impl<'a> Runner<'a> {
    fn budget(&self) -> f64 {
        match self.cfg.budget {
            BudgetPolicy::Initial => self.d0,
            BudgetPolicy::Current => self.cur.cost,
        }
    }

    /// Accepts `make(1)` or the first halved step `make(2^-k)` that does not
    /// raise the cost. Returns false when the block was left unchanged.
    fn guarded(&mut self, block: &'static str, make: impl Fn(f64) -> NetworkState) -> Result<bool> {
        let prev = self.cur.cost;
        let limit = prev + self.cfg.guard.slack * prev.abs().max(1.0);
        let mut s = 1.0;
        for k in 0..=self.cfg.guard.max_halvings {
            let cand = make(s);
            if cand == self.state {
                return Ok(false);
            }
            match self.admissible(&cand, limit) {
                Ok(Some(snap)) => {
                    self.counters.halvings += k;
                    self.state = cand;
                    self.cur = snap;
                    return Ok(true);
                }
                Ok(None) => {}
                Err(Error::RoutingCycle { .. }) => self.counters.loops += 1,
                Err(e) => return Err(e),
            }
            s *= 0.5;
        }
        self.counters.halvings += self.cfg.guard.max_halvings;
        match self.cfg.guard.on_exhaustion {
            GuardExhaustion::Fail => Err(Error::DescentGuardExhausted { iteration: self.iteration, block }),
            GuardExhaustion::Revert => {
                self.counters.reverts += 1;
                Ok(false)
            }
        }
    }

    fn admissible(&self, cand: &NetworkState, limit: f64) -> Result<Option<Snapshot>> {
        let radio = compute_radio(&self.prob.topology, &self.prob.capacity, cand);
        if let Some(floor) = self.floor {
            let breach = radio
                .capacity
                .iter()
                .zip(&self.cur.radio.capacity)
                .any(|(&c, &old)| c < floor && c < old);
            if breach {
                return Ok(None);
            }
        }
        let flow = compute_flows(&self.prob.topology, &self.prob.sessions, cand)?;
        let cost = total_cost(&flow, &radio, &self.prob.cost, &self.prob.sessions).as_f64();
        if !(cost <= limit) {
            return Ok(None);
        }
        let marg = marginal_report(
            &self.prob.topology,
            &self.prob.sessions,
            cand,
            &flow,
            &radio,
            &self.prob.cost,
            &self.prob.capacity,
            self.opts,
        )?;
        Ok(Some(Snapshot { radio, flow, marg, cost }))
    }

    fn routing_update(&mut self, oracle: &mut dyn PriceOracle, i: usize, w: usize) -> Result<()> {
        let prob = self.prob;
        let topo = &prob.topology;
        let s = &prob.sessions[w];
        let t = self.cur.flow.node_rate[w][i];
        if i == s.destination || t <= 0.0 {
            return Ok(());
        }
        let seen = oracle.potentials(i, w, prob, &self.state, &self.cur);
        let out = topo.out_links(i).to_vec();
        let blocked_ids = blocked_links_at(topo, s, &self.state.phi[w], &seen, i);
        let overflow = self.cfg.congestion && i == s.origin && s.is_elastic();
        let mut values: Vec<f64> = out.iter().map(|&id| self.state.phi[w][id]).collect();
        let mut prices: Vec<f64> = out.iter().map(|&id| self.cur.marg.d_flow[id] + seen[topo.link(id).to]).collect();
        let mut blocked: Vec<bool> = out.iter().map(|id| blocked_ids.contains(id)).collect();
        if overflow {
            values.push(self.state.phi_overflow[w]);
            prices.push(self.cur.marg.delta_phi_overflow[w]);
            blocked.push(false);
        }
        let allowed: Vec<usize> = out.iter().copied().filter(|id| !blocked_ids.contains(id)).collect();
        let budget = self.budget();
        let curvature = link_flow_curvature(&prob.cost, &self.cur.radio, budget)?;
        let overflow_curv = if overflow {
            Some(s.utility().expect("elastic").max_loss_curvature(s.source_rate(), budget))
        } else {
            None
        };
        let downstream = match self.cfg.routing_bound {
            RoutingBound::NetworkMax => None,
            RoutingBound::Downstream => {
                Some(downstream_curvature(topo, &self.state.phi[w], &self.cur.flow.order[w], s.destination, &curvature))
            }
        };
        let hops = &self.cur.marg.hop_count[w];
        let sc = routing_scaling(topo, &allowed, &curvature, hops, downstream.as_deref(), t, overflow_curv, i, w)?;
        let next = match self.cfg.routing {
            RoutingAlg::Off => return Ok(()),
            RoutingAlg::Brt => brt_step(&values, &prices, &blocked, sc.alpha, t)?,
            RoutingAlg::Grt => {
                let mut m = Vec::with_capacity(values.len());
                let mut k = 0;
                for b in blocked.iter().take(out.len()) {
                    if *b {
                        m.push(1.0);
                    } else {
                        m.push(sc.diag[k]);
                        k += 1;
                    }
                }
                if overflow {
                    m.push(sc.overflow_diag.expect("overflow scaling"));
                }
                grt_step(&values, &prices, &m, &blocked, t)?
            }
        };
        let base = self.state.clone();
        self.guarded("routing", |a| {
            let mut st = base.clone();
            for (k, &id) in out.iter().enumerate() {
                st.phi[w][id] = values[k] + a * (next[k] - values[k]);
            }
            if overflow {
                let k = out.len();
                st.phi_overflow[w] = values[k] + a * (next[k] - values[k]);
            }
            st
        })?;
        Ok(())
    }

    fn power_alloc_update(&mut self, i: usize) -> Result<()> {
        let prob = self.prob;
        let topo = &prob.topology;
        let out = topo.out_links(i).to_vec();
        if out.len() < 2 {
            return Ok(());
        }
        let sc = if self.cfg.refined_power_alloc {
            refined_pa_scaling(
                topo,
                &self.state,
                &self.cur.flow,
                &self.cur.radio,
                &prob.cost,
                prob.capacity.gain_factor(),
                i,
                self.floor,
            )?
        } else {
            pa_scaling(topo, &self.state, &self.cur.flow, &self.cur.radio, &prob.cost, &prob.capacity, i, self.floor)?
        };
        let eta: Vec<f64> = out.iter().map(|&id| self.state.eta[id]).collect();
        let prices: Vec<f64> = out.iter().map(|&id| self.cur.marg.delta_eta[id]).collect();
        let next = match self.cfg.power_alloc {
            PowerAllocAlg::Off => return Ok(()),
            PowerAllocAlg::Bpa => bpa_step(&eta, &prices, sc.beta, self.cur.radio.node_power[i], &sc.eta_low),
            PowerAllocAlg::Gpa => gpa_step(&eta, &prices, &sc.diag, &sc.eta_low)?,
        };
        let base = self.state.clone();
        self.guarded("power allocation", |a| {
            let mut st = base.clone();
            for (k, &id) in out.iter().enumerate() {
                st.eta[id] = eta[k] + a * (next[k] - eta[k]);
            }
            st
        })?;
        Ok(())
    }

    fn power_ctrl_update(&mut self, oracle: &mut dyn PriceOracle, active: &[bool], v_fixed: &Option<Vec<f64>>) -> Result<()> {
        let prob = self.prob;
        let n = prob.topology.num_nodes();
        let mut dg = vec![0.0; n];
        for i in 0..n {
            if active[i] {
                dg[i] = oracle.delta_gamma(i, prob, &self.state, &self.cur)?;
            }
        }
        oracle.power_controlled(active, self.iteration, &self.cur);
        let v = match v_fixed {
            Some(v) => v.clone(),
            None => pc_scaling(&prob.topology, &prob.cost, &prob.capacity, self.cur.cost, self.floor)?,
        };
        let next = pc_step(&self.state.gamma, &dg, &v, active, &prob.capacity)?;
        let base = self.state.clone();
        let gamma = base.gamma.clone();
        self.guarded("power control", |a| {
            let mut st = base.clone();
            for i in 0..n {
                st.gamma[i] = gamma[i] + a * (next[i] - gamma[i]);
            }
            st
        })?;
        Ok(())
    }

    fn record(&self, residual: OptimalityResidual) -> IterationRecord {
        IterationRecord {
            iteration: self.iteration,
            cost: self.cur.cost,
            residual,
            admitted_rate: self.cur.flow.admitted_rate.iter().sum(),
            guard_halvings: self.counters.halvings,
            guard_reverts: self.counters.reverts,
            loop_violations: self.counters.loops,
        }
    }

    fn residual(&self) -> OptimalityResidual {
        let mut r = self.prob.residuals(&self.state, &self.cur.marg, &self.cur.flow, &self.cur.radio, self.floor);
        if self.cfg.routing == RoutingAlg::Off {
            r.routing = 0.0;
        }
        if self.cfg.power_alloc == PowerAllocAlg::Off {
            r.power_alloc = 0.0;
        }
        if !self.cfg.power_ctrl {
            r.power_ctrl = 0.0;
        }
        if !self.cfg.congestion {
            r.congestion = 0.0;
        }
        r
    }
}

pub(crate) fn optimize(
    prob: &Problem,
    init: &NetworkState,
    cfg: &OptimizerConfig,
    oracle: &mut dyn PriceOracle,
) -> Result<Trajectory> {
    cfg.validate()?;
    let opts = prob.marginal_options(cfg);
    let cur = prob.snapshot(init, opts)?;
    if !cur.cost.is_finite() {
        return Err(Error::InitialInfeasible);
    }
    let n = prob.topology.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let floor = cfg.capacity_floor.map(|f| f.min(0.5 * cur.radio.capacity.iter().copied().fold(f64::INFINITY, f64::min)));
    let mut run = Runner {
        prob,
        cfg,
        opts,
        state: init.clone(),
        d0: cur.cost,
        floor,
        cur,
        iteration: 0,
        counters: Counters { halvings: 0, reverts: 0, loops: 0 },
    };
    let v_fixed = match (cfg.power_ctrl, cfg.budget) {
        (true, BudgetPolicy::Initial) => {
            Some(pc_scaling(&prob.topology, &prob.cost, &prob.capacity, run.d0, run.floor)?)
        }
        _ => None,
    };
    if cfg.power_ctrl && !prob.capacity.is_high_sinr() {
        return Err(Error::CapacityModelMismatch);
    }
    let mut records = vec![run.record(run.residual())];
    let mut states = if cfg.record_states { vec![init.clone()] } else { Vec::new() };
    let mut converged_at = None;
    for it in 1..=cfg.max_iters {
        run.iteration = it;
        let mut order: Vec<usize> = (0..n).collect();
        if cfg.order == NodeOrder::RandomPermutation {
            order.shuffle(&mut rng);
        }
        let active: Vec<bool> = match cfg.schedule {
            Schedule::All => vec![true; n],
            Schedule::RandomSubset { prob: p } => (0..n).map(|_| rng.gen::<f64>() < p).collect(),
        };
        if cfg.routing != RoutingAlg::Off {
            for &i in &order {
                if active[i] {
                    for w in 0..prob.sessions.len() {
                        run.routing_update(oracle, i, w)?;
                        oracle.routed(i, w, it, &run.cur);
                    }
                }
            }
        }
        if cfg.power_alloc != PowerAllocAlg::Off {
            for &i in &order {
                if active[i] {
                    run.power_alloc_update(i)?;
                }
            }
        }
        if cfg.power_ctrl {
            run.power_ctrl_update(oracle, &active, &v_fixed)?;
        }
        let residual = run.residual();
        records.push(run.record(residual));
        if cfg.record_states {
            states.push(run.state.clone());
        }
        if residual.max() <= cfg.tol {
            converged_at = Some(it);
            break;
        }
    }
    Ok(Trajectory { records, final_state: run.state, states, converged_at, initial_budget: run.d0 })
}

/// Lemma-style interference-limited test `K G_ij P_ij <= (K - 2) IN_ij` per link.
pub fn interference_limited_check(topo: &Topology, radio: &RadioState, k: f64) -> Vec<bool> {
    topo.links()
        .iter()
        .enumerate()
        .map(|(id, l)| k * topo.gain(l.from, l.to) * radio.link_power[id] <= (k - 2.0) * radio.interference[id])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoStageConfig {
    pub cycles: usize,
    pub stage1_iters: usize,
    /// Zero disables the power control stage.
    pub stage2_iters: usize,
    pub base: OptimizerConfig,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        TwoStageConfig {
            cycles: 3,
            stage1_iters: 100,
            stage2_iters: 100,
            base: OptimizerConfig { power_alloc: PowerAllocAlg::Bpa, ..OptimizerConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageRecord {
    pub cycle: usize,
    pub stage: u8,
    pub iteration: usize,
    pub precise_cost: f64,
    pub approx_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutcome {
    pub records: Vec<TwoStageRecord>,
    pub final_state: NetworkState,
    /// Links failing the interference-limited test on entry to each routing/allocation stage.
    pub interference_warnings: Vec<Vec<usize>>,
}

/// Alternates routing plus refined power allocation under `ln(1 + K x)` at
/// fixed node powers with power control under `ln(K x)` at fixed routing
/// and allocation. Each stage is descent in its own capacity model.
pub fn run_two_stage_jopar(prob: &Problem, init: &NetworkState, cfg: &TwoStageConfig) -> Result<TwoStageOutcome> {
    let k = prob.capacity.gain_factor();
    let precise = Problem { capacity: CapacityFn::PreciseLog { k }, ..prob.clone() };
    let approx = Problem { capacity: CapacityFn::high_sinr(k), ..prob.clone() };
    let stage1 = OptimizerConfig {
        refined_power_alloc: true,
        power_ctrl: false,
        max_iters: cfg.stage1_iters.max(1),
        ..cfg.base.clone()
    };
    let stage2 = OptimizerConfig {
        routing: RoutingAlg::Off,
        power_alloc: PowerAllocAlg::Off,
        refined_power_alloc: false,
        power_ctrl: true,
        congestion: false,
        max_iters: cfg.stage2_iters.max(1),
        ..cfg.base.clone()
    };
    let mut state = init.clone();
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let both = |st: &NetworkState| -> Result<(f64, f64)> { Ok((precise.cost_of(st)?, approx.cost_of(st)?)) };
    for cycle in 0..cfg.cycles {
        let radio = compute_radio(&precise.topology, &precise.capacity, &state);
        let bad: Vec<usize> = interference_limited_check(&precise.topology, &radio, k)
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(id, _)| id)
            .collect();
        warnings.push(bad);
        let traj = optimize(&precise, &state, &stage1, &mut ExactPrices)?;
        // stage endpoints only, so both costs are reported without storing the run
        for (it, st) in [(0, &state), (traj.records.len() - 1, &traj.final_state)] {
            let (p, a) = both(st)?;
            records.push(TwoStageRecord { cycle, stage: 1, iteration: it, precise_cost: p, approx_cost: a });
        }
        state = traj.final_state;
        if cfg.stage2_iters > 0 {
            let traj = optimize(&approx, &state, &stage2, &mut ExactPrices)?;
            for (it, st) in [(0, &state), (traj.records.len() - 1, &traj.final_state)] {
                let (p, a) = both(st)?;
                records.push(TwoStageRecord { cycle, stage: 2, iteration: it, precise_cost: p, approx_cost: a });
            }
            state = traj.final_state;
        }
    }
    Ok(TwoStageOutcome { records, final_state: state, interference_warnings: warnings })
}
