use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{BudgetPolicy, IterationRecord, OptimizerConfig, PowerAllocAlg, Problem, RoutingAlg, RoutingBound};
use crate::error::{Error, Result};
use crate::marginal::MsgScope;
use crate::model::{CapacityFn, LinkCostFn, NetworkState};
use crate::protocol::{ChannelModel, Staleness};

use super::aodv::aodv_route;
use super::generate::{generate_instance, random_interior_state, GenConfig, Instance};
use super::scenario::{epoch_problems, run_epochs, Perturbation};

/// Starting point of an arm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// Min-hop routing, full power, even allocation.
    #[default]
    Aodv,
    /// Random loop-free interior state, drawn from the instance seed.
    RandomInterior { gamma_min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub name: String,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub algorithm: OptimizerConfig,
    /// Distributed run through this channel; centralized when absent.
    #[serde(default)]
    pub channel: Option<ChannelModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub instance: GenConfig,
    /// Defaults to `ln(K x)` with the instance's `K`.
    pub capacity: Option<CapacityFn>,
    pub cost: LinkCostFn,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub perturbation: Perturbation,
    /// Extra instance draws per seed when an arm would start at infinite cost.
    pub feasible_retries: usize,
    pub arms: Vec<ArmConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "static".into(),
            instance: GenConfig::default(),
            capacity: None,
            cost: LinkCostFn::default(),
            seeds: (0..20).collect(),
            iterations: 200,
            perturbation: Perturbation::None,
            feasible_retries: 50,
            arms: Vec::new(),
        }
    }
}

/// Offset between successive instance draws for one seed.
const RETRY_STRIDE: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    /// One record per sweep, entry 0 at the initial state.
    pub records: Vec<IterationRecord>,
    pub final_cost: f64,
    pub converged_at: Option<usize>,
    pub guard_reverts: usize,
    pub loop_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Seed of the instance actually used after feasibility retries.
    pub instance_seed: u64,
    pub arms: Vec<ArmResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub arm_names: Vec<String>,
    pub seeds: Vec<SeedResult>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::Config("experiment has no arms".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration budget must be at least 1".into()));
        }
        self.perturbation.validate()?;
        for arm in &self.arms {
            arm.algorithm.validate()?;
            if let Some(ch) = &arm.channel {
                ch.validate()?;
            }
        }
        Ok(())
    }

    pub fn capacity_fn(&self) -> CapacityFn {
        self.capacity.unwrap_or(CapacityFn::high_sinr(self.instance.k))
    }

    fn problem(&self, inst: &Instance) -> Problem {
        Problem {
            topology: inst.topology.clone(),
            sessions: inst.sessions.clone(),
            capacity: self.capacity_fn(),
            cost: self.cost,
        }
    }

    fn initial_state(&self, prob: &Problem, init: InitKind, instance_seed: u64) -> Result<NetworkState> {
        match init {
            InitKind::Aodv => aodv_route(&prob.topology, &prob.sessions),
            InitKind::RandomInterior { gamma_min } => {
                let mut rng = ChaCha8Rng::seed_from_u64(instance_seed ^ 0x5eed);
                Ok(random_interior_state(&prob.topology, &prob.sessions, gamma_min, &mut rng))
            }
        }
    }

    /// Instance for `seed` on which every arm starts at finite cost.
    pub fn feasible_instance(&self, seed: u64) -> Result<(u64, Instance)> {
        for attempt in 0..=self.feasible_retries as u64 {
            let instance_seed = seed.wrapping_add(attempt.wrapping_mul(RETRY_STRIDE));
            let inst = generate_instance(&GenConfig { seed: instance_seed, ..self.instance.clone() })?;
            let prob = self.problem(&inst);
            let mut ok = true;
            for arm in &self.arms {
                let st = self.initial_state(&prob, arm.init, instance_seed)?;
                if !prob.cost_of(&st)?.is_finite() {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok((instance_seed, inst));
            }
        }
        Err(Error::InitialInfeasible)
    }

    pub fn run_seed(&self, seed: u64) -> Result<SeedResult> {
        let (instance_seed, inst) = self.feasible_instance(seed)?;
        let base = self.problem(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed ^ 0xd1ce);
        let epochs = epoch_problems(
            &base,
            &inst.positions,
            self.instance.gain_exponent,
            &self.perturbation,
            self.iterations,
            &mut rng,
        )?;
        let period = self.perturbation.period().unwrap_or(self.iterations);
        let mut arms = Vec::with_capacity(self.arms.len());
        for arm in &self.arms {
            let init = self.initial_state(&base, arm.init, instance_seed)?;
            let cfg = OptimizerConfig { seed: arm.algorithm.seed ^ instance_seed, ..arm.algorithm.clone() };
            let channel = arm.channel.map(|c| ChannelModel { seed: c.seed ^ instance_seed, ..c });
            let records = run_epochs(&epochs, period, &init, &cfg, channel.as_ref(), self.iterations)?;
            let last = records.last().expect("at least the initial record");
            arms.push(ArmResult {
                name: arm.name.clone(),
                final_cost: last.cost,
                converged_at: records.iter().position(|r| r.iteration > 0 && r.residual.max() <= cfg.tol),
                guard_reverts: last.guard_reverts,
                loop_violations: last.loop_violations,
                records,
            });
        }
        Ok(SeedResult { seed, instance_seed, arms })
    }
}

/// Runs every seed in parallel; results are in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let results: Vec<Result<SeedResult>> = seeds.par_iter().map(|&s| cfg.run_seed(s)).collect();
    let seeds = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        arm_names: cfg.arms.iter().map(|a| a.name.clone()).collect(),
        seeds,
    })
}

/// Capacity floor used by the preset arms that move power.
pub const PRESET_CAPACITY_FLOOR: f64 = 1.0;

/// Upper end of the preset session rate distribution.
pub const PRESET_RATE_MAX: f64 = 1.0;

fn arm(name: &str, routing: RoutingAlg, power: bool) -> ArmConfig {
    ArmConfig {
        name: name.into(),
        init: InitKind::Aodv,
        algorithm: OptimizerConfig {
            routing,
            power_alloc: if power { PowerAllocAlg::Bpa } else { PowerAllocAlg::Off },
            power_ctrl: power,
            capacity_floor: Some(PRESET_CAPACITY_FLOOR),
            // both tighten the step bounds without giving up descent; with the
            // defaults the joint arms are still far from converged after 2000 sweeps
            budget: BudgetPolicy::Current,
            routing_bound: RoutingBound::Downstream,
            tol: 1e-6,
            ..OptimizerConfig::default()
        },
        channel: None,
    }
}

fn routing_arms() -> Vec<ArmConfig> {
    vec![
        arm("aodv", RoutingAlg::Off, false),
        arm("brt", RoutingAlg::Brt, false),
        arm("aodv_bpa_pc", RoutingAlg::Off, true),
        arm("brt_bpa_pc", RoutingAlg::Brt, true),
    ]
}

pub const PRESET_NAMES: [&str; 5] = ["static", "topology", "demand", "scope", "noise"];

/// Configurations of the five standard experiments.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    // the full [0, 10] demand range overloads min-hop routes on nearly every draw
    let instance = GenConfig { rate_max: PRESET_RATE_MAX, ..GenConfig::default() };
    let base = ExperimentConfig { name: name.into(), instance, ..ExperimentConfig::default() };
    let cfg = match name {
        "static" => ExperimentConfig { arms: routing_arms(), ..base },
        "topology" => ExperimentConfig {
            arms: routing_arms(),
            perturbation: Perturbation::TopologyJitter { period: 10, box_size: 0.1 },
            ..base
        },
        "demand" => ExperimentConfig {
            arms: routing_arms(),
            perturbation: Perturbation::RateScaling { period: 10, max_factor: 2.0 },
            ..base
        },
        "scope" => {
            let mut arms = vec![pc_arm("pc_all", MsgScope::All)];
            for k in 1..=8 {
                arms.push(pc_arm(&format!("pc_k{k}"), MsgScope::KNearest(k)));
            }
            ExperimentConfig { arms, ..base }
        }
        "noise" => {
            let clean = arm("clean", RoutingAlg::Brt, true);
            let mut noisy = arm("noisy", RoutingAlg::Brt, true);
            noisy.channel = Some(ChannelModel { noise_scale: 0.9, staleness: Staleness::Cached, ..Default::default() });
            ExperimentConfig { arms: vec![clean, noisy], ..base }
        }
        other => return Err(Error::Config(format!("unknown experiment {other:?}"))),
    };
    Ok(cfg)
}

fn pc_arm(name: &str, scope: MsgScope) -> ArmConfig {
    let mut a = arm(name, RoutingAlg::Off, false);
    a.algorithm.power_ctrl = true;
    a.algorithm.msg_scope = scope;
    a
}
