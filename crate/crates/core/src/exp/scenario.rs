use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_jopr, IterationRecord, OptimizerConfig, Problem};
use crate::error::{Error, Result};
use crate::model::{NetworkState, Session};
use crate::protocol::{run_distributed, ChannelModel};

use super::generate::gains_from_positions;

/// Periodic change applied to the network between optimizer epochs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    /// Each node moves uniformly within a square of side `box_size` centred
    /// on its original position. Links stay; gains follow the new positions.
    TopologyJitter { period: usize, box_size: f64 },
    /// Each session's rate becomes its original rate times `U[0, max_factor]`.
    RateScaling { period: usize, max_factor: f64 },
}

impl Perturbation {
    pub fn period(&self) -> Option<usize> {
        match *self {
            Perturbation::None => None,
            Perturbation::TopologyJitter { period, .. } | Perturbation::RateScaling { period, .. } => Some(period),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period() == Some(0) {
            return Err(Error::Config("perturbation period must be at least 1".into()));
        }
        Ok(())
    }
}

/// Smallest rate a scaled session keeps, so it stays a valid session.
const MIN_RATE: f64 = 1e-6;

/// Positions moved uniformly within a `box_size` square around `origin`.
pub fn jitter_positions(origin: &[[f64; 2]], box_size: f64, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let h = box_size / 2.0;
    origin.iter().map(|p| [p[0] + rng.gen_range(-h..=h), p[1] + rng.gen_range(-h..=h)]).collect()
}

/// Sessions with each rate scaled by an independent factor from `U[0, max_factor]`.
pub fn scale_rates(origin: &[Session], max_factor: f64, rng: &mut impl Rng) -> Vec<Session> {
    origin
        .iter()
        .map(|s| s.with_rate((s.source_rate() * rng.gen_range(0.0..=max_factor)).max(MIN_RATE)))
        .collect()
}

/// Problems seen by every epoch of a perturbed run, drawn up front so every
/// arm of a seed faces the same sequence.
pub fn epoch_problems(
    base: &Problem,
    positions: &[[f64; 2]],
    gain_exponent: f64,
    perturbation: &Perturbation,
    total_iters: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Problem>> {
    perturbation.validate()?;
    let Some(period) = perturbation.period() else {
        return Ok(vec![base.clone()]);
    };
    let epochs = total_iters.div_ceil(period).max(1);
    let mut out = vec![base.clone()];
    for _ in 1..epochs {
        let mut p = base.clone();
        match *perturbation {
            Perturbation::TopologyJitter { box_size, .. } => {
                let moved = jitter_positions(positions, box_size, rng);
                p.topology = base.topology.with_gains(gains_from_positions(&moved, gain_exponent))?;
            }
            Perturbation::RateScaling { max_factor, .. } => {
                p.sessions = scale_rates(&base.sessions, max_factor, rng);
            }
            Perturbation::None => unreachable!(),
        }
        out.push(p);
    }
    Ok(out)
}

/// Runs `total_iters` sweeps, switching to the next problem every period.
///
/// Every epoch restarts the optimizer from the current state with that
/// epoch's cost as its budget. Epochs that converge early or start from an
/// infinite cost repeat their last record so every run has one record per
/// sweep.
pub fn run_epochs(
    epochs: &[Problem],
    period: usize,
    init: &NetworkState,
    cfg: &OptimizerConfig,
    channel: Option<&ChannelModel>,
    total_iters: usize,
) -> Result<Vec<IterationRecord>> {
    let mut state = init.clone();
    let mut records: Vec<IterationRecord> = Vec::with_capacity(total_iters + 1);
    let mut offset = 0;
    for (e, prob) in epochs.iter().enumerate() {
        let iters = period.min(total_iters - offset);
        if iters == 0 {
            break;
        }
        let mut epoch_cfg = cfg.clone();
        epoch_cfg.max_iters = iters;
        epoch_cfg.seed = cfg.seed.wrapping_add(e as u64);
        let traj = match channel {
            Some(ch) => {
                let ch = ChannelModel { seed: ch.seed.wrapping_add(e as u64), ..*ch };
                run_distributed(prob, &state, &epoch_cfg, &ch)
            }
            None => run_jopr(prob, &state, &epoch_cfg),
        };
        let mut recs = match traj {
            Ok(t) => {
                state = t.final_state;
                t.records
            }
            Err(Error::InitialInfeasible) => {
                let r = IterationRecord {
                    iteration: 0,
                    cost: f64::INFINITY,
                    residual: Default::default(),
                    admitted_rate: 0.0,
                    guard_halvings: 0,
                    guard_reverts: 0,
                    loop_violations: 0,
                };
                vec![r]
            }
            Err(err) => return Err(err),
        };
        // the first record of a later epoch is the state under the new problem
        if e > 0 && !records.is_empty() {
            let last = records.last().expect("non-empty").clone();
            for r in &mut recs {
                r.guard_halvings += last.guard_halvings;
                r.guard_reverts += last.guard_reverts;
                r.loop_violations += last.loop_violations;
            }
            records.pop();
        }
        while recs.len() < iters + 1 {
            let mut r = recs.last().expect("non-empty").clone();
            r.iteration += 1;
            recs.push(r);
        }
        for mut r in recs {
            r.iteration += offset;
            records.push(r);
        }
        offset += iters;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::diamond;
    use crate::model::{CapacityFn, LinkCostFn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jitter_stays_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let origin = vec![[0.0, 0.0], [0.3, -0.2]];
        for _ in 0..1000 {
            let moved = jitter_positions(&origin, 0.1, &mut rng);
            for (a, b) in moved.iter().zip(&origin) {
                assert!((a[0] - b[0]).abs() <= 0.05 && (a[1] - b[1]).abs() <= 0.05);
            }
        }
    }

    #[test]
    fn scaled_rates_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = vec![Session::inelastic(0, 1, 4.0)];
        for _ in 0..1000 {
            let r = scale_rates(&s, 2.0, &mut rng)[0].source_rate();
            assert!((MIN_RATE..=8.0).contains(&r));
        }
    }

    #[test]
    fn epochs_cover_every_sweep() {
        let (topology, sessions) = diamond();
        let base = Problem { topology, sessions, capacity: CapacityFn::high_sinr(1e5), cost: LinkCostFn::Mm1Delay };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pert = Perturbation::RateScaling { period: 10, max_factor: 2.0 };
        let probs = epoch_problems(&base, &[], 4.0, &pert, 35, &mut rng).unwrap();
        assert_eq!(probs.len(), 4);
        let init = NetworkState::uniform(&base.topology, &base.sessions);
        let recs = run_epochs(&probs, 10, &init, &OptimizerConfig::default(), None, 35).unwrap();
        assert_eq!(recs.len(), 36);
        for (k, r) in recs.iter().enumerate() {
            assert_eq!(r.iteration, k);
        }
        assert!(Perturbation::TopologyJitter { period: 0, box_size: 0.1 }.validate().is_err());
    }
}
