//! Single-node update rules. Each works on one node's coordinates and returns
//! the candidate values; the driver applies them under the descent guard.

use crate::error::{Error, Result};
use crate::model::{CapacityFn, ETA_FLOOR};

use super::projection::scaled_simplex_step;

/// Index of the cheapest unblocked coordinate (first on ties).
fn cheapest(prices: &[f64], blocked: &[bool]) -> Option<usize> {
    (0..prices.len()).filter(|&j| !blocked[j]).min_by(|&a, &b| prices[a].total_cmp(&prices[b]).then(a.cmp(&b)))
}

/// Gallager-style routing step over one node's coordinates.
///
/// Every unblocked coordinate priced above the minimum gives up
/// `min(x_j, α a_j / t)`; the freed mass goes to the cheapest coordinate.
/// Blocked coordinates are emptied into the same place.
pub fn brt_step(values: &[f64], prices: &[f64], blocked: &[bool], alpha: f64, throughput: f64) -> Result<Vec<f64>> {
    let mut x = values.to_vec();
    if throughput <= 0.0 {
        return Ok(x);
    }
    let best = cheapest(prices, blocked).ok_or(Error::EmptyFreeSet)?;
    let lambda = prices[best];
    let mut moved = 0.0;
    for j in 0..x.len() {
        if j == best {
            continue;
        }
        let d = if blocked[j] { x[j] } else { x[j].min(alpha * (prices[j] - lambda) / throughput) };
        if d > 0.0 {
            x[j] -= d;
            moved += d;
        }
    }
    x[best] += moved;
    Ok(x)
}

/// Scaled gradient projection routing step with diagonal scaling `m`.
pub fn grt_step(values: &[f64], prices: &[f64], m: &[f64], blocked: &[bool], throughput: f64) -> Result<Vec<f64>> {
    if throughput <= 0.0 {
        return Ok(values.to_vec());
    }
    let mass: f64 = values.iter().sum();
    let lower = vec![0.0; values.len()];
    scaled_simplex_step(values, prices, m, &lower, blocked, mass)
}

/// Diagonal scaling under which [`grt_step`] reproduces [`brt_step`]:
/// `(t/α)` everywhere except a zero at the cheapest unblocked coordinate.
pub fn brt_equivalent_scaling(prices: &[f64], blocked: &[bool], alpha: f64, throughput: f64) -> Vec<f64> {
    let best = cheapest(prices, blocked);
    (0..prices.len()).map(|j| if Some(j) == best { 0.0 } else { throughput / alpha }).collect()
}

/// Basic power allocation step. Allocations never drop below `lower`.
pub fn bpa_step(eta: &[f64], prices: &[f64], beta: f64, power: f64, lower: &[f64]) -> Vec<f64> {
    let mut x = eta.to_vec();
    if x.len() < 2 {
        return x;
    }
    let none = vec![false; x.len()];
    let best = cheapest(prices, &none).expect("non-empty");
    let mut moved = 0.0;
    for j in 0..x.len() {
        if j == best {
            continue;
        }
        let d = (x[j] - lower[j].max(ETA_FLOOR)).max(0.0).min(beta * (prices[j] - prices[best]) / power);
        if d > 0.0 {
            x[j] -= d;
            moved += d;
        }
    }
    x[best] += moved;
    x
}

/// General power allocation step with diagonal scaling `q`, keeping every
/// allocation at or above `lower`.
pub fn gpa_step(eta: &[f64], prices: &[f64], q: &[f64], lower: &[f64]) -> Result<Vec<f64>> {
    if eta.len() < 2 {
        return Ok(eta.to_vec());
    }
    let lower: Vec<f64> = lower.iter().zip(eta).map(|(l, e)| l.max(ETA_FLOOR).min(*e)).collect();
    scaled_simplex_step(eta, prices, q, &lower, &vec![false; eta.len()], 1.0)
}

/// Power control step `γ_i <- min(1, γ_i - δγ_i / v_i)` on the nodes in `update`.
pub fn pc_step(gamma: &[f64], delta_gamma: &[f64], v: &[f64], update: &[bool], capacity: &CapacityFn) -> Result<Vec<f64>> {
    if !capacity.is_high_sinr() {
        return Err(Error::CapacityModelMismatch);
    }
    Ok((0..gamma.len())
        .map(|i| if update[i] { (gamma[i] - delta_gamma[i] / v[i]).min(1.0) } else { gamma[i] })
        .collect())
}
