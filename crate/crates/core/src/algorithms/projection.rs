use crate::error::{Error, Result};

/// `argmin Σ m_j (x_j - y_j)²` over `{x >= 0, Σ x = mass, x_j = 0 for fixed j}`.
///
/// The solution is `x_j = max(0, y_j - θ/m_j)`. The multiplier is found by
/// walking the sorted breakpoints `θ_j = m_j y_j` and solving the final
/// linear piece exactly.
pub fn weighted_simplex_project(y: &[f64], m: &[f64], fixed_zero: &[bool], mass: f64) -> Result<Vec<f64>> {
    let free: Vec<usize> = (0..y.len()).filter(|&j| !fixed_zero.get(j).copied().unwrap_or(false)).collect();
    if free.is_empty() {
        return Err(Error::EmptyFreeSet);
    }
    if free.iter().any(|&j| !(m[j] > 0.0)) {
        return Err(Error::Config("projection weights must be positive".into()));
    }
    let theta = multiplier(&free, y, m, mass);
    let mut x = vec![0.0; y.len()];
    for &j in &free {
        x[j] = (y[j] - theta / m[j]).max(0.0);
    }
    Ok(x)
}

/// Multiplier `θ` with `Σ_free max(0, y_j - θ/m_j) = mass`.
fn multiplier(free: &[usize], y: &[f64], m: &[f64], mass: f64) -> f64 {
    let mut order: Vec<usize> = free.to_vec();
    order.sort_by(|&a, &b| (m[b] * y[b]).total_cmp(&(m[a] * y[a])));
    // coordinates enter the active set as θ decreases past their breakpoint
    let (mut sy, mut sw) = (0.0, 0.0);
    let mut theta = 0.0;
    for (k, &j) in order.iter().enumerate() {
        sy += y[j];
        sw += 1.0 / m[j];
        theta = (sy - mass) / sw;
        let next = order.get(k + 1).map(|&n| m[n] * y[n]);
        if next.is_none_or(|b| theta >= b) {
            break;
        }
    }
    theta
}

/// Scaled projection step: `argmin g'(x - x0) + ½ (x - x0)' diag(m) (x - x0)`
/// over the simplex of the given mass, with `x_j >= lower_j` and fixed
/// coordinates held at zero.
///
/// Zero weights are allowed. Such a coordinate carries no proximal term, so
/// at the optimum the multiplier cannot exceed its price; the mass left over
/// by the weighted coordinates goes to the first zero-weight coordinate with
/// the smallest price.
pub fn scaled_simplex_step(
    x0: &[f64],
    g: &[f64],
    m: &[f64],
    lower: &[f64],
    fixed_zero: &[bool],
    mass: f64,
) -> Result<Vec<f64>> {
    let n = x0.len();
    let free: Vec<usize> = (0..n).filter(|&j| !fixed_zero[j]).collect();
    if free.is_empty() {
        return Err(Error::EmptyFreeSet);
    }
    let spare = mass - free.iter().map(|&j| lower[j]).sum::<f64>();
    // shift to x - lower >= 0 with mass `spare`
    let y: Vec<f64> = (0..n).map(|j| if m[j] > 0.0 { x0[j] - lower[j] - g[j] / m[j] } else { 0.0 }).collect();
    let weighted: Vec<usize> = free.iter().copied().filter(|&j| m[j] > 0.0).collect();
    let sink = free
        .iter()
        .copied()
        .filter(|&j| !(m[j] > 0.0))
        .min_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
    let mut x = vec![0.0; n];
    for &j in &free {
        x[j] = lower[j];
    }
    let place = |theta: f64, x: &mut Vec<f64>| {
        let mut used = 0.0;
        for &j in &weighted {
            let v = (y[j] - theta / m[j]).max(0.0);
            x[j] = lower[j] + v;
            used += v;
        }
        used
    };
    match sink {
        Some(s) => {
            // stationarity at the sink pins θ = -g_s unless the weighted
            // coordinates alone already overfill
            let used_at_cap: f64 = weighted.iter().map(|&j| (y[j] + g[s] / m[j]).max(0.0)).sum();
            if used_at_cap <= spare {
                let used = place(-g[s], &mut x);
                x[s] = lower[s] + (spare - used);
            } else {
                let theta = multiplier(&weighted, &y, m, spare);
                place(theta, &mut x);
            }
        }
        None => {
            let theta = multiplier(&weighted, &y, m, spare);
            place(theta, &mut x);
        }
    }
    Ok(x)
}
