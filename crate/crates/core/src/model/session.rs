use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concave utility of an elastic session's admitted rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFn {
    /// `U(r) = weight * ln(offset + r)`.
    Log { weight: f64, offset: f64 },
    /// `U(r) = weight * (r - r^2 / (2 * saturation))`, increasing up to `saturation`.
    QuadCap { weight: f64, saturation: f64 },
}

impl UtilityFn {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            UtilityFn::Log { weight, offset } => weight * (offset + r).ln(),
            UtilityFn::QuadCap { weight, saturation } => weight * (r - r * r / (2.0 * saturation)),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match *self {
            UtilityFn::Log { weight, offset } => weight / (offset + r),
            UtilityFn::QuadCap { weight, saturation } => weight * (1.0 - r / saturation),
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match *self {
            UtilityFn::Log { weight, offset } => -weight / ((offset + r) * (offset + r)),
            UtilityFn::QuadCap { weight, saturation } => -weight / saturation,
        }
    }

    /// Utility loss `B(F) = U(max_rate) - U(max_rate - F)` of rejecting `overflow` units.
    pub fn loss(&self, max_rate: f64, overflow: f64) -> f64 {
        match *self {
            // ln(a) - ln(b) in ratio form stays accurate for small overflow
            UtilityFn::Log { weight, offset } => {
                -weight * (-overflow / (offset + max_rate)).ln_1p()
            }
            UtilityFn::QuadCap { .. } => {
                self.value(max_rate) - self.value(max_rate - overflow)
            }
        }
    }

    pub fn loss_d1(&self, max_rate: f64, overflow: f64) -> f64 {
        self.d1(max_rate - overflow)
    }

    pub fn loss_d2(&self, max_rate: f64, overflow: f64) -> f64 {
        -self.d2(max_rate - overflow)
    }

    /// Largest `B''` over overflow values whose loss stays within `budget`.
    pub fn max_loss_curvature(&self, max_rate: f64, budget: f64) -> f64 {
        match *self {
            UtilityFn::Log { weight, offset } => {
                let floor = ((offset + max_rate) * (-budget / weight).exp()).max(offset);
                if floor <= 0.0 {
                    f64::INFINITY
                } else {
                    weight / (floor * floor)
                }
            }
            UtilityFn::QuadCap { weight, saturation } => weight / saturation,
        }
    }

    fn check(&self, max_rate: f64) -> std::result::Result<(), String> {
        match *self {
            UtilityFn::Log { weight, offset } => {
                if !(weight > 0.0) || !(offset >= 0.0) {
                    return Err("log utility needs weight > 0 and offset >= 0".into());
                }
            }
            UtilityFn::QuadCap { weight, saturation } => {
                if !(weight > 0.0) || !(saturation > max_rate) {
                    return Err("quadratic utility needs weight > 0 and saturation above max_rate".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Demand {
    Inelastic { rate: f64 },
    Elastic { max_rate: f64, utility: UtilityFn },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub origin: usize,
    pub destination: usize,
    pub demand: Demand,
}

impl Session {
    pub fn inelastic(origin: usize, destination: usize, rate: f64) -> Self {
        Session { origin, destination, demand: Demand::Inelastic { rate } }
    }

    pub fn elastic(origin: usize, destination: usize, max_rate: f64, utility: UtilityFn) -> Self {
        Session { origin, destination, demand: Demand::Elastic { max_rate, utility } }
    }

    /// Rate injected at the origin: `r_w` or `r̄_w`.
    pub fn source_rate(&self) -> f64 {
        match self.demand {
            Demand::Inelastic { rate } => rate,
            Demand::Elastic { max_rate, .. } => max_rate,
        }
    }

    pub fn is_elastic(&self) -> bool {
        matches!(self.demand, Demand::Elastic { .. })
    }

    pub fn utility(&self) -> Option<&UtilityFn> {
        match &self.demand {
            Demand::Elastic { utility, .. } => Some(utility),
            Demand::Inelastic { .. } => None,
        }
    }

    /// Scales the offered rate, keeping the utility shape.
    pub fn with_rate(&self, rate: f64) -> Session {
        let demand = match self.demand {
            Demand::Inelastic { .. } => Demand::Inelastic { rate },
            Demand::Elastic { utility, .. } => Demand::Elastic { max_rate: rate, utility },
        };
        Session { demand, ..self.clone() }
    }
}

pub fn validate_sessions(num_nodes: usize, sessions: &[Session]) -> Result<()> {
    for (w, s) in sessions.iter().enumerate() {
        let bad = |reason: String| Error::InvalidSession { session: w, reason };
        if s.origin >= num_nodes || s.destination >= num_nodes {
            return Err(bad("endpoint outside the topology".into()));
        }
        if s.origin == s.destination {
            return Err(bad("origin equals destination".into()));
        }
        let rate = s.source_rate();
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(bad("rate must be positive".into()));
        }
        if let Demand::Elastic { max_rate, utility } = &s.demand {
            utility.check(*max_rate).map_err(bad)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_loss_derivative() {
        let u = UtilityFn::Log { weight: 1.0, offset: 0.0 };
        assert!((u.loss_d1(2.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(u.loss(2.0, 0.0), 0.0);
        assert!((u.loss(2.0, 1.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loss_is_increasing_and_convex() {
        for u in [
            UtilityFn::Log { weight: 2.0, offset: 0.5 },
            UtilityFn::QuadCap { weight: 1.5, saturation: 6.0 },
        ] {
            let mut prev = u.loss(5.0, 0.0);
            let mut prev_d = u.loss_d1(5.0, 0.0);
            for k in 1..50 {
                let f = 4.9 * k as f64 / 49.0;
                assert!(u.loss(5.0, f) > prev);
                assert!(u.loss_d1(5.0, f) >= prev_d);
                prev = u.loss(5.0, f);
                prev_d = u.loss_d1(5.0, f);
            }
        }
    }

    #[test]
    fn max_curvature_covers_budget_set() {
        let u = UtilityFn::Log { weight: 1.0, offset: 0.1 };
        let bound = u.max_loss_curvature(3.0, 1.0);
        for k in 0..1000 {
            let f = 3.0 * k as f64 / 1000.0;
            if u.loss(3.0, f) <= 1.0 {
                assert!(u.loss_d2(3.0, f) <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn session_validation() {
        assert!(validate_sessions(3, &[Session::inelastic(0, 2, 1.0)]).is_ok());
        assert!(validate_sessions(3, &[Session::inelastic(1, 1, 1.0)]).is_err());
        assert!(validate_sessions(3, &[Session::inelastic(0, 1, 0.0)]).is_err());
        let quad = UtilityFn::QuadCap { weight: 1.0, saturation: 1.0 };
        assert!(validate_sessions(3, &[Session::elastic(0, 1, 2.0, quad)]).is_err());
    }
}
