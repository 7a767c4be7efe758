use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Per-link cost `D(C, F)` of carrying flow `F` over capacity `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkCostFn {
    /// Expected packets in an M/M/1 queue, `(F + guard) / (C - F)`.
    /// The guard keeps `dD/dC` strictly negative on idle links.
    Mm1Packets { guard: f64 },
    /// Mean M/M/1 sojourn time, `1 / (C - F)`.
    Mm1Delay,
}

impl Default for LinkCostFn {
    fn default() -> Self {
        LinkCostFn::Mm1Packets { guard: 1e-9 }
    }
}

impl LinkCostFn {
    fn numerator(&self, f: f64) -> f64 {
        match *self {
            LinkCostFn::Mm1Packets { guard } => f + guard,
            LinkCostFn::Mm1Delay => 1.0,
        }
    }

    pub fn eval(&self, c: f64, f: f64) -> Cost {
        if c.is_nan() || f.is_nan() || f >= c {
            return Cost::Infinite;
        }
        Cost::Finite(self.numerator(f) / (c - f))
    }

    /// Raw value; callers must ensure `f < c`.
    pub fn value(&self, c: f64, f: f64) -> f64 {
        self.numerator(f) / (c - f)
    }

    pub fn d_flow(&self, c: f64, f: f64) -> f64 {
        let s = c - f;
        match *self {
            LinkCostFn::Mm1Packets { guard } => (c + guard) / (s * s),
            LinkCostFn::Mm1Delay => 1.0 / (s * s),
        }
    }

    pub fn d_flow2(&self, c: f64, f: f64) -> f64 {
        let s = c - f;
        match *self {
            LinkCostFn::Mm1Packets { guard } => 2.0 * (c + guard) / (s * s * s),
            LinkCostFn::Mm1Delay => 2.0 / (s * s * s),
        }
    }

    pub fn d_cap(&self, c: f64, f: f64) -> f64 {
        let s = c - f;
        -self.numerator(f) / (s * s)
    }

    pub fn d_cap2(&self, c: f64, f: f64) -> f64 {
        let s = c - f;
        2.0 * self.numerator(f) / (s * s * s)
    }

    pub fn d_cap_flow(&self, c: f64, f: f64) -> f64 {
        let s = c - f;
        match *self {
            LinkCostFn::Mm1Packets { guard } => -(c + f + 2.0 * guard) / (s * s * s),
            LinkCostFn::Mm1Delay => -2.0 / (s * s * s),
        }
    }

    /// Smallest capacity with `D(C, f) <= budget`.
    pub fn min_capacity(&self, f: f64, budget: f64) -> f64 {
        f + self.numerator(f) / budget
    }
}

/// Extended-real network cost. `Infinite` marks an overloaded link and is
/// ordered above every finite value. No arithmetic is defined on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl Cost {
    pub fn is_finite(&self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Cost::Finite(v) => Some(v),
            Cost::Infinite => None,
        }
    }

    /// Finite value, or `f64::INFINITY` for reporting.
    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => a.partial_cmp(b),
            (Cost::Finite(_), Cost::Infinite) => Some(Ordering::Less),
            (Cost::Infinite, Cost::Finite(_)) => Some(Ordering::Greater),
            (Cost::Infinite, Cost::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(v) => write!(f, "{v}"),
            Cost::Infinite => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PACKETS: LinkCostFn = LinkCostFn::Mm1Packets { guard: 0.0 };

    #[test]
    fn unit_examples() {
        assert_eq!(PACKETS.eval(2.0, 1.0), Cost::Finite(1.0));
        assert_eq!(LinkCostFn::Mm1Delay.eval(2.0, 1.0), Cost::Finite(1.0));
        assert_eq!(PACKETS.eval(2.0, 2.0), Cost::Infinite);
        assert!(Cost::Infinite > Cost::Finite(1e300));
    }

    #[test]
    fn partials_match_differences() {
        let h = 1e-6;
        for cost in [LinkCostFn::default(), LinkCostFn::Mm1Delay] {
            for (c, f) in [(2.0, 0.5), (5.0, 0.0), (3.0, 2.5)] {
                let fd_f = (cost.value(c, f + h) - cost.value(c, f - h)) / (2.0 * h);
                let fd_c = (cost.value(c + h, f) - cost.value(c - h, f)) / (2.0 * h);
                let fd_ff = (cost.d_flow(c, f + h) - cost.d_flow(c, f - h)) / (2.0 * h);
                let fd_cc = (cost.d_cap(c + h, f) - cost.d_cap(c - h, f)) / (2.0 * h);
                let fd_cf = (cost.d_cap(c, f + h) - cost.d_cap(c, f - h)) / (2.0 * h);
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * b.abs().max(1e-6);
                assert!(close(fd_f, cost.d_flow(c, f)));
                assert!(close(fd_c, cost.d_cap(c, f)));
                assert!(close(fd_ff, cost.d_flow2(c, f)));
                assert!(close(fd_cc, cost.d_cap2(c, f)));
                assert!(close(fd_cf, cost.d_cap_flow(c, f)));
            }
        }
    }

    #[test]
    fn sign_conditions() {
        for cost in [LinkCostFn::default(), LinkCostFn::Mm1Delay] {
            for (c, f) in [(2.0, 0.0), (1.0, 0.9), (10.0, 3.0)] {
                assert!(cost.d_cap(c, f) < 0.0);
                assert!(cost.d_flow(c, f) > 0.0);
                assert!(cost.d_cap2(c, f) >= 0.0);
                assert!(cost.d_flow2(c, f) >= 0.0);
            }
        }
    }

    #[test]
    fn min_capacity_hits_budget() {
        let cost = LinkCostFn::default();
        let c = cost.min_capacity(1.5, 4.0);
        assert!((cost.value(c, 1.5) - 4.0).abs() < 1e-12);
    }
}
