use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Link capacity as a function of SINR (natural logs throughout).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapacityFn {
    /// `C = scale * ln(K x)`.
    HighSinrLog { k: f64, scale: f64 },
    /// `C = symbol_rate * ln(K x / (2 q^2))` with `q = Q^{-1}(error_prob)`.
    MQam { k: f64, symbol_rate: f64, error_prob: f64 },
    /// `C = ln(1 + K x)`.
    PreciseLog { k: f64 },
}

/// Normalized form every variant reduces to.
#[derive(Debug, Clone, Copy)]
enum Shape {
    Log { k: f64, scale: f64 },
    Precise { k: f64 },
}

impl CapacityFn {
    pub fn high_sinr(k: f64) -> Self {
        CapacityFn::HighSinrLog { k, scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CapacityFn::HighSinrLog { k, scale } => k > 0.0 && scale > 0.0,
            CapacityFn::MQam { k, symbol_rate, error_prob } => {
                k > 0.0 && symbol_rate > 0.0 && error_prob > 0.0 && error_prob < 0.5
            }
            CapacityFn::PreciseLog { k } => k > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid capacity parameters {self:?}")))
        }
    }

    fn shape(&self) -> Shape {
        match *self {
            CapacityFn::HighSinrLog { k, scale } => Shape::Log { k, scale },
            CapacityFn::MQam { k, symbol_rate, error_prob } => {
                let normal = Normal::new(0.0, 1.0).expect("standard normal");
                let q = normal.inverse_cdf(1.0 - error_prob);
                Shape::Log { k: k / (2.0 * q * q), scale: symbol_rate }
            }
            CapacityFn::PreciseLog { k } => Shape::Precise { k },
        }
    }

    /// Processing gain `K` as configured.
    pub fn gain_factor(&self) -> f64 {
        match *self {
            CapacityFn::HighSinrLog { k, .. } | CapacityFn::MQam { k, .. } | CapacityFn::PreciseLog { k } => k,
        }
    }

    pub fn is_high_sinr(&self) -> bool {
        !matches!(self, CapacityFn::PreciseLog { .. })
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.shape() {
            Shape::Log { k, scale } => scale * (k * x).ln(),
            Shape::Precise { k } => (k * x).ln_1p(),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self.shape() {
            Shape::Log { scale, .. } => scale / x,
            Shape::Precise { k } => k / (1.0 + k * x),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self.shape() {
            Shape::Log { scale, .. } => -scale / (x * x),
            Shape::Precise { k } => -k * k / ((1.0 + k * x) * (1.0 + k * x)),
        }
    }

    /// `C'(x) x`, evaluated without forming `1/x`.
    pub fn elasticity(&self, x: f64) -> f64 {
        match self.shape() {
            Shape::Log { scale, .. } => scale,
            Shape::Precise { k } => k * x / (1.0 + k * x),
        }
    }

    /// `C''(x) x^2`.
    pub fn curvature_x2(&self, x: f64) -> f64 {
        match self.shape() {
            Shape::Log { scale, .. } => -scale,
            Shape::Precise { k } => {
                let e = k * x / (1.0 + k * x);
                -e * e
            }
        }
    }

    /// Inverse of the capacity map: the SINR achieving capacity `c`.
    pub fn sinr_for(&self, c: f64) -> f64 {
        match self.shape() {
            Shape::Log { k, scale } => (c / scale).exp() / k,
            Shape::Precise { k } => c.exp_m1() / k,
        }
    }

    /// `max C'(x)^2 x^2` over `[lo, hi]`. Each product below is monotone in `x`
    /// for every variant, so the extremum sits at an endpoint.
    pub fn max_elasticity_sq(&self, lo: f64, hi: f64) -> f64 {
        endpoint_max(lo, hi, |x| self.elasticity(x).powi(2))
    }

    /// `min C''(x) x^2` over `[lo, hi]`.
    pub fn min_curvature_x2(&self, lo: f64, hi: f64) -> f64 {
        endpoint_min(lo, hi, |x| self.curvature_x2(x))
    }

    /// `max C'(x)^2 x^2 (1+x)^2` over `[lo, hi]`.
    pub fn max_elasticity_sq_1px(&self, lo: f64, hi: f64) -> f64 {
        endpoint_max(lo, hi, |x| (self.elasticity(x) * (1.0 + x)).powi(2))
    }

    /// `min C''(x) x^2 (1+x)^2` over `[lo, hi]`.
    pub fn min_curvature_x2_1px(&self, lo: f64, hi: f64) -> f64 {
        endpoint_min(lo, hi, |x| self.curvature_x2(x) * (1.0 + x) * (1.0 + x))
    }
}

fn endpoint_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    f(lo).max(f(hi))
}

fn endpoint_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    f(lo).min(f(hi))
}
