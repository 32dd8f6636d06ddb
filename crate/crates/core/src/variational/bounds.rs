//! Closed-form exponents of the two transmission error probabilities.
//!
//! All exponents are limits of `ε log P` and therefore nonpositive.

use serde::Serialize;

use crate::error::{invalid, Result};

use super::SECH_CONTROL_CONSTANT as K;

/// Threshold on the received windowed power, `4(1 - γ)`.
pub fn threshold(gamma: f64) -> f64 {
    4.0 * (1.0 - gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQuery {
    pub gamma: f64,
    pub horizon: f64,
    pub phi_op_norm: f64,
}

impl BoundQuery {
    pub fn new(gamma: f64, horizon: f64, phi_op_norm: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("T must be positive, got {horizon}")));
        }
        if !(phi_op_norm > 0.0 && phi_op_norm.is_finite()) {
            return Err(invalid(format!("operator norm must be positive, got {phi_op_norm}")));
        }
        Ok(Self { gamma, horizon, phi_op_norm })
    }
}

/// Exponents for the error on a sent 0 (`exp0`) and on a sent 1 (`exp1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentPair {
    pub exp0: f64,
    pub exp1: f64,
}

impl ExponentPair {
    /// Exponent of the larger of the two error probabilities.
    pub fn risk(&self) -> f64 {
        self.exp0.max(self.exp1)
    }
}

/// Upper bounds, valid for any `Φ` with operator norm `‖Φ‖_c`.
pub fn upper_bound_exponents(q: &BoundQuery) -> ExponentPair {
    let (g, t, n2) = (q.gamma, q.horizon, q.phi_op_norm * q.phi_op_norm);
    let r = g / (1.0 + g);
    ExponentPair {
        exp0: -(1.0 - g) / (2.0 * t * n2),
        exp1: -((1.0 + g) / (t * n2)) * ((1.0 + r * r).sqrt() - 1.0),
    }
}

/// Lower bounds from the soliton-parameter paths.
pub fn lower_bound_exponents(q: &BoundQuery) -> ExponentPair {
    let (g, t) = (q.gamma, q.horizon);
    let s = (1.0 - g).sqrt();
    ExponentPair {
        exp0: -2.0 * (1.0 - g) * K / (9.0 * t),
        exp1: -2.0 * (2.0 - g - 2.0 * s) * K / (9.0 * t),
    }
}

// exp0 rises and exp1 falls with γ, so the risk is minimal at their crossing.
fn crossing(f: impl Fn(f64) -> ExponentPair) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = f(mid);
        if e.exp0 < e.exp1 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `γ` minimizing the upper-bound risk (independent of `T` and `‖Φ‖_c`).
pub fn risk_optimal_gamma_upper() -> f64 {
    crossing(|g| upper_bound_exponents(&BoundQuery { gamma: g, horizon: 1.0, phi_op_norm: 1.0 }))
}

/// `γ` minimizing the lower-bound risk (independent of `T`).
pub fn risk_optimal_gamma_lower() -> f64 {
    crossing(|g| lower_bound_exponents(&BoundQuery { gamma: g, horizon: 1.0, phi_op_norm: 1.0 }))
}
