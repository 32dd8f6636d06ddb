//! Paths through the soliton family, `u(t) = √2 η(t) e^{-i∫η²} sech(η(t) x)`.
//!
//! The control cost along such a path is `½∫ F_S(η, η')` with
//! `F_S(z, p) = (K/9) p²/z`, `K = 12 + π²`. Positive solutions of the
//! Euler–Lagrange equation `2η''η = η'²` are perfect squares
//! `η = a t² + b t + c` with `b² = 4ac`, on which `η'²/η = 4a`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlPath, PathSampler};
use crate::error::{invalid, Error, Result};
use crate::grid::{FieldState, SpatialGrid};
use crate::quad;
use crate::spectral::{sech, SOLITON_TAIL_TOLERANCE};

use super::SECH_CONTROL_CONSTANT as K;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// From zero (no soliton sent) up to `1 - γ`.
    NullDatum,
    /// From 1 down to `1 - γ`, the branch with an interior zero.
    SolitonDatum1,
    /// From 1 down to `1 - γ`, the minimizing branch.
    SolitonDatum2,
}

/// `η(t) = a t² + b t + c` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParamPath {
    pub kind: PathKind,
    pub gamma: f64,
    pub horizon: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Closed-form Euler–Lagrange solution for the given boundary data.
pub fn soliton_param_solution(kind: PathKind, gamma: f64, horizon: f64) -> Result<SolitonParamPath> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("T must be positive, got {horizon}")));
    }
    let t = horizon;
    let s = (1.0 - gamma).sqrt();
    let (a, b, c) = match kind {
        PathKind::NullDatum => ((1.0 - gamma) / (t * t), 0.0, 0.0),
        PathKind::SolitonDatum1 => ((2.0 - gamma + 2.0 * s) / (t * t), 2.0 * (-1.0 - s) / t, 1.0),
        PathKind::SolitonDatum2 => ((2.0 - gamma - 2.0 * s) / (t * t), 2.0 * (-1.0 + s) / t, 1.0),
    };
    Ok(SolitonParamPath { kind, gamma, horizon, a, b, c })
}

/// Quadrature and closed-form values of `½∫ F_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionValues {
    pub quadrature: f64,
    pub closed_form: f64,
}

impl SolitonParamPath {
    pub fn eta(&self, t: f64) -> f64 {
        (self.a * t + self.b) * t + self.c
    }

    pub fn eta_prime(&self, t: f64) -> f64 {
        2.0 * self.a * t + self.b
    }

    /// `∫_0^t η²`.
    pub fn phase(&self, t: f64) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        let t2 = t * t;
        let t3 = t2 * t;
        a * a * t3 * t2 / 5.0 + a * b * t2 * t2 / 2.0 + (b * b + 2.0 * a * c) * t3 / 3.0 + b * c * t2 + c * c * t
    }

    /// Coefficients (constant first) of `2η''η - η'²`, formed by explicit
    /// polynomial products.
    pub fn el_residual_poly(&self) -> [f64; 3] {
        let eta = [self.c, self.b, self.a];
        let d1 = [self.b, 2.0 * self.a];
        let d2 = 2.0 * self.a;
        let mut out = [0.0; 3];
        for (i, e) in eta.iter().enumerate() {
            out[i] += 2.0 * d2 * e;
        }
        for (i, p) in d1.iter().enumerate() {
            for (j, q) in d1.iter().enumerate() {
                out[i + j] -= p * q;
            }
        }
        out
    }

    /// `F_S(η(t), η'(t))`, using the perfect-square limit `4a` where `η = 0`.
    ///
    /// Evaluated in vertex form `η = a d² + m`, `d = t + b/2a`, so that the
    /// ratio stays accurate next to a double root; `m` at round-off level is
    /// taken as an exact perfect square.
    pub fn lagrangian(&self, t: f64) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        if a == 0.0 {
            let e = self.eta(t);
            return if b == 0.0 { 0.0 } else { K / 9.0 * b * b / e };
        }
        let d = t + b / (2.0 * a);
        let sq = a * d * d;
        let h = b * b / (4.0 * a);
        let mut m = c - h;
        if m.abs() <= 8.0 * f64::EPSILON * c.abs().max(h.abs()) {
            m = 0.0;
        }
        if sq + m == 0.0 {
            K / 9.0 * 4.0 * a
        } else {
            K / 9.0 * 4.0 * a * sq / (sq + m)
        }
    }

    fn min_eta(&self) -> f64 {
        let mut m = self.eta(0.0).min(self.eta(self.horizon));
        if self.a != 0.0 {
            let v = -self.b / (2.0 * self.a);
            if v > 0.0 && v < self.horizon {
                m = m.min(self.eta(v));
            }
        }
        m
    }

    /// `½∫_0^T F_S` by adaptive quadrature and by `2aTK/9`.
    pub fn action(&self) -> Result<ActionValues> {
        self.action_from(0.0)
    }

    /// `½∫_{t0}^T F_S`.
    pub fn action_from(&self, t0: f64) -> Result<ActionValues> {
        if !(0.0..=self.horizon).contains(&t0) {
            return Err(invalid(format!("start {t0} outside [0, T]")));
        }
        if self.min_eta() < -1e-14 {
            return Err(Error::Hypothesis("soliton parameter becomes negative on [0, T]".into()));
        }
        let quadrature = 0.5 * quad::integrate(|t| self.lagrangian(t), t0, self.horizon, 1e-14);
        let closed_form = 2.0 * self.a * (self.horizon - t0) * K / 9.0;
        Ok(ActionValues { quadrature, closed_form })
    }

    /// `Ψ_S(t)` on the grid; fails when the profile does not fit the domain.
    pub fn state(&self, t: f64, grid: &Arc<SpatialGrid>) -> Result<FieldState> {
        let eta = self.eta(t);
        if !(eta > 0.0) {
            return Err(invalid(format!("soliton parameter {eta} not positive at t = {t}")));
        }
        let tail = sech(eta * grid.half_width());
        if tail > SOLITON_TAIL_TOLERANCE {
            return Err(Error::TailTruncation { tail, tolerance: SOLITON_TAIL_TOLERANCE });
        }
        let rot = Complex64::from_polar(2f64.sqrt() * eta, -self.phase(t));
        FieldState::from_fn(grid.clone(), t, |x| rot * sech(eta * x))
    }

    /// `h_S(t) = i(η'/η)Ψ_S - i√2 η'η x e^{-i∫η²} sinh(ηx)/cosh²(ηx)`.
    pub fn control(&self, t: f64, grid: &Arc<SpatialGrid>) -> Result<FieldState> {
        let eta = self.eta(t);
        let dp = self.eta_prime(t);
        let psi = self.state(t, grid)?;
        let rot = Complex64::from_polar(1.0, -self.phase(t));
        let i = Complex64::new(0.0, 1.0);
        let values = psi
            .values()
            .iter()
            .zip(grid.x())
            .map(|(p, &x)| {
                let y = eta * x;
                i * (dp / eta) * p - i * rot * (2f64.sqrt() * dp * eta * x * sech(y) * y.tanh())
            })
            .collect();
        FieldState::new(grid.clone(), values, t)
    }

    /// Samples `h_S` on `times`, skipping nodes with `η < eta_floor`.
    ///
    /// The returned path starts at the first retained node; the control is
    /// zero before it.
    pub fn control_path(&self, grid: &Arc<SpatialGrid>, times: &[f64], eta_floor: f64) -> Result<ControlPath> {
        let kept: Vec<f64> = times.iter().copied().filter(|&t| self.eta(t) >= eta_floor && self.eta(t) > 0.0).collect();
        if kept.len() < 2 {
            return Err(invalid("fewer than two nodes above the soliton-parameter floor"));
        }
        let fields = kept.iter().map(|&t| self.control(t, grid)).collect::<Result<Vec<_>>>()?;
        ControlPath::new(kept, fields)
    }

    /// Pairs the path with a grid for closed-form sampling.
    pub fn sampler(&self, grid: &Arc<SpatialGrid>) -> SolitonPathSampler {
        SolitonPathSampler { path: *self, grid: grid.clone() }
    }
}

/// [`SolitonParamPath`] on a fixed grid.
#[derive(Debug, Clone)]
pub struct SolitonPathSampler {
    path: SolitonParamPath,
    grid: Arc<SpatialGrid>,
}

impl PathSampler for SolitonPathSampler {
    fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    fn state(&self, t: f64) -> Result<FieldState> {
        self.path.state(t, &self.grid)
    }
}
