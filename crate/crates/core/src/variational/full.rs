//! Full soliton parametrization `√2η e^{iβx+iα+iτ} sech(η(x-y))`.
//!
//! Coordinates are ordered `z = (η, α, β, y)`. The solved system uses the
//! reduced Lagrangian `F_PS = K/9 η'²/η + (4/3)η³y'²`, whose
//! Euler–Lagrange equations are
//! `η'' = η'²/(2η) + 18η³y'²/K` and `(η³y')' = 0`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::ode::{self, OdeTolerance};

use super::SECH_CONTROL_CONSTANT as K;

/// `F_P(z, p)` for `z = (η, α, β, y)` and `p = z'`.
pub fn full_lagrangian(z: [f64; 4], p: [f64; 4]) -> f64 {
    let pi2 = std::f64::consts::PI.powi(2);
    let (e, y) = (z[0], z[3]);
    K / 9.0 * p[0] * p[0] / e
        + 4.0 / 3.0 * e.powi(3) * p[3] * p[3]
        + 4.0 * p[1] * p[1] * e
        + 4.0 * p[2] * p[2] * e * y * y
        + pi2 * p[2] * p[2] / (3.0 * e)
        + 8.0 * p[1] * p[2] * e * y
}

/// `F_PS(η, η', y')`.
pub fn reduced_lagrangian(eta: f64, eta_prime: f64, y_prime: f64) -> f64 {
    K / 9.0 * eta_prime * eta_prime / eta + 4.0 / 3.0 * eta.powi(3) * y_prime * y_prime
}

#[derive(Debug, Clone, Serialize)]
pub struct FullParamState {
    pub gamma: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_prime: Vec<f64>,
    /// Phase and frequency stay at zero: `F_P` is positive definite in
    /// `(α', β')` and both start at zero.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
    pub y_prime: Vec<f64>,
    /// `½∫ F_PS`.
    pub action: f64,
    /// Terminal defect `max(|η(T) - (1-γ)|, |y'(T)|)`.
    pub shooting_residual: f64,
    pub residual_history: Vec<f64>,
}

impl FullParamState {
    pub fn sup_y_prime(&self) -> f64 {
        self.y_prime.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullParamSettings {
    pub mesh_n: usize,
    pub tol: f64,
    pub max_iterations: usize,
    /// Nonzero start for `y'(0)` so the solver has to drive it to zero.
    pub y_prime_guess: f64,
}

impl Default for FullParamSettings {
    fn default() -> Self {
        Self { mesh_n: 200, tol: 1e-10, max_iterations: 60, y_prime_guess: 0.05 }
    }
}

// State [η, η', y, y', S].
fn integrate(s: [f64; 2], times: &[f64], tol: OdeTolerance) -> Result<Vec<Vec<f64>>> {
    let mut rhs = |_t: f64, u: &[f64], du: &mut [f64]| {
        let (e, ep, yp) = (u[0], u[1], u[3]);
        du[0] = ep;
        du[1] = ep * ep / (2.0 * e) + 18.0 * e.powi(3) * yp * yp / K;
        du[2] = yp;
        du[3] = -3.0 * ep * yp / e;
        du[4] = 0.5 * reduced_lagrangian(e, ep, yp);
    };
    let out = ode::integrate_dense(&mut rhs, times, &[1.0, s[0], 0.0, s[1], 0.0], tol)?;
    if out.iter().any(|r| !(r[0] > 0.0)) {
        return Err(Error::Hypothesis("soliton parameter left (0, ∞)".into()));
    }
    Ok(out)
}

/// Shooting on `(η'(0), y'(0))` for `η(0) = 1`, `η(T) = 1-γ`, `y(0) = 0`,
/// `y'(T) = 0`.
pub fn full_param_solve(gamma: f64, horizon: f64, settings: &FullParamSettings) -> Result<FullParamState> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("T must be positive, got {horizon}")));
    }
    let tol = OdeTolerance::default();
    let target = 1.0 - gamma;
    let ends = [0.0, horizon];
    let miss = |s: [f64; 2]| -> Option<[f64; 2]> {
        let y = integrate(s, &ends, tol).ok()?;
        Some([y[1][0] - target, y[1][3]])
    };
    let norm = |m: [f64; 2]| m[0].abs().max(m[1].abs());
    let mut s = [-gamma / horizon, settings.y_prime_guess];
    let mut m = miss(s).ok_or_else(|| Error::NoConvergence {
        detail: "initial shot left the admissible region".into(),
        residual_history: vec![],
    })?;
    let mut history = vec![norm(m)];
    for _ in 0..settings.max_iterations {
        if norm(m) <= settings.tol * 1e-3 {
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let d = 1e-7 * (1.0 + s[j].abs());
            let (mut sp, mut sm) = (s, s);
            sp[j] += d;
            sm[j] -= d;
            let (Some(a), Some(b)) = (miss(sp), miss(sm)) else { break };
            for i in 0..2 {
                jac[i][j] = (a[i] - b[i]) / (2.0 * d);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let step = [
            -(jac[1][1] * m[0] - jac[0][1] * m[1]) / det,
            -(-jac[1][0] * m[0] + jac[0][0] * m[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut moved = false;
        while lambda > 1e-8 {
            let trial = [s[0] + lambda * step[0], s[1] + lambda * step[1]];
            if let Some(mt) = miss(trial) {
                if norm(mt) < norm(m) {
                    s = trial;
                    m = mt;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        history.push(norm(m));
        if !moved {
            break;
        }
    }
    if !(norm(m) <= settings.tol) {
        return Err(Error::NoConvergence {
            detail: format!("full parametrization shooting residual {:e}", norm(m)),
            residual_history: history,
        });
    }
    let times: Vec<f64> = (0..=settings.mesh_n).map(|j| horizon * j as f64 / settings.mesh_n as f64).collect();
    let y = integrate(s, &times, tol)?;
    let n = times.len();
    Ok(FullParamState {
        gamma,
        horizon,
        eta: y.iter().map(|r| r[0]).collect(),
        eta_prime: y.iter().map(|r| r[1]).collect(),
        alpha: vec![0.0; n],
        beta: vec![0.0; n],
        y: y.iter().map(|r| r[2]).collect(),
        y_prime: y.iter().map(|r| r[3]).collect(),
        action: y[n - 1][4],
        shooting_residual: norm(m),
        residual_history: history,
        times,
    })
}
