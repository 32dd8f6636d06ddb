//! Amplitude paths `u(t) = f(t) u0` with real `f`.
//!
//! Along such a path the squared control norm is
//! `F_a(f, f') = A f'² + V(f)`, `V(z) = B z² + 2λC |z|^{2σ+2} + D |z|^{4σ+2}`,
//! with `A = ‖u0‖²`, `B = ‖Δu0‖²`, `C = Re(Δu0, |u0|^{2σ}u0)`,
//! `D = ‖|u0|^{2σ}u0‖²`. The Euler–Lagrange equation is `2A f'' = V'(f)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{FieldState, ModelParams};
use crate::ode::{self, OdeTolerance};
use crate::spectral::{self, soliton};

/// Rational values of `(A, B, C, D)` for `u0 = √2 sech` in the cubic case.
pub const STANDARD_SOLITON_COEFFICIENTS: [f64; 4] = [4.0, 28.0 / 15.0, -16.0 / 5.0, 128.0 / 15.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub sigma: f64,
    pub lambda: f64,
}

impl AmplitudeCoefficients {
    /// Grid quadrature of the four coefficients.
    ///
    /// When `u0` is the unit cubic soliton the result is checked against the
    /// exact rationals and a mismatch above `1e-6` is an error.
    pub fn from_datum(u0: &FieldState, params: &ModelParams) -> Result<Self> {
        let dx = u0.grid().spacing();
        let lap = spectral::laplacian(u0);
        let pw: Vec<Complex64> = u0
            .values()
            .iter()
            .map(|v| v * crate::grid::pow_abs_sq(v.norm_sqr(), params.sigma))
            .collect();
        let a = spectral::mass_sq(u0);
        if !(a > 0.0) {
            return Err(invalid("amplitude parametrization needs a nonzero datum"));
        }
        let b = lap.l2_norm().powi(2);
        let c: f64 = dx * lap.values().iter().zip(&pw).map(|(l, p)| (l.conj() * p).re).sum::<f64>();
        let d: f64 = dx * pw.iter().map(|p| p.norm_sqr()).sum::<f64>();
        let out = Self { a, b, c, d, sigma: params.sigma, lambda: params.lambda };
        if params.sigma == 1.0 {
            if let Ok(s) = soliton(1.0, u0.time(), u0.grid()) {
                if u0.l2_distance(&s).map(|e| e < 1e-12).unwrap_or(false) {
                    let got = [a, b, c, d];
                    for (g, e) in got.iter().zip(STANDARD_SOLITON_COEFFICIENTS) {
                        if (g - e).abs() > 1e-6 * e.abs() {
                            return Err(Error::Hypothesis(format!(
                                "soliton amplitude coefficients {got:?} differ from the exact values"
                            )));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact coefficients for `√2 sech`, cubic focusing.
    pub fn standard_soliton() -> Self {
        let [a, b, c, d] = STANDARD_SOLITON_COEFFICIENTS;
        Self { a, b, c, d, sigma: 1.0, lambda: 1.0 }
    }

    pub fn potential(&self, z: f64) -> f64 {
        let s = self.sigma;
        let m = z.abs();
        self.b * z * z + 2.0 * self.lambda * self.c * m.powf(2.0 * s + 2.0) + self.d * m.powf(4.0 * s + 2.0)
    }

    pub fn potential_prime(&self, z: f64) -> f64 {
        let s = self.sigma;
        let m = z.abs();
        2.0 * self.b * z
            + 2.0 * self.lambda * self.c * (2.0 * s + 2.0) * z * m.powf(2.0 * s)
            + self.d * (4.0 * s + 2.0) * z * m.powf(4.0 * s)
    }

    pub fn potential_second(&self, z: f64) -> f64 {
        let s = self.sigma;
        let m = z.abs();
        2.0 * self.b
            + 2.0 * self.lambda * self.c * (2.0 * s + 2.0) * (2.0 * s + 1.0) * m.powf(2.0 * s)
            + self.d * (4.0 * s + 2.0) * (4.0 * s + 1.0) * m.powf(4.0 * s)
    }

    /// `F_a(z, p)`.
    pub fn lagrangian(&self, z: f64, p: f64) -> f64 {
        self.a * p * p + self.potential(z)
    }

    /// `f'' = Σ k_j f^{e_j}` as `(e_j, k_j)` pairs.
    pub fn el_coefficients(&self) -> [(f64, f64); 3] {
        let s = self.sigma;
        [
            (1.0, self.b / self.a),
            (2.0 * s + 1.0, self.lambda * (2.0 * s + 2.0) * self.c / self.a),
            (4.0 * s + 1.0, (2.0 * s + 1.0) * self.d / self.a),
        ]
    }
}

/// Two-point problem `f(0) = f0`, `f(T) = f_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeProblem {
    pub coefficients: AmplitudeCoefficients,
    pub horizon: f64,
    pub f0: f64,
    pub f_end: f64,
}

impl AmplitudeProblem {
    /// Nothing sent, received power reaches `4(1-γ)‖u0‖²/4`: `f: 0 → √(1-γ)`.
    pub fn error0(coefficients: AmplitudeCoefficients, gamma: f64, horizon: f64) -> Result<Self> {
        Self::checked(coefficients, gamma, horizon, 0.0)
    }

    /// Soliton sent, received power drops to the threshold: `f: 1 → √(1-γ)`.
    pub fn error1(coefficients: AmplitudeCoefficients, gamma: f64, horizon: f64) -> Result<Self> {
        Self::checked(coefficients, gamma, horizon, 1.0)
    }

    fn checked(coefficients: AmplitudeCoefficients, gamma: f64, horizon: f64, f0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("T must be positive, got {horizon}")));
        }
        Ok(Self { coefficients, horizon, f0, f_end: (1.0 - gamma).sqrt() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMethod {
    Shooting,
    Collocation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeSettings {
    /// Number of mesh intervals for the returned samples (and collocation).
    pub mesh_n: usize,
    /// Bound on the reported residual.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for AmplitudeSettings {
    fn default() -> Self {
        Self { mesh_n: 256, tol: 1e-8, max_iterations: 60 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeSolution {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    /// `½∫ F_a`.
    pub action: f64,
    /// Shooting: max of the terminal defect and the deviation from a
    /// re-integration at tighter tolerance. Collocation: sup of the
    /// discrete Euler–Lagrange residual.
    pub el_residual: f64,
    pub method: AmplitudeMethod,
    pub residual_history: Vec<f64>,
}

/// State `[f, f', S, ∂f/∂s, ∂f'/∂s]` with `S' = ½F_a`.
///
/// Once `|f|` leaves `[-cap, cap]` the state is frozen, so trajectories that
/// would explode in finite time still end with a finite, correctly signed
/// terminal value.
fn shoot(p: &AmplitudeProblem, slope: f64, times: &[f64], tol: OdeTolerance, cap: f64) -> Result<Vec<Vec<f64>>> {
    let k = p.coefficients;
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        if y[0].abs() > cap {
            dy.fill(0.0);
            return;
        }
        dy[0] = y[1];
        dy[1] = k.potential_prime(y[0]) / (2.0 * k.a);
        dy[2] = 0.5 * k.lagrangian(y[0], y[1]);
        dy[3] = y[4];
        dy[4] = k.potential_second(y[0]) / (2.0 * k.a) * y[3];
    };
    ode::integrate_dense(&mut rhs, times, &[p.f0, slope, 0.0, 0.0, 1.0], tol)
}

fn mesh(p: &AmplitudeProblem, n: usize) -> Vec<f64> {
    (0..=n).map(|j| p.horizon * j as f64 / n as f64).collect()
}

struct Shot {
    miss: f64,
    dmiss: f64,
    action: f64,
}

fn try_shooting(p: &AmplitudeProblem, settings: &AmplitudeSettings, history: &mut Vec<f64>) -> Option<AmplitudeSolution> {
    let tol = OdeTolerance::default();
    let cap = 3.0 * p.f0.abs().max(p.f_end.abs()).max(1.0);
    let ends = [0.0, p.horizon];
    let eval = |s: f64| -> Option<Shot> {
        let y = shoot(p, s, &ends, tol, cap).ok()?;
        let last = &y[1];
        Some(Shot { miss: last[0] - p.f_end, dmiss: last[3], action: last[2] })
    };
    let scale = (p.f_end - p.f0).abs().max(1.0) / p.horizon.min(1.0);
    let mut slopes: Vec<f64> = (0..=64).map(|j| scale * 10f64.powf(-10.0 + 11.0 * j as f64 / 64.0)).collect();
    slopes.extend(slopes.clone().into_iter().map(|v| -v));
    slopes.push(0.0);
    slopes.sort_by(f64::total_cmp);
    let scan: Vec<(f64, f64)> = slopes.iter().filter_map(|&s| eval(s).map(|e| (s, e.miss))).collect();

    let mut best: Option<(f64, f64, f64)> = None;
    for w in scan.windows(2) {
        let ((mut lo, mlo), (mut hi, mhi)) = (w[0], w[1]);
        if mlo.signum() == mhi.signum() && mlo != 0.0 {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let Some(e) = eval(mid) else { break };
            if e.miss.signum() == mlo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut s = 0.5 * (lo + hi);
        let Some(mut e) = eval(s) else { continue };
        for _ in 0..settings.max_iterations {
            if e.miss.abs() < 1e-14 || e.dmiss == 0.0 || !e.dmiss.is_finite() {
                break;
            }
            let trial = s - e.miss / e.dmiss;
            match eval(trial) {
                Some(t) if t.miss.abs() < e.miss.abs() => {
                    s = trial;
                    e = t;
                }
                _ => break,
            }
        }
        history.push(e.miss.abs());
        if e.miss.abs() <= 1e-10 && best.map_or(true, |b| e.action < b.1) {
            best = Some((s, e.action, e.miss.abs()));
        }
    }
    let (s, _, miss) = best?;
    let times = mesh(p, settings.mesh_n);
    let y = shoot(p, s, &times, tol, cap).ok()?;
    if y.iter().any(|r| r[0].abs() > cap) {
        return None;
    }
    let tight = OdeTolerance { rtol: 1e-14, atol: 1e-15, ..tol };
    let y_tight = shoot(p, s, &times, tight, cap).ok()?;
    let drift = y.iter().zip(&y_tight).map(|(a, b)| (a[0] - b[0]).abs()).fold(0.0, f64::max);
    let last = &y[y.len() - 1];
    Some(AmplitudeSolution {
        f: y.iter().map(|r| r[0]).collect(),
        f_prime: y.iter().map(|r| r[1]).collect(),
        action: last[2],
        el_residual: miss.max(drift),
        method: AmplitudeMethod::Shooting,
        residual_history: history.clone(),
        times,
    })
}

/// Thomas algorithm for a tridiagonal system with constant off-diagonals.
fn solve_tridiagonal(off: f64, diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - off * c[i - 1];
        c[i] = off / den;
        d[i] = (rhs[i] - off * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

// Damped Newton on the interior nodes of `f` for mesh width `h`.
fn collocation_newton(k: &AmplitudeCoefficients, f: &mut [f64], h: f64, settings: &AmplitudeSettings, history: &mut Vec<f64>) -> f64 {
    let n = f.len() - 1;
    let residual = |f: &[f64]| -> Vec<f64> {
        (1..n)
            .map(|i| k.a * (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h) - 0.5 * k.potential_prime(f[i]))
            .collect()
    };
    let l2 = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sup = |r: &[f64]| r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut r = residual(f);
    let mut previous = f64::INFINITY;
    for _ in 0..settings.max_iterations {
        let now = sup(&r);
        history.push(now);
        if now <= settings.tol * 1e-2 || (now <= settings.tol && now > 0.5 * previous) {
            break;
        }
        previous = now;
        let diag: Vec<f64> = (1..n).map(|i| -2.0 * k.a / (h * h) - 0.5 * k.potential_second(f[i])).collect();
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_tridiagonal(k.a / (h * h), &diag, &neg);
        let norm = l2(&r);
        let mut lambda = 1.0;
        loop {
            let mut trial = f.to_vec();
            for i in 1..n {
                trial[i] += lambda * delta[i - 1];
            }
            let rt = residual(&trial);
            if l2(&rt) < norm || lambda < 1e-6 {
                f.copy_from_slice(&trial);
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    sup(&r)
}

// Continuation in the horizon: each stage starts from the previous profile
// in normalized time, beginning with a straight line on a short interval.
fn collocation(p: &AmplitudeProblem, settings: &AmplitudeSettings, history: &mut Vec<f64>) -> Result<AmplitudeSolution> {
    let k = p.coefficients;
    let n = settings.mesh_n;
    let times = mesh(p, n);
    let mut f: Vec<f64> = times.iter().map(|t| p.f0 + (p.f_end - p.f0) * t / p.horizon).collect();
    let mut stage = p.horizon.min(0.5);
    loop {
        collocation_newton(&k, &mut f, stage / n as f64, settings, history);
        if stage >= p.horizon {
            break;
        }
        stage = (2.0 * stage).min(p.horizon);
    }
    let h = p.horizon / n as f64;
    let el_residual = collocation_newton(&k, &mut f, h, settings, history);
    if !(el_residual <= settings.tol) {
        return Err(Error::NoConvergence {
            detail: format!("amplitude collocation residual {el_residual:e} above {:e}", settings.tol),
            residual_history: history.clone(),
        });
    }
    let mut f_prime = vec![0.0; n + 1];
    f_prime[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    f_prime[n] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    for i in 1..n {
        f_prime[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    let action = 0.5
        * (0..n)
            .map(|i| {
                let p_mid = (f[i + 1] - f[i]) / h;
                h * (k.a * p_mid * p_mid + 0.5 * (k.potential(f[i]) + k.potential(f[i + 1])))
            })
            .sum::<f64>();
    Ok(AmplitudeSolution {
        times,
        f,
        f_prime,
        action,
        el_residual,
        method: AmplitudeMethod::Collocation,
        residual_history: history.clone(),
    })
}

/// Solves the amplitude Euler–Lagrange problem by shooting on `f'(0)`,
/// falling back to finite-difference collocation.
pub fn amplitude_solve(problem: &AmplitudeProblem, settings: &AmplitudeSettings) -> Result<AmplitudeSolution> {
    if settings.mesh_n < 64 {
        return Err(invalid(format!("mesh_n must be at least 64, got {}", settings.mesh_n)));
    }
    let mut history = Vec::new();
    if let Some(sol) = try_shooting(problem, settings, &mut history) {
        if sol.el_residual <= settings.tol {
            return Ok(sol);
        }
    }
    collocation(problem, settings, &mut history)
}

/// Collocation only, for cross-checks.
pub fn amplitude_solve_collocation(problem: &AmplitudeProblem, settings: &AmplitudeSettings) -> Result<AmplitudeSolution> {
    if settings.mesh_n < 64 {
        return Err(invalid(format!("mesh_n must be at least 64, got {}", settings.mesh_n)));
    }
    collocation(problem, settings, &mut Vec::new())
}
