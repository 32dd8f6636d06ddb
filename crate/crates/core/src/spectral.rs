//! Free propagator, soliton family and field observables.
//!
//! The model is `i u_t = u_xx + λ|u|^{2σ} u` on the periodic grid. The
//! linear part is diagonal in Fourier space: `û_k(t+dt) = e^{i k² dt} û_k(t)`.
//! With this sign the family `√2 η e^{-iη² t} sech(ηx)` solves the cubic
//! focusing equation exactly.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{pow_abs_sq, FieldState, ModelParams, SpatialGrid};

/// Maximal `sech(η L)` accepted by [`soliton`].
pub const SOLITON_TAIL_TOLERANCE: f64 = 1e-12;

/// `e^{i k² dt}`, the free propagator multiplier for one mode.
#[inline]
pub fn free_phase(k_squared: f64, dt: f64) -> Complex64 {
    Complex64::from_polar(1.0, k_squared * dt)
}

/// Applies the free Schrödinger group `S(dt)` to `f`.
pub fn propagate_free(f: &FieldState, dt: f64) -> Result<FieldState> {
    if !dt.is_finite() {
        return Err(invalid(format!("dt must be finite, got {dt}")));
    }
    let grid = f.grid().clone();
    let mut spec = f.spectrum();
    for (v, &k2) in spec.iter_mut().zip(grid.k_squared()) {
        *v *= free_phase(k2, dt);
    }
    Ok(FieldState::from_spectrum(grid, spec, f.time() + dt))
}

/// Same as [`propagate_free`] but checks the field against an expected grid.
pub fn propagate_free_on(grid: &SpatialGrid, f: &FieldState, dt: f64) -> Result<FieldState> {
    grid.check_same(f.grid())?;
    propagate_free(f, dt)
}

#[inline]
pub(crate) fn sech(x: f64) -> f64 {
    let a = x.abs();
    if a > 700.0 {
        0.0
    } else {
        let e = (-a).exp();
        2.0 * e / (1.0 + e * e)
    }
}

/// `Ψ_η(t, x) = √2 η e^{-iη² t} sech(η x)` sampled on the grid.
pub fn soliton(eta: f64, t: f64, grid: &Arc<SpatialGrid>) -> Result<FieldState> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid(format!("soliton parameter must be positive, got {eta}")));
    }
    let tail = sech(eta * grid.half_width());
    if tail > SOLITON_TAIL_TOLERANCE {
        return Err(Error::TailTruncation { tail, tolerance: SOLITON_TAIL_TOLERANCE });
    }
    let phase = Complex64::from_polar(2f64.sqrt() * eta, -eta * eta * t);
    FieldState::from_fn(grid.clone(), t, |x| phase * sech(eta * x))
}

/// Spectral derivative `u_x`.
pub fn gradient(f: &FieldState) -> FieldState {
    let grid = f.grid().clone();
    let mut spec = f.spectrum();
    for (v, &k) in spec.iter_mut().zip(grid.wavenumbers()) {
        *v *= Complex64::new(0.0, k);
    }
    FieldState::from_spectrum(grid, spec, f.time())
}

/// Spectral Laplacian `u_xx`.
pub fn laplacian(f: &FieldState) -> FieldState {
    let grid = f.grid().clone();
    let mut spec = f.spectrum();
    for (v, &k2) in spec.iter_mut().zip(grid.k_squared()) {
        *v *= -k2;
    }
    FieldState::from_spectrum(grid, spec, f.time())
}

/// `|u|^{2σ} u` pointwise.
pub fn power_term(f: &FieldState, params: &ModelParams) -> FieldState {
    let values = f.values().iter().map(|&z| params.power_term(z)).collect();
    FieldState::new_unchecked(f.grid().clone(), values, f.time())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub mass_sq: f64,
    pub hamiltonian: f64,
    pub variance: f64,
    pub h1_norm_sq: f64,
}

/// `∫|u_x|²` through Parseval on the spectral derivative.
pub fn gradient_norm_sq(f: &FieldState) -> f64 {
    let grid = f.grid();
    let spec = f.spectrum();
    let n = grid.n_points() as f64;
    let s: f64 = spec
        .iter()
        .zip(grid.wavenumbers())
        .map(|(v, &k)| k * k * v.norm_sqr())
        .sum();
    grid.spacing() * s / n
}

pub fn mass_sq(f: &FieldState) -> f64 {
    f.grid().spacing() * f.values().iter().map(|v| v.norm_sqr()).sum::<f64>()
}

pub fn h1_norm_sq(f: &FieldState) -> f64 {
    mass_sq(f) + gradient_norm_sq(f)
}

pub fn h1_norm(f: &FieldState) -> f64 {
    h1_norm_sq(f).sqrt()
}

pub fn observables(f: &FieldState, params: &ModelParams) -> Observables {
    let grid = f.grid();
    let dx = grid.spacing();
    let mass_sq = mass_sq(f);
    let grad_sq = gradient_norm_sq(f);
    let potential: f64 = f
        .values()
        .iter()
        .map(|v| {
            let a = v.norm_sqr();
            a * pow_abs_sq(a, params.sigma)
        })
        .sum::<f64>()
        * dx;
    let variance = dx
        * f.values()
            .iter()
            .zip(grid.x())
            .map(|(v, &x)| x * x * v.norm_sqr())
            .sum::<f64>();
    Observables {
        mass_sq,
        hamiltonian: 0.5 * grad_sq - params.lambda / (2.0 * params.sigma + 2.0) * potential,
        variance,
        h1_norm_sq: mass_sq + grad_sq,
    }
}

/// `∫_{-l}^{l} |u|²` of the periodic piecewise-linear interpolant of `|u|²`.
///
/// Monotone in `l`; equals the full discrete mass once `l` reaches the
/// half width.
pub fn windowed_momentum(f: &FieldState, l: f64) -> Result<f64> {
    let grid = f.grid();
    let half = grid.half_width();
    if !(l > 0.0) || l > half {
        return Err(invalid(format!("window half-length {l} outside (0, {half}]")));
    }
    if l == half {
        return Ok(mass_sq(f));
    }
    let p: Vec<f64> = f.values().iter().map(|v| v.norm_sqr()).collect();
    Ok(cumulative(&p, grid, l) - cumulative(&p, grid, -l))
}

// ∫_{-L}^{x} of the periodic linear interpolant of p.
fn cumulative(p: &[f64], grid: &SpatialGrid, x: f64) -> f64 {
    let dx = grid.spacing();
    let n = p.len();
    let s = (x + grid.half_width()) / dx;
    let j = (s.floor() as usize).min(n - 1);
    let full: f64 = (0..j).map(|i| 0.5 * (p[i] + p[(i + 1) % n])).sum::<f64>() * dx;
    let r = (x + grid.half_width()) - j as f64 * dx;
    let (a, b) = (p[j], p[(j + 1) % n]);
    full + r * a + r * r / (2.0 * dx) * (b - a)
}

/// First moment `Y(f) = ∫ x |f|²`.
pub fn shift_y(f: &FieldState) -> f64 {
    let grid = f.grid();
    grid.spacing()
        * f.values()
            .iter()
            .zip(grid.x())
            .map(|(v, &x)| x * v.norm_sqr())
            .sum::<f64>()
}

/// `(‖u‖_p^p + ‖u_x‖_p^p)^{1/p}`.
pub fn w1p_norm(f: &FieldState, p: f64) -> f64 {
    let dx = f.grid().spacing();
    let g = gradient(f);
    let s: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(u, du)| u.norm().powf(p) + du.norm().powf(p))
        .sum();
    (dx * s).powf(1.0 / p)
}

/// Time exponent `r` of the admissible pair in one dimension, `2/r = 1/2 - 1/p`.
/// `None` for `p = 2`, where `r = ∞`.
pub fn admissible_r(p: f64) -> Option<f64> {
    if p == 2.0 {
        None
    } else {
        Some(4.0 * p / (p - 2.0))
    }
}

/// Norm of `C([0,T]; H¹) ∩ L^r(0,T; W^{1,p})` over a sampled trajectory.
pub fn xtp_norm(times: &[f64], states: &[FieldState], t_end: f64, p: f64) -> Result<f64> {
    let (sup_h1, lr) = xtp_components(times, states, t_end, p)?;
    Ok(sup_h1.max(lr))
}

/// The two parts of [`xtp_norm`]: `sup_t ‖u‖_{H¹}` and the `L^r(W^{1,p})` norm.
pub fn xtp_components(times: &[f64], states: &[FieldState], t_end: f64, p: f64) -> Result<(f64, f64)> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(invalid(format!("p must be >= 2, got {p}")));
    }
    let last = times.last().copied().unwrap_or(0.0);
    if t_end > last + 1e-12 {
        return Err(invalid(format!("T = {t_end} beyond trajectory extent {last}")));
    }
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] <= t_end + 1e-12).collect();
    let sup_h1 = idx.iter().map(|&i| h1_norm(&states[i])).fold(0.0, f64::max);
    let lr = match admissible_r(p) {
        None => idx.iter().map(|&i| w1p_norm(&states[i], 2.0)).fold(0.0, f64::max),
        Some(r) => {
            let vals: Vec<f64> = idx.iter().map(|&i| w1p_norm(&states[i], p).powf(r)).collect();
            let mut acc = 0.0;
            for w in 1..idx.len() {
                acc += 0.5 * (vals[w] + vals[w - 1]) * (times[idx[w]] - times[idx[w - 1]]);
            }
            acc.powf(1.0 / r)
        }
    };
    Ok((sup_h1, lr))
}
