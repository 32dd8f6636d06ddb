//! Periodic spatial grid, field values and model parameters.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default grid: `[-20π, 20π)` with 1024 points.
pub const DEFAULT_HALF_WIDTH: f64 = 20.0 * PI;
pub const DEFAULT_N_POINTS: usize = 1024;

/// Uniform periodic grid on `[-L, L)` with cached FFT plans.
///
/// `wavenumbers` holds the discrete Fourier modes in FFT order with the
/// Nyquist entry set to zero, so first derivatives stay real-symmetric.
/// `k_squared` keeps the true Nyquist value for the Laplacian.
#[derive(Clone)]
pub struct SpatialGrid {
    n_points: usize,
    half_width: f64,
    spacing: f64,
    x: Vec<f64>,
    wavenumbers: Vec<f64>,
    k_squared: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("n_points", &self.n_points)
            .field("half_width", &self.half_width)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.half_width == other.half_width
    }
}

impl SpatialGrid {
    pub fn new(n_points: usize, half_width: f64) -> Result<Arc<Self>> {
        if n_points < 4 || !n_points.is_power_of_two() {
            return Err(invalid(format!(
                "n_points must be a power of two >= 4, got {n_points}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid(format!("half_width must be positive, got {half_width}")));
        }
        let spacing = 2.0 * half_width / n_points as f64;
        let x = (0..n_points)
            .map(|j| -half_width + j as f64 * spacing)
            .collect();
        let dk = PI / half_width;
        let half = n_points / 2;
        let mut wavenumbers = Vec::with_capacity(n_points);
        let mut k_squared = Vec::with_capacity(n_points);
        for j in 0..n_points {
            let signed = if j < half { j as f64 } else { j as f64 - n_points as f64 };
            let k = signed * dk;
            k_squared.push(k * k);
            wavenumbers.push(if j == half { 0.0 } else { k });
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Arc::new(Self {
            n_points,
            half_width,
            spacing,
            x,
            wavenumbers,
            k_squared,
            forward,
            inverse,
        }))
    }

    pub fn default_grid() -> Arc<Self> {
        Self::new(DEFAULT_N_POINTS, DEFAULT_HALF_WIDTH).expect("default grid is valid")
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    /// Largest representable wavenumber `π / dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing
    }

    /// Unnormalized forward transform in place.
    pub fn fft(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform in place, including the `1/n` factor.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.n_points as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }

    pub(crate) fn fft_with(&self, buf: &mut [Complex64], ws: &mut FftWorkspace) {
        ws.ensure(self.forward.get_inplace_scratch_len());
        self.forward.process_with_scratch(buf, &mut ws.scratch);
    }

    pub(crate) fn ifft_with(&self, buf: &mut [Complex64], ws: &mut FftWorkspace) {
        ws.ensure(self.inverse.get_inplace_scratch_len());
        self.inverse.process_with_scratch(buf, &mut ws.scratch);
        let s = 1.0 / self.n_points as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }

    pub(crate) fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected_n: self.n_points,
                expected_l: self.half_width,
                found_n: other.n_points,
                found_l: other.half_width,
            })
        }
    }
}

/// Per-worker FFT scratch space.
#[derive(Debug, Default)]
pub struct FftWorkspace {
    scratch: Vec<Complex64>,
}

impl FftWorkspace {
    fn ensure(&mut self, len: usize) {
        if self.scratch.len() < len {
            self.scratch.resize(len, Complex64::new(0.0, 0.0));
        }
    }
}

/// Nonlinearity exponent and sign of `i u_t = u_xx + λ|u|^{2σ} u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma: f64,
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(sigma: f64, lambda: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid(format!("sigma must be positive, got {sigma}")));
        }
        if lambda != 1.0 && lambda != -1.0 {
            return Err(invalid(format!("lambda must be +1 or -1, got {lambda}")));
        }
        Ok(Self { sigma, lambda })
    }

    /// Cubic focusing equation used for transmission.
    pub fn cubic_focusing() -> Self {
        Self { sigma: 1.0, lambda: 1.0 }
    }

    /// Quintic focusing equation, critical in one dimension.
    pub fn quintic_focusing() -> Self {
        Self { sigma: 2.0, lambda: 1.0 }
    }

    pub fn is_focusing(&self) -> bool {
        self.lambda > 0.0
    }

    /// `|z|^{2σ} z`.
    #[inline]
    pub fn power_term(&self, z: Complex64) -> Complex64 {
        z * pow_abs_sq(z.norm_sqr(), self.sigma)
    }
}

/// `(|z|^2)^σ` with fast paths for integer σ.
#[inline]
pub(crate) fn pow_abs_sq(abs_sq: f64, sigma: f64) -> f64 {
    if sigma == 1.0 {
        abs_sq
    } else if sigma == 2.0 {
        abs_sq * abs_sq
    } else {
        abs_sq.powf(sigma)
    }
}

/// Complex field sampled on a grid at one time.
#[derive(Debug, Clone)]
pub struct FieldState {
    values: Vec<Complex64>,
    time: f64,
    grid: Arc<SpatialGrid>,
}

impl FieldState {
    pub fn new(grid: Arc<SpatialGrid>, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(invalid(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(j) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid(format!("non-finite field value at index {j}")));
        }
        Ok(Self { values, time, grid })
    }

    /// Construction without the finiteness check, used for blown-up states.
    pub(crate) fn new_unchecked(grid: Arc<SpatialGrid>, values: Vec<Complex64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { values, time, grid }
    }

    pub fn zeros(grid: Arc<SpatialGrid>, time: f64) -> Self {
        let n = grid.n_points();
        Self::new_unchecked(grid, vec![Complex64::new(0.0, 0.0); n], time)
    }

    /// Samples `f(x)` at the grid nodes.
    pub fn from_fn(grid: Arc<SpatialGrid>, time: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.x().iter().map(|&x| f(x)).collect();
        Self::new(grid, values, time)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new_unchecked(
            self.grid.clone(),
            self.values.iter().map(|v| v * factor).collect(),
            self.time,
        )
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &FieldState, b: Complex64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        Ok(Self::new_unchecked(self.grid.clone(), values, self.time))
    }

    /// Discrete L² norm `(dx Σ|u|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// L² norm of `self - other`.
    pub fn l2_distance(&self, other: &FieldState) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| (u - v).norm_sqr())
            .sum();
        Ok((self.grid.spacing() * s).sqrt())
    }

    /// `‖self - reference‖ / ‖reference‖`.
    pub fn relative_l2_error(&self, reference: &FieldState) -> Result<f64> {
        Ok(self.l2_distance(reference)? / reference.l2_norm())
    }

    /// Spectrum (unnormalized FFT) of the values.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        self.grid.fft(&mut buf);
        buf
    }

    pub(crate) fn from_spectrum(grid: Arc<SpatialGrid>, mut spec: Vec<Complex64>, time: f64) -> Self {
        grid.ifft(&mut spec);
        Self::new_unchecked(grid, spec, time)
    }
}
