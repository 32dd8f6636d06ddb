//! Position shift `Y = ∫ x|u(T)|²` of a noisy soliton.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::Proportion;
use crate::dynamics::{evolve, extract_control_from_sampler, rate_functional, EvolveOptions, Forcing, PathSampler, PinvSettings};
use crate::error::{invalid, Error, Result};
use crate::grid::{FieldState, ModelParams, SpatialGrid};
use crate::noise::{NoiseOperator, NoiseStream};
use crate::quad;
use crate::spectral::{self, sech, soliton};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftTailRow {
    pub r: f64,
    /// `Y ≥ R`.
    pub plus: Proportion,
    /// `Y ≤ -R`.
    pub minus: Proportion,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftTailTable {
    pub eps: f64,
    pub horizon: f64,
    pub y: Vec<f64>,
    pub n_unstable: usize,
    pub rows: Vec<ShiftTailRow>,
}

/// Tail frequencies of `Y` for the unit soliton sent through noise.
pub fn mc_shift_tails(
    params: &ModelParams,
    phi: &NoiseOperator,
    eps: f64,
    horizon: f64,
    r_grid: &[f64],
    n_samples: usize,
    master_seed: u64,
    opts: &EvolveOptions,
) -> Result<ShiftTailTable> {
    if n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    if let Some(r) = r_grid.iter().find(|r| !(**r > 0.0)) {
        return Err(invalid(format!("tail levels must be positive, got {r}")));
    }
    let u0 = soliton(1.0, 0.0, phi.grid())?;
    let y: Vec<Option<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let stream = NoiseStream::new(master_seed, i as u64);
            match evolve(&u0, params, horizon, Forcing::Noise { phi, eps, stream }, opts) {
                Ok(tr) => Ok(Some(spectral::shift_y(tr.final_state()))),
                Err(Error::NonFinite { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let n_unstable = y.iter().filter(|v| v.is_none()).count();
    let y: Vec<f64> = y.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let rows = r_grid
        .iter()
        .map(|&r| ShiftTailRow {
            r,
            plus: Proportion::new(y.iter().filter(|&&v| v >= r).count(), n_samples),
            minus: Proportion::new(y.iter().filter(|&&v| v <= -r).count(), n_samples),
        })
        .collect();
    Ok(ShiftTailTable { eps, horizon, y, n_unstable, rows })
}

/// The path `(1 + a t x) Ψ₁(t, x)`, which moves the centre of mass linearly.
#[derive(Debug, Clone)]
pub struct GadgetPath {
    pub a: f64,
    grid: Arc<SpatialGrid>,
}

impl GadgetPath {
    pub fn new(a: f64, grid: Arc<SpatialGrid>) -> Self {
        Self { a, grid }
    }

    /// Slope reaching `Y(u(T)) = y`: `a = 3y / (2Tπ²)`.
    pub fn reaching(y: f64, horizon: f64, grid: Arc<SpatialGrid>) -> Self {
        Self::new(3.0 * y / (2.0 * horizon * PI * PI), grid)
    }

    /// `Y(u(t))` by quadrature on the line.
    pub fn shift_oracle(&self, t: f64) -> f64 {
        let c = self.a * t;
        quad::integrate(|x| x * (1.0 + c * x).powi(2) * 2.0 * sech(x).powi(2), -60.0, 60.0, 1e-13)
    }
}

impl PathSampler for GadgetPath {
    fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    fn state(&self, t: f64) -> Result<FieldState> {
        let psi = soliton(1.0, t, &self.grid)?;
        let values: Vec<Complex64> = psi
            .values()
            .iter()
            .zip(self.grid.x())
            .map(|(v, &x)| v * (1.0 + self.a * t * x))
            .collect();
        FieldState::new(self.grid.clone(), values, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GadgetRate {
    pub a: f64,
    /// `Y` of the endpoint on the grid.
    pub y_endpoint: f64,
    /// `Y` of the endpoint by line quadrature.
    pub y_oracle: f64,
    /// `½‖h‖²` of the control steering along the path.
    pub rate: f64,
    pub max_discarded_fraction: f64,
}

/// Upper estimate of the rate of `{Y ≥ y}` (or `{Y ≤ y}` for `y < 0`) from
/// the gadget path, cubic focusing only.
pub fn gadget_rate(phi: &NoiseOperator, params: &ModelParams, y: f64, horizon: f64, n_times: usize, pinv: PinvSettings) -> Result<GadgetRate> {
    if params.sigma != 1.0 || params.lambda != 1.0 {
        return Err(Error::Hypothesis("the gadget path is built on the cubic focusing soliton".into()));
    }
    if !(horizon > 0.0) || n_times < 2 {
        return Err(invalid("need T > 0 and at least two time nodes"));
    }
    let path = GadgetPath::reaching(y, horizon, phi.grid().clone());
    let times: Vec<f64> = (0..n_times).map(|j| horizon * j as f64 / (n_times - 1) as f64).collect();
    let control = extract_control_from_sampler(&path, &times, phi, params, pinv)?;
    Ok(GadgetRate {
        a: path.a,
        y_endpoint: spectral::shift_y(&path.state(horizon)?),
        y_oracle: path.shift_oracle(horizon),
        rate: rate_functional(&control),
        max_discarded_fraction: control.max_discarded_fraction(),
    })
}
