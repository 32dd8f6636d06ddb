//! Time integration of the deterministic, forced and stochastic equation
//!
//! `i du = (Δu + λ|u|^{2σ}u + Φh) dt + √ε Φ dW`
//!
//! by Strang splitting, plus the control layer: skeletons, control
//! extraction from paths, the quadratic action and the explicit blow-up
//! control.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{pow_abs_sq, FftWorkspace, FieldState, ModelParams, SpatialGrid};
use crate::noise::{NoiseOperator, NoiseStream, DEFAULT_RANGE_TOLERANCE};
use crate::spectral::{self, free_phase};

/// Blow-up level used when none is given, in units of `‖u0‖_{H¹}`.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 50.0;

/// Default floor for adaptive sub-steps and clustered control nodes.
pub const DEFAULT_DT_MIN: f64 = 1e-7;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A control `h(t, ·)` that can be sampled at arbitrary times.
pub trait ControlSignal: Sync {
    fn grid(&self) -> &Arc<SpatialGrid>;
    /// End of the time interval on which the control is defined.
    fn horizon(&self) -> f64;
    /// `h(t)`; zero outside `[0, horizon]`.
    fn control_at(&self, t: f64) -> FieldState;
}

/// Control sampled on time nodes, linearly interpolated in between and zero
/// outside the node range. Paths normally start at `t = 0`; a later start
/// means the control vanishes before it.
#[derive(Debug, Clone)]
pub struct ControlPath {
    times: Vec<f64>,
    fields: Vec<FieldState>,
    l2_norm_sq: f64,
    max_discarded_fraction: f64,
}

impl ControlPath {
    pub fn new(times: Vec<f64>, fields: Vec<FieldState>) -> Result<Self> {
        if times.len() < 2 || times.len() != fields.len() {
            return Err(invalid("a control path needs matching times and fields, at least two nodes"));
        }
        if !(times[0] >= 0.0) {
            return Err(invalid(format!("control path must start at t >= 0, got {}", times[0])));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times[times.len() - 1].is_finite() {
            return Err(invalid("control times must be strictly increasing"));
        }
        let grid = fields[0].grid().clone();
        for f in &fields {
            grid.check_same(f.grid())?;
        }
        let l2_norm_sq = trapezoid_norm_sq(&times, &fields);
        Ok(Self { times, fields, l2_norm_sq, max_discarded_fraction: 0.0 })
    }

    /// The zero control on the given nodes.
    pub fn zero(grid: &Arc<SpatialGrid>, times: Vec<f64>) -> Result<Self> {
        let fields = times.iter().map(|&t| FieldState::zeros(grid.clone(), t)).collect();
        Self::new(times, fields)
    }

    /// Samples a function of time on the nodes.
    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> Result<FieldState>) -> Result<Self> {
        let fields = times.iter().map(|&t| f(t).map(|v| v.with_time(t))).collect::<Result<Vec<_>>>()?;
        Self::new(times, fields)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[FieldState] {
        &self.fields
    }

    /// Cached `∫ ‖h(t)‖² dt` by the trapezoidal rule.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    /// Largest pseudo-inverse discarded fraction seen while building the path.
    pub fn max_discarded_fraction(&self) -> f64 {
        self.max_discarded_fraction
    }

    pub fn recompute_l2_norm_sq(&self) -> f64 {
        trapezoid_norm_sq(&self.times, &self.fields)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let fields = self.fields.iter().map(|f| f.scaled(Complex64::new(factor, 0.0))).collect();
        Self {
            times: self.times.clone(),
            fields,
            l2_norm_sq: self.l2_norm_sq * factor * factor,
            max_discarded_fraction: self.max_discarded_fraction,
        }
    }

    /// Node-wise `self + other`, both on identical time nodes.
    pub fn add(&self, other: &ControlPath) -> Result<Self> {
        if self.times != other.times {
            return Err(invalid("control paths live on different time nodes"));
        }
        let one = Complex64::new(1.0, 0.0);
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.combine(one, b, one))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), fields)
    }

    /// `(∫ ‖h1 - h2‖² dt)^{1/2}` on common nodes.
    pub fn l2_distance(&self, other: &ControlPath) -> Result<f64> {
        let diff = self.add(&other.scaled(-1.0))?;
        Ok(diff.l2_norm_sq.sqrt())
    }
}

impl ControlSignal for ControlPath {
    fn grid(&self) -> &Arc<SpatialGrid> {
        self.fields[0].grid()
    }

    fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn control_at(&self, t: f64) -> FieldState {
        let grid = self.grid().clone();
        if !(t >= self.times[0] && t <= self.horizon()) {
            return FieldState::zeros(grid, t);
        }
        let j = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        let values = self.fields[j - 1]
            .values()
            .iter()
            .zip(self.fields[j].values())
            .map(|(a, b)| a * (1.0 - w) + b * w)
            .collect();
        FieldState::new_unchecked(grid, values, t)
    }
}

fn trapezoid_norm_sq(times: &[f64], fields: &[FieldState]) -> f64 {
    let sq: Vec<f64> = fields.iter().map(|f| f.l2_norm().powi(2)).collect();
    times
        .windows(2)
        .zip(sq.windows(2))
        .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
        .sum()
}

/// `½ ∫ ‖h‖² dt`, the action of one control.
pub fn rate_functional(h: &ControlPath) -> f64 {
    0.5 * h.l2_norm_sq()
}

/// Right-hand side of a single evolution.
pub enum Forcing<'a> {
    None,
    /// `Φh` as a source term.
    Control { phi: &'a NoiseOperator, control: &'a dyn ControlSignal },
    /// `√ε Φ dW` driven by one sample stream.
    Noise { phi: &'a NoiseOperator, eps: f64, stream: NoiseStream },
}

/// Sub-stepping rule `dt_sub = κ / rate`, with `rate = max|u|^{2σ}` and,
/// under a control, also `‖Φh‖_∞ / ‖u‖_∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStep {
    pub kappa: f64,
    pub dt_min: f64,
}

impl Default for AdaptiveStep {
    fn default() -> Self {
        Self { kappa: 0.02, dt_min: DEFAULT_DT_MIN }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Macro step; the horizon must be an integer multiple.
    pub dt: f64,
    /// Store every `output_every`-th macro step (the final state is always stored).
    pub output_every: usize,
    /// H¹ levels to record; integration stops once the largest is crossed.
    pub blowup_levels: Vec<f64>,
    pub adaptive: Option<AdaptiveStep>,
    /// Relative mass drift that aborts an unforced run.
    pub mass_drift_limit: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            output_every: 1,
            blowup_levels: Vec::new(),
            adaptive: None,
            mass_drift_limit: 1e-6,
        }
    }
}

impl EvolveOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// First time the H¹ norm reached `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupRecord {
    pub level: f64,
    pub t_cross: f64,
}

/// Stored output of one evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<FieldState>,
    crossings: Vec<BlowupRecord>,
    blowup: Option<BlowupRecord>,
    steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[FieldState] {
        &self.states
    }

    pub fn final_state(&self) -> &FieldState {
        &self.states[self.states.len() - 1]
    }

    /// Crossing of the largest requested level, after which nothing is stored.
    pub fn blowup(&self) -> Option<BlowupRecord> {
        self.blowup
    }

    /// Every level crossed, in increasing order of time.
    pub fn crossings(&self) -> &[BlowupRecord] {
        &self.crossings
    }

    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        self.crossings.iter().find(|c| c.level == level).map(|c| c.t_cross)
    }

    /// Number of (sub-)steps taken.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `max_t ‖u(t) - v(t)‖` over stored nodes.
    pub fn sup_l2_distance(&self, reference: impl Fn(f64) -> Result<FieldState>) -> Result<f64> {
        let mut worst = 0.0f64;
        for (t, u) in self.times.iter().zip(&self.states) {
            worst = worst.max(u.l2_distance(&reference(*t)?)?);
        }
        Ok(worst)
    }

    /// Writes one row of observables per stored node.
    pub fn write_csv<W: Write>(&self, mut w: W, params: &ModelParams, window: f64, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        writeln!(w, "t,mass_sq,hamiltonian,h1_norm_sq,windowed_momentum,shift_y")?;
        for (t, u) in self.times.iter().zip(&self.states) {
            let o = spectral::observables(u, params);
            let m = spectral::windowed_momentum(u, window)?;
            let y = spectral::shift_y(u);
            writeln!(w, "{t},{},{},{},{m},{y}", o.mass_sq, o.hamiltonian, o.h1_norm_sq)?;
        }
        Ok(())
    }
}

/// Default blow-up level `50 ‖u0‖_{H¹}`.
pub fn default_blowup_level(u0: &FieldState) -> f64 {
    DEFAULT_BLOWUP_FACTOR * spectral::h1_norm(u0)
}

struct Stepper<'a> {
    grid: Arc<SpatialGrid>,
    params: ModelParams,
    ws: FftWorkspace,
    spec: Vec<Complex64>,
    forcing_buf: Vec<Complex64>,
    half_phase: Vec<Complex64>,
    cached_dt: f64,
    forcing: Forcing<'a>,
}

impl<'a> Stepper<'a> {
    fn nonlinear(&self, u: &mut [Complex64], dt: f64) {
        let (sigma, lambda) = (self.params.sigma, self.params.lambda);
        for v in u.iter_mut() {
            let rate = lambda * pow_abs_sq(v.norm_sqr(), sigma);
            *v *= Complex64::from_polar(1.0, -rate * dt);
        }
    }

    fn set_dt(&mut self, dt: f64) {
        if dt != self.cached_dt {
            for (p, &k2) in self.half_phase.iter_mut().zip(self.grid.k_squared()) {
                *p = free_phase(k2, 0.5 * dt);
            }
            self.cached_dt = dt;
        }
    }

    fn step(&mut self, u: &mut [Complex64], t: f64, dt: f64) {
        self.set_dt(dt);
        self.nonlinear(u, 0.5 * dt);
        self.spec.copy_from_slice(u);
        self.grid.fft_with(&mut self.spec, &mut self.ws);
        for (v, p) in self.spec.iter_mut().zip(&self.half_phase) {
            *v *= p;
        }
        if let Forcing::Control { phi, control } = &self.forcing {
            let h = control.control_at(t + 0.5 * dt);
            self.forcing_buf.copy_from_slice(h.values());
            self.grid.fft_with(&mut self.forcing_buf, &mut self.ws);
            for ((v, f), &m) in self.spec.iter_mut().zip(&self.forcing_buf).zip(phi.multiplier()) {
                *v -= I * (dt * m) * f;
            }
        }
        for (v, p) in self.spec.iter_mut().zip(&self.half_phase) {
            *v *= p;
        }
        if let Forcing::Noise { phi, eps, stream } = &mut self.forcing {
            phi.add_increment_spectral(&mut self.spec, dt, -I * eps.sqrt(), stream);
        }
        self.grid.ifft_with(&mut self.spec, &mut self.ws);
        u.copy_from_slice(&self.spec);
        self.nonlinear(u, 0.5 * dt);
    }

    fn rate(&mut self, u: &[Complex64], t: f64) -> f64 {
        let max_sq = u.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        let mut rate = pow_abs_sq(max_sq, self.params.sigma);
        if let Forcing::Control { phi, control } = &self.forcing {
            let h = control.control_at(t);
            if let Ok(ph) = phi.apply(&h) {
                let fmax = ph.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
                if max_sq > 0.0 {
                    rate = rate.max(fmax / max_sq.sqrt());
                }
            }
        }
        rate
    }
}

/// Integrates from `u0` (at its own time) over `[t0, t0 + horizon]`.
pub fn evolve(u0: &FieldState, params: &ModelParams, horizon: f64, forcing: Forcing<'_>, opts: &EvolveOptions) -> Result<Trajectory> {
    let grid = u0.grid().clone();
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {}", opts.dt)));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    if opts.output_every == 0 {
        return Err(invalid("output_every must be at least 1"));
    }
    let n_steps = (horizon / opts.dt).round() as usize;
    if (n_steps as f64 * opts.dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(invalid(format!("dt = {} does not divide the horizon {horizon}", opts.dt)));
    }
    match &forcing {
        Forcing::None => {}
        Forcing::Control { phi, control } => {
            grid.check_same(phi.grid())?;
            grid.check_same(control.grid())?;
        }
        Forcing::Noise { phi, eps, .. } => {
            grid.check_same(phi.grid())?;
            if !(*eps >= 0.0 && eps.is_finite()) {
                return Err(invalid(format!("noise intensity must be nonnegative, got {eps}")));
            }
        }
    }
    let mut levels = opts.blowup_levels.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if let Some(&lo) = levels.first() {
        let h1 = spectral::h1_norm(u0);
        if !(lo > h1) {
            return Err(invalid(format!("blow-up level {lo} must exceed the initial H1 norm {h1}")));
        }
    }
    if let Some(a) = opts.adaptive {
        if !(a.kappa > 0.0 && a.dt_min > 0.0) {
            return Err(invalid("adaptive kappa and dt_min must be positive"));
        }
    }

    let deterministic = matches!(forcing, Forcing::None);
    let n = grid.n_points();
    let t_start = u0.time();
    let mut stepper = Stepper {
        grid: grid.clone(),
        params: *params,
        ws: FftWorkspace::default(),
        spec: vec![Complex64::new(0.0, 0.0); n],
        forcing_buf: vec![Complex64::new(0.0, 0.0); n],
        half_phase: vec![Complex64::new(1.0, 0.0); n],
        cached_dt: f64::NAN,
        forcing,
    };
    let mut u = u0.values().to_vec();
    let mass0 = spectral::mass_sq(u0);
    let mut traj = Trajectory {
        times: vec![t_start],
        states: vec![u0.clone()],
        crossings: Vec::new(),
        blowup: None,
        steps: 0,
    };
    let mut next_level = 0usize;

    for j in 0..n_steps {
        let t0 = t_start + j as f64 * opts.dt;
        let t1 = t_start + (j + 1) as f64 * opts.dt;
        let mut t = t0;
        while t < t1 {
            let mut h = t1 - t;
            if let Some(a) = opts.adaptive {
                let rate = stepper.rate(&u, t - t_start);
                if rate > 0.0 {
                    h = h.min((a.kappa / rate).max(a.dt_min));
                }
                if t1 - (t + h) < 1e-12 * opts.dt {
                    h = t1 - t;
                }
            }
            stepper.step(&mut u, t - t_start, h);
            t = if h == t1 - t { t1 } else { t + h };
            traj.steps += 1;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: t });
            }
            if next_level < levels.len() {
                let state = FieldState::new_unchecked(grid.clone(), u.clone(), t);
                let h1 = spectral::h1_norm(&state);
                while next_level < levels.len() && h1 >= levels[next_level] {
                    traj.crossings.push(BlowupRecord { level: levels[next_level], t_cross: t });
                    next_level += 1;
                }
                if next_level == levels.len() {
                    traj.blowup = traj.crossings.last().copied();
                    traj.times.push(t);
                    traj.states.push(state);
                    return Ok(traj);
                }
            }
        }
        if (j + 1) % opts.output_every == 0 || j + 1 == n_steps {
            let state = FieldState::new_unchecked(grid.clone(), u.clone(), t1);
            if deterministic && mass0 > 0.0 {
                let drift = (spectral::mass_sq(&state) - mass0).abs() / mass0;
                if drift > opts.mass_drift_limit {
                    return Err(Error::MassDrift { drift, time: t1 });
                }
            }
            traj.times.push(t1);
            traj.states.push(state);
        }
    }
    Ok(traj)
}

/// `𝐒(h)`: the forced equation from `u0` over the horizon of `h`.
pub fn skeleton(
    control: &dyn ControlSignal,
    phi: &NoiseOperator,
    u0: &FieldState,
    params: &ModelParams,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    evolve(u0, params, control.horizon(), Forcing::Control { phi, control }, opts)
}

/// Skeleton started from the zero field.
pub fn skeleton_from_zero(control: &dyn ControlSignal, phi: &NoiseOperator, params: &ModelParams, opts: &EvolveOptions) -> Result<Trajectory> {
    let u0 = FieldState::zeros(control.grid().clone(), 0.0);
    skeleton(control, phi, &u0, params, opts)
}

/// A path given in closed form.
pub trait PathSampler: Sync {
    fn grid(&self) -> &Arc<SpatialGrid>;
    fn state(&self, t: f64) -> Result<FieldState>;

    /// Step of the default fourth-order difference in [`time_derivative`](Self::time_derivative).
    fn derivative_step(&self) -> f64 {
        1e-3
    }

    fn time_derivative(&self, t: f64) -> Result<FieldState> {
        let d = self.derivative_step();
        let a = self.state(t - 2.0 * d)?;
        let b = self.state(t - d)?;
        let c = self.state(t + d)?;
        let e = self.state(t + 2.0 * d)?;
        let s = 1.0 / (12.0 * d);
        let values = a
            .values()
            .iter()
            .zip(b.values())
            .zip(c.values())
            .zip(e.values())
            .map(|(((a, b), c), e)| (a - 8.0 * b + 8.0 * c - e) * s)
            .collect();
        FieldState::new(self.grid().clone(), values, t)
    }
}

/// `i u_t - Δu - λ|u|^{2σ}u` for a state and its time derivative.
pub fn residual(u: &FieldState, du_dt: &FieldState, params: &ModelParams) -> Result<FieldState> {
    let lap = spectral::laplacian(u);
    let pw = spectral::power_term(u, params);
    let values = du_dt
        .values()
        .iter()
        .zip(lap.values())
        .zip(pw.values())
        .map(|((d, l), p)| I * d - l - p)
        .collect();
    FieldState::new(u.grid().clone(), values, u.time())
}

/// Pseudo-inverse settings for control extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinvSettings {
    pub cutoff: f64,
    pub range_tolerance: f64,
}

impl Default for PinvSettings {
    fn default() -> Self {
        Self { cutoff: crate::noise::DEFAULT_PINV_CUTOFF, range_tolerance: DEFAULT_RANGE_TOLERANCE }
    }
}

fn controls_from_residuals(
    times: Vec<f64>,
    residuals: Vec<FieldState>,
    phi: &NoiseOperator,
    pinv: PinvSettings,
) -> Result<ControlPath> {
    let mut worst = 0.0f64;
    let mut fields = Vec::with_capacity(residuals.len());
    for r in &residuals {
        let out = phi.apply_pinv(r, pinv.cutoff)?;
        worst = worst.max(out.discarded_fraction);
        fields.push(out.field);
    }
    if worst > pinv.range_tolerance {
        return Err(Error::NotInRange { fraction: worst, tolerance: pinv.range_tolerance });
    }
    let mut path = ControlPath::new(times, fields)?;
    path.max_discarded_fraction = worst;
    Ok(path)
}

/// Control that makes the stored trajectory a skeleton, with the time
/// derivative taken by second-order differences on the stored nodes.
pub fn extract_control(traj: &Trajectory, phi: &NoiseOperator, params: &ModelParams, pinv: PinvSettings) -> Result<ControlPath> {
    let ts = traj.times();
    let us = traj.states();
    let m = ts.len();
    if m < 3 {
        return Err(invalid("control extraction needs at least three stored nodes"));
    }
    let weights = |j: usize| -> [(usize, f64); 3] {
        if j == 0 {
            let (h1, h2) = (ts[1] - ts[0], ts[2] - ts[1]);
            [(0, -(2.0 * h1 + h2) / (h1 * (h1 + h2))), (1, (h1 + h2) / (h1 * h2)), (2, -h1 / (h2 * (h1 + h2)))]
        } else if j == m - 1 {
            let (h1, h2) = (ts[m - 2] - ts[m - 3], ts[m - 1] - ts[m - 2]);
            [
                (m - 3, h2 / (h1 * (h1 + h2))),
                (m - 2, -(h1 + h2) / (h1 * h2)),
                (m - 1, (h1 + 2.0 * h2) / (h2 * (h1 + h2))),
            ]
        } else {
            let (h1, h2) = (ts[j] - ts[j - 1], ts[j + 1] - ts[j]);
            [(j - 1, -h2 / (h1 * (h1 + h2))), (j, (h2 - h1) / (h1 * h2)), (j + 1, h1 / (h2 * (h1 + h2)))]
        }
    };
    let mut residuals = Vec::with_capacity(m);
    for j in 0..m {
        let mut d = vec![Complex64::new(0.0, 0.0); us[j].values().len()];
        for (k, w) in weights(j) {
            for (acc, v) in d.iter_mut().zip(us[k].values()) {
                *acc += v * w;
            }
        }
        let du = FieldState::new(us[j].grid().clone(), d, ts[j])?;
        residuals.push(residual(&us[j], &du, params)?);
    }
    controls_from_residuals(ts.to_vec(), residuals, phi, pinv)
}

/// Control that makes a closed-form path a skeleton, sampled on `times`.
pub fn extract_control_from_sampler(
    path: &dyn PathSampler,
    times: &[f64],
    phi: &NoiseOperator,
    params: &ModelParams,
    pinv: PinvSettings,
) -> Result<ControlPath> {
    let residuals = times
        .iter()
        .map(|&t| residual(&path.state(t)?, &path.time_derivative(t)?, params))
        .collect::<Result<Vec<_>>>()?;
    controls_from_residuals(times.to_vec(), residuals, phi, pinv)
}

/// Explicit control that drives `(2/T) u0` along `g(t) u0`, `g = 2/(T - 2t)`,
/// which leaves every bounded set at `t = T/2`.
///
/// With `v = g u0` and `g' = g²`, the forcing must equal
/// `Φh = i g² u0 - g Δu0 - λ g^{2σ+1} |u0|^{2σ} u0`, so
/// `h = g² a + g b + g^{2σ+1} c` with `a, b, c` the pseudo-inverse images.
#[derive(Debug, Clone)]
pub struct BlowupControl {
    horizon: f64,
    power: f64,
    a: FieldState,
    b: FieldState,
    c: FieldState,
    u0: FieldState,
    discarded_fraction: f64,
}

impl BlowupControl {
    /// Fails with `NotInRange` unless `u0`, `Δu0` and `|u0|^{2σ}u0` lie in the
    /// range of `Φ` up to the tolerance.
    pub fn new(u0: &FieldState, horizon: f64, phi: &NoiseOperator, params: &ModelParams, pinv: PinvSettings) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("blow-up horizon must be positive, got {horizon}")));
        }
        phi.grid().check_same(u0.grid())?;
        let iu = u0.scaled(I);
        let lap = spectral::laplacian(u0).scaled(Complex64::new(-1.0, 0.0));
        let pw = spectral::power_term(u0, params).scaled(Complex64::new(-1.0, 0.0));
        let mut worst = 0.0f64;
        let mut inv = |f: &FieldState| -> Result<FieldState> {
            let out = phi.apply_pinv_checked(f, pinv.cutoff, pinv.range_tolerance)?;
            worst = worst.max(out.discarded_fraction);
            Ok(out.field)
        };
        let (a, b, c) = (inv(&iu)?, inv(&lap)?, inv(&pw)?);
        Ok(Self {
            horizon,
            power: 2.0 * params.sigma + 1.0,
            a,
            b,
            c,
            u0: u0.clone(),
            discarded_fraction: worst,
        })
    }

    /// Start of the controlled path, `(2/T) u0`.
    pub fn initial_datum(&self) -> FieldState {
        self.u0.scaled(Complex64::new(2.0 / self.horizon, 0.0)).with_time(0.0)
    }

    /// Target `g(t) u0`.
    pub fn target(&self, t: f64) -> FieldState {
        self.u0.scaled(Complex64::new(self.gain(t), 0.0)).with_time(t)
    }

    pub fn gain(&self, t: f64) -> f64 {
        2.0 / (self.horizon - 2.0 * t)
    }

    /// Time at which the target leaves every bounded set.
    pub fn singular_time(&self) -> f64 {
        0.5 * self.horizon
    }

    pub fn discarded_fraction(&self) -> f64 {
        self.discarded_fraction
    }

    /// Closed-form `∫_0^τ ‖h(t)‖² dt` for `τ < T/2`.
    pub fn norm_sq_until(&self, tau: f64) -> Result<f64> {
        let t = self.horizon;
        if !(tau >= 0.0 && tau < 0.5 * t) {
            return Err(invalid(format!("tau must lie in [0, T/2), got {tau}")));
        }
        // ∫_0^τ g^m = 2^{m-1}/(m-1) [(T-2τ)^{1-m} - T^{1-m}], valid for m > 1.
        let moment = |m: f64| 2f64.powf(m - 1.0) / (m - 1.0) * ((t - 2.0 * tau).powf(1.0 - m) - t.powf(1.0 - m));
        let dot = |x: &FieldState, y: &FieldState| -> f64 {
            let s: Complex64 = x.values().iter().zip(y.values()).map(|(p, q)| p.conj() * q).sum();
            s.re * x.grid().spacing()
        };
        let p = self.power;
        let terms = [
            (&self.a, &self.a, 4.0, 1.0),
            (&self.b, &self.b, 2.0, 1.0),
            (&self.c, &self.c, 2.0 * p, 1.0),
            (&self.a, &self.b, 3.0, 2.0),
            (&self.a, &self.c, 2.0 + p, 2.0),
            (&self.b, &self.c, 1.0 + p, 2.0),
        ];
        Ok(terms.iter().map(|(x, y, m, w)| w * dot(x, y) * moment(*m)).sum())
    }

    /// The norm diverges at `T/2` for every `σ` unless the control vanishes:
    /// each power of `g` that appears is at least two.
    pub fn l2_divergent(&self) -> bool {
        self.a.l2_norm() > 0.0 || self.b.l2_norm() > 0.0 || self.c.l2_norm() > 0.0
    }

    /// Node set on `[0, T/2 - delta]`: uniform up to `T/4`, then octaves
    /// `[T/2 - d, T/2 - d/2]` each split into `per_octave` intervals, with
    /// distances floored at `dt_min`.
    pub fn clustered_nodes(&self, delta: f64, n_uniform: usize, per_octave: usize, dt_min: f64) -> Result<Vec<f64>> {
        let half = 0.5 * self.horizon;
        if !(delta > 0.0 && delta < 0.25 * self.horizon) || n_uniform == 0 || per_octave == 0 {
            return Err(invalid("need 0 < delta < T/4 and positive node counts"));
        }
        let delta = delta.max(dt_min);
        let mut times: Vec<f64> = (0..=n_uniform).map(|j| 0.25 * self.horizon * j as f64 / n_uniform as f64).collect();
        let mut d = 0.25 * self.horizon;
        while d > delta {
            let next = (0.5 * d).max(delta);
            for k in 1..=per_octave {
                times.push(half - d + (d - next) * k as f64 / per_octave as f64);
            }
            d = next;
        }
        Ok(times)
    }

    /// Samples the control on [`clustered_nodes`](Self::clustered_nodes).
    pub fn sample_path(&self, delta: f64, n_uniform: usize, per_octave: usize) -> Result<ControlPath> {
        let times = self.clustered_nodes(delta, n_uniform, per_octave, DEFAULT_DT_MIN)?;
        let mut path = ControlPath::from_fn(times, |t| Ok(self.control_at(t)))?;
        path.max_discarded_fraction = self.discarded_fraction;
        Ok(path)
    }
}

impl ControlSignal for BlowupControl {
    fn grid(&self) -> &Arc<SpatialGrid> {
        self.u0.grid()
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn control_at(&self, t: f64) -> FieldState {
        let grid = self.u0.grid().clone();
        if !(t >= 0.0 && t < 0.5 * self.horizon) {
            return FieldState::zeros(grid, t);
        }
        let g = self.gain(t);
        let (ga, gb, gc) = (g * g, g, g.powf(self.power));
        let values = self
            .a
            .values()
            .iter()
            .zip(self.b.values())
            .zip(self.c.values())
            .map(|((a, b), c)| a * ga + b * gb + c * gc)
            .collect();
        FieldState::new_unchecked(grid, values, t)
    }
}

/// Outcome of running the deterministic cubic solver on `Ψ₁`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SolitonCheck {
    pub dt: f64,
    pub horizon: f64,
    /// `sup_t ‖u(t) - Ψ₁(t)‖ / ‖Ψ₁(t)‖` over the stored times.
    pub max_rel_l2_error: f64,
    pub mass_drift: f64,
    pub hamiltonian_drift: f64,
    /// Errors at `t = horizon` for `coarse_dt` and `coarse_dt / 2`.
    pub coarse_dt: f64,
    pub coarse_errors: [f64; 2],
    pub order_ratio: f64,
    pub passed: bool,
}

impl SolitonCheck {
    pub const ERROR_TOL: f64 = 1e-6;
    pub const MASS_TOL: f64 = 1e-10;
    pub const HAMILTONIAN_TOL: f64 = 1e-6;
    /// Allowed relative deviation of the halving ratio from 4.
    pub const RATIO_TOL: f64 = 0.1;
}

/// Evolves the unit soliton without forcing and compares against the exact
/// solution. The convergence ratio uses `coarse_dt` so that the time error
/// dominates round-off.
pub fn soliton_check(grid: &Arc<SpatialGrid>, dt: f64, horizon: f64, coarse_dt: f64) -> Result<SolitonCheck> {
    let params = ModelParams::cubic_focusing();
    let u0 = spectral::soliton(1.0, 0.0, grid)?;
    let steps = (horizon / dt).round() as usize;
    let opts = EvolveOptions { output_every: (steps / 100).max(1), ..EvolveOptions::with_dt(dt) };
    let tr = evolve(&u0, &params, horizon, Forcing::None, &opts)?;
    let max_rel_l2_error = tr
        .states()
        .iter()
        .map(|s| spectral::soliton(1.0, s.time(), grid).and_then(|e| s.relative_l2_error(&e)))
        .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))?;
    let o0 = spectral::observables(&u0, &params);
    let mut mass_drift = 0.0f64;
    let mut hamiltonian_drift = 0.0f64;
    for s in tr.states() {
        let o = spectral::observables(s, &params);
        mass_drift = mass_drift.max((o.mass_sq - o0.mass_sq).abs() / o0.mass_sq);
        hamiltonian_drift = hamiltonian_drift.max((o.hamiltonian - o0.hamiltonian).abs() / o0.hamiltonian.abs());
    }
    let exact = spectral::soliton(1.0, horizon, grid)?;
    let end_error = |h: f64| -> Result<f64> {
        let opts = EvolveOptions { output_every: usize::MAX, ..EvolveOptions::with_dt(h) };
        evolve(&u0, &params, horizon, Forcing::None, &opts)?.final_state().relative_l2_error(&exact)
    };
    let coarse_errors = [end_error(coarse_dt)?, end_error(0.5 * coarse_dt)?];
    let order_ratio = coarse_errors[0] / coarse_errors[1];
    let passed = max_rel_l2_error <= SolitonCheck::ERROR_TOL
        && mass_drift <= SolitonCheck::MASS_TOL
        && hamiltonian_drift <= SolitonCheck::HAMILTONIAN_TOL
        && (order_ratio / 4.0 - 1.0).abs() <= SolitonCheck::RATIO_TOL;
    Ok(SolitonCheck {
        dt,
        horizon,
        max_rel_l2_error,
        mass_drift,
        hamiltonian_drift,
        coarse_dt,
        coarse_errors,
        order_ratio,
        passed,
    })
}
