//! Covariance square root `Φ`, diagonal in Fourier space.
//!
//! Conventions. The cylindrical process `W_c` is expanded on the orthonormal
//! modes `e_j(x) = e^{i k_j x} / √(2L)` with independent real Brownian
//! motions on the real and imaginary part of every coefficient, so one
//! increment over `dt` has complex variance `2 dt` per mode. `Φ e_j = φ̂_j e_j`.
//! Under this convention the control cost of a path is `½‖h‖²` in
//! `L²(0,T; L²)`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{FieldState, SpatialGrid};

/// Relative cutoff below which [`NoiseOperator::apply_pinv`] treats a mode as
/// outside the range of `Φ`.
pub const DEFAULT_PINV_CUTOFF: f64 = 1e-10;

/// Discarded energy fraction above which a field is reported as not in `im Φ`.
pub const DEFAULT_RANGE_TOLERANCE: f64 = 1e-8;

/// Named spectral profile of `φ̂(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterProfile {
    /// `exp(-k² / (2 b²))`.
    Gaussian { bandwidth: f64 },
    /// Indicator of `|k| ≤ k_max`.
    BandIdeal { k_max: f64 },
    /// One on `|k| ≤ k_max`, Gaussian roll-off of width `rolloff` beyond.
    NearIdentity {
        k_max: f64,
        #[serde(default = "default_rolloff")]
        rolloff: f64,
    },
}

fn default_rolloff() -> f64 {
    1.0
}

impl FilterProfile {
    pub fn near_identity(k_max: f64) -> Self {
        FilterProfile::NearIdentity { k_max, rolloff: default_rolloff() }
    }

    fn value(&self, k_abs: f64) -> f64 {
        let v = match *self {
            FilterProfile::Gaussian { bandwidth } => (-k_abs * k_abs / (2.0 * bandwidth * bandwidth)).exp(),
            FilterProfile::BandIdeal { k_max } => {
                if k_abs <= k_max {
                    1.0
                } else {
                    0.0
                }
            }
            FilterProfile::NearIdentity { k_max, rolloff } => {
                if k_abs <= k_max {
                    1.0
                } else {
                    let d = (k_abs - k_max) / rolloff;
                    (-0.5 * d * d).exp()
                }
            }
        };
        if v < 1e-300 {
            0.0
        } else {
            v
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            FilterProfile::Gaussian { bandwidth } => bandwidth,
            FilterProfile::BandIdeal { k_max } => k_max,
            FilterProfile::NearIdentity { k_max, .. } => k_max,
        }
    }
}

/// `Φ` as a nonnegative spectral multiplier on a fixed grid.
#[derive(Debug, Clone)]
pub struct NoiseOperator {
    grid: Arc<SpatialGrid>,
    profile: Option<FilterProfile>,
    multiplier: Vec<f64>,
    active: Vec<usize>,
    op_norm: f64,
    hs_norm_h1_sq: f64,
}

impl NoiseOperator {
    /// Builds `Φ` from a named profile.
    pub fn make_filter(profile: FilterProfile, grid: &Arc<SpatialGrid>) -> Result<Self> {
        let scale = profile.scale();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("filter scale must be positive, got {scale}")));
        }
        if let FilterProfile::NearIdentity { rolloff, .. } = profile {
            if !(rolloff.is_finite() && rolloff > 0.0) {
                return Err(invalid(format!("rolloff must be positive, got {rolloff}")));
            }
        }
        if scale >= grid.nyquist() {
            return Err(Error::AboveNyquist { value: scale, nyquist: grid.nyquist() });
        }
        let multiplier = grid.k_squared().iter().map(|&k2| profile.value(k2.sqrt())).collect();
        let mut op = Self::from_multiplier(grid, multiplier)?;
        op.profile = Some(profile);
        Ok(op)
    }

    /// Builds `Φ` from an explicit multiplier in FFT order.
    pub fn from_multiplier(grid: &Arc<SpatialGrid>, multiplier: Vec<f64>) -> Result<Self> {
        if multiplier.len() != grid.n_points() {
            return Err(invalid("multiplier length differs from grid size"));
        }
        if multiplier.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(invalid("multiplier entries must be finite and nonnegative"));
        }
        let op_norm = multiplier.iter().copied().fold(0.0, f64::max);
        let hs_norm_h1_sq = multiplier
            .iter()
            .zip(grid.k_squared())
            .map(|(m, k2)| (1.0 + k2) * m * m)
            .sum();
        let active = (0..multiplier.len()).filter(|&j| multiplier[j] > 0.0).collect();
        Ok(Self {
            grid: grid.clone(),
            profile: None,
            multiplier,
            active,
            op_norm,
            hs_norm_h1_sq,
        })
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn profile(&self) -> Option<FilterProfile> {
        self.profile
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// `‖Φ‖_c`, the operator norm on L².
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// Squared Hilbert–Schmidt norm from L² into H¹, `Σ (1 + k²) φ̂²`.
    pub fn hs_norm_h1_sq(&self) -> f64 {
        self.hs_norm_h1_sq
    }

    /// Squared Hilbert–Schmidt norm from L² into L², `Σ φ̂²`.
    pub fn hs_norm_l2_sq(&self) -> f64 {
        self.multiplier.iter().map(|m| m * m).sum()
    }

    /// Convolution kernel `κ(z) = (1/2L) Σ φ̂_j e^{i k_j z}` on the grid
    /// offsets `z = x + L`, so that `(Φf)(x) = ∫ κ(x - y) f(y) dy`.
    pub fn kernel(&self) -> Vec<Complex64> {
        let n = self.grid.n_points() as f64;
        let mut buf: Vec<Complex64> = self.multiplier.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        self.grid.ifft(&mut buf);
        let s = n / (2.0 * self.grid.half_width());
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Hilbert–Schmidt norm into H¹ from real-space quadrature of the kernel
    /// and of its spectral derivative: `2L ∫ (|κ|² + |κ'|²) dz`.
    pub fn hs_norm_h1_sq_from_kernel(&self) -> f64 {
        let kappa = self.kernel();
        let dx = self.grid.spacing();
        let mut spec = kappa.clone();
        self.grid.fft(&mut spec);
        for (v, &k) in spec.iter_mut().zip(self.grid.wavenumbers()) {
            *v *= Complex64::new(0.0, k);
        }
        self.grid.ifft(&mut spec);
        let s: f64 = kappa
            .iter()
            .zip(&spec)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        2.0 * self.grid.half_width() * dx * s
    }

    /// Expected `∫_{window} |ΔW|²` for one increment of length `dt`:
    /// `dt · (2l / 2L) · 2 Σ φ̂²` (the covariance is stationary).
    pub fn windowed_trace(&self, dt: f64, l: f64) -> f64 {
        let l = l.min(self.grid.half_width());
        dt * (l / self.grid.half_width()) * 2.0 * self.hs_norm_l2_sq()
    }

    /// `Φ f`.
    pub fn apply(&self, f: &FieldState) -> Result<FieldState> {
        self.grid.check_same(f.grid())?;
        let mut spec = f.spectrum();
        for (v, &m) in spec.iter_mut().zip(&self.multiplier) {
            *v *= m;
        }
        Ok(FieldState::from_spectrum(self.grid.clone(), spec, f.time()))
    }

    /// Pseudo-inverse of `Φ`: divides retained modes and zeroes those with
    /// `φ̂ < rel_cutoff · ‖Φ‖_c`.
    pub fn apply_pinv(&self, f: &FieldState, rel_cutoff: f64) -> Result<PinvOutput> {
        self.grid.check_same(f.grid())?;
        if !(rel_cutoff > 0.0 && rel_cutoff < 1.0) {
            return Err(invalid(format!("pinv cutoff must be in (0,1), got {rel_cutoff}")));
        }
        let threshold = rel_cutoff * self.op_norm;
        let mut spec = f.spectrum();
        let mut total = 0.0;
        let mut dropped = 0.0;
        for (v, &m) in spec.iter_mut().zip(&self.multiplier) {
            let e = v.norm_sqr();
            total += e;
            if m >= threshold && m > 0.0 {
                *v /= m;
            } else {
                dropped += e;
                *v = Complex64::new(0.0, 0.0);
            }
        }
        let discarded_fraction = if total > 0.0 { dropped / total } else { 0.0 };
        Ok(PinvOutput {
            field: FieldState::from_spectrum(self.grid.clone(), spec, f.time()),
            discarded_fraction,
        })
    }

    /// [`apply_pinv`](Self::apply_pinv) that fails when too much energy lies
    /// outside the retained band.
    pub fn apply_pinv_checked(&self, f: &FieldState, rel_cutoff: f64, tolerance: f64) -> Result<PinvOutput> {
        let out = self.apply_pinv(f, rel_cutoff)?;
        if out.discarded_fraction > tolerance {
            return Err(Error::NotInRange { fraction: out.discarded_fraction, tolerance });
        }
        Ok(out)
    }

    /// Fails unless `φ̂ > 0` on every mode where `f` carries energy above
    /// `tolerance` (relative), the discrete stand-in for `ker Φ* = {0}`.
    pub fn assert_positive_on(&self, f: &FieldState, tolerance: f64) -> Result<()> {
        let spec = f.spectrum();
        let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let outside: f64 = spec
            .iter()
            .zip(&self.multiplier)
            .filter(|(_, &m)| m <= 0.0)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        if total > 0.0 && outside / total > tolerance {
            return Err(Error::Hypothesis(format!(
                "noise operator vanishes on modes carrying {:e} of the energy",
                outside / total
            )));
        }
        Ok(())
    }

    /// Adds `scale · Φ ΔW_c` for one increment of length `dt` to the spectrum
    /// `spec` (unnormalized FFT layout).
    pub(crate) fn add_increment_spectral(&self, spec: &mut [Complex64], dt: f64, scale: Complex64, rng: &mut NoiseStream) {
        let n = self.grid.n_points() as f64;
        // Physical field = (1/√2L) Σ φ̂ ξ e^{ikx}; in FFT layout that is n·φ̂ξ/√2L.
        let amp = n * dt.sqrt() / (2.0 * self.grid.half_width()).sqrt();
        for &j in &self.active {
            let re: f64 = rng.0.sample(StandardNormal);
            let im: f64 = rng.0.sample(StandardNormal);
            spec[j] += scale * Complex64::new(re, im) * (amp * self.multiplier[j]);
        }
    }

    /// One increment `Φ ΔW_c` over `dt`.
    pub fn sample_increment(&self, dt: f64, rng: &mut NoiseStream) -> Result<FieldState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        let mut spec = vec![Complex64::new(0.0, 0.0); self.grid.n_points()];
        self.add_increment_spectral(&mut spec, dt, Complex64::new(1.0, 0.0), rng);
        Ok(FieldState::from_spectrum(self.grid.clone(), spec, 0.0))
    }

    /// Writes `k, phi_hat` rows sorted by wavenumber.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,phi_hat")?;
        let mut rows: Vec<(f64, f64)> = self
            .grid
            .k_squared()
            .iter()
            .zip(self.grid.wavenumbers())
            .zip(&self.multiplier)
            .enumerate()
            .map(|(j, ((&k2, &k), &m))| {
                let k = if j == self.grid.n_points() / 2 { -k2.sqrt() } else { k };
                (k, m)
            })
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (k, m) in rows {
            writeln!(w, "{k},{m}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PinvOutput {
    pub field: FieldState,
    pub discarded_fraction: f64,
}

/// Independent Gaussian stream for one Monte Carlo sample.
///
/// Derived from `(master_seed, index)` with the ChaCha stream counter, so
/// distinct indices never share output and any sample can be regenerated
/// alone.
#[derive(Debug, Clone)]
pub struct NoiseStream(ChaCha8Rng);

impl NoiseStream {
    pub fn new(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        Self(rng)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }
}

/// `2π / (2L)`, spacing between consecutive wavenumbers.
pub fn mode_spacing(grid: &SpatialGrid) -> f64 {
    PI / grid.half_width()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{sech, windowed_momentum};

    fn grid() -> Arc<SpatialGrid> {
        SpatialGrid::new(256, 10.0 * PI).unwrap()
    }

    fn sech_field(g: &Arc<SpatialGrid>) -> FieldState {
        FieldState::from_fn(g.clone(), 0.0, |x| Complex64::new(sech(x), 0.0)).unwrap()
    }

    #[test]
    fn filter_construction() {
        let g = grid();
        let phi = NoiseOperator::make_filter(FilterProfile::near_identity(8.0), &g).unwrap();
        assert_eq!(phi.op_norm(), 1.0);
        assert!(phi.hs_norm_h1_sq().is_finite());
        assert!(phi.multiplier().iter().all(|&m| (0.0..=1.0).contains(&m)));
        let gauss = NoiseOperator::make_filter(FilterProfile::Gaussian { bandwidth: 2.0 }, &g).unwrap();
        assert_eq!(gauss.op_norm(), gauss.multiplier().iter().copied().fold(0.0, f64::max));
        assert!(matches!(
            NoiseOperator::make_filter(FilterProfile::BandIdeal { k_max: 20.0 }, &g),
            Err(Error::AboveNyquist { .. })
        ));
        assert!(NoiseOperator::make_filter(FilterProfile::Gaussian { bandwidth: -1.0 }, &g).is_err());
    }

    #[test]
    fn near_identity_residual_matches_spectral_tail() {
        let g = SpatialGrid::default_grid();
        let f = sech_field(&g);
        for &k_max in &[8.0, 12.0] {
            let phi = NoiseOperator::make_filter(FilterProfile::near_identity(k_max), &g).unwrap();
            let diff = phi.apply(&f).unwrap().l2_distance(&f).unwrap() / f.l2_norm();
            // Oracle: (1 - φ̂)² weighted tail of the exact transform π sech(πk/2).
            let dk = mode_spacing(&g);
            let mut tail = 0.0;
            let mut full = 0.0;
            for (&k2, &m) in g.k_squared().iter().zip(phi.multiplier()) {
                let fhat = PI * sech(PI * k2.sqrt() / 2.0);
                tail += (1.0 - m).powi(2) * fhat * fhat;
                full += fhat * fhat;
            }
            let oracle = (tail / full).sqrt();
            let _ = dk;
            assert!((diff - oracle).abs() <= 1e-3 * oracle + 1e-15, "k_max {k_max}: {diff} vs {oracle}");
            if k_max >= 12.0 {
                assert!(diff < 1e-8, "{diff}");
            }
        }
    }

    #[test]
    fn hs_norm_two_routes() {
        let g = grid();
        for profile in [
            FilterProfile::Gaussian { bandwidth: 1.5 },
            FilterProfile::near_identity(6.0),
            FilterProfile::BandIdeal { k_max: 4.0 },
        ] {
            let phi = NoiseOperator::make_filter(profile, &g).unwrap();
            let a = phi.hs_norm_h1_sq();
            let b = phi.hs_norm_h1_sq_from_kernel();
            assert!((a - b).abs() < 1e-10 * a, "{profile:?}: {a} vs {b}");
        }
    }

    #[test]
    fn zero_multiplier_gives_zero_increment() {
        let g = grid();
        let phi = NoiseOperator::from_multiplier(&g, vec![0.0; g.n_points()]).unwrap();
        let mut rng = NoiseStream::new(1, 0);
        let inc = phi.sample_increment(0.1, &mut rng).unwrap();
        assert!(inc.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn same_stream_same_field() {
        let g = grid();
        let phi = NoiseOperator::make_filter(FilterProfile::near_identity(5.0), &g).unwrap();
        let a = phi.sample_increment(0.01, &mut NoiseStream::new(9, 3)).unwrap();
        let b = phi.sample_increment(0.01, &mut NoiseStream::new(9, 3)).unwrap();
        assert_eq!(a.values(), b.values());
        let c = phi.sample_increment(0.01, &mut NoiseStream::new(9, 4)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn disjoint_streams_uncorrelated() {
        let g = SpatialGrid::new(64, 10.0).unwrap();
        let phi = NoiseOperator::make_filter(FilterProfile::near_identity(3.0), &g).unwrap();
        let n = 20_000;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let a = phi.sample_increment(1.0, &mut NoiseStream::new(5, 2 * i)).unwrap();
            let b = phi.sample_increment(1.0, &mut NoiseStream::new(5, 2 * i + 1)).unwrap();
            let (x, y) = (a.values()[32].re, b.values()[32].re);
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn increment_variance_matches_trace() {
        let g = SpatialGrid::new(64, 10.0).unwrap();
        let phi = NoiseOperator::make_filter(FilterProfile::Gaussian { bandwidth: 2.0 }, &g).unwrap();
        let dt = 1e-3;
        let l = 4.0;
        let n = 20_000;
        let mut rng = NoiseStream::new(11, 0);
        let samples: Vec<f64> = (0..n)
            .map(|_| windowed_momentum(&phi.sample_increment(dt, &mut rng).unwrap(), l).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        // The linear interpolant integrates the stationary variance exactly
        // only up to the O(dx²) cross-covariance of neighbours; the band is
        // smooth enough that this stays far below the standard error.
        let expected = phi.windowed_trace(dt, l);
        assert!((mean - expected).abs() < 3.0 * se + 1e-3 * expected, "{mean} vs {expected} (se {se})");
    }

    #[test]
    fn scaled_increments_have_dt_free_law() {
        let g = SpatialGrid::new(64, 10.0).unwrap();
        let phi = NoiseOperator::make_filter(FilterProfile::near_identity(3.0), &g).unwrap();
        let n = 4000;
        let draw = |dt: f64, seed: u64| -> Vec<f64> {
            let mut rng = NoiseStream::new(seed, 0);
            let mut v: Vec<f64> = (0..n)
                .map(|_| phi.sample_increment(dt, &mut rng).unwrap().values()[10].re / dt.sqrt())
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let a = draw(1e-2, 1);
        let b = draw(1e-3, 2);
        // Two-sample Kolmogorov–Smirnov statistic.
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        let crit = 1.63 * (2.0 / n as f64).sqrt(); // α = 0.01
        assert!(d < crit, "KS {d} >= {crit}");
    }

    #[test]
    fn linearity_and_norm_bound() {
        let g = grid();
        let phi = NoiseOperator::make_filter(FilterProfile::Gaussian { bandwidth: 1.0 }, &g).unwrap();
        let f = sech_field(&g);
        let h = FieldState::from_fn(g.clone(), 0.0, |x| Complex64::new(0.0, (-x * x).exp())).unwrap();
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let lhs = phi.apply(&f.combine(a, &h, b).unwrap()).unwrap();
        let rhs = phi.apply(&f).unwrap().combine(a, &phi.apply(&h).unwrap(), b).unwrap();
        assert!(lhs.l2_distance(&rhs).unwrap() < 1e-13);
        for field in [&f, &h] {
            assert!(phi.apply(field).unwrap().l2_norm() <= phi.op_norm() * field.l2_norm() + 1e-14);
        }
        // Tight on the arg-max mode (k = 0).
        let one = FieldState::from_fn(g.clone(), 0.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        let r = phi.apply(&one).unwrap().l2_norm() / one.l2_norm();
        assert!((r - phi.op_norm()).abs() < 1e-13);
    }

    #[test]
    fn pinv_identities() {
        let g = grid();
        let f = sech_field(&g);
        // Roll-off ends near 0.2 at Nyquist, so division stays well conditioned.
        let near = NoiseOperator::make_filter(FilterProfile::near_identity(11.0), &g).unwrap();
        let out = near.apply_pinv(&near.apply(&f).unwrap(), DEFAULT_PINV_CUTOFF).unwrap();
        let err = out.field.l2_distance(&f).unwrap();
        assert!(err < 1e-12, "{err}");

        // Band-limited f under near-identity: pinv is the identity.
        let band = FieldState::from_fn(g.clone(), 0.0, |x| Complex64::new((2.0 * x / 10.0).cos(), 0.0)).unwrap();
        let p = near.apply_pinv(&band, DEFAULT_PINV_CUTOFF).unwrap();
        assert!(p.field.l2_distance(&band).unwrap() < 1e-12 * band.l2_norm());
        assert_eq!(p.discarded_fraction, 0.0);
    }

    #[test]
    fn pinv_reports_spectral_tail() {
        let g = grid();
        let phi = NoiseOperator::make_filter(FilterProfile::Gaussian { bandwidth: 0.5 }, &g).unwrap();
        let f = sech_field(&g);
        let cutoff = 1e-6;
        let out = phi.apply_pinv(&f, cutoff).unwrap();
        // Oracle: energy of sech's transform beyond the cutoff wavenumber.
        let k_cut = (2.0 * 0.25 * (1.0 / cutoff).ln()).sqrt();
        let spec = f.spectrum();
        let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let tail: f64 = spec
            .iter()
            .zip(g.k_squared())
            .filter(|(_, &k2)| k2.sqrt() > k_cut)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        assert!((out.discarded_fraction - tail / total).abs() < 1e-15 + 1e-9 * tail / total);
        assert!(matches!(
            phi.apply_pinv_checked(&f, cutoff, 1e-12),
            Err(Error::NotInRange { .. })
        ));
        assert!(phi.apply_pinv(&f, 0.0).is_err());
    }

    #[test]
    fn positivity_check() {
        let g = grid();
        let f = sech_field(&g);
        let band = NoiseOperator::make_filter(FilterProfile::BandIdeal { k_max: 1.0 }, &g).unwrap();
        assert!(band.assert_positive_on(&f, 1e-10).is_err());
        let near = NoiseOperator::make_filter(FilterProfile::near_identity(8.0), &g).unwrap();
        assert!(near.assert_positive_on(&f, 1e-10).is_ok());
    }

    #[test]
    fn csv_dump_sorted() {
        let g = SpatialGrid::new(16, PI).unwrap();
        let phi = NoiseOperator::make_filter(FilterProfile::Gaussian { bandwidth: 2.0 }, &g).unwrap();
        let mut out = Vec::new();
        phi.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let ks: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(ks.len(), 16);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
    }
}
