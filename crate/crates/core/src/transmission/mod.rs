//! Soliton transmission: decision rule, Monte Carlo error probabilities,
//! blow-up times and the position shift.

pub mod blowup;
pub mod error_probs;
pub mod report;
pub mod shift;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{FieldState, SpatialGrid};
use crate::spectral;
use crate::variational::threshold;

pub use blowup::{interval_probability_bounds, mc_blowup_time, BlowupTimeRecord, IntervalBounds, IntervalExponents, LevelRecord};
pub use error_probs::{estimate, mc_error_probs, mc_error_samples, ErrorPair, McSetup, SampleOutcome, SentBit};
pub use report::{compare_report, envelope, CompareReport, Extrapolation, ReportRow, REPORT_HEADER};
pub use shift::{gadget_rate, mc_shift_tails, GadgetPath, GadgetRate, ShiftTailRow, ShiftTailTable};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Reads a 1 when the power received in `[-l, l]` reaches `4(1-γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionRule {
    pub gamma: f64,
    pub window_l: f64,
    pub threshold: f64,
}

impl DecisionRule {
    pub fn new(gamma: f64, window_l: f64, grid: &SpatialGrid) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if !(window_l > 0.0 && window_l <= grid.half_width()) {
            return Err(invalid(format!("window half-length {window_l} outside (0, {}]", grid.half_width())));
        }
        Ok(Self { gamma, window_l, threshold: threshold(gamma) })
    }

    pub fn measure(&self, u: &FieldState) -> Result<f64> {
        spectral::windowed_momentum(u, self.window_l)
    }

    /// `true` when the received field is read as a 1.
    pub fn decide(&self, u: &FieldState) -> Result<bool> {
        Ok(self.measure(u)? >= self.threshold)
    }

    /// The window must capture more than `4(1-γ0/2)` of both the sent
    /// soliton and the noiseless received one.
    pub fn check_window(&self, sent: &FieldState, received: &FieldState, gamma0: f64) -> Result<()> {
        let need = 4.0 * (1.0 - gamma0 / 2.0);
        for (what, u) in [("sent", sent), ("received", received)] {
            let m = self.measure(u)?;
            if !(m > need) {
                return Err(Error::Hypothesis(format!(
                    "window [-{l}, {l}] holds {m} of the {what} soliton, needs more than {need}",
                    l = self.window_l
                )));
            }
        }
        Ok(())
    }

    /// Sent and noiseless received fields of the unit soliton at `horizon`.
    pub fn reference_fields(grid: &Arc<SpatialGrid>, horizon: f64) -> Result<(FieldState, FieldState)> {
        Ok((spectral::soliton(1.0, 0.0, grid)?, spectral::soliton(1.0, horizon, grid)?))
    }
}

/// Empirical frequency with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub count: usize,
    pub n: usize,
    pub p_hat: f64,
    pub ci: (f64, f64),
}

impl Proportion {
    pub fn new(count: usize, n: usize) -> Self {
        let p_hat = if n == 0 { f64::NAN } else { count as f64 / n as f64 };
        Self { count, n, p_hat, ci: wilson(count, n, Z95) }
    }

    pub fn standard_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.n as f64).sqrt()
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo.min(p), hi.max(p))
}

/// Error probability estimate on the `ε log p` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorProbEstimate {
    pub successes: usize,
    pub n_samples: usize,
    pub p_hat: f64,
    pub wilson_ci: (f64, f64),
    pub eps: f64,
    /// `ε log p̂`; `None` when no sample hit the event.
    pub eps_log_p: Option<f64>,
    /// `ε log` of the Wilson bounds (the lower end is `-∞` at zero count).
    pub eps_log_p_ci: (f64, f64),
    /// `-ε log n`, reported in place of `eps_log_p` at zero count.
    pub censored_at: Option<f64>,
    pub n_blowups: usize,
    pub n_unstable: usize,
}

impl ErrorProbEstimate {
    pub fn from_counts(successes: usize, n_samples: usize, eps: f64, n_blowups: usize, n_unstable: usize) -> Self {
        let prop = Proportion::new(successes, n_samples);
        let scale = |p: f64| if p > 0.0 { eps * p.ln() } else { f64::NEG_INFINITY };
        let zero = successes == 0;
        Self {
            successes,
            n_samples,
            p_hat: prop.p_hat,
            wilson_ci: prop.ci,
            eps,
            eps_log_p: (!zero).then(|| eps * prop.p_hat.ln()),
            eps_log_p_ci: (scale(prop.ci.0), scale(prop.ci.1)),
            censored_at: zero.then(|| -eps * (n_samples as f64).ln()),
            n_blowups,
            n_unstable,
        }
    }

    /// `eps_log_p`, or the censoring bound at zero count.
    pub fn log_scale_value(&self) -> f64 {
        self.eps_log_p.or(self.censored_at).unwrap_or(f64::NAN)
    }

    pub fn is_censored(&self) -> bool {
        self.censored_at.is_some()
    }

    pub fn standard_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.n_samples as f64).sqrt()
    }
}

/// `max(p0, p1)`.
pub fn risk(est0: &ErrorProbEstimate, est1: &ErrorProbEstimate) -> f64 {
    est0.p_hat.max(est1.p_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wilson_reference_values() {
        // 10/100 at 95%: (0.0552, 0.1744).
        let (lo, hi) = wilson(10, 100, Z95);
        assert!((lo - 0.055_229).abs() < 1e-5 && (hi - 0.174_366).abs() < 1e-5, "{lo} {hi}");
        let (lo, hi) = wilson(0, 50, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.071_348).abs() < 1e-5, "{hi}");
        assert_eq!(wilson(7, 7, Z95).1, 1.0);
    }

    #[test]
    fn censoring_at_zero_count() {
        let e = ErrorProbEstimate::from_counts(0, 1000, 0.01, 0, 0);
        assert!(e.is_censored());
        assert_eq!(e.eps_log_p, None);
        assert!((e.log_scale_value() + 0.01 * 1000f64.ln()).abs() < 1e-15);
        let e = ErrorProbEstimate::from_counts(3, 1000, 0.01, 0, 0);
        assert!((e.eps_log_p.unwrap() - 0.01 * 0.003f64.ln()).abs() < 1e-15);
        assert!(e.eps_log_p_ci.0 <= e.eps_log_p.unwrap() && e.eps_log_p.unwrap() <= e.eps_log_p_ci.1);
    }

    #[test]
    fn rule_validation_and_window() {
        let g = SpatialGrid::default_grid();
        assert!(DecisionRule::new(1.2, 5.0, &g).is_err());
        assert!(DecisionRule::new(0.5, 100.0, &g).is_err());
        let r = DecisionRule::new(0.5, 5.0, &g).unwrap();
        assert_eq!(r.threshold, 2.0);
        let (s, d) = DecisionRule::reference_fields(&g, 2.0).unwrap();
        r.check_window(&s, &d, 0.5).unwrap();
        let narrow = DecisionRule::new(0.5, 0.3, &g).unwrap();
        assert!(matches!(narrow.check_window(&s, &d, 0.5), Err(Error::Hypothesis(_))));
        assert!(r.decide(&s).unwrap());
        assert!(!r.decide(&FieldState::zeros(g.clone(), 0.0)).unwrap());
    }

    proptest! {
        #[test]
        fn wilson_contains_point_estimate(n in 1usize..5000, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as usize;
            let (lo, hi) = wilson(k, n, Z95);
            let p = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
    }
}
