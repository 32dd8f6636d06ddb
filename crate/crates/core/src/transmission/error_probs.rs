//! Monte Carlo estimates of the two transmission error probabilities.

use rayon::prelude::*;
use serde::Serialize;

use super::{DecisionRule, ErrorProbEstimate};
use crate::dynamics::{evolve, EvolveOptions, Forcing};
use crate::error::{invalid, Error, Result};
use crate::grid::{FieldState, ModelParams};
use crate::noise::{NoiseOperator, NoiseStream};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SentBit {
    /// Zero initial datum.
    Zero,
    /// Unit soliton.
    One,
}

impl SentBit {
    /// Sample `i` of bit `b` reads stream `2i + b`, so the two bits never
    /// share noise.
    pub fn stream_index(self, sample: usize) -> u64 {
        2 * sample as u64 + matches!(self, SentBit::One) as u64
    }
}

/// Everything a sample needs besides its stream.
#[derive(Debug, Clone)]
pub struct McSetup<'a> {
    pub params: ModelParams,
    pub phi: &'a NoiseOperator,
    pub eps: f64,
    pub horizon: f64,
    pub master_seed: u64,
    /// Integration options; `blowup_levels` should hold `R` for blow-up
    /// aware estimates.
    pub opts: EvolveOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub index: usize,
    /// Received power; `NaN` for unstable runs.
    pub windowed_momentum: f64,
    /// First crossing of the smallest tracked `H¹` level.
    pub t_cross: Option<f64>,
    /// The integrator produced non-finite values.
    pub unstable: bool,
}

fn run_sample(setup: &McSetup<'_>, rule: &DecisionRule, bit: SentBit, index: usize) -> Result<SampleOutcome> {
    let grid = setup.phi.grid();
    let u0 = match bit {
        SentBit::Zero => FieldState::zeros(grid.clone(), 0.0),
        SentBit::One => spectral::soliton(1.0, 0.0, grid)?,
    };
    let stream = NoiseStream::new(setup.master_seed, bit.stream_index(index));
    let forcing = Forcing::Noise { phi: setup.phi, eps: setup.eps, stream };
    match evolve(&u0, &setup.params, setup.horizon, forcing, &setup.opts) {
        Ok(traj) => Ok(SampleOutcome {
            index,
            windowed_momentum: rule.measure(traj.final_state())?,
            t_cross: traj.crossings().first().map(|c| c.t_cross),
            unstable: false,
        }),
        Err(Error::NonFinite { .. }) => Ok(SampleOutcome { index, windowed_momentum: f64::NAN, t_cross: None, unstable: true }),
        Err(e) => Err(e),
    }
}

/// Runs `n_samples` independent noisy transmissions of `bit`, in parallel,
/// ordered by sample index.
pub fn mc_error_samples(setup: &McSetup<'_>, rule: &DecisionRule, bit: SentBit, n_samples: usize) -> Result<Vec<SampleOutcome>> {
    if n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    if !(setup.eps >= 0.0 && setup.eps.is_finite()) {
        return Err(invalid(format!("noise intensity must be nonnegative, got {}", setup.eps)));
    }
    (0..n_samples).into_par_iter().map(|i| run_sample(setup, rule, bit, i)).collect()
}

/// Error frequency of `bit` among `outcomes`.
///
/// A sent 0 errs when the received power reaches the threshold, a sent 1
/// when it stays below. With `blowup_aware` the event is intersected with
/// `𝒯_R > T`. Unstable runs never count as errors and are reported
/// separately.
pub fn estimate(outcomes: &[SampleOutcome], rule: &DecisionRule, bit: SentBit, eps: f64, horizon: f64, blowup_aware: bool) -> ErrorProbEstimate {
    let mut hits = 0;
    let mut blowups = 0;
    let mut unstable = 0;
    for o in outcomes {
        if o.unstable {
            unstable += 1;
            continue;
        }
        let crossed = o.t_cross.is_some_and(|t| t <= horizon);
        blowups += crossed as usize;
        let wrong = match bit {
            SentBit::Zero => o.windowed_momentum >= rule.threshold,
            SentBit::One => o.windowed_momentum < rule.threshold,
        };
        if wrong && !(blowup_aware && crossed) {
            hits += 1;
        }
    }
    ErrorProbEstimate::from_counts(hits, outcomes.len(), eps, blowups, unstable)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorPair {
    pub est0: ErrorProbEstimate,
    pub est1: ErrorProbEstimate,
    pub samples0: Vec<SampleOutcome>,
    pub samples1: Vec<SampleOutcome>,
}

impl ErrorPair {
    pub fn risk(&self) -> f64 {
        super::risk(&self.est0, &self.est1)
    }
}

/// Both error probabilities from `n_samples` runs each. Blow-up aware
/// estimates need `R`, which is added to the tracked levels.
pub fn mc_error_probs(
    rule: &DecisionRule,
    setup: &McSetup<'_>,
    n_samples: usize,
    blowup_aware: bool,
    level: Option<f64>,
) -> Result<ErrorPair> {
    let mut setup = setup.clone();
    if blowup_aware {
        let r = level.ok_or_else(|| invalid("blow-up aware estimates need a level R"))?;
        setup.opts.blowup_levels = vec![r];
    } else if let Some(r) = level {
        setup.opts.blowup_levels = vec![r];
    }
    let samples0 = mc_error_samples(&setup, rule, SentBit::Zero, n_samples)?;
    let samples1 = mc_error_samples(&setup, rule, SentBit::One, n_samples)?;
    Ok(ErrorPair {
        est0: estimate(&samples0, rule, SentBit::Zero, setup.eps, setup.horizon, blowup_aware),
        est1: estimate(&samples1, rule, SentBit::One, setup.eps, setup.horizon, blowup_aware),
        samples0,
        samples1,
    })
}
