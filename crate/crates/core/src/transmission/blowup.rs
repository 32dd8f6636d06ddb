//! Approximate blow-up times `𝒯_R` under noise and the interval bounds
//! built from their exponents.

use rayon::prelude::*;
use serde::Serialize;

use super::Proportion;
use crate::dynamics::{evolve, EvolveOptions, Forcing};
use crate::error::{invalid, Error, Result};
use crate::grid::{FieldState, ModelParams};
use crate::noise::{NoiseOperator, NoiseStream};
use crate::spectral;

#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    pub level: f64,
    /// `𝒯_R > T`.
    pub survive: Proportion,
    /// `𝒯_R ≤ T`.
    pub cross_by_t: Proportion,
    /// `𝒯_R ≤ S`.
    pub cross_by_s: Proportion,
    /// `S < 𝒯_R ≤ T`, counted on the same samples.
    pub between: Proportion,
    pub t_cross: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupTimeRecord {
    pub s: f64,
    pub t: f64,
    pub eps: f64,
    pub n_samples: usize,
    /// Runs that produced non-finite values before reaching any level.
    pub n_unstable: usize,
    /// One record per level, in increasing order.
    pub levels: Vec<LevelRecord>,
}

/// Crossing statistics of several `H¹` levels from one set of noisy runs
/// on `[0, T]`.
#[allow(clippy::too_many_arguments)]
pub fn mc_blowup_time(
    params: &ModelParams,
    phi: &NoiseOperator,
    u0: &FieldState,
    eps: f64,
    levels: &[f64],
    s: f64,
    t: f64,
    n_samples: usize,
    master_seed: u64,
    opts: &EvolveOptions,
) -> Result<BlowupTimeRecord> {
    if params.sigma < 2.0 {
        return Err(Error::Hypothesis(format!(
            "blow-up needs σd ≥ 2 in one dimension, got σ = {}",
            params.sigma
        )));
    }
    if levels.is_empty() || n_samples == 0 {
        return Err(invalid("need at least one level and one sample"));
    }
    if !(0.0 <= s && s < t) {
        return Err(invalid(format!("need 0 ≤ S < T, got S = {s}, T = {t}")));
    }
    let start = spectral::h1_norm(u0);
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    if !(levels[0] > start) {
        return Err(invalid(format!("level {} not above the initial H¹ norm {start}", levels[0])));
    }
    let opts = EvolveOptions { blowup_levels: levels.clone(), ..opts.clone() };
    let runs: Vec<Option<Vec<Option<f64>>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let stream = NoiseStream::new(master_seed, i as u64);
            match evolve(u0, params, t, Forcing::Noise { phi, eps, stream }, &opts) {
                Ok(tr) => Ok(Some(levels.iter().map(|&r| tr.crossing_time(r)).collect())),
                Err(Error::NonFinite { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let n_unstable = runs.iter().filter(|r| r.is_none()).count();
    let records = levels
        .iter()
        .enumerate()
        .map(|(j, &level)| {
            // Unstable runs have left every bounded set.
            let t_cross: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().map_or(Some(f64::NAN), |v| v[j])).collect();
            let by = |limit: f64| t_cross.iter().filter(|c| c.is_some_and(|x| x.is_nan() || x <= limit)).count();
            let (cs, ct) = (by(s), by(t));
            LevelRecord {
                level,
                survive: Proportion::new(n_samples - ct, n_samples),
                cross_by_t: Proportion::new(ct, n_samples),
                cross_by_s: Proportion::new(cs, n_samples),
                between: Proportion::new(ct - cs, n_samples),
                t_cross,
            }
        })
        .collect();
    Ok(BlowupTimeRecord { s, t, eps, n_samples, n_unstable, levels: records })
}

/// Exponents entering the interval bounds, on the large-deviation scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum IntervalExponents {
    /// `S, T < 𝒯_R(u_d)`: costs `U` of reaching level `R` (or `R+α`)
    /// within `[0, S]` or `[0, T]`.
    BeforeCrossing { u_s: f64, u_t: f64, u_s_refined: f64, u_t_refined: f64 },
    /// `S, T > 𝒯_R(u_d)`: costs `L` of staying below level `R` (or `R+α`)
    /// past `S` or `T`.
    AfterCrossing { l_s: f64, l_t: f64, l_s_refined: f64, l_t_refined: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalBounds {
    pub lower: f64,
    pub upper: f64,
    /// The lower bound's second factor is not positive.
    pub lower_degenerate: bool,
}

// e^{-a/ε}(1 - e^{-b/ε}).
fn factor(a: f64, b: f64, eps: f64) -> f64 {
    (-a / eps).exp() * -(-b / eps).exp_m1()
}

/// Bounds on `P(S < 𝒯_R ≤ T)` valid for small `ε` and any `c > 0`.
pub fn interval_probability_bounds(x: IntervalExponents, eps: f64, c: f64) -> Result<IntervalBounds> {
    if !(eps > 0.0) || !(c >= 0.0) {
        return Err(invalid(format!("need ε > 0 and c ≥ 0, got ε = {eps}, c = {c}")));
    }
    let violated = |what: &str| Err(Error::Hypothesis(format!("exponent ordering violated: {what}")));
    let (lower_args, upper_args) = match x {
        IntervalExponents::BeforeCrossing { u_s, u_t, u_s_refined, u_t_refined } => {
            if !(u_s >= u_t) {
                return violated("U_R^[0,S] ≥ U_R^[0,T]");
            }
            if !(u_t_refined >= u_t && u_s_refined >= u_s) {
                return violated("inf_α U_{R+α} ≥ U_R");
            }
            if !(u_s_refined > u_t) {
                return violated("inf_α U_{R+α}^[0,S] > U_R^[0,T]");
            }
            ((u_t_refined + c, u_s - u_t_refined), (u_t - c, u_s_refined - u_t))
        }
        IntervalExponents::AfterCrossing { l_s, l_t, l_s_refined, l_t_refined } => {
            if !(l_t >= l_s) {
                return violated("L_R^(T,∞) ≥ L_R^(S,∞)");
            }
            if !(l_s_refined <= l_s && l_t_refined <= l_t) {
                return violated("sup_α L_{R+α} ≤ L_R");
            }
            if !(l_t > l_s_refined) {
                return violated("L_R^(T,∞) > sup_α L_{R+α}^(S,∞)");
            }
            ((l_s + c, l_t_refined - l_s), (l_s_refined - c, l_t - l_s_refined))
        }
    };
    let lower_degenerate = !(lower_args.1 > 0.0);
    Ok(IntervalBounds {
        lower: if lower_degenerate { 0.0 } else { factor(lower_args.0, lower_args.1, eps) },
        upper: factor(upper_args.0, upper_args.1, eps),
        lower_degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::noise::FilterProfile;
    use std::f64::consts::PI;

    #[test]
    fn interval_bounds_closed_form() {
        let x = IntervalExponents::BeforeCrossing { u_s: 3.0, u_t: 1.0, u_s_refined: 3.5, u_t_refined: 1.5 };
        let b = interval_probability_bounds(x, 0.5, 0.1).unwrap();
        let lower = (-(1.5 + 0.1) / 0.5f64).exp() * (1.0 - (-(3.0 - 1.5) / 0.5f64).exp());
        let upper = (-(1.0 - 0.1) / 0.5f64).exp() * (1.0 - (-(3.5 - 1.0) / 0.5f64).exp());
        assert!((b.lower - lower).abs() < 1e-15 && (b.upper - upper).abs() < 1e-15);
        assert!(b.lower < b.upper);
        // Small ε: ε log of both bounds tends to the leading exponents.
        let b = interval_probability_bounds(x, 1e-2, 0.0).unwrap();
        assert!((1e-2 * b.lower.ln() + 1.5).abs() < 1e-12);
        assert!((1e-2 * b.upper.ln() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_bounds_after_crossing() {
        let x = IntervalExponents::AfterCrossing { l_s: 1.0, l_t: 2.0, l_s_refined: 0.8, l_t_refined: 1.6 };
        let b = interval_probability_bounds(x, 0.2, 0.05).unwrap();
        let lower = (-(1.0 + 0.05) / 0.2f64).exp() * (1.0 - (-(1.6 - 1.0) / 0.2f64).exp());
        let upper = (-(0.8 - 0.05) / 0.2f64).exp() * (1.0 - (-(2.0 - 0.8) / 0.2f64).exp());
        assert!((b.lower - lower).abs() < 1e-15 && (b.upper - upper).abs() < 1e-15);
    }

    #[test]
    fn interval_bounds_degenerate_and_invalid() {
        let x = IntervalExponents::BeforeCrossing { u_s: 1.5, u_t: 1.0, u_s_refined: 2.0, u_t_refined: 1.5 };
        let b = interval_probability_bounds(x, 0.1, 0.0).unwrap();
        assert!(b.lower_degenerate);
        assert_eq!(b.lower, 0.0);
        let bad = IntervalExponents::BeforeCrossing { u_s: 0.5, u_t: 1.0, u_s_refined: 2.0, u_t_refined: 1.5 };
        assert!(matches!(interval_probability_bounds(bad, 0.1, 0.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn blowup_time_statistics() {
        let g = SpatialGrid::new(2048, 4.0 * PI).unwrap();
        let params = ModelParams::new(2.0, 1.0).unwrap();
        let u0 = FieldState::from_fn(g.clone(), 0.0, |x| num_complex::Complex64::new(1.2 * 2f64.sqrt() * spectral::sech(x), 0.0)).unwrap();
        let phi = NoiseOperator::make_filter(FilterProfile::Gaussian { bandwidth: 1.0 }, &g).unwrap();
        let opts = EvolveOptions { dt: 1e-3, output_every: usize::MAX, adaptive: Some(Default::default()), ..EvolveOptions::default() };
        let levels = [6.0, 10.0];
        let det = mc_blowup_time(&params, &phi, &u0, 0.0, &levels, 0.05, 0.3, 1, 0, &opts).unwrap();
        let tc = det.levels[1].t_cross[0].unwrap();
        assert!(tc < 0.3);
        assert_eq!(det.levels[1].cross_by_t.p_hat, 1.0);
        let rec = mc_blowup_time(&params, &phi, &u0, 1e-3, &levels, tc - 0.01, 0.3, 4, 11, &opts).unwrap();
        for l in &rec.levels {
            assert_eq!(l.between.count, l.cross_by_t.count - l.cross_by_s.count);
            assert_eq!(l.survive.count + l.cross_by_t.count, rec.n_samples);
        }
        // Lower levels are reached first.
        assert!(rec.levels[0].survive.count <= rec.levels[1].survive.count);
        assert!(mc_blowup_time(&ModelParams::cubic_focusing(), &phi, &u0, 0.0, &levels, 0.0, 1.0, 1, 0, &opts).is_err());
        assert!(mc_blowup_time(&params, &phi, &u0, 0.0, &[0.1], 0.0, 1.0, 1, 0, &opts).is_err());
    }
}
