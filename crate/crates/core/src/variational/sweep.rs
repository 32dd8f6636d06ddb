//! Exponent curves as functions of the threshold parameter `γ`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};

use super::amplitude::{amplitude_solve, AmplitudeCoefficients, AmplitudeMethod, AmplitudeProblem, AmplitudeSettings};
use super::bounds::{lower_bound_exponents, threshold, upper_bound_exponents, BoundQuery};

pub const SWEEP_HEADER: &str =
    "gamma,threshold,upper0,upper1,lower0_solparam,lower1_solparam,lower0_amp,lower1_amp,amp_status";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub threshold: f64,
    pub upper0: f64,
    pub upper1: f64,
    pub lower0_solparam: f64,
    pub lower1_solparam: f64,
    /// `None` when the amplitude problem did not converge.
    pub lower0_amp: Option<f64>,
    pub lower1_amp: Option<f64>,
    pub amp_status: String,
}

fn amp_exponent(p: Result<AmplitudeProblem>, settings: &AmplitudeSettings) -> std::result::Result<(f64, AmplitudeMethod), String> {
    let p = p.map_err(|e| e.to_string())?;
    amplitude_solve(&p, settings).map(|s| (-s.action, s.method)).map_err(|e| e.to_string())
}

fn status(m: AmplitudeMethod) -> &'static str {
    match m {
        AmplitudeMethod::Shooting => "shooting",
        AmplitudeMethod::Collocation => "collocation",
    }
}

/// One row per `γ` on a uniform grid of `[0, 1]`, solved in parallel.
pub fn gamma_sweep(
    horizon: f64,
    phi_op_norm: f64,
    n_points: usize,
    coefficients: &AmplitudeCoefficients,
    settings: &AmplitudeSettings,
) -> Result<Vec<SweepRow>> {
    if n_points < 2 {
        return Err(invalid(format!("a sweep needs at least 2 points, got {n_points}")));
    }
    BoundQuery::new(0.0, horizon, phi_op_norm)?;
    let rows = (0..n_points)
        .into_par_iter()
        .map(|j| {
            let gamma = j as f64 / (n_points - 1) as f64;
            let q = BoundQuery { gamma, horizon, phi_op_norm };
            let up = upper_bound_exponents(&q);
            let lo = lower_bound_exponents(&q);
            let a0 = amp_exponent(AmplitudeProblem::error0(*coefficients, gamma, horizon), settings);
            let a1 = amp_exponent(AmplitudeProblem::error1(*coefficients, gamma, horizon), settings);
            let amp_status = match (&a0, &a1) {
                (Ok((_, m0)), Ok((_, m1))) if m0 == m1 => status(*m0).to_string(),
                (Ok((_, m0)), Ok((_, m1))) => format!("{}/{}", status(*m0), status(*m1)),
                (Err(e), _) | (_, Err(e)) => format!("failed: {}", e.replace(',', ";")),
            };
            SweepRow {
                gamma,
                threshold: threshold(gamma),
                upper0: up.exp0,
                upper1: up.exp1,
                lower0_solparam: lo.exp0,
                lower1_solparam: lo.exp1,
                lower0_amp: a0.ok().map(|v| v.0),
                lower1_amp: a1.ok().map(|v| v.0),
                amp_status,
            }
        })
        .collect();
    Ok(rows)
}

/// Writes the sweep with an optional `#`-prefixed comment line first.
pub fn write_sweep_csv(rows: &[SweepRow], comment: Option<&str>, mut w: impl Write) -> Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{SWEEP_HEADER}")?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{:.12},{:.12},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}",
            r.gamma,
            r.threshold,
            r.upper0,
            r.upper1,
            r.lower0_solparam,
            r.lower1_solparam,
            cell(r.lower0_amp),
            cell(r.lower1_amp),
            r.amp_status
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_is_ordered_and_monotone() {
        let k = AmplitudeCoefficients::standard_soliton();
        let rows = gamma_sweep(10.0, 1.0, 11, &k, &AmplitudeSettings::default()).unwrap();
        assert_eq!(rows.len(), 11);
        for w in rows.windows(2) {
            assert!(w[1].upper0 >= w[0].upper0 && w[1].upper1 <= w[0].upper1);
            assert!(w[1].lower0_solparam >= w[0].lower0_solparam && w[1].lower1_solparam <= w[0].lower1_solparam);
        }
        for r in &rows {
            assert!(!r.amp_status.starts_with("failed"), "{}", r.amp_status);
            assert!(r.lower0_amp.unwrap() <= r.lower0_solparam + 1e-12, "γ={}", r.gamma);
            assert!(r.lower1_amp.unwrap() <= r.lower1_solparam + 1e-12, "γ={}", r.gamma);
        }
        let mut out = Vec::new();
        write_sweep_csv(&rows, Some("test"), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), SWEEP_HEADER);
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn needs_two_points() {
        let k = AmplitudeCoefficients::standard_soliton();
        assert!(gamma_sweep(10.0, 1.0, 1, &k, &AmplitudeSettings::default()).is_err());
    }
}
