//! Empirical `ε log p̂` against the closed-form exponents.

use std::io::Write;

use serde::Serialize;

use super::ErrorProbEstimate;
use crate::error::{invalid, Result};
use crate::variational::{lower_bound_exponents, risk_optimal_gamma_lower, risk_optimal_gamma_upper, upper_bound_exponents, BoundQuery, ExponentPair};

/// `[lower - slack, upper + slack]` with `slack = fraction · (upper - lower)`.
pub fn envelope(lower: f64, upper: f64, slack_fraction: f64) -> (f64, f64) {
    let slack = slack_fraction * (upper - lower).abs();
    (lower.min(upper) - slack, lower.max(upper) + slack)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub eps: f64,
    pub est0: ErrorProbEstimate,
    pub est1: ErrorProbEstimate,
    /// `max(p̂0, p̂1)`.
    pub risk_hat: f64,
}

/// Least-squares line `ε log p̂ ≈ intercept + slope · ε` over uncensored rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub intercept: f64,
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub query: BoundQueryEcho,
    pub upper: ExponentPair,
    pub lower: ExponentPair,
    /// Upper and lower risk exponents at their optimal thresholds.
    pub upper_risk_at_optimum: (f64, f64),
    pub lower_risk_at_optimum: (f64, f64),
    pub rows: Vec<ReportRow>,
    pub extrapolation0: Option<Extrapolation>,
    pub extrapolation1: Option<Extrapolation>,
    /// `ε log p̂1` did not decrease with `ε` over the uncensored rows.
    pub monotonicity_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQueryEcho {
    pub gamma: f64,
    pub horizon: f64,
    pub phi_op_norm: f64,
}

fn fit(points: &[(f64, f64)]) -> Option<Extrapolation> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some(Extrapolation { intercept: my - slope * mx, slope, points: points.len() })
}

/// Rows sorted by `ε`, bound lines at the query and at the risk-optimal
/// thresholds, and linear extrapolations toward `ε = 0`.
pub fn compare_report(q: &BoundQuery, estimates: &[(ErrorProbEstimate, ErrorProbEstimate)]) -> Result<CompareReport> {
    if estimates.len() < 2 {
        return Err(invalid("a comparison report needs at least two noise levels"));
    }
    let mut rows: Vec<ReportRow> = estimates
        .iter()
        .map(|(e0, e1)| ReportRow { eps: e0.eps, est0: *e0, est1: *e1, risk_hat: super::risk(e0, e1) })
        .collect();
    rows.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let pts = |f: fn(&ReportRow) -> &ErrorProbEstimate| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| f(r).eps_log_p.map(|v| (r.eps, v))).collect()
    };
    let p0 = pts(|r| &r.est0);
    let p1 = pts(|r| &r.est1);
    let monotonicity_flag = p1.windows(2).any(|w| w[1].1 > w[0].1);
    let at = |g: f64| BoundQuery { gamma: g, ..*q };
    let gu = risk_optimal_gamma_upper();
    let gl = risk_optimal_gamma_lower();
    Ok(CompareReport {
        query: BoundQueryEcho { gamma: q.gamma, horizon: q.horizon, phi_op_norm: q.phi_op_norm },
        upper: upper_bound_exponents(q),
        lower: lower_bound_exponents(q),
        upper_risk_at_optimum: (gu, upper_bound_exponents(&at(gu)).risk()),
        lower_risk_at_optimum: (gl, lower_bound_exponents(&at(gl)).risk()),
        extrapolation0: fit(&p0),
        extrapolation1: fit(&p1),
        monotonicity_flag,
        rows,
    })
}

pub const REPORT_HEADER: &str = "eps,p0,p0_lo,p0_hi,eps_log_p0,censored0,p1,p1_lo,p1_hi,eps_log_p1,censored1,risk,upper0,upper1,lower0,lower1";

impl CompareReport {
    pub fn write_csv(&self, comment: Option<&str>, mut w: impl Write) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.6e},{:.6e},{:.6e},{:.8e},{},{:.6e},{:.6e},{:.6e},{:.8e},{},{:.6e},{:.8e},{:.8e},{:.8e},{:.8e}",
                r.eps,
                r.est0.p_hat,
                r.est0.wilson_ci.0,
                r.est0.wilson_ci.1,
                r.est0.log_scale_value(),
                r.est0.is_censored() as u8,
                r.est1.p_hat,
                r.est1.wilson_ci.0,
                r.est1.wilson_ci.1,
                r.est1.log_scale_value(),
                r.est1.is_censored() as u8,
                r.risk_hat,
                self.upper.exp0,
                self.upper.exp1,
                self.lower.exp0,
                self.lower.exp1
            )?;
        }
        Ok(())
    }
}
