//! One adapter per subcommand: build inputs from the config, call the core,
//! write outputs.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use snls_core::dynamics::{self, evolve, extract_control_from_sampler, rate_functional, AdaptiveStep, EvolveOptions, Forcing, PinvSettings};
use snls_core::transmission::{
    compare_report, gadget_rate, mc_blowup_time, mc_error_probs, mc_shift_tails, DecisionRule, ErrorProbEstimate, McSetup, SampleOutcome,
};
use snls_core::variational::{
    amplitude_solve, full_param_solve, gamma_sweep, lower_bound_exponents, risk_optimal_gamma_lower, risk_optimal_gamma_upper,
    soliton_param_solution, upper_bound_exponents, write_sweep_csv, AmplitudeCoefficients, AmplitudeProblem, AmplitudeSettings, BoundQuery,
    FullParamSettings, PathKind,
};
use snls_core::{io, spectral, FieldState, ModelParams, NoiseOperator, NoiseStream, SpatialGrid};

use crate::config::{Datum, RunConfig};
use crate::output::Run;
use crate::CliError;

type Out = Result<(), CliError>;

fn grid(cfg: &RunConfig) -> Result<Arc<SpatialGrid>, CliError> {
    let g = cfg.grid();
    Ok(SpatialGrid::new(g.n_points, g.half_width)?)
}

fn params(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(cfg.sigma(), cfg.lambda)?)
}

fn phi(cfg: &RunConfig, grid: &Arc<SpatialGrid>) -> Result<NoiseOperator, CliError> {
    Ok(NoiseOperator::make_filter(cfg.phi, grid)?)
}

fn evolve_options(cfg: &RunConfig, output_every: usize) -> EvolveOptions {
    EvolveOptions {
        output_every,
        adaptive: cfg.adaptive.unwrap_or(false).then(AdaptiveStep::default),
        ..EvolveOptions::with_dt(cfg.dt())
    }
}

fn datum(cfg: &RunConfig, grid: &Arc<SpatialGrid>) -> Result<FieldState, CliError> {
    Ok(match cfg.datum() {
        Datum::Soliton => spectral::soliton(1.0, 0.0, grid)?,
        Datum::Null => FieldState::zeros(grid.clone(), 0.0),
        Datum::Blowup => {
            let c = cfg.datum_scale * 2f64.sqrt();
            FieldState::from_fn(grid.clone(), 0.0, |x| Complex64::new(c / x.cosh(), 0.0))?
        }
        Datum::Gadget => return Err(CliError::config("the gadget datum only applies to `rate`")),
    })
}

fn soliton_kind(cfg: &RunConfig) -> Result<PathKind, CliError> {
    match (cfg.datum(), cfg.branch) {
        (Datum::Null, _) => Ok(PathKind::NullDatum),
        (Datum::Soliton, 1) => Ok(PathKind::SolitonDatum1),
        (Datum::Soliton, 2) => Ok(PathKind::SolitonDatum2),
        (Datum::Soliton, b) => Err(CliError::config(format!("branch must be 1 or 2, got {b}"))),
        (d, _) => Err(CliError::config(format!("soliton-parameter paths start from the soliton or null datum, got {d:?}"))),
    }
}

pub fn soliton_check(run: &mut Run) -> Out {
    let cfg = &run.cfg;
    let r = dynamics::soliton_check(&grid(cfg)?, cfg.dt(), cfg.horizon(), cfg.coarse_dt)?;
    run.write_json("soliton_check.json", &r)?;
    let verdict = if r.passed { "PASS" } else { "FAIL" };
    println!(
        "{verdict} max_rel_l2_error={:.3e} mass_drift={:.3e} hamiltonian_drift={:.3e} order_ratio={:.4}",
        r.max_rel_l2_error, r.mass_drift, r.hamiltonian_drift, r.order_ratio
    );
    if !r.passed {
        run.fail(CliError::new("check-failed", "soliton check outside tolerance"));
    }
    Ok(())
}

pub fn simulate(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let g = grid(&cfg)?;
    let p = params(&cfg)?;
    let u0 = datum(&cfg, &g)?;
    let mut opts = evolve_options(&cfg, cfg.output_every);
    if cfg.datum() == Datum::Blowup {
        opts.blowup_levels = cfg.levels.clone();
    }
    let op;
    let forcing = if cfg.eps > 0.0 {
        op = phi(&cfg, &g)?;
        Forcing::Noise { phi: &op, eps: cfg.eps, stream: NoiseStream::new(cfg.master_seed, 0) }
    } else {
        Forcing::None
    };
    let tr = evolve(&u0, &p, cfg.horizon(), forcing, &opts)?;
    let comment = run.comment();
    let mut w = run.create("trajectory.csv")?;
    tr.write_csv(&mut w, &p, cfg.window_l, Some(&comment))?;
    w.flush()?;
    let mut w = run.create_csv("final_field.csv")?;
    io::write_field_csv(tr.final_state(), &mut w)?;
    w.flush()?;
    let mut w = run.create("final_field.bin")?;
    io::write_field_binary(tr.final_state(), &mut w)?;
    w.flush()?;
    let end = tr.final_state();
    println!("t_end={} steps={} mass_sq={:.12e}", end.time(), tr.steps(), spectral::mass_sq(end));
    for c in tr.crossings() {
        println!("level={} t_cross={:.6}", c.level, c.t_cross);
    }
    Ok(())
}

pub fn bounds(run: &mut Run) -> Out {
    let cfg = &run.cfg;
    let q = BoundQuery::new(cfg.gamma, cfg.horizon(), cfg.phi_norm)?;
    let up = upper_bound_exponents(&q);
    let lo = lower_bound_exponents(&q);
    #[derive(Serialize)]
    struct Summary {
        query: BoundQuery,
        upper: snls_core::variational::ExponentPair,
        lower: snls_core::variational::ExponentPair,
        upper_risk: f64,
        lower_risk: f64,
        risk_optimal_gamma_upper: f64,
        risk_optimal_gamma_lower: f64,
    }
    let s = Summary {
        query: q,
        upper: up,
        lower: lo,
        upper_risk: up.risk(),
        lower_risk: lo.risk(),
        risk_optimal_gamma_upper: risk_optimal_gamma_upper(),
        risk_optimal_gamma_lower: risk_optimal_gamma_lower(),
    };
    let mut w = run.create_csv("bounds.csv")?;
    writeln!(w, "kind,gamma,T,phi_norm,exp0,exp1,max")?;
    for (kind, e) in [("upper", up), ("lower", lo)] {
        writeln!(w, "{kind},{},{},{},{:.15e},{:.15e},{:.15e}", q.gamma, q.horizon, q.phi_op_norm, e.exp0, e.exp1, e.risk())?;
    }
    w.flush()?;
    run.write_json("bounds.json", &s)?;
    println!("upper exp0={:.12} exp1={:.12} max={:.12}", up.exp0, up.exp1, up.risk());
    println!("lower exp0={:.12} exp1={:.12} max={:.12}", lo.exp0, lo.exp1, lo.risk());
    Ok(())
}

pub fn cov_soliton(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let kind = soliton_kind(&cfg)?;
    let path = soliton_param_solution(kind, cfg.gamma, cfg.horizon())?;
    let action = path.action()?;
    let mut w = run.create_csv("cov_soliton.csv")?;
    writeln!(w, "t,eta,eta_prime,lagrangian")?;
    let n = cfg.mesh_n.max(1);
    for j in 0..=n {
        let t = cfg.horizon() * j as f64 / n as f64;
        writeln!(w, "{t},{:.15e},{:.15e},{:.15e}", path.eta(t), path.eta_prime(t), path.lagrangian(t))?;
    }
    w.flush()?;
    #[derive(Serialize)]
    struct Summary {
        kind: PathKind,
        gamma: f64,
        horizon: f64,
        coefficients: [f64; 3],
        action_closed_form: f64,
        action_quadrature: f64,
        exponent: f64,
        el_residual_poly: [f64; 3],
    }
    run.write_json(
        "cov_soliton.json",
        &Summary {
            kind,
            gamma: path.gamma,
            horizon: path.horizon,
            coefficients: [path.a, path.b, path.c],
            action_closed_form: action.closed_form,
            action_quadrature: action.quadrature,
            exponent: -action.closed_form,
            el_residual_poly: path.el_residual_poly(),
        },
    )?;
    println!("action closed_form={:.12} quadrature={:.12}", action.closed_form, action.quadrature);
    println!("exponent={:.12}", -action.closed_form);
    Ok(())
}

fn amplitude_coefficients(cfg: &RunConfig) -> Result<AmplitudeCoefficients, CliError> {
    let g = grid(cfg)?;
    Ok(AmplitudeCoefficients::from_datum(&spectral::soliton(1.0, 0.0, &g)?, &params(cfg)?)?)
}

pub fn cov_amplitude(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let coeffs = amplitude_coefficients(&cfg)?;
    let problem = match cfg.datum() {
        Datum::Null => AmplitudeProblem::error0(coeffs, cfg.gamma, cfg.horizon())?,
        Datum::Soliton => AmplitudeProblem::error1(coeffs, cfg.gamma, cfg.horizon())?,
        d => return Err(CliError::config(format!("amplitude paths start from the soliton or null datum, got {d:?}"))),
    };
    let settings = AmplitudeSettings { mesh_n: cfg.mesh_n, ..AmplitudeSettings::default() };
    let sol = amplitude_solve(&problem, &settings)?;
    let mut w = run.create_csv("cov_amplitude.csv")?;
    writeln!(w, "t,f,f_prime")?;
    for ((t, f), fp) in sol.times.iter().zip(&sol.f).zip(&sol.f_prime) {
        writeln!(w, "{t},{f:.15e},{fp:.15e}")?;
    }
    w.flush()?;
    #[derive(Serialize)]
    struct Summary<'a> {
        problem: AmplitudeProblem,
        action: f64,
        exponent: f64,
        el_residual: f64,
        method: snls_core::variational::AmplitudeMethod,
        residual_history: &'a [f64],
    }
    run.write_json(
        "cov_amplitude.json",
        &Summary {
            problem,
            action: sol.action,
            exponent: -sol.action,
            el_residual: sol.el_residual,
            method: sol.method,
            residual_history: &sol.residual_history,
        },
    )?;
    println!("action={:.12} exponent={:.12} el_residual={:.3e} method={:?}", sol.action, -sol.action, sol.el_residual, sol.method);
    Ok(())
}

pub fn cov_full(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let settings = FullParamSettings { mesh_n: cfg.mesh_n, ..FullParamSettings::default() };
    let st = full_param_solve(cfg.gamma, cfg.horizon(), &settings)?;
    let mut w = run.create_csv("cov_full.csv")?;
    writeln!(w, "t,eta,eta_prime,alpha,beta,y,y_prime")?;
    for j in 0..st.times.len() {
        writeln!(
            w,
            "{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
            st.times[j], st.eta[j], st.eta_prime[j], st.alpha[j], st.beta[j], st.y[j], st.y_prime[j]
        )?;
    }
    w.flush()?;
    #[derive(Serialize)]
    struct Summary<'a> {
        gamma: f64,
        horizon: f64,
        action: f64,
        exponent: f64,
        sup_y_prime: f64,
        shooting_residual: f64,
        residual_history: &'a [f64],
    }
    run.write_json(
        "cov_full.json",
        &Summary {
            gamma: st.gamma,
            horizon: st.horizon,
            action: st.action,
            exponent: -st.action,
            sup_y_prime: st.sup_y_prime(),
            shooting_residual: st.shooting_residual,
            residual_history: &st.residual_history,
        },
    )?;
    println!("action={:.12} sup_y_prime={:.3e} residual={:.3e}", st.action, st.sup_y_prime(), st.shooting_residual);
    Ok(())
}

pub fn sweep_gamma(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let coeffs = amplitude_coefficients(&cfg)?;
    let settings = AmplitudeSettings { mesh_n: cfg.mesh_n, ..AmplitudeSettings::default() };
    let rows = gamma_sweep(cfg.horizon(), cfg.phi_norm, cfg.points, &coeffs, &settings)?;
    let comment = run.comment();
    let mut w = run.create("sweep.csv")?;
    write_sweep_csv(&rows, Some(&comment), &mut w)?;
    w.flush()?;
    let failed = rows.iter().filter(|r| r.amp_status.starts_with("failed")).count();
    println!("rows={} amplitude_failures={failed}", rows.len());
    Ok(())
}

fn estimate_line(w: &mut impl Write, bit: u8, e: &ErrorProbEstimate) -> std::io::Result<()> {
    writeln!(
        w,
        "{bit},{},{},{:.8e},{:.8e},{:.8e},{:.10e},{},{},{}",
        e.successes,
        e.n_samples,
        e.p_hat,
        e.wilson_ci.0,
        e.wilson_ci.1,
        e.log_scale_value(),
        e.is_censored() as u8,
        e.n_blowups,
        e.n_unstable
    )
}

const ESTIMATE_HEADER: &str = "bit,successes,n_samples,p_hat,ci_lo,ci_hi,eps_log_p,censored,n_blowups,n_unstable";

fn write_samples(w: &mut impl Write, bit: u8, samples: &[SampleOutcome]) -> std::io::Result<()> {
    for s in samples {
        let tc = s.t_cross.map(|t| t.to_string()).unwrap_or_default();
        writeln!(w, "{bit},{},{:.15e},{tc},{}", s.index, s.windowed_momentum, s.unstable as u8)?;
    }
    Ok(())
}

pub fn mc_error(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let g = grid(&cfg)?;
    let op = phi(&cfg, &g)?;
    let rule = DecisionRule::new(cfg.gamma, cfg.window_l, &g)?;
    let setup = McSetup {
        params: params(&cfg)?,
        phi: &op,
        eps: cfg.eps,
        horizon: cfg.horizon(),
        master_seed: cfg.master_seed,
        opts: evolve_options(&cfg, usize::MAX),
    };
    let pair = mc_error_probs(&rule, &setup, cfg.n_samples, cfg.blowup_aware, cfg.level)?;
    let mut w = run.create_csv("mc_error.csv")?;
    writeln!(w, "{ESTIMATE_HEADER}")?;
    estimate_line(&mut w, 0, &pair.est0)?;
    estimate_line(&mut w, 1, &pair.est1)?;
    w.flush()?;
    let mut w = run.create_csv("mc_error_samples.csv")?;
    writeln!(w, "bit,index,windowed_momentum,t_cross,unstable")?;
    write_samples(&mut w, 0, &pair.samples0)?;
    write_samples(&mut w, 1, &pair.samples1)?;
    w.flush()?;
    for (bit, e) in [(0, &pair.est0), (1, &pair.est1)] {
        println!(
            "p{bit}={:.6e} ci=[{:.6e}, {:.6e}] eps_log_p={:.6}{}",
            e.p_hat,
            e.wilson_ci.0,
            e.wilson_ci.1,
            e.log_scale_value(),
            if e.is_censored() { " (censored)" } else { "" }
        );
    }
    println!("risk={:.6e}", pair.risk());
    Ok(())
}

pub fn report(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let g = grid(&cfg)?;
    let op = phi(&cfg, &g)?;
    let rule = DecisionRule::new(cfg.gamma, cfg.window_l, &g)?;
    let mut pairs = Vec::with_capacity(cfg.eps_grid.len());
    for &eps in &cfg.eps_grid {
        let setup = McSetup {
            params: params(&cfg)?,
            phi: &op,
            eps,
            horizon: cfg.horizon(),
            master_seed: cfg.master_seed,
            opts: evolve_options(&cfg, usize::MAX),
        };
        let p = mc_error_probs(&rule, &setup, cfg.n_samples, cfg.blowup_aware, cfg.level)?;
        pairs.push((p.est0, p.est1));
    }
    let q = BoundQuery::new(cfg.gamma, cfg.horizon(), op.op_norm())?;
    let rep = compare_report(&q, &pairs)?;
    let comment = run.comment();
    let mut w = run.create("report.csv")?;
    rep.write_csv(Some(&comment), &mut w)?;
    w.flush()?;
    run.write_json("report.json", &rep)?;
    for r in &rep.rows {
        println!("eps={} eps_log_p0={:.6} eps_log_p1={:.6} risk={:.6e}", r.eps, r.est0.log_scale_value(), r.est1.log_scale_value(), r.risk_hat);
    }
    println!("upper exp0={:.6} exp1={:.6}; lower exp0={:.6} exp1={:.6}", rep.upper.exp0, rep.upper.exp1, rep.lower.exp0, rep.lower.exp1);
    if rep.monotonicity_flag {
        println!("warning: eps_log_p1 not monotone in eps");
    }
    Ok(())
}

pub fn mc_blowup(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let g = grid(&cfg)?;
    let op = phi(&cfg, &g)?;
    let u0 = datum(&cfg, &g)?;
    let rec = mc_blowup_time(
        &params(&cfg)?,
        &op,
        &u0,
        cfg.eps,
        &cfg.levels,
        cfg.s,
        cfg.horizon(),
        cfg.n_samples,
        cfg.master_seed,
        &evolve_options(&cfg, usize::MAX),
    )?;
    let mut w = run.create_csv("blowup.csv")?;
    writeln!(w, "level,survive,cross_by_t,cross_by_s,between,n_samples,p_survive,p_cross_by_t,p_between")?;
    for l in &rec.levels {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.8e},{:.8e},{:.8e}",
            l.level, l.survive.count, l.cross_by_t.count, l.cross_by_s.count, l.between.count, rec.n_samples, l.survive.p_hat, l.cross_by_t.p_hat, l.between.p_hat
        )?;
    }
    w.flush()?;
    let mut w = run.create_csv("blowup_times.csv")?;
    let cols: Vec<String> = rec.levels.iter().map(|l| format!("t_cross_{}", l.level)).collect();
    writeln!(w, "index,{}", cols.join(","))?;
    for i in 0..rec.n_samples {
        let cells: Vec<String> = rec.levels.iter().map(|l| l.t_cross[i].map(|t| t.to_string()).unwrap_or_default()).collect();
        writeln!(w, "{i},{}", cells.join(","))?;
    }
    w.flush()?;
    for l in &rec.levels {
        println!("level={} p_cross_by_T={:.6} p_between={:.6}", l.level, l.cross_by_t.p_hat, l.between.p_hat);
    }
    println!("unstable={}", rec.n_unstable);
    Ok(())
}

pub fn mc_shift(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let g = grid(&cfg)?;
    let op = phi(&cfg, &g)?;
    let table = mc_shift_tails(
        &params(&cfg)?,
        &op,
        cfg.eps,
        cfg.horizon(),
        &cfg.r_grid,
        cfg.n_samples,
        cfg.master_seed,
        &evolve_options(&cfg, usize::MAX),
    )?;
    let mut w = run.create_csv("shift_tails.csv")?;
    writeln!(w, "r,plus,p_plus,plus_lo,plus_hi,minus,p_minus,minus_lo,minus_hi,n_samples")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{:.8e},{:.8e},{:.8e},{},{:.8e},{:.8e},{:.8e},{}",
            r.r, r.plus.count, r.plus.p_hat, r.plus.ci.0, r.plus.ci.1, r.minus.count, r.minus.p_hat, r.minus.ci.0, r.minus.ci.1, r.plus.n
        )?;
    }
    w.flush()?;
    let mut w = run.create_csv("shift_samples.csv")?;
    writeln!(w, "index,y")?;
    for (i, y) in table.y.iter().enumerate() {
        writeln!(w, "{i},{y:.15e}")?;
    }
    w.flush()?;
    for r in &table.rows {
        println!("r={} p_plus={:.6e} p_minus={:.6e}", r.r, r.plus.p_hat, r.minus.p_hat);
    }
    println!("unstable={}", table.n_unstable);
    Ok(())
}

pub fn rate(run: &mut Run) -> Out {
    let cfg = run.cfg.clone();
    let g = grid(&cfg)?;
    let op = phi(&cfg, &g)?;
    let p = params(&cfg)?;
    #[derive(Serialize)]
    struct Summary {
        datum: Datum,
        rate: f64,
        /// Variational action of the path, when known in closed form.
        reference: Option<f64>,
        relative_difference: Option<f64>,
        detail: serde_json::Value,
    }
    let s = if cfg.datum() == Datum::Gadget {
        let r = gadget_rate(&op, &p, cfg.y, cfg.horizon(), cfg.n_times, PinvSettings::default())?;
        Summary {
            datum: cfg.datum(),
            rate: r.rate,
            reference: None,
            relative_difference: None,
            detail: serde_json::to_value(r).map_err(|e| CliError::new("io", e.to_string()))?,
        }
    } else {
        let path = soliton_param_solution(soliton_kind(&cfg)?, cfg.gamma, cfg.horizon())?;
        if path.kind == PathKind::NullDatum {
            return Err(CliError::config("control extraction needs a path away from the zero field; use the soliton datum"));
        }
        let n = cfg.n_times.max(2);
        let times: Vec<f64> = (0..n).map(|j| cfg.horizon() * j as f64 / (n - 1) as f64).collect();
        let h = extract_control_from_sampler(&path.sampler(&g), &times, &op, &p, PinvSettings::default())?;
        let rate = rate_functional(&h);
        let reference = path.action()?.closed_form;
        Summary {
            datum: cfg.datum(),
            rate,
            reference: Some(reference),
            relative_difference: Some((rate - reference).abs() / reference.abs()),
            detail: serde_json::json!({ "max_discarded_fraction": h.max_discarded_fraction(), "n_times": n }),
        }
    };
    run.write_json("rate.json", &s)?;
    match (s.reference, s.relative_difference) {
        (Some(r), Some(d)) => println!("rate={:.12} action={r:.12} relative_difference={d:.3e}", s.rate),
        _ => println!("rate={:.12}", s.rate),
    }
    Ok(())
}
