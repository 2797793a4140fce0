use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::Check;
use crate::analysis::{
    convergence_sweep, denjoy_check, per_step_contraction, tau_diagnostics, ConvergenceOptions, DenjoyOptions,
    LetterOrbit, SweepOptions, Target,
};
use crate::error::Result;
use crate::giem::Giem;
use crate::martingale::martingale_sweep;
use crate::numerics::{PrecisionContext, Real};
use crate::partition::DynamicalPartition;
use crate::rauzy::{check_k_bounded, check_no_connection, ChainReading, RauzyState};

/// Output directory plus the list of files written so far.
pub(crate) struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    fn csv<F: FnOnce(&mut Vec<u8>) -> Result<()>>(&mut self, name: &str, write: F) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.text(name, &String::from_utf8_lossy(&buf))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<S: serde::Serialize>(&mut self, name: &str, v: &S) -> Result<()> {
        let body = serde_json::to_string_pretty(v).map_err(|e| crate::Error::Io(e.to_string()))?;
        self.text(name, &body)
    }
}

pub(crate) struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
}

fn to_value<S: serde::Serialize>(v: &S) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn dat(rows: impl IntoIterator<Item = (usize, f64)>) -> String {
    rows.into_iter().map(|(n, v)| format!("{n} {v:.17e}\n")).collect()
}

fn states<T: Real>(f: Arc<Giem<T>>, depth: usize) -> Result<Vec<RauzyState<T>>> {
    let mut s = RauzyState::new(f);
    let mut out = vec![s.clone()];
    for _ in 0..depth {
        s.step()?;
        out.push(s.clone());
    }
    Ok(out)
}

fn minimal_window<T: Real>(s: &RauzyState<T>) -> usize {
    let h = s.summaries();
    check_k_bounded(&h, s.d(), 1.max(h.len() / 2), ChainReading::IndexConsistent)
        .ok()
        .and_then(|r| r.minimal_k)
        .unwrap_or(s.d())
}

pub(crate) fn convergence<T: Real>(
    f: Arc<Giem<T>>,
    cfg: &ExperimentConfig,
    ctx: &PrecisionContext,
    out: &mut Outputs,
) -> Result<Outcome> {
    let c = &cfg.convergence;
    let opts = ConvergenceOptions {
        first_depth: cfg.first_depth,
        max_depth: cfg.depth,
        target: c.target,
        sweep: SweepOptions { grid_points: ctx.grid_points, l1: c.l1, max_refinements: c.max_refinements },
        lambda_window: c.lambda_window,
        p: c.p,
        mn_quadrature: c.mn_quadrature,
        record_timings: c.record_timings,
    };
    let sw = convergence_sweep(f, ctx, &opts)?;
    out.csv("convergence.csv", |w| sw.write_csv(w))?;
    out.text("delta.dat", &sw.plot_data())?;
    let mut log_mn: Vec<(usize, f64)> = Vec::new();
    for r in &sw.records {
        let v = r.log_mn.parse::<f64>().unwrap_or(f64::NAN).abs();
        match log_mn.last_mut() {
            Some((n, best)) if *n == r.n => *best = best.max(v),
            _ => log_mn.push((r.n, v)),
        }
    }
    out.text("log_mn.dat", &dat(log_mn))?;
    let noise = ctx.noise_floor();
    let worst = sw.records.iter().map(|r| r.delta()).fold(0.0, f64::max);
    let mut checks = Vec::new();
    let mut extra = json!({});
    if worst <= noise {
        checks.push(Check::new("deviation_at_noise", true, format!("max delta {worst:e} <= {noise:e}")));
    } else {
        match c.target {
            Target::Mobius => {
                let env = sw.envelope_check(noise);
                checks.push(Check::new(
                    "envelope",
                    env.holds,
                    format!("slope {:?}, C {:.4}, held-out ratio {:.4}", env.trend.slope, env.c, env.worst_ratio),
                ));
                extra = json!({ "envelope": env });
            }
            Target::Identity => {
                let idc = sw.identity_check(ctx.grid_points);
                checks.push(Check::new(
                    "identity_trend",
                    idc.holds,
                    format!(
                        "log m slope {:?}, |Z-Id| {:e} -> {:e}, C {:.4}, ratio {:.4}",
                        idc.log_mn.slope, idc.first_identity_c1, idc.last_identity_c1, idc.c, idc.worst_ratio
                    ),
                ));
                extra = json!({ "identity": idc });
            }
        }
    }
    if let Some(d) = sw.records.iter().filter_map(|r| r.mn_defect.map(|x| (x, r.q))).find(|(x, q)| *x > 10.0 * ctx.quad_tol * *q as f64) {
        checks.push(Check::new("mn_quadrature", false, format!("defect {:e} with q = {}", d.0, d.1)));
    }
    let result = json!({
        "lambda": sw.lambda,
        "lambda_window": sw.lambda_window,
        "partition_norms": sw.partition_norms,
        "eta": sw.eta,
        "records": sw.records,
        "checks": extra,
    });
    Ok(Outcome { result, checks })
}

pub(crate) fn martingale<T: Real>(
    f: Arc<Giem<T>>,
    cfg: &ExperimentConfig,
    ctx: &PrecisionContext,
    out: &mut Outputs,
) -> Result<Outcome> {
    let m = &cfg.martingale;
    let sts = states(f.clone(), cfg.depth)?;
    let parts: Vec<_> = sts.iter().map(|s| DynamicalPartition::build(s).map(Arc::new)).collect::<Result<_>>()?;
    let norms: Vec<f64> = parts.iter().map(|p| p.norm().to_f64()).collect();
    let k = m.lambda_window.unwrap_or_else(|| minimal_window(sts.last().expect("depth 0 state")));
    let lambda = per_step_contraction(&norms, k);
    let quad = ctx.quadrature::<T>(f.ctx());
    let rep = martingale_sweep(&f, &parts, &quad, m.p, lambda, m.cross_check)?;
    out.csv("martingale.csv", |w| rep.write_csv(w))?;
    out.text("residual.dat", &dat(rep.rows.iter().map(|r| (r.depth, r.g_minus_phi_l2))))?;
    out.text("h_norm.dat", &dat(rep.rows.iter().skip(1).map(|r| (r.depth, r.h_norm))))?;
    let tower = rep.rows.iter().map(|r| r.tower_defect).fold(0.0, f64::max);
    let mzd = rep.rows.iter().skip(1).map(|r| r.mean_zero_defect).fold(0.0, f64::max);
    let last = rep.rows.last().map_or(0.0, |r| r.g_minus_phi_l2);
    let checks = vec![
        Check::new("contracting", rep.is_contracting(), "||g - Phi_n||_2 non-increasing".into()),
        Check::new("tower", tower <= m.tower_tol, format!("max defect {tower:e} <= {:e}", m.tower_tol)),
        Check::new("mean_zero", mzd <= m.mean_zero_tol, format!("max |int h_n| {mzd:e} <= {:e}", m.mean_zero_tol)),
        Check::new(
            "final_residual",
            last <= m.final_ratio * rep.g_l2,
            format!("{last:e} <= {} * {:e}", m.final_ratio, rep.g_l2),
        ),
    ];
    let result = json!({ "lambda": lambda, "lambda_window": k, "partition_norms": norms, "report": rep });
    Ok(Outcome { result, checks })
}

pub(crate) fn denjoy<T: Real>(f: Arc<Giem<T>>, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let d = &cfg.denjoy;
    let opts = DenjoyOptions {
        max_depth: cfg.depth,
        pairs: d.pairs,
        seed: cfg.seed,
        fit_depth: d.fit_depth,
        product_samples: d.product_samples,
    };
    let rep = denjoy_check(f, &opts)?;
    out.csv("denjoy.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "depth",
            "max_log_product",
            "exponent_ratio",
            "pairs",
            "rejected",
            "max_pair_log_ratio",
            "derivative_excess",
            "position_excess",
        ])?;
        for r in &rep.rows {
            w.write_record([
                r.depth.to_string(),
                format!("{:.17e}", r.max_log_product),
                format!("{:.17e}", r.exponent_ratio),
                r.pairs.to_string(),
                r.rejected.to_string(),
                format!("{:.17e}", r.max_pair_log_ratio),
                format!("{:.17e}", r.derivative_excess),
                format!("{:.17e}", r.position_excess),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.text("exponent.dat", &dat(rep.rows.iter().map(|r| (r.depth, r.exponent_ratio))))?;
    let pairs: usize = rep.rows.iter().map(|r| r.pairs).sum();
    let checks = vec![
        Check::new("products", rep.out_of_sample_ok, format!("theta {:e}, fitted C {:.4}", rep.theta, rep.fitted_c)),
        Check::new("two_point", rep.pairs_strict && pairs == d.pairs, format!("{pairs} pairs")),
        Check::new("relative_coordinates", rep.bounds_ok, "z_i and dz_i/dz_0 bounds".into()),
    ];
    Ok(Outcome { result: to_value(&rep), checks })
}

pub(crate) fn combinatorics<T: Real>(f: Arc<Giem<T>>, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let c = &cfg.combinatorics;
    let sts = states(f.clone(), cfg.depth)?;
    let last = sts.last().expect("depth 0 state");
    out.csv("history.csv", |w| last.write_history_csv(w))?;
    let parts: Vec<_> = sts.iter().map(DynamicalPartition::build).collect::<Result<_>>()?;
    let norms: Vec<f64> = parts.iter().map(|p| p.norm().to_f64()).collect();
    out.text("partition_norms.dat", &dat(norms.iter().cloned().enumerate()))?;
    let names = last.pair().names().to_vec();
    out.csv("partition.csv", |w| parts.last().expect("partition").write_csv(&names, w))?;
    let k = c.k.unwrap_or_else(|| minimal_window(last));
    let kb = check_k_bounded(&last.summaries(), last.d(), k, c.reading);
    let lambda = per_step_contraction(&norms, k);
    let tol = T::equality_tolerance(f.ctx());
    let conn = check_no_connection(&f, c.connection_iterates, &tol);
    let mut checks = vec![
        Check::new("partition_decay", lambda < 1.0, format!("lambda {lambda:.6} with k = {k}")),
        Check::new("no_connection", !conn.found(), format!("closest approach {:e}", conn.closest_approach)),
    ];
    match &kb {
        Ok(r) => checks.push(Check::new("k_bounded", r.passed, format!("k = {k}, minimal {:?}", r.minimal_k))),
        Err(e) => checks.push(Check::new("k_bounded", false, e.to_string())),
    }
    let result = json!({
        "lambda": lambda,
        "k": k,
        "partition_norms": norms,
        "k_bounded": kb.ok(),
        "connection": conn,
        "return_times": last.return_times().iter().map(|q| q.to_string()).collect::<Vec<_>>(),
    });
    Ok(Outcome { result, checks })
}

pub(crate) fn diagnostics<T: Real>(
    f: Arc<Giem<T>>,
    cfg: &ExperimentConfig,
    ctx: &PrecisionContext,
    out: &mut Outputs,
) -> Result<Outcome> {
    let dg = &cfg.diagnostics;
    let quad = ctx.quadrature::<T>(f.ctx());
    let sts = states(f, cfg.depth)?;
    let tol = ctx.quad_tol;
    let mut taus = Vec::new();
    let mut rows = Vec::new();
    let (mut anchor_ok, mut zqn_ok, mut mn_ok) = (true, true, true);
    for st in &sts[cfg.first_depth..] {
        for letter in 0..st.d() {
            let orb = LetterOrbit::new(st, letter)?;
            let q = orb.q() as f64;
            let mn = orb.compute_mn(Some(&quad))?;
            let td = tau_diagnostics(&orb, dg.tau_grid, &quad, f64::INFINITY, dg.sums)?;
            let defect = mn.defect().unwrap_or(0.0);
            anchor_ok &= td.anchor_residual <= 1e3 * tol;
            zqn_ok &= td.zqn_residual <= 1e3 * tol * q;
            mn_ok &= defect <= 10.0 * tol * q;
            let sums = td.sums.clone();
            rows.push(vec![
                td.depth.to_string(),
                td.letter.clone(),
                td.q.to_string(),
                format!("{:.17e}", td.bounds.max_tau),
                format!("{:.17e}", td.bounds.max_weighted_dtau),
                format!("{:.17e}", td.bounds.l1_dtau),
                format!("{:.17e}", td.bounds.l1_weighted_d2tau),
                format!("{:.17e}", td.log_mn),
                format!("{:.17e}", td.anchor_residual),
                format!("{:.17e}", td.zqn_residual),
                format!("{defect:.17e}"),
                sums.as_ref().and_then(|s| s.s1).map(|v| format!("{v:.17e}")).unwrap_or_default(),
                sums.as_ref().and_then(|s| s.e).map(|v| format!("{v:.17e}")).unwrap_or_default(),
                sums.as_ref().map(|s| format!("{:.17e}", s.q)).unwrap_or_default(),
                sums.as_ref().map(|s| format!("{:.17e}", s.u)).unwrap_or_default(),
            ]);
            taus.push(td);
        }
    }
    out.csv("diagnostics.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "n",
            "letter",
            "q",
            "max_tau",
            "max_weighted_dtau",
            "l1_dtau",
            "l1_weighted_d2tau",
            "log_mn",
            "anchor_residual",
            "zqn_residual",
            "mn_defect",
            "s1",
            "e",
            "q_sum",
            "u_sum",
        ])?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.json("tau.json", &taus)?;
    let checks = vec![
        Check::new("recursion_anchor", anchor_ok, format!("<= 1e3 * {tol:e}")),
        Check::new("zqn_closed_form", zqn_ok, format!("<= 1e3 * {tol:e} * q")),
        Check::new("mn_closed_form", mn_ok, format!("<= 10 * {tol:e} * q")),
    ];
    Ok(Outcome { result: json!({ "records": taus.len() }), checks })
}
