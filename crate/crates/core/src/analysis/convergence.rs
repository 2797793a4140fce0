use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::deviation::{measure, SweepOptions};
use super::mobius::{c2_distance, MobiusApproximant};
use super::zoom::LetterOrbit;
use crate::error::{Error, Result};
use crate::giem::Giem;
use crate::martingale::{martingale_sweep, EtaSequence};
use crate::numerics::{uniform_grid, PrecisionContext, Real};
use crate::partition::DynamicalPartition;
use crate::rauzy::{check_k_bounded, ChainReading, RauzyState};

/// Which map the zoom is measured against in the `delta_*` columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Mobius,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    /// First depth with records.
    pub first_depth: usize,
    pub max_depth: usize,
    pub target: Target,
    pub sweep: SweepOptions,
    /// Window for the per-step contraction; `None` takes the minimal bounded-combinatorics window.
    pub lambda_window: Option<usize>,
    /// Exponent of the martingale norms feeding `η_n`.
    pub p: f64,
    /// Cross-check `m_n` by quadrature.
    pub mn_quadrature: bool,
    /// Fill `runtime_ms`; off by default so that CSVs are reproducible.
    pub record_timings: bool,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            first_depth: 1,
            max_depth: 12,
            target: Target::Mobius,
            sweep: SweepOptions::default(),
            lambda_window: None,
            p: 2.0,
            mn_quadrature: false,
            record_timings: false,
        }
    }
}

/// One letter at one depth of a convergence sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub letter: String,
    /// Full-precision decimal text.
    pub m_n: String,
    pub delta_c0: f64,
    pub delta_c1: f64,
    pub delta_l1: Option<f64>,
    pub delta_l1_tv: f64,
    pub partition_norm: String,
    pub log_mn: String,
    pub eta_n: Option<f64>,
    pub runtime_ms: Option<f64>,
    /// `‖Z − Id‖_{C¹}`, i.e. `max(C⁰, C¹)` against the identity.
    pub identity_c1: f64,
    /// `‖F_n − Id‖_{C²}` on the coarse grid.
    pub f_minus_id_c2: f64,
    pub mn_defect: Option<f64>,
    pub grid_points: usize,
    pub d2_from_grid: bool,
    pub q: usize,
}

impl ConvergenceRecord {
    pub fn delta(&self) -> f64 {
        self.delta_c0.max(self.delta_c1)
    }

    fn log_mn_f64(&self) -> f64 {
        self.log_mn.parse().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSweep {
    pub records: Vec<ConvergenceRecord>,
    /// `‖ξ_n‖` for `n = 0..=max_depth`.
    pub partition_norms: Vec<f64>,
    pub lambda_window: usize,
    /// Per-step contraction `λ = max_n (‖ξ_{n+k}‖/‖ξ_n‖)^{1/k}`.
    pub lambda: f64,
    pub eta: EtaSequence,
}

/// Worst `(‖ξ_{n+k}‖/‖ξ_n‖)^{1/k}` over the computed range.
pub fn per_step_contraction(norms: &[f64], k: usize) -> f64 {
    if k == 0 || norms.len() <= k {
        return f64::NAN;
    }
    (0..norms.len() - k)
        .map(|n| (norms[n + k] / norms[n]).powf(1.0 / k as f64))
        .fold(0.0, f64::max)
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| (sxy / sxx, my - sxy / sxx * mx))
}

fn window<T: Real>(s: &RauzyState<T>, opts: &ConvergenceOptions) -> usize {
    if let Some(k) = opts.lambda_window {
        return k;
    }
    let h = s.summaries();
    check_k_bounded(&h, s.d(), 1.max(h.len() / 2), ChainReading::IndexConsistent)
        .ok()
        .and_then(|r| r.minimal_k)
        .unwrap_or(s.d())
}

/// Renormalizes to `max_depth` and measures the zoom of every letter at each depth.
pub fn convergence_sweep<T: Real>(
    f: Arc<Giem<T>>,
    ctx: &PrecisionContext,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceSweep> {
    if opts.max_depth == 0 || opts.first_depth > opts.max_depth {
        return Err(Error::Config(format!(
            "depth range {}..={} is empty",
            opts.first_depth, opts.max_depth
        )));
    }
    let tctx = f.ctx().clone();
    let quad = ctx.quadrature::<T>(&tctx);
    let mut s = RauzyState::new(f.clone());
    let mut states = Vec::with_capacity(opts.max_depth + 1);
    let mut partitions = Vec::with_capacity(opts.max_depth + 1);
    for n in 0..=opts.max_depth {
        if n > 0 {
            s.step()?;
        }
        partitions.push(Arc::new(DynamicalPartition::build(&s)?));
        states.push(s.clone());
    }
    let partition_norms: Vec<f64> = partitions.iter().map(|p| p.norm().to_f64()).collect();
    let k = window(&s, opts);
    let lambda = per_step_contraction(&partition_norms, k);
    let report = martingale_sweep(&f, &partitions, &quad, opts.p, lambda, false)?;
    let eta = report.eta;
    let id = MobiusApproximant::<T>::identity(&tctx);
    let coarse = uniform_grid::<T>(&tctx, ctx.grid_points);
    let noise = ctx.noise_floor();
    let mut records = Vec::new();
    for n in opts.first_depth..=opts.max_depth {
        let st = &states[n];
        let eta_n = n.checked_sub(1).and_then(|i| eta.eta.get(i)).copied();
        for letter in 0..st.d() {
            let start = Instant::now();
            let orb = LetterOrbit::new(st, letter)?;
            let mn = orb.compute_mn(opts.mn_quadrature.then_some(&quad))?;
            let fn_ = MobiusApproximant::new(mn.closed.clone());
            let devs = measure(&orb, &[&fn_, &id], &opts.sweep, noise)?;
            let main = match opts.target {
                Target::Mobius => &devs[0],
                Target::Identity => &devs[1],
            };
            let log_mn = mn.closed.ln();
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            records.push(ConvergenceRecord {
                n,
                letter: st.pair().name(letter).to_string(),
                m_n: mn.closed.to_text(),
                delta_c0: main.c0,
                delta_c1: main.c1,
                delta_l1: main.l1,
                delta_l1_tv: main.l1_tv,
                partition_norm: partitions[n].norm().to_text(),
                log_mn: if mn.closed == mn.closed.one_like() { "0".into() } else { log_mn.to_text() },
                eta_n,
                runtime_ms: opts.record_timings.then_some(elapsed),
                identity_c1: devs[1].c1_norm(),
                f_minus_id_c2: c2_distance(&fn_, &id, &coarse).norm(),
                mn_defect: mn.defect(),
                grid_points: main.grid_points,
                d2_from_grid: main.d2_from_grid,
                q: orb.q(),
            });
        }
    }
    Ok(ConvergenceSweep { records, partition_norms, lambda_window: k, lambda, eta })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

/// Per-depth maximum over letters.
fn per_depth<F: Fn(&ConvergenceRecord) -> f64>(records: &[ConvergenceRecord], key: F) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for r in records {
        let v = key(r);
        match out.last_mut() {
            Some((n, best)) if *n == r.n => *best = best.max(v),
            _ => out.push((r.n, v)),
        }
    }
    out
}

/// Log-linear trend of a per-depth quantity, ignoring values at or below `floor`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trend {
    pub depths: Vec<usize>,
    pub values: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

impl Trend {
    fn fit(points: Vec<(usize, f64)>, floor: f64) -> Trend {
        let kept: Vec<(usize, f64)> = points.into_iter().filter(|(_, v)| *v > floor).collect();
        let xs: Vec<f64> = kept.iter().map(|(n, _)| *n as f64).collect();
        let ys: Vec<f64> = kept.iter().map(|(_, v)| v.ln()).collect();
        let fit = least_squares(&xs, &ys);
        Trend {
            depths: kept.iter().map(|p| p.0).collect(),
            values: kept.iter().map(|p| p.1).collect(),
            slope: fit.map(|f| f.0),
            intercept: fit.map(|f| f.1),
        }
    }

    pub fn decreasing(&self) -> bool {
        self.slope.is_some_and(|s| s < 0.0)
    }
}

/// `δ_n ≤ C(λⁿ + η_n)`: `C` is fitted on the first half of the depths and tested on the rest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub trend: Trend,
    pub fit_depths: Vec<usize>,
    pub c: f64,
    /// Largest `δ_n / (C(λⁿ + η_n))` over the held-out depths.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// `‖F_n − Id‖_{C²} ≤ C|log m_n|` with `C` taken from the Möbius family on `|a| ≤ 1` (`a = −2 log m_n`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub log_mn: Trend,
    pub first_identity_c1: f64,
    pub last_identity_c1: f64,
    pub c: f64,
    pub worst_ratio: f64,
    pub holds: bool,
}

/// `sup_{0 < |a| ≤ 1} ‖M_a − Id‖_{C²}/|a|` over a parameter grid.
pub fn mobius_identity_constant(grid_points: usize) -> f64 {
    let grid = uniform_grid::<f64>(&(), grid_points);
    let id = MobiusApproximant::<f64>::identity(&());
    (1..=200)
        .flat_map(|i| [i as f64 / 200.0, -(i as f64) / 200.0])
        .map(|a| c2_distance(&MobiusApproximant::from_log_param(&a), &id, &grid).norm() / a.abs())
        .fold(0.0, f64::max)
}

impl ConvergenceSweep {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n",
            "letter",
            "m_n",
            "delta_c0",
            "delta_c1",
            "delta_l1",
            "delta_l1_tv",
            "partition_norm",
            "log_mn",
            "eta_n",
            "runtime_ms",
        ])?;
        for r in &self.records {
            w.write_record([
                r.n.to_string(),
                r.letter.clone(),
                r.m_n.clone(),
                format!("{:.17e}", r.delta_c0),
                format!("{:.17e}", r.delta_c1),
                opt(r.delta_l1),
                format!("{:.17e}", r.delta_l1_tv),
                r.partition_norm.clone(),
                r.log_mn.clone(),
                opt(r.eta_n),
                opt(r.runtime_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-depth `max_α δ_n` as `n  log δ_n` lines.
    pub fn plot_data(&self) -> String {
        per_depth(&self.records, ConvergenceRecord::delta)
            .into_iter()
            .map(|(n, d)| format!("{n} {:.17e}\n", d.ln()))
            .collect()
    }

    pub fn envelope(&self, n: usize) -> f64 {
        let eta = n.checked_sub(1).and_then(|i| self.eta.eta.get(i)).copied().unwrap_or(0.0);
        self.lambda.powi(n as i32) + eta
    }

    pub fn envelope_check(&self, noise_floor: f64) -> EnvelopeCheck {
        let deltas = per_depth(&self.records, ConvergenceRecord::delta);
        let trend = Trend::fit(deltas.clone(), noise_floor);
        let half = deltas.len().div_ceil(2);
        let ratio = |(n, d): &(usize, f64)| d / self.envelope(*n);
        let c = deltas[..half].iter().map(ratio).fold(1.0, f64::max);
        let worst_ratio = deltas[half..].iter().map(|p| ratio(p) / c).fold(0.0, f64::max);
        EnvelopeCheck {
            fit_depths: deltas[..half].iter().map(|p| p.0).collect(),
            holds: trend.decreasing() && worst_ratio <= 1.0,
            trend,
            c,
            worst_ratio,
        }
    }

    pub fn identity_check(&self, grid_points: usize) -> IdentityCheck {
        let log_mn = Trend::fit(per_depth(&self.records, |r| r.log_mn_f64().abs()), 0.0);
        let id = per_depth(&self.records, |r| r.identity_c1);
        let c = 2.0 * mobius_identity_constant(grid_points);
        let worst_ratio = self
            .records
            .iter()
            .filter(|r| r.log_mn_f64() != 0.0)
            .map(|r| r.f_minus_id_c2 / (c * r.log_mn_f64().abs()))
            .fold(0.0, f64::max);
        let (first, last) = (id.first().map_or(0.0, |p| p.1), id.last().map_or(0.0, |p| p.1));
        IdentityCheck {
            holds: log_mn.decreasing() && last < first && worst_ratio <= 1.0,
            log_mn,
            first_identity_c1: first,
            last_identity_c1: last,
            c,
            worst_ratio,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::FamilyDescriptor;
    use crate::numerics::{BigFloat, Rational};

    #[test]
    fn contraction_of_geometric_norms() {
        let norms: Vec<f64> = (0..10).map(|n| 0.5f64.powi(n)).collect();
        assert!((per_step_contraction(&norms, 2) - 0.5).abs() < 1e-15);
        let (slope, icpt) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((slope - 2.0).abs() < 1e-15 && (icpt - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_sweep_is_exact() {
        let f = FamilyDescriptor::preset("rotation").unwrap().build_arc::<Rational>(&()).unwrap();
        let opts = ConvergenceOptions {
            max_depth: 8,
            sweep: SweepOptions { grid_points: 9, ..Default::default() },
            ..Default::default()
        };
        let sw = convergence_sweep(f, &PrecisionContext::exact(), &opts).unwrap();
        assert_eq!(sw.records.len(), 16);
        for r in &sw.records {
            assert_eq!((r.delta_c0, r.delta_c1, r.delta_l1, r.delta_l1_tv), (0.0, 0.0, Some(0.0), 0.0));
            assert_eq!((r.m_n.as_str(), r.log_mn.as_str()), ("1", "0"));
        }
        assert!(sw.lambda < 1.0 && sw.lambda_window == 2);
        let mut buf = Vec::new();
        sw.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,letter,m_n,delta_c0,delta_c1,delta_l1,delta_l1_tv,partition_norm,log_mn,eta_n,runtime_ms\n"));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn moebius_sweep_hits_noise() {
        let ctx = PrecisionContext::extended(128);
        let f = FamilyDescriptor::preset("moebius").unwrap().build_arc::<BigFloat>(&128).unwrap();
        let opts = ConvergenceOptions {
            max_depth: 6,
            sweep: SweepOptions { grid_points: 17, l1: false, ..Default::default() },
            ..Default::default()
        };
        let sw = convergence_sweep(f, &ctx, &opts).unwrap();
        assert!(sw.records.iter().all(|r| r.delta() < 1e-25), "{:?}", sw.records);
    }

    #[test]
    fn mobius_constant_is_about_two() {
        let c = mobius_identity_constant(65);
        assert!(c > 1.9 && c < 5.0, "{c}");
    }
}
