use std::cell::RefCell;

use serde::Serialize;

use super::zoom::LetterOrbit;
use crate::error::{Error, Result};
use crate::giem::Branch;
use crate::numerics::{midpoint_grid, Quadrature, Real};

/// `A_i` and the quantities derived from it at one orbit point.
#[derive(Clone, Debug)]
pub struct ACoefficient<T> {
    pub a: T,
    /// `dA_i/dz_i`.
    pub da: T,
    /// `d²A_i/dz_i²`.
    pub d2a: T,
    /// Second term `V_i` of the denominator of `A_i`.
    pub v: T,
    /// `N_i = ∫ f''/(2f')` over `[a_i, b_i]`.
    pub n: T,
}

fn f2<T: Real>(br: &Branch<T>, t: &T) -> T {
    br.jet(t).d2h.unwrap_or_else(|| t.zero_like())
}

/// `A_i` from its integral quotient, normalized so that `z_{i+1} = z_i(1 + A_i(z_i − 1))`.
pub fn a_coefficient<T: Real>(br: &Branch<T>, a: &T, b: &T, x: &T, quad: &Quadrature<T>) -> Result<ACoefficient<T>> {
    let zero = a.zero_like();
    if br.shape.is_linear() {
        return Ok(ACoefficient { a: zero.clone(), da: zero.clone(), d2a: zero.clone(), v: zero.clone(), n: zero });
    }
    if br.jet(x).d2h.is_none() {
        return Err(Error::NoSecondDerivative(br.shape.name()));
    }
    let h = b.clone() - a;
    let u = x.clone() - a;
    let w = b.clone() - x;
    let sing = br.singular_points();
    let tol = quad.tol();
    let p = quad.integrate_to(|t| f2(br, t) * &(t.clone() - a), a, x, &sing, tol * u.to_f64())?;
    let q = quad.integrate_to(|t| f2(br, t) * &(b.clone() - t), x, b, &sing, tol * w.to_f64())?;
    let r = quad.integrate_to(|t| f2(br, t) * &(b.clone() - t), a, b, &sing, tol * h.to_f64())?;
    let fa = br.deriv(a);
    let den = fa.clone() * &h + &r;
    let coef = h.clone() * &(p.clone() / &u + &(q.clone() / &w)) / &den;
    let dadx = h.clone() * &(q.clone() / &w.sq() - &(p.clone() / &u.sq())) / &den;
    let fx = f2(br, x);
    let two = a.lit(2);
    let g2 = -(two.clone()
        * &(fx.clone() / &(two.clone() * &u) - &(p / &(u.sq() * &u)) + &(fx / &(two.clone() * &w))
            - &(q / &(w.sq() * &w))));
    let d2adx2 = h.clone() * &g2 / &den;
    let n = (br.deriv(b).ln() - &fa.ln()) / &two;
    Ok(ACoefficient {
        a: coef,
        da: dadx * &h,
        d2a: d2adx2 * &h.sq(),
        v: r / &(fa * &h),
        n,
    })
}

/// `(ψ, dψ/dz, d²ψ/dz²)` at relative coordinate `z`.
pub fn psi<T: Real>(c: &ACoefficient<T>, z: &T) -> (T, T, T) {
    if c.a.is_zero() && c.da.is_zero() && c.d2a.is_zero() {
        let zero = z.zero_like();
        return (c.n.clone(), zero.clone(), zero);
    }
    let one = z.one_like();
    let u = one.clone() + &(c.a.clone() * z);
    let v = one + &(c.a.clone() * &(z.clone() - &z.one_like()));
    let uv = u.clone() * &v;
    let value = c.n.clone() - &(u.clone() / &v).ln();
    let d1 = (c.a.sq() - &c.da) / &uv;
    let du = c.da.clone() * z + &c.a;
    let d2 = (z.lit(2) * &c.a * &c.da - &c.d2a) / &uv - &(z.lit(2) * &du / &u * &d1) - &d1.sq();
    (value, d1, d2)
}

/// `τ_n` and its derivatives at one base point, with the per-orbit bookkeeping.
#[derive(Clone, Debug)]
pub struct TauPoint<T> {
    pub z0: T,
    pub tau: T,
    pub dtau: T,
    pub d2tau: T,
    /// Direct `z_q`.
    pub zq: T,
    /// `max_i |z_{i+1} − z_i(1 + A_i(z_i − 1))|`.
    pub anchor_residual: f64,
    pub sum_abs_a: T,
    pub sum_a_sq: T,
    pub coefficients: Vec<ACoefficient<T>>,
    pub psi: Vec<T>,
}

/// Evaluates `τ_n(z₀) = Σ ψ_i(z₀)` along the orbit, together with `τ'_n` and `τ''_n`.
pub fn tau_at<T: Real>(orbit: &LetterOrbit<T>, z0: &T, quad: &Quadrature<T>) -> Result<TauPoint<T>> {
    let rel = orbit.relative_orbit(z0);
    let d2z = rel
        .d2z
        .as_ref()
        .ok_or_else(|| Error::NoSecondDerivative(orbit.map().pair().name(orbit.letter).to_string()))?;
    let zero = z0.zero_like();
    let (mut tau, mut dtau, mut d2tau) = (zero.clone(), zero.clone(), zero.clone());
    let (mut sum_abs_a, mut sum_a_sq) = (zero.clone(), zero);
    let mut anchor = 0.0f64;
    let mut coefficients = Vec::with_capacity(orbit.q());
    let mut psis = Vec::with_capacity(orbit.q());
    for (i, &k) in orbit.branch.iter().enumerate() {
        let br = orbit.map().branch(k);
        let c = a_coefficient(br, &rel.a[i], &rel.b[i], &rel.x[i], quad)?;
        let z = &rel.z[i];
        let predicted = z.clone() * &(z.one_like() + &(c.a.clone() * &(z.clone() - &z.one_like())));
        anchor = anchor.max((rel.z[i + 1].clone() - &predicted).abs().to_f64());
        let (p, p1, p2) = psi(&c, z);
        tau += &p;
        dtau += &(p1.clone() * &rel.dz[i]);
        d2tau += &(p2 * &rel.dz[i].sq() + &(p1 * &d2z[i]));
        sum_abs_a += &c.a.abs();
        sum_a_sq += &c.a.sq();
        coefficients.push(c);
        psis.push(p);
    }
    Ok(TauPoint {
        z0: z0.clone(),
        tau,
        dtau,
        d2tau,
        zq: rel.z[orbit.q()].clone(),
        anchor_residual: anchor,
        sum_abs_a,
        sum_a_sq,
        coefficients,
        psi: psis,
    })
}

/// `z₀ m e^τ / (1 + z₀(m e^τ − 1))`.
pub fn zqn_closed_form<T: Real>(z0: &T, mn: &T, tau: &T) -> T {
    let k = mn.clone() * &tau.exp();
    z0.clone() * &k / &(z0.one_like() + &(z0.clone() * &(k - &z0.one_like())))
}

/// The four quantities bounded by `δ_n` in the estimate for `τ_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauBounds {
    pub max_tau: f64,
    pub max_weighted_dtau: f64,
    pub l1_dtau: f64,
    pub l1_weighted_d2tau: f64,
}

/// Per-depth export of the `τ_n` analysis for one letter.
#[derive(Clone, Debug, Serialize)]
pub struct TauDiagnostics {
    pub depth: usize,
    pub letter: String,
    pub q: usize,
    pub grid: Vec<f64>,
    pub tau: Vec<f64>,
    pub dtau: Vec<f64>,
    pub d2tau: Vec<f64>,
    /// Per-`i` arrays at the probe point `z₀ = ½`.
    pub a_i: Vec<f64>,
    pub da_i: Vec<f64>,
    pub d2a_i: Vec<f64>,
    pub v_i: Vec<f64>,
    pub n_i: Vec<f64>,
    pub psi_i: Vec<f64>,
    pub bounds: TauBounds,
    pub log_mn: f64,
    /// `max |τ_n + log m_n + Σ A_i|`, the part carried by the quadratic terms.
    pub decomposition_residual: f64,
    pub max_sum_abs_a: f64,
    pub max_sum_a_sq: f64,
    pub anchor_residual: f64,
    pub zqn_residual: f64,
    pub sums: Option<DiagnosticSums>,
}

/// Runs the `τ_n` analysis on a midpoint grid; fails if the recursion anchor is off by more than `anchor_tol`.
pub fn tau_diagnostics<T: Real>(
    orbit: &LetterOrbit<T>,
    grid_points: usize,
    quad: &Quadrature<T>,
    anchor_tol: f64,
    with_sums: bool,
) -> Result<TauDiagnostics> {
    let ctx = orbit.a[0].ctx();
    let mn = orbit.compute_mn(None)?.closed;
    let log_mn = mn.ln();
    let half = T::from_ratio(&ctx, 1, 2);
    let probe = tau_at(orbit, &half, quad)?;
    let grid = midpoint_grid::<T>(&ctx, grid_points);
    let n = grid.len() as f64;
    let mut out = TauDiagnostics {
        depth: orbit.depth,
        letter: orbit.map().pair().name(orbit.letter).to_string(),
        q: orbit.q(),
        grid: grid.iter().map(|z| z.to_f64()).collect(),
        tau: Vec::new(),
        dtau: Vec::new(),
        d2tau: Vec::new(),
        a_i: probe.coefficients.iter().map(|c| c.a.to_f64()).collect(),
        da_i: probe.coefficients.iter().map(|c| c.da.to_f64()).collect(),
        d2a_i: probe.coefficients.iter().map(|c| c.d2a.to_f64()).collect(),
        v_i: probe.coefficients.iter().map(|c| c.v.to_f64()).collect(),
        n_i: probe.coefficients.iter().map(|c| c.n.to_f64()).collect(),
        psi_i: probe.psi.iter().map(|p| p.to_f64()).collect(),
        bounds: TauBounds { max_tau: 0.0, max_weighted_dtau: 0.0, l1_dtau: 0.0, l1_weighted_d2tau: 0.0 },
        log_mn: log_mn.to_f64(),
        decomposition_residual: 0.0,
        max_sum_abs_a: 0.0,
        max_sum_a_sq: 0.0,
        anchor_residual: probe.anchor_residual,
        zqn_residual: 0.0,
        sums: None,
    };
    for z0 in &grid {
        let tp = tau_at(orbit, z0, quad)?;
        let w = (z0.clone() * &(z0.one_like() - z0)).to_f64();
        let (t, d1, d2) = (tp.tau.to_f64(), tp.dtau.to_f64(), tp.d2tau.to_f64());
        out.bounds.max_tau = out.bounds.max_tau.max(t.abs());
        out.bounds.max_weighted_dtau = out.bounds.max_weighted_dtau.max((w * d1).abs());
        out.bounds.l1_dtau += d1.abs() / n;
        out.bounds.l1_weighted_d2tau += w * d2.abs() / n;
        let sum_a: T = tp.coefficients.iter().fold(z0.zero_like(), |acc, c| acc + &c.a);
        out.decomposition_residual =
            out.decomposition_residual.max((tp.tau.clone() + &log_mn + &sum_a).abs().to_f64());
        out.max_sum_abs_a = out.max_sum_abs_a.max(tp.sum_abs_a.to_f64());
        out.max_sum_a_sq = out.max_sum_a_sq.max(tp.sum_a_sq.to_f64());
        out.anchor_residual = out.anchor_residual.max(tp.anchor_residual);
        let closed = zqn_closed_form(z0, &mn, &tp.tau);
        out.zqn_residual = out.zqn_residual.max((closed - &tp.zq).abs().to_f64());
        out.tau.push(t);
        out.dtau.push(d1);
        out.d2tau.push(d2);
    }
    if out.anchor_residual > anchor_tol {
        return Err(Error::SignConventionViolation(format!(
            "depth {} letter {}: z_(i+1) differs from z_i(1 + A_i(z_i - 1)) by {:e} > {anchor_tol:e}",
            out.depth, out.letter, out.anchor_residual
        )));
    }
    if with_sums {
        out.sums = Some(diagnostic_sums(orbit, Some(&half), quad)?);
    }
    Ok(out)
}

/// Max over a midpoint grid of `|Z(z₀) − z₀ m e^τ/(1 + z₀(m e^τ − 1))|`.
pub fn zqn_identity_check<T: Real>(orbit: &LetterOrbit<T>, grid_points: usize, quad: &Quadrature<T>) -> Result<f64> {
    let mn = orbit.compute_mn(None)?.closed;
    let mut worst = 0.0f64;
    for z0 in midpoint_grid::<T>(&orbit.a[0].ctx(), grid_points) {
        let tp = tau_at(orbit, &z0, quad)?;
        let direct = orbit.point(&z0).z;
        worst = worst.max((zqn_closed_form(&z0, &mn, &tp.tau) - &direct).abs().to_f64());
    }
    Ok(worst)
}

/// The orbit sums `S⁽¹⁾_n(z₀)`, `E_n(z₀)`, `Q_n` and `U_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticSums {
    pub z0: Option<f64>,
    pub s1: Option<f64>,
    pub e: Option<f64>,
    pub q: f64,
    pub u: f64,
}

const OUTER_PANELS: i64 = 8;

/// Fixed composite rule for the outer integral of `Q_n` and `U_n`.
fn outer<T: Real, F: FnMut(&T) -> Result<T>>(quad: &Quadrature<T>, a: &T, b: &T, mut f: F) -> Result<T> {
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let mut g = |x: &T| match f(x) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            x.zero_like()
        }
    };
    let h = (b.clone() - a) / &a.lit(OUTER_PANELS);
    let mut acc = a.zero_like();
    for k in 0..OUTER_PANELS {
        let lo = a.clone() + &(h.clone() * &a.lit(k));
        let hi = lo.clone() + &h;
        acc += &quad.rule(&mut g, &lo, &hi);
    }
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(acc),
    }
}

/// Computes the orbit sums; the pointwise ones only when `z0` is given.
pub fn diagnostic_sums<T: Real>(orbit: &LetterOrbit<T>, z0: Option<&T>, quad: &Quadrature<T>) -> Result<DiagnosticSums> {
    let zero = orbit.a[0].zero_like();
    let rel = z0.map(|z| orbit.relative_orbit(z));
    let (mut s1, mut e, mut qn, mut un) = (zero.clone(), zero.clone(), zero.clone(), zero);
    for (i, &k) in orbit.branch.iter().enumerate() {
        let br = orbit.map().branch(k);
        if br.shape.is_linear() {
            continue;
        }
        let sing = br.singular_points();
        let (a, b) = (&orbit.a[i], &orbit.b[i]);
        let g = |t: &T| br.nonlinearity(t).unwrap_or_else(|| t.zero_like());
        if let Some(r) = &rel {
            let x = &r.x[i];
            let z = &r.z[i];
            let half = x.one_like() / &x.lit(2);
            let u = x.clone() - a;
            let w = b.clone() - x;
            let left = quad.integrate(|t| g(t) * &((t.clone() - a) / &u), a, x, &sing)?;
            let plain = quad.integrate(g, a, x, &sing)?;
            let right = quad.integrate(|t| g(t) * &((b.clone() - t) / &w), x, b, &sing)?;
            s1 += &(left.clone() - &(plain * &half));
            e += &((z.one_like() - z) * &left - &(z.clone() * &right));
        }
        qn += &outer(quad, a, b, |x| {
            let u2 = (x.clone() - a).sq();
            let w2 = (b.clone() - x).sq();
            let l = quad.integrate(|t| g(t) * &(t.clone() - a), a, x, &sing)?;
            let r = quad.integrate(|t| g(t) * &(b.clone() - t), x, b, &sing)?;
            Ok((l / &u2 - &(r / &w2)).abs())
        })?;
        un += &outer(quad, a, b, |x| {
            let fx = f2(br, x);
            let u2 = (x.clone() - a).sq();
            let w2 = (b.clone() - x).sq();
            let l = quad.integrate(|t| (fx.clone() - &f2(br, t)) * &(t.clone() - a), a, x, &sing)?;
            let r = quad.integrate(|t| (fx.clone() - &f2(br, t)) * &(b.clone() - t), x, b, &sing)?;
            Ok(l / &u2 + &(r / &w2))
        })?;
    }
    Ok(DiagnosticSums {
        z0: z0.map(|z| z.to_f64()),
        s1: rel.as_ref().map(|_| s1.to_f64()),
        e: rel.as_ref().map(|_| e.to_f64()),
        q: qn.to_f64(),
        u: un.to_f64(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::giem::{golden_lengths, standard_iem, CombinatorialPair, FamilyDescriptor};
    use crate::numerics::{BigFloat, PrecisionContext, Rational};
    use crate::rauzy::renormalize;

    #[test]
    fn translations_have_vanishing_tau() {
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        let f = Arc::new(standard_iem(golden_lengths::<Rational>(&()), pair).unwrap());
        let s = renormalize(f, 6).unwrap();
        let quad = PrecisionContext::exact().quadrature::<Rational>(&());
        let orb = LetterOrbit::new(&s, 0).unwrap();
        let d = tau_diagnostics(&orb, 5, &quad, 0.0, true).unwrap();
        assert!(d.tau.iter().chain(&d.dtau).chain(&d.d2tau).all(|v| *v == 0.0));
        assert!(d.a_i.iter().all(|v| *v == 0.0));
        assert_eq!((d.zqn_residual, d.anchor_residual, d.log_mn), (0.0, 0.0, 0.0));
        let sums = d.sums.unwrap();
        assert_eq!((sums.s1, sums.e, sums.q, sums.u), (Some(0.0), Some(0.0), 0.0, 0.0));
    }

    #[test]
    fn anchor_and_closed_form_hold_on_ko() {
        let ctx = PrecisionContext::extended(256);
        let f = FamilyDescriptor::preset("ko").unwrap().build_arc::<BigFloat>(&256).unwrap();
        let s = renormalize(f, 4).unwrap();
        let quad = ctx.quadrature::<BigFloat>(&256);
        for letter in 0..2 {
            let orb = LetterOrbit::new(&s, letter).unwrap();
            let bound = 1e3 * ctx.quad_tol;
            let d = tau_diagnostics(&orb, 7, &quad, bound, false).unwrap();
            assert!(d.anchor_residual <= bound);
            assert!(d.zqn_residual <= bound * orb.q() as f64, "{}", d.zqn_residual);
            assert!(d.decomposition_residual <= 10.0 * d.max_sum_a_sq + bound);
        }
    }

    #[test]
    fn tau_derivatives_match_finite_differences() {
        let ctx = PrecisionContext::extended(256);
        let f = FamilyDescriptor::preset("moebius").unwrap().build_arc::<BigFloat>(&256).unwrap();
        let s = renormalize(f, 3).unwrap();
        let quad = ctx.quadrature::<BigFloat>(&256);
        let orb = LetterOrbit::new(&s, 1).unwrap();
        let z = BigFloat::new(256, 0.3);
        let h = BigFloat::new(256, 1e-12);
        let at = |v: &BigFloat| tau_at(&orb, v, &quad).unwrap();
        let (lo, mid, hi) = (at(&(z.clone() - &h)), at(&z), at(&(z.clone() + &h)));
        let fd1 = (hi.tau.clone() - &lo.tau) / &(h.lit(2) * &h);
        let fd2 = (hi.dtau.clone() - &lo.dtau) / &(h.lit(2) * &h);
        assert!((fd1 - &mid.dtau).abs().to_f64() < 1e-12);
        assert!((fd2 - &mid.d2tau).abs().to_f64() < 1e-10);
    }
}
