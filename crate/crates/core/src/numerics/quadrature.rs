//! Globally adaptive Gauss-Legendre quadrature.
//!
//! Each panel carries the difference between its one-rule and two-half-rule
//! values as its error estimate; the worst panel is bisected until the summed
//! estimate drops below the tolerance. Panels touching a declared singular
//! point are split geometrically towards it.

use std::cell::RefCell;
use std::collections::HashMap;

use rug::Float;

use super::real::Real;
use crate::error::{Error, Result};

const ORDER: usize = 10;
const GRADING: i64 = 16;

thread_local! {
    static RULES: RefCell<HashMap<(usize, u32), (Vec<Float>, Vec<Float>)>> = RefCell::new(HashMap::new());
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton iteration at `bits`.
pub fn gauss_legendre(n: usize, bits: u32) -> (Vec<Float>, Vec<Float>) {
    RULES.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, bits))
            .or_insert_with(|| compute_rule(n, bits))
            .clone()
    })
}

fn compute_rule(n: usize, bits: u32) -> (Vec<Float>, Vec<Float>) {
    let prec = bits + 32;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let tol = Float::with_val(prec, 1u32) >> (bits + 16);
    for i in 0..n {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = Float::with_val(prec, guess);
        let mut dp = Float::new(prec);
        for _ in 0..200 {
            let (p, d) = legendre(n, &x);
            dp = d;
            let dx = Float::with_val(prec, &p / &dp);
            x -= &dx;
            if dx.abs() < tol {
                let (_, d) = legendre(n, &x);
                dp = d;
                break;
            }
        }
        let one_minus = Float::with_val(prec, 1 - Float::with_val(prec, &x * &x));
        let w = Float::with_val(prec, 2 / (one_minus * Float::with_val(prec, &dp * &dp)));
        nodes.push(x);
        weights.push(w);
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let mut p0 = Float::with_val(prec, 1);
    let mut p1 = x.clone();
    for k in 2..=n {
        let kf = k as u32;
        let a = Float::with_val(prec, (2 * kf - 1) * Float::with_val(prec, x * &p1));
        let b = Float::with_val(prec, (kf - 1) * &p0);
        let p2 = Float::with_val(prec, (a - b) / kf);
        p0 = p1;
        p1 = p2;
    }
    let num = Float::with_val(prec, x * &p1) - &p0;
    let den = Float::with_val(prec, x * x) - 1u32;
    let d = Float::with_val(prec, n as u32 * num / den);
    (p1, d)
}

struct Panel<T> {
    a: T,
    b: T,
    sing_left: bool,
    sing_right: bool,
    left: T,
    right: T,
    err: f64,
}

/// Adaptive integrator bound to one arithmetic context.
#[derive(Clone, Debug)]
pub struct Quadrature<T: Real> {
    nodes: Vec<T>,
    weights: Vec<T>,
    tol: f64,
    max_panels: usize,
    ctx: T::Ctx,
}

impl<T: Real> Quadrature<T> {
    pub fn new(ctx: &T::Ctx, tol: f64, max_panels: usize) -> Self {
        let bits = T::bits(ctx).min(super::real::RATIONAL_FALLBACK_BITS);
        let (xs, ws) = gauss_legendre(ORDER, bits);
        Quadrature {
            nodes: xs.iter().map(|x| T::from_big(ctx, x)).collect(),
            weights: ws.iter().map(|w| T::from_big(ctx, w)).collect(),
            tol,
            max_panels,
            ctx: ctx.clone(),
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn with_tol(&self, tol: f64) -> Self {
        let mut q = self.clone();
        q.tol = tol;
        q
    }

    /// Single application of the fixed rule on `[a, b]`.
    pub fn rule<F: FnMut(&T) -> T>(&self, f: &mut F, a: &T, b: &T) -> T {
        let half = T::from_ratio(&self.ctx, 1, 2);
        let c = (a.clone() + b) * &half;
        let r = (b.clone() - a) * &half;
        let mut acc = T::from_int(&self.ctx, 0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let t = c.clone() + &(r.clone() * x);
            acc += &(f(&t) * w);
        }
        acc * &r
    }

    fn split_point(&self, a: &T, b: &T, sing_left: bool, sing_right: bool) -> T {
        let w = b.clone() - a;
        match (sing_left, sing_right) {
            (true, false) => a.clone() + &(w / &T::from_int(&self.ctx, GRADING)),
            (false, true) => b.clone() - &(w / &T::from_int(&self.ctx, GRADING)),
            _ => (a.clone() + b) / &T::from_int(&self.ctx, 2),
        }
    }

    fn make_panel<F: FnMut(&T) -> T>(&self, f: &mut F, a: T, b: T, sl: bool, sr: bool, whole: Option<T>) -> Panel<T> {
        let whole = whole.unwrap_or_else(|| self.rule(f, &a, &b));
        let m = self.split_point(&a, &b, sl, sr);
        let left = self.rule(f, &a, &m);
        let right = self.rule(f, &m, &b);
        let err = (whole.clone() - &left - &right).abs().to_f64();
        Panel { a, b, sing_left: sl, sing_right: sr, left, right, err }
    }

    /// Integrates `f` over `[a, b]`; `singular` lists points where `f` may blow up.
    pub fn integrate<F: FnMut(&T) -> T>(&self, f: F, a: &T, b: &T, singular: &[T]) -> Result<T> {
        self.integrate_to(f, a, b, singular, self.tol)
    }

    /// As [`Quadrature::integrate`] with an explicit absolute tolerance.
    pub fn integrate_to<F: FnMut(&T) -> T>(&self, mut f: F, a: &T, b: &T, singular: &[T], tol: f64) -> Result<T> {
        if a == b {
            return Ok(T::from_int(&self.ctx, 0));
        }
        if a > b {
            return self.integrate_to(f, b, a, singular, tol).map(|v| -v);
        }
        let mut cuts: Vec<T> = singular.iter().filter(|s| *s > a && *s < b).cloned().collect();
        cuts.sort_by(|x, y| x.cmp_total(y));
        let touches = |x: &T| singular.iter().any(|s| s == x);
        let mut edges = vec![a.clone()];
        edges.extend(cuts);
        edges.push(b.clone());
        let mut panels: Vec<Panel<T>> = Vec::new();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let (sl, sr) = (touches(&w[0]), touches(&w[1]));
            panels.push(self.make_panel(&mut f, w[0].clone(), w[1].clone(), sl, sr, None));
        }
        loop {
            let total: f64 = panels.iter().map(|p| p.err).sum();
            if !total.is_finite() {
                return Err(Error::NonConvergent(format!(
                    "non-finite integrand on [{}, {}]",
                    a.to_f64(),
                    b.to_f64()
                )));
            }
            if total <= tol {
                break;
            }
            if panels.len() >= self.max_panels {
                return Err(Error::NonConvergent(format!(
                    "{} panels, error estimate {total:e} > {tol:e}",
                    panels.len()
                )));
            }
            let worst = (0..panels.len())
                .max_by(|&i, &j| panels[i].err.total_cmp(&panels[j].err))
                .expect("at least one panel");
            let p = panels.swap_remove(worst);
            let m = self.split_point(&p.a, &p.b, p.sing_left, p.sing_right);
            if m <= p.a || m >= p.b {
                return Err(Error::NonConvergent("panel width below resolution".into()));
            }
            let l = self.make_panel(&mut f, p.a, m.clone(), p.sing_left, false, Some(p.left));
            let r = self.make_panel(&mut f, m, p.b, false, p.sing_right, Some(p.right));
            panels.push(l);
            panels.push(r);
        }
        let mut acc = T::from_int(&self.ctx, 0);
        for p in &panels {
            acc += &p.left;
            acc += &p.right;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BigFloat;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let q = Quadrature::<BigFloat>::new(&256, 1e-40, 100);
        let a = BigFloat::from_int(&256, 0);
        let b = BigFloat::from_int(&256, 1);
        // x^19 integrates to 1/20 exactly with a 10-point rule
        let v = q.rule(&mut |x: &BigFloat| x.powf(&x.lit(19)), &a, &b);
        let err = (v - BigFloat::from_ratio(&256, 1, 20)).abs().to_f64();
        assert!(err < 1e-70, "{err}");
    }

    #[test]
    fn weights_sum_to_two() {
        let (_, ws) = gauss_legendre(10, 128);
        let s: Float = ws.iter().fold(Float::with_val(160, 0), |acc, w| acc + w);
        assert!((s - 2u32).abs() < 1e-35);
    }

    #[test]
    fn log_singularity_interior() {
        let q = Quadrature::<BigFloat>::new(&256, 1e-30, 4000);
        let half = BigFloat::from_ratio(&256, 1, 2);
        let f = |x: &BigFloat| (x.clone() - &half).abs().ln();
        let a = BigFloat::from_int(&256, 0);
        let b = BigFloat::from_int(&256, 1);
        let v = q.integrate(f, &a, &b, std::slice::from_ref(&half)).unwrap();
        let exact = -(BigFloat::from_int(&256, 2).ln()) - BigFloat::from_int(&256, 1);
        assert!((v - exact).abs().to_f64() < 1e-29);
    }

    #[test]
    fn reversed_bounds_negate() {
        let q = Quadrature::<f64>::new(&(), 1e-13, 100);
        let v = q.integrate(|x| x * x, &1.0, &0.0, &[]).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn panel_cap_reports_nonconvergence() {
        let q = Quadrature::<f64>::new(&(), 1e-14, 4);
        let r = q.integrate(|x: &f64| 1.0 / x.abs().sqrt(), &-1.0, &1.0, &[]);
        assert!(matches!(r, Err(Error::NonConvergent(_))));
    }
}
