//! Normalized branch shapes `h: [0,1] → [0,1]` with `h(0) = 0`, `h(1) = 1`, `h' > 0`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{pow2, Real};

/// Value and first two derivatives of a shape at one point.
#[derive(Clone, Debug)]
pub struct Jet<T> {
    pub h: T,
    pub dh: T,
    pub d2h: Option<T>,
}

/// User-supplied shape.
pub trait ShapeFn<T: Real>: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn h(&self, u: &T) -> T;
    fn dh(&self, u: &T) -> T;
    fn d2h(&self, _u: &T) -> Option<T> {
        None
    }
    fn has_second_derivative(&self) -> bool {
        false
    }
    fn singular_points(&self) -> Vec<T> {
        Vec::new()
    }
}

/// Parameters of the log-singular profile.
#[derive(Clone, Debug, PartialEq)]
pub struct KoParams<T> {
    /// Coefficient `c` of the `s² log|s|` term.
    pub amplitude: T,
    /// Singular point `u₀ ∈ (0,1)` in normalized coordinates.
    pub center: T,
    /// Coefficient of the polynomial correction.
    pub smooth: T,
}

#[derive(Clone, Debug)]
struct KoConst<R> {
    c: R,
    u0: R,
    b: R,
    kappa: R,
    psi0: R,
    dpsi: R,
    zero_mean: bool,
}

impl<R: Real> KoConst<R> {
    fn new(c: R, u0: R, b: R, zero_mean: bool) -> Self {
        let kappa = if zero_mean {
            // ∫₀¹ log|u−u₀| du
            let one = u0.one_like();
            let v0 = one.clone() - &u0;
            v0.clone() * &v0.ln() + &(u0.clone() * &u0.ln()) - &one
        } else {
            u0.zero_like()
        };
        let mut k = KoConst { c, u0: u0.clone(), b, kappa, psi0: u0.zero_like(), dpsi: u0.zero_like(), zero_mean };
        let zero = u0.zero_like();
        let one = u0.one_like();
        let p0 = k.raw(&zero).0;
        let p1 = k.raw(&one).0;
        k.dpsi = p1 - &p0;
        k.psi0 = p0;
        k
    }

    /// Unnormalized `ψ, ψ', ψ''` with `ψ'' = log|u−u₀| − κ`.
    fn raw(&self, u: &R) -> (R, R, R) {
        let s = u.clone() - &self.u0;
        if s.is_zero() {
            return (s.zero_like(), s.zero_like(), -self.kappa.clone());
        }
        let l = s.abs().ln();
        let half = s.lit_f64(0.5);
        let three_q = s.lit_f64(0.75);
        let psi = s.sq() * &(l.clone() * &half - &three_q - &(self.kappa.clone() * &half));
        let dpsi = s.clone() * &(l.clone() - &s.one_like() - &self.kappa);
        (psi, dpsi, l - &self.kappa)
    }

    fn jet(&self, u: &R) -> Jet<R> {
        let (psi, dpsi, d2psi) = self.raw(u);
        let pt = psi - &self.psi0 - &(u.clone() * &self.dpsi);
        let dpt = dpsi - &self.dpsi;
        let one = u.one_like();
        let (sig, dsig, d2sig) = if self.zero_mean {
            let u2 = u.sq();
            let sig = u2.clone() * u - &(u2.clone() * &u.lit_f64(1.5)) + &(u.clone() * &u.lit_f64(0.5));
            let dsig = u2 * &u.lit(3) - &(u.clone() * &u.lit(3)) + &u.lit_f64(0.5);
            let d2sig = u.clone() * &u.lit(6) - &u.lit(3);
            (sig, dsig, d2sig)
        } else {
            (u.sq() - u, u.clone() * &u.lit(2) - &one, u.lit(2))
        };
        Jet {
            h: u.clone() + &(self.c.clone() * &pt) + &(self.b.clone() * &sig),
            dh: one + &(self.c.clone() * &dpt) + &(self.b.clone() * &dsig),
            d2h: Some(self.c.clone() * &d2psi + &(self.b.clone() * &d2sig)),
        }
    }
}

/// Log-singular shape `h = u + c·ψ̃(u) + b·σ(u)`, where `ψ̃'' = log|u−u₀|` up to a constant.
#[derive(Clone, Debug)]
pub struct KoShape<T: Real> {
    params: KoParams<T>,
    exact: KoConst<T>,
    fast: KoConst<f64>,
}

impl<T: Real> KoShape<T> {
    pub fn new(params: KoParams<T>, zero_mean: bool) -> Result<Self> {
        let zero = params.center.zero_like();
        let one = params.center.one_like();
        if !(params.center > zero && params.center < one) {
            return Err(Error::InvalidFamilyParams(format!(
                "singular point {} must lie in (0,1)",
                params.center.to_f64()
            )));
        }
        let exact = KoConst::new(params.amplitude.clone(), params.center.clone(), params.smooth.clone(), zero_mean);
        let fast = KoConst::new(params.amplitude.to_f64(), params.center.to_f64(), params.smooth.to_f64(), zero_mean);
        let shape = KoShape { params, exact, fast };
        let min = shape.min_slope();
        if !(min > 0.0) {
            return Err(Error::InvalidFamilyParams(format!(
                "profile is not increasing (min h' ≈ {min:.3e})"
            )));
        }
        Ok(shape)
    }

    pub fn params(&self) -> &KoParams<T> {
        &self.params
    }

    pub fn zero_mean(&self) -> bool {
        self.exact.zero_mean
    }

    /// Smallest `h'` over a fine sample grid.
    pub fn min_slope(&self) -> f64 {
        let n = 8192;
        (0..=n)
            .map(|k| self.fast.jet(&(k as f64 / n as f64)).dh)
            .fold(f64::INFINITY, f64::min)
    }

    fn inverse(&self, v: &T) -> T {
        let vf = v.to_f64();
        let guess = solve_increasing(&vf, vf, |u| {
            let j = self.fast.jet(u);
            (j.h, j.dh)
        }, &1e-15, 60);
        solve_increasing(v, v.lit_f64(guess), |u| {
            let j = self.exact.jet(u);
            (j.h, j.dh)
        }, &newton_tol(&v.ctx()), 40)
    }
}

fn newton_tol<T: Real>(ctx: &T::Ctx) -> T {
    if T::EXACT {
        pow2(ctx, -240)
    } else {
        pow2(ctx, 4 - T::bits(ctx) as i32)
    }
}

/// Safeguarded Newton iteration for an increasing `h` on `[0,1]`.
fn solve_increasing<T: Real>(v: &T, guess: T, f: impl Fn(&T) -> (T, T), tol: &T, max_iter: usize) -> T {
    let mut lo = v.zero_like();
    let mut hi = v.one_like();
    let mut u = guess;
    if !(u > lo && u < hi) {
        u = v.lit_f64(0.5);
    }
    for _ in 0..max_iter {
        let (h, dh) = f(&u);
        let r = h - v;
        if r.is_zero() {
            return u;
        }
        if r.is_positive() {
            hi = u.clone();
        } else {
            lo = u.clone();
        }
        let step = r / &dh;
        let mut next = u.clone() - &step;
        if step.abs() <= *tol {
            // converged; a rounded step can land on a stale bracket end
            return if next >= lo && next <= hi { next } else { u };
        }
        if !(next > lo && next < hi) {
            next = (lo.clone() + &hi) * &v.lit_f64(0.5);
        }
        let moved = (next.clone() - &u).abs();
        u = next;
        if moved <= *tol {
            break;
        }
    }
    u
}

#[derive(Clone, Debug)]
pub enum Shape<T: Real> {
    /// `h(u) = u`.
    Linear,
    /// `h(u) = m·u / (1 + (m−1)·u)`.
    Moebius { m: T },
    Ko(KoShape<T>),
    Custom(Arc<dyn ShapeFn<T>>),
}

impl<T: Real> Shape<T> {
    pub fn moebius(m: T) -> Result<Self> {
        if !m.is_positive() {
            return Err(Error::InvalidFamilyParams(format!("Möbius parameter {} must be positive", m.to_f64())));
        }
        Ok(Shape::Moebius { m })
    }

    pub fn name(&self) -> String {
        match self {
            Shape::Linear => "linear".into(),
            Shape::Moebius { .. } => "moebius".into(),
            Shape::Ko(_) => "ko".into(),
            Shape::Custom(c) => c.name(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Shape::Linear)
    }

    pub fn has_second_derivative(&self) -> bool {
        match self {
            Shape::Custom(c) => c.has_second_derivative(),
            _ => true,
        }
    }

    pub fn eval(&self, u: &T) -> T {
        match self {
            Shape::Linear => u.clone(),
            Shape::Moebius { m } => {
                let den = u.one_like() + &((m.clone() - &u.one_like()) * u);
                m.clone() * u / &den
            }
            Shape::Ko(k) => k.exact.jet(u).h,
            Shape::Custom(c) => c.h(u),
        }
    }

    pub fn jet(&self, u: &T) -> Jet<T> {
        match self {
            Shape::Linear => Jet { h: u.clone(), dh: u.one_like(), d2h: Some(u.zero_like()) },
            Shape::Moebius { m } => {
                let one = u.one_like();
                let mm1 = m.clone() - &one;
                let den = one + &(mm1.clone() * u);
                let den2 = den.sq();
                Jet {
                    h: m.clone() * u / &den,
                    dh: m.clone() / &den2,
                    d2h: Some(-(m.clone() * &mm1 * &u.lit(2)) / &(den2 * &den)),
                }
            }
            Shape::Ko(k) => k.exact.jet(u),
            Shape::Custom(c) => Jet { h: c.h(u), dh: c.dh(u), d2h: c.d2h(u) },
        }
    }

    pub fn inverse(&self, v: &T) -> T {
        match self {
            Shape::Linear => v.clone(),
            Shape::Moebius { m } => {
                let den = m.clone() - &((m.clone() - &v.one_like()) * v);
                v.clone() / &den
            }
            Shape::Ko(k) => k.inverse(v),
            Shape::Custom(c) => solve_increasing(v, v.clone(), |u| (c.h(u), c.dh(u)), &newton_tol(&v.ctx()), 200),
        }
    }

    /// Normalized points where `h''` is unbounded.
    pub fn singular_points(&self) -> Vec<T> {
        match self {
            Shape::Ko(k) if !k.params.amplitude.is_zero() => vec![k.params.center.clone()],
            Shape::Custom(c) => c.singular_points(),
            _ => Vec::new(),
        }
    }
}
