use serde::Serialize;

use crate::numerics::Real;

/// `F(x) = m·x / (1 + x(m−1))` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusApproximant<T> {
    pub m: T,
}

impl<T: Real> MobiusApproximant<T> {
    pub fn new(m: T) -> Self {
        MobiusApproximant { m }
    }

    pub fn identity(ctx: &T::Ctx) -> Self {
        MobiusApproximant { m: T::from_int(ctx, 1) }
    }

    /// `M_a(x) = x e^{−a/2} / (1 + x(e^{−a/2} − 1))`, so that `F_n = M_a` for `a = −2 log m_n`.
    pub fn from_log_param(a: &T) -> Self {
        let m = if a.is_zero() { a.one_like() } else { (-(a.clone() / &a.lit(2))).exp() };
        MobiusApproximant { m }
    }

    pub fn log_param(&self) -> T {
        -(self.m.ln() * &self.m.lit(2))
    }

    fn den(&self, x: &T) -> T {
        x.one_like() + &((self.m.clone() - &x.one_like()) * x)
    }

    pub fn eval(&self, x: &T) -> T {
        self.m.clone() * x / &self.den(x)
    }

    pub fn d1(&self, x: &T) -> T {
        self.m.clone() / &self.den(x).sq()
    }

    pub fn d2(&self, x: &T) -> T {
        let den = self.den(x);
        let one = x.one_like();
        -(self.m.clone() * &(self.m.clone() - &one) * &x.lit(2)) / &(den.sq() * &den)
    }

    /// The Möbius map through `(½, v)`: `m = v / (1 − v)`.
    pub fn through_half(v: &T) -> Self {
        MobiusApproximant { m: v.clone() / &(v.one_like() - v) }
    }
}

/// Sup norms of the value, first and second derivative differences of two Möbius maps on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct C2Distance {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl C2Distance {
    pub fn norm(&self) -> f64 {
        self.c0.max(self.c1).max(self.c2)
    }
}

pub fn c2_distance<T: Real>(f: &MobiusApproximant<T>, g: &MobiusApproximant<T>, grid: &[T]) -> C2Distance {
    let mut d = C2Distance { c0: 0.0, c1: 0.0, c2: 0.0 };
    for x in grid {
        d.c0 = d.c0.max((f.eval(x) - &g.eval(x)).abs().to_f64());
        d.c1 = d.c1.max((f.d1(x) - &g.d1(x)).abs().to_f64());
        d.c2 = d.c2.max((f.d2(x) - &g.d2(x)).abs().to_f64());
    }
    d
}

/// Largest observed `‖M_a − M_b‖_{C²} / |a − b|` over the given parameter pairs.
pub fn lipschitz_constant<T: Real>(pairs: &[(T, T)], grid: &[T]) -> f64 {
    pairs
        .iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| {
            let d = c2_distance(&MobiusApproximant::from_log_param(a), &MobiusApproximant::from_log_param(b), grid);
            d.norm() / (a.clone() - b).abs().to_f64()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{uniform_grid, BigFloat, Rational};

    #[test]
    fn zero_parameter_is_identity() {
        let id = MobiusApproximant::from_log_param(&Rational::new(0, 1));
        for k in 0..=10 {
            let x = Rational::new(k, 10);
            assert_eq!(id.eval(&x), x);
            assert_eq!(id.d1(&x), Rational::new(1, 1));
            assert!(id.d2(&x).is_zero());
        }
    }

    #[test]
    fn value_at_half() {
        let a = BigFloat::new(128, 0.7);
        let m = MobiusApproximant::from_log_param(&a);
        let e = (-(a.clone() / &a.lit(2))).exp();
        let want = e.clone() / &(e.one_like() + &e);
        assert!((m.eval(&a.lit_f64(0.5)) - &want).abs().to_f64() < 1e-35);
        let back = m.log_param();
        assert!((back - &a).abs().to_f64() < 1e-35);
    }

    #[test]
    fn fixes_endpoints_and_fits_through_half() {
        let m = MobiusApproximant::new(Rational::new(7, 3));
        assert!(m.eval(&Rational::new(0, 1)).is_zero());
        assert_eq!(m.eval(&Rational::new(1, 1)), Rational::new(1, 1));
        let fit = MobiusApproximant::through_half(&m.eval(&Rational::new(1, 2)));
        assert_eq!(fit, m);
    }

    #[test]
    fn c2_lipschitz_in_log_parameter() {
        let grid = uniform_grid::<f64>(&(), 65);
        let pairs: Vec<(f64, f64)> = (0..20)
            .flat_map(|i| (0..20).map(move |j| (-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64)))
            .collect();
        let c = lipschitz_constant(&pairs, &grid);
        assert!(c.is_finite() && c > 0.0 && c < 10.0, "{c}");
    }
}
