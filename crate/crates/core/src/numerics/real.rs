//! Scalar types used throughout the crate.
//!
//! Everything downstream is generic over [`Real`]. Three implementations exist:
//! [`Rational`] (exact), [`BigFloat`] (MPFR at a configurable precision) and
//! plain `f64`, which is only used internally for fast parameter searches.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::ops::Pow;
use rug::{Float, Integer};

use crate::error::{Error, Result};

/// Precision used when an exact rational has to pass through a transcendental function.
pub const RATIONAL_FALLBACK_BITS: u32 = 256;

pub trait Real:
    Sized
    + Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
{
    /// Whatever is needed to manufacture new values (precision for floats).
    type Ctx: Clone + fmt::Debug + PartialEq + Send + Sync + 'static;

    const EXACT: bool;

    fn ctx(&self) -> Self::Ctx;
    fn from_f64(ctx: &Self::Ctx, v: f64) -> Self;
    fn from_int(ctx: &Self::Ctx, v: i64) -> Self;
    fn from_big(ctx: &Self::Ctx, v: &Float) -> Self;
    fn from_integer(ctx: &Self::Ctx, v: &Integer) -> Self;
    /// Parses `"0.25"`, `"-1.5e-3"` or `"3/7"`.
    fn parse(ctx: &Self::Ctx, s: &str) -> Result<Self>;
    /// Significand bits, `u32::MAX` for exact arithmetic.
    fn bits(ctx: &Self::Ctx) -> u32;

    fn to_f64(&self) -> f64;
    fn to_big(&self, bits: u32) -> Float;
    /// Full-precision decimal text.
    fn to_text(&self) -> String;

    fn abs(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powf(&self, e: &Self) -> Self;
    fn is_zero(&self) -> bool;
    fn is_finite(&self) -> bool;

    fn from_ratio(ctx: &Self::Ctx, n: i64, d: i64) -> Self {
        Self::from_int(ctx, n) / Self::from_int(ctx, d)
    }

    /// Two values closer than this are treated as equal by degeneracy checks.
    fn equality_tolerance(ctx: &Self::Ctx) -> Self {
        if Self::EXACT {
            Self::from_int(ctx, 0)
        } else {
            pow2(ctx, 8 - Self::bits(ctx) as i32)
        }
    }

    /// Unit roundoff.
    fn epsilon(ctx: &Self::Ctx) -> Self {
        if Self::EXACT {
            Self::from_int(ctx, 0)
        } else {
            pow2(ctx, 1 - Self::bits(ctx) as i32)
        }
    }

    fn lit(&self, v: i64) -> Self {
        Self::from_int(&self.ctx(), v)
    }

    fn lit_f64(&self, v: f64) -> Self {
        Self::from_f64(&self.ctx(), v)
    }

    fn zero_like(&self) -> Self {
        self.lit(0)
    }

    fn one_like(&self) -> Self {
        self.lit(1)
    }

    fn sq(&self) -> Self {
        self.clone() * self
    }

    fn recip(&self) -> Self {
        self.one_like() / self
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn is_negative(&self) -> bool {
        *self < self.zero_like()
    }

    fn is_positive(&self) -> bool {
        *self > self.zero_like()
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

/// `2^e` in the given context.
pub fn pow2<T: Real>(ctx: &T::Ctx, e: i32) -> T {
    let two = T::from_int(ctx, 2);
    let mut out = T::from_int(ctx, 1);
    for _ in 0..e.unsigned_abs() {
        if e > 0 {
            out *= &two;
        } else {
            out /= &two;
        }
    }
    out
}

/// Splits `"1.25e-3"` into (digits as integer, decimal exponent).
fn parse_decimal_parts(s: &str) -> Result<(Integer, i64)> {
    let bad = || Error::Parse(format!("cannot parse {s:?} as a number"));
    let t = s.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut n = Integer::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10)
        .map_err(|_| bad())?;
    if neg {
        n = -n;
    }
    Ok((n, exp - frac_part.len() as i64))
}

fn parse_rational(s: &str) -> Result<rug::Rational> {
    let t = s.trim();
    if let Some((a, b)) = t.split_once('/') {
        let num = parse_rational(a)?;
        let den = parse_rational(b)?;
        if den == 0 {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(num / den);
    }
    let (n, e) = parse_decimal_parts(t)?;
    let ten = Integer::from(10);
    let scale = ten.pow(e.unsigned_abs() as u32);
    Ok(if e >= 0 {
        rug::Rational::from(n * scale)
    } else {
        rug::Rational::from((n, scale))
    })
}

// ---------------------------------------------------------------------------
// BigFloat

/// MPFR float with a fixed significand precision.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct BigFloat(pub Float);

impl BigFloat {
    pub fn new(bits: u32, v: f64) -> Self {
        BigFloat(Float::with_val(bits, v))
    }

    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    /// Decimal digits that round-trip at `bits` of precision.
    pub fn digits_for(bits: u32) -> usize {
        (bits as f64 * 0.302).ceil() as usize + 2
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.to_string_radix(10, Some(20)))
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Real for BigFloat {
    type Ctx = u32;
    const EXACT: bool = false;

    fn ctx(&self) -> u32 {
        self.0.prec()
    }
    fn from_f64(ctx: &u32, v: f64) -> Self {
        BigFloat(Float::with_val(*ctx, v))
    }
    fn from_int(ctx: &u32, v: i64) -> Self {
        BigFloat(Float::with_val(*ctx, v))
    }
    fn from_ratio(ctx: &u32, n: i64, d: i64) -> Self {
        BigFloat(Float::with_val(*ctx, rug::Rational::from((n, d))))
    }
    fn from_big(ctx: &u32, v: &Float) -> Self {
        BigFloat(Float::with_val(*ctx, v))
    }
    fn from_integer(ctx: &u32, v: &Integer) -> Self {
        BigFloat(Float::with_val(*ctx, v))
    }
    fn parse(ctx: &u32, s: &str) -> Result<Self> {
        let t = s.trim();
        if t.contains('/') {
            let r = parse_rational(t)?;
            return Ok(BigFloat(Float::with_val(*ctx, r)));
        }
        let p = Float::parse(t).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        Ok(BigFloat(Float::with_val(*ctx, p)))
    }
    fn bits(ctx: &u32) -> u32 {
        *ctx
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn to_big(&self, bits: u32) -> Float {
        Float::with_val(bits, &self.0)
    }
    fn to_text(&self) -> String {
        if self.0.is_zero() {
            return "0".into();
        }
        self.0
            .to_string_radix(10, Some(Self::digits_for(self.0.prec())))
    }
    fn abs(&self) -> Self {
        BigFloat(self.0.clone().abs())
    }
    fn ln(&self) -> Self {
        BigFloat(self.0.clone().ln())
    }
    fn exp(&self) -> Self {
        BigFloat(self.0.clone().exp())
    }
    fn sqrt(&self) -> Self {
        BigFloat(self.0.clone().sqrt())
    }
    fn powf(&self, e: &Self) -> Self {
        BigFloat(self.0.clone().pow(&e.0))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
}

macro_rules! newtype_ops {
    ($t:ident) => {
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                $t(-self.0)
            }
        }
        newtype_ops!(@bin $t, Add, add, AddAssign, add_assign);
        newtype_ops!(@bin $t, Sub, sub, SubAssign, sub_assign);
        newtype_ops!(@bin $t, Mul, mul, MulAssign, mul_assign);
        newtype_ops!(@bin $t, Div, div, DivAssign, div_assign);
    };
    (@bin $t:ident, $tr:ident, $m:ident, $tra:ident, $ma:ident) => {
        impl $tr for $t {
            type Output = $t;
            fn $m(mut self, rhs: $t) -> $t {
                self.0.$ma(&rhs.0);
                self
            }
        }
        impl<'a> $tr<&'a $t> for $t {
            type Output = $t;
            fn $m(mut self, rhs: &'a $t) -> $t {
                self.0.$ma(&rhs.0);
                self
            }
        }
        impl<'a> $tra<&'a $t> for $t {
            fn $ma(&mut self, rhs: &'a $t) {
                self.0.$ma(&rhs.0);
            }
        }
    };
}

newtype_ops!(BigFloat);
newtype_ops!(Rational);

// ---------------------------------------------------------------------------
// Rational

/// Exact rational number.
///
/// Transcendental functions are exact at trivial arguments (`ln 1`, `exp 0`,
/// square roots of perfect squares); elsewhere they are evaluated at
/// [`RATIONAL_FALLBACK_BITS`] and the binary result is taken as exact.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Rational(pub rug::Rational);

impl Rational {
    pub fn new(n: i64, d: i64) -> Self {
        Rational(rug::Rational::from((n, d)))
    }

    fn via_float(&self, f: impl FnOnce(Float) -> Float) -> Self {
        let x = Float::with_val(RATIONAL_FALLBACK_BITS, &self.0);
        let y = f(x);
        Rational(y.to_rational().unwrap_or_default())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Real for Rational {
    type Ctx = ();
    const EXACT: bool = true;

    fn ctx(&self) {}
    fn from_f64(_: &(), v: f64) -> Self {
        Rational(rug::Rational::from_f64(v).expect("finite f64"))
    }
    fn from_int(_: &(), v: i64) -> Self {
        Rational(rug::Rational::from(v))
    }
    fn from_ratio(_: &(), n: i64, d: i64) -> Self {
        Rational::new(n, d)
    }
    fn from_big(_: &(), v: &Float) -> Self {
        Rational(v.to_rational().unwrap_or_default())
    }
    fn from_integer(_: &(), v: &Integer) -> Self {
        Rational(rug::Rational::from(v))
    }
    fn parse(_: &(), s: &str) -> Result<Self> {
        parse_rational(s).map(Rational)
    }
    fn bits(_: &()) -> u32 {
        u32::MAX
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn to_big(&self, bits: u32) -> Float {
        Float::with_val(bits, &self.0)
    }
    fn to_text(&self) -> String {
        self.0.to_string()
    }
    fn abs(&self) -> Self {
        Rational(self.0.clone().abs())
    }
    fn ln(&self) -> Self {
        if self.0 == 1 {
            return Rational::from_int(&(), 0);
        }
        self.via_float(|x| x.ln())
    }
    fn exp(&self) -> Self {
        if self.0 == 0 {
            return Rational::from_int(&(), 1);
        }
        self.via_float(|x| x.exp())
    }
    fn sqrt(&self) -> Self {
        let (n, d) = (self.0.numer(), self.0.denom());
        if *n >= 0 && n.is_perfect_square() && d.is_perfect_square() {
            let rn = n.clone().sqrt();
            let rd = d.clone().sqrt();
            return Rational(rug::Rational::from((rn, rd)));
        }
        self.via_float(|x| x.sqrt())
    }
    fn powf(&self, e: &Self) -> Self {
        if *e.0.denom() == 1 {
            if let Some(k) = e.0.numer().to_i32() {
                let base = if k < 0 { self.0.clone().recip() } else { self.0.clone() };
                return Rational(base.pow(k.unsigned_abs()));
            }
        }
        let ef = Float::with_val(RATIONAL_FALLBACK_BITS, &e.0);
        self.via_float(|x| x.pow(&ef))
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
    fn is_finite(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// f64

impl Real for f64 {
    type Ctx = ();
    const EXACT: bool = false;

    fn ctx(&self) {}
    fn from_f64(_: &(), v: f64) -> Self {
        v
    }
    fn from_int(_: &(), v: i64) -> Self {
        v as f64
    }
    fn from_big(_: &(), v: &Float) -> Self {
        v.to_f64()
    }
    fn from_integer(_: &(), v: &Integer) -> Self {
        v.to_f64()
    }
    fn parse(_: &(), s: &str) -> Result<Self> {
        let t = s.trim();
        if t.contains('/') {
            return parse_rational(t).map(|r| r.to_f64());
        }
        t.parse::<f64>()
            .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
    }
    fn bits(_: &()) -> u32 {
        53
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_big(&self, bits: u32) -> Float {
        Float::with_val(bits, *self)
    }
    fn to_text(&self) -> String {
        format!("{:.16e}", self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powf(&self, e: &Self) -> Self {
        f64::powf(*self, *e)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        let r = Rational::parse(&(), "0.125").unwrap();
        assert_eq!(r, Rational::new(1, 8));
        let r = Rational::parse(&(), "-2.5e-1").unwrap();
        assert_eq!(r, Rational::new(-1, 4));
        let r = Rational::parse(&(), "3/7").unwrap();
        assert_eq!(r, Rational::new(3, 7));
        assert!(Rational::parse(&(), "abc").is_err());
        assert!(Rational::parse(&(), "1/0").is_err());
    }

    #[test]
    fn bigfloat_parse_is_correctly_rounded() {
        let x = BigFloat::parse(&256, "0.1").unwrap();
        let exact = rug::Rational::from((1, 10));
        let err = (Float::with_val(512, &x.0) - Float::with_val(512, &exact)).abs();
        assert!(err < Float::with_val(64, 1e-76));
    }

    #[test]
    fn rational_transcendentals_are_exact_at_trivial_points() {
        let one = Rational::from_int(&(), 1);
        assert!(one.ln().is_zero());
        assert_eq!(Rational::from_int(&(), 0).exp(), one);
        assert_eq!(Rational::new(9, 4).sqrt(), Rational::new(3, 2));
        assert_eq!(Rational::new(2, 3).powf(&Rational::from_int(&(), -2)), Rational::new(9, 4));
    }

    #[test]
    fn rational_fallback_is_accurate() {
        let two = Rational::from_int(&(), 2);
        let l = two.ln().to_f64();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn tolerances_scale_with_precision() {
        let t128 = BigFloat::equality_tolerance(&128).to_f64();
        assert_eq!(t128, 2f64.powi(-120));
        assert!(Rational::equality_tolerance(&()).is_zero());
        assert_eq!(BigFloat::epsilon(&64).to_f64(), 2f64.powi(-63));
    }

    #[test]
    fn bigfloat_text_has_enough_digits() {
        let x = BigFloat::from_ratio(&256, 1, 3);
        let s = x.to_text();
        let back = BigFloat::parse(&256, &s).unwrap();
        assert_eq!(back, x);
    }
}
