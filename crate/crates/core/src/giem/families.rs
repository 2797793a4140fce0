//! Built-in map families and tuning to the golden rotation number.

use std::sync::Arc;

use rug::Integer;

use super::combinatorics::{CombinatorialPair, StepType};
use super::map::Giem;
use super::shape::{KoParams, KoShape, Shape};
use crate::error::{Error, Result};
use crate::numerics::Real;
use crate::rauzy::RauzyState;

/// Fibonacci index used for the rational stand-in of the golden mean.
pub const GOLDEN_CONVERGENT: u32 = 80;

fn checked<T: Real>(f: Giem<T>, label: &str) -> Result<Giem<T>> {
    let report = f.validate();
    if !report.is_valid() {
        return Err(Error::InvalidFamilyParams(format!("{label}: {}", report.messages.join("; "))));
    }
    Ok(f.with_label(label))
}

/// Piecewise translation with `|f(I_α)| = |I_α|`.
pub fn standard_iem<T: Real>(lengths: Vec<T>, pair: CombinatorialPair) -> Result<Giem<T>> {
    let shapes = vec![Shape::Linear; lengths.len()];
    let f = Giem::new(pair, lengths.clone(), lengths, shapes)?;
    checked(f, "standard")
}

/// Piecewise-linear map with slopes proportional to `slopes`, rescaled so the images tile.
pub fn affine_iem<T: Real>(lengths: Vec<T>, pair: CombinatorialPair, slopes: Vec<T>) -> Result<Giem<T>> {
    if slopes.len() != lengths.len() || slopes.iter().any(|s| !s.is_positive()) {
        return Err(Error::InvalidFamilyParams("need one positive slope per letter".into()));
    }
    let total = lengths
        .iter()
        .zip(&slopes)
        .fold(lengths[0].zero_like(), |acc, (l, s)| acc + &(l.clone() * s));
    let images: Vec<T> = lengths.iter().zip(&slopes).map(|(l, s)| l.clone() * s / &total).collect();
    let shapes = vec![Shape::Linear; lengths.len()];
    let f = Giem::new(pair, lengths, images, shapes)?;
    checked(f, "affine")
}

/// Affine branches with prescribed image lengths.
pub fn affine_with_images<T: Real>(lengths: Vec<T>, images: Vec<T>, pair: CombinatorialPair) -> Result<Giem<T>> {
    let shapes = vec![Shape::Linear; lengths.len()];
    let f = Giem::new(pair, lengths, images, shapes)?;
    checked(f, "affine")
}

/// Branches `h(u) = m·u/(1+(m−1)u)` rescaled to their domain and image.
pub fn moebius_iem<T: Real>(
    lengths: Vec<T>,
    images: Option<Vec<T>>,
    pair: CombinatorialPair,
    ms: Vec<T>,
) -> Result<Giem<T>> {
    if ms.len() != lengths.len() {
        return Err(Error::InvalidFamilyParams("need one Möbius parameter per letter".into()));
    }
    let shapes = ms.into_iter().map(Shape::moebius).collect::<Result<Vec<_>>>()?;
    let images = images.unwrap_or_else(|| lengths.clone());
    let f = Giem::new(pair, lengths, images, shapes)?;
    checked(f, "moebius")
}

/// Branches whose nonlinearity has a logarithmic singularity: `f'` is absolutely continuous,
/// `f''` lies in every `L_p` but is unbounded.
pub fn ko_iem<T: Real>(
    lengths: Vec<T>,
    images: Option<Vec<T>>,
    pair: CombinatorialPair,
    profile: Vec<KoParams<T>>,
    zero_mean: bool,
) -> Result<Giem<T>> {
    if profile.len() != lengths.len() {
        return Err(Error::InvalidFamilyParams("need one profile per letter".into()));
    }
    let shapes = profile
        .into_iter()
        .map(|p| {
            if p.amplitude.is_zero() && p.smooth.is_zero() {
                Ok(Shape::Linear)
            } else {
                KoShape::new(p, zero_mean).map(Shape::Ko)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let images = images.unwrap_or_else(|| lengths.clone());
    let f = Giem::new(pair, lengths, images, shapes)?;
    checked(f, if zero_mean { "ko_zero_mean" } else { "ko" })
}

/// `g = (√5 − 1)/2`; in exact arithmetic the Fibonacci convergent `F₇₉/F₈₀`.
pub fn golden_mean<T: Real>(ctx: &T::Ctx) -> T {
    if T::EXACT {
        let (mut a, mut b) = (Integer::from(1), Integer::from(1));
        for _ in 2..GOLDEN_CONVERGENT {
            let c = Integer::from(&a + &b);
            a = b;
            b = c;
        }
        T::from_integer(ctx, &a) / &T::from_integer(ctx, &b)
    } else {
        (T::from_int(ctx, 5).sqrt() - &T::from_int(ctx, 1)) / &T::from_int(ctx, 2)
    }
}

/// `(g², g)`: the rotation by the golden mean as a two-interval exchange.
pub fn golden_lengths<T: Real>(ctx: &T::Ctx) -> Vec<T> {
    let g = golden_mean::<T>(ctx);
    vec![T::from_int(ctx, 1) - &g, g]
}

/// Whether the induction types of `f` follow `expected` for `depth` steps.
///
/// Returns `None` on full agreement, otherwise the depth of the first mismatch and the
/// type that was seen there (a tie counts as the opposite of the expected type).
pub fn first_type_mismatch<T: Real>(
    f: Arc<Giem<T>>,
    depth: usize,
    expected: impl Fn(usize) -> StepType,
) -> Option<(usize, StepType)> {
    let mut s = RauzyState::new(f);
    for n in 0..depth {
        match s.step() {
            Ok(()) => {
                let seen = s.history()[n].kind;
                if seen != expected(n) {
                    return Some((n, seen));
                }
            }
            Err(_) => return Some((n, expected(n).other())),
        }
    }
    None
}

/// Golden rotation: types alternate starting with the top row.
pub fn golden_type(n: usize) -> StepType {
    StepType::from_index(n % 2)
}

/// Bisects the first image length of a two-interval family until its first `depth`
/// induction types are those of the golden rotation.
///
/// The search runs in double precision; `build` receives the trial split.
pub fn tune_golden_split(build: impl Fn(f64) -> Result<Giem<f64>>, depth: usize) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f = Arc::new(build(mid)?);
        match first_type_mismatch(f, depth, golden_type) {
            None => return Ok(mid),
            // the rotation number increases with the split; a top win where a bottom win
            // was expected means the split is too large
            Some((_, StepType::Top)) => hi = mid,
            Some((_, StepType::Bottom)) => lo = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{BigFloat, Rational};

    fn rot_pair() -> CombinatorialPair {
        CombinatorialPair::from_monodromy(&[2, 1]).unwrap()
    }

    #[test]
    fn standard_rotation_by_lambda_b() {
        let f = standard_iem(vec![Rational::new(2, 5), Rational::new(3, 5)], rot_pair()).unwrap();
        let r = f.validate();
        assert!(r.is_valid() && r.genus_one);
        assert_eq!(f.eval(&Rational::new(1, 10)).unwrap(), Rational::new(7, 10));
        assert_eq!(f.eval(&Rational::new(1, 2)).unwrap(), Rational::new(1, 10));
        assert!(f.eval(&Rational::new(1, 1)).is_err());
    }

    #[test]
    fn affine_images_tile() {
        let f = affine_iem(
            vec![Rational::new(1, 3), Rational::new(2, 3)],
            rot_pair(),
            vec![Rational::new(2, 1), Rational::new(1, 2)],
        )
        .unwrap();
        // slopes 2c and c/2 with c·(2/3 + 1/3) = 1
        assert_eq!(f.image_lengths(), vec![Rational::new(2, 3), Rational::new(1, 3)]);
        assert!(f.validate().is_valid());
    }

    #[test]
    fn ko_with_zero_amplitude_is_standard() {
        let lens = vec![Rational::new(2, 5), Rational::new(3, 5)];
        let p = KoParams { amplitude: Rational::new(0, 1), center: Rational::new(1, 2), smooth: Rational::new(0, 1) };
        let f = ko_iem(lens.clone(), None, rot_pair(), vec![p.clone(), p], false).unwrap();
        let g = standard_iem(lens, rot_pair()).unwrap();
        for k in 0..20 {
            let x = Rational::new(k, 20);
            assert_eq!(f.eval(&x).unwrap(), g.eval(&x).unwrap());
        }
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let lens = vec![0.5, 0.5];
        let p = KoParams { amplitude: 5.0, center: 0.5, smooth: 0.0 };
        let e = ko_iem(lens.clone(), None, rot_pair(), vec![p.clone(), p], false).unwrap_err();
        assert!(matches!(e, Error::InvalidFamilyParams(_)));
        let p = KoParams { amplitude: 0.1, center: 1.5, smooth: 0.0 };
        assert!(ko_iem(lens, None, rot_pair(), vec![p.clone(), p], false).is_err());
    }

    #[test]
    fn golden_lengths_sum_to_one() {
        let l = golden_lengths::<Rational>(&());
        assert_eq!(l[0].clone() + &l[1], Rational::new(1, 1));
        let l = golden_lengths::<BigFloat>(&256);
        let g = l[1].clone();
        assert!((g.clone() * &g - &l[0]).abs().to_f64() < 1e-70);
    }

    #[test]
    fn tuning_recovers_golden_rotation() {
        let t = tune_golden_split(
            |s| standard_iem(vec![1.0 - s, s], rot_pair()),
            24,
        )
        .unwrap();
        let g = (5f64.sqrt() - 1.0) / 2.0;
        assert!((t - g).abs() < 1e-9, "{t} vs {g}");
    }
}
