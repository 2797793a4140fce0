use super::real::Real;
use crate::error::{Error, Result};

/// `n` equally spaced points of `[0, 1]`, endpoints included.
pub fn uniform_grid<T: Real>(ctx: &T::Ctx, n: usize) -> Vec<T> {
    let den = (n.max(2) - 1) as i64;
    (0..n).map(|k| T::from_ratio(ctx, k as i64, den)).collect()
}

/// Midpoints of `n` equal cells of `[0, 1]`.
pub fn midpoint_grid<T: Real>(ctx: &T::Ctx, n: usize) -> Vec<T> {
    (0..n)
        .map(|k| T::from_ratio(ctx, 2 * k as i64 + 1, 2 * n as i64))
        .collect()
}

/// Sum of absolute successive differences of `ys` sampled at increasing `xs`.
pub fn total_variation<T: Real>(xs: &[T], ys: &[T]) -> Result<T> {
    check_grid(xs, ys, 2)?;
    let mut acc = ys[0].zero_like();
    for w in ys.windows(2) {
        acc += &(w[1].clone() - &w[0]).abs();
    }
    Ok(acc)
}

fn check_grid<T: Real>(xs: &[T], ys: &[T], min: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::BadGrid(format!("{} abscissae, {} values", xs.len(), ys.len())));
    }
    if xs.len() < min {
        return Err(Error::BadGrid(format!("need at least {min} points, got {}", xs.len())));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid("abscissae not strictly increasing".into()));
    }
    Ok(())
}

/// Central differences inside, one-sided at the ends.
pub fn grid_derivative<T: Real>(xs: &[T], ys: &[T]) -> Result<Vec<T>> {
    check_grid(xs, ys, 3)?;
    let n = xs.len();
    let slope = |i: usize, j: usize| (ys[j].clone() - &ys[i]) / &(xs[j].clone() - &xs[i]);
    let mut out = Vec::with_capacity(n);
    out.push(slope(0, 1));
    for i in 1..n - 1 {
        out.push(slope(i - 1, i + 1));
    }
    out.push(slope(n - 2, n - 1));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rational;

    #[test]
    fn variation_of_simple_samples() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(total_variation(&xs, &[0.0, 0.5, 0.75, 1.0]).unwrap(), 1.0);
        assert_eq!(total_variation(&xs[..3], &[0.0, 1.0, 0.0]).unwrap(), 2.0);
        assert!(total_variation(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn variation_of_sine() {
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|k| 2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        assert!((total_variation(&xs, &ys).unwrap() - 4.0).abs() < 1e-3);
    }

    #[test]
    fn derivative_of_linear_and_exponential() {
        let xs: Vec<f64> = uniform_grid(&(), 101);
        let d = grid_derivative(&xs, &xs).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let h = 0.01;
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let d = grid_derivative(&xs, &ys).unwrap();
        // interior nodes obey the central-difference remainder bound
        for i in 1..100 {
            assert!((d[i] - xs[i].exp()).abs() <= h * h * std::f64::consts::E / 6.0 + 1e-12);
        }
    }

    #[test]
    fn derivative_exact_on_quadratic_interior() {
        let xs: Vec<Rational> = uniform_grid(&(), 5);
        let ys: Vec<Rational> = xs.iter().map(|x| x.clone() * x).collect();
        let d = grid_derivative(&xs, &ys).unwrap();
        for i in 1..4 {
            assert_eq!(d[i], xs[i].clone() * &Rational::from_int(&(), 2));
        }
    }

    #[test]
    fn derivative_rejects_bad_grids() {
        assert!(grid_derivative(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(grid_derivative(&[0.0, 1.0, 0.5], &[0.0, 1.0, 2.0]).is_err());
        assert!(grid_derivative(&[0.0, 0.5, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn grids_cover_unit_interval() {
        let g: Vec<Rational> = uniform_grid(&(), 3);
        assert_eq!(g[1], Rational::new(1, 2));
        let m: Vec<Rational> = midpoint_grid(&(), 2);
        assert_eq!(m, vec![Rational::new(1, 4), Rational::new(3, 4)]);
    }
}
