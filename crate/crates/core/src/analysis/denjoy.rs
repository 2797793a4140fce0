use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::zoom::LetterOrbit;
use crate::error::Result;
use crate::giem::Giem;
use crate::numerics::{total_variation, uniform_grid, Real};
use crate::partition::{qn_small_with, DynamicalPartition};
use crate::rauzy::RauzyState;

/// `θ = Var log f'` on the circle `[0,1)/0~1`: per-branch grid variation (max over two resolutions)
/// plus the jumps between neighbouring branches, including the one at `0 ~ 1`.
pub fn log_derivative_variation<T: Real>(f: &Giem<T>) -> Result<f64> {
    let ctx = f.ctx().clone();
    let order = f.pair().row(0);
    let mut theta = 0.0;
    for &a in &order {
        let br = f.branch(a);
        if br.shape.is_linear() {
            continue;
        }
        let mut best = 0.0f64;
        for n in [4097, 8193] {
            let xs: Vec<T> = uniform_grid::<T>(&ctx, n)
                .into_iter()
                .map(|u| br.left.clone() + &(br.len.clone() * &u))
                .collect();
            let ys: Vec<T> = xs.iter().map(|x| br.deriv(x).ln()).collect();
            best = best.max(total_variation(&xs, &ys)?.to_f64());
        }
        theta += best;
    }
    let wrap = [*order.last().expect("nonempty"), order[0]];
    for w in order.windows(2).chain(std::iter::once(&wrap[..])) {
        let (l, r) = (f.branch(w[0]), f.branch(w[1]));
        let (dl, dr) = (l.deriv(&l.right()), r.deriv(&r.left));
        if dl != dr {
            theta += (dl / &dr).ln().abs().to_f64();
        }
    }
    Ok(theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenjoyOptions {
    pub max_depth: usize,
    /// Total number of `q_n`-close pairs, spread over depths `1..=max_depth`.
    pub pairs: usize,
    pub seed: u64,
    /// Depths up to this one fit the product constant; deeper ones test it.
    pub fit_depth: usize,
    /// Sample points per fundamental segment for the products.
    pub product_samples: usize,
}

impl Default for DenjoyOptions {
    fn default() -> Self {
        DenjoyOptions { max_depth: 15, pairs: 500, seed: 1, fit_depth: 7, product_samples: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenjoyDepth {
    pub depth: usize,
    /// `max |log Df^{q_α}(x)|` over letters and sampled `x ∈ I⁽ⁿ⁾_α`.
    pub max_log_product: f64,
    /// `max_log_product / θ` (0 when `θ = 0`).
    pub exponent_ratio: f64,
    pub pairs: usize,
    pub rejected: usize,
    /// `max |log Df^l(x)/Df^l(y)|` over sampled pairs and `0 ≤ l < q_n`.
    pub max_pair_log_ratio: f64,
    /// `max_i |log dz_i/dz₀| − θ` over sampled base points (non-positive when the bound holds).
    pub derivative_excess: f64,
    /// `max_i |log(z₀(1−z₀)/(z_i(1−z_i)))| − 2θ`.
    pub position_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenjoyReport {
    pub theta: f64,
    pub rows: Vec<DenjoyDepth>,
    /// `C` fitted on depths `≤ fit_depth`.
    pub fitted_c: f64,
    /// Every deeper product lies in `[e^{−Cθ}, e^{Cθ}]` with the fitted `C`.
    pub out_of_sample_ok: bool,
    /// Every sampled two-point ratio lies strictly inside `(e^{−θ}, e^{θ})`, or equals 1 when `θ = 0`.
    pub pairs_strict: bool,
    pub bounds_ok: bool,
}

fn products<T: Real>(s: &RauzyState<T>, samples: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for letter in 0..s.d() {
        let orb = LetterOrbit::new(s, letter)?;
        let ratio = orb.image_len() / &orb.domain_len();
        for k in 0..samples {
            let z = T::from_ratio(&orb.a[0].ctx(), k as i64, samples as i64);
            let dfq = orb.point(&z).dz * &ratio;
            if dfq != dfq.one_like() {
                worst = worst.max(dfq.ln().abs().to_f64());
            }
        }
    }
    Ok(worst)
}

/// Largest `|log Df^l(x)/Df^l(y)|` for `0 ≤ l < count`.
fn pair_ratio<T: Real>(f: &Giem<T>, x: &T, y: &T, count: usize) -> Result<f64> {
    let (mut px, mut py) = (x.clone(), y.clone());
    let mut ratio = x.one_like();
    let mut worst = 0.0f64;
    for _ in 1..count {
        ratio *= &(f.deriv(&px)? / &f.deriv(&py)?);
        px = f.eval(&px)?;
        py = f.eval(&py)?;
        if ratio != ratio.one_like() {
            worst = worst.max(ratio.ln().abs().to_f64());
        }
    }
    Ok(worst)
}

/// Checks the Denjoy-type bounds at depths `1..=max_depth`.
pub fn denjoy_check<T: Real>(f: Arc<Giem<T>>, opts: &DenjoyOptions) -> Result<DenjoyReport> {
    let theta = log_derivative_variation(&f)?;
    let ctx = f.ctx().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let depths = opts.max_depth.max(1);
    let mut s = RauzyState::new(f.clone());
    let mut rows = Vec::new();
    let probes: Vec<T> = [1, 2, 3].iter().map(|&k| T::from_ratio(&ctx, k, 4)).collect();
    for depth in 1..=depths {
        s.step()?;
        let part = DynamicalPartition::build(&s)?;
        let qn = s.max_return_time();
        let want = opts.pairs / depths + usize::from(depth <= opts.pairs % depths);
        let (mut got, mut rejected, mut max_pair) = (0, 0, 0.0f64);
        while got < want && rejected < 20 * want + 100 {
            let x = T::from_f64(&ctx, rng.gen::<f64>());
            let atom = &part.atoms()[part.atom_containing(&x).expect("x in [0,1)")];
            let y = x.clone() + &((atom.right.clone() - &x) * &T::from_f64(&ctx, 0.25 * rng.gen::<f64>()));
            if y <= x || !qn_small_with(&f, (&x, &y), qn)? {
                rejected += 1;
                continue;
            }
            max_pair = max_pair.max(pair_ratio(&f, &x, &y, qn)?);
            got += 1;
        }
        let mut dexc = f64::NEG_INFINITY;
        let mut pexc = f64::NEG_INFINITY;
        for letter in 0..s.d() {
            let orb = LetterOrbit::new(&s, letter)?;
            for z0 in &probes {
                let rel = orb.relative_orbit(z0);
                dexc = dexc.max(rel.derivative_excess(theta));
                pexc = pexc.max(rel.position_excess(theta));
            }
        }
        let max_log_product = products(&s, opts.product_samples)?;
        rows.push(DenjoyDepth {
            depth,
            max_log_product,
            exponent_ratio: if theta > 0.0 { max_log_product / theta } else { 0.0 },
            pairs: got,
            rejected,
            max_pair_log_ratio: max_pair,
            derivative_excess: dexc,
            position_excess: pexc,
        });
    }
    let fitted_c = rows
        .iter()
        .filter(|r| r.depth <= opts.fit_depth)
        .map(|r| r.exponent_ratio)
        .fold(0.0, f64::max);
    let out_of_sample_ok = rows
        .iter()
        .filter(|r| r.depth > opts.fit_depth)
        .all(|r| r.max_log_product <= fitted_c * theta * (1.0 + 1e-12));
    let pairs_strict = rows
        .iter()
        .all(|r| r.max_pair_log_ratio < theta || (theta == 0.0 && r.max_pair_log_ratio == 0.0));
    let bounds_ok = rows.iter().all(|r| r.derivative_excess <= 0.0 && r.position_excess <= 0.0);
    Ok(DenjoyReport { theta, rows, fitted_c, out_of_sample_ok, pairs_strict, bounds_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::{golden_lengths, standard_iem, CombinatorialPair, FamilyDescriptor};
    use crate::numerics::{BigFloat, Rational};

    #[test]
    fn rotation_has_zero_variation() {
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        let f = Arc::new(standard_iem(golden_lengths::<Rational>(&()), pair).unwrap());
        let opts = DenjoyOptions { max_depth: 6, pairs: 30, ..Default::default() };
        let r = denjoy_check(f, &opts).unwrap();
        assert_eq!(r.theta, 0.0);
        assert!(r.rows.iter().all(|row| row.max_log_product == 0.0 && row.max_pair_log_ratio == 0.0));
        assert!(r.pairs_strict && r.out_of_sample_ok && r.bounds_ok);
    }

    #[test]
    fn affine_variation_counts_both_breaks() {
        let d = FamilyDescriptor::preset("affine").unwrap();
        let f = d.build_arc::<BigFloat>(&128).unwrap();
        let (b0, b1) = (f.branch(0), f.branch(1));
        let (s0, s1) = (b0.deriv(&b0.left).to_f64(), b1.deriv(&b1.left).to_f64());
        let theta = log_derivative_variation(&f).unwrap();
        assert!((theta - 2.0 * (s0.ln() - s1.ln()).abs()).abs() < 1e-12);
    }

    #[test]
    fn ko_bounds_hold() {
        let f = FamilyDescriptor::preset("ko").unwrap().build_arc::<BigFloat>(&128).unwrap();
        let opts = DenjoyOptions { max_depth: 9, pairs: 60, fit_depth: 5, ..Default::default() };
        let r = denjoy_check(f, &opts).unwrap();
        assert!(r.theta > 0.0);
        assert!(r.pairs_strict, "{:?}", r.rows);
        assert!(r.bounds_ok, "{:?}", r.rows);
        assert!(r.rows.iter().map(|row| row.pairs).sum::<usize>() == 60);
    }
}
