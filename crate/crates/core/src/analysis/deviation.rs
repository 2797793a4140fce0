use serde::{Deserialize, Serialize};

use super::mobius::MobiusApproximant;
use super::zoom::{LetterOrbit, ZoomPoint};
use crate::error::{Error, Result};
use crate::numerics::{grid_derivative, total_variation, uniform_grid, Real};

/// Sampling settings for deviation measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Points of the coarse grid; the check grid has `2G − 1`.
    pub grid_points: usize,
    /// Also compute the `L₁` norm of the second-derivative difference by per-cell quadrature.
    pub l1: bool,
    /// How many times an inadequate grid may be doubled before giving up.
    pub max_refinements: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { grid_points: 129, l1: true, max_refinements: 2 }
    }
}

/// One quadrature node of the per-cell `L₁` rule.
#[derive(Clone, Debug)]
pub struct GaussNode<T> {
    pub x: T,
    pub weight: T,
    pub point: ZoomPoint<T>,
}

/// Zoom samples on the doubled grid, plus three Gauss points per cell when `L₁` is requested.
#[derive(Clone, Debug)]
pub struct ZoomSamples<T> {
    pub xs: Vec<T>,
    pub points: Vec<ZoomPoint<T>>,
    pub nodes: Option<Vec<GaussNode<T>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub c0: f64,
    pub c1: f64,
    pub l1: Option<f64>,
    pub l1_tv: f64,
    pub coarse_c0: f64,
    pub coarse_c1: f64,
    /// Coarse grid size that passed the doubling check.
    pub grid_points: usize,
    /// `D²Z` came from grid differentiation rather than the cocycle.
    pub d2_from_grid: bool,
}

impl Deviation {
    pub fn c1_norm(&self) -> f64 {
        self.c0.max(self.c1)
    }
}

fn gauss3<T: Real>(lo: &T, hi: &T) -> [(T, T); 3] {
    let half = (hi.clone() - lo) / &lo.lit(2);
    let mid = lo.clone() + &half;
    let off = half.clone() * &T::from_ratio(&lo.ctx(), 3, 5).sqrt();
    let w_side = half.clone() * &T::from_ratio(&lo.ctx(), 5, 9);
    let w_mid = half * &T::from_ratio(&lo.ctx(), 8, 9);
    [(mid.clone() - &off, w_side.clone()), (mid.clone(), w_mid), (mid + &off, w_side)]
}

/// Evaluates the zoom of `orbit` on `2G − 1` uniform points.
pub fn sample_zoom<T: Real>(orbit: &LetterOrbit<T>, grid_points: usize, l1: bool) -> ZoomSamples<T> {
    let ctx = orbit.a[0].ctx();
    let xs = uniform_grid::<T>(&ctx, 2 * grid_points - 1);
    let points: Vec<_> = xs.iter().map(|x| orbit.point(x)).collect();
    let nodes = l1.then(|| {
        xs.windows(2)
            .flat_map(|w| gauss3(&w[0], &w[1]))
            .map(|(x, weight)| GaussNode { point: orbit.point(&x), x, weight })
            .collect()
    });
    ZoomSamples { xs, points, nodes }
}

fn sup_pair(values: &[f64]) -> (f64, f64) {
    let fine = values.iter().cloned().fold(0.0, f64::max);
    let coarse = values.iter().step_by(2).cloned().fold(0.0, f64::max);
    (fine, coarse)
}

/// Deviations of the sampled zoom from `target`; fails if halving the spacing moves a sup by more than 10%.
pub fn deviation_from<T: Real>(s: &ZoomSamples<T>, target: &MobiusApproximant<T>, noise_floor: f64) -> Result<Deviation> {
    let dz_diff: Vec<T> = s.xs.iter().zip(&s.points).map(|(x, p)| p.dz.clone() - &target.d1(x)).collect();
    let c0s: Vec<f64> = s.xs.iter().zip(&s.points).map(|(x, p)| (p.z.clone() - &target.eval(x)).abs().to_f64()).collect();
    let c1s: Vec<f64> = dz_diff.iter().map(|d| d.abs().to_f64()).collect();
    let (c0, coarse_c0) = sup_pair(&c0s);
    let (c1, coarse_c1) = sup_pair(&c1s);
    for (name, fine, coarse) in [("C0", c0, coarse_c0), ("C1", c1, coarse_c1)] {
        if fine > noise_floor && (fine - coarse) > 0.1 * fine {
            return Err(Error::GridInadequate(format!(
                "{name} sup moved from {coarse:e} to {fine:e} on doubling {} points",
                s.xs.len().div_ceil(2)
            )));
        }
    }
    let l1_tv = total_variation(&s.xs, &dz_diff)?.to_f64();
    let d2_from_grid = s.points.iter().any(|p| p.d2z.is_none());
    let l1 = if d2_from_grid {
        // trapezoid on grid second derivatives
        let dz: Vec<T> = s.points.iter().map(|p| p.dz.clone()).collect();
        let d2 = grid_derivative(&s.xs, &dz)?;
        let vals: Vec<T> = s.xs.iter().zip(&d2).map(|(x, v)| (v.clone() - &target.d2(x)).abs()).collect();
        let mut acc = s.xs[0].zero_like();
        for i in 0..vals.len() - 1 {
            acc += &((vals[i].clone() + &vals[i + 1]) * &(s.xs[i + 1].clone() - &s.xs[i]) / &s.xs[0].lit(2));
        }
        s.nodes.as_ref().map(|_| acc.to_f64())
    } else {
        s.nodes.as_ref().map(|nodes| {
            let mut acc = s.xs[0].zero_like();
            for n in nodes {
                let d2 = n.point.d2z.clone().unwrap_or_else(|| n.x.zero_like());
                acc += &((d2 - &target.d2(&n.x)).abs() * &n.weight);
            }
            acc.to_f64()
        })
    };
    Ok(Deviation {
        c0,
        c1,
        l1,
        l1_tv,
        coarse_c0,
        coarse_c1,
        grid_points: s.xs.len().div_ceil(2),
        d2_from_grid,
    })
}

/// Samples the zoom and measures it against each target, doubling the grid while the check fails.
pub fn measure<T: Real>(
    orbit: &LetterOrbit<T>,
    targets: &[&MobiusApproximant<T>],
    opts: &SweepOptions,
    noise_floor: f64,
) -> Result<Vec<Deviation>> {
    let mut g = opts.grid_points;
    let mut attempt = 0;
    loop {
        let s = sample_zoom(orbit, g, opts.l1);
        match targets.iter().map(|t| deviation_from(&s, t, noise_floor)).collect::<Result<Vec<_>>>() {
            Err(Error::GridInadequate(_)) if attempt < opts.max_refinements => {
                attempt += 1;
                g = 2 * g - 1;
            }
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::giem::{golden_lengths, moebius_iem, standard_iem, CombinatorialPair, FamilyDescriptor};
    use crate::numerics::{BigFloat, Rational};
    use crate::rauzy::renormalize;

    #[test]
    fn standard_map_has_zero_deviation_from_identity() {
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        let f = Arc::new(standard_iem(golden_lengths::<Rational>(&()), pair).unwrap());
        let s = renormalize(f, 6).unwrap();
        let id = MobiusApproximant::identity(&());
        let orb = LetterOrbit::new(&s, 1).unwrap();
        let opts = SweepOptions { grid_points: 9, l1: true, max_refinements: 0 };
        let d = measure(&orb, &[&id], &opts, 0.0).unwrap();
        assert_eq!((d[0].c0, d[0].c1, d[0].l1, d[0].l1_tv), (0.0, 0.0, Some(0.0), 0.0));
    }

    #[test]
    fn moebius_zoom_is_its_own_approximant() {
        let bits = 256;
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        let lengths = golden_lengths::<BigFloat>(&bits);
        let ms = vec![BigFloat::new(bits, 1.3), BigFloat::new(bits, 0.8)];
        let f = Arc::new(moebius_iem(lengths, None, pair, ms).unwrap());
        let s = renormalize(f, 5).unwrap();
        for letter in 0..2 {
            let orb = LetterOrbit::new(&s, letter).unwrap();
            let mn = orb.compute_mn(None).unwrap().closed;
            let fit = MobiusApproximant::through_half(&orb.point(&BigFloat::new(bits, 0.5)).z);
            assert!((fit.m.clone() - &mn).abs().to_f64() < 1e-60);
            let target = MobiusApproximant::new(mn);
            let d = measure(&orb, &[&target], &SweepOptions { grid_points: 17, ..Default::default() }, 1e-60).unwrap();
            assert!(d[0].c1_norm() < 1e-60 && d[0].l1.unwrap() < 1e-55, "{:?}", d[0]);
        }
    }

    #[test]
    fn coarse_grid_misses_a_spike() {
        // a Möbius map with an extreme parameter has its C0 sup far from the coarse nodes
        let target = MobiusApproximant::new(1.0f64);
        let f = Arc::new(
            moebius_iem(vec![0.4, 0.6], None, CombinatorialPair::from_monodromy(&[2, 1]).unwrap(), vec![400.0, 1.0])
                .unwrap(),
        );
        let s = renormalize(f, 0).unwrap();
        let orb = LetterOrbit::new(&s, 0).unwrap();
        let samples = sample_zoom(&orb, 3, false);
        assert!(matches!(deviation_from(&samples, &target, 0.0), Err(Error::GridInadequate(_))));
    }

    #[test]
    fn ko_deviation_is_grid_stable() {
        let f = FamilyDescriptor::preset("ko").unwrap().build_arc::<BigFloat>(&128).unwrap();
        let s = renormalize(f, 6).unwrap();
        let orb = LetterOrbit::new(&s, 0).unwrap();
        let target = MobiusApproximant::new(orb.compute_mn(None).unwrap().closed);
        let d = measure(&orb, &[&target], &SweepOptions::default(), 1e-30).unwrap();
        assert!(d[0].c1 > 0.0 && d[0].l1.unwrap() > 0.0 && !d[0].d2_from_grid);
    }
}
