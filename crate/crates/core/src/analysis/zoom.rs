use std::sync::Arc;

use crate::error::{Error, Result};
use crate::giem::Giem;
use crate::numerics::{Quadrature, Real};
use crate::rauzy::RauzyState;

/// Orbit of the fundamental segment `I⁽ⁿ⁾_α` up to its return time, with the branch used at each step.
#[derive(Clone, Debug)]
pub struct LetterOrbit<T: Real> {
    pub letter: usize,
    pub depth: usize,
    /// `a_j = f^j(a)` for `0 ≤ j ≤ q`.
    pub a: Vec<T>,
    /// `b_j = f^j(b⁻)` for `0 ≤ j ≤ q`.
    pub b: Vec<T>,
    /// Letter of the branch carrying `[a_j, b_j)`, for `j < q`.
    pub branch: Vec<usize>,
    map: Arc<Giem<T>>,
}

/// `(Z, DZ, D²Z)` at one point; `d2z` is `None` when some branch lacks `f''`.
#[derive(Clone, Debug)]
pub struct ZoomPoint<T> {
    pub z: T,
    pub dz: T,
    pub d2z: Option<T>,
}

/// Relative coordinates `z_i = (x_i − a_i)/(b_i − a_i)` along the orbit of `x = a + z₀(b − a)`.
#[derive(Clone, Debug)]
pub struct RelativeOrbit<T> {
    pub letter: usize,
    pub depth: usize,
    pub z0: T,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub x: Vec<T>,
    pub z: Vec<T>,
    /// `dz_i/dz₀`.
    pub dz: Vec<T>,
    /// `d²z_i/dz₀²`, when `f''` exists along the orbit.
    pub d2z: Option<Vec<T>>,
}

/// `m_n` by the closed form, optionally cross-checked by quadrature.
#[derive(Clone, Debug)]
pub struct MnEstimate<T> {
    pub closed: T,
    pub quadrature: Option<T>,
}

impl<T: Real> MnEstimate<T> {
    pub fn defect(&self) -> Option<f64> {
        self.quadrature.as_ref().map(|q| (q.clone() - &self.closed).abs().to_f64())
    }
}

impl<T: Real> LetterOrbit<T> {
    pub fn new(s: &RauzyState<T>, letter: usize) -> Result<Self> {
        let f = s.map().clone();
        let q = s.return_time(letter);
        let mut a = Vec::with_capacity(q + 1);
        let mut b = Vec::with_capacity(q + 1);
        let mut branch = Vec::with_capacity(q);
        a.push(s.left(letter).clone());
        b.push(s.right(letter));
        for j in 0..q {
            let mid = (a[j].clone() + &b[j]) / &a[j].lit(2);
            let k = f.locate(&mid)?;
            let br = f.branch(k);
            let (na, nb) = (br.eval(&a[j]), br.eval(&b[j]));
            if nb <= na {
                return Err(Error::TilingViolation(format!(
                    "depth {}: iterate {} of letter {} collapsed (raise float_bits)",
                    s.depth(),
                    j + 1,
                    f.pair().name(letter)
                )));
            }
            branch.push(k);
            a.push(na);
            b.push(nb);
        }
        Ok(LetterOrbit { letter, depth: s.depth(), a, b, branch, map: f })
    }

    pub fn q(&self) -> usize {
        self.branch.len()
    }

    pub fn map(&self) -> &Arc<Giem<T>> {
        &self.map
    }

    pub fn domain_len(&self) -> T {
        self.b[0].clone() - &self.a[0]
    }

    pub fn image_len(&self) -> T {
        let q = self.q();
        self.b[q].clone() - &self.a[q]
    }

    fn start(&self, z0: &T) -> T {
        self.a[0].clone() + &(self.domain_len() * z0)
    }

    /// The zoomed return map and its first two derivatives at `z₀ ∈ [0, 1]` (`z₀ = 1` is the left limit).
    pub fn point(&self, z0: &T) -> ZoomPoint<T> {
        let mut x = self.start(z0);
        let mut d = z0.one_like();
        let mut cocycle = Some(z0.zero_like());
        for &k in &self.branch {
            let jet = self.map.branch(k).jet(&x);
            cocycle = match (cocycle, jet.d2h) {
                (Some(c), Some(d2)) => Some(c + &(d2 / &jet.dh * &d)),
                _ => None,
            };
            d *= &jet.dh;
            x = jet.h;
        }
        let q = self.q();
        let h0 = self.domain_len();
        let hq = self.image_len();
        let z = (x - &self.a[q]) / &hq;
        let dz = d.clone() * &h0 / &hq;
        let d2z = cocycle.map(|c| d * &c * &h0.sq() / &hq);
        ZoomPoint { z, dz, d2z }
    }

    pub fn relative_orbit(&self, z0: &T) -> RelativeOrbit<T> {
        let q = self.q();
        let h0 = self.domain_len();
        let mut x = self.start(z0);
        let mut d = z0.one_like();
        let mut cocycle = Some(z0.zero_like());
        let mut xs = Vec::with_capacity(q + 1);
        let mut zs = Vec::with_capacity(q + 1);
        let mut dzs = Vec::with_capacity(q + 1);
        let mut d2zs = Vec::with_capacity(q + 1);
        for i in 0..=q {
            let hi = self.b[i].clone() - &self.a[i];
            zs.push((x.clone() - &self.a[i]) / &hi);
            dzs.push(d.clone() * &h0 / &hi);
            if let Some(c) = &cocycle {
                d2zs.push(d.clone() * c * &h0.sq() / &hi);
            }
            xs.push(x.clone());
            if i == q {
                break;
            }
            let jet = self.map.branch(self.branch[i]).jet(&x);
            cocycle = match (cocycle, jet.d2h) {
                (Some(c), Some(d2)) => Some(c + &(d2 / &jet.dh * &d)),
                _ => None,
            };
            d *= &jet.dh;
            x = jet.h;
        }
        RelativeOrbit {
            letter: self.letter,
            depth: self.depth,
            z0: z0.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            x: xs,
            z: zs,
            dz: dzs,
            d2z: cocycle.map(|_| d2zs),
        }
    }

    /// `m_n = (Df^q(a)/Df^q(b⁻))^{1/2}`; with `quad`, also `exp(−Σ ∫ f''/(2f'))` over the orbit.
    pub fn compute_mn(&self, quad: Option<&Quadrature<T>>) -> Result<MnEstimate<T>> {
        let one = self.a[0].one_like();
        let (mut num, mut den) = (one.clone(), one);
        for (j, &k) in self.branch.iter().enumerate() {
            let br = self.map.branch(k);
            num *= &br.deriv(&self.a[j]);
            den *= &br.deriv(&self.b[j]);
        }
        let closed = (num / &den).sqrt();
        let quadrature = match quad {
            None => None,
            Some(qd) => {
                let mut acc = self.a[0].zero_like();
                for (j, &k) in self.branch.iter().enumerate() {
                    let br = self.map.branch(k);
                    if br.shape.is_linear() {
                        continue;
                    }
                    let g = |t: &T| br.nonlinearity(t).unwrap_or_else(|| t.zero_like());
                    acc += &qd.integrate(g, &self.a[j], &self.b[j], &br.singular_points())?;
                }
                Some((-(acc / &self.a[0].lit(2))).exp())
            }
        };
        Ok(MnEstimate { closed, quadrature })
    }
}

impl<T: Real> RelativeOrbit<T> {
    /// Worst violation of `e^{−2θ} ≤ z₀(1−z₀)/(z_i(1−z_i)) ≤ e^{2θ}`, as `max |log ratio| − 2θ`.
    pub fn position_excess(&self, theta: f64) -> f64 {
        let w = |z: &T| z.clone() * &(z.one_like() - z);
        let w0 = w(&self.z0);
        if w0.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.z
            .iter()
            .map(|z| (w0.clone() / &w(z)).ln().abs().to_f64() - 2.0 * theta)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Worst violation of `e^{−θ} ≤ dz_i/dz₀ ≤ e^{θ}`, as `max |log dz_i/dz₀| − θ`.
    pub fn derivative_excess(&self, theta: f64) -> f64 {
        self.dz
            .iter()
            .map(|d| d.ln().abs().to_f64() - theta)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::{golden_lengths, standard_iem, CombinatorialPair, FamilyDescriptor};
    use crate::numerics::{grid_derivative, uniform_grid, BigFloat, PrecisionContext, Quadrature, Rational};
    use crate::rauzy::renormalize;

    #[test]
    fn translations_zoom_to_identity() {
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        let f = Arc::new(standard_iem(golden_lengths::<Rational>(&()), pair).unwrap());
        let s = renormalize(f, 7).unwrap();
        for letter in 0..2 {
            let orb = LetterOrbit::new(&s, letter).unwrap();
            for z0 in uniform_grid::<Rational>(&(), 9) {
                let p = orb.point(&z0);
                assert_eq!(p.z, z0);
                assert_eq!(p.dz, Rational::new(1, 1));
                assert!(p.d2z.unwrap().is_zero());
                let r = orb.relative_orbit(&z0);
                assert!(r.z.iter().all(|z| *z == z0));
            }
            assert_eq!(orb.compute_mn(None).unwrap().closed, Rational::new(1, 1));
        }
    }

    #[test]
    fn endpoints_are_fixed() {
        let f = FamilyDescriptor::preset("ko").unwrap().build_arc::<BigFloat>(&128).unwrap();
        let s = renormalize(f, 6).unwrap();
        for letter in 0..2 {
            let orb = LetterOrbit::new(&s, letter).unwrap();
            assert!(orb.point(&BigFloat::new(128, 0.0)).z.abs().to_f64() < 1e-30);
            assert!((orb.point(&BigFloat::new(128, 1.0)).z - &BigFloat::new(128, 1.0)).abs().to_f64() < 1e-30);
        }
    }

    #[test]
    fn cocycle_integrates_to_first_derivative() {
        let f = FamilyDescriptor::preset("ko").unwrap().build_arc::<BigFloat>(&128).unwrap();
        let s = renormalize(f, 5).unwrap();
        let orb = LetterOrbit::new(&s, 0).unwrap();
        let xs = uniform_grid::<BigFloat>(&128, 401);
        let pts: Vec<_> = xs.iter().map(|x| orb.point(x)).collect();
        let zs: Vec<_> = pts.iter().map(|p| p.z.clone()).collect();
        let g1 = grid_derivative(&xs, &zs).unwrap();
        let quad = Quadrature::<BigFloat>::new(&128, 1e-12, 2000);
        let mut d2 = |x: &BigFloat| orb.point(x).d2z.unwrap();
        for i in 1..400 {
            assert!((g1[i].clone() - &pts[i].dz).abs().to_f64() < 1e-4);
            // D²Z has integrable log spikes, so compare increments of DZ with integrals of D²Z
            let acc = quad.integrate(&mut d2, &xs[i - 1], &xs[i + 1], &[]).unwrap();
            let inc = pts[i + 1].dz.clone() - &pts[i - 1].dz;
            assert!((acc - &inc).abs().to_f64() < 1e-10, "cell {i}");
        }
    }

    #[test]
    fn mn_closed_form_matches_quadrature() {
        let ctx = PrecisionContext::extended(128);
        let f = FamilyDescriptor::preset("ko").unwrap().build_arc::<BigFloat>(&128).unwrap();
        let s = renormalize(f, 6).unwrap();
        let quad = ctx.quadrature::<BigFloat>(&128);
        for letter in 0..2 {
            let orb = LetterOrbit::new(&s, letter).unwrap();
            let mn = orb.compute_mn(Some(&quad)).unwrap();
            assert!(mn.defect().unwrap() <= 10.0 * ctx.quad_tol * orb.q() as f64);
        }
    }
}
