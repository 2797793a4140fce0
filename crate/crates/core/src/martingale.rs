//! Conditional averages `Φ_n` of the nonlinearity over `ξ_n` and their increments `h_n`.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::giem::Giem;
use crate::numerics::{Quadrature, Real};
use crate::partition::DynamicalPartition;

/// A function constant on each atom of a dynamical partition.
#[derive(Clone, Debug)]
pub struct StepFunction<T: Real> {
    pub partition: Arc<DynamicalPartition<T>>,
    pub values: Vec<T>,
}

impl<T: Real> StepFunction<T> {
    pub fn new(partition: Arc<DynamicalPartition<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::InconsistentDepths(format!(
                "{} values for {} atoms",
                values.len(),
                partition.len()
            )));
        }
        Ok(StepFunction { partition, values })
    }

    pub fn constant(partition: Arc<DynamicalPartition<T>>, c: T) -> Self {
        let values = vec![c; partition.len()];
        StepFunction { partition, values }
    }

    pub fn depth(&self) -> usize {
        self.partition.depth()
    }

    pub fn integral(&self) -> T {
        let mut acc = self.values[0].zero_like();
        for (v, a) in self.values.iter().zip(self.partition.atoms()) {
            acc += &(v.clone() * &a.len());
        }
        acc
    }

    /// `(Σ |v|^p · |Δ|)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> T {
        let zero = self.values[0].zero_like();
        if self.values.iter().all(|v| v.is_zero()) {
            return zero;
        }
        if p == 2.0 {
            let mut acc = zero;
            for (v, a) in self.values.iter().zip(self.partition.atoms()) {
                acc += &(v.sq() * &a.len());
            }
            return acc.sqrt();
        }
        let pe = zero.lit_f64(p);
        let mut acc = zero.clone();
        for (v, a) in self.values.iter().zip(self.partition.atoms()) {
            if !v.is_zero() {
                acc += &(v.abs().powf(&pe) * &a.len());
            }
        }
        acc.powf(&pe.recip())
    }

    pub fn value_at(&self, x: &T) -> Option<&T> {
        self.partition.atom_containing(x).map(|k| &self.values[k])
    }

    /// Per-atom averages over the atoms of a coarser partition.
    pub fn averages_over(&self, coarser: &DynamicalPartition<T>) -> Result<Vec<T>> {
        let parents = self.partition.parents(coarser)?;
        let zero = self.values[0].zero_like();
        let mut sums = vec![zero; coarser.len()];
        for (k, a) in self.partition.atoms().iter().enumerate() {
            sums[parents[k]] += &(self.values[k].clone() * &a.len());
        }
        Ok(sums
            .into_iter()
            .zip(coarser.atoms())
            .map(|(s, a)| s / &a.len())
            .collect())
    }

    /// Pulls `coarse` back to this partition and subtracts it.
    pub fn minus_coarser(&self, coarse: &StepFunction<T>) -> Result<StepFunction<T>> {
        let parents = self.partition.parents(&coarse.partition)?;
        let values = self
            .values
            .iter()
            .zip(&parents)
            .map(|(v, &p)| v.clone() - &coarse.values[p])
            .collect();
        StepFunction::new(self.partition.clone(), values)
    }
}

/// `∫ f''/f'` over the branch piece `[a, b]`, via `log f'(b⁻) − log f'(a)`.
fn log_derivative_increment<T: Real>(f: &Giem<T>, a: &T, b: &T) -> Result<T> {
    let mid = (a.clone() + b) / &a.lit(2);
    let br = f.branch(f.locate(&mid)?);
    if br.shape.is_linear() {
        return Ok(a.zero_like());
    }
    Ok(br.deriv(b).ln() - &br.deriv(a).ln())
}

/// `Φ_n` for `g = f''/f'`, from the antiderivative `log f'`.
pub fn phi_nonlinearity<T: Real>(f: &Giem<T>, p: Arc<DynamicalPartition<T>>) -> Result<StepFunction<T>> {
    let values = p
        .atoms()
        .iter()
        .map(|a| log_derivative_increment(f, &a.left, &a.right).map(|v| v / &a.len()))
        .collect::<Result<Vec<_>>>()?;
    StepFunction::new(p, values)
}

/// `Φ_n` for an arbitrary integrable `g`, by quadrature on each atom.
pub fn phi_quadrature<T: Real, G: FnMut(&T) -> T>(
    mut g: G,
    singular: &[T],
    p: Arc<DynamicalPartition<T>>,
    quad: &Quadrature<T>,
) -> Result<StepFunction<T>> {
    let values = p
        .atoms()
        .iter()
        .map(|a| quad.integrate(&mut g, &a.left, &a.right, singular).map(|v| v / &a.len()))
        .collect::<Result<Vec<_>>>()?;
    StepFunction::new(p, values)
}

/// Every singular point of `f''/f'`, in absolute coordinates.
pub fn singular_points<T: Real>(f: &Giem<T>) -> Vec<T> {
    f.branches().iter().flat_map(|b| b.singular_points()).collect()
}

/// `f''/f'` at `x`, using the branch that contains `x`.
pub fn nonlinearity_at<T: Real>(f: &Giem<T>, x: &T) -> Result<T> {
    let a = f.locate(x)?;
    f.branch(a)
        .nonlinearity(x)
        .ok_or_else(|| Error::NoSecondDerivative(f.pair().name(a).to_string()))
}

/// `Φ_n` by quadrature of `f''/f'`, the independent check of [`phi_nonlinearity`].
pub fn phi_nonlinearity_quadrature<T: Real>(
    f: &Giem<T>,
    p: Arc<DynamicalPartition<T>>,
    quad: &Quadrature<T>,
) -> Result<StepFunction<T>> {
    let sing = singular_points(f);
    let values = p
        .atoms()
        .iter()
        .map(|a| {
            let br = f.branch(f.locate(&a.midpoint())?);
            let mut g = |x: &T| br.nonlinearity(x).unwrap_or_else(|| x.zero_like());
            quad.integrate(&mut g, &a.left, &a.right, &sing).map(|v| v / &a.len())
        })
        .collect::<Result<Vec<_>>>()?;
    StepFunction::new(p, values)
}

/// `∫₀¹ f''/f'`, the constant at the root of the martingale.
pub fn nonlinearity_mean<T: Real>(f: &Giem<T>) -> Result<T> {
    let mut acc = f.zero();
    for b in f.branches() {
        acc += &log_derivative_increment(f, &b.left, &b.right())?;
    }
    Ok(acc)
}

/// `‖f''/f'‖₂²` by quadrature, branch by branch.
pub fn nonlinearity_l2_squared<T: Real>(f: &Giem<T>, quad: &Quadrature<T>) -> Result<T> {
    let mut acc = f.zero();
    for b in f.branches() {
        if b.shape.is_linear() {
            continue;
        }
        let sing = b.singular_points();
        let mut g = |x: &T| b.nonlinearity(x).map(|v| v.sq()).unwrap_or_else(|| x.zero_like());
        acc += &quad.integrate(&mut g, &b.left, &b.right(), &sing)?;
    }
    Ok(acc)
}

/// `h_n = Φ_n − Φ_{n−1}` on `ξ_n`.
pub fn h_n<T: Real>(phi_n: &StepFunction<T>, phi_prev: &StepFunction<T>) -> Result<StepFunction<T>> {
    if phi_n.depth() != phi_prev.depth() + 1 {
        return Err(Error::InconsistentDepths(format!(
            "h_n needs consecutive depths, got {} and {}",
            phi_prev.depth(),
            phi_n.depth()
        )));
    }
    phi_n.minus_coarser(phi_prev)
}

/// `max_Δ |avg_Δ Φ_{n+1} − Φ_n(Δ)|` over the atoms `Δ` of `ξ_n`.
pub fn conditional_expectation_defect<T: Real>(phi_next: &StepFunction<T>, phi_n: &StepFunction<T>) -> Result<f64> {
    let avg = phi_next.averages_over(&phi_n.partition)?;
    Ok(avg
        .iter()
        .zip(&phi_n.values)
        .map(|(a, v)| (a.clone() - v).abs().to_f64())
        .fold(0.0, f64::max))
}

/// `max_Δ |∫_Δ h_n|` over the atoms of `ξ_{n−1}`.
pub fn mean_zero_defect<T: Real>(h: &StepFunction<T>, coarser: &DynamicalPartition<T>) -> Result<f64> {
    let avg = h.averages_over(coarser)?;
    Ok(avg
        .iter()
        .zip(coarser.atoms())
        .map(|(v, a)| (v.clone() * &a.len()).abs().to_f64())
        .fold(0.0, f64::max))
}

/// Running sums `Σ_{m ≤ n} r_m²`.
pub fn l2_partial_sums(norms: &[f64]) -> Vec<f64> {
    norms
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r * r;
            Some(*acc)
        })
        .collect()
}

/// Truncated tails `η_n = Σ_{m=n}^{N} λ^{m−n} r_m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaSequence {
    /// Depth of `eta[0]`.
    pub first_depth: usize,
    pub eta: Vec<f64>,
    /// Bound on the neglected tail `Σ_{m>N}`, assuming `r_m ≤ max r` beyond the computed range.
    pub truncation: Vec<f64>,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub sum_sq: f64,
}

pub fn eta_sequence(first_depth: usize, norms: &[f64], lambda: f64, p: f64) -> Result<EtaSequence> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::BadLambda(format!("{lambda}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Config(format!("norm exponent must be at least 1, got {p}")));
    }
    let n = norms.len();
    let mut eta = vec![0.0; n];
    let mut acc = 0.0;
    for m in (0..n).rev() {
        acc = norms[m] + lambda * acc;
        eta[m] = acc;
    }
    let rmax = norms.iter().cloned().fold(0.0, f64::max);
    let truncation = (0..n)
        .map(|k| lambda.powi((n - k) as i32) * rmax / (1.0 - lambda))
        .collect();
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let sum_sq = eta.iter().map(|e| e * e).sum();
    Ok(EtaSequence { first_depth, eta, truncation, lambda, p, q, sum_sq })
}

/// One depth of a martingale sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub depth: usize,
    pub atoms: usize,
    /// `‖h_n‖_p`; zero at depth 0, where `h_0 = Φ_0 − ∫g`.
    pub h_norm: f64,
    pub g_minus_phi_l2: f64,
    pub tower_defect: f64,
    pub mean_zero_defect: f64,
    /// `max |closed form − quadrature|` over atoms, when the cross-check ran.
    pub quadrature_defect: Option<f64>,
    pub eta: f64,
    pub eta_sq_running: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub mean: f64,
    pub g_l2: f64,
    pub rows: Vec<MartingaleRow>,
    pub eta: EtaSequence,
}

impl MartingaleReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "depth",
            "h_norm_p",
            "g_minus_phi_l2",
            "eta_n",
            "eta_sq_running",
            "tower_defect",
            "mean_zero_defect",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.depth.to_string(),
                format!("{:e}", r.h_norm),
                format!("{:e}", r.g_minus_phi_l2),
                format!("{:e}", r.eta),
                format!("{:e}", r.eta_sq_running),
                format!("{:e}", r.tower_defect),
                format!("{:e}", r.mean_zero_defect),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Whether `‖g − Φ_n‖₂` never increases.
    pub fn is_contracting(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].g_minus_phi_l2 <= w[0].g_minus_phi_l2)
    }
}

/// Martingale diagnostics over the given partitions (consecutive depths from 0).
///
/// `lambda` is the per-step contraction used for `η_n`; `cross_check` additionally compares
/// the closed-form `Φ_n` against quadrature.
pub fn martingale_sweep<T: Real>(
    f: &Giem<T>,
    partitions: &[Arc<DynamicalPartition<T>>],
    quad: &Quadrature<T>,
    p: f64,
    lambda: f64,
    cross_check: bool,
) -> Result<MartingaleReport> {
    for (k, part) in partitions.iter().enumerate() {
        if part.depth() != k {
            return Err(Error::InconsistentDepths(format!("partition {k} has depth {}", part.depth())));
        }
    }
    let mean = nonlinearity_mean(f)?;
    let g2 = nonlinearity_l2_squared(f, quad)?;
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    let mut prev: Option<StepFunction<T>> = None;
    for part in partitions {
        let phi = phi_nonlinearity(f, part.clone())?;
        let quadrature_defect = if cross_check {
            let q = phi_nonlinearity_quadrature(f, part.clone(), quad)?;
            Some(
                q.values
                    .iter()
                    .zip(&phi.values)
                    .map(|(a, b)| (a.clone() - b).abs().to_f64())
                    .fold(0.0, f64::max),
            )
        } else {
            None
        };
        let phi_sq = phi.lp_norm(2.0).sq();
        let resid = (g2.clone() - &phi_sq).max_of(f.zero()).sqrt().to_f64();
        let (h_norm, tower, mzd) = match &prev {
            None => {
                let avg = phi.integral();
                let tower = (avg - &mean).abs().to_f64();
                (0.0, tower, tower)
            }
            Some(pp) => {
                let h = h_n(&phi, pp)?;
                (
                    h.lp_norm(p).to_f64(),
                    conditional_expectation_defect(&phi, pp)?,
                    mean_zero_defect(&h, &pp.partition)?,
                )
            }
        };
        if part.depth() > 0 {
            norms.push(h_norm);
        }
        rows.push(MartingaleRow {
            depth: part.depth(),
            atoms: part.len(),
            h_norm,
            g_minus_phi_l2: resid,
            tower_defect: tower,
            mean_zero_defect: mzd,
            quadrature_defect,
            eta: 0.0,
            eta_sq_running: 0.0,
        });
        prev = Some(phi);
    }
    let eta = eta_sequence(1, &norms, lambda, p)?;
    let running = l2_partial_sums(&eta.eta);
    for (k, row) in rows.iter_mut().skip(1).enumerate() {
        row.eta = eta.eta[k];
        row.eta_sq_running = running[k];
    }
    Ok(MartingaleReport { mean: mean.to_f64(), g_l2: g2.sqrt().to_f64(), rows, eta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::{golden_lengths, standard_iem, CombinatorialPair, FamilyDescriptor};
    use crate::numerics::{BigFloat, PrecisionContext, Rational};
    use crate::rauzy::RauzyState;

    fn partitions<T: Real>(f: Arc<Giem<T>>, n: usize) -> Vec<Arc<DynamicalPartition<T>>> {
        let mut s = RauzyState::new(f);
        let mut out = vec![Arc::new(DynamicalPartition::build(&s).unwrap())];
        for _ in 0..n {
            s.step().unwrap();
            out.push(Arc::new(DynamicalPartition::build(&s).unwrap()));
        }
        out
    }

    #[test]
    fn eta_examples() {
        let e = eta_sequence(1, &[0.0, 0.0, 0.0], 0.5, 2.0).unwrap();
        assert_eq!(e.eta, vec![0.0; 3]);
        let e = eta_sequence(1, &[1.0, 0.0, 0.0, 0.0], 0.5, 2.0).unwrap();
        assert_eq!(e.eta, vec![1.0, 0.0, 0.0, 0.0]);
        let norms: Vec<f64> = (0..80).map(|m| 0.5f64.powi(m)).collect();
        let e = eta_sequence(0, &norms, 0.5, 2.0).unwrap();
        for n in 0..10 {
            let exact = 0.5f64.powi(n as i32) * 4.0 / 3.0;
            assert!((e.eta[n] - exact).abs() <= 1e-15 + e.truncation[n], "n={n}");
        }
        assert!(matches!(eta_sequence(0, &norms, 1.0, 2.0), Err(Error::BadLambda(_))));
    }

    #[test]
    fn constant_step_function_norms() {
        let f = Arc::new(
            standard_iem(golden_lengths::<Rational>(&()), CombinatorialPair::from_monodromy(&[2, 1]).unwrap())
                .unwrap(),
        );
        let p = partitions(f, 3).pop().unwrap();
        let h = StepFunction::constant(p.clone(), Rational::new(-3, 2));
        assert_eq!(h.lp_norm(2.0), Rational::new(3, 2));
        assert_eq!(h.lp_norm(1.0), Rational::new(3, 2));
        assert_eq!(StepFunction::constant(p, Rational::new(0, 1)).lp_norm(3.0), Rational::new(0, 1));
    }

    #[test]
    fn standard_map_has_zero_martingale() {
        let f = Arc::new(
            standard_iem(golden_lengths::<Rational>(&()), CombinatorialPair::from_monodromy(&[2, 1]).unwrap())
                .unwrap(),
        );
        let parts = partitions(f.clone(), 4);
        let quad = PrecisionContext::exact().quadrature::<Rational>(&());
        let r = martingale_sweep(&f, &parts, &quad, 2.0, 0.5, false).unwrap();
        assert!(r.rows.iter().all(|row| row.h_norm == 0.0 && row.g_minus_phi_l2 == 0.0));
    }

    #[test]
    fn constant_integrand_by_quadrature() {
        let f = Arc::new(
            standard_iem(golden_lengths::<Rational>(&()), CombinatorialPair::from_monodromy(&[2, 1]).unwrap())
                .unwrap(),
        );
        let parts = partitions(f, 3);
        let quad = PrecisionContext::exact().quadrature::<Rational>(&());
        let c = Rational::new(7, 3);
        let phis: Vec<_> = parts
            .iter()
            .map(|p| phi_quadrature(|_: &Rational| c.clone(), &[], p.clone(), &quad).unwrap())
            .collect();
        for w in phis.windows(2) {
            // nodes and weights enter as rationalized 256-bit values
            assert!(w[1].values.iter().all(|v| (v.clone() - &c).abs().to_f64() < 1e-60));
            assert!(h_n(&w[1], &w[0]).unwrap().lp_norm(2.0).to_f64() < 1e-60);
            assert!(conditional_expectation_defect(&w[1], &w[0]).unwrap() < 1e-60);
        }
        assert!(matches!(h_n(&phis[0], &phis[2]), Err(Error::InconsistentDepths(_))));
    }

    #[test]
    fn ko_martingale_is_consistent() {
        let ctx = PrecisionContext::extended(128);
        let f = Arc::new(FamilyDescriptor::preset("ko").unwrap().build::<BigFloat>(&128).unwrap());
        let parts = partitions(f.clone(), 6);
        let quad = ctx.quadrature::<BigFloat>(&128);
        let r = martingale_sweep(&f, &parts, &quad, 2.0, 0.7, true).unwrap();
        assert!(r.is_contracting());
        for row in &r.rows {
            assert!(row.tower_defect < 1e-25, "{row:?}");
            assert!(row.mean_zero_defect < 1e-25, "{row:?}");
            assert!(row.quadrature_defect.unwrap() < 1e-15, "{row:?}");
        }
        // h_n vanishes on preserved atoms
        let phi: Vec<_> = parts.iter().map(|p| phi_nonlinearity(&f, p.clone()).unwrap()).collect();
        let h = h_n(&phi[3], &phi[2]).unwrap();
        let parents = parts[3].parents(&parts[2]).unwrap();
        for (k, a) in parts[3].atoms().iter().enumerate() {
            let p = &parts[2].atoms()[parents[k]];
            if a.left == p.left && a.right == p.right {
                assert!(h.values[k].is_zero());
            }
        }
    }
}
