//! Dynamical partitions `ξ_n = { f^i(I⁽ⁿ⁾_α) : 0 ≤ i < qⁿ_α }`.

use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::giem::{Giem, StepType};
use crate::numerics::Real;
use crate::rauzy::{RauzyState, StepRecord};

/// The atom `f^iterate(I⁽ⁿ⁾_letter) = [left, right)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom<T> {
    pub letter: usize,
    pub iterate: usize,
    pub left: T,
    pub right: T,
}

impl<T: Real> Atom<T> {
    pub fn len(&self) -> T {
        self.right.clone() - &self.left
    }

    pub fn midpoint(&self) -> T {
        (self.left.clone() + &self.right) / &self.left.lit(2)
    }
}

#[derive(Clone, Debug)]
pub struct DynamicalPartition<T: Real> {
    depth: usize,
    atoms: Vec<Atom<T>>,
    /// `index[α][i]` is the position of `f^i(I⁽ⁿ⁾_α)` in `atoms`.
    index: Vec<Vec<usize>>,
    tol: T,
}

/// Tolerance for comparing atom endpoints after `q` iterations.
fn endpoint_tol<T: Real>(ctx: &T::Ctx, q: usize) -> T {
    T::equality_tolerance(ctx) * &T::from_int(ctx, q as i64 + 1)
}

impl<T: Real> DynamicalPartition<T> {
    /// Iterates both endpoints of every `I⁽ⁿ⁾_α` and checks that the atoms tile `[0, 1)`.
    pub fn build(s: &RauzyState<T>) -> Result<Self> {
        let f = s.map();
        let d = s.d();
        let mut atoms = Vec::new();
        for a in 0..d {
            let q = s.return_time(a);
            let mut lo = s.left(a).clone();
            let mut hi = s.right(a);
            for i in 0..q {
                let atom = Atom { letter: a, iterate: i, left: lo.clone(), right: hi.clone() };
                if i + 1 < q {
                    // atoms never straddle a discontinuity, so the midpoint picks the branch
                    let br = f.branch(f.locate(&atom.midpoint())?);
                    lo = br.eval(&lo);
                    hi = br.eval(&hi);
                }
                atoms.push(atom);
            }
        }
        atoms.sort_by(|x, y| x.left.cmp_total(&y.left));
        let mut index: Vec<Vec<usize>> = (0..d).map(|a| vec![usize::MAX; s.return_time(a)]).collect();
        for (k, at) in atoms.iter().enumerate() {
            index[at.letter][at.iterate] = k;
        }
        let p = DynamicalPartition {
            depth: s.depth(),
            tol: endpoint_tol(f.ctx(), s.max_return_time()),
            atoms,
            index,
        };
        p.check_tiling(f)?;
        Ok(p)
    }

    fn check_tiling(&self, f: &Giem<T>) -> Result<()> {
        let zero = f.zero();
        let one = f.one();
        let off = |x: &T, y: &T| (x.clone() - y).abs() > self.tol;
        if off(&self.atoms[0].left, &zero) {
            return Err(Error::TilingViolation(format!("first atom starts at {}", self.atoms[0].left.to_f64())));
        }
        for w in self.atoms.windows(2) {
            if off(&w[0].right, &w[1].left) || w[0].right <= w[0].left {
                return Err(Error::TilingViolation(format!(
                    "depth {}: gap or overlap between {:e} and {:e} (raise float_bits)",
                    self.depth,
                    w[0].right.to_f64(),
                    w[1].left.to_f64()
                )));
            }
        }
        let last = self.atoms.last().expect("nonempty");
        if off(&last.right, &one) {
            return Err(Error::TilingViolation(format!("last atom ends at {}", last.right.to_f64())));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Endpoint comparison tolerance (zero in exact arithmetic).
    pub fn tol(&self) -> &T {
        &self.tol
    }

    pub fn position(&self, letter: usize, iterate: usize) -> usize {
        self.index[letter][iterate]
    }

    pub fn atom(&self, letter: usize, iterate: usize) -> &Atom<T> {
        &self.atoms[self.index[letter][iterate]]
    }

    pub fn return_time(&self, letter: usize) -> usize {
        self.index[letter].len()
    }

    /// `‖ξ_n‖`, the largest atom length.
    pub fn norm(&self) -> T {
        self.atoms
            .iter()
            .map(Atom::len)
            .reduce(|a, b| a.max_of(b))
            .expect("nonempty partition")
    }

    pub fn total_length(&self) -> T {
        let mut acc = self.atoms[0].left.zero_like();
        for a in &self.atoms {
            acc += &a.len();
        }
        acc
    }

    /// Index of the atom containing `x`.
    pub fn atom_containing(&self, x: &T) -> Option<usize> {
        let k = self.atoms.partition_point(|a| a.left <= *x);
        (k > 0 && *x < self.atoms[k - 1].right).then(|| k - 1)
    }

    /// For each atom, the index of the atom of `coarser` that contains it.
    pub fn parents(&self, coarser: &DynamicalPartition<T>) -> Result<Vec<usize>> {
        if coarser.depth > self.depth {
            return Err(Error::InconsistentDepths(format!(
                "depth {} cannot refine depth {}",
                self.depth, coarser.depth
            )));
        }
        let tol = self.tol.clone().max_of(coarser.tol.clone());
        let mut out = Vec::with_capacity(self.atoms.len());
        let mut j = 0;
        for a in &self.atoms {
            while j + 1 < coarser.atoms.len() && coarser.atoms[j + 1].left <= a.left.clone() + &tol {
                j += 1;
            }
            let p = &coarser.atoms[j];
            if a.left.clone() + &tol < p.left || a.right > p.right.clone() + &tol {
                return Err(Error::NotRefining(format!(
                    "atom [{:e}, {:e}) of depth {} is not inside an atom of depth {}",
                    a.left.to_f64(),
                    a.right.to_f64(),
                    self.depth,
                    coarser.depth
                )));
            }
            out.push(j);
        }
        Ok(out)
    }

    /// Writes `depth,letter,iterate,left,right,length` rows.
    pub fn write_csv<W: Write>(&self, names: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["depth", "letter", "iterate", "left", "right", "length"])?;
        for a in &self.atoms {
            w.write_record([
                self.depth.to_string(),
                names[a.letter].clone(),
                a.iterate.to_string(),
                a.left.to_text(),
                a.right.to_text(),
                a.len().to_text(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Atoms of `ξ_{n+1}` split into those already in `ξ_n` and those strictly inside one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreservedSplit {
    /// Indices into the finer partition.
    pub preserved: Vec<usize>,
    pub new: Vec<usize>,
    /// `(letter, iterate)` of the new atoms as predicted by the step type.
    pub predicted_new: BTreeSet<(usize, usize)>,
    /// Whether the geometric split agrees with the prediction.
    pub consistent: bool,
}

/// New atoms after a step with winner `w` and loser `l`, from return times before the step.
///
/// Type 0 keeps `I_l`, so the first `q_l` loser iterates survive and the tail through the cut
/// piece is new. Type 1 moves the loser into `I_w`, so its first `q_w` iterates are new.
pub fn predicted_new_atoms<T: Real>(step: &StepRecord<T>) -> BTreeSet<(usize, usize)> {
    let qw = step.return_times[step.winner].to_usize().expect("return time fits usize");
    let ql = step.return_times[step.loser].to_usize().expect("return time fits usize");
    let mut out: BTreeSet<(usize, usize)> = (0..qw).map(|i| (step.winner, i)).collect();
    match step.kind {
        StepType::Top => out.extend((ql..ql + qw).map(|i| (step.loser, i))),
        StepType::Bottom => out.extend((0..qw).map(|i| (step.loser, i))),
    }
    out
}

pub fn split_preserved_new<T: Real>(
    coarse: &DynamicalPartition<T>,
    fine: &DynamicalPartition<T>,
    step: &StepRecord<T>,
) -> Result<PreservedSplit> {
    if fine.depth != coarse.depth + 1 || step.depth != coarse.depth {
        return Err(Error::InconsistentDepths(format!(
            "partitions at depths {} and {} with a step from depth {}",
            coarse.depth, fine.depth, step.depth
        )));
    }
    let parents = fine.parents(coarse)?;
    let tol = fine.tol.clone().max_of(coarse.tol.clone());
    let same = |x: &T, y: &T| (x.clone() - y).abs() <= tol;
    let (mut preserved, mut new) = (Vec::new(), Vec::new());
    for (k, a) in fine.atoms.iter().enumerate() {
        let p = &coarse.atoms[parents[k]];
        if same(&a.left, &p.left) && same(&a.right, &p.right) {
            preserved.push(k);
        } else {
            new.push(k);
        }
    }
    let predicted_new = predicted_new_atoms(step);
    let seen: BTreeSet<(usize, usize)> =
        new.iter().map(|&k| (fine.atoms[k].letter, fine.atoms[k].iterate)).collect();
    Ok(PreservedSplit { consistent: seen == predicted_new, preserved, new, predicted_new })
}

/// Largest deviation, over letters `α` and atoms `Δ ∈ ξ_r`, between the share of `Δ` covered by
/// the `α`-tower of `ξ_n` and that tower's total measure.
pub fn equidistribution_discrepancy<T: Real>(coarse: &DynamicalPartition<T>, fine: &DynamicalPartition<T>) -> Result<f64> {
    let parents = fine.parents(coarse)?;
    let d = fine.index.len();
    let mut global = vec![0.0f64; d];
    let mut inside = vec![vec![0.0f64; coarse.len()]; d];
    for (k, a) in fine.atoms.iter().enumerate() {
        let l = a.len().to_f64();
        global[a.letter] += l;
        inside[a.letter][parents[k]] += l;
    }
    let mut worst = 0.0f64;
    for (j, c) in coarse.atoms.iter().enumerate() {
        let cl = c.len().to_f64();
        for a in 0..d {
            worst = worst.max((inside[a][j] / cl - global[a]).abs());
        }
    }
    Ok(worst)
}

/// Splits `[lo, hi)` at the discontinuities of `f` and maps each piece forward.
fn push_forward<T: Real>(f: &Giem<T>, pieces: &[(T, T)]) -> Result<Vec<(T, T)>> {
    let mut out = Vec::new();
    for (lo, hi) in pieces {
        let mut x = lo.clone();
        while x < *hi {
            let br = f.branch(f.locate(&x)?);
            let end = br.right().min_of(hi.clone());
            out.push((br.eval(&x), br.eval(&end)));
            x = end;
        }
    }
    Ok(out)
}

/// The pieces of `f^i(J)` for `0 ≤ i < count`.
pub fn interval_orbit<T: Real>(f: &Giem<T>, j: (&T, &T), count: usize) -> Result<Vec<Vec<(T, T)>>> {
    let mut cur = vec![(j.0.clone(), j.1.clone())];
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i > 0 {
            cur = push_forward(f, &cur)?;
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Whether `f^i(J)`, `0 ≤ i < q_n`, are pairwise disjoint, with `q_n = max_α qⁿ_α`.
pub fn qn_small_check<T: Real>(f: &Giem<T>, j: (&T, &T), s: &RauzyState<T>) -> Result<bool> {
    qn_small_with(f, j, s.max_return_time())
}

pub fn qn_small_with<T: Real>(f: &Giem<T>, j: (&T, &T), qn: usize) -> Result<bool> {
    if j.0 >= j.1 {
        return Err(Error::OutOfDomain(format!("empty interval [{}, {})", j.0.to_f64(), j.1.to_f64())));
    }
    let mut pieces: Vec<(T, T)> = interval_orbit(f, j, qn)?.into_iter().flatten().collect();
    pieces.sort_by(|a, b| a.0.cmp_total(&b.0));
    Ok(pieces.windows(2).all(|w| w[0].1 <= w[1].0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::{golden_lengths, standard_iem, CombinatorialPair};
    use crate::numerics::{BigFloat, Rational};
    use std::sync::Arc;

    fn golden_state(n: usize) -> RauzyState<BigFloat> {
        let f = standard_iem(golden_lengths::<BigFloat>(&256), CombinatorialPair::from_monodromy(&[2, 1]).unwrap())
            .unwrap();
        crate::rauzy::renormalize(Arc::new(f), n).unwrap()
    }

    fn rational_state(n: usize) -> RauzyState<Rational> {
        let f = standard_iem(
            ["0.2718281828459045", "0.3141592653589793", "0.4140125517951162"]
                .iter()
                .map(|t| Rational::parse(&(), t).unwrap())
                .collect(),
            CombinatorialPair::from_monodromy(&[3, 2, 1]).unwrap(),
        )
        .unwrap();
        let f = Arc::new(f);
        crate::rauzy::renormalize(f, n).unwrap()
    }

    #[test]
    fn depth_zero_is_the_base_partition() {
        let p = DynamicalPartition::build(&golden_state(0)).unwrap();
        assert_eq!(p.len(), 2);
        let g = golden_lengths::<BigFloat>(&256);
        assert_eq!(p.norm(), g[1]);
    }

    #[test]
    fn golden_atom_count_is_fibonacci() {
        let fib = [1usize, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233];
        for n in 0..10 {
            let s = golden_state(n);
            let p = DynamicalPartition::build(&s).unwrap();
            assert_eq!(p.len(), fib[n + 2], "depth {n}");
            let total = p.total_length();
            assert!((total.to_f64() - 1.0).abs() < 1e-60);
        }
    }

    #[test]
    fn refinement_and_split_match_prediction() {
        let s0 = rational_state(0);
        let mut s = s0.clone();
        let mut prev = DynamicalPartition::build(&s).unwrap();
        for _ in 0..8 {
            s.step().unwrap();
            let cur = DynamicalPartition::build(&s).unwrap();
            let split = split_preserved_new(&prev, &cur, s.history().last().unwrap()).unwrap();
            assert!(split.consistent, "depth {}: {split:?}", cur.depth());
            assert_eq!(split.preserved.len() + split.new.len(), cur.len());
            prev = cur;
        }
    }

    #[test]
    fn mismatched_depths_are_rejected() {
        let s = rational_state(2);
        let p = DynamicalPartition::build(&s).unwrap();
        let e = split_preserved_new(&p, &p, &s.history()[0]).unwrap_err();
        assert!(matches!(e, Error::InconsistentDepths(_)));
    }

    #[test]
    fn equal_depth_discrepancy_is_the_indicator_gap() {
        let s = golden_state(6);
        let p = DynamicalPartition::build(&s).unwrap();
        let d = equidistribution_discrepancy(&p, &p).unwrap();
        let share: Vec<f64> = (0..2)
            .map(|a| (0..p.return_time(a)).map(|i| p.atom(a, i).len().to_f64()).sum())
            .collect();
        assert!((d - share[0].max(share[1])).abs() < 1e-12);
    }

    #[test]
    fn fundamental_segment_is_qn_small_and_whole_interval_is_not() {
        let s = golden_state(7);
        let f = s.map().clone();
        let widest = (0..2).max_by_key(|&a| s.return_time(a)).unwrap();
        assert!(qn_small_check(&f, (s.left(widest), &s.right(widest)), &s).unwrap());
        assert!(!qn_small_check(&f, (&f.zero(), &f.one()), &s).unwrap());
    }
}
