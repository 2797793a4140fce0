//! Rauzy-Veech induction: single steps, deep renormalization, return maps and
//! the combinatorial health checks.

mod connection;
mod kbounded;

pub use connection::{check_no_connection, Connection, ConnectionReport};
pub use kbounded::{check_k_bounded, ChainReading, KBoundedReport};

use std::io::Write;
use std::sync::Arc;

use rug::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::giem::{CombinatorialPair, Giem, StepType};
use crate::numerics::Real;

/// One induction step taken at depth `depth`.
#[derive(Clone, Debug)]
pub struct StepRecord<T> {
    pub depth: usize,
    pub kind: StepType,
    pub winner: usize,
    pub loser: usize,
    /// `|I⁽ⁿ⁾|` before the step.
    pub interval_length: T,
    /// `q⁽ⁿ⁾` before the step.
    pub return_times: Vec<Integer>,
    /// Per-letter lengths after the step.
    pub lengths: Vec<T>,
    /// Combinatorics after the step.
    pub pair: CombinatorialPair,
}

impl<T> StepRecord<T> {
    /// Last letter of row `row` at the depth the step was taken, α_n(row).
    pub fn last(&self, row: usize) -> usize {
        if row == self.kind.index() {
            self.winner
        } else {
            self.loser
        }
    }
}

/// Compact summary of a step, independent of the arithmetic type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StepSummary {
    pub kind: StepType,
    pub winner: usize,
    pub loser: usize,
}

impl<T> From<&StepRecord<T>> for StepSummary {
    fn from(r: &StepRecord<T>) -> Self {
        StepSummary { kind: r.kind, winner: r.winner, loser: r.loser }
    }
}

/// The depth-`n` renormalization `Rⁿf`, the first return map of `f` to `I⁽ⁿ⁾ = [0, |I⁽ⁿ⁾|)`.
#[derive(Clone, Debug)]
pub struct RauzyState<T: Real> {
    map: Arc<Giem<T>>,
    depth: usize,
    pair: CombinatorialPair,
    lengths: Vec<T>,
    image_lengths: Vec<T>,
    lefts: Vec<T>,
    image_lefts: Vec<T>,
    return_times: Vec<Integer>,
    history: Vec<StepRecord<T>>,
}

fn prefix_sums<T: Real>(order: &[usize], lens: &[T], zero: &T) -> Vec<T> {
    let mut out = vec![zero.clone(); lens.len()];
    let mut acc = zero.clone();
    for &a in order {
        out[a] = acc.clone();
        acc += &lens[a];
    }
    out
}

impl<T: Real> RauzyState<T> {
    pub fn new(map: Arc<Giem<T>>) -> Self {
        let pair = map.pair().clone();
        let lengths = map.lengths();
        let image_lengths = map.image_lengths();
        let d = pair.d();
        let mut s = RauzyState {
            depth: 0,
            lefts: Vec::new(),
            image_lefts: Vec::new(),
            return_times: vec![Integer::from(1); d],
            history: Vec::new(),
            pair,
            lengths,
            image_lengths,
            map,
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        let zero = self.map.zero();
        self.lefts = prefix_sums(&self.pair.row(0), &self.lengths, &zero);
        self.image_lefts = prefix_sums(&self.pair.row(1), &self.image_lengths, &zero);
    }

    pub fn map(&self) -> &Arc<Giem<T>> {
        &self.map
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn pair(&self) -> &CombinatorialPair {
        &self.pair
    }

    pub fn d(&self) -> usize {
        self.pair.d()
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn length(&self, letter: usize) -> &T {
        &self.lengths[letter]
    }

    /// Lengths of the images `Rⁿf(I⁽ⁿ⁾_α)`.
    pub fn image_lengths(&self) -> &[T] {
        &self.image_lengths
    }

    pub fn left(&self, letter: usize) -> &T {
        &self.lefts[letter]
    }

    pub fn right(&self, letter: usize) -> T {
        self.lefts[letter].clone() + &self.lengths[letter]
    }

    pub fn image_left(&self, letter: usize) -> &T {
        &self.image_lefts[letter]
    }

    /// `|I⁽ⁿ⁾|`.
    pub fn interval_length(&self) -> T {
        self.lengths.iter().fold(self.map.zero(), |a, b| a + b)
    }

    pub fn return_times(&self) -> &[Integer] {
        &self.return_times
    }

    pub fn return_time(&self, letter: usize) -> usize {
        self.return_times[letter].to_usize().expect("return time fits in usize")
    }

    /// `q_n = max_α qⁿ_α`.
    pub fn max_return_time(&self) -> usize {
        (0..self.d()).map(|a| self.return_time(a)).max().unwrap_or(1)
    }

    pub fn history(&self) -> &[StepRecord<T>] {
        &self.history
    }

    pub fn summaries(&self) -> Vec<StepSummary> {
        self.history.iter().map(StepSummary::from).collect()
    }

    /// Letter whose induction subinterval contains `x`.
    pub fn locate(&self, x: &T) -> Result<usize> {
        if *x < self.map.zero() || *x >= self.interval_length() {
            return Err(Error::OutOfDomain(x.to_text()));
        }
        let mut found = self.pair.row(0)[0];
        for a in self.pair.row(0) {
            if self.lefts[a] <= *x {
                found = a;
            }
        }
        Ok(found)
    }

    /// `f^{qⁿ_α}(x)` for `x ∈ I⁽ⁿ⁾_α`.
    pub fn eval_return_map(&self, x: &T) -> Result<T> {
        let a = self.locate(x)?;
        self.forward(a, x)
    }

    fn forward(&self, letter: usize, x: &T) -> Result<T> {
        let q = self.return_time(letter);
        let mut y = x.clone();
        let total = self.interval_length();
        let slack = T::equality_tolerance(self.map.ctx()) * &T::from_int(self.map.ctx(), q as i64 + 1);
        for i in 0..q {
            y = self.map.eval(&y)?;
            debug_assert!(
                i + 1 == q || y.clone() + &slack >= total,
                "orbit re-entered the induction interval at time {} < {q}",
                i + 1
            );
        }
        Ok(y)
    }

    fn backward(&self, letter: usize, y: &T) -> Result<T> {
        let q = self.return_time(letter);
        let mut x = y.clone();
        for _ in 0..q {
            x = self.map.inverse(&x)?;
        }
        Ok(x)
    }

    /// Advances to depth `n + 1`.
    pub fn step(&mut self) -> Result<()> {
        let d = self.d();
        let top = self.pair.last(0);
        let bot = self.pair.last(1);
        let diff = self.lengths[top].clone() - &self.image_lengths[bot];
        if diff.abs() <= T::equality_tolerance(self.map.ctx()) {
            return Err(Error::NotRenormalizable {
                depth: self.depth,
                reason: format!(
                    "|I_{}| equals the image length of {}",
                    self.pair.name(top),
                    self.pair.name(bot)
                ),
            });
        }
        let before_len = self.interval_length();
        let before_q = self.return_times.clone();
        let kind = if diff.is_positive() { StepType::Top } else { StepType::Bottom };
        let (winner, loser) = match kind {
            StepType::Top => (top, bot),
            StepType::Bottom => (bot, top),
        };
        match kind {
            StepType::Top => {
                // cut Rⁿf(I_bot) off the right end of I_top
                let new_len = diff;
                let cut = self.lefts[top].clone() + &new_len;
                let s = self.forward(top, &cut)?;
                let new_img = s - &self.image_lefts[top];
                let rest = self.image_lengths[top].clone() - &new_img;
                self.lengths[top] = new_len;
                self.image_lengths[top] = new_img;
                self.image_lengths[bot] = rest;
            }
            StepType::Bottom => {
                // I_top is removed; its preimage splits I_bot
                let p = self.backward(bot, &self.lefts[top])?;
                let keep = p - &self.lefts[bot];
                let moved = self.lengths[bot].clone() - &keep;
                self.image_lengths[bot] = self.image_lengths[bot].clone() - &self.lengths[top];
                self.lengths[bot] = keep;
                self.lengths[top] = moved;
            }
        }
        let wq = self.return_times[winner].clone();
        self.return_times[loser] += wq;
        self.pair = self.pair.rauzy_step(kind);
        self.refresh();
        debug_assert_eq!(self.pair.d(), d);
        self.history.push(StepRecord {
            depth: self.depth,
            kind,
            winner,
            loser,
            interval_length: before_len,
            return_times: before_q,
            lengths: self.lengths.clone(),
            pair: self.pair.clone(),
        });
        self.depth += 1;
        Ok(())
    }

    /// Steps until depth `n`.
    pub fn advance_to(&mut self, n: usize) -> Result<()> {
        while self.depth < n {
            self.step()?;
        }
        Ok(())
    }

    /// Writes the step history as CSV.
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["depth".to_string(), "type".into(), "winner".into(), "loser".into(), "interval_length".into()];
        header.extend(self.pair.names().iter().map(|n| format!("q_{n}")));
        w.write_record(&header)?;
        for r in &self.history {
            let mut row = vec![
                r.depth.to_string(),
                r.kind.index().to_string(),
                self.pair.name(r.winner).to_string(),
                self.pair.name(r.loser).to_string(),
                r.interval_length.to_text(),
            ];
            row.extend(r.return_times.iter().map(|q| q.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Renormalizes `f` `n` times. On failure the error carries the failing depth.
pub fn renormalize<T: Real>(f: Arc<Giem<T>>, n: usize) -> Result<RauzyState<T>> {
    let mut s = RauzyState::new(f);
    s.advance_to(n)?;
    Ok(s)
}

/// Renormalizes as far as possible up to `n`, returning every intermediate state.
pub fn renormalize_all<T: Real>(f: Arc<Giem<T>>, n: usize) -> Result<Vec<RauzyState<T>>> {
    let mut s = RauzyState::new(f);
    let mut out = vec![s.clone()];
    while s.depth() < n {
        s.step()?;
        out.push(s.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::families::{golden_lengths, standard_iem};
    use crate::numerics::Rational;

    fn rot(a: Rational, b: Rational) -> Arc<Giem<Rational>> {
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        Arc::new(standard_iem(vec![a, b], pair).unwrap())
    }

    #[test]
    fn depth_zero_state() {
        let f = rot(Rational::new(2, 5), Rational::new(3, 5));
        let s = renormalize(f.clone(), 0).unwrap();
        assert_eq!(s.depth(), 0);
        assert!(s.return_times().iter().all(|q| *q == 1));
        assert_eq!(s.lengths(), f.lengths().as_slice());
        let x = Rational::new(1, 7);
        assert_eq!(s.eval_return_map(&x).unwrap(), f.eval(&x).unwrap());
    }

    #[test]
    fn two_interval_step_removes_shorter_tail() {
        // λ_A > λ_B: the bottom row wins, I_B is cut off and A shrinks by λ_B
        let f = rot(Rational::new(3, 5), Rational::new(2, 5));
        let mut s = RauzyState::new(f);
        s.step().unwrap();
        assert_eq!(s.history()[0].kind, StepType::Bottom);
        assert_eq!(s.lengths(), &[Rational::new(1, 5), Rational::new(2, 5)]);
    }

    #[test]
    fn equal_lengths_are_not_renormalizable() {
        let f = rot(Rational::new(1, 2), Rational::new(1, 2));
        let e = renormalize(f, 3).unwrap_err();
        assert!(matches!(e, Error::NotRenormalizable { depth: 0, .. }));
    }

    #[test]
    fn golden_types_alternate() {
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        let f = Arc::new(standard_iem(golden_lengths::<Rational>(&()), pair).unwrap());
        let s = renormalize(f, 12).unwrap();
        for (n, r) in s.history().iter().enumerate() {
            assert_eq!(r.kind.index(), n % 2);
        }
        let fib = [1u32, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610];
        // depth 9: (89, 55)
        let s9 = renormalize(s.map().clone(), 9).unwrap();
        assert_eq!(s9.return_times()[0], 89);
        assert_eq!(s9.return_times()[1], 55);
        for n in 1..=12 {
            let sn = renormalize(s.map().clone(), n).unwrap();
            let total = sn.return_times()[0].clone() + &sn.return_times()[1];
            // atom count F_{n+3}
            assert_eq!(total, fib[n + 2]);
        }
    }

    #[test]
    fn history_csv_has_one_row_per_step() {
        let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
        let f = Arc::new(standard_iem(golden_lengths::<Rational>(&()), pair).unwrap());
        let s = renormalize(f, 4).unwrap();
        let mut buf = Vec::new();
        s.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "depth,type,winner,loser,interval_length,q_A,q_B");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,B,A,1,1,1"));
    }
}
