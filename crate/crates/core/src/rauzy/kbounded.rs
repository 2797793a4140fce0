use serde::{Deserialize, Serialize};

use super::StepSummary;
use crate::error::{Error, Result};

/// How the chain condition of the bounded-combinatorics definition is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainReading {
    /// `α_{n₁+i}(1−ε_{n₁+p}) = α_{n₁+i+1}(ε_{n₁+i})`, indices exactly as printed.
    Literal,
    /// `α_{n₁+i}(1−ε_{n₁+i}) = α_{n₁+i+1}(ε_{n₁+i+1})`: each loser wins the next step.
    IndexConsistent,
}

/// A depth `n` and letters `(β, γ)` with no admissible chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KWitness {
    pub n: usize,
    pub beta: usize,
    pub gamma: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KBoundedReport {
    pub reading: ChainReading,
    pub k: usize,
    pub passed: bool,
    /// Checked depths `k-1..=window_end`.
    pub window_end: usize,
    pub failures: Vec<KWitness>,
    /// Smallest k ≤ history/2 that passes, if any.
    pub minimal_k: Option<usize>,
}

fn last(s: &StepSummary, row: usize) -> usize {
    if row == s.kind.index() {
        s.winner
    } else {
        s.loser
    }
}

fn chain_holds(h: &[StepSummary], n1: usize, p: usize, reading: ChainReading) -> bool {
    (0..p).all(|i| match reading {
        ChainReading::Literal => {
            let row = 1 - h[n1 + p].kind.index();
            last(&h[n1 + i], row) == last(&h[n1 + i + 1], h[n1 + i].kind.index())
        }
        ChainReading::IndexConsistent => h[n1 + i].loser == h[n1 + i + 1].winner,
    })
}

fn witnesses(h: &[StepSummary], d: usize, k: usize, reading: ChainReading, stop_early: bool) -> Vec<KWitness> {
    let len = h.len();
    let mut out = Vec::new();
    for n in (k - 1)..=len - k {
        let lo = n.saturating_sub(k - 1);
        let hi = (n + k - 1).min(len - 1);
        for beta in 0..d {
            for gamma in 0..d {
                let ok = (lo..=hi).any(|n1| {
                    h[n1].winner == beta
                        && (n1..=hi).any(|m| h[m].loser == gamma && chain_holds(h, n1, m - n1, reading))
                });
                if !ok {
                    out.push(KWitness { n, beta, gamma });
                    if stop_early {
                        return out;
                    }
                }
            }
        }
    }
    out
}

/// Checks `k`-bounded combinatorics on the depths whose search window fits in the history.
pub fn check_k_bounded(history: &[StepSummary], d: usize, k: usize, reading: ChainReading) -> Result<KBoundedReport> {
    if k == 0 || history.len() < 2 * k {
        return Err(Error::HistoryTooShort { have: history.len(), k, need: 2 * k.max(1) });
    }
    let failures = witnesses(history, d, k, reading, false);
    let minimal_k = (1..=history.len() / 2).find(|&j| witnesses(history, d, j, reading, true).is_empty());
    Ok(KBoundedReport {
        reading,
        k,
        passed: failures.is_empty(),
        window_end: history.len() - k,
        failures,
        minimal_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::StepType;

    fn golden(n: usize) -> Vec<StepSummary> {
        // letters A=0, B=1; B wins type 0 at even depths, A wins type 1 at odd depths
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    StepSummary { kind: StepType::Top, winner: 1, loser: 0 }
                } else {
                    StepSummary { kind: StepType::Bottom, winner: 0, loser: 1 }
                }
            })
            .collect()
    }

    #[test]
    fn golden_is_two_bounded() {
        for reading in [ChainReading::Literal, ChainReading::IndexConsistent] {
            let r = check_k_bounded(&golden(20), 2, 2, reading).unwrap();
            assert!(r.passed, "{reading:?}: {:?}", r.failures);
            assert_eq!(r.minimal_k, Some(2));
            let r1 = check_k_bounded(&golden(20), 2, 1, reading).unwrap();
            assert!(!r1.passed);
        }
    }

    #[test]
    fn short_history_is_rejected() {
        let e = check_k_bounded(&golden(3), 2, 2, ChainReading::Literal).unwrap_err();
        assert!(matches!(e, Error::HistoryTooShort { .. }));
    }

    #[test]
    fn letter_that_never_wins_fails() {
        let h: Vec<StepSummary> = (0..16)
            .map(|_| StepSummary { kind: StepType::Top, winner: 1, loser: 0 })
            .collect();
        for reading in [ChainReading::Literal, ChainReading::IndexConsistent] {
            for k in 1..=8 {
                let r = check_k_bounded(&h, 2, k, reading).unwrap();
                assert!(!r.passed);
                assert!(r.failures.iter().any(|w| w.beta == 0));
            }
            assert_eq!(check_k_bounded(&h, 2, 1, reading).unwrap().minimal_k, None);
        }
    }
}
