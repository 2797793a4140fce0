use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rauzy induction type: 0 when the top row wins, 1 when the bottom row wins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepType {
    Top,
    Bottom,
}

impl StepType {
    pub fn index(self) -> usize {
        match self {
            StepType::Top => 0,
            StepType::Bottom => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            StepType::Top
        } else {
            StepType::Bottom
        }
    }

    pub fn other(self) -> Self {
        Self::from_index(1 - self.index())
    }
}

/// The pair (π₀, π₁) recording the order of the domain and image intervals.
///
/// Letters are indices `0..d`; positions are stored 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinatorialPair {
    names: Vec<String>,
    pi: [Vec<usize>; 2],
}

pub fn default_names(d: usize) -> Vec<String> {
    (0..d)
        .map(|i| {
            if i < 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("L{i}")
            }
        })
        .collect()
}

fn check_bijection(p: &[usize], d: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; d];
    for &v in p {
        if v >= d || seen[v] {
            return Err(Error::InvalidFamilyParams(format!("{what} is not a bijection onto 1..{d}")));
        }
        seen[v] = true;
    }
    if p.len() != d {
        return Err(Error::InvalidFamilyParams(format!("{what} has {} entries, expected {d}", p.len())));
    }
    Ok(())
}

impl CombinatorialPair {
    /// Builds a pair from 1-based positions `pi0[α]`, `pi1[α]`.
    pub fn new(names: Vec<String>, pi0: &[usize], pi1: &[usize]) -> Result<Self> {
        let d = names.len();
        if d < 2 {
            return Err(Error::InvalidFamilyParams("alphabet needs at least two letters".into()));
        }
        let z0: Vec<usize> = pi0.iter().map(|&p| p.wrapping_sub(1)).collect();
        let z1: Vec<usize> = pi1.iter().map(|&p| p.wrapping_sub(1)).collect();
        check_bijection(&z0, d, "pi0")?;
        check_bijection(&z1, d, "pi1")?;
        Ok(CombinatorialPair { names, pi: [z0, z1] })
    }

    /// Letters `A, B, …` in natural domain order, image order given by the monodromy `p` (1-based).
    pub fn from_monodromy(p: &[usize]) -> Result<Self> {
        let d = p.len();
        let pi0: Vec<usize> = (1..=d).collect();
        Self::new(default_names(d), &pi0, p)
    }

    /// Builds a pair from the letter sequences of the two rows.
    pub fn from_rows(top: &[&str], bottom: &[&str]) -> Result<Self> {
        let names: Vec<String> = top.iter().map(|s| s.to_string()).collect();
        let d = names.len();
        let pi0: Vec<usize> = (1..=d).collect();
        let mut pi1 = vec![0; d];
        if bottom.len() != d {
            return Err(Error::InvalidFamilyParams("rows have different lengths".into()));
        }
        for (pos, name) in bottom.iter().enumerate() {
            let letter = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidFamilyParams(format!("unknown letter {name}")))?;
            pi1[letter] = pos + 1;
        }
        Self::new(names, &pi0, &pi1)
    }

    pub fn d(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, letter: usize) -> &str {
        &self.names[letter]
    }

    pub fn letter_by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// 0-based position of `letter` in row `row`.
    pub fn pos(&self, row: usize, letter: usize) -> usize {
        self.pi[row][letter]
    }

    /// Letter at 0-based position `pos` of row `row`.
    pub fn letter_at(&self, row: usize, pos: usize) -> usize {
        self.pi[row].iter().position(|&p| p == pos).expect("bijection")
    }

    /// Letters of row `row` in left-to-right order.
    pub fn row(&self, row: usize) -> Vec<usize> {
        let mut out = vec![0; self.d()];
        for (letter, &p) in self.pi[row].iter().enumerate() {
            out[p] = letter;
        }
        out
    }

    /// 1-based positions of every letter in row `row`.
    pub fn positions(&self, row: usize) -> Vec<usize> {
        self.pi[row].iter().map(|p| p + 1).collect()
    }

    /// The last letter of row `row`, written α(row).
    pub fn last(&self, row: usize) -> usize {
        self.letter_at(row, self.d() - 1)
    }

    /// Monodromy `p = π₁∘π₀⁻¹`, 1-based.
    pub fn monodromy(&self) -> Vec<usize> {
        let mut p = vec![0; self.d()];
        for letter in 0..self.d() {
            p[self.pi[0][letter]] = self.pi[1][letter] + 1;
        }
        p
    }

    pub fn is_irreducible(&self) -> bool {
        let d = self.d();
        let mut top = vec![false; d];
        let mut bot = vec![false; d];
        let r0 = self.row(0);
        let r1 = self.row(1);
        for j in 0..d - 1 {
            top[r0[j]] = true;
            bot[r1[j]] = true;
            if top == bot {
                return false;
            }
        }
        true
    }

    /// Interior discontinuities of the map built on this pair.
    pub fn discontinuities(&self) -> usize {
        let r0 = self.row(0);
        r0.windows(2)
            .filter(|w| self.pi[1][w[1]] != self.pi[1][w[0]] + 1)
            .count()
    }

    pub fn is_genus_one(&self) -> bool {
        self.discontinuities() <= 2
    }

    /// Combinatorics after one Rauzy step of the given type.
    pub fn rauzy_step(&self, kind: StepType) -> CombinatorialPair {
        let d = self.d();
        let e = kind.index();
        let o = 1 - e;
        let winner = self.last(e);
        let wp = self.pi[o][winner];
        let mut next = self.clone();
        for letter in 0..d {
            let p = self.pi[o][letter];
            next.pi[o][letter] = if p <= wp {
                p
            } else if p < d - 1 {
                p + 1
            } else {
                wp + 1
            };
        }
        next
    }
}
