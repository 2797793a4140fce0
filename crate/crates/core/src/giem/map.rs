use std::fmt;

use serde::Serialize;

use super::combinatorics::CombinatorialPair;
use super::shape::{Jet, Shape};
use crate::error::{Error, Result};
use crate::numerics::Real;

/// One branch `f(x) = c + μ·h((x − l)/λ)` on `[l, l+λ)`.
#[derive(Clone, Debug)]
pub struct Branch<T: Real> {
    pub left: T,
    pub len: T,
    pub image_left: T,
    pub image_len: T,
    pub shape: Shape<T>,
    slope: T,
    unit_slope: bool,
}

impl<T: Real> Branch<T> {
    pub fn new(left: T, len: T, image_left: T, image_len: T, shape: Shape<T>) -> Self {
        let slope = image_len.clone() / &len;
        let unit_slope = shape.is_linear() && slope == slope.one_like();
        Branch { left, len, image_left, image_len, shape, slope, unit_slope }
    }

    pub fn right(&self) -> T {
        self.left.clone() + &self.len
    }

    pub fn image_right(&self) -> T {
        self.image_left.clone() + &self.image_len
    }

    pub fn contains(&self, x: &T) -> bool {
        *x >= self.left && *x < self.right()
    }

    fn local(&self, x: &T) -> T {
        (x.clone() - &self.left) / &self.len
    }

    /// Evaluates the branch formula; `x` may be the right endpoint (left limit).
    pub fn eval(&self, x: &T) -> T {
        if self.unit_slope {
            return self.image_left.clone() + &(x.clone() - &self.left);
        }
        if self.shape.is_linear() {
            return self.image_left.clone() + &((x.clone() - &self.left) * &self.slope);
        }
        self.image_left.clone() + &(self.image_len.clone() * &self.shape.eval(&self.local(x)))
    }

    /// `(f, f', f'')` at `x`.
    pub fn jet(&self, x: &T) -> Jet<T> {
        if self.shape.is_linear() {
            return Jet { h: self.eval(x), dh: self.slope.clone(), d2h: Some(x.zero_like()) };
        }
        let j = self.shape.jet(&self.local(x));
        Jet {
            h: self.image_left.clone() + &(self.image_len.clone() * &j.h),
            dh: self.slope.clone() * &j.dh,
            d2h: j.d2h.map(|v| self.slope.clone() * &v / &self.len),
        }
    }

    pub fn deriv(&self, x: &T) -> T {
        if self.shape.is_linear() {
            return self.slope.clone();
        }
        self.slope.clone() * &self.shape.jet(&self.local(x)).dh
    }

    /// Nonlinearity `f''/f'`.
    pub fn nonlinearity(&self, x: &T) -> Option<T> {
        if self.shape.is_linear() {
            return Some(x.zero_like());
        }
        let j = self.shape.jet(&self.local(x));
        j.d2h.map(|v| v / &j.dh / &self.len)
    }

    /// Preimage of `y` in the closed image interval.
    pub fn inverse(&self, y: &T) -> T {
        if self.unit_slope {
            return self.left.clone() + &(y.clone() - &self.image_left);
        }
        if self.shape.is_linear() {
            return self.left.clone() + &((y.clone() - &self.image_left) / &self.slope);
        }
        let v = (y.clone() - &self.image_left) / &self.image_len;
        self.left.clone() + &(self.len.clone() * &self.shape.inverse(&v))
    }

    /// Absolute positions where `f''` is unbounded.
    pub fn singular_points(&self) -> Vec<T> {
        self.shape
            .singular_points()
            .into_iter()
            .map(|u| self.left.clone() + &(self.len.clone() * &u))
            .collect()
    }
}

/// A generalized interval exchange map on `[0, 1)`.
#[derive(Clone)]
pub struct Giem<T: Real> {
    pair: CombinatorialPair,
    branches: Vec<Branch<T>>,
    domain_order: Vec<usize>,
    image_order: Vec<usize>,
    ctx: T::Ctx,
    pub label: String,
}

impl<T: Real> fmt::Debug for Giem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Giem")
            .field("label", &self.label)
            .field("pair", &self.pair)
            .field("lengths", &self.lengths().iter().map(|v| v.to_f64()).collect::<Vec<_>>())
            .finish()
    }
}

/// Pass/fail record of the structural checks on a map.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub irreducible: bool,
    pub domain_tiling: bool,
    pub image_tiling: bool,
    pub orientation: bool,
    pub image_order: bool,
    pub discontinuities: usize,
    pub genus_one: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.irreducible && self.domain_tiling && self.image_tiling && self.orientation && self.image_order
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(f, "irreducible     {}", mark(self.irreducible))?;
        writeln!(f, "domain tiling   {}", mark(self.domain_tiling))?;
        writeln!(f, "image tiling    {}", mark(self.image_tiling))?;
        writeln!(f, "orientation     {}", mark(self.orientation))?;
        writeln!(f, "image order     {}", mark(self.image_order))?;
        writeln!(f, "discontinuities {} (genus one: {})", self.discontinuities, self.genus_one)?;
        for m in &self.messages {
            writeln!(f, "  {m}")?;
        }
        Ok(())
    }
}

impl<T: Real> Giem<T> {
    /// Lays out domain intervals in π₀ order and images in π₁ order.
    pub fn new(pair: CombinatorialPair, lengths: Vec<T>, image_lengths: Vec<T>, shapes: Vec<Shape<T>>) -> Result<Self> {
        let d = pair.d();
        if lengths.len() != d || image_lengths.len() != d || shapes.len() != d {
            return Err(Error::InvalidFamilyParams(format!("expected {d} lengths, image lengths and shapes")));
        }
        let ctx = lengths[0].ctx();
        if lengths.iter().chain(&image_lengths).any(|l| !l.is_positive()) {
            return Err(Error::InvalidFamilyParams("lengths must be positive".into()));
        }
        let tol = T::epsilon(&ctx) * &T::from_int(&ctx, 4 * d as i64);
        for (what, ls) in [("domain", &lengths), ("image", &image_lengths)] {
            let total = ls.iter().fold(T::from_int(&ctx, 0), |a, b| a + b);
            if (total.clone() - &T::from_int(&ctx, 1)).abs() > tol {
                return Err(Error::InvalidFamilyParams(format!("{what} lengths sum to {}", total.to_text())));
            }
        }
        let mut dl = vec![T::from_int(&ctx, 0); d];
        let mut il = vec![T::from_int(&ctx, 0); d];
        let mut acc = T::from_int(&ctx, 0);
        for letter in pair.row(0) {
            dl[letter] = acc.clone();
            acc += &lengths[letter];
        }
        let mut acc = T::from_int(&ctx, 0);
        for letter in pair.row(1) {
            il[letter] = acc.clone();
            acc += &image_lengths[letter];
        }
        let branches = shapes
            .into_iter()
            .enumerate()
            .map(|(a, s)| Branch::new(dl[a].clone(), lengths[a].clone(), il[a].clone(), image_lengths[a].clone(), s))
            .collect();
        Ok(Self::from_branches(pair, branches))
    }

    /// Assembles a map from explicit branches without any checks; see [`Giem::validate`].
    pub fn from_branches(pair: CombinatorialPair, branches: Vec<Branch<T>>) -> Self {
        let ctx = branches[0].left.ctx();
        let mut domain_order: Vec<usize> = (0..branches.len()).collect();
        domain_order.sort_by(|&a, &b| branches[a].left.cmp_total(&branches[b].left));
        let mut image_order: Vec<usize> = (0..branches.len()).collect();
        image_order.sort_by(|&a, &b| branches[a].image_left.cmp_total(&branches[b].image_left));
        Giem { pair, branches, domain_order, image_order, ctx, label: String::new() }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn ctx(&self) -> &T::Ctx {
        &self.ctx
    }

    pub fn d(&self) -> usize {
        self.pair.d()
    }

    pub fn pair(&self) -> &CombinatorialPair {
        &self.pair
    }

    pub fn branch(&self, letter: usize) -> &Branch<T> {
        &self.branches[letter]
    }

    pub fn branches(&self) -> &[Branch<T>] {
        &self.branches
    }

    pub fn lengths(&self) -> Vec<T> {
        self.branches.iter().map(|b| b.len.clone()).collect()
    }

    pub fn image_lengths(&self) -> Vec<T> {
        self.branches.iter().map(|b| b.image_len.clone()).collect()
    }

    pub fn monodromy(&self) -> Vec<usize> {
        self.pair.monodromy()
    }

    pub fn zero(&self) -> T {
        T::from_int(&self.ctx, 0)
    }

    pub fn one(&self) -> T {
        T::from_int(&self.ctx, 1)
    }

    fn check_domain(&self, x: &T) -> Result<()> {
        if *x < self.zero() || *x >= self.one() {
            return Err(Error::OutOfDomain(x.to_text()));
        }
        Ok(())
    }

    /// Letter whose domain interval contains `x`.
    pub fn locate(&self, x: &T) -> Result<usize> {
        self.check_domain(x)?;
        let mut found = self.domain_order[0];
        for &a in &self.domain_order[1..] {
            if self.branches[a].left <= *x {
                found = a;
            } else {
                break;
            }
        }
        Ok(found)
    }

    pub fn eval(&self, x: &T) -> Result<T> {
        let a = self.locate(x)?;
        Ok(self.branches[a].eval(x))
    }

    pub fn deriv(&self, x: &T) -> Result<T> {
        let a = self.locate(x)?;
        Ok(self.branches[a].deriv(x))
    }

    pub fn second_deriv(&self, x: &T) -> Result<T> {
        let a = self.locate(x)?;
        self.branches[a]
            .jet(x)
            .d2h
            .ok_or_else(|| Error::NoSecondDerivative(self.pair.name(a).to_string()))
    }

    /// `f^k(x)`.
    pub fn iterate(&self, x: &T, k: usize) -> Result<T> {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.eval(&y)?;
        }
        Ok(y)
    }

    /// `f^k(x)` with the orbit `x₀..x_k` and the chain-rule derivative of `f^k`.
    pub fn iterate_logged(&self, x: &T, k: usize) -> Result<(Vec<T>, T)> {
        let mut orbit = Vec::with_capacity(k + 1);
        orbit.push(x.clone());
        let mut d = self.one();
        let mut y = x.clone();
        for _ in 0..k {
            let a = self.locate(&y)?;
            d *= &self.branches[a].deriv(&y);
            y = self.branches[a].eval(&y);
            orbit.push(y.clone());
        }
        Ok((orbit, d))
    }

    /// Letter whose image interval contains `y`.
    pub fn locate_image(&self, y: &T) -> Result<usize> {
        self.check_domain(y)?;
        let mut found = self.image_order[0];
        for &a in &self.image_order[1..] {
            if self.branches[a].image_left <= *y {
                found = a;
            } else {
                break;
            }
        }
        Ok(found)
    }

    pub fn inverse(&self, y: &T) -> Result<T> {
        let a = self.locate_image(y)?;
        Ok(self.branches[a].inverse(y))
    }

    /// Structural checks; failures are recorded in the report rather than raised.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport {
            irreducible: self.pair.is_irreducible(),
            discontinuities: self.pair.discontinuities(),
            genus_one: self.pair.is_genus_one(),
            ..Default::default()
        };
        if !r.irreducible {
            r.messages.push("combinatorial pair is reducible".into());
        }
        let d = self.d();
        let tol = T::epsilon(&self.ctx) * &T::from_int(&self.ctx, 16 * d as i64);
        let close = |a: &T, b: &T| (a.clone() - b).abs() <= tol;

        let mut ok = true;
        let mut edge = self.zero();
        for (k, &a) in self.domain_order.iter().enumerate() {
            let b = &self.branches[a];
            if !close(&b.left, &edge) || !b.len.is_positive() {
                ok = false;
                r.messages.push(format!("domain of {} does not continue the tiling", self.pair.name(a)));
            }
            if self.pair.pos(0, a) != k {
                ok = false;
                r.messages.push(format!("domain order of {} disagrees with pi0", self.pair.name(a)));
            }
            edge = b.right();
        }
        if !close(&edge, &self.one()) {
            ok = false;
            r.messages.push(format!("domain ends at {}", edge.to_text()));
        }
        r.domain_tiling = ok;

        let mut ok = true;
        let mut edge = self.zero();
        for &a in &self.image_order {
            let b = &self.branches[a];
            if !close(&b.image_left, &edge) || !b.image_len.is_positive() {
                ok = false;
                r.messages.push(format!("image of {} does not continue the tiling", self.pair.name(a)));
            }
            edge = b.image_right();
        }
        if !close(&edge, &self.one()) {
            ok = false;
            r.messages.push(format!("images end at {}", edge.to_text()));
        }
        r.image_tiling = ok;

        let mut ok = true;
        let samples = 64;
        for (a, b) in self.branches.iter().enumerate() {
            let lo = b.eval(&b.left);
            let hi = b.eval(&b.right());
            if !close(&lo, &b.image_left) || !close(&hi, &b.image_right()) {
                ok = false;
                r.messages.push(format!("branch {} does not map endpoints to endpoints", self.pair.name(a)));
            }
            let mut prev = lo;
            for k in 1..=samples {
                let x = b.left.clone() + &(b.len.clone() * &T::from_ratio(&self.ctx, k, samples));
                let y = b.eval(&x);
                let x_mid = b.left.clone() + &(b.len.clone() * &T::from_ratio(&self.ctx, 2 * k - 1, 2 * samples));
                if y <= prev || !b.deriv(&x_mid).is_positive() {
                    ok = false;
                    r.messages.push(format!("branch {} is not increasing", self.pair.name(a)));
                    break;
                }
                prev = y;
            }
        }
        r.orientation = ok;

        let by_pi1 = self.pair.row(1);
        r.image_order = by_pi1 == self.image_order;
        if !r.image_order {
            r.messages.push("image order disagrees with pi1".into());
        }
        r
    }
}
