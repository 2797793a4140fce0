use serde::Serialize;

use crate::giem::Giem;
use crate::numerics::Real;

/// `f^m(∂I_from)` landed on `∂I_to`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Connection {
    pub from: String,
    pub iterate: usize,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConnectionReport {
    pub connection: Option<Connection>,
    pub checked_iterates: usize,
    /// Smallest distance observed between an orbit point and a target endpoint.
    pub closest_approach: f64,
}

impl ConnectionReport {
    pub fn found(&self) -> bool {
        self.connection.is_some()
    }
}

/// Searches `f^m(∂I_α) = ∂I_β` for `1 ≤ m ≤ max_iter` and every β that is not first in the domain.
///
/// Equality is exact for exact arithmetic and within `tol` otherwise.
pub fn check_no_connection<T: Real>(f: &Giem<T>, max_iter: usize, tol: &T) -> ConnectionReport {
    let pair = f.pair();
    let targets: Vec<usize> = (0..f.d()).filter(|&b| pair.pos(0, b) != 0).collect();
    let mut orbit: Vec<T> = (0..f.d()).map(|a| f.branch(a).left.clone()).collect();
    let mut closest = f64::INFINITY;
    for m in 1..=max_iter {
        for (a, x) in orbit.iter_mut().enumerate() {
            *x = f.eval(x).expect("orbit stays in [0,1)");
            for &b in &targets {
                let gap = (x.clone() - &f.branch(b).left).abs();
                let hit = if T::EXACT { gap.is_zero() } else { gap <= *tol };
                closest = closest.min(gap.to_f64());
                if hit {
                    return ConnectionReport {
                        connection: Some(Connection {
                            from: pair.name(a).to_string(),
                            iterate: m,
                            to: pair.name(b).to_string(),
                        }),
                        checked_iterates: m,
                        closest_approach: closest,
                    };
                }
            }
        }
    }
    ConnectionReport { connection: None, checked_iterates: max_iter, closest_approach: closest }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giem::families::standard_iem;
    use crate::giem::CombinatorialPair;
    use crate::numerics::Rational;

    fn rot(a: Rational, b: Rational) -> Giem<Rational> {
        standard_iem(vec![a, b], CombinatorialPair::from_monodromy(&[2, 1]).unwrap()).unwrap()
    }

    #[test]
    fn rational_rotation_connects() {
        let f = rot(Rational::new(2, 3), Rational::new(1, 3));
        let r = check_no_connection(&f, 100, &Rational::new(0, 1));
        let c = r.connection.unwrap();
        assert_eq!(c.iterate, 2);
        assert_eq!(c.to, "B");
    }

    #[test]
    fn equal_halves_connect_immediately() {
        let f = rot(Rational::new(1, 2), Rational::new(1, 2));
        let r = check_no_connection(&f, 10, &Rational::new(0, 1));
        assert_eq!(r.connection.unwrap().iterate, 1);
    }
}
