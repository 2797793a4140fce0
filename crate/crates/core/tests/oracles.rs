use std::sync::Arc;

use giem::analysis::LetterOrbit;
use giem::giem::{golden_lengths, moebius_iem, standard_iem, CombinatorialPair, FamilyDescriptor, Giem, StepType};
use giem::numerics::{grid_derivative, midpoint_grid, uniform_grid, BigFloat, Rational, Real};
use giem::partition::{qn_small_check, DynamicalPartition};
use giem::rauzy::{check_no_connection, RauzyState};
use giem::Error;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn rotation(lengths: Vec<Rational>) -> Arc<Giem<Rational>> {
    Arc::new(standard_iem(lengths, CombinatorialPair::from_monodromy(&[2, 1]).unwrap()).unwrap())
}

fn golden() -> Arc<Giem<Rational>> {
    rotation(golden_lengths(&()))
}

fn brute_return<T: Real>(f: &Giem<T>, x: &T, len: &T) -> (T, usize) {
    let mut y = f.eval(x).unwrap();
    let mut k = 1;
    while y >= *len {
        y = f.eval(&y).unwrap();
        k += 1;
        assert!(k < 100_000, "orbit never returned");
    }
    (y, k)
}

#[test]
fn rotation_iterates_are_fractional_parts() {
    let f = rotation(vec![q(2, 5), q(3, 5)]);
    let rho = q(3, 5);
    for j in 0..20 {
        let x = q(j, 20);
        for k in 0..12 {
            let mut expected = x.clone() + &(rho.clone() * &Rational::from_int(&(), k as i64));
            while expected >= Rational::from_int(&(), 1) {
                expected -= &Rational::from_int(&(), 1);
            }
            assert_eq!(f.iterate(&x, k).unwrap(), expected, "x = {j}/20, k = {k}");
        }
    }
}

#[test]
fn iterate_zero_is_identity() {
    let f = golden();
    let x = q(3, 7);
    assert_eq!(f.iterate(&x, 0).unwrap(), x);
}

#[test]
fn eval_at_one_is_out_of_domain() {
    let f = golden();
    assert!(matches!(f.eval(&Rational::from_int(&(), 1)), Err(Error::OutOfDomain(_))));
}

#[test]
fn type_zero_step_by_hand() {
    // rows (B A) over (A B): A is last on top, so λ_A > λ_B is a type-0 step
    let pair = CombinatorialPair::new(vec!["A".into(), "B".into()], &[2, 1], &[1, 2]).unwrap();
    let (la, lb) = (q(5, 8), q(3, 8));
    let f = Arc::new(standard_iem(vec![la.clone(), lb.clone()], pair).unwrap());
    let mut s = RauzyState::new(f);
    s.step().unwrap();
    let rec = &s.history()[0];
    assert_eq!(rec.kind, StepType::Top);
    assert_eq!(s.lengths(), &[la - &lb, lb][..]);
    for k in 0..200 {
        let x = s.interval_length() * &q(2 * k + 1, 400);
        let (y, n) = brute_return(s.map(), &x, &s.interval_length());
        assert_eq!(s.eval_return_map(&x).unwrap(), y);
        assert_eq!(s.return_time(s.locate(&x).unwrap()), n);
    }
}

#[test]
fn golden_return_times_at_depth_ten() {
    let mut s = RauzyState::new(golden());
    s.advance_to(10).unwrap();
    let q: Vec<usize> = (0..2).map(|a| s.return_time(a)).collect();
    assert_eq!(q, [89, 144]);
    let len = s.interval_length();
    for a in 0..2 {
        let x = s.left(a).clone() + &(s.length(a).clone() / &Rational::from_int(&(), 3));
        assert_eq!(brute_return(s.map(), &x, &len).1, q[a]);
    }
    let kinds: Vec<StepType> = s.history().iter().map(|r| r.kind).collect();
    for w in kinds.windows(2) {
        assert_ne!(w[0], w[1]);
    }
}

#[test]
fn golden_return_map_matches_brute_force() {
    let mut s = RauzyState::new(golden());
    for n in 0..=10 {
        let len = s.interval_length();
        for k in 0..1000 {
            let x = len.clone() * &q(2 * k + 1, 2000);
            let (y, count) = brute_return(s.map(), &x, &len);
            assert_eq!(s.eval_return_map(&x).unwrap(), y, "n = {n}");
            assert_eq!(s.return_time(s.locate(&x).unwrap()), count, "n = {n}");
        }
        let zero = Rational::from_int(&(), 0);
        assert!(s.eval_return_map(&zero).unwrap() < len);
        s.step().unwrap();
    }
}

#[test]
fn depth_zero_return_map_is_eval() {
    let s = RauzyState::new(golden());
    for k in 0..50 {
        let x = q(2 * k + 1, 100);
        assert_eq!(s.eval_return_map(&x).unwrap(), s.map().eval(&x).unwrap());
    }
}

#[test]
fn equal_lengths_are_not_renormalizable() {
    let mut s = RauzyState::new(rotation(vec![q(1, 2), q(1, 2)]));
    assert!(matches!(s.step(), Err(Error::NotRenormalizable { .. })));
}

#[test]
fn connections_by_orbit_search() {
    let third = rotation(vec![q(1, 3), q(2, 3)]);
    let zero = Rational::from_int(&(), 0);
    let r = check_no_connection(&third, 100, &zero);
    assert!(r.found());
    assert!(r.connection.as_ref().unwrap().iterate <= 3);

    let halves = rotation(vec![q(1, 2), q(1, 2)]);
    let r = check_no_connection(&halves, 100, &zero);
    assert_eq!(r.connection.unwrap().iterate, 1);

    let r = check_no_connection(&golden(), 10_000, &zero);
    assert!(!r.found());
}

#[test]
fn moebius_renormalizations_are_nested() {
    let f = FamilyDescriptor::preset("moebius").unwrap().build_arc::<BigFloat>(&128).unwrap();
    let mut s = RauzyState::new(f);
    let mut prev = s.interval_length();
    for _ in 0..5 {
        s.step().unwrap();
        let len = s.interval_length();
        assert!(len < prev);
        let (w, l) = {
            let r = s.history().last().unwrap();
            (r.winner, r.loser)
        };
        assert_ne!(w, l);
        assert!(s.left(s.pair().row(0)[0]).is_zero());
        prev = len;
    }
}

#[test]
fn moebius_branch_derivative_at_left_end() {
    let bits = 128;
    let m = BigFloat::new(bits, 1.7);
    let lengths = vec![BigFloat::new(bits, 0.375), BigFloat::new(bits, 0.625)];
    let images = vec![BigFloat::new(bits, 0.75), BigFloat::new(bits, 0.25)];
    let pair = CombinatorialPair::from_monodromy(&[2, 1]).unwrap();
    let f = moebius_iem(lengths, Some(images), pair, vec![m.clone(), BigFloat::new(bits, 0.8)]).unwrap();
    let br = f.branch(0);
    let expected = m * &br.image_len / &br.len;
    assert!((br.deriv(&br.left) - &expected).abs().to_f64() < 1e-30);

    let xs: Vec<BigFloat> =
        uniform_grid::<BigFloat>(&bits, 201).iter().map(|u| br.left.clone() + &(br.len.clone() * u)).collect();
    let ys: Vec<BigFloat> = xs.iter().map(|x| br.eval(x)).collect();
    let dy = grid_derivative(&xs, &ys).unwrap();
    for (x, d) in xs.iter().zip(&dy).skip(1).take(199) {
        assert!((br.deriv(x) - d).abs().to_f64() < 1e-3);
    }
}

#[test]
fn moebius_zoom_is_the_mobius_map_through_its_midpoint() {
    let f = FamilyDescriptor::preset("moebius").unwrap().build_arc::<BigFloat>(&256).unwrap();
    let mut s = RauzyState::new(f);
    for _ in 0..8 {
        s.step().unwrap();
        for letter in 0..2 {
            let orb = LetterOrbit::new(&s, letter).unwrap();
            let half = BigFloat::new(256, 0.5);
            let zh = orb.point(&half).z;
            let m = zh.clone() / &(zh.one_like() - &zh);
            let closed = orb.compute_mn(None).unwrap().closed;
            assert!((m.clone() - &closed).abs().to_f64() < 1e-60, "depth {}", s.depth());
            for z in midpoint_grid::<BigFloat>(&256, 33) {
                let fz = m.clone() * &z / &(z.one_like() + &(z.clone() * &(m.clone() - &m.one_like())));
                assert!((orb.point(&z).z - &fz).abs().to_f64() < 1e-60);
            }
        }
    }
}

#[test]
fn fundamental_segments_are_qn_small_against_brute_force() {
    let f = golden();
    let mut s = RauzyState::new(f.clone());
    s.advance_to(6).unwrap();
    let qn = s.max_return_time();
    let mut outcomes = [0; 2];
    for k in 1..40 {
        let lo = q(k, 100);
        let hi = lo.clone() + &q(k, 400);
        // f^i(J) are arcs of the rotation by rho = |I_B|; they are disjoint iff no two starts lie closer than |J|
        let rho = f.lengths()[1].clone();
        let one = Rational::from_int(&(), 1);
        let starts: Vec<Rational> = (0..qn)
            .map(|i| {
                let mut x = lo.clone() + &(rho.clone() * &Rational::from_int(&(), i as i64));
                while x >= one {
                    x -= &one;
                }
                x
            })
            .collect();
        let width = hi.clone() - &lo;
        let mut disjoint = true;
        for i in 0..qn {
            for j in i + 1..qn {
                let gap = (starts[i].clone() - &starts[j]).abs();
                let circular = gap.clone().min_of(one.clone() - &gap);
                if circular < width {
                    disjoint = false;
                }
            }
        }
        assert_eq!(qn_small_check(&f, (&lo, &hi), &s).unwrap(), disjoint, "J = [{k}/100, +{k}/400)");
        outcomes[usize::from(disjoint)] += 1;
    }
    assert!(outcomes[0] > 0 && outcomes[1] > 0, "{outcomes:?}");
}

#[test]
fn golden_partition_atoms_follow_fibonacci() {
    let mut s = RauzyState::new(golden());
    let mut fib = vec![1usize, 1];
    for _ in 0..30 {
        fib.push(fib[fib.len() - 1] + fib[fib.len() - 2]);
    }
    for n in 0..12 {
        let p = DynamicalPartition::build(&s).unwrap();
        assert_eq!(p.len(), fib[n + 2], "n = {n}");
        assert_eq!(p.total_length(), Rational::from_int(&(), 1));
        s.step().unwrap();
    }
}
