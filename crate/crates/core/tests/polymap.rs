use num_complex::Complex64;
use proptest::prelude::*;
use prunedjulia::polymap::{make_tangent_vector, PolyMapError};
use prunedjulia::{IntervalMap, Poly};
use rand::{Rng, SeedableRng};

fn cheb2() -> IntervalMap {
    IntervalMap::new(vec![-1.0, 0.0, 2.0], 0.5).unwrap()
}

#[test]
fn chebyshev_orbit_through_critical_point() {
    let (orbit, deriv) = cheb2().evaluate_orbit(Complex64::new(0.0, 0.0), 3).unwrap();
    let re: Vec<f64> = orbit.iter().map(|z| z.re).collect();
    assert_eq!(re, vec![0.0, -1.0, 1.0, 1.0]);
    assert_eq!(deriv[0], Complex64::new(1.0, 0.0));
    assert_eq!(deriv[3].norm(), 0.0);
}

#[test]
fn cube_of_imaginary_point() {
    let f = IntervalMap::new(vec![0.0, 0.0, 0.0, 1.0], 0.5).unwrap();
    let (orbit, _) = f.evaluate_orbit(Complex64::new(0.0, 0.5), 1).unwrap();
    assert!((orbit[1] - Complex64::new(0.0, -0.125)).norm() < 1e-15);
}

#[test]
fn orbit_matches_nested_evaluation() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    // degree-5 odd map fixing ±1: x + t(x^5 − x) keeps f(±1) = ±1
    let t: f64 = rng.gen_range(0.2..0.9);
    let coeffs = vec![0.0, 1.0 - t, 0.0, 0.0, 0.0, t];
    let f = IntervalMap::new(coeffs.clone(), 0.5).unwrap();
    let p = Poly::new(coeffs);
    let z = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3));
    let (orbit, deriv) = f.evaluate_orbit(z, 6).unwrap();
    let mut w = z;
    let mut d = Complex64::new(1.0, 0.0);
    for k in 1..=6 {
        d *= p.derivative().eval_c(w);
        w = p.eval_c(w);
        assert!((orbit[k] - w).norm() <= 1e-12 * w.norm().max(1e-300));
        assert!((deriv[k] - d).norm() <= 1e-12 * d.norm().max(1e-300));
    }
}

#[test]
fn escape_is_reported() {
    let err = cheb2().evaluate_orbit(Complex64::new(5.0, 0.0), 10).unwrap_err();
    assert!(matches!(err, PolyMapError::OverflowEscape(_)));
}

#[test]
fn critical_structure_examples() {
    let f = cheb2();
    assert_eq!(f.nu(), 1);
    assert_eq!(f.critical_points()[0].c, 0.0);
    assert_eq!(f.critical_points()[0].ell, 2);
    assert_eq!((f.sign(), f.external_degree()), (1, 2));

    let g = IntervalMap::new(vec![0.0, 0.0, 0.0, 1.0], 0.5).unwrap();
    assert_eq!(g.critical_points()[0].ell, 3);
    assert_eq!((g.sign(), g.external_degree()), (1, 3));

    let h = IntervalMap::new(vec![1.0, 0.0, -2.0], 0.5).unwrap();
    assert_eq!(h.critical_points()[0].ell, 2);
    assert_eq!((h.sign(), h.external_degree()), (-1, 2));
}

#[test]
fn boundary_errors() {
    assert!(matches!(
        IntervalMap::new(vec![0.0, 0.5], 0.5),
        Err(PolyMapError::NotBoundaryPreserving { .. })
    ));
    // f = (3x − x³)/2 fixes ±1 with Df(±1) = 0
    assert!(matches!(
        IntervalMap::new(vec![0.0, 1.5, 0.0, -0.5], 0.5),
        Err(PolyMapError::CriticalPointOnBoundary(_))
    ));
}

#[test]
fn tangent_vector_examples() {
    let f = cheb2();
    assert!(make_tangent_vector(&f, vec![0.0, -1.0, 0.0, 1.0]).is_ok());
    assert!(matches!(
        make_tangent_vector(&f, vec![1.0]),
        Err(PolyMapError::ConstraintViolation(_))
    ));
    let quartic = IntervalMap::new(vec![-1.0, 0.0, 0.0, 0.0, 2.0], 0.5).unwrap();
    let err = make_tangent_vector(&quartic, vec![0.0, -1.0, 0.0, 1.0]).unwrap_err();
    match err {
        PolyMapError::ConstraintViolation(msg) => assert!(msg.contains("v^(1)")),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn chain_rule_matches_composed_polynomial() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let deg = rng.gen_range(2..=4);
        let mut c: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // fix f(1) = 1, f(−1) = −1
        let (ep, em) = (
            Poly::new(c.clone()).eval(1.0) - 1.0,
            Poly::new(c.clone()).eval(-1.0) + 1.0,
        );
        c[0] -= 0.5 * (ep + em);
        c[1] -= 0.5 * (ep - em);
        let Ok(f) = IntervalMap::new(c.clone(), 0.5) else {
            continue;
        };
        let p = Poly::new(c);
        for n in 1..=4 {
            let dn = p.iterate(n).derivative();
            let x = rng.gen_range(-1.0..1.0);
            let (_, d) = f.iterate_d(x, n);
            let want = dn.eval(x);
            assert!((d - want).abs() <= 1e-9 * want.abs().max(1.0), "n={n}: {d} vs {want}");
        }
    }
}

proptest! {
    #[test]
    fn critical_structure_is_idempotent(c in -0.9f64..0.9) {
        // quadratic family with critical point at 0 and f(±1) = 1
        let f = IntervalMap::new(vec![c, 0.0, 1.0 - c], 0.5).unwrap();
        let g = IntervalMap::new(f.coeffs().to_vec(), 0.5).unwrap();
        prop_assert_eq!(f, g);
    }

    #[test]
    fn conjugation_symmetry(re in -1.2f64..1.2, im in -0.5f64..0.5, t in 0.1f64..0.9) {
        let f = IntervalMap::new(vec![0.0, 1.0 - t, 0.0, t], 0.5).unwrap();
        let z = Complex64::new(re, im);
        let a = f.eval_c(z.conj());
        let b = f.eval_c(z).conj();
        prop_assert!((a - b).norm() <= 1e-15 * (1.0 + a.norm()));
    }
}
