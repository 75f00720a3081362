use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use prunedjulia::external::*;

fn doubling() -> CircleMapE {
    CircleMapE::linear(2, 1)
}

fn sine_map(a: f64, marked: Vec<f64>) -> CircleMapE {
    CircleMapE::new(2, 1, vec![(a, 1)], Vec::new(), marked).unwrap()
}

/// Two jumps of lift size 0.3 at 1/4 and 3/4 on top of doubling.
fn jump_map() -> CircleMapE {
    let jumps = vec![Jump { at: 0.25, size: 0.3 }, Jump { at: 0.75, size: 0.3 }];
    CircleMapE::new(2, 1, Vec::new(), jumps, vec![0.0]).unwrap()
}

fn jump_lift(x: f64) -> f64 {
    let saw = |y: f64| y.floor() - y + 0.5;
    2.0 * x + 0.3 * saw(x - 0.25) + 0.3 * saw(x - 0.75)
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

fn dist(a: f64, b: f64) -> f64 {
    let t = frac(a - b);
    t.min(1.0 - t)
}

/// The period-2 orbit {x, 1 − x} of 2x + a·sin(2πx) solves 3x + a·sin(2πx) = 1.
fn period_two(a: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 0.45);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 3.0 * mid + a * (TAU * mid).sin() < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn pure_doubling_is_valid() {
    let g = CircleMapE::new(2, 1, Vec::new(), Vec::new(), vec![0.0]).unwrap();
    assert!(g.is_linear());
    assert_eq!(g.lift(0.3), 0.6);
}

#[test]
fn sine_map_slope_bound() {
    let g = sine_map(0.1, Vec::new());
    let min = (0..10_000)
        .map(|i| g.slope(i as f64 / 10_000.0))
        .fold(f64::INFINITY, f64::min);
    assert!((min - (2.0 - 0.2 * PI)).abs() < 1e-9);
    assert!(min > 1.0);
}

#[test]
fn spec_parsing_and_rejections() {
    let spec: CircleMapSpec = serde_json::from_str(r#"{"d":2,"eps":1,"s":"0.1*sin(1)","jumps":[],"Q":[0.0]}"#).unwrap();
    let g = CircleMapE::from_spec(&spec).unwrap();
    assert_eq!(g.sines, vec![(0.1, 1)]);

    let big = vec![Jump { at: 0.25, size: 1.2 }, Jump { at: 0.75, size: 1.2 }];
    assert!(matches!(
        CircleMapE::new(2, 1, Vec::new(), big, Vec::new()),
        Err(ExternalError::JumpTooLarge { .. })
    ));
    let lonely = vec![Jump { at: 0.25, size: 0.3 }];
    assert!(matches!(
        CircleMapE::new(2, 1, Vec::new(), lonely, Vec::new()),
        Err(ExternalError::SymmetryViolation(_))
    ));
    assert!(matches!(
        parse_sines("0.1*cos(1)"),
        Err(ExternalError::SymmetryViolation(_))
    ));
    assert!(matches!(
        CircleMapE::new(2, 1, vec![(0.4, 1)], Vec::new(), Vec::new()),
        Err(ExternalError::NotMonotone { .. })
    ));
    assert!(matches!(
        CircleMapE::new(2, 1, Vec::new(), Vec::new(), vec![0.3]),
        Err(ExternalError::QNotInvariant(_))
    ));
    let jumps = vec![Jump { at: 0.25, size: 0.3 }, Jump { at: 0.75, size: 0.3 }];
    assert!(matches!(
        CircleMapE::new(2, 1, Vec::new(), jumps, vec![0.25]),
        Err(ExternalError::QMeetsJumps(_))
    ));
}

#[test]
fn jump_map_lift_matches_formula() {
    let g = jump_map();
    for i in 0..1000 {
        let x = -1.0 + 3.0 * i as f64 / 1000.0 + 1e-4;
        assert!((g.lift(x) - jump_lift(x)).abs() < 1e-12);
    }
}

#[test]
fn continuous_extension_fills_windows() {
    let g = doubling();
    let ext = continuous_extension(&g, 0.01).unwrap();
    assert_eq!(ext.eval(0.37), g.lift(0.37));

    let g = jump_map();
    let ext = continuous_extension(&g, 0.01).unwrap();
    // window image: 2·2r from the linear part, +0.3 at the jump, −0.3·2r from each sawtooth slope
    let want = 2.0 * 0.02 + 0.3 - 2.0 * 0.3 * 0.02;
    for len in ext.window_images() {
        assert!((len - want).abs() < 1e-12);
        assert!(len < 1.0);
    }
    // continuous and increasing across the windows, equal to g outside
    let mut prev = ext.eval(0.0);
    for i in 1..=4000 {
        let x = i as f64 / 4000.0;
        let y = ext.eval(x);
        assert!(y > prev && y - prev < 0.01);
        prev = y;
        if (x - 0.25).abs() > 0.011 && (x - 0.75).abs() > 0.011 {
            assert!((y - jump_lift(x)).abs() < 1e-12);
        }
    }
    assert!(matches!(
        continuous_extension(&g, 0.25),
        Err(ExternalError::NeighborhoodMeetsQ(_))
    ));
}

#[test]
fn semiconjugacy_of_linear_models_is_identity() {
    for eps in [1, -1] {
        let g = CircleMapE::linear(2, eps);
        let ext = continuous_extension(&g, 0.01).unwrap();
        let h = semiconjugacy(&ext, eps).unwrap();
        for (i, &v) in h.grid.iter().enumerate().step_by(97) {
            assert!((v - i as f64 / h.grid.len() as f64).abs() < 1e-12);
        }
        assert!(h.residual(&ext) < 1e-12);
    }
}

#[test]
fn semiconjugacy_of_sine_map() {
    let g = sine_map(0.1, Vec::new());
    let ext = continuous_extension(&g, 0.01).unwrap();
    let h = semiconjugacy(&ext, 1).unwrap();
    assert_eq!(h.grid.len(), 1 << 14);
    assert!(h.is_monotone());
    assert_eq!(h.grid[0], 0.0);
    assert!(h.residual(&ext) < 1e-6);
    // brute force: 2^{−40}·G^{40}(x) with the plain lift
    let lift = |x: f64| 2.0 * x + 0.1 * (TAU * x).sin();
    for i in 0..50 {
        let x = i as f64 / 50.0 + 0.0037;
        let mut y = x;
        for _ in 0..40 {
            y = lift(y);
        }
        let oracle = y / 2f64.powi(40);
        assert!((h.eval(x) - oracle).abs() < 1e-9, "x={x}: {} vs {oracle}", h.eval(x));
    }
    // real symmetry: h(−x) = −h(x)
    let m = h.grid.len();
    for i in (1..m).step_by(101) {
        assert!((h.grid[i] + h.grid[m - i] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn deeper_iteration_changes_h_little() {
    let g = sine_map(0.1, Vec::new());
    let ext = continuous_extension(&g, 0.01).unwrap();
    let h = semiconjugacy(&ext, 1).unwrap();
    let deep = semiconjugacy_with(&ext, 1, SEMICONJ_GRID, 1e-14).unwrap();
    assert!(deep.iterations > h.iterations);
    let diff = h
        .grid
        .iter()
        .zip(&deep.grid)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-9);
}

#[test]
fn period_two_orbit_prunes_to_thirds() {
    let x = period_two(0.1);
    let g = sine_map(0.1, vec![x, 1.0 - x]);
    let ext = continuous_extension(&g, 0.01).unwrap();
    let h = semiconjugacy(&ext, 1).unwrap();
    let q = pruning_set(&g, &h).unwrap();
    let exact: Vec<_> = q.iter().map(|a| a.exact.unwrap()).collect();
    assert_eq!(exact, vec![(1, 3), (2, 3)]);
    for a in &q {
        assert!(a.value == 1.0 / 3.0 || a.value == 2.0 / 3.0);
    }

    let y = period_two(-0.05);
    let g2 = sine_map(-0.05, vec![y, 1.0 - y]);
    let h2 = semiconjugacy(&continuous_extension(&g2, 0.01).unwrap(), 1).unwrap();
    let q2 = pruning_set(&g2, &h2).unwrap();
    assert!(pruning_equivalent(&q, 2, 1, &q2, 2, 1));
    assert!(!pruning_equivalent(&q, 2, 1, &q2, 2, -1));

    let d = CircleMapE::new(2, 1, Vec::new(), Vec::new(), vec![0.0]).unwrap();
    let hd = semiconjugacy(&continuous_extension(&d, 0.01).unwrap(), 1).unwrap();
    let q0 = pruning_set(&d, &hd).unwrap();
    assert_eq!(q0[0].exact, Some((0, 1)));
    assert!(!pruning_equivalent(&q, 2, 1, &q0, 2, 1));
}

#[test]
fn snapping() {
    assert_eq!(
        snap_angle(0.4, 1 << 16, 1e-12).map(|r| (*r.numer(), *r.denom())),
        Some((2, 5))
    );
    assert_eq!(
        snap_angle(0.999_999_999_999_9, 1 << 16, 1e-12).map(|r| *r.numer()),
        Some(0)
    );
    assert!(snap_angle(2f64.sqrt() - 1.0, 1 << 16, 1e-12).is_none());
}

#[test]
fn empty_yhat_leaves_full_circle() {
    let s = lambda_sets(&doubling(), &ArcSet::empty(), &ArcSet::empty(), 4).unwrap();
    assert_eq!(s.lambda, vec![(0.0, 1.0)]);
    assert!(s.in_lambda(0.123));
}

#[test]
fn doubling_lambda_one() {
    let s = lambda_sets(&doubling(), &ArcSet::new([(0.4, 0.6)]), &ArcSet::empty(), 1).unwrap();
    let removed = s.removed.arcs();
    let want = [(0.2, 0.3), (0.4, 0.6), (0.7, 0.8)];
    assert_eq!(removed.len(), 3);
    for (got, want) in removed.iter().zip(want) {
        assert!((got.0 - want.0).abs() < 1e-10 && (got.1 - want.1).abs() < 1e-10);
    }
    let want = [(0.3, 0.4), (0.6, 0.7), (0.8, 1.2)];
    assert_eq!(s.lambda.len(), 3);
    for (got, want) in s.lambda.iter().zip(want) {
        assert!((got.0 - want.0).abs() < 1e-10 && (got.1 - want.1).abs() < 1e-10);
    }
}

#[test]
fn wraparound_arcs_merge() {
    let s = ArcSet::new([(0.9, 1.05), (0.02, 0.1), (0.5, 0.6)]);
    assert_eq!(s.arcs().len(), 2);
    assert!(s.contains(0.0) && s.contains(0.95) && s.contains(0.07));
    assert!((s.measure() - 0.3).abs() < 1e-12);
    assert!(ArcSet::new([(0.1, 0.7), (0.6, 1.2)]).is_full());
}

/// x ∈ Λ_N iff none of x, g(x), …, g^N(x) lies in Ŷ.
fn brute_member(lift: &dyn Fn(f64) -> f64, yhat: &[(f64, f64)], n: usize, x: f64) -> bool {
    let mut y = x;
    for k in 0..=n {
        if k > 0 {
            y = frac(lift(y));
        }
        if yhat
            .iter()
            .any(|&(lo, hi)| (y > lo && y < hi) || (y + 1.0 > lo && y + 1.0 < hi))
        {
            return false;
        }
    }
    true
}

#[test]
fn lambda_sets_match_dense_grid() {
    let g = jump_map();
    let y = [(0.2, 0.3), (0.7, 0.8)];
    let yhat = ArcSet::new(y);
    let mut prev: Option<Vec<(f64, f64)>> = None;
    for n in 0..4 {
        let s = lambda_sets(&g, &yhat, &ArcSet::empty(), n).unwrap();
        let ends: Vec<f64> = s.lambda.iter().flat_map(|&(a, b)| [a, frac(b)]).collect();
        let m = 1_000_000;
        let mut mismatches = 0;
        for i in 0..m {
            let x = (i as f64 + 0.5) / m as f64;
            if ends.iter().any(|&e| dist(e, x) < 1e-6) {
                continue;
            }
            if s.in_lambda(x) != brute_member(&jump_lift, &y, n, x) {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0, "N={n}");
        if let Some(p) = prev {
            assert!(arcs_nested(&s.lambda, &p, 1e-10));
        }
        prev = Some(s.lambda.clone());
    }
}

#[test]
fn lambda_set_errors() {
    let g = jump_map();
    assert!(matches!(
        lambda_sets(&g, &ArcSet::new([(0.25, 0.3), (0.7, 0.8)]), &ArcSet::empty(), 1),
        Err(ExternalError::EndpointOnJump(_))
    ));
    assert!(matches!(
        lambda_sets(&g, &ArcSet::new([(0.2, 0.3)]), &ArcSet::empty(), 1),
        Err(ExternalError::JumpUncovered(_))
    ));
}

/// Image arc of [lo, hi] under the doubling map, sampled.
fn doubling_image_inside(lo: f64, hi: f64, target: (f64, f64)) -> bool {
    (0..=1000).all(|k| {
        let x = lo + (hi - lo) * k as f64 / 1000.0;
        let y = frac(2.0 * x);
        [0.0, 1.0]
            .iter()
            .any(|s| y + s >= target.0 - 1e-12 && y + s <= target.1 + 1e-12)
    })
}

#[test]
fn doubling_markov_structure() {
    let g = doubling();
    let m = markov_structure(&g, &ArcSet::new([(0.4, 0.6)]), &ArcSet::empty(), 1).unwrap();
    let close = |a: &[(f64, f64)], b: &[(f64, f64)]| {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| (x.0 - y.0).abs() < 1e-10 && (x.1 - y.1).abs() < 1e-10)
    };
    assert!(close(&m.targets, &[(0.3, 0.4), (0.6, 0.7), (0.8, 1.2)]));
    assert!(close(
        &m.intervals,
        &[(0.15, 0.2), (0.3, 0.35), (0.65, 0.7), (0.8, 0.85), (0.9, 1.1)]
    ));
    assert_eq!(m.transitions, vec![0, 1, 0, 1, 2]);
    // brute force: each I_i maps inside I'_{j(i)} and its ends onto the ends
    for (&(lo, hi), &j) in m.intervals.iter().zip(&m.transitions) {
        let t = m.targets[j];
        assert!(doubling_image_inside(lo, hi, t));
        assert!(dist(2.0 * lo, t.0) < 1e-8 && dist(2.0 * hi, t.1) < 1e-8);
        let others = (0..m.targets.len()).filter(|&k| k != j);
        for k in others {
            assert!(!doubling_image_inside(lo, hi, m.targets[k]));
        }
    }
    assert_eq!(m.expansion.0, 1);
    assert!((m.expansion.1 - 2.0).abs() < 1e-12);
    assert!(!m.certificates.is_empty());
    let two_fifths = m.certificates.iter().find(|c| c.exact == Some((2, 5))).unwrap();
    assert_eq!((two_fifths.preperiod, two_fifths.period), (0, 4));
    let c = m.certificates.iter().find(|c| c.exact == Some((3, 20))).unwrap();
    assert_eq!((c.preperiod, c.period), (2, 4));
}

#[test]
fn irrational_boundary_is_rejected() {
    let g = doubling();
    let r = markov_structure(&g, &ArcSet::new([(2f64.sqrt() - 1.0, 0.5)]), &ArcSet::empty(), 1);
    assert!(matches!(r, Err(ExternalError::BoundaryNotEventuallyPeriodic(_))));
}

#[test]
fn markov_avoids_attracting_basin() {
    // 2x − 0.2 sin(2πx) has an attracting fixed point at 0 and repelling fixed points ±x*
    let a = -0.2;
    let g = sine_map(a, Vec::new());
    assert!(g.slope(0.0) < 1.0);
    let (mut lo, mut hi) = (0.05, 0.45);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + a * (TAU * mid).sin() < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let xs = 0.5 * (lo + hi);
    let b0 = ArcSet::new([(-xs, xs)]);
    assert!(matches!(
        markov_structure(&g, &ArcSet::empty(), &ArcSet::new([(-0.01, 0.01)]), 1),
        Err(ExternalError::BoundaryNotEventuallyPeriodic(_)) | Err(ExternalError::NoExpansionFound)
    ));
    let m = markov_structure(&g, &ArcSet::empty(), &b0, 1).unwrap();
    for &(l, h) in &m.intervals {
        for k in 0..=100 {
            let x = l + (h - l) * k as f64 / 100.0;
            assert!(dist(x, 0.0) >= xs - 1e-9);
        }
    }
    assert!(m.expansion.1 > 1.05);
    assert!(m.certificates.iter().all(|c| c.period == 1));
}

fn rotation(alpha: f64) -> impl Fn(f64) -> f64 {
    move |t| t + alpha / TAU
}

fn wobble(t: f64) -> f64 {
    t + 0.05 * (TAU * t).sin()
}

#[test]
fn barycentric_identity() {
    let id = |t: f64| t;
    assert!(
        barycentric_extension(&id, 512, Complex64::new(0.0, 0.0))
            .unwrap()
            .norm()
            < 1e-12
    );
    for i in -9..=9 {
        for j in -9..=9 {
            let z = Complex64::new(i as f64 / 10.0, j as f64 / 10.0);
            if z.norm() > 0.9 {
                continue;
            }
            let w = barycentric_extension(&id, DEFAULT_SAMPLES, z).unwrap();
            assert!((w - z).norm() < 1e-9, "z={z}: {w}");
        }
    }
}

#[test]
fn barycentric_rotation_equivariance() {
    let alpha = 0.7;
    let rot = rotation(alpha);
    let w0 = barycentric_extension(&rot, 512, Complex64::new(0.0, 0.0)).unwrap();
    assert!(w0.norm() < 1e-12);
    let w = barycentric_extension(&rot, 512, Complex64::new(0.3, 0.0)).unwrap();
    assert!((w - Complex64::from_polar(0.3, alpha)).norm() < 1e-9);
    // post-composing a nontrivial h with a rotation rotates w, at both resolutions
    let z = Complex64::new(0.2, -0.4);
    let rotated = |t: f64| wobble(t) + alpha / TAU;
    for m in [512, 1024] {
        let a = barycentric_extension(&wobble, m, z).unwrap();
        let b = barycentric_extension(&rotated, m, z).unwrap();
        assert!((b - a * Complex64::from_polar(1.0, alpha)).norm() < 1e-7);
    }
}

#[test]
fn barycentric_wobble() {
    let z = Complex64::new(0.5, 0.0);
    let w = barycentric_extension(&wobble, 512, z).unwrap();
    assert!(barycentric_residual(&wobble, 512, z, w).unwrap() < 1e-10);
    let fine = barycentric_extension(&wobble, 1024, z).unwrap();
    assert!((fine - w).norm() < 1e-7);
    assert!(w.im.abs() < 1e-10);
}

#[test]
fn barycentric_input_checks() {
    let id = |t: f64| t;
    assert!(matches!(
        barycentric_extension(&id, 128, Complex64::new(0.0, 0.0)),
        Err(ExternalError::InvalidInput(_))
    ));
    assert!(matches!(
        barycentric_extension(&id, 512, Complex64::new(0.995, 0.0)),
        Err(ExternalError::InvalidInput(_))
    ));
    let fold = |t: f64| 2.0 * t;
    assert!(matches!(
        barycentric_extension(&fold, 512, Complex64::new(0.0, 0.0)),
        Err(ExternalError::InvalidInput(_))
    ));
    let sharp = |t: f64| t + 0.15 * (TAU * 3.0 * t).sin() / 3.0;
    assert!(matches!(
        barycentric_extension(&sharp, 256, Complex64::new(0.0, 0.95)),
        Err(ExternalError::QuadratureUnderresolved(_))
    ));
    assert!(barycentric_extension(&sharp, 512, Complex64::new(0.0, 0.95)).is_ok());
}

#[test]
fn lift_renders() {
    let svg = jump_map().render_lift(64);
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<path").count(), 3);
}

proptest! {
    #[test]
    fn lift_is_degree_d(a in -0.15f64..0.15, x in -3.0f64..3.0) {
        let g = sine_map(a, Vec::new());
        prop_assert!((g.lift(x + 1.0) - g.lift(x) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_nesting_on_doubling(c in 0.05f64..0.95, w in 0.01f64..0.1) {
        let yhat = ArcSet::new([(c - w, c + w)]);
        let mut prev = lambda_sets(&doubling(), &yhat, &ArcSet::empty(), 0).unwrap().lambda;
        for n in 1..5 {
            let s = lambda_sets(&doubling(), &yhat, &ArcSet::empty(), n).unwrap();
            prop_assert!(arcs_nested(&s.lambda, &prev, 1e-10));
            prev = s.lambda;
        }
    }

    #[test]
    fn real_symmetric_h_gives_real_w(x in -0.9f64..0.9, a in -0.1f64..0.1) {
        let h = move |t: f64| t + a * (TAU * t).sin();
        let w = barycentric_extension(&h, 512, Complex64::new(x, 0.0)).unwrap();
        prop_assert!(w.im.abs() < 1e-10);
    }
}
