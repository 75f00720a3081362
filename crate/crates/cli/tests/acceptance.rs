use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::PathBuf;

use num_complex::Complex64;
use prunedjulia::external::*;
use prunedjulia::invariants::*;
use prunedjulia::koenigs::KoenigsChart;
use prunedjulia::orbits::{
    classify_critical_orbits, classify_parabolic, find_periodic_orbits, CriticalClassification, ParabolicSubtype,
    DEFAULT_HORIZON,
};
use prunedjulia::prunedtree::*;
use prunedjulia::{IntervalMap, Poly, PolyVectorField};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn classify(f: &IntervalMap) -> CriticalClassification {
    let orbits = find_periodic_orbits(f, 4).unwrap();
    classify_critical_orbits(f, &orbits, DEFAULT_HORIZON).unwrap()
}

/// Distance from z to the nearest of the segments {r·e^{iπk/ℓ} : 0 ≤ r ≤ len}.
fn ray_distance(z: Complex64, ell: usize, len: f64) -> f64 {
    (0..2 * ell)
        .map(|k| {
            let u = Complex64::from_polar(1.0, PI * k as f64 / ell as f64);
            let t = (z * u.conj()).re.clamp(0.0, len);
            (z - u * t).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn power_map_tree() -> Outcome {
    let eps: f64 = 0.001;
    let f = IntervalMap::new(vec![0.0, 0.0, 0.0, 1.0], 0.5).map_err(|e| e.to_string())?;
    let data = build_pruning_data(&f, &[(-eps, eps)]).map_err(|e| e.to_string())?;
    let tree = grow_pruned_tree(&f, &data, 8).map_err(|e| e.to_string())?;
    let len = eps.powf(1.0 / 3.0);
    let mut dev = 0.0f64;
    let mut reach = 0.0f64;
    for arc in &tree.arcs {
        for &z in &arc.points {
            if z.im.abs() > 0.0 {
                dev = dev.max(ray_distance(z, 3, len));
                reach = reach.max(z.norm());
            }
        }
    }
    let counts: Vec<usize> = (1..=8).map(|n| tree.arc_count(n)).collect();
    let rays: Vec<i64> = {
        let mut a: Vec<i64> = data
            .arcs
            .iter()
            .map(|a| (a.end().arg() / (PI / 3.0)).round() as i64)
            .collect();
        a.sort();
        a
    };
    let ok = dev < 1e-6
        && (reach - len).abs() < 1e-6
        && counts.iter().all(|&c| c == 4)
        && rays == [-2, -1, 1, 2]
        && check_tree_invariants(&f, &tree).passed();
    ensure(
        ok,
        format!("4 rays {rays:?}·π/3, half-length {reach:.9}, max deviation {dev:.1e}, K_n arcs {counts:?}"),
    )
}

fn period_doubling() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            let (a, b) = (-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64);
            let m = Poly::new(vec![0.0, -1.0, a, b]);
            let composed = m.compose(&m).coeffs().get(3).copied().unwrap_or(0.0);
            let want = -2.0 * (b + a * a);
            let ParabolicSubtype::PeriodDoubling { cubic, .. } =
                classify_parabolic(-1.0, a, b).map_err(|e| e.to_string())?
            else {
                return Err(format!("(a, b) = ({a}, {b}) not period doubling"));
            };
            worst = worst.max((composed - want).abs()).max((cubic - want).abs());
        }
    }
    ensure(worst < 1e-10, format!("5×5 grid, max |c₃ + 2(b + a²)| = {worst:.1e}"))
}

fn transversality() -> Outcome {
    let cases: [(Vec<f64>, Vec<f64>); 11] = [
        (vec![-1.0, 0.0, 2.0], vec![0.0, 0.0, 1.0]),
        (vec![-1.0, 0.0, 2.0], vec![0.3, 1.0]),
        (vec![0.0, -3.0, 0.0, 4.0], vec![0.0, 1.0]),
        (vec![1.0, 0.0, -4.0, 0.0, 4.0], vec![0.5, 1.0]),
        (vec![0.0, -1.5, 0.0, 2.5], vec![0.1, 0.4, 1.0]),
        (vec![-0.2, 0.0, 1.2], vec![1.0]),
        (vec![-0.3, 0.0, 1.3], vec![0.2, 1.0]),
        (vec![-0.65, 0.0, 1.65], vec![-0.1, 0.5, 1.0]),
        (vec![0.0, -0.5, 0.0, 1.5], vec![0.3, 1.0]),
        (vec![0.0, -0.5, 0.0, 1.5], vec![0.0, 1.0]),
        (vec![0.35, 0.0, -0.6, 0.0, 1.25], vec![0.0, 0.2, 1.0]),
    ];
    let mut worst = 0.0f64;
    let mut kinds = [false; 4];
    for (c, q) in cases.iter() {
        let f = IntervalMap::new(c.clone(), 0.5).map_err(|e| e.to_string())?;
        let v = PolyVectorField::from_factor(&f, &Poly::new(q.clone())).map_err(|e| e.to_string())?;
        let cls = classify(&f);
        let a = dpsi_h_analytic(&f, &v, &cls).map_err(|e| e.to_string())?;
        let b = dpsi_finite_difference(&f, &v, &cls, 1e-5).map_err(|e| e.to_string())?;
        worst = worst.max(max_relative_error(&a, &b, 1e-3));
        for l in &a.labels {
            let k = match &l[..2] {
                "ec" => 0,
                "ep" => 1,
                "mu" => 2,
                _ => 3,
            };
            kinds[k] = true;
        }
    }
    ensure(
        worst < 1e-5 && kinds == [true; 4],
        format!(
            "{} pairs, components {kinds:?}, max relative error {worst:.1e}",
            cases.len()
        ),
    )
}

fn splitting() -> Outcome {
    let maps = [
        vec![0.0, -0.5, 0.0, 1.5],
        vec![0.0, 2.0, 0.0, -1.0],
        vec![0.1, 1.3, -0.1, -0.3],
    ];
    let mut worst = 0.0f64;
    for c in maps {
        let f = IntervalMap::new(c.clone(), 0.5).map_err(|e| e.to_string())?;
        let d = f.poly().derivative();
        let (dm, dp) = (d.eval(-1.0), d.eval(1.0));
        if f.eval(-1.0) != -1.0 || f.eval(1.0) != 1.0 || [dm, dp].iter().any(|&x| x == 0.0 || x == 1.0) {
            return Err(format!("{c:?} is not an admissible example"));
        }
        let rep = splitting_system(&f);
        // independent check of the rows: v(−1) = (b − a)(1 − Df(−1)), v(1) = (a + b)(1 − Df(1))
        let rows_ok = (rep.matrix[0][0] - (dm - 1.0)).abs() < 1e-14
            && (rep.matrix[0][1] - (1.0 - dm)).abs() < 1e-14
            && (rep.matrix[1][0] - (1.0 - dp)).abs() < 1e-14
            && (rep.matrix[1][1] - (1.0 - dp)).abs() < 1e-14;
        if !rep.unique || rep.solution != [0.0, 0.0] || !rows_ok {
            return Err(format!("{c:?}: {rep:?}"));
        }
        worst = worst.max(rep.residual);
    }
    ensure(
        worst < 1e-12,
        format!("3 maps, only a = b = 0, max residual {worst:.1e}"),
    )
}

/// Affine conjugate A⁻¹∘T_d∘A of a Chebyshev polynomial, sampled on the pullback of a large
/// ellipse; also returns K_F = A⁻¹[−1, 1].
fn conjugated_chebyshev(rng: &mut StdRng, n: usize) -> (Poly, Vec<Complex64>, (f64, f64)) {
    let d: usize = rng.gen_range(2..=3);
    let t = if d == 2 {
        Poly::new(vec![-1.0, 0.0, 2.0])
    } else {
        Poly::new(vec![0.0, -3.0, 0.0, 4.0])
    };
    let (s, shift) = (rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
    let a = Poly::new(vec![shift, s]);
    let mut c = t.compose(&a).coeffs().to_vec();
    c[0] -= shift;
    let f = Poly::new(c.iter().map(|x| x / s).collect());
    let rho = 4f64.powf((d as f64).powi(-(n as i32)));
    let phase = rng.gen_range(0.0..TAU);
    let sample = (0..20)
        .map(|k| {
            let zeta = Complex64::from_polar(rho, phase + TAU * k as f64 / 20.0);
            ((zeta + 1.0 / zeta) * 0.5 - shift) / s
        })
        .collect();
    (f, sample, ((-1.0 - shift) / s, (1.0 - shift) / s))
}

fn telescoping() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    // identity: random polynomial F and α, random sample points
    for n in [1, 3, 5] {
        for _ in 0..4 {
            let f = Poly::new((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let alpha = Poly::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let sample: Vec<Complex64> = (0..20)
                .map(|_| Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                .collect();
            let rep = vertical_telescoping_check(&f, &alpha, n, &sample).map_err(|e| e.to_string())?;
            worst = worst.max(rep.residual);
            pairs += 1;
        }
    }
    // bound: α holomorphic off K_F and vanishing at ∞, sample on F^{−N}(∂E_R)
    let mut margin = f64::INFINITY;
    for n in [1, 3, 5] {
        for _ in 0..4 {
            let (f, sample, (lo, hi)) = conjugated_chebyshev(&mut rng, n);
            let alpha = PoleSum {
                terms: (1..=2)
                    .map(|m| (rng.gen_range(lo..hi), rng.gen_range(-1.0..1.0), m))
                    .collect(),
            };
            let rep = vertical_telescoping_check(&f, &alpha, n, &sample).map_err(|e| e.to_string())?;
            let bound = rep
                .bound
                .ok_or_else(|| format!("N = {n}: no expansion on the sample ({rep:?})"))?;
            if rep.ratio > bound {
                return Err(format!("N = {n}: ‖α‖/‖v‖ = {} exceeds λA/(λ−1) = {bound}", rep.ratio));
            }
            worst = worst.max(rep.residual);
            margin = margin.min(bound / rep.ratio);
            pairs += 1;
        }
    }
    ensure(
        worst < 1e-9,
        format!("{pairs} random pairs, N ∈ {{1,3,5}}, max residual {worst:.1e}, min bound/ratio {margin:.2}"),
    )
}

fn semiconjugacy_sine() -> Outcome {
    let a = 0.1;
    // period-2 orbit {x, 1 − x} solves 3x + a·sin(2πx) = 1
    let (mut lo, mut hi) = (0.2f64, 0.45f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 3.0 * mid + a * (TAU * mid).sin() < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let g = CircleMapE::new(2, 1, vec![(a, 1)], Vec::new(), vec![x, 1.0 - x]).map_err(|e| e.to_string())?;
    let ext = continuous_extension(&g, 0.01).map_err(|e| e.to_string())?;
    let h = semiconjugacy(&ext, 1).map_err(|e| e.to_string())?;
    // h(g(x)) − 2h(x) mod 1 on the grid, with the plain lift
    let m = h.grid.len();
    let lift = |t: f64| 2.0 * t + a * (TAU * t).sin();
    let residual = (0..m)
        .map(|i| {
            let t = i as f64 / m as f64;
            let r = h.eval(lift(t)) - 2.0 * h.eval(t);
            (r - r.round()).abs()
        })
        .fold(0.0, f64::max);
    let q = pruning_set(&g, &h).map_err(|e| e.to_string())?;
    let values: Vec<f64> = q.iter().map(|a| a.value).collect();
    let q_ok = values.len() == 2 && (values[0] - 1.0 / 3.0).abs() < 1e-7 && (values[1] - 2.0 / 3.0).abs() < 1e-7;
    ensure(
        m == 1 << 14 && residual < 1e-6 && h.is_monotone() && q_ok,
        format!(
            "{m} grid points, residual {residual:.1e}, monotone {}, Q = {values:?}",
            h.is_monotone()
        ),
    )
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Every target the doubling image of [lo, hi] lies in, by dense sampling.
fn image_targets(lo: f64, hi: f64, targets: &[(f64, f64)]) -> Vec<usize> {
    (0..targets.len())
        .filter(|&k| {
            let t = targets[k];
            (0..=2000).all(|i| {
                let y = frac(2.0 * (lo + (hi - lo) * i as f64 / 2000.0));
                [0.0, 1.0].iter().any(|s| y + s >= t.0 - 1e-12 && y + s <= t.1 + 1e-12)
            })
        })
        .collect()
}

fn markov_doubling() -> Outcome {
    let g = CircleMapE::linear(2, 1);
    let m = markov_structure(&g, &ArcSet::new([(0.4, 0.6)]), &ArcSet::empty(), 1).map_err(|e| e.to_string())?;
    let oracle: Vec<Vec<usize>> = m
        .intervals
        .iter()
        .map(|&(lo, hi)| image_targets(lo, hi, &m.targets))
        .collect();
    let matches = oracle.iter().zip(&m.transitions).all(|(o, &j)| o == &vec![j]);
    let boundary: Vec<f64> = m
        .intervals
        .iter()
        .chain(&m.targets)
        .flat_map(|&(a, b)| [frac(a), frac(b)])
        .collect();
    let certified = boundary.iter().all(|&x| {
        m.certificates
            .iter()
            .any(|c| (frac(c.angle) - x).abs() < 1e-12 || (frac(c.angle) - x).abs() > 1.0 - 1e-12)
    });
    let ok = matches && certified && m.expansion.0 == 1 && (m.expansion.1 - 2.0).abs() < 1e-12;
    ensure(
        ok,
        format!(
            "transitions {:?} (oracle agrees: {matches}), expansion {:?}, {} certificates",
            m.transitions,
            m.expansion,
            m.certificates.len()
        ),
    )
}

fn koenigs_quadratic() -> Outcome {
    let f = IntervalMap::new(vec![-0.2, 0.0, 1.2], 0.5).map_err(|e| e.to_string())?;
    let orbits = find_periodic_orbits(&f, 1).map_err(|e| e.to_string())?;
    let orbit = orbits
        .iter()
        .find(|o| (o.points[0] + 1.0 / 6.0).abs() < 1e-12)
        .ok_or("no fixed point at −1/6")?;
    let chart = KoenigsChart::normalized(&f, orbit, 0, 0.0).map_err(|e| e.to_string())?;
    let p = chart.p;
    let mut worst = 0.0f64;
    for i in 0..=8 {
        for k in 0..16 {
            let z = p + Complex64::from_polar(0.05 * i as f64 / 8.0, TAU * k as f64 / 16.0);
            let lhs = chart.eval(f.eval_c(z)).map_err(|e| e.to_string())?;
            let rhs = chart.eval(z).map_err(|e| e.to_string())? * -0.4;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    let at0 = chart.eval_real(0.0).map_err(|e| e.to_string())?;
    ensure(
        worst < 1e-8 && at0 == -1.0 && (chart.lambda + 0.4).abs() < 1e-12,
        format!("λ = {}, φ(0) = {at0}, max |φ∘f − λφ| = {worst:.1e}", chart.lambda),
    )
}

fn douady_earle() -> Outcome {
    let id = |t: f64| t;
    let mut worst = 0.0f64;
    for i in -9..=9 {
        for j in -9..=9 {
            let z = Complex64::new(i as f64 / 10.0, j as f64 / 10.0);
            if z.norm() > 0.9 {
                continue;
            }
            let w = barycentric_extension(&id, DEFAULT_SAMPLES, z).map_err(|e| e.to_string())?;
            worst = worst.max((w - z).norm());
        }
    }
    let alpha = 0.7;
    let wobble = |t: f64| t + 0.05 * (TAU * t).sin();
    let rotated = move |t: f64| wobble(t) + alpha / TAU;
    let mut equi = 0.0f64;
    for m in [512, 1024, 2048] {
        for z in [
            Complex64::new(0.2, -0.4),
            Complex64::new(-0.5, 0.3),
            Complex64::new(0.0, 0.8),
        ] {
            let a = barycentric_extension(&wobble, m, z).map_err(|e| e.to_string())?;
            let b = barycentric_extension(&rotated, m, z).map_err(|e| e.to_string())?;
            equi = equi.max((b - a * Complex64::from_polar(1.0, alpha)).norm());
        }
    }
    ensure(
        worst < 1e-9 && equi < 1e-7,
        format!("identity max |w − z| = {worst:.1e}, rotation equivariance {equi:.1e} at M = 512/1024/2048"),
    )
}

fn quadratic_trees() -> Outcome {
    let f = IntervalMap::new(vec![-0.2, 0.0, 1.2], 0.5).map_err(|e| e.to_string())?;
    let mut heights = Vec::new();
    let mut report = Vec::new();
    for j in [(-0.3, -0.1), (-0.21, -0.19)] {
        let data = build_pruning_data(&f, &[j]).map_err(|e| e.to_string())?;
        let tree = grow_pruned_tree(&f, &data, 8).map_err(|e| e.to_string())?;
        let rep = check_tree_invariants(&f, &tree);
        let counts: Vec<usize> = (0..=8).map(|n| tree.arc_count(n)).collect();
        let svg = render_tree(&tree, &RenderStyle::default());
        if !rep.passed() || !counts.windows(2).all(|w| w[0] < w[1]) || !svg.contains("<path") {
            return Err(format!("J = {j:?}: counts {counts:?}, failures {:?}", rep.failures));
        }
        heights.push(
            tree.arcs
                .iter()
                .flat_map(|a| &a.points)
                .map(|z| z.im.abs())
                .fold(0.0, f64::max),
        );
        report.push(format!("J = {j:?} arcs {counts:?}"));
    }
    ensure(
        heights[1] < heights[0],
        format!(
            "{}; height {:.3} → {:.3} as J shrinks",
            report.join(", "),
            heights[0],
            heights[1]
        ),
    )
}

fn shipped_maps_pass_check() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../maps");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut failed = Vec::new();
    for path in &files {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = prunedjulia_cli::run(
            ["prunedjulia", "check", "--map", path.to_str().unwrap()],
            &mut out,
            &mut err,
        );
        let lines = String::from_utf8_lossy(&err);
        if code != 0 || lines.lines().any(|l| l.starts_with("FAIL")) {
            failed.push(format!("{}: exit {code}\n{lines}", path.display()));
        }
    }
    if files.is_empty() {
        return Err("no maps shipped".into());
    }
    ensure(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} maps pass", files.len())
        } else {
            failed.join("\n")
        },
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("power-map pruned Julia set", power_map_tree),
        ("period-doubling normal form", period_doubling),
        ("transversality formulas", transversality),
        ("splitting uniqueness", splitting),
        ("vertical telescoping", telescoping),
        ("semi-conjugacy of the sine map", semiconjugacy_sine),
        ("Markov structure of doubling", markov_doubling),
        ("Koenigs chart", koenigs_quadratic),
        ("Douady–Earle extension", douady_earle),
        ("quadratic pruned trees", quadratic_trees),
        ("check on shipped maps", shipped_maps_pass_check),
    ];
    // straight to the stdout handle, so the summary shows even when the harness captures output
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(detail) => ("PASS", detail),
            Err(detail) => {
                failures += 1;
                ("FAIL", detail)
            }
        };
        writeln!(out, "{tag} #{} {name}: {detail}", i + 1).unwrap();
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
