use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use prunedjulia::external::{arcs_nested, lambda_sets, pruning_set, ArcSet, CircleMapE};
use prunedjulia::invariants::{psi_h, psi_t};
use prunedjulia::orbits::count_codimensions;
use prunedjulia::prunedtree::check_tree_invariants;
use prunedjulia::IntervalMap;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{self, analyse, circle_summary, map_summary};
use crate::input::{self, CircleExtras, MapFile};
use crate::{CliError, CliTolerances};

const RANDOM_SAMPLES: usize = 256;
/// Depths checked for Λ-nesting when the map file gives none.
const DEFAULT_LAMBDA_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        };
        if self.detail.is_empty() {
            write!(f, "{tag} {}", self.name)
        } else {
            write!(f, "{tag} {}: {}", self.name, self.detail)
        }
    }
}

#[derive(Default)]
struct Suite {
    lines: Vec<CheckLine>,
}

impl Suite {
    fn push(&mut self, name: &str, outcome: Outcome, detail: impl Into<String>) {
        self.lines.push(CheckLine {
            name: name.to_string(),
            outcome,
            detail: detail.into(),
        });
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.push(name, if ok { Outcome::Pass } else { Outcome::Fail }, detail);
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.push(name, Outcome::Skip, why);
    }
}

pub fn run(
    map: Option<&Path>,
    j: Option<&str>,
    depth: Option<usize>,
    horizon: usize,
    max_period: usize,
    tol: &CliTolerances,
) -> Result<(Value, Vec<CheckLine>), CliError> {
    let path = map.ok_or_else(|| CliError::Validation("--map is required".into()))?;
    let mut rng = StdRng::seed_from_u64(crate::seed()?);
    let mut suite = Suite::default();
    let (kind, summary) = match input::load(path)? {
        MapFile::Interval(_) => {
            let an = analyse(map, horizon, max_period, tol)?;
            interval_checks(&mut suite, &an, &mut rng);
            let has_j = j.is_some() || !an.file.j.is_empty();
            tree_checks(&mut suite, map, j, depth, has_j, tol);
            ("interval", map_summary(&an.map))
        }
        MapFile::Circle(spec, extras) => {
            let g = CircleMapE::from_spec(&spec)?;
            circle_checks(&mut suite, &g, &extras, tol, &mut rng);
            ("circle", circle_summary(&g))
        }
    };
    let passed = suite.lines.iter().all(|l| l.outcome != Outcome::Fail);
    let body = json!({
        "kind": kind,
        "map": summary,
        "results": serde_json::to_value(&suite.lines).expect("check lines serialize"),
        "passed": passed,
    });
    Ok((body, suite.lines))
}

fn random_points(rng: &mut StdRng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn interval_checks(suite: &mut Suite, an: &commands::Analysis, rng: &mut StdRng) {
    let f: &IntervalMap = &an.map;
    let p = f.poly();
    let (lo, hi) = (f.eval(-1.0), f.eval(1.0));
    let on_boundary = |y: f64| y == 1.0 || y == -1.0;
    suite.check(
        "boundary",
        on_boundary(lo) && on_boundary(hi) && hi == f.sign() as f64,
        format!("f(-1) = {lo}, f(1) = {hi}, sign {}", f.sign()),
    );

    let sym = random_points(rng, RANDOM_SAMPLES)
        .into_iter()
        .map(|z| (f.eval_c(z.conj()) - f.eval_c(z).conj()).norm() / (1.0 + f.eval_c(z).norm()))
        .fold(0.0, f64::max);
    suite.check("symmetry", sym < 1e-12, format!("max |f(z̄) − conj f(z)| = {sym:.2e}"));

    let deg = p.degree();
    let ell_sum: usize = f.critical_points().iter().map(|c| c.ell).sum();
    let mult: usize = f.critical_points().iter().map(|c| c.ell - 1).sum();
    suite.check(
        "degree",
        f.external_degree() == ell_sum && ell_sum >= 2 && mult < deg,
        format!("d = Σℓ = {ell_sum}, Σ(ℓ−1) = {mult}, polynomial degree {deg}"),
    );

    let mut worst = 0.0f64;
    let mut leading_ok = true;
    for c in f.critical_points() {
        for k in 1..c.ell {
            let s = 1.0 + p.nth_derivative(k).coeffs().iter().map(|a| a.abs()).fold(0.0, f64::max);
            worst = worst.max(p.nth_derivative(k).eval(c.c).abs() / s);
        }
        leading_ok &= p.nth_derivative(c.ell).eval(c.c).abs() > 1e-8;
    }
    suite.check(
        "critical_points",
        worst < 1e-8 && leading_ok,
        format!("{} critical point(s), max scaled D^k f(c) = {worst:.2e}", f.nu()),
    );

    let mut orbit_err = 0.0f64;
    for o in &an.orbits {
        let x = o.points[0];
        let (y, d) = f.iterate_d(x, o.period);
        orbit_err = orbit_err.max((y - x).abs());
        orbit_err = orbit_err.max((d - o.multiplier).abs() / (1.0 + d.abs()));
    }
    suite.check(
        "periodic_orbits",
        orbit_err < 1e-8,
        format!("{} orbit(s), max residual {orbit_err:.2e}", an.orbits.len()),
    );

    let cls = &an.classification;
    let (nh, nt) = count_codimensions(cls);
    suite.check(
        "codimensions",
        (nh, nt) == (cls.nu_h, cls.nu_t) && cls.tags.len() == cls.nu,
        format!("ν_H = {}, ν_T = {}", cls.nu_h, cls.nu_t),
    );

    match (psi_h(f, cls), psi_t(f, cls)) {
        (Ok(h), Ok(t)) => suite.check(
            "psi_dimensions",
            h.dimension() == cls.nu_h && t.dimension() == cls.nu_t,
            format!("dim Ψ_H = {}, dim Ψ_T = {}", h.dimension(), t.dimension()),
        ),
        (Err(e), _) | (_, Err(e)) => suite.check("psi_dimensions", false, e.to_string()),
    }
}

const TREE_CHECKS: [&str; 5] = [
    "tree.monotone",
    "tree.symmetric",
    "tree.connected",
    "tree.forward_invariant",
    "tree.in_domain",
];

fn tree_checks(
    suite: &mut Suite,
    map: Option<&Path>,
    j: Option<&str>,
    depth: Option<usize>,
    has_j: bool,
    tol: &CliTolerances,
) {
    if !has_j {
        for name in TREE_CHECKS {
            suite.skip(name, "no pruning intervals in the map spec");
        }
        return;
    }
    match commands::grow(map, j, depth, tol) {
        Ok(t) => {
            let r = check_tree_invariants(&t.map, &t.tree);
            let counts: Vec<usize> = (0..=t.tree.depth()).map(|n| t.tree.arc_count(n)).collect();
            let detail = |topic: &str| {
                r.failures
                    .iter()
                    .filter(|f| f.contains(topic))
                    .cloned()
                    .collect::<Vec<_>>()
                    .join("; ")
            };
            suite.check("tree.monotone", r.monotone, format!("arc counts {counts:?}"));
            suite.check("tree.symmetric", r.symmetric, detail("conjugate"));
            suite.check("tree.connected", r.connected, detail("detached"));
            suite.check("tree.forward_invariant", r.forward_invariant, detail("maps a point"));
            suite.check("tree.in_domain", r.in_domain, detail("domain"));
        }
        Err(e) => {
            for name in TREE_CHECKS {
                suite.check(name, false, format!("tree construction failed: {e}"));
            }
        }
    }
}

fn circle_checks(suite: &mut Suite, g: &CircleMapE, extras: &CircleExtras, tol: &CliTolerances, rng: &mut StdRng) {
    let d = g.d as f64;
    let xs: Vec<f64> = (0..RANDOM_SAMPLES).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let period_err = xs
        .iter()
        .map(|&x| (g.lift(x + 1.0) - g.lift(x) - d).abs())
        .fold(0.0, f64::max);
    suite.check(
        "lift_periodicity",
        period_err < 1e-12,
        format!("max |g*(x+1) − g*(x) − d| = {period_err:.2e}"),
    );

    let near_jump = |x: f64| g.jumps.iter().any(|j| circle_dist(x, j.at) < 1e-9);
    let min_slope = (0..1 << 14)
        .map(|i| i as f64 / (1 << 14) as f64)
        .filter(|&x| !near_jump(x))
        .map(|x| g.slope(x))
        .fold(f64::INFINITY, f64::min);
    let sizes_ok = g.jumps.iter().all(|j| j.size.abs() > 0.0 && j.size.abs() < 1.0);
    suite.check(
        "monotone_pieces",
        min_slope > 0.0 && sizes_ok,
        format!("min slope {min_slope:.4}, {} jump(s)", g.jumps.len()),
    );

    let off2 = 2.0 * g.offset();
    let sym = xs
        .iter()
        .filter(|&&x| !near_jump(x) && !near_jump(-x))
        .map(|&x| circle_dist(g.lift(x) + g.lift(-x), off2))
        .fold(0.0, f64::max);
    let at_zero = circle_dist(g.lift(0.0), g.offset());
    suite.check(
        "real_symmetry",
        sym < 1e-12 && at_zero < 1e-12,
        format!("max |s(x) + s(−x)| mod 1 = {sym:.2e}, g*(0) = {}", g.lift(0.0)),
    );

    let q_err = g
        .marked
        .iter()
        .map(|&q| {
            let img = g.angle(q);
            g.marked
                .iter()
                .map(|&p| circle_dist(p, img))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    suite.check(
        "marked_invariant",
        q_err < 1e-9,
        format!("{} marked point(s), max distance {q_err:.2e}", g.marked.len()),
    );

    let radius = extras.radius.unwrap_or(0.01);
    match commands::semiconjugacy_of(g, radius, tol) {
        Ok((h, residual)) => {
            suite.check(
                "semiconjugacy",
                residual < 1e-6 && h.is_monotone(),
                format!("residual {residual:.2e}, {} iterations", h.iterations),
            );
            if g.marked.is_empty() {
                suite.skip("pruning_set", "no marked points");
            } else {
                match pruning_set(g, &h) {
                    Ok(q) => suite.check("pruning_set", true, format!("{} angle(s)", q.len())),
                    Err(e) => suite.check("pruning_set", false, e.to_string()),
                }
            }
        }
        Err(e) => {
            suite.check("semiconjugacy", false, e.to_string());
            suite.skip("pruning_set", "no semi-conjugacy");
        }
    }

    if !g.jumps.is_empty() && extras.yhat.is_empty() {
        suite.skip("lambda_nesting", "jumps present but no Yhat given");
        return;
    }
    let yhat = input::arcs(&extras.yhat);
    let b0 = input::arcs(&extras.b0);
    let depth = extras.n.unwrap_or(DEFAULT_LAMBDA_DEPTH).max(1);
    suite_lambda(suite, g, &yhat, &b0, depth);
}

fn suite_lambda(suite: &mut Suite, g: &CircleMapE, yhat: &ArcSet, b0: &ArcSet, depth: usize) {
    let mut prev: Option<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = None;
    for n in 0..=depth {
        match lambda_sets(g, yhat, b0, n) {
            Ok(s) => {
                if let Some((l, lp)) = &prev {
                    if !arcs_nested(&s.lambda, l, 1e-10) || !arcs_nested(&s.lambda_prime, lp, 1e-10) {
                        suite.check("lambda_nesting", false, format!("Λ_{n} ⊄ Λ_{}", n - 1));
                        return;
                    }
                }
                if !arcs_nested(&s.lambda_prime, &s.lambda, 1e-10) {
                    suite.check("lambda_nesting", false, format!("Λ'_{n} ⊄ Λ_{n}"));
                    return;
                }
                prev = Some((s.lambda, s.lambda_prime));
            }
            Err(e) => {
                suite.check("lambda_nesting", false, e.to_string());
                return;
            }
        }
    }
    suite.check("lambda_nesting", true, format!("N = 0..={depth}"));
}

fn circle_dist(a: f64, b: f64) -> f64 {
    prunedjulia::external::circle_distance(a, b)
}
