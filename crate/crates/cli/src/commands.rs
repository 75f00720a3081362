use std::path::Path;

use num_complex::Complex64;
use prunedjulia::external::{
    barycentric_extension, barycentric_residual, continuous_extension, markov_structure, parse_sines, pruning_set,
    semiconjugacy_with, CircleMapE, SemiConjugacy,
};
use prunedjulia::invariants::{dpsi_finite_difference, dpsi_h_analytic, max_relative_error, psi_h, psi_t};
use prunedjulia::orbits::{
    classify_critical_orbits_with, find_periodic_orbits_with, CriticalClassification, PeriodicOrbitRecord, DEGREE_GUARD,
};
use prunedjulia::prunedtree::{
    build_pruning_data, check_tree_invariants, grow_pruned_tree, render_tree, PrunedTree, PruningData, RenderStyle,
};
use prunedjulia::{IntervalMap, Poly, PolyVectorField};
use serde_json::{json, Value};

use crate::input::{self, IntervalFile};
use crate::{CliError, CliTolerances};

pub const DEFAULT_DEPTH: usize = 6;
const DEFAULT_RADIUS: f64 = 0.01;
/// Every this many grid points of h go into the semiconj report.
const H_STRIDE: usize = 256;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Longest period within both the requested bound and the composed-degree guard.
pub fn period_bound(f: &IntervalMap, requested: usize) -> usize {
    let degree = f.poly().degree().max(2) as f64;
    let mut p = requested.min(prunedjulia::orbits::MAX_PERIOD);
    while p > 1 && degree.powi(p as i32) > DEGREE_GUARD {
        p -= 1;
    }
    p.max(1)
}

pub fn map_summary(f: &IntervalMap) -> Value {
    json!({
        "coeffs": f.coeffs(),
        "a": f.halfwidth(),
        "nu": f.nu(),
        "crit": f.critical_points().iter().map(|c| json!({"c": c.c, "ell": c.ell})).collect::<Vec<_>>(),
        "sign": f.sign(),
        "degree": f.external_degree(),
    })
}

pub struct Analysis {
    pub map: IntervalMap,
    pub file: IntervalFile,
    pub orbits: Vec<PeriodicOrbitRecord>,
    pub classification: CriticalClassification,
}

pub fn analyse(
    map: Option<&Path>,
    horizon: usize,
    max_period: usize,
    tol: &CliTolerances,
) -> Result<Analysis, CliError> {
    let (f, file) = input::interval_map(map, &tol.core)?;
    let orbits = find_periodic_orbits_with(&f, period_bound(&f, max_period), &tol.core)?;
    let classification = classify_critical_orbits_with(&f, &orbits, horizon, &tol.core)?;
    Ok(Analysis {
        map: f,
        file,
        orbits,
        classification,
    })
}

pub fn classify(map: Option<&Path>, horizon: usize, max_period: usize, tol: &CliTolerances) -> Result<Value, CliError> {
    let an = analyse(map, horizon, max_period, tol)?;
    let cls = &an.classification;
    Ok(json!({
        "map": map_summary(&an.map),
        "orbits": to_value(&an.orbits),
        "classification": {
            "tags": to_value(&cls.tags),
            "attractors": to_value(&cls.attractors),
            "relations": to_value(&cls.relations),
            "nu": cls.nu,
            "xi_noness_att": cls.xi_noness_att,
            "zeta": cls.zeta,
            "nu_H": cls.nu_h,
            "nu_T": cls.nu_t,
            "semi_hyperbolic": cls.is_semi_hyperbolic,
            "semi_hyperbolic_strict": cls.is_semi_hyperbolic_strict,
            "hyperbolic": cls.is_hyperbolic,
        },
    }))
}

pub fn psi(map: Option<&Path>, horizon: usize, max_period: usize, tol: &CliTolerances) -> Result<Value, CliError> {
    let an = analyse(map, horizon, max_period, tol)?;
    let h = psi_h(&an.map, &an.classification)?;
    let t = psi_t(&an.map, &an.classification)?;
    Ok(json!({
        "map": map_summary(&an.map),
        "nu_H": an.classification.nu_h,
        "nu_T": an.classification.nu_t,
        "psi": {"H": to_value(&h), "T": to_value(&t)},
    }))
}

pub fn dpsi(
    map: Option<&Path>,
    horizon: usize,
    max_period: usize,
    field: &str,
    step: f64,
    tol: &CliTolerances,
) -> Result<Value, CliError> {
    let an = analyse(map, horizon, max_period, tol)?;
    let q = Poly::new(input::coefficients(field)?);
    let v = PolyVectorField::from_factor(&an.map, &q)?;
    let psi = psi_h(&an.map, &an.classification)?;
    let analytic = dpsi_h_analytic(&an.map, &v, &an.classification)?;
    let fd = dpsi_finite_difference(&an.map, &v, &an.classification, step)?;
    Ok(json!({
        "map": map_summary(&an.map),
        "field": v.poly().coeffs(),
        "step": step,
        "psi": to_value(&psi),
        "dpsi": {
            "analytic": to_value(&analytic),
            "finite_difference": to_value(&fd),
            "max_rel_err": max_relative_error(&analytic, &fd, tol.fd_floor),
            "floor": tol.fd_floor,
        },
    }))
}

pub struct Tree {
    pub map: IntervalMap,
    pub data: PruningData,
    pub tree: PrunedTree,
}

pub fn grow(map: Option<&Path>, j: Option<&str>, depth: Option<usize>, tol: &CliTolerances) -> Result<Tree, CliError> {
    let (f, file) = input::interval_map(map, &tol.core)?;
    let intervals = match j {
        Some(s) => input::intervals(s)?,
        None => file.j.clone(),
    };
    if intervals.is_empty() {
        return Err(CliError::Validation(
            "no pruning intervals: pass --J or add \"J\" to the map".into(),
        ));
    }
    let depth = depth.or(file.depth).unwrap_or(DEFAULT_DEPTH);
    let data = build_pruning_data(&f, &intervals)?;
    let tree = grow_pruned_tree(&f, &data, depth)?;
    Ok(Tree { map: f, data, tree })
}

fn write_svg(path: &Path, svg: &str) -> Result<(), CliError> {
    std::fs::write(path, svg).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

pub fn prune(
    map: Option<&Path>,
    j: Option<&str>,
    depth: Option<usize>,
    svg: Option<&Path>,
    tol: &CliTolerances,
) -> Result<Value, CliError> {
    let t = grow(map, j, depth, tol)?;
    let report = check_tree_invariants(&t.map, &t.tree);
    let summary = t.tree.summary();
    let mut paths = None;
    if let Some(path) = svg {
        let text = render_tree(&t.tree, &RenderStyle::default());
        paths = Some(text.matches("<path").count());
        write_svg(path, &text)?;
    }
    Ok(json!({
        "map": map_summary(&t.map),
        "intervals": t.tree.intervals,
        "depth": t.tree.depth(),
        "arc_counts": (0..=t.tree.depth()).map(|n| t.tree.arc_count(n)).collect::<Vec<_>>(),
        "generations": to_value(&summary.generations),
        "flags": {
            "warnings": t.data.warnings,
            "excluded_periodic_critical": t.tree.excluded_periodic_critical,
            "invariants": to_value(&report),
            "passed": report.passed(),
        },
        "svg": svg.map(|p| json!({"path": p.display().to_string(), "paths": paths})),
    }))
}

pub fn render(
    map: Option<&Path>,
    j: Option<&str>,
    depth: Option<usize>,
    svg: Option<&Path>,
    tol: &CliTolerances,
) -> Result<Value, CliError> {
    let svg = svg.ok_or_else(|| CliError::Validation("render needs --svg".into()))?;
    let path = map.ok_or_else(|| CliError::Validation("--map is required".into()))?;
    let (kind, text) = match input::load(path)? {
        input::MapFile::Circle(spec, _) => ("lift", CircleMapE::from_spec(&spec)?.render_lift(256)),
        input::MapFile::Interval(_) => {
            let t = grow(map, j, depth, tol)?;
            ("tree", render_tree(&t.tree, &RenderStyle::default()))
        }
    };
    write_svg(svg, &text)?;
    Ok(json!({
        "kind": kind,
        "svg": {"path": svg.display().to_string(), "paths": text.matches("<path").count()},
    }))
}

pub fn circle_summary(g: &CircleMapE) -> Value {
    json!({
        "d": g.d,
        "eps": g.eps,
        "sines": g.sines,
        "jumps": to_value(&g.jumps),
        "Q": g.marked,
        "pieces": g.pieces(),
        "lipschitz": g.lipschitz(),
        "lift_at_zero": g.lift(0.0),
    })
}

pub fn circle(map: Option<&Path>, svg: Option<&Path>) -> Result<Value, CliError> {
    let (g, _) = input::circle_map(map)?;
    if let Some(path) = svg {
        write_svg(path, &g.render_lift(256))?;
    }
    Ok(json!({
        "map": circle_summary(&g),
        "svg": svg.map(|p| p.display().to_string()),
    }))
}

pub fn markov(
    map: Option<&Path>,
    yhat: Option<&str>,
    b0: Option<&str>,
    depth: Option<usize>,
) -> Result<Value, CliError> {
    let (g, extras) = input::circle_map(map)?;
    let yhat = match yhat {
        Some(s) => input::intervals(s)?,
        None => extras.yhat.clone(),
    };
    let b0 = match b0 {
        Some(s) => input::intervals(s)?,
        None => extras.b0.clone(),
    };
    let n = depth.or(extras.n).unwrap_or(1);
    let m = markov_structure(&g, &input::arcs(&yhat), &input::arcs(&b0), n)?;
    Ok(json!({
        "map": circle_summary(&g),
        "yhat": yhat,
        "b0": b0,
        "markov": to_value(&m),
    }))
}

pub fn semiconjugacy_of(g: &CircleMapE, radius: f64, tol: &CliTolerances) -> Result<(SemiConjugacy, f64), CliError> {
    let ext = continuous_extension(g, radius)?;
    let h = semiconjugacy_with(&ext, g.eps, prunedjulia::external::SEMICONJ_GRID, tol.semiconj)?;
    let residual = h.residual(&ext);
    Ok((h, residual))
}

pub fn semiconj(map: Option<&Path>, radius: Option<f64>, tol: &CliTolerances) -> Result<Value, CliError> {
    let (g, extras) = input::circle_map(map)?;
    let radius = radius.or(extras.radius).unwrap_or(DEFAULT_RADIUS);
    let (h, residual) = semiconjugacy_of(&g, radius, tol)?;
    let q = if g.marked.is_empty() {
        Vec::new()
    } else {
        pruning_set(&g, &h)?
    };
    Ok(json!({
        "map": circle_summary(&g),
        "radius": radius,
        "grid": h.grid.len(),
        "iterations": h.iterations,
        "residual": residual,
        "monotone": h.is_monotone(),
        "h_stride": H_STRIDE,
        "h": h.grid.iter().step_by(H_STRIDE).collect::<Vec<_>>(),
        "Q": to_value(&q),
    }))
}

pub fn barycentric(h: &str, rotate: f64, z: &str, samples: usize) -> Result<Value, CliError> {
    let sines = parse_sines(h)?;
    let theta = move |t: f64| {
        t + rotate
            + sines
                .iter()
                .map(|&(a, k)| a * (std::f64::consts::TAU * k as f64 * t).sin())
                .sum::<f64>()
    };
    let zs = input::points(z)?;
    let mut points = Vec::with_capacity(zs.len());
    for z in zs {
        let w: Complex64 = barycentric_extension(&theta, samples, z)?;
        let residual = barycentric_residual(&theta, samples, z, w)?;
        points.push(json!({"z": [z.re, z.im], "w": [w.re, w.im], "residual": residual}));
    }
    Ok(json!({
        "h": h,
        "rotate": rotate,
        "samples": samples,
        "points": points,
    }))
}
