//! Pruned Julia sets: trees of complex preimage arcs of the pruning intervals.
//!
//! K_0 is the interval; K_1 adds the non-real arcs of f⁻¹(J) at each critical point, and every
//! further generation pulls back the newest arcs by one inverse branch, keeping only the
//! components that attach to the tree away from periodic critical points.

mod check;
mod disc;
mod kxo;
mod render;

pub use check::{check_tree_invariants, TreeReport};
pub use disc::{poincare_disc, pullback_angle, InverseChain, PullbackAngle};
pub use kxo::{build_kxo, BasinComponent, KxoTree};
pub use render::{render_tree, RenderStyle};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{converges_to, PeriodicOrbitRecord};
use crate::poly::Poly;
use crate::polymap::IntervalMap;

pub const MAX_DEPTH: usize = 12;
pub const MAX_ARCS: usize = 200_000;
pub const ARC_SAMPLES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PruneError {
    #[error("pruning intervals rejected: {0}")]
    IntervalConstraint(String),
    #[error("arc of generation {generation} leaves the domain (distance {distance} to the interval)")]
    ArcEscape { generation: usize, distance: f64 },
    #[error("inverse-branch continuation jumped branches near w = {0}")]
    BranchAmbiguity(Complex64),
    #[error("depth {0} exceeds the guard {MAX_DEPTH}")]
    DepthGuard(usize),
    #[error("more than {MAX_ARCS} arcs")]
    ArcLimit,
    #[error("a critical point lies in the pulled-back disc of step {0}")]
    CriticalInDisc(usize),
    #[error("basin of attractor {attractor} reaches distance {reach} from the interval (domain half-width {a})")]
    BasinTooLarge { attractor: usize, reach: f64, a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: usize,
    pub generation: usize,
    pub points: Vec<Complex64>,
    pub parent: Option<usize>,
    /// Id of the complex-conjugate arc.
    pub conjugate: usize,
    /// Critical point the arc is attached at, if any.
    pub critical: Option<usize>,
}

impl Arc {
    pub fn start(&self) -> Complex64 {
        self.points[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.points.last().unwrap()
    }

    /// Largest distance between consecutive samples.
    pub fn step(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
    }

    pub fn is_upper(&self) -> bool {
        self.id < self.conjugate
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        self.points
            .windows(2)
            .map(|w| segment_distance(z, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

/// Distance from z to [−1, 1].
pub fn interval_distance(z: Complex64) -> f64 {
    let dx = (z.re.abs() - 1.0).max(0.0);
    dx.hypot(z.im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningData {
    pub intervals: Vec<(f64, f64)>,
    /// Optional nice intervals J*_i ⋐ J_i.
    pub inner: Option<Vec<(f64, f64)>>,
    /// Interval index for each critical point.
    pub interval_of: Vec<usize>,
    /// The arcs of K_1, in conjugate pairs.
    pub arcs: Vec<Arc>,
    /// Pruning points: the free endpoints of the arcs.
    pub endpoints: Vec<Complex64>,
    /// Periodic critical points, excluded as attachment points.
    pub periodic_critical: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedTree {
    pub a: f64,
    pub arcs: Vec<Arc>,
    /// Arc ids first appearing in K_n; entry 0 (the interval) is empty.
    pub generations: Vec<Vec<usize>>,
    pub excluded_periodic_critical: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
}

impl PrunedTree {
    pub fn depth(&self) -> usize {
        self.generations.len() - 1
    }

    /// Number of arcs in K_n.
    pub fn arc_count(&self, n: usize) -> usize {
        self.generations[..=n.min(self.depth())].iter().map(Vec::len).sum()
    }

    pub fn arcs_of(&self, n: usize) -> impl Iterator<Item = &Arc> {
        self.generations[n].iter().map(move |&i| &self.arcs[i])
    }

    /// Distance from z to K_n.
    pub fn distance(&self, z: Complex64, n: usize) -> f64 {
        let on_interval = if z.im == 0.0 && z.re.abs() <= 1.0 {
            0.0
        } else {
            interval_distance(z)
        };
        self.arcs
            .iter()
            .filter(|a| a.generation <= n)
            .map(|a| a.distance(z))
            .fold(on_interval, f64::min)
    }

    pub fn summary(&self) -> TreeSummary {
        TreeSummary {
            generations: (0..=self.depth())
                .map(|n| GenerationSummary {
                    n,
                    arc_count: self.arc_count(n),
                    new_arcs: self.generations[n].len(),
                    endpoints: self.arcs_of(n).map(|a| [a.end().re, a.end().im]).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub n: usize,
    /// Arcs in K_n.
    pub arc_count: usize,
    pub new_arcs: usize,
    pub endpoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub generations: Vec<GenerationSummary>,
}

#[derive(Debug, Clone, Default)]
pub struct PruneOptions<'a> {
    /// Periodic orbits used for the basin condition on J; `None` disables the check.
    pub basin_check: Option<&'a [PeriodicOrbitRecord]>,
    pub inner: Option<Vec<(f64, f64)>>,
}

pub fn build_pruning_data(f: &IntervalMap, intervals: &[(f64, f64)]) -> Result<PruningData, PruneError> {
    build_pruning_data_with(f, intervals, &PruneOptions::default())
}

pub fn build_pruning_data_with(
    f: &IntervalMap,
    intervals: &[(f64, f64)],
    opts: &PruneOptions,
) -> Result<PruningData, PruneError> {
    let p = f.poly();
    let crit = f.critical_points();
    let bad = |m: String| Err(PruneError::IntervalConstraint(m));
    for &(lo, hi) in intervals {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("({lo}, {hi}) is not an interval"));
        }
        if lo <= -1.0 || hi >= 1.0 {
            return bad(format!("({lo}, {hi}) is not compactly inside (-1, 1)"));
        }
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[0].1 >= w[1].0 {
            return bad(format!("{:?} and {:?} overlap", w[0], w[1]));
        }
    }
    let values: Vec<f64> = crit.iter().map(|c| p.eval(c.c)).collect();
    let mut interval_of = Vec::with_capacity(crit.len());
    for (i, &v) in values.iter().enumerate() {
        if v.abs() >= 1.0 - 1e-12 {
            return bad(format!("critical value f(c_{i}) = {v} lies on the boundary of I"));
        }
        match intervals.iter().position(|&(lo, hi)| lo < v && v < hi) {
            Some(k) => interval_of.push(k),
            None => return bad(format!("critical value f(c_{i}) = {v} is not inside any J")),
        }
    }
    for (k, &(lo, hi)) in intervals.iter().enumerate() {
        let mut inside: Vec<f64> = values.iter().copied().filter(|v| lo < *v && *v < hi).collect();
        inside.sort_by(f64::total_cmp);
        inside.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if inside.len() != 1 {
            return bad(format!("J_{k} contains {} critical values", inside.len()));
        }
    }
    if let Some(inner) = &opts.inner {
        if inner.len() != intervals.len() || inner.iter().zip(intervals).any(|(i, j)| !(j.0 < i.0 && i.1 < j.1)) {
            return bad("inner intervals must be compactly inside the pruning intervals".into());
        }
    }

    let a = f.halfwidth();
    let mut upper = Vec::new();
    for (i, cp) in crit.iter().enumerate() {
        let (lo, hi) = intervals[interval_of[i]];
        let w0 = values[i];
        let lead = p.taylor_at(cp.c)[cp.ell];
        for side in [lo, hi] {
            let dir = (side - w0) / lead;
            for k in 0..cp.ell {
                let ang = (if dir > 0.0 { 0.0 } else { std::f64::consts::PI } + std::f64::consts::TAU * k as f64)
                    / cp.ell as f64;
                if ang.sin() <= 1e-9 {
                    continue; // real or lower branch
                }
                let pts = critical_branch(p, cp.c, cp.ell, lead, w0, side, ang)?;
                upper.push((i, pts));
            }
        }
    }
    let mut arcs = Vec::new();
    for (i, pts) in upper {
        let id = arcs.len();
        let conj: Vec<Complex64> = pts.iter().map(|z| z.conj()).collect();
        arcs.push(Arc {
            id,
            generation: 1,
            points: pts,
            parent: None,
            conjugate: id + 1,
            critical: Some(i),
        });
        arcs.push(Arc {
            id: id + 1,
            generation: 1,
            points: conj,
            parent: None,
            conjugate: id,
            critical: Some(i),
        });
    }
    check_domain(&arcs, a, 1)?;
    let endpoints = arcs.iter().map(Arc::end).collect();
    let periodic_critical = periodic_critical_points(f);
    let mut warnings = Vec::new();
    if let Some(orbits) = opts.basin_check {
        warnings = condition_three(f, intervals, &values, orbits, &periodic_critical);
    }
    Ok(PruningData {
        intervals: intervals.to_vec(),
        inner: opts.inner.clone(),
        interval_of,
        arcs,
        endpoints,
        periodic_critical,
        warnings,
    })
}

/// The branch of f⁻¹ along w ∈ [w0, side] leaving c in direction `ang`.
fn critical_branch(
    p: &Poly,
    c: f64,
    ell: usize,
    lead: f64,
    w0: f64,
    side: f64,
    ang: f64,
) -> Result<Vec<Complex64>, PruneError> {
    // s = t^ℓ makes the samples roughly equidistant in z near c
    let path: Vec<Complex64> = (0..=ARC_SAMPLES)
        .map(|k| {
            let s = (k as f64 / ARC_SAMPLES as f64).powi(ell as i32);
            Complex64::new(w0 + s * (side - w0), 0.0)
        })
        .collect();
    let w1 = path[1];
    let r = ((w1.re - w0) / lead).abs().powf(1.0 / ell as f64);
    let seed = Complex64::new(c, 0.0) + Complex64::from_polar(r, ang);
    let z1 = newton(p, seed, w1).ok_or(PruneError::BranchAmbiguity(w1))?;
    let mut pts = vec![Complex64::new(c, 0.0), z1];
    track(p, &path[1..], &mut pts)?;
    Ok(pts)
}

fn newton(p: &Poly, mut z: Complex64, w: Complex64) -> Option<Complex64> {
    let scale = 1.0 + w.norm();
    for _ in 0..40 {
        let (fz, dz) = p.eval_c_d(z);
        let r = fz - w;
        if r.norm() <= 1e-15 * scale {
            return Some(z);
        }
        if dz.norm() == 0.0 {
            return None;
        }
        let step = r / dz;
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    let r = (p.eval_c(z) - w).norm();
    (r <= 1e-12 * scale).then_some(z)
}

/// Continues an inverse branch along the polyline `path`; `out` ends with the preimage of path[0].
fn track(p: &Poly, path: &[Complex64], out: &mut Vec<Complex64>) -> Result<(), PruneError> {
    let mut z = *out.last().unwrap();
    for seg in path.windows(2) {
        let (w0, w1) = (seg[0], seg[1]);
        let mut t = 0.0f64;
        let mut h = 1.0f64;
        while t < 1.0 {
            let h_eff = h.min(1.0 - t);
            let wa = w0 + (w1 - w0) * t;
            let wb = w0 + (w1 - w0) * (t + h_eff);
            let dz = p.eval_c_d(z).1;
            let pred = if dz.norm() > 0.0 { z + (wb - wa) / dz } else { z };
            let ok = newton(p, pred, wb).filter(|zn| {
                // the corrector must not travel further than the predicted step
                (zn - pred).norm() <= 0.5 * (pred - z).norm() + 1e-12
            });
            match ok {
                Some(zn) => {
                    z = zn;
                    t += h_eff;
                    if t < 1.0 {
                        out.push(z);
                    }
                    h = (h * 2.0).min(1.0);
                }
                None => {
                    h *= 0.5;
                    if h < 1e-6 {
                        return Err(PruneError::BranchAmbiguity(wb));
                    }
                }
            }
        }
        out.push(z);
    }
    Ok(())
}

fn check_domain(arcs: &[Arc], a: f64, generation: usize) -> Result<(), PruneError> {
    for arc in arcs {
        for &z in &arc.points {
            let d = interval_distance(z);
            if !(d < a) {
                return Err(PruneError::ArcEscape {
                    generation,
                    distance: d,
                });
            }
        }
    }
    Ok(())
}

/// Indices of critical points that are periodic (Cr').
pub fn periodic_critical_points(f: &IntervalMap) -> Vec<usize> {
    f.critical_points()
        .iter()
        .enumerate()
        .filter(|(_, cp)| {
            let mut x = cp.c;
            (1..=128).any(|_| {
                x = f.eval(x);
                (x - cp.c).abs() < 1e-10
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// The third condition on J: a critical value in an attracting basin needs J compactly in that
/// basin and free of backward iterates of non-periodic critical points.
fn condition_three(
    f: &IntervalMap,
    intervals: &[(f64, f64)],
    values: &[f64],
    orbits: &[PeriodicOrbitRecord],
    periodic: &[usize],
) -> Vec<String> {
    let mut out = Vec::new();
    let attracting: Vec<&PeriodicOrbitRecord> = orbits.iter().filter(|o| o.stability.is_attracting()).collect();
    let crit = f.critical_points();
    for (k, &(lo, hi)) in intervals.iter().enumerate() {
        let Some(v) = values.iter().copied().find(|v| lo < *v && *v < hi) else {
            continue;
        };
        let Some(orbit) = attracting
            .iter()
            .find(|o| converges_to(f, v, &o.points, 5000, 1e-8).is_some())
        else {
            continue;
        };
        let inside = (0..=64).all(|s| {
            let x = lo + (hi - lo) * s as f64 / 64.0;
            converges_to(f, x, &orbit.points, 5000, 1e-8).is_some()
        });
        if !inside {
            out.push(format!(
                "violates condition (3): J_{k} is not inside the basin of its attractor"
            ));
        }
        for (i, cp) in crit.iter().enumerate() {
            if periodic.contains(&i) {
                continue;
            }
            if let Some(x) = backward_orbit(f, cp.c, 10).into_iter().find(|x| lo <= *x && *x <= hi) {
                out.push(format!(
                    "violates condition (3): J_{k} contains {x}, a backward iterate of c_{i}"
                ));
                break;
            }
        }
    }
    out
}

/// Real points of ⋃_{k ≤ depth} f^{−k}(x) in [−1, 1], including x.
fn backward_orbit(f: &IntervalMap, x: f64, depth: usize) -> Vec<f64> {
    let mut all = vec![x];
    let mut level = vec![x];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &y in &level {
            for z in f.poly().solve_c(Complex64::new(y, 0.0)) {
                if z.im.abs() < 1e-9 && z.re.abs() <= 1.0 {
                    next.push(z.re);
                }
            }
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if next.len() > 4096 {
            break;
        }
        all.extend(&next);
        level = next;
    }
    all
}

pub fn grow_pruned_tree(f: &IntervalMap, data: &PruningData, depth: usize) -> Result<PrunedTree, PruneError> {
    if depth > MAX_DEPTH {
        return Err(PruneError::DepthGuard(depth));
    }
    let crit = f.critical_points();
    let mut tree = PrunedTree {
        a: f.halfwidth(),
        arcs: Vec::new(),
        generations: vec![Vec::new()],
        excluded_periodic_critical: data.periodic_critical.iter().map(|&i| crit[i].c).collect(),
        intervals: data.intervals.clone(),
    };
    if depth == 0 {
        return Ok(tree);
    }
    tree.arcs = data.arcs.clone();
    tree.generations.push((0..tree.arcs.len()).collect());
    for n in 1..depth {
        let parents: Vec<&Arc> = tree.arcs_of(n).filter(|a| a.is_upper()).collect();
        let children: Vec<Vec<(Vec<Complex64>, Option<usize>)>> = parents
            .par_iter()
            .map(|arc| pull_back(f, &tree, data, arc, n))
            .collect::<Result<_, _>>()?;
        let mut new_ids = Vec::new();
        for (parent, kids) in parents.iter().zip(children) {
            for (pts, critical) in kids {
                let id = tree.arcs.len() + new_ids.len();
                let conj: Vec<Complex64> = pts.iter().map(|z| z.conj()).collect();
                new_ids.push(Arc {
                    id,
                    generation: n + 1,
                    points: pts,
                    parent: Some(parent.id),
                    conjugate: id + 1,
                    critical,
                });
                new_ids.push(Arc {
                    id: id + 1,
                    generation: n + 1,
                    points: conj,
                    parent: Some(parent.conjugate),
                    conjugate: id,
                    critical,
                });
            }
        }
        check_domain(&new_ids, tree.a, n + 1)?;
        if tree.arcs.len() + new_ids.len() > MAX_ARCS {
            return Err(PruneError::ArcLimit);
        }
        tree.generations.push(new_ids.iter().map(|a| a.id).collect());
        tree.arcs.extend(new_ids);
    }
    Ok(tree)
}

/// Preimage components of `arc` attached to K'_n.
fn pull_back(
    f: &IntervalMap,
    tree: &PrunedTree,
    data: &PruningData,
    arc: &Arc,
    n: usize,
) -> Result<Vec<(Vec<Complex64>, Option<usize>)>, PruneError> {
    let p = f.poly();
    let start = arc.start();
    let mut roots: Vec<Complex64> = p
        .solve_c(start)
        .into_iter()
        .map(|z| {
            if z.im.abs() < 1e-9 {
                Complex64::new(z.re, 0.0)
            } else {
                z
            }
        })
        .collect();
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut out = Vec::new();
    let mut used_critical = Vec::new();
    for z0 in roots {
        let hit = f
            .critical_points()
            .iter()
            .position(|cp| start.im == 0.0 && (z0 - cp.c).norm() < 1e-4 && (p.eval(cp.c) - start.re).abs() < 1e-9);
        if let Some(i) = hit {
            if used_critical.contains(&i) || data.periodic_critical.contains(&i) {
                continue;
            }
            used_critical.push(i);
            let cp = f.critical_points()[i];
            let lead = p.taylor_at(cp.c)[cp.ell];
            let w1 = arc.points[1];
            let base = ((w1 - start) / lead).powf(1.0 / cp.ell as f64);
            for k in 0..cp.ell {
                let rot = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / cp.ell as f64);
                let seed = Complex64::new(cp.c, 0.0) + base * rot;
                let z1 = newton(p, seed, w1).ok_or(PruneError::BranchAmbiguity(w1))?;
                let mut pts = vec![Complex64::new(cp.c, 0.0), z1];
                track(p, &arc.points[1..], &mut pts)?;
                out.push((pts, Some(i)));
            }
            continue;
        }
        if !attaches(f, tree, data, z0, n) {
            continue;
        }
        let z0 = newton(p, z0, start).unwrap_or(z0);
        let mut pts = vec![z0];
        track(p, &arc.points, &mut pts)?;
        out.push((pts, None));
    }
    Ok(out)
}

/// Whether z lies on K_n (within five sampling steps of an arc) and is not in Cr'(f).
fn attaches(f: &IntervalMap, tree: &PrunedTree, data: &PruningData, z: Complex64, n: usize) -> bool {
    let crit = f.critical_points();
    if data.periodic_critical.iter().any(|&i| (z - crit[i].c).norm() < 1e-9) {
        return false;
    }
    if z.im == 0.0 {
        return z.re.abs() <= 1.0;
    }
    tree.arcs.iter().filter(|a| a.generation <= n).any(|a| {
        let tol = 5.0 * a.step();
        let (lo, hi) = bbox(&a.points);
        z.re >= lo.re - tol && z.re <= hi.re + tol && z.im >= lo.im - tol && z.im <= hi.im + tol && a.distance(z) < tol
    })
}

pub(crate) fn bbox(pts: &[Complex64]) -> (Complex64, Complex64) {
    pts.iter().fold(
        (
            Complex64::new(f64::INFINITY, f64::INFINITY),
            Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), z| {
            (
                Complex64::new(lo.re.min(z.re), lo.im.min(z.im)),
                Complex64::new(hi.re.max(z.re), hi.im.max(z.im)),
            )
        },
    )
}
