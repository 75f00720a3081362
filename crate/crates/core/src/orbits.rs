//! Periodic orbits, parabolic normal forms and critical-orbit classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::koenigs;
use crate::polymap::IntervalMap;
use crate::tolerances::Tolerances;

pub const MAX_PERIOD: usize = 12;
pub const DEGREE_GUARD: f64 = 1e6;
const PERIODIC_CELLS: usize = 100_000;
pub const DEFAULT_HORIZON: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("composed degree {degree}^{period} exceeds the guard (max period {MAX_PERIOD})")]
    DegreeGuard { degree: usize, period: usize },
    #[error("multiplier {0} is not parabolic")]
    NotParabolic(f64),
    #[error("orbit of critical point {0} unresolved within the horizon")]
    Unresolved(usize),
    #[error("horizon must be at least 100, got {0}")]
    HorizonTooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ParabolicSubtype {
    SaddleNode {
        tau: f64,
    },
    /// `cubic` is the x³ coefficient of the second iterate, −2(b + a²).
    PeriodDoubling {
        cubic: f64,
        degenerate: bool,
    },
    Pitchfork {
        tau_minus: f64,
    },
    NotSimple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Stability {
    Repelling,
    Attracting,
    SuperAttracting,
    Parabolic { subtype: ParabolicSubtype },
}

impl Stability {
    pub fn is_attracting(&self) -> bool {
        matches!(self, Stability::Attracting | Stability::SuperAttracting)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbitRecord {
    /// One period in dynamical order, starting at the orbit minimum.
    pub points: Vec<f64>,
    pub period: usize,
    pub multiplier: f64,
    pub stability: Stability,
}

impl PeriodicOrbitRecord {
    pub fn min_point(&self) -> f64 {
        self.points[0]
    }

    pub fn contains(&self, x: f64, tol: f64) -> Option<usize> {
        self.points.iter().position(|p| (p - x).abs() < tol)
    }
}

/// Taylor coefficients (λ, a, b) of `f^r(p + u) − p = λu + au² + bu³ + …` along an orbit.
pub fn return_map_jet(f: &IntervalMap, points: &[f64]) -> (f64, f64, f64) {
    let (mut j1, mut j2, mut j3) = (1.0, 0.0, 0.0);
    for &p in points {
        let t = f.poly().taylor_at(p);
        let t1 = t.get(1).copied().unwrap_or(0.0);
        let t2 = t.get(2).copied().unwrap_or(0.0);
        let t3 = t.get(3).copied().unwrap_or(0.0);
        let n1 = t1 * j1;
        let n2 = t1 * j2 + t2 * j1 * j1;
        let n3 = t1 * j3 + 2.0 * t2 * j1 * j2 + t3 * j1 * j1 * j1;
        (j1, j2, j3) = (n1, n2, n3);
    }
    (j1, j2, j3)
}

/// Simple-parabolic type of a local model `λu + au² + bu³` with |λ| = 1.
pub fn classify_parabolic(lambda: f64, a: f64, b: f64) -> Result<ParabolicSubtype, OrbitError> {
    classify_parabolic_with(lambda, a, b, Tolerances::default().parabolic)
}

pub fn classify_parabolic_with(lambda: f64, a: f64, b: f64, tol: f64) -> Result<ParabolicSubtype, OrbitError> {
    const ZERO: f64 = 1e-12;
    if (lambda - 1.0).abs() <= tol {
        if a.abs() > ZERO {
            Ok(ParabolicSubtype::SaddleNode { tau: a })
        } else if b < -ZERO {
            Ok(ParabolicSubtype::Pitchfork { tau_minus: b })
        } else {
            Ok(ParabolicSubtype::NotSimple)
        }
    } else if (lambda + 1.0).abs() <= tol {
        let s = b + a * a;
        Ok(ParabolicSubtype::PeriodDoubling {
            cubic: -2.0 * s,
            degenerate: s.abs() <= ZERO,
        })
    } else {
        Err(OrbitError::NotParabolic(lambda))
    }
}

pub fn find_periodic_orbits(f: &IntervalMap, max_period: usize) -> Result<Vec<PeriodicOrbitRecord>, OrbitError> {
    find_periodic_orbits_with(f, max_period, &Tolerances::default())
}

pub fn find_periodic_orbits_with(
    f: &IntervalMap,
    max_period: usize,
    tol: &Tolerances,
) -> Result<Vec<PeriodicOrbitRecord>, OrbitError> {
    let degree = f.poly().degree();
    if max_period > MAX_PERIOD || (degree as f64).powi(max_period as i32) > DEGREE_GUARD {
        return Err(OrbitError::DegreeGuard {
            degree,
            period: max_period,
        });
    }
    let per_period: Vec<Vec<PeriodicOrbitRecord>> = (1..=max_period)
        .into_par_iter()
        .map(|r| orbits_of_period(f, r, tol))
        .collect();
    let mut out: Vec<PeriodicOrbitRecord> = per_period.into_iter().flatten().collect();
    out.sort_by(|a, b| a.period.cmp(&b.period).then(a.min_point().total_cmp(&b.min_point())));
    Ok(out)
}

fn orbits_of_period(f: &IntervalMap, r: usize, tol: &Tolerances) -> Vec<PeriodicOrbitRecord> {
    let g = |x: f64| {
        let (y, d) = f.iterate_d(x, r);
        (y - x, d - 1.0)
    };
    let h = 2.0 / PERIODIC_CELLS as f64;
    let grid: Vec<(f64, f64, f64)> = (0..=PERIODIC_CELLS)
        .map(|i| {
            let x = if i == PERIODIC_CELLS { 1.0 } else { -1.0 + h * i as f64 };
            let (v, d) = g(x);
            (x, v, d)
        })
        .collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (x0, g0, d0) = w[0];
        let (x1, g1, d1) = w[1];
        if g0 == 0.0 {
            roots.push(x0);
        } else if g1 != 0.0 && g0.signum() != g1.signum() {
            roots.push(polish_root(&g, x0, x1, g0));
        } else if g1 != 0.0 && d0.signum() != d1.signum() && d0 != 0.0 {
            // tangency candidate: extremum of f^r(x) − x touching zero
            let xe = bisect(|x| g(x).1, x0, x1, d0);
            if g(xe).0.abs() < tol.periodic {
                roots.push(xe);
            }
        }
    }
    if grid[PERIODIC_CELLS].1 == 0.0 {
        roots.push(1.0);
    }

    let mut records: Vec<PeriodicOrbitRecord> = Vec::new();
    for x in roots {
        if (g(x).0).abs() >= tol.periodic.max(1e-12) * 10.0 {
            continue;
        }
        let minimal = (1..r)
            .filter(|s| r % s == 0)
            .all(|s| (f.iterate(x, s) - x).abs() >= tol.orbit_hit);
        if !minimal {
            continue;
        }
        let mut pts: Vec<f64> = Vec::with_capacity(r);
        let mut y = x;
        for _ in 0..r {
            pts.push(y);
            y = f.eval(y);
        }
        // polish every point separately so residuals do not amplify along the orbit
        for p in pts.iter_mut() {
            *p = newton_periodic(f, r, *p);
        }
        let start = pts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        pts.rotate_left(start);
        if records.iter().any(|rec| (rec.min_point() - pts[0]).abs() < 1e-7) {
            continue;
        }
        if pts.iter().any(|p| (f.iterate(*p, r) - p).abs() >= tol.periodic) {
            continue;
        }
        records.push(make_record(f, pts, tol));
    }
    records
}

fn make_record(f: &IntervalMap, points: Vec<f64>, tol: &Tolerances) -> PeriodicOrbitRecord {
    let df = f.poly().derivative();
    let multiplier: f64 = points.iter().map(|&p| df.eval(p)).product();
    let hits_critical = points.iter().any(|&p| f.is_critical(p, tol.orbit_hit).is_some());
    let stability = if hits_critical || multiplier == 0.0 {
        Stability::SuperAttracting
    } else if (multiplier.abs() - 1.0).abs() <= tol.parabolic {
        let (lam, a, b) = return_map_jet(f, &points);
        let subtype = classify_parabolic_with(lam.signum(), a, b, tol.parabolic).unwrap_or(ParabolicSubtype::NotSimple);
        Stability::Parabolic { subtype }
    } else if multiplier.abs() < 1.0 {
        Stability::Attracting
    } else {
        Stability::Repelling
    };
    PeriodicOrbitRecord {
        period: points.len(),
        points,
        multiplier,
        stability,
    }
}

fn newton_periodic(f: &IntervalMap, r: usize, mut x: f64) -> f64 {
    for _ in 0..20 {
        let (y, d) = f.iterate_d(x, r);
        let denom = d - 1.0;
        if denom.abs() < 1e-300 {
            break;
        }
        let step = (y - x) / denom;
        if !step.is_finite() || step.abs() > 1e-6 {
            break;
        }
        let nx = (x - step).clamp(-1.0, 1.0);
        let better = (f.iterate(nx, r) - nx).abs() <= (y - x).abs();
        if !better {
            break;
        }
        x = nx;
        if step.abs() < 1e-17 {
            break;
        }
    }
    x
}

fn bisect(h: impl Fn(f64) -> f64, mut a: f64, mut b: f64, ha: f64) -> f64 {
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let hm = h(m);
        if hm == 0.0 {
            return m;
        }
        if hm.signum() == ha.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn polish_root(g: &impl Fn(f64) -> (f64, f64), a: f64, b: f64, ga: f64) -> f64 {
    let mut x = bisect(|x| g(x).0, a, b, ga);
    for _ in 0..3 {
        let (v, d) = g(x);
        if d == 0.0 {
            break;
        }
        let nx = x - v / d;
        if nx < a || nx > b || g(nx).0.abs() > v.abs() {
            break;
        }
        x = nx;
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum CriticalTag {
    /// f^q(c) is the critical point `target`.
    EC {
        q: usize,
        target: usize,
    },
    /// f^q(c) = f^l(c) on a non-attracting periodic orbit.
    EP {
        l: usize,
        q: usize,
        orbit: usize,
    },
    /// Attracted to attractor `attractor`; f^{n_c}(c) lies in the immediate basin component of
    /// orbit point `component`.
    AT {
        attractor: usize,
        n_c: usize,
        component: usize,
        preferred: bool,
    },
    PeriodicCritical {
        period: usize,
    },
}

/// An attracting orbit together with the critical points it attracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorInfo {
    /// Index into the periodic-orbit list.
    pub orbit: usize,
    pub points: Vec<f64>,
    pub multiplier: f64,
    pub super_attracting: bool,
    /// AT-tagged critical points in the basin, ascending.
    pub critical: Vec<usize>,
    pub preferred: Option<usize>,
}

impl AttractorInfo {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn essential(&self) -> bool {
        !self.critical.is_empty()
    }
}

/// Grand-orbit coincidence `f^{l}(c) = f^{l'}(c')` between attracted critical points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitRelation {
    pub c: usize,
    pub l: usize,
    pub c_other: usize,
    pub l_other: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalClassification {
    pub critical_points: Vec<crate::polymap::CriticalPoint>,
    pub tags: Vec<CriticalTag>,
    pub attractors: Vec<AttractorInfo>,
    /// One relation per non-representative member of each coincidence class (Cr*_at).
    pub relations: Vec<OrbitRelation>,
    pub nu: usize,
    pub xi_noness_att: usize,
    pub zeta: usize,
    pub nu_h: usize,
    pub nu_t: usize,
    pub is_semi_hyperbolic: bool,
    /// Semi-hyperbolic with multiplier 0 also excluded.
    pub is_semi_hyperbolic_strict: bool,
    pub is_hyperbolic: bool,
}

pub fn count_codimensions(cls: &CriticalClassification) -> (usize, usize) {
    codimensions(cls.nu, cls.xi_noness_att, cls.zeta)
}

pub fn codimensions(nu: usize, xi_noness_att: usize, zeta: usize) -> (usize, usize) {
    (nu + xi_noness_att, nu.saturating_sub(zeta))
}

pub fn converges_to(f: &IntervalMap, x: f64, orbit: &[f64], horizon: usize, tol: f64) -> Option<usize> {
    let mut y = x;
    for k in 0..=horizon {
        if let Some(j) = orbit.iter().position(|p| (p - y).abs() < tol) {
            return Some((j + orbit.len() - k % orbit.len()) % orbit.len());
        }
        y = f.eval(y);
        if !y.is_finite() || y.abs() > 1e8 {
            return None;
        }
    }
    None
}

/// Whether the segment [x, p] lies in the basin of `orbit` (sampled).
pub fn in_immediate_component(f: &IntervalMap, x: f64, p: f64, orbit: &[f64], horizon: usize, tol: f64) -> bool {
    const SAMPLES: usize = 64;
    (0..=SAMPLES).all(|i| {
        let y = x + (p - x) * i as f64 / SAMPLES as f64;
        converges_to(f, y, orbit, horizon, tol).is_some()
    })
}

pub fn classify_critical_orbits(
    f: &IntervalMap,
    orbits: &[PeriodicOrbitRecord],
    horizon: usize,
) -> Result<CriticalClassification, OrbitError> {
    classify_critical_orbits_with(f, orbits, horizon, &Tolerances::default())
}

pub fn classify_critical_orbits_with(
    f: &IntervalMap,
    orbits: &[PeriodicOrbitRecord],
    horizon: usize,
    tol: &Tolerances,
) -> Result<CriticalClassification, OrbitError> {
    if horizon < 100 {
        return Err(OrbitError::HorizonTooShort(horizon));
    }
    let crit = f.critical_points().to_vec();
    let mut attractors: Vec<AttractorInfo> = orbits
        .iter()
        .enumerate()
        .filter(|(_, o)| o.stability.is_attracting())
        .map(|(i, o)| AttractorInfo {
            orbit: i,
            points: o.points.clone(),
            multiplier: o.multiplier,
            super_attracting: o.stability == Stability::SuperAttracting,
            critical: Vec::new(),
            preferred: None,
        })
        .collect();

    let mut tags = Vec::with_capacity(crit.len());
    for (i, cp) in crit.iter().enumerate() {
        tags.push(tag_critical(f, i, cp.c, orbits, &attractors, horizon, tol)?);
    }
    for (i, t) in tags.iter_mut().enumerate() {
        if let CriticalTag::AT {
            attractor, preferred, ..
        } = t
        {
            let a = &mut attractors[*attractor];
            if a.critical.is_empty() {
                *preferred = true;
                a.preferred = Some(i);
            }
            a.critical.push(i);
        }
    }

    let relations = find_relations(f, &crit, &tags, &attractors, tol);
    let n_at = tags.iter().filter(|t| matches!(t, CriticalTag::AT { .. })).count();
    let zeta = n_at - relations.len();
    let xi_noness_att = attractors
        .iter()
        .filter(|a| !a.essential() && !a.super_attracting)
        .count();
    let nu = crit.len();
    let (nu_h, nu_t) = codimensions(nu, xi_noness_att, zeta);

    let no_parabolic = orbits
        .iter()
        .all(|o| !matches!(o.stability, Stability::Parabolic { .. }));
    let ep_repelling = tags.iter().all(|t| match t {
        CriticalTag::EP { orbit, .. } => orbits[*orbit].stability == Stability::Repelling,
        _ => true,
    });
    let is_semi_hyperbolic = no_parabolic && ep_repelling;
    let no_super = orbits.iter().all(|o| o.stability != Stability::SuperAttracting);
    let is_hyperbolic = no_parabolic
        && tags
            .iter()
            .all(|t| matches!(t, CriticalTag::AT { .. } | CriticalTag::PeriodicCritical { .. }));
    Ok(CriticalClassification {
        critical_points: crit,
        tags,
        attractors,
        relations,
        nu,
        xi_noness_att,
        zeta,
        nu_h,
        nu_t,
        is_semi_hyperbolic,
        is_semi_hyperbolic_strict: is_semi_hyperbolic && no_super,
        is_hyperbolic,
    })
}

fn tag_critical(
    f: &IntervalMap,
    i: usize,
    c: f64,
    orbits: &[PeriodicOrbitRecord],
    attractors: &[AttractorInfo],
    horizon: usize,
    tol: &Tolerances,
) -> Result<CriticalTag, OrbitError> {
    let repelling: Vec<usize> = orbits
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.stability.is_attracting() && (o.multiplier - 1.0).abs() > tol.parabolic)
        .map(|(k, _)| k)
        .collect();
    // attracted critical points: look for the first entry into an immediate basin
    let mut x = c;
    for k in 0..=horizon {
        if k > 0 {
            if let Some(j) = f.is_critical(x, tol.orbit_hit) {
                return Ok(if j == i {
                    CriticalTag::PeriodicCritical { period: k }
                } else {
                    CriticalTag::EC { q: k, target: j }
                });
            }
            for &oi in &repelling {
                let o = &orbits[oi];
                if o.contains(x, tol.orbit_hit).is_some() {
                    return Ok(CriticalTag::EP {
                        l: k,
                        q: k + o.period,
                        orbit: oi,
                    });
                }
            }
        }
        for (ai, a) in attractors.iter().enumerate() {
            if a.points.iter().any(|p| (p - x).abs() < tol.basin) {
                if a.super_attracting && a.points.iter().any(|p| (p - c).abs() < tol.orbit_hit) {
                    // c is periodic; the critical relation will catch it
                    continue;
                }
                let (n_c, component) = first_basin_entry(f, c, &a.points, horizon, tol);
                return Ok(CriticalTag::AT {
                    attractor: ai,
                    n_c,
                    component,
                    preferred: false,
                });
            }
        }
        x = f.eval(x);
    }
    Err(OrbitError::Unresolved(i))
}

fn first_basin_entry(f: &IntervalMap, c: f64, orbit: &[f64], horizon: usize, tol: &Tolerances) -> (usize, usize) {
    let mut x = c;
    for n in 0..=horizon {
        // nearest orbit point first
        let mut order: Vec<usize> = (0..orbit.len()).collect();
        order.sort_by(|&a, &b| (orbit[a] - x).abs().total_cmp(&(orbit[b] - x).abs()));
        for j in order {
            if in_immediate_component(f, x, orbit[j], orbit, horizon, tol.basin) {
                return (n, j);
            }
        }
        x = f.eval(x);
    }
    (horizon, 0)
}

/// Forward image of an attracted critical point in the component of orbit point 0, and its
/// iterate count.
pub fn chart_entry(f: &IntervalMap, c: f64, n_c: usize, component: usize, period: usize) -> (usize, f64) {
    let m = n_c + (period - component % period) % period;
    (m, f.iterate(c, m))
}

fn find_relations(
    f: &IntervalMap,
    crit: &[crate::polymap::CriticalPoint],
    tags: &[CriticalTag],
    attractors: &[AttractorInfo],
    tol: &Tolerances,
) -> Vec<OrbitRelation> {
    let mut rel = Vec::new();
    for a in attractors {
        if a.critical.len() < 2 || a.super_attracting {
            continue;
        }
        let r = a.period();
        let lambda = a.multiplier;
        let Ok(chart) = koenigs::KoenigsChart::raw(f.poly(), a.points[0], r, lambda) else {
            continue;
        };
        // positions in the chart at orbit point 0
        let pos: Vec<(usize, usize, f64)> = a
            .critical
            .iter()
            .filter_map(|&ci| {
                let CriticalTag::AT { n_c, component, .. } = tags[ci] else {
                    return None;
                };
                let (m, z) = chart_entry(f, crit[ci].c, n_c, component, r);
                chart.eval_real(z).ok().map(|w| (ci, m, w))
            })
            .collect();
        let mut rep_of: Vec<Option<usize>> = vec![None; pos.len()];
        for j in 0..pos.len() {
            for i in 0..j {
                if rep_of[i].is_some() || rep_of[j].is_some() {
                    continue;
                }
                let (ci, mi, wi) = pos[i];
                let (cj, mj, wj) = pos[j];
                if wi == 0.0 || wj == 0.0 {
                    continue;
                }
                let ratio = wj / wi;
                let k = (ratio.abs().ln() / lambda.abs().ln()).round();
                if !k.is_finite() || k.abs() > 400.0 {
                    continue;
                }
                let k = k as i64;
                let pred = lambda.powi(k as i32);
                if ((ratio - pred) / pred).abs() > 1e-8 {
                    continue;
                }
                // φ(f^{mj + r·aj}(cj)) = φ(f^{mi + r·ai}(ci)) with ai − aj = k
                let (ai, aj) = if k >= 0 { (k as usize, 0) } else { (0, (-k) as usize) };
                let offset = (mj + r * aj) as i64 - (mi + r * ai) as i64;
                rep_of[j] = Some(i);
                // φ-equality means eventual coincidence; the first coinciding index may lie
                // past the chart entry
                let bound = mi + r * ai + 256;
                let (l, lo) = (0..=bound)
                    .filter(|&l| l as i64 + offset >= 0)
                    .find(|&l| {
                        let lo = (l as i64 + offset) as usize;
                        (f.iterate(crit[ci].c, l) - f.iterate(crit[cj].c, lo)).abs() < tol.orbit_hit
                    })
                    .map(|l| (l, (l as i64 + offset) as usize))
                    .unwrap_or((bound, (bound as i64 + offset) as usize));
                rel.push(OrbitRelation {
                    c: ci,
                    l,
                    c_other: cj,
                    l_other: lo,
                });
            }
        }
    }
    rel.sort_by_key(|r| (r.c, r.c_other));
    rel
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_of_linear_model() {
        let f = IntervalMap::new(vec![-0.2, 0.0, 1.2], 0.5).unwrap();
        let (l, a, _) = return_map_jet(&f, &[-1.0 / 6.0]);
        assert!((l + 0.4).abs() < 1e-14);
        assert!((a - 1.2).abs() < 1e-14);
    }
}
