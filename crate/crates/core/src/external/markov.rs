use std::collections::HashMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::arcs::{lambda_sets, preimage_arc, ArcSet};
use super::semiconj::snap_angle;
use super::{circle_distance, frac, CircleMapE, ExternalError};

const MAX_ORBIT: usize = 64;
const MAX_EXPANSION_ITERATE: usize = 32;
const EXPANSION_SAMPLES: usize = 1 << 12;
const EXPANSION_FLOOR: f64 = 1.05;

/// x is preperiodic: g^{preperiod}(x) has exact period `period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCertificate {
    pub angle: f64,
    pub exact: Option<(i64, i64)>,
    pub preperiod: usize,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovStructure {
    pub n: usize,
    /// I'_j: components of Λ'_N.
    pub targets: Vec<(f64, f64)>,
    /// I_i with g(I_i) = I'_{transitions[i]}.
    pub intervals: Vec<(f64, f64)>,
    pub transitions: Vec<usize>,
    /// (N', λ): min |D(g*)^{N'}| over the Λ' samples.
    pub expansion: (usize, f64),
    pub certificates: Vec<BoundaryCertificate>,
}

fn linear_step(x: Ratio<i64>, d: u32, eps: i8) -> Ratio<i64> {
    let y = x * d as i64 + if eps == 1 { Ratio::new(0, 1) } else { Ratio::new(1, 2) };
    y - y.floor()
}

/// Orbit bookkeeping shared by the exact and floating certificates: first repeat within the cap.
fn first_repeat<T>(orbit: &[T], same: impl Fn(&T, &T) -> bool) -> Option<(usize, usize)> {
    for j in 1..orbit.len() {
        if let Some(i) = (0..j).find(|&i| same(&orbit[i], &orbit[j])) {
            return Some((i, j - i));
        }
    }
    None
}

/// Newton on g^p(y) − y − k = 0 from x; `None` unless it settles within 1e−8 of x.
fn periodic_point_near(g: &CircleMapE, x: f64, p: usize) -> Option<f64> {
    let orbit_lift = |y: f64| {
        let mut z = y;
        let mut dz = 1.0;
        for _ in 0..p {
            dz *= g.slope(frac(z));
            z = g.lift(z);
        }
        (z, dz)
    };
    let k = (orbit_lift(x).0 - x).round();
    let mut y = x;
    for _ in 0..50 {
        let (z, dz) = orbit_lift(y);
        let r = z - y - k;
        if r.abs() < 1e-13 {
            return (circle_distance(y, x) < 1e-8).then_some(frac(y));
        }
        let step = r / (dz - 1.0);
        if !step.is_finite() {
            return None;
        }
        y -= step;
    }
    None
}

/// Certifies that x is eventually periodic under g with preperiod + period ≤ 64. Linear models
/// are iterated exactly on the snapped rational; otherwise the float orbit's first near-repeat is
/// confirmed by Newton on the periodic equation.
pub fn certify_eventually_periodic(g: &CircleMapE, x: f64) -> Result<BoundaryCertificate, ExternalError> {
    let fail = || ExternalError::BoundaryNotEventuallyPeriodic(x);
    let x = frac(x);
    if g.is_linear() {
        let r = snap_angle(x, 1 << 16, 1e-12).ok_or_else(fail)?;
        let mut orbit = vec![r];
        let mut seen: HashMap<Ratio<i64>, usize> = HashMap::from([(r, 0)]);
        for j in 1..=MAX_ORBIT {
            let next = linear_step(orbit[j - 1], g.d, g.eps);
            if let Some(&i) = seen.get(&next) {
                return Ok(BoundaryCertificate {
                    angle: x,
                    exact: Some((*r.numer(), *r.denom())),
                    preperiod: i,
                    period: j - i,
                });
            }
            seen.insert(next, j);
            orbit.push(next);
        }
        return Err(fail());
    }
    let mut orbit = vec![x];
    for j in 1..=MAX_ORBIT {
        orbit.push(g.angle(orbit[j - 1]));
    }
    let (pre, period) = first_repeat(&orbit, |a, b| circle_distance(*a, *b) < 1e-9).ok_or_else(fail)?;
    periodic_point_near(g, orbit[pre], period).ok_or_else(fail)?;
    Ok(BoundaryCertificate {
        angle: x,
        exact: None,
        preperiod: pre,
        period,
    })
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    [-1.0, 0.0, 1.0]
        .iter()
        .map(|s| ((a.1).min(b.1 + s) - (a.0).max(b.0 + s)).max(0.0))
        .sum()
}

fn contained(a: (f64, f64), b: (f64, f64), tol: f64) -> bool {
    [-1.0, 0.0, 1.0]
        .iter()
        .any(|s| a.0 >= b.0 + s - tol && a.1 <= b.1 + s + tol)
}

fn normalize(a: (f64, f64)) -> (f64, f64) {
    let l = frac(a.0);
    (l, l + (a.1 - a.0))
}

/// Joins preimage pieces that meet end to start (the lift is continuous away from jumps, so a
/// component can be cut only by the 0 ~ 1 seam).
fn merge_touching(mut arcs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(arcs.len());
    for a in arcs {
        match out.last_mut() {
            Some(last) if (a.0 - last.1).abs() < 1e-12 => last.1 = a.1,
            _ => out.push(a),
        }
    }
    if out.len() > 1 {
        let n = out.len();
        if (out[n - 1].1 - (out[0].0 + 1.0)).abs() < 1e-12 {
            let first = out.remove(0);
            out[n - 2].1 = first.1 + 1.0;
        }
    }
    out
}

fn sample_arcs(arcs: &[(f64, f64)], n: usize) -> Vec<f64> {
    let total: f64 = arcs.iter().map(|a| a.1 - a.0).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n);
    for &(lo, hi) in arcs {
        let k = (((hi - lo) / total) * n as f64).ceil().max(2.0) as usize;
        out.extend((0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64));
    }
    out
}

/// Smallest N' ≤ 32 whose derivative min over the samples beats 1.05, with that min.
fn expansion(g: &CircleMapE, samples: &[f64]) -> Result<(usize, f64), ExternalError> {
    let mut z: Vec<f64> = samples.iter().map(|&x| frac(x)).collect();
    let mut dz = vec![1.0f64; z.len()];
    for n in 1..=MAX_EXPANSION_ITERATE {
        for (x, d) in z.iter_mut().zip(dz.iter_mut()) {
            *d *= g.slope(*x).abs();
            *x = g.angle(*x);
        }
        let lambda = dz.iter().copied().fold(f64::INFINITY, f64::min);
        if lambda > EXPANSION_FLOOR {
            return Ok((n, lambda));
        }
    }
    Err(ExternalError::NoExpansionFound)
}

pub fn markov_structure(
    g: &CircleMapE,
    yhat: &ArcSet,
    b0: &ArcSet,
    n: usize,
) -> Result<MarkovStructure, ExternalError> {
    let sets = lambda_sets(g, yhat, b0, n)?;
    for x in yhat.endpoints().into_iter().chain(b0.endpoints()) {
        certify_eventually_periodic(g, x)?;
    }
    let targets = sets.lambda_prime.clone();
    let mut pairs: Vec<((f64, f64), usize)> = Vec::new();
    for (j, &t) in targets.iter().enumerate() {
        for c in merge_touching(preimage_arc(g, t).into_iter().map(normalize).collect()) {
            if c.1 - c.0 < 1e-10 {
                continue;
            }
            let inside = targets.iter().any(|&b| contained(c, b, 1e-10));
            if inside {
                pairs.push((c, j));
            } else if targets.iter().any(|&b| overlap(c, b) > 1e-10) {
                return Err(ExternalError::NotMarkov(format!(
                    "preimage [{:.12}, {:.12}] of I'_{j} straddles the boundary of Λ'",
                    c.0, c.1
                )));
            }
        }
    }
    pairs.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0));
    for &((lo, hi), j) in &pairs {
        let (a, b) = targets[j];
        let full = b - a >= 1.0;
        let ok = full || (circle_distance(g.angle(lo), a) < 1e-8 && circle_distance(g.angle(hi - 1e-15), b) < 1e-8);
        if !ok {
            return Err(ExternalError::NotMarkov(format!(
                "[{lo:.12}, {hi:.12}] does not map onto I'_{j}"
            )));
        }
    }
    let mut boundary: Vec<f64> = yhat
        .endpoints()
        .into_iter()
        .chain(b0.endpoints())
        .chain(targets.iter().flat_map(|&(a, b)| [a, b]))
        .chain(pairs.iter().flat_map(|&((a, b), _)| [a, b]))
        .map(frac)
        .collect();
    boundary.sort_by(f64::total_cmp);
    boundary.dedup_by(|a, b| circle_distance(*a, *b) < 1e-12);
    let certificates = boundary
        .iter()
        .map(|&x| certify_eventually_periodic(g, x))
        .collect::<Result<Vec<_>, _>>()?;
    let expansion = expansion(g, &sample_arcs(&targets, EXPANSION_SAMPLES))?;
    Ok(MarkovStructure {
        n,
        targets,
        intervals: pairs.iter().map(|p| p.0).collect(),
        transitions: pairs.iter().map(|p| p.1).collect(),
        expansion,
        certificates,
    })
}
