//! Conjugacy invariants Ψ_H, Ψ_T and their derivatives along tangent fields.
//!
//! Ψ is always evaluated against a frozen classification of a reference map f: critical points
//! and attracting orbits of the map g are continued from f's by Newton's method, and the
//! combinatorial data (q_c, l_c, n_c, preferred points) are kept fixed.

mod fields;
mod parabolic;

pub use fields::*;
pub use parabolic::*;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::koenigs::{KoenigsChart, KoenigsError};
use crate::orbits::{AttractorInfo, CriticalClassification, CriticalTag};
use crate::poly::Poly;
use crate::polymap::{poly_scale, IntervalMap, PolyVectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("combinatorics broken: {0}")]
    CombinatoricsBroken(String),
    #[error("tangent field assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("finite-difference step {0} outside [1e-8, 1e-3]")]
    InvalidStep(f64),
    #[error("attractor {0} is superattracting with attracted critical points; Koenigs data unavailable")]
    SuperAttractingBasin(usize),
    #[error(transparent)]
    Koenigs(#[from] KoenigsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiValue {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl PsiValue {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    fn push(&mut self, label: String, value: f64) {
        self.labels.push(label);
        self.values.push(value);
    }
}

/// Continuation of f's critical points and attracting orbits to g.
struct Continued {
    crit: Vec<f64>,
    /// Orbit points per attractor, aligned with the frozen orbit order.
    attractors: Vec<Vec<f64>>,
}

fn continue_data(g: &Poly, frozen: &CriticalClassification) -> Result<Continued, InvariantError> {
    let mut crit = Vec::with_capacity(frozen.critical_points.len());
    for (i, cp) in frozen.critical_points.iter().enumerate() {
        let h = g.nth_derivative(cp.ell - 1);
        let dh = h.derivative();
        let x = newton(|x| (h.eval(x), dh.eval(x)), cp.c).filter(|x| (x - cp.c).abs() < 0.1);
        crit.push(
            x.ok_or_else(|| InvariantError::CombinatoricsBroken(format!("critical point {i} did not continue")))?,
        );
    }
    let mut attractors = Vec::with_capacity(frozen.attractors.len());
    for (k, a) in frozen.attractors.iter().enumerate() {
        attractors
            .push(continue_orbit(g, a).ok_or_else(|| {
                InvariantError::CombinatoricsBroken(format!("attracting orbit {k} did not continue"))
            })?);
    }
    Ok(Continued { crit, attractors })
}

fn continue_orbit(g: &Poly, a: &AttractorInfo) -> Option<Vec<f64>> {
    let r = a.period();
    let gr = |x: f64| {
        let (mut y, mut d) = (x, 1.0);
        for _ in 0..r {
            let (fy, dfy) = g.eval_d(y);
            d *= dfy;
            y = fy;
        }
        (y - x, d - 1.0)
    };
    let mut pts = Vec::with_capacity(r);
    for &p in &a.points {
        let x = newton(gr, p).filter(|x| (x - p).abs() < 0.1)?;
        pts.push(x);
    }
    let lambda: f64 = pts.iter().map(|&p| g.eval_d(p).1).product();
    if !a.super_attracting && lambda.abs() >= 1.0 {
        return None;
    }
    Some(pts)
}

fn newton(h: impl Fn(f64) -> (f64, f64), x0: f64) -> Option<f64> {
    let mut x = x0;
    for _ in 0..60 {
        let (v, d) = h(x);
        if v == 0.0 {
            return Some(x);
        }
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let step = v / d;
        x -= step;
        if !x.is_finite() {
            return None;
        }
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            return Some(x);
        }
    }
    // accept if the residual stalled at rounding level
    (h(x).0.abs() < 1e-12).then_some(x)
}

fn iterate(g: &Poly, x: f64, n: usize) -> f64 {
    (0..n).fold(x, |y, _| g.eval(y))
}

/// Relation block shared by Ψ_H and Ψ_T: Cr_ec then Cr_ep.
fn relation_block(g: &Poly, frozen: &CriticalClassification, cont: &Continued, out: &mut PsiValue) {
    for (i, tag) in frozen.tags.iter().enumerate() {
        match *tag {
            CriticalTag::EC { q, target } => out.push(
                format!("ec:c{i}->c{target}"),
                iterate(g, cont.crit[i], q) - cont.crit[target],
            ),
            CriticalTag::PeriodicCritical { period } => out.push(
                format!("ec:c{i}->c{i}"),
                iterate(g, cont.crit[i], period) - cont.crit[i],
            ),
            _ => {}
        }
    }
    for (i, tag) in frozen.tags.iter().enumerate() {
        if let CriticalTag::EP { l, q, .. } = *tag {
            let xl = iterate(g, cont.crit[i], l);
            out.push(format!("ep:c{i}"), iterate(g, xl, q - l) - xl);
        }
    }
}

fn at_entry(frozen: &CriticalClassification, i: usize) -> (usize, usize) {
    match frozen.tags[i] {
        CriticalTag::AT { n_c, component, .. } => (n_c, component),
        _ => unreachable!("attractor lists only AT critical points"),
    }
}

/// Ψ_H of the map g against a frozen classification.
pub fn psi_h(g: &IntervalMap, frozen: &CriticalClassification) -> Result<PsiValue, InvariantError> {
    psi_h_poly(g.poly(), frozen)
}

pub fn psi_h_poly(g: &Poly, frozen: &CriticalClassification) -> Result<PsiValue, InvariantError> {
    let cont = continue_data(g, frozen)?;
    let mut out = PsiValue {
        labels: Vec::new(),
        values: Vec::new(),
    };
    relation_block(g, frozen, &cont, &mut out);
    for (k, a) in frozen.attractors.iter().enumerate() {
        if a.super_attracting {
            if a.essential() {
                return Err(InvariantError::SuperAttractingBasin(k));
            }
            continue;
        }
        let pts = &cont.attractors[k];
        let lambda: f64 = pts.iter().map(|&p| g.eval_d(p).1).product();
        out.push(format!("mult:a{k}"), lambda);
        let Some(pref) = a.preferred else { continue };
        if a.critical.len() < 2 {
            continue;
        }
        let r = a.period();
        let mut chart = KoenigsChart::raw(g, pts[0], r, lambda)?.with_tolerance(1e-14);
        let (n_c, comp) = at_entry(frozen, pref);
        let (_, z_pref) = chart_entry_poly(g, cont.crit[pref], n_c, comp, r);
        chart.normalize_at(z_pref)?;
        for &i in a.critical.iter().filter(|&&i| i != pref) {
            let (n_c, comp) = at_entry(frozen, i);
            let (_, z) = chart_entry_poly(g, cont.crit[i], n_c, comp, r);
            let s = chart.eval_real(z_pref)?;
            out.push(format!("phi:a{k}:c{i}"), s - chart.eval_real(z)?);
        }
    }
    Ok(out)
}

fn chart_entry_poly(g: &Poly, c: f64, n_c: usize, component: usize, period: usize) -> (usize, f64) {
    let m = n_c + (period - component % period) % period;
    (m, iterate(g, c, m))
}

/// Ψ_T of the map g against a frozen classification.
pub fn psi_t(g: &IntervalMap, frozen: &CriticalClassification) -> Result<PsiValue, InvariantError> {
    psi_t_poly(g.poly(), frozen)
}

pub fn psi_t_poly(g: &Poly, frozen: &CriticalClassification) -> Result<PsiValue, InvariantError> {
    let cont = continue_data(g, frozen)?;
    let mut out = PsiValue {
        labels: Vec::new(),
        values: Vec::new(),
    };
    relation_block(g, frozen, &cont, &mut out);
    for rel in &frozen.relations {
        out.push(
            format!("rel:c{}~c{}", rel.c, rel.c_other),
            iterate(g, cont.crit[rel.c], rel.l) - iterate(g, cont.crit[rel.c_other], rel.l_other),
        );
    }
    Ok(out)
}

/// v^n(x) = d/dt (f + tv)^n(x) at t = 0.
pub fn orbit_derivative(f: &IntervalMap, v: &PolyVectorField, x: f64, n: usize) -> f64 {
    orbit_derivative_poly(f.poly(), v.poly(), x, n)
}

pub fn orbit_derivative_poly(f: &Poly, v: &Poly, x: f64, n: usize) -> f64 {
    let mut y = x;
    let mut w = 0.0;
    for _ in 0..n {
        let (fy, dfy) = f.eval_d(y);
        w = v.eval(y) + dfy * w;
        y = fy;
    }
    w
}

/// Checks v(±1) = 0 and v^{(j)}(c) = 0, 1 ≤ j ≤ ℓ − 2.
fn check_tangent(frozen: &CriticalClassification, v: &Poly) -> Result<(), InvariantError> {
    let scale = poly_scale(v);
    for x in [-1.0, 1.0] {
        if v.eval(x).abs() > 1e-12 * scale {
            return Err(InvariantError::AssumptionViolated(format!("v({x}) != 0")));
        }
    }
    for (i, cp) in frozen.critical_points.iter().enumerate() {
        for j in 1..=cp.ell.saturating_sub(2) {
            let dj = v.nth_derivative(j);
            if dj.eval(cp.c).abs() > 1e-9 * poly_scale(&dj) {
                return Err(InvariantError::AssumptionViolated(format!("v^({j})(c_{i}) != 0")));
            }
        }
    }
    Ok(())
}

/// Analytic derivative of Ψ_H along v at the reference map f.
pub fn dpsi_h_analytic(
    f: &IntervalMap,
    v: &PolyVectorField,
    frozen: &CriticalClassification,
) -> Result<PsiValue, InvariantError> {
    let (fp, vp) = (f.poly(), v.poly());
    check_tangent(frozen, vp)?;
    let cont = continue_data(fp, frozen)?;
    // motion of the critical points: g^{(ℓ−1)}(c(t)) = 0
    let c_dot: Vec<f64> = frozen
        .critical_points
        .iter()
        .zip(&cont.crit)
        .map(|(cp, &c)| -vp.nth_derivative(cp.ell - 1).eval(c) / fp.nth_derivative(cp.ell).eval(c))
        .collect();
    // d/dt g^n(c(t)); Df^n(c) = 0 for n ≥ 1 so only v^n survives
    let moved = |i: usize, n: usize| {
        if n == 0 {
            c_dot[i]
        } else {
            orbit_derivative_poly(fp, vp, cont.crit[i], n)
        }
    };
    let mut out = PsiValue {
        labels: Vec::new(),
        values: Vec::new(),
    };
    for (i, tag) in frozen.tags.iter().enumerate() {
        match *tag {
            CriticalTag::EC { q, target } => out.push(format!("ec:c{i}->c{target}"), moved(i, q) - c_dot[target]),
            CriticalTag::PeriodicCritical { period } => out.push(format!("ec:c{i}->c{i}"), moved(i, period) - c_dot[i]),
            _ => {}
        }
    }
    for (i, tag) in frozen.tags.iter().enumerate() {
        if let CriticalTag::EP { l, q, .. } = *tag {
            out.push(format!("ep:c{i}"), moved(i, q) - moved(i, l));
        }
    }
    for (k, a) in frozen.attractors.iter().enumerate() {
        if a.super_attracting {
            if a.essential() {
                return Err(InvariantError::SuperAttractingBasin(k));
            }
            continue;
        }
        let pts = &cont.attractors[k];
        let motion = OrbitMotion::new(fp, vp, pts);
        out.push(format!("mult:a{k}"), motion.lambda_dot);
        let Some(pref) = a.preferred else { continue };
        if a.critical.len() < 2 {
            continue;
        }
        let r = a.period();
        let mut chart = KoenigsChart::raw(fp, pts[0], r, motion.lambda)?;
        let (n_c, comp) = at_entry(frozen, pref);
        let (m_pref, z_pref) = chart_entry_poly(fp, cont.crit[pref], n_c, comp, r);
        chart.normalize_at(z_pref)?;
        let s = chart.eval_real(z_pref)?;
        let raw_pref = motion.phi_total_derivative(z_pref, moved(pref, m_pref))?;
        for &i in a.critical.iter().filter(|&&i| i != pref) {
            let (n_c, comp) = at_entry(frozen, i);
            let (m, z) = chart_entry_poly(fp, cont.crit[i], n_c, comp, r);
            let raw_z = motion.phi_total_derivative(z, moved(i, m))?;
            // component s − s·Φ(z)/Φ(z_pref)
            let d = -s * (raw_z.dot * raw_pref.value - raw_z.value * raw_pref.dot) / (raw_pref.value * raw_pref.value);
            out.push(format!("phi:a{k}:c{i}"), d);
        }
    }
    Ok(out)
}

/// First-order motion of an attracting orbit under f + tv.
struct OrbitMotion<'a> {
    f: &'a Poly,
    v: &'a Poly,
    points: Vec<f64>,
    /// Motion p_j' of each orbit point.
    p_dot: Vec<f64>,
    lambda: f64,
    lambda_dot: f64,
}

struct RawDerivative {
    value: f64,
    dot: f64,
}

impl<'a> OrbitMotion<'a> {
    fn new(f: &'a Poly, v: &'a Poly, points: &[f64]) -> Self {
        let r = points.len();
        let lambda: f64 = points.iter().map(|&p| f.eval_d(p).1).product();
        let vr = orbit_derivative_poly(f, v, points[0], r);
        let mut p_dot = Vec::with_capacity(r);
        p_dot.push(vr / (1.0 - lambda));
        for j in 0..r - 1 {
            let (_, dfp) = f.eval_d(points[j]);
            p_dot.push(v.eval(points[j]) + dfp * p_dot[j]);
        }
        let df = f.derivative();
        let (ddf, dv) = (df.derivative(), v.derivative());
        let sum: f64 = (0..r)
            .map(|j| (dv.eval(points[j]) + ddf.eval(points[j]) * p_dot[j]) / df.eval(points[j]))
            .sum();
        OrbitMotion {
            f,
            v,
            points: points.to_vec(),
            p_dot,
            lambda,
            lambda_dot: lambda * sum,
        }
    }

    /// Raw Koenigs value Φ(z) and its total t-derivative for a point moving with speed `z_dot`.
    fn phi_total_derivative(&self, z: f64, z_dot: f64) -> Result<RawDerivative, InvariantError> {
        let r = self.points.len();
        let jets_f: Vec<Vec<f64>> = self.points.iter().map(|&p| self.f.taylor_at(p)).collect();
        let df = self.f.derivative();
        let jets_df: Vec<Vec<f64>> = self.points.iter().map(|&p| df.taylor_at(p)).collect();
        let jets_v: Vec<Vec<f64>> = self.points.iter().map(|&p| self.v.taylor_at(p)).collect();
        let series = |t: &[f64], u: f64| t.iter().skip(1).rev().fold(0.0, |acc, &c| acc * u + c) * u;

        let mut u = z - self.points[0];
        let mut du = 1.0; // ∂u/∂z
        let mut delta = -self.p_dot[0]; // U_m − P'_j at fixed z; U_0 = 0
        let mut scale = 1.0;
        let ratio = self.lambda_dot / self.lambda;
        let mut prev: Option<(f64, f64, f64)> = None;
        for n in 1..=20_000usize {
            for j in 0..r {
                let fprime_x = jets_df[j][0] + series(&jets_df[j], u);
                delta = series(&jets_v[j], u) + fprime_x * delta + series(&jets_df[j], u) * self.p_dot[j];
                du *= fprime_x;
                u = series(&jets_f[j], u);
            }
            scale *= self.lambda;
            if !(u.abs() < 10.0) {
                return Err(KoenigsError::NotInBasin(Complex64::new(z, 0.0)).into());
            }
            let phi = u / scale;
            let dphi = du / scale;
            let q = delta / scale - n as f64 * ratio * phi;
            if let Some((p0, d0, q0)) = prev {
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-13 * a.abs().max(1e-300);
                if (close(phi, p0) && close(dphi, d0) && close(q, q0)) || u == 0.0 {
                    return Ok(RawDerivative {
                        value: phi,
                        dot: q + dphi * z_dot,
                    });
                }
            }
            prev = Some((phi, dphi, q));
        }
        Err(KoenigsError::NotInBasin(Complex64::new(z, 0.0)).into())
    }
}

/// Central difference (Ψ_H(f + hv) − Ψ_H(f − hv))/2h.
pub fn dpsi_finite_difference(
    f: &IntervalMap,
    v: &PolyVectorField,
    frozen: &CriticalClassification,
    step: f64,
) -> Result<PsiValue, InvariantError> {
    if !(1e-8..=1e-3).contains(&step) {
        return Err(InvariantError::InvalidStep(step));
    }
    let plus = psi_h_poly(&f.poly().add(&v.poly().scale(step)), frozen)?;
    let minus = psi_h_poly(&f.poly().sub(&v.poly().scale(step)), frozen)?;
    Ok(PsiValue {
        labels: plus.labels.clone(),
        values: plus
            .values
            .iter()
            .zip(&minus.values)
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect(),
    })
}

/// max_k |a_k − b_k| / max(|a_k|, |b_k|, floor).
pub fn max_relative_error(a: &PsiValue, b: &PsiValue, floor: f64) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
