use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{track, PruneError};
use crate::polymap::IntervalMap;

/// Whether z ∈ D_θ(I) = {z : ∠(lo, z, hi) ≥ θ} ∪ I.
pub fn poincare_disc(lo: f64, hi: f64, theta: f64, z: Complex64) -> bool {
    if z.im == 0.0 {
        return lo <= z.re && z.re <= hi;
    }
    let ang = ((Complex64::new(lo, 0.0) - z) / (Complex64::new(hi, 0.0) - z))
        .arg()
        .abs();
    ang >= theta
}

/// The upper boundary arc of D_θ([lo, hi]), from hi to lo, endpoints excluded.
fn upper_boundary(lo: f64, hi: f64, theta: f64, n: usize) -> Vec<Complex64> {
    let h = 0.5 * (hi - lo);
    let center = Complex64::new(0.5 * (lo + hi), h / theta.tan());
    let r = h / theta.sin();
    let start = (-center.im).atan2(h);
    let end = std::f64::consts::PI - start;
    (1..=n)
        .map(|k| {
            let t = start + (end - start) * k as f64 / (n + 1) as f64;
            center + Complex64::from_polar(r, t)
        })
        .collect()
}

/// Real intervals J_0, …, J_s with f mapping J_k diffeomorphically onto J_{k+1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseChain {
    pub intervals: Vec<(f64, f64)>,
}

impl InverseChain {
    /// Pulls `target` back `near.len()` times; step k takes the branch through the real preimage
    /// of the midpoint closest to `near[k]`.
    pub fn pull(f: &IntervalMap, target: (f64, f64), near: &[f64]) -> Result<Self, PruneError> {
        let mut intervals = vec![target];
        let mut cur = target;
        for (k, &guess) in near.iter().enumerate() {
            let mid = 0.5 * (cur.0 + cur.1);
            let x = real_preimages(f, mid)
                .into_iter()
                .min_by(|a, b| (a - guess).abs().total_cmp(&(b - guess).abs()))
                .ok_or_else(|| PruneError::IntervalConstraint(format!("{mid} has no real preimage")))?;
            let ends = [cur.0, cur.1].map(|e| lap_preimage(f, x, e));
            let (Some(a), Some(b)) = (ends[0], ends[1]) else {
                return Err(PruneError::CriticalInDisc(near.len() - 1 - k));
            };
            cur = (a.min(b), a.max(b));
            intervals.push(cur);
        }
        intervals.reverse();
        Ok(InverseChain { intervals })
    }

    pub fn steps(&self) -> usize {
        self.intervals.len() - 1
    }
}

fn real_preimages(f: &IntervalMap, y: f64) -> Vec<f64> {
    f.poly()
        .solve_c(Complex64::new(y, 0.0))
        .into_iter()
        .filter(|z| z.im.abs() < 1e-9 && z.re.abs() <= 1.0)
        .map(|z| z.re)
        .collect()
}

/// The preimage of `e` on the monotone lap of f through x, by bisection.
fn lap_preimage(f: &IntervalMap, x: f64, e: f64) -> Option<f64> {
    let d = f.poly().derivative().eval(x);
    let dir = if (e - f.eval(x)) * d >= 0.0 { 1.0 } else { -1.0 };
    let bound = f
        .critical_points()
        .iter()
        .map(|c| c.c)
        .filter(|c| (c - x) * dir > 0.0)
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
        .unwrap_or(dir);
    let (mut lo, mut hi) = (x, bound);
    let g = |t: f64| f.eval(t) - e;
    if g(lo) == 0.0 {
        return Some(lo);
    }
    if g(lo).signum() == g(hi).signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if g(m).signum() == g(lo).signum() {
            lo = m;
        } else {
            hi = m;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackAngle {
    pub theta_tilde: f64,
    /// Pulled-back boundary samples of D_θ(J_s) around J_0, followed by their conjugates.
    pub boundary: Vec<Complex64>,
}

fn inside_polygon(poly: &[Complex64], z: Complex64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.im > z.im) != (b.im > z.im) {
            let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if z.re < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Pulls ∂D_θ(J_s) back along the chain (256 samples) and returns the largest θ̃ with the
/// result inside D_θ̃(J_0).
pub fn pullback_angle(f: &IntervalMap, chain: &InverseChain, theta: f64) -> Result<PullbackAngle, PruneError> {
    let p = f.poly();
    let s = chain.steps();
    let crit_c: Vec<Complex64> = p.derivative().solve_c(Complex64::new(0.0, 0.0));
    for k in 0..s {
        let (lo, hi) = chain.intervals[k];
        if crit_c.iter().any(|c| c.im.abs() < 1e-12 && lo <= c.re && c.re <= hi) {
            return Err(PruneError::CriticalInDisc(k));
        }
    }
    let (lo_s, hi_s) = chain.intervals[s];
    let mut upper = upper_boundary(lo_s, hi_s, theta, 128);
    for k in (0..s).rev() {
        let (lo, hi) = chain.intervals[k];
        let target = chain.intervals[k + 1];
        let mut next = Vec::with_capacity(upper.len());
        for &w in &upper {
            let m = w.re.clamp(target.0, target.1);
            let x0 = lap_preimage(f, 0.5 * (lo + hi), m).ok_or(PruneError::CriticalInDisc(k))?;
            let mut pts = vec![Complex64::new(x0, 0.0)];
            let path: Vec<Complex64> = (0..=16)
                .map(|j| Complex64::new(m, 0.0) + (w - m) * (j as f64 / 16.0))
                .collect();
            track(p, &path, &mut pts)?;
            next.push(*pts.last().unwrap());
        }
        // closed boundary of the pulled-back disc, for the critical-point test; a decreasing
        // branch reverses the order of the samples
        let increasing = p.derivative().eval(0.5 * (lo + hi)) > 0.0;
        let (first, last) = if increasing { (hi, lo) } else { (lo, hi) };
        let mut polygon = vec![Complex64::new(first, 0.0)];
        polygon.extend(next.iter().copied());
        polygon.push(Complex64::new(last, 0.0));
        polygon.extend(next.iter().rev().map(|z| z.conj()));
        if crit_c.iter().any(|&c| inside_polygon(&polygon, c)) {
            return Err(PruneError::CriticalInDisc(k));
        }
        upper = next;
    }
    let (lo, hi) = chain.intervals[0];
    let theta_tilde = upper
        .iter()
        .map(|&z| {
            ((Complex64::new(lo, 0.0) - z) / (Complex64::new(hi, 0.0) - z))
                .arg()
                .abs()
        })
        .fold(std::f64::consts::PI, f64::min);
    let mut boundary = upper.clone();
    boundary.extend(upper.iter().map(|z| z.conj()));
    Ok(PullbackAngle { theta_tilde, boundary })
}
