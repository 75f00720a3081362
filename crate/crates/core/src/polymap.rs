//! Real polynomial interval maps of [−1, 1] and their tangent vector fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Poly;
use crate::tolerances::Tolerances;

/// Iterates beyond this modulus count as escaped.
pub const ESCAPE_RADIUS: f64 = 1e8;
const CRIT_CELLS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyMapError {
    #[error("polynomial is constant")]
    Constant,
    #[error("coefficients must be finite")]
    NonFinite,
    #[error("domain half-width must be positive, got {0}")]
    BadHalfwidth(f64),
    #[error("boundary not preserved: f(-1) = {at_minus}, f(1) = {at_plus}")]
    NotBoundaryPreserving { at_minus: f64, at_plus: f64 },
    #[error("critical point on the boundary: Df({0}) = 0")]
    CriticalPointOnBoundary(f64),
    #[error("orbit escaped at iterate {0}")]
    OverflowEscape(usize),
    #[error("tangent vector constraint violated: {0}")]
    ConstraintViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub c: f64,
    pub ell: usize,
}

/// A polynomial map of [−1, 1] with its marked real critical points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMap {
    poly: Poly,
    a: f64,
    crit: Vec<CriticalPoint>,
    sign: i8,
}

/// Scale used for relative derivative thresholds: max of |p| on [−1, 1] is at most this.
pub(crate) fn poly_scale(p: &Poly) -> f64 {
    p.coeffs().iter().map(|c| c.abs()).sum::<f64>().max(f64::MIN_POSITIVE)
}

/// Sign-change roots of `p` on (lo, hi), bisected then Newton-polished.
pub(crate) fn real_roots(p: &Poly, lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let dp = p.derivative();
    let h = (hi - lo) / cells as f64;
    let mut out = Vec::new();
    let mut prev_x = lo;
    let mut prev = p.eval(lo);
    for i in 1..=cells {
        let x = lo + h * i as f64;
        let y = p.eval(x);
        if prev == 0.0 {
            if i > 1 {
                out.push(prev_x);
            }
        } else if y != 0.0 && prev.signum() != y.signum() {
            out.push(bisect_newton(p, &dp, prev_x, x, prev));
        }
        prev_x = x;
        prev = y;
    }
    out
}

fn bisect_newton(p: &Poly, dp: &Poly, mut a: f64, mut b: f64, fa: f64) -> f64 {
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = p.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..4 {
        let d = dp.eval(x);
        if d == 0.0 {
            break;
        }
        let nx = x - p.eval(x) / d;
        if !(nx > a - 1e-12 && nx < b + 1e-12) {
            break;
        }
        x = nx;
    }
    x
}

impl IntervalMap {
    /// Detect critical points, check and normalize the boundary condition.
    pub fn new(coeffs: Vec<f64>, a: f64) -> Result<Self, PolyMapError> {
        Self::with_tolerances(coeffs, a, &Tolerances::default())
    }

    pub fn with_tolerances(coeffs: Vec<f64>, a: f64, tol: &Tolerances) -> Result<Self, PolyMapError> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PolyMapError::NonFinite);
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(PolyMapError::BadHalfwidth(a));
        }
        let poly = normalize_boundary(Poly::new(coeffs), tol.boundary)?;
        let df = poly.derivative();
        let scale = poly_scale(&df);
        for x in [-1.0, 1.0] {
            if df.eval(x).abs() <= tol.derivative * scale {
                return Err(PolyMapError::CriticalPointOnBoundary(x));
            }
        }
        let crit = find_critical_points(&poly, tol.derivative);
        let sign = if poly.eval(1.0) > 0.0 { 1 } else { -1 };
        Ok(IntervalMap { poly, a, crit, sign })
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn coeffs(&self) -> &[f64] {
        self.poly.coeffs()
    }

    pub fn halfwidth(&self) -> f64 {
        self.a
    }

    pub fn critical_points(&self) -> &[CriticalPoint] {
        &self.crit
    }

    pub fn nu(&self) -> usize {
        self.crit.len()
    }

    /// ε: +1 iff f(1) = 1.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// External degree d = Σ ℓ_i.
    pub fn external_degree(&self) -> usize {
        self.crit.iter().map(|c| c.ell).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }

    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        self.poly.eval_c(z)
    }

    pub fn is_critical(&self, x: f64, tol: f64) -> Option<usize> {
        self.crit.iter().position(|c| (c.c - x).abs() < tol)
    }

    /// Orbit `f^k(z)` and chain-rule derivatives `Df^k(z)` for k = 0..=n.
    pub fn evaluate_orbit(&self, z: Complex64, n: usize) -> Result<(Vec<Complex64>, Vec<Complex64>), PolyMapError> {
        let mut orbit = Vec::with_capacity(n + 1);
        let mut deriv = Vec::with_capacity(n + 1);
        let mut w = z;
        let mut d = Complex64::new(1.0, 0.0);
        orbit.push(w);
        deriv.push(d);
        for k in 1..=n {
            let (fw, dfw) = self.poly.eval_c_d(w);
            d *= dfw;
            w = fw;
            if !(w.norm() <= ESCAPE_RADIUS) {
                return Err(PolyMapError::OverflowEscape(k));
            }
            orbit.push(w);
            deriv.push(d);
        }
        Ok((orbit, deriv))
    }

    /// Real orbit `f^n(x)`.
    pub fn iterate(&self, x: f64, n: usize) -> f64 {
        (0..n).fold(x, |y, _| self.poly.eval(y))
    }

    /// `(f^n(x), Df^n(x))` on the real line.
    pub fn iterate_d(&self, x: f64, n: usize) -> (f64, f64) {
        let mut y = x;
        let mut d = 1.0;
        for _ in 0..n {
            let (fy, dfy) = self.poly.eval_d(y);
            d *= dfy;
            y = fy;
        }
        (y, d)
    }
}

/// Validates the boundary values and projects them onto ±1 exactly by adjusting a₀, a₁.
fn normalize_boundary(p: Poly, tol: f64) -> Result<Poly, PolyMapError> {
    if p.degree() == 0 {
        return Err(PolyMapError::Constant);
    }
    let (fm, fp) = (p.eval(-1.0), p.eval(1.0));
    let target = |v: f64| {
        if (v - 1.0).abs() <= tol {
            Some(1.0)
        } else if (v + 1.0).abs() <= tol {
            Some(-1.0)
        } else {
            None
        }
    };
    let (Some(tm), Some(tp)) = (target(fm), target(fp)) else {
        return Err(PolyMapError::NotBoundaryPreserving {
            at_minus: fm,
            at_plus: fp,
        });
    };
    let (ep, em) = (fp - tp, fm - tm);
    let mut c = p.coeffs().to_vec();
    c[0] -= 0.5 * (ep + em);
    c[1] -= 0.5 * (ep - em);
    Ok(Poly::new(c))
}

/// Real critical points in (−1, 1) with their orders.
fn find_critical_points(p: &Poly, rel: f64) -> Vec<CriticalPoint> {
    let deg = p.degree();
    let derivs: Vec<Poly> = (0..=deg).map(|j| p.nth_derivative(j)).collect();
    let scales: Vec<f64> = derivs.iter().map(poly_scale).collect();
    let vanishes = |j: usize, x: f64| derivs[j].eval(x).abs() <= rel * scales[j];
    let mut found: Vec<CriticalPoint> = Vec::new();
    for j in 1..deg {
        for x in real_roots(&derivs[j], -1.0, 1.0, CRIT_CELLS) {
            if x <= -1.0 || x >= 1.0 {
                continue;
            }
            if !(1..j).all(|i| vanishes(i, x)) {
                continue;
            }
            if found.iter().any(|c| (c.c - x).abs() < 1e-7) {
                continue;
            }
            let ell = (2..=deg).find(|&k| !vanishes(k, x)).unwrap_or(deg);
            found.push(CriticalPoint { c: x, ell });
        }
    }
    found.sort_by(|a, b| a.c.total_cmp(&b.c));
    found
}

/// A tangent vector at f: real polynomial vanishing at ±1, with v^{(j)}(c_i) = 0 for 1 ≤ j ≤ ℓ_i − 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyVectorField {
    poly: Poly,
}

impl PolyVectorField {
    pub fn new(f: &IntervalMap, coeffs: Vec<f64>) -> Result<Self, PolyMapError> {
        make_tangent_vector(f, coeffs)
    }

    /// `(x² − 1)·q(x)`, which vanishes at ±1 by construction.
    pub fn from_factor(f: &IntervalMap, q: &Poly) -> Result<Self, PolyMapError> {
        let v = Poly::new(vec![-1.0, 0.0, 1.0]).mul(q);
        check_critical_vanishing(f, &v)?;
        Ok(PolyVectorField { poly: v })
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }
}

pub fn make_tangent_vector(f: &IntervalMap, coeffs: Vec<f64>) -> Result<PolyVectorField, PolyMapError> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(PolyMapError::NonFinite);
    }
    let v = Poly::new(coeffs);
    let scale = poly_scale(&v);
    let mut bad = Vec::new();
    for x in [-1.0, 1.0] {
        let vx = v.eval(x);
        if vx.abs() > 1e-12 * scale {
            bad.push(format!("v({x}) = {vx} != 0"));
        }
    }
    if !bad.is_empty() {
        return Err(PolyMapError::ConstraintViolation(bad.join("; ")));
    }
    check_critical_vanishing(f, &v)?;
    // exact boundary zeros
    let mut c = v.coeffs().to_vec();
    let (ep, em) = (v.eval(1.0), v.eval(-1.0));
    c[0] -= 0.5 * (ep + em);
    if c.len() > 1 {
        c[1] -= 0.5 * (ep - em);
    }
    Ok(PolyVectorField { poly: Poly::new(c) })
}

fn check_critical_vanishing(f: &IntervalMap, v: &Poly) -> Result<(), PolyMapError> {
    let mut bad = Vec::new();
    for (i, cp) in f.critical_points().iter().enumerate() {
        for j in 1..=cp.ell.saturating_sub(2) {
            let dj = v.nth_derivative(j);
            let val = dj.eval(cp.c);
            if val.abs() > 1e-9 * poly_scale(&dj) {
                bad.push(format!("v^({j})(c_{i}={}) = {val} != 0", cp.c));
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(PolyMapError::ConstraintViolation(bad.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_is_exact() {
        let f = IntervalMap::new(vec![-0.2 + 1e-13, 0.0, 1.2], 0.5).unwrap();
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(-1.0), 1.0);
    }

    #[test]
    fn quartic_critical_orders() {
        // x^4 has ℓ = 4 at 0; shifted to preserve the boundary: 2x^4 − 1
        let f = IntervalMap::new(vec![-1.0, 0.0, 0.0, 0.0, 2.0], 0.5).unwrap();
        assert_eq!(f.critical_points(), &[CriticalPoint { c: 0.0, ell: 4 }]);
        assert_eq!(f.external_degree(), 4);
    }
}
