//! Koenigs linearizing coordinates at attracting periodic orbits.
//!
//! The limit `(f^{nr}(z) − p)/λ^n` is evaluated in deviation coordinates: each step applies the
//! Taylor expansion of f at the current orbit point with its constant term removed, so the
//! iteration never subtracts nearly equal numbers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{PeriodicOrbitRecord, Stability};
use crate::poly::Poly;
use crate::polymap::IntervalMap;
use crate::tolerances::Tolerances;

pub const DEFAULT_NMAX: usize = 5000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KoenigsError {
    #[error("point {0} is not in the basin (iterates do not converge)")]
    NotInBasin(Complex64),
    #[error("multiplier is 0; Koenigs linearization does not apply")]
    SuperAttracting,
    #[error("orbit is not attracting (|λ| = {0})")]
    NotAttracting(f64),
    #[error("normalization point coincides with the periodic point")]
    DegenerateNormalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KoenigsChart {
    pub p: f64,
    pub period: usize,
    pub lambda: f64,
    pub kappa: f64,
    /// Radius around p on which the chart was verified to converge.
    pub rho: f64,
    pub n_max: usize,
    #[serde(skip)]
    jets: Vec<Vec<f64>>,
    #[serde(skip)]
    tol: f64,
}

impl KoenigsChart {
    /// Un-normalized chart (κ = 1) at the periodic point p of period r.
    pub fn raw(f: &Poly, p: f64, period: usize, lambda: f64) -> Result<Self, KoenigsError> {
        if lambda == 0.0 {
            return Err(KoenigsError::SuperAttracting);
        }
        if lambda.abs() >= 1.0 {
            return Err(KoenigsError::NotAttracting(lambda.abs()));
        }
        let mut jets = Vec::with_capacity(period);
        let mut x = p;
        for _ in 0..period {
            let mut t = f.taylor_at(x);
            t[0] = 0.0;
            jets.push(t);
            x = f.eval(x);
        }
        let mut chart = KoenigsChart {
            p,
            period,
            lambda,
            kappa: 1.0,
            rho: 0.0,
            n_max: DEFAULT_NMAX,
            jets,
            tol: Tolerances::default().koenigs,
        };
        chart.rho = chart.estimate_radius();
        Ok(chart)
    }

    /// Chart at `orbit.points[index]` normalized so φ(z_norm) = −1 if z_norm > p, +1 if z_norm < p.
    pub fn normalized(
        f: &IntervalMap,
        orbit: &PeriodicOrbitRecord,
        index: usize,
        z_norm: f64,
    ) -> Result<Self, KoenigsError> {
        if orbit.stability == Stability::SuperAttracting {
            return Err(KoenigsError::SuperAttracting);
        }
        let mut chart = Self::raw(f.poly(), orbit.points[index], orbit.period, orbit.multiplier)?;
        chart.normalize_at(z_norm)?;
        Ok(chart)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn normalize_at(&mut self, z_norm: f64) -> Result<(), KoenigsError> {
        let w = self.raw_eval(Complex64::new(z_norm, 0.0))?.0.re;
        if w == 0.0 || z_norm == self.p {
            return Err(KoenigsError::DegenerateNormalization);
        }
        let s = if z_norm > self.p { -1.0 } else { 1.0 };
        self.kappa = exact_scale(w, s);
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, KoenigsError> {
        Ok(self.raw_eval(z)?.0 * self.kappa)
    }

    /// φ(z) and φ'(z).
    pub fn eval_d(&self, z: Complex64) -> Result<(Complex64, Complex64), KoenigsError> {
        let (w, dw) = self.raw_eval(z)?;
        Ok((w * self.kappa, dw * self.kappa))
    }

    pub fn eval_real(&self, x: f64) -> Result<f64, KoenigsError> {
        Ok(self.eval(Complex64::new(x, 0.0))?.re)
    }

    /// Deviation iteration: returns the limits of u_{nr}/λ^n and its z-derivative.
    fn raw_eval(&self, z: Complex64) -> Result<(Complex64, Complex64), KoenigsError> {
        let mut u = z - self.p;
        let mut du = Complex64::new(1.0, 0.0);
        let mut scale = 1.0;
        let (mut prev, mut dprev) = (u, du);
        for _ in 0..self.n_max {
            for t in &self.jets {
                let (v, dv) = eval_series(t, u);
                du *= dv;
                u = v;
            }
            scale *= self.lambda;
            if !(u.norm() < 10.0) {
                return Err(KoenigsError::NotInBasin(z));
            }
            let (w, dw) = (u / scale, du / scale);
            if (w - prev).norm() <= self.tol * w.norm() && (dw - dprev).norm() <= self.tol * dw.norm() {
                return Ok((w, dw));
            }
            if u.norm() == 0.0 {
                return Ok((w, dw));
            }
            (prev, dprev) = (w, dw);
        }
        Err(KoenigsError::NotInBasin(z))
    }

    fn estimate_radius(&self) -> f64 {
        let mut r = 1.0;
        while r > 1e-6 {
            let ok = (0..32).all(|k| {
                let t = std::f64::consts::TAU * k as f64 / 32.0;
                self.raw_eval(Complex64::new(self.p, 0.0) + Complex64::from_polar(r, t))
                    .is_ok()
            });
            if ok {
                return r;
            }
            r *= 0.5;
        }
        r
    }
}

/// Σ_{m≥1} t_m u^m and its derivative.
fn eval_series(t: &[f64], u: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for &c in t.iter().rev() {
        dv = dv * u + v;
        v = v * u + c;
    }
    (v, dv)
}

/// κ with κ·w == s exactly in floating point.
fn exact_scale(w: f64, s: f64) -> f64 {
    let k = s / w;
    let mut cands = [
        k,
        k.next_up(),
        k.next_down(),
        k.next_up().next_up(),
        k.next_down().next_down(),
    ];
    cands.sort_by_key(|c| ((c * w) != s) as u8);
    cands[0]
}

/// φ(z) for an attracting orbit record, normalized at `z_norm`.
pub fn koenigs_map(
    f: &IntervalMap,
    orbit: &PeriodicOrbitRecord,
    z_norm: f64,
    z: Complex64,
) -> Result<Complex64, KoenigsError> {
    KoenigsChart::normalized(f, orbit, 0, z_norm)?.eval(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_derivative() {
        let (v, dv) = eval_series(&[0.0, 2.0, 3.0], Complex64::new(0.5, 0.0));
        assert_eq!(v.re, 1.75);
        assert_eq!(dv.re, 5.0);
    }

    #[test]
    fn exact_normalization() {
        for w in [0.1, 1.0 / 3.0, 7.3e-3, 0.123456789] {
            assert_eq!(exact_scale(w, -1.0) * w, -1.0);
        }
    }
}
