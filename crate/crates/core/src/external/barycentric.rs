use std::f64::consts::TAU;

use num_complex::Complex64;

use super::ExternalError;

pub const DEFAULT_SAMPLES: usize = 512;
const RESIDUAL_TARGET: f64 = 1e-10;
const REFINEMENT_TOL: f64 = 1e-6;

struct Quadrature {
    /// Poisson weights P(z, ζ_k)/M.
    weights: Vec<f64>,
    /// h(ζ_k) on the unit circle.
    values: Vec<Complex64>,
}

impl Quadrature {
    fn new(h: &dyn Fn(f64) -> f64, m: usize, z: Complex64) -> Result<Self, ExternalError> {
        let thetas: Vec<f64> = (0..m).map(|k| h(k as f64 / m as f64)).collect();
        let monotone = thetas.windows(2).all(|w| w[1] > w[0]) && thetas[m - 1] < thetas[0] + 1.0;
        if !monotone {
            return Err(ExternalError::InvalidInput(
                "h is not an orientation-preserving circle homeomorphism".into(),
            ));
        }
        let r2 = z.norm_sqr();
        let weights = (0..m)
            .map(|k| {
                let zeta = Complex64::from_polar(1.0, TAU * k as f64 / m as f64);
                (1.0 - r2) / (z - zeta).norm_sqr() / m as f64
            })
            .collect();
        let values = thetas.iter().map(|&t| Complex64::from_polar(1.0, TAU * t)).collect();
        Ok(Quadrature { weights, values })
    }

    fn g(&self, w: Complex64) -> Complex64 {
        self.weights
            .iter()
            .zip(&self.values)
            .map(|(&p, &h)| p * (h - w) / (1.0 - w.conj() * h))
            .sum()
    }

    /// ∂G/∂w and ∂G/∂w̄.
    fn wirtinger(&self, w: Complex64) -> (Complex64, Complex64) {
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for (&p, &h) in self.weights.iter().zip(&self.values) {
            let den = 1.0 - w.conj() * h;
            a -= p / den;
            b += p * (h - w) * h / (den * den);
        }
        (a, b)
    }

    /// Harmonic extension of h at z; it lies in the disc.
    fn harmonic(&self) -> Complex64 {
        self.weights.iter().zip(&self.values).map(|(&p, &h)| p * h).sum()
    }

    fn solve(&self, start: Complex64) -> Result<Complex64, ExternalError> {
        let mut w = start;
        let mut r = self.g(w);
        for _ in 0..100 {
            if r.norm() < RESIDUAL_TARGET {
                return Ok(w);
            }
            let (a, b) = self.wirtinger(w);
            let (du, dv) = (a + b, Complex64::i() * (a - b));
            let det = du.re * dv.im - dv.re * du.im;
            if det.abs() < 1e-300 {
                break;
            }
            let su = (-r.re * dv.im + dv.re * r.im) / det;
            let sv = (-du.re * r.im + du.im * r.re) / det;
            let step = Complex64::new(su, sv);
            let mut t = 1.0;
            loop {
                let cand = w + step * t;
                if cand.norm() < 1.0 {
                    let rc = self.g(cand);
                    if rc.norm() < r.norm() || t < 1e-6 {
                        w = cand;
                        r = rc;
                        break;
                    }
                }
                t *= 0.5;
                if t < 1e-12 {
                    return Err(ExternalError::NoConvergence);
                }
            }
        }
        if r.norm() < RESIDUAL_TARGET {
            Ok(w)
        } else {
            Err(ExternalError::NoConvergence)
        }
    }
}

fn check_input(m: usize, z: Complex64) -> Result<(), ExternalError> {
    if m < 256 {
        return Err(ExternalError::InvalidInput(format!("{m} samples, need at least 256")));
    }
    if !(z.norm() <= 0.99) {
        return Err(ExternalError::InvalidInput(format!("|z| = {} exceeds 0.99", z.norm())));
    }
    Ok(())
}

/// The Douady–Earle extension of the circle homeomorphism e^{2πit} ↦ e^{2πi h(t)} at z: the zero w
/// of the barycentric integral G(z, ·), with M-point trapezoid quadrature. The solve is repeated
/// with 2M points as a resolution check.
pub fn barycentric_extension(h: &dyn Fn(f64) -> f64, m: usize, z: Complex64) -> Result<Complex64, ExternalError> {
    check_input(m, z)?;
    let w = solve_at(h, m, z)?;
    let fine = Quadrature::new(h, 2 * m, z)?.solve(w)?;
    let shift = (fine - w).norm();
    if shift > REFINEMENT_TOL {
        return Err(ExternalError::QuadratureUnderresolved(shift));
    }
    Ok(w)
}

/// Newton from the harmonic extension; near the circle, where that start is poor, continue
/// from the centre along the ray to z instead.
fn solve_at(h: &dyn Fn(f64) -> f64, m: usize, z: Complex64) -> Result<Complex64, ExternalError> {
    let q = Quadrature::new(h, m, z)?;
    if let Ok(w) = q.solve(q.harmonic()) {
        return Ok(w);
    }
    const STEPS: usize = 32;
    let mut w = Quadrature::new(h, m, Complex64::new(0.0, 0.0))?.harmonic();
    for k in 0..=STEPS {
        let zk = z * (k as f64 / STEPS as f64);
        w = Quadrature::new(h, m, zk)?.solve(w)?;
    }
    Ok(w)
}

/// |G(z, w)| with M-point quadrature.
pub fn barycentric_residual(
    h: &dyn Fn(f64) -> f64,
    m: usize,
    z: Complex64,
    w: Complex64,
) -> Result<f64, ExternalError> {
    check_input(m, z)?;
    Ok(Quadrature::new(h, m, z)?.g(w).norm())
}
