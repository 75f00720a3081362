//! Dense real polynomials in the monomial basis.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Real polynomial, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly::new(vec![0.0])
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// The identity polynomial `x`.
    pub fn x() -> Self {
        Poly::new(vec![0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative at a complex point.
    pub fn eval_c_d(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Value and first derivative at a real point.
    pub fn eval_d(&self, x: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Poly {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    /// Coefficients of `u ↦ p(x0 + u)`; entry k is `p^{(k)}(x0)/k!`.
    pub fn taylor_at(&self, x0: f64) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        let n = c.len();
        // repeated synthetic division
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += x0 * c[j + 1];
            }
        }
        c
    }

    /// All derivatives `p^{(k)}(x0)`, k = 0..=degree.
    pub fn derivatives_at(&self, x0: f64) -> Vec<f64> {
        let mut fact = 1.0;
        self.taylor_at(x0)
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| self.coeffs.get(k).copied().unwrap_or(0.0) + other.coeffs.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Poly) -> Poly {
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, &c| acc.mul(inner).add(&Poly::constant(c)))
    }

    /// n-fold self composition.
    pub fn iterate(&self, n: usize) -> Poly {
        (0..n).fold(Poly::x(), |acc, _| self.compose(&acc))
    }

    /// All complex roots of `p(z) = w`, Newton-polished.
    pub fn solve_c(&self, w: Complex64) -> Vec<Complex64> {
        let d = self.degree();
        if d == 0 {
            return Vec::new();
        }
        let lead = self.coeffs[d];
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for i in 1..d {
            m[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for k in 0..d {
            let ck = if k == 0 {
                Complex64::new(self.coeffs[0], 0.0) - w
            } else {
                Complex64::new(self.coeffs[k], 0.0)
            };
            m[(k, d - 1)] = -ck / lead;
        }
        let eig = m
            .clone()
            .try_schur(f64::EPSILON, 2000)
            .and_then(|s| s.eigenvalues())
            .map(|v| v.iter().copied().collect::<Vec<_>>())
            .unwrap_or_else(|| durand_kerner(self, w));
        eig.into_iter().map(|z| self.polish_c(z, w)).collect()
    }

    fn polish_c(&self, mut z: Complex64, w: Complex64) -> Complex64 {
        for _ in 0..8 {
            let (p, dp) = self.eval_c_d(z);
            if dp.norm() == 0.0 {
                break;
            }
            let step = (p - w) / dp;
            z -= step;
            if step.norm() < 1e-16 * (1.0 + z.norm()) {
                break;
            }
        }
        z
    }
}

fn durand_kerner(p: &Poly, w: Complex64) -> Vec<Complex64> {
    let d = p.degree();
    let lead = p.coeffs[d];
    let q = |z: Complex64| (p.eval_c(z) - w) / lead;
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        let prev = roots.clone();
        for i in 0..d {
            let denom: Complex64 = (0..d).filter(|&j| j != i).map(|j| roots[i] - roots[j]).product();
            let delta = q(roots[i]) / denom;
            roots[i] -= delta;
        }
        let change: f64 = roots.iter().zip(&prev).map(|(a, b)| (a - b).norm()).sum();
        if change < 1e-15 {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_shift_matches_derivatives() {
        let p = Poly::new(vec![1.0, -2.0, 0.5, 3.0]);
        let t = p.derivatives_at(0.7);
        assert!((t[0] - p.eval(0.7)).abs() < 1e-14);
        assert!((t[1] - p.derivative().eval(0.7)).abs() < 1e-13);
        assert!((t[2] - p.nth_derivative(2).eval(0.7)).abs() < 1e-13);
        assert!((t[3] - 18.0).abs() < 1e-13);
    }

    #[test]
    fn compose_chebyshev() {
        let t2 = Poly::new(vec![-1.0, 0.0, 2.0]);
        let t4 = t2.compose(&t2);
        assert_eq!(t4.coeffs(), &[1.0, 0.0, -8.0, 0.0, 8.0]);
    }

    #[test]
    fn solve_cube_roots() {
        let p = Poly::new(vec![0.0, 0.0, 0.0, 1.0]);
        let roots = p.solve_c(Complex64::new(-1.0, 0.0));
        assert_eq!(roots.len(), 3);
        for r in roots {
            assert!((r.powu(3) + 1.0).norm() < 1e-13);
        }
    }
}
