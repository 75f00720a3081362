//! Horizontal/vertical vector-field numerics: equivariance, the telescoped vertical identity,
//! and the boundary algebra behind uniqueness of the splitting.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Poly;
use crate::polymap::IntervalMap;

/// A holomorphic function evaluated pointwise.
pub trait ComplexField {
    fn eval_at(&self, z: Complex64) -> Complex64;
}

impl ComplexField for Poly {
    fn eval_at(&self, z: Complex64) -> Complex64 {
        self.eval_c(z)
    }
}

/// α(z) = Σ c_k / (z − x_k)^{m_k} with real poles x_k: holomorphic off the poles and
/// vanishing at ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSum {
    pub terms: Vec<(f64, f64, u32)>,
}

impl ComplexField for PoleSum {
    fn eval_at(&self, z: Complex64) -> Complex64 {
        self.terms.iter().map(|&(x, c, m)| c / (z - x).powu(m)).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("DF^{k}(z) vanishes at sample point {z}")]
    DerivativeVanishes { k: usize, z: Complex64 },
}

/// `v = α∘F − F'·α` for polynomial α.
pub fn induced_field(f: &Poly, alpha: &Poly) -> Poly {
    alpha.compose(f).sub(&f.derivative().mul(alpha))
}

fn induced_at(f: &Poly, alpha: &impl ComplexField, z: Complex64) -> Complex64 {
    let (fz, dfz) = f.eval_c_d(z);
    alpha.eval_at(fz) - dfz * alpha.eval_at(z)
}

/// max over the sample of |v(z) − α(F(z)) + DF(z)α(z)|.
pub fn equivariance_residual(f: &Poly, alpha: &impl ComplexField, v: &impl ComplexField, sample: &[Complex64]) -> f64 {
    sample
        .iter()
        .map(|&z| (v.eval_at(z) - induced_at(f, alpha, z)).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    /// max |α(z) − RHS| / (1 + Σ|terms|).
    pub residual: f64,
    /// max |α(z) − RHS| without normalization.
    pub residual_abs: f64,
    /// max_S |α| / max |v| over the orbit segments.
    pub ratio: f64,
    /// min_S |DF^N|.
    pub lambda: f64,
    /// max_S Σ_{k<N} 1/|DF^{k+1}|.
    pub a_const: f64,
    /// λA/(λ−1), when λ > 1.
    pub bound: Option<f64>,
}

/// Checks α(z) = α(F^N z)/DF^N(z) − Σ_{k<N} v(F^k z)/DF^{k+1}(z) with v = α∘F − DF·α.
pub fn vertical_telescoping_check(
    f: &Poly,
    alpha: &impl ComplexField,
    n: usize,
    sample: &[Complex64],
) -> Result<TelescopingReport, FieldError> {
    let mut rep = TelescopingReport {
        residual: 0.0,
        residual_abs: 0.0,
        ratio: 0.0,
        lambda: f64::INFINITY,
        a_const: 0.0,
        bound: None,
    };
    let (mut alpha_max, mut v_max) = (0.0f64, 0.0f64);
    for &z in sample {
        let mut w = z;
        let mut d = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        let mut a_sum = 0.0;
        for k in 0..n {
            let vk = induced_at(f, alpha, w);
            v_max = v_max.max(vk.norm());
            let (fw, dfw) = f.eval_c_d(w);
            d *= dfw;
            if d.norm() == 0.0 {
                return Err(FieldError::DerivativeVanishes { k: k + 1, z });
            }
            let term = vk / d;
            sum += term;
            mag += term.norm();
            a_sum += 1.0 / d.norm();
            w = fw;
        }
        let head = alpha.eval_at(w) / d;
        let az = alpha.eval_at(z);
        let err = (az - (head - sum)).norm();
        rep.residual_abs = rep.residual_abs.max(err);
        rep.residual = rep.residual.max(err / (1.0 + head.norm() + mag));
        rep.lambda = rep.lambda.min(d.norm());
        rep.a_const = rep.a_const.max(a_sum);
        alpha_max = alpha_max.max(az.norm());
    }
    rep.ratio = alpha_max / v_max;
    if rep.lambda > 1.0 {
        rep.bound = Some(rep.lambda * rep.a_const / (rep.lambda - 1.0));
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    /// Rows: v(−1) and v(1) as linear forms in (a, b) for β(z) = az + b.
    pub matrix: [[f64; 2]; 2],
    pub determinant: f64,
    pub smallest_singular_value: f64,
    pub solution: [f64; 2],
    pub residual: f64,
    /// Only a = b = 0 solves the system.
    pub unique: bool,
}

/// The linear system forced on β(z) = az + b by requiring β∘f − f'·β to vanish at ±1.
pub fn splitting_system(f: &IntervalMap) -> SplittingReport {
    let p = f.poly();
    let df = p.derivative();
    let row = |x: f64| [p.eval(x) - df.eval(x) * x, 1.0 - df.eval(x)];
    let m = [row(-1.0), row(1.0)];
    let mat = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
    let sv = mat.singular_values();
    let smin = sv.min();
    let smax = sv.max();
    let x = mat.lu().solve(&Vector2::zeros()).unwrap_or_else(Vector2::zeros);
    let residual = (mat * x).norm();
    SplittingReport {
        matrix: m,
        determinant: mat.determinant(),
        smallest_singular_value: smin,
        solution: [x[0], x[1]],
        residual,
        unique: smin > 1e-12 * smax.max(1.0),
    }
}
