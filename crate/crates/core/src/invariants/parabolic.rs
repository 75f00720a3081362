//! Defining maps of parabolic strata and their Jacobians.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Poly;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParabolicMapError {
    #[error("Jacobian diagonal entry {index} is {value:e}, below 1e-10")]
    DegenerateJacobian { index: usize, value: f64 },
    #[error("expected one field (saddle-node / period-doubling) or two (pitchfork), got {0}")]
    FieldCount(usize),
    #[error("iterate count must be at least 1")]
    ZeroIterate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicMap {
    pub values: Vec<f64>,
    /// Rows are components of Ψ; columns the parameters followed by x.
    pub jacobian: Vec<Vec<f64>>,
    pub jacobian_fd: Vec<Vec<f64>>,
}

/// n-th iterate of g_t = g + Σ t_i v_i together with ∂/∂t_i of it, as polynomials.
fn iterate_with_tangents(g: &Poly, fields: &[Poly], params: &[f64], n: usize) -> (Poly, Vec<Poly>) {
    let gt = fields
        .iter()
        .zip(params)
        .fold(g.clone(), |acc, (v, &t)| acc.add(&v.scale(t)));
    let dgt = gt.derivative();
    let mut p = Poly::x();
    let mut w: Vec<Poly> = vec![Poly::zero(); fields.len()];
    for _ in 0..n {
        // W_{k+1} = v∘G^k + (G'∘G^k)·W_k
        let dg_at = dgt.compose(&p);
        for (wi, v) in w.iter_mut().zip(fields) {
            *wi = v.compose(&p).add(&dg_at.mul(wi));
        }
        p = gt.compose(&p);
    }
    (p, w)
}

fn evaluate(g: &Poly, fields: &[Poly], n: usize, params: &[f64], x: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (p, w) = iterate_with_tangents(g, fields, params, n);
    let pitchfork = fields.len() == 2;
    let dp = p.derivative();
    let ddp = dp.derivative();
    let mut values = vec![p.eval(x) - x, dp.eval(x) - 1.0];
    let mut rows: Vec<Vec<f64>> = vec![
        w.iter().map(|wi| wi.eval(x)).chain([dp.eval(x) - 1.0]).collect(),
        w.iter()
            .map(|wi| wi.derivative().eval(x))
            .chain([ddp.eval(x)])
            .collect(),
    ];
    if pitchfork {
        values.push(ddp.eval(x));
        rows.push(
            w.iter()
                .map(|wi| wi.nth_derivative(2).eval(x))
                .chain([ddp.derivative().eval(x)])
                .collect(),
        );
    }
    (values, rows)
}

/// Ψ(t, x) = ((g+tv)^n(x) − x, D(g+tv)^n(x) − 1) for one field; with two fields (s, t) the
/// pitchfork map adds the component D²(g+sv+tw)^n(x).
pub fn parabolic_defining_map(
    g: &Poly,
    fields: &[Poly],
    n: usize,
    params: &[f64],
    x: f64,
) -> Result<ParabolicMap, ParabolicMapError> {
    if !(1..=2).contains(&fields.len()) || params.len() != fields.len() {
        return Err(ParabolicMapError::FieldCount(fields.len()));
    }
    if n == 0 {
        return Err(ParabolicMapError::ZeroIterate);
    }
    let (values, jacobian) = evaluate(g, fields, n, params, x);
    let h = 1e-5;
    let k = fields.len() + 1;
    let mut jacobian_fd = vec![vec![0.0; k]; values.len()];
    for col in 0..k {
        let shifted = |sgn: f64| {
            let mut pr = params.to_vec();
            let mut xx = x;
            if col < fields.len() {
                pr[col] += sgn * h;
            } else {
                xx += sgn * h;
            }
            evaluate(g, fields, n, &pr, xx).0
        };
        let (plus, minus) = (shifted(1.0), shifted(-1.0));
        for row in 0..values.len() {
            jacobian_fd[row][col] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    for (i, row) in jacobian.iter().enumerate() {
        if row[i].abs() < 1e-10 {
            return Err(ParabolicMapError::DegenerateJacobian {
                index: i,
                value: row[i],
            });
        }
    }
    Ok(ParabolicMap {
        values,
        jacobian,
        jacobian_fd,
    })
}
