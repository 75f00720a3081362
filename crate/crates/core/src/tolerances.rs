//! Numeric tolerances shared across modules, overridable by name.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// |f(±1) ∓ 1| accepted before exact normalization.
    pub boundary: f64,
    /// Relative threshold for a vanishing derivative.
    pub derivative: f64,
    /// Residual |f^r(p) − p| for a periodic point.
    pub periodic: f64,
    /// | |λ| − 1 | below which an orbit is parabolic.
    pub parabolic: f64,
    /// Distance at which an orbit "hits" a critical or periodic point.
    pub orbit_hit: f64,
    /// Distance to an attracting orbit certifying basin membership.
    pub basin: f64,
    /// Relative change ending a Koenigs limit.
    pub koenigs: f64,
    /// Residual target of the barycentric Newton solve.
    pub barycentric: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            boundary: 1e-12,
            derivative: 1e-9,
            periodic: 1e-10,
            parabolic: 1e-8,
            orbit_hit: 1e-9,
            basin: 1e-6,
            koenigs: 1e-12,
            barycentric: 1e-10,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ToleranceError {
    #[error("unknown tolerance `{0}`")]
    Unknown(String),
    #[error("tolerance `{name}` must be positive and finite, got {value}")]
    Invalid { name: String, value: f64 },
}

impl Tolerances {
    pub const NAMES: [&'static str; 8] = [
        "boundary",
        "derivative",
        "periodic",
        "parabolic",
        "orbit_hit",
        "basin",
        "koenigs",
        "barycentric",
    ];

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ToleranceError> {
        if !(value.is_finite() && value > 0.0) {
            return Err(ToleranceError::Invalid {
                name: name.to_string(),
                value,
            });
        }
        let slot = match name {
            "boundary" => &mut self.boundary,
            "derivative" => &mut self.derivative,
            "periodic" => &mut self.periodic,
            "parabolic" => &mut self.parabolic,
            "orbit_hit" => &mut self.orbit_hit,
            "basin" => &mut self.basin,
            "koenigs" => &mut self.koenigs,
            "barycentric" => &mut self.barycentric,
            _ => return Err(ToleranceError::Unknown(name.to_string())),
        };
        *slot = value;
        Ok(())
    }
}
