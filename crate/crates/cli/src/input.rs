use std::path::Path;

use num_complex::Complex64;
use prunedjulia::external::{ArcSet, CircleMapE, CircleMapSpec};
use prunedjulia::tolerances::Tolerances;
use prunedjulia::IntervalMap;
use serde::Deserialize;

use crate::CliError;

/// An interval-map file: the map plus optional pruning data for tree commands.
#[derive(Debug, Clone, Deserialize)]
pub struct IntervalFile {
    pub coeffs: Vec<f64>,
    pub a: f64,
    #[serde(default, rename = "J")]
    pub j: Vec<(f64, f64)>,
    #[serde(default)]
    pub depth: Option<usize>,
}

/// Extra fields a circle-map file may carry next to the map itself.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct CircleExtras {
    #[serde(default, rename = "Yhat")]
    pub yhat: Vec<(f64, f64)>,
    #[serde(default, rename = "B0")]
    pub b0: Vec<(f64, f64)>,
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
}

pub enum MapFile {
    Interval(IntervalFile),
    Circle(CircleMapSpec, CircleExtras),
}

pub fn load(path: &Path) -> Result<MapFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Validation(format!("{}: {e}", path.display()));
    if value.get("coeffs").is_some() {
        Ok(MapFile::Interval(serde_json::from_value(value).map_err(bad)?))
    } else if value.get("d").is_some() {
        let spec = serde_json::from_value(value.clone()).map_err(bad)?;
        let extras = serde_json::from_value(value).map_err(bad)?;
        Ok(MapFile::Circle(spec, extras))
    } else {
        Err(CliError::Validation(format!(
            "{}: expected an interval map {{coeffs, a}} or a circle map {{d, eps, ...}}",
            path.display()
        )))
    }
}

pub fn interval_map(path: Option<&Path>, tol: &Tolerances) -> Result<(IntervalMap, IntervalFile), CliError> {
    let path = path.ok_or_else(|| CliError::Validation("--map is required".into()))?;
    match load(path)? {
        MapFile::Interval(file) => {
            let f = IntervalMap::with_tolerances(file.coeffs.clone(), file.a, tol)?;
            Ok((f, file))
        }
        MapFile::Circle(..) => Err(CliError::Validation(format!(
            "{} is a circle map; this command needs an interval map",
            path.display()
        ))),
    }
}

pub fn circle_map(path: Option<&Path>) -> Result<(CircleMapE, CircleExtras), CliError> {
    let path = path.ok_or_else(|| CliError::Validation("--map is required".into()))?;
    match load(path)? {
        MapFile::Circle(spec, extras) => Ok((CircleMapE::from_spec(&spec)?, extras)),
        MapFile::Interval(_) => Err(CliError::Validation(format!(
            "{} is an interval map; this command needs a circle map",
            path.display()
        ))),
    }
}

fn number(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Validation(format!("not a number: {s:?}")))
}

/// "lo,hi;lo,hi" → intervals.
pub fn intervals(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (lo, hi) = p
                .split_once(',')
                .ok_or_else(|| CliError::Validation(format!("expected \"lo,hi\", got {p:?}")))?;
            let (lo, hi) = (number(lo)?, number(hi)?);
            if !(lo < hi) {
                return Err(CliError::Validation(format!("empty interval ({lo}, {hi})")));
            }
            Ok((lo, hi))
        })
        .collect()
}

/// "re,im;re,im" → points.
pub fn points(s: &str) -> Result<Vec<Complex64>, CliError> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (re, im) = p
                .split_once(',')
                .ok_or_else(|| CliError::Validation(format!("expected \"re,im\", got {p:?}")))?;
            Ok(Complex64::new(number(re)?, number(im)?))
        })
        .collect()
}

/// "1, 0, -2" → coefficients.
pub fn coefficients(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(number).collect()
}

pub fn arcs(arcs: &[(f64, f64)]) -> ArcSet {
    ArcSet::new(arcs.iter().copied())
}
