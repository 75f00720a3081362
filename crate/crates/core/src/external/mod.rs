//! Abstract external maps: degree-d circle maps with jump discontinuities, their semi-conjugacy
//! to z ↦ ±z^d, Λ sets, Markov structure and the barycentric extension.
//!
//! Everything works on the lift g*: ℝ → ℝ, g*(x + 1) = g*(x) + d. Angles live in [0, 1).

mod arcs;
mod barycentric;
mod markov;
mod semiconj;

pub use arcs::{arcs_nested, lambda_sets, ArcSet, LambdaSets};
pub use barycentric::{barycentric_extension, barycentric_residual, DEFAULT_SAMPLES};
pub use markov::{certify_eventually_periodic, markov_structure, BoundaryCertificate, MarkovStructure};
pub use semiconj::{
    continuous_extension, pruning_equivalent, pruning_set, semiconjugacy, semiconjugacy_with, snap_angle, Angle,
    ContinuousLift, SemiConjugacy, SEMICONJ_GRID,
};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExternalError {
    #[error("invalid circle map specification: {0}")]
    BadSpec(String),
    #[error("jump at {at} has lift size {size}, must lie in (-1, 1)")]
    JumpTooLarge { at: f64, size: f64 },
    #[error("lift is not increasing (slope {slope} near {at})")]
    NotMonotone { at: f64, slope: f64 },
    #[error("real symmetry violated: {0}")]
    SymmetryViolation(String),
    #[error("marked point {0} meets the jump set")]
    QMeetsJumps(f64),
    #[error("marked set is not forward invariant ({0} has no image in the set)")]
    QNotInvariant(f64),
    #[error("neighbourhood of the jump at {0} meets the marked set")]
    NeighborhoodMeetsQ(f64),
    #[error("semi-conjugacy iteration did not converge")]
    NoConvergence,
    #[error("pruning set is not invariant under the linear model ({0})")]
    NotInvariant(f64),
    #[error("arc endpoint {0} lies on a jump")]
    EndpointOnJump(f64),
    #[error("jump at {0} is not covered by the removed arcs")]
    JumpUncovered(f64),
    #[error("boundary point {0} is not certified eventually periodic")]
    BoundaryNotEventuallyPeriodic(f64),
    #[error("no iterate up to 32 expands uniformly on the Λ' samples")]
    NoExpansionFound,
    #[error("Markov property fails: {0}")]
    NotMarkov(String),
    #[error("quadrature under-resolved: doubling the samples moved w by {0:e}")]
    QuadratureUnderresolved(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub at: f64,
    pub size: f64,
}

/// JSON form of a circle map: `s` is a sum of sine terms, "a*sin(k)" meaning a·sin(2πkx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMapSpec {
    pub d: u32,
    pub eps: i8,
    #[serde(default)]
    pub s: String,
    #[serde(default)]
    pub jumps: Vec<Jump>,
    #[serde(default, rename = "Q")]
    pub q: Vec<f64>,
}

/// g*(x) = d·x + (0 or ½) + Σ a_k sin(2πkx) + Σ_j size_j·σ(x − at_j), σ(y) = ⌊y⌋ − y + ½.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMapE {
    pub d: u32,
    pub eps: i8,
    /// (amplitude, frequency) pairs.
    pub sines: Vec<(f64, u32)>,
    /// Sorted by angle.
    pub jumps: Vec<Jump>,
    pub marked: Vec<f64>,
}

fn sawtooth(y: f64) -> f64 {
    y.floor() - y + 0.5
}

/// Parses "0.1*sin(1) - 0.02*sin(3)" into (amplitude, frequency) pairs.
pub fn parse_sines(s: &str) -> Result<Vec<(f64, u32)>, ExternalError> {
    let bad = |m: &str| ExternalError::BadSpec(format!("{m} in {s:?}"));
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() || compact == "0" {
        return Ok(Vec::new());
    }
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = compact.as_bytes();
    for i in 1..=bytes.len() {
        let split = i == bytes.len()
            || ((bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E' | b'*' | b'('));
        if split {
            terms.push(&compact[start..i]);
            start = i;
        }
    }
    let mut out = Vec::new();
    for t in terms {
        let (sign, body) = match t.as_bytes()[0] {
            b'-' => (-1.0, &t[1..]),
            b'+' => (1.0, &t[1..]),
            _ => (1.0, t),
        };
        let (coef, func) = match body.split_once('*') {
            Some((c, f)) => (c.parse::<f64>().map_err(|_| bad("bad coefficient"))?, f),
            None => (1.0, body),
        };
        if func.starts_with("cos(") {
            return Err(ExternalError::SymmetryViolation(format!(
                "cosine term {t:?} breaks real symmetry"
            )));
        }
        let k = func
            .strip_prefix("sin(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| bad("expected a*sin(k)"))?
            .parse::<u32>()
            .map_err(|_| bad("bad frequency"))?;
        if k == 0 {
            return Err(bad("frequency 0"));
        }
        out.push((sign * coef, k));
    }
    Ok(out)
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Distance between angles on ℝ/ℤ.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let t = frac(a - b);
    t.min(1.0 - t)
}

impl CircleMapE {
    pub fn from_spec(spec: &CircleMapSpec) -> Result<Self, ExternalError> {
        let sines = parse_sines(&spec.s)?;
        Self::new(spec.d, spec.eps, sines, spec.jumps.clone(), spec.q.clone())
    }

    pub fn new(
        d: u32,
        eps: i8,
        sines: Vec<(f64, u32)>,
        mut jumps: Vec<Jump>,
        marked: Vec<f64>,
    ) -> Result<Self, ExternalError> {
        if d < 2 {
            return Err(ExternalError::BadSpec(format!("degree {d} < 2")));
        }
        if eps != 1 && eps != -1 {
            return Err(ExternalError::BadSpec(format!("sign {eps} is not ±1")));
        }
        for j in &jumps {
            if !(j.at > 0.0 && j.at < 1.0) {
                return Err(ExternalError::BadSpec(format!("jump angle {} not in (0, 1)", j.at)));
            }
            if !(j.size.abs() < 1.0) || j.size == 0.0 {
                return Err(ExternalError::JumpTooLarge { at: j.at, size: j.size });
            }
        }
        jumps.sort_by(|a, b| a.at.total_cmp(&b.at));
        // real symmetry: the jump set is invariant under x ↦ −x with equal sizes
        for j in &jumps {
            let mirror = jumps
                .iter()
                .any(|k| circle_distance(k.at, -j.at) < 1e-12 && (k.size - j.size).abs() < 1e-12);
            if !mirror {
                return Err(ExternalError::SymmetryViolation(format!(
                    "jump at {} has no mirror at {}",
                    j.at,
                    frac(-j.at)
                )));
            }
        }
        let g = CircleMapE {
            d,
            eps,
            sines,
            jumps,
            marked: marked.iter().map(|&x| frac(x)).collect(),
        };
        g.check_monotone()?;
        for &q in &g.marked {
            if g.jumps.iter().any(|j| circle_distance(q, j.at) < 1e-9) {
                return Err(ExternalError::QMeetsJumps(q));
            }
            let img = g.angle(q);
            if !g.marked.iter().any(|&p| circle_distance(p, img) < 1e-9) {
                return Err(ExternalError::QNotInvariant(q));
            }
        }
        Ok(g)
    }

    /// The pure linear model x ↦ d·x (+½).
    pub fn linear(d: u32, eps: i8) -> Self {
        CircleMapE::new(d, eps, Vec::new(), Vec::new(), Vec::new()).expect("linear model is valid")
    }

    pub fn offset(&self) -> f64 {
        if self.eps == 1 {
            0.0
        } else {
            0.5
        }
    }

    pub fn is_linear(&self) -> bool {
        self.sines.is_empty() && self.jumps.is_empty()
    }

    /// Right-continuous lift.
    pub fn lift(&self, x: f64) -> f64 {
        let n = x.floor();
        self.lift_reduced(x - n) + self.d as f64 * n
    }

    fn lift_reduced(&self, x: f64) -> f64 {
        self.d as f64 * x
            + self.offset()
            + self.smooth(x)
            + self.jumps.iter().map(|j| j.size * sawtooth(x - j.at)).sum::<f64>()
    }

    fn smooth(&self, x: f64) -> f64 {
        self.sines.iter().map(|&(a, k)| a * (TAU * k as f64 * x).sin()).sum()
    }

    /// Derivative of the lift away from jumps.
    pub fn slope(&self, x: f64) -> f64 {
        let jumps: f64 = self.jumps.iter().map(|j| j.size).sum();
        self.d as f64 - jumps
            + self
                .sines
                .iter()
                .map(|&(a, k)| a * TAU * k as f64 * (TAU * k as f64 * x).cos())
                .sum::<f64>()
    }

    pub fn angle(&self, x: f64) -> f64 {
        frac(self.lift(x))
    }

    fn check_monotone(&self) -> Result<(), ExternalError> {
        let jumps: f64 = self.jumps.iter().map(|j| j.size).sum();
        let bound = self.d as f64 - jumps - self.sines.iter().map(|&(a, k)| a.abs() * TAU * k as f64).sum::<f64>();
        if bound > 0.0 {
            return Ok(());
        }
        const N: usize = 1 << 16;
        for i in 0..N {
            let x = i as f64 / N as f64;
            let s = self.slope(x);
            if s <= 0.0 {
                return Err(ExternalError::NotMonotone { at: x, slope: s });
            }
        }
        Ok(())
    }

    /// Monotone pieces of the lift as closed intervals [p0, p1] (p1 may exceed 1); between two
    /// jumps the lift extends continuously to both ends.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        if self.jumps.is_empty() {
            return vec![(0.0, 1.0)];
        }
        let a: Vec<f64> = self.jumps.iter().map(|j| j.at).collect();
        let mut out: Vec<(f64, f64)> = a.windows(2).map(|w| (w[0], w[1])).collect();
        out.push((a[a.len() - 1], a[0] + 1.0));
        out
    }

    /// The lift on a piece, continued to its closed ends.
    pub fn lift_on_piece(&self, piece: (f64, f64), x: f64) -> f64 {
        let mid = 0.5 * (piece.0 + piece.1);
        self.d as f64 * x
            + self.offset()
            + self.smooth(x)
            + self
                .jumps
                .iter()
                .map(|j| j.size * ((mid - j.at).floor() - (x - j.at) + 0.5))
                .sum::<f64>()
    }

    /// Upper bound of |g*'|.
    pub fn lipschitz(&self) -> f64 {
        let jumps: f64 = self.jumps.iter().map(|j| j.size).sum();
        (self.d as f64 - jumps).abs() + self.sines.iter().map(|&(a, k)| a.abs() * TAU * k as f64).sum::<f64>()
    }

    /// SVG graph of the lift on [0, 1) with jumps as breaks.
    pub fn render_lift(&self, samples: usize) -> String {
        use std::fmt::Write;
        let (w, h) = (400.0, 400.0 * self.d as f64 / 2.0);
        let top = self.d as f64 + 1.0;
        let px = |x: f64, y: f64| (x * w, h - (y + 0.5) / (top + 0.5) * h);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n"
        );
        for piece in self.pieces() {
            // draw on [0, 1): a piece wrapping past 1 is shifted back by one period
            let parts = if piece.1 > 1.0 {
                vec![(piece.0, 1.0, 0.0), (1.0, piece.1, 1.0)]
            } else {
                vec![(piece.0, piece.1, 0.0)]
            };
            for (lo, hi, shift) in parts {
                let mut d = String::new();
                for k in 0..=samples {
                    let x = lo + (hi - lo) * k as f64 / samples as f64;
                    let y = self.lift_on_piece(piece, x) - shift * self.d as f64;
                    let (a, b) = px(x - shift, y);
                    let _ = write!(d, "{}{a:.3} {b:.3}", if k == 0 { "M" } else { " L" });
                }
                let _ = writeln!(out, "<path d=\"{d}\" stroke=\"black\" fill=\"none\"/>");
            }
        }
        out.push_str("</svg>\n");
        out
    }
}
