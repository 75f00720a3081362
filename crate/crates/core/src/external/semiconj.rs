use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{circle_distance, frac, CircleMapE, ExternalError};

pub const SEMICONJ_GRID: usize = 1 << 14;
const MAX_ITER: usize = 200;

/// g_*: the lift with every jump replaced by linear interpolation across (at − r, at + r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousLift {
    pub map: CircleMapE,
    pub radius: f64,
}

impl ContinuousLift {
    pub fn d(&self) -> u32 {
        self.map.d
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = x.floor();
        self.eval_reduced(x - n) + self.map.d as f64 * n
    }

    /// g_* on [0, 1); no window contains 0.
    fn eval_reduced(&self, x: f64) -> f64 {
        let r = self.radius;
        for j in &self.map.jumps {
            let m = (x - j.at).round();
            let c = j.at + m;
            if (x - c).abs() < r {
                let (y0, y1) = (self.map.lift(c - r), self.map.lift(c + r));
                return y0 + (y1 - y0) * (x - (c - r)) / (2.0 * r);
            }
        }
        self.map.lift(x)
    }

    /// Lift length of the image of each filled window.
    pub fn window_images(&self) -> Vec<f64> {
        self.map
            .jumps
            .iter()
            .map(|j| self.map.lift(j.at + self.radius) - self.map.lift(j.at - self.radius))
            .collect()
    }
}

pub fn continuous_extension(g: &CircleMapE, radius: f64) -> Result<ContinuousLift, ExternalError> {
    if g.jumps.is_empty() {
        return Ok(ContinuousLift {
            map: g.clone(),
            radius: 0.0,
        });
    }
    if !(radius > 0.0) {
        return Err(ExternalError::InvalidInput(format!("radius {radius} must be positive")));
    }
    for j in &g.jumps {
        if g.marked.iter().any(|&q| circle_distance(q, j.at) <= radius) {
            return Err(ExternalError::NeighborhoodMeetsQ(j.at));
        }
        if j.at - radius <= 0.0 || j.at + radius >= 1.0 {
            return Err(ExternalError::InvalidInput(format!(
                "window around {} contains angle 0",
                j.at
            )));
        }
    }
    for w in g.jumps.windows(2) {
        if w[1].at - w[0].at <= 2.0 * radius {
            return Err(ExternalError::InvalidInput("jump windows overlap".into()));
        }
    }
    let ext = ContinuousLift { map: g.clone(), radius };
    for (j, len) in g.jumps.iter().zip(ext.window_images()) {
        if !(len > 0.0) {
            return Err(ExternalError::NotMonotone { at: j.at, slope: len });
        }
        if !(len < 1.0) {
            return Err(ExternalError::InvalidInput(format!(
                "window around {} has image length {len} ≥ 1",
                j.at
            )));
        }
    }
    Ok(ext)
}

/// h with h∘g_* = L_ε∘h, L_ε(x) = d·x (+½), sampled on a uniform grid of [0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiConjugacy {
    pub d: u32,
    pub eps: i8,
    pub grid: Vec<f64>,
    pub iterations: usize,
    #[serde(skip)]
    lift: Option<ContinuousLift>,
}

fn offset(eps: i8) -> f64 {
    if eps == 1 {
        0.0
    } else {
        0.5
    }
}

/// An orbit point of the lift kept as integer part plus fraction, so the fraction keeps full
/// precision however far the lift has travelled.
#[derive(Clone, Copy)]
struct Split {
    k: f64,
    t: f64,
}

impl Split {
    fn new(x: f64) -> Self {
        let k = x.floor();
        Split { k, t: x - k }
    }

    fn step(self, g: &ContinuousLift) -> Self {
        let v = g.eval_reduced(self.t);
        let m = v.floor();
        Split {
            k: g.d() as f64 * self.k + m,
            t: v - m,
        }
    }

    /// L_ε^{−n} of the point.
    fn pull(self, d: u32, eps: i8, n: usize) -> f64 {
        let dn = (d as f64).powi(n as i32);
        let off = offset(eps) * (dn - 1.0) / (d as f64 - 1.0);
        (self.k - off) / dn + self.t / dn
    }
}

fn limit_at(g: &ContinuousLift, eps: i8, x: f64, n: usize) -> f64 {
    let mut y = Split::new(x);
    for _ in 0..n {
        y = y.step(g);
    }
    y.pull(g.d(), eps, n)
}

impl SemiConjugacy {
    /// Pointwise limit, or grid interpolation when built without the lift.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.lift {
            Some(g) => limit_at(g, self.eps, x, self.iterations),
            None => self.interpolate(x),
        }
    }

    /// Linear interpolation of the grid, extended by h(x + 1) = h(x) + 1.
    pub fn interpolate(&self, x: f64) -> f64 {
        let m = self.grid.len();
        let base = x.floor();
        let t = (x - base) * m as f64;
        let i = (t.floor() as usize).min(m - 1);
        let f = t - i as f64;
        let a = self.grid[i];
        let b = if i + 1 < m {
            self.grid[i + 1]
        } else {
            self.grid[0] + 1.0
        };
        base + a + (b - a) * f
    }

    pub fn is_monotone(&self) -> bool {
        self.grid.windows(2).all(|w| w[1] >= w[0]) && self.grid[self.grid.len() - 1] <= self.grid[0] + 1.0
    }

    /// max over the grid of |h(g_*(x)) − L_ε(h(x))| on the circle.
    pub fn residual(&self, g: &ContinuousLift) -> f64 {
        let m = self.grid.len();
        let off = offset(self.eps);
        (0..m)
            .map(|i| {
                let x = i as f64 / m as f64;
                let lhs = self.eval(g.eval(x));
                let rhs = g.d() as f64 * self.grid[i] + off;
                circle_distance(lhs, rhs)
            })
            .fold(0.0, f64::max)
    }
}

pub fn semiconjugacy(g: &ContinuousLift, eps: i8) -> Result<SemiConjugacy, ExternalError> {
    semiconjugacy_with(g, eps, SEMICONJ_GRID, 1e-10)
}

pub fn semiconjugacy_with(g: &ContinuousLift, eps: i8, m: usize, tol: f64) -> Result<SemiConjugacy, ExternalError> {
    let mut ys: Vec<Split> = (0..m).map(|i| Split::new(i as f64 / m as f64)).collect();
    let mut prev: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
    for n in 1..=MAX_ITER {
        let mut diff = 0.0f64;
        for (y, p) in ys.iter_mut().zip(prev.iter_mut()) {
            *y = y.step(g);
            let h = y.pull(g.d(), eps, n);
            diff = diff.max((h - *p).abs());
            *p = h;
        }
        if diff < tol {
            return Ok(SemiConjugacy {
                d: g.d(),
                eps,
                grid: prev,
                iterations: n,
                lift: Some(g.clone()),
            });
        }
    }
    Err(ExternalError::NoConvergence)
}

/// An angle in [0, 1), with its exact value when it snapped to a rational.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub value: f64,
    pub exact: Option<(i64, i64)>,
}

impl Angle {
    pub fn ratio(&self) -> Option<Ratio<i64>> {
        self.exact.map(|(p, q)| Ratio::new(p, q))
    }
}

/// Best rational approximation p/q with q ≤ qmax by continued fractions; `None` when it misses x
/// by more than `tol`.
pub fn snap_angle(x: f64, qmax: i64, tol: f64) -> Option<Ratio<i64>> {
    let x = frac(x);
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    let mut best = Ratio::new(0, 1);
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > qmax {
            break;
        }
        best = Ratio::new(p2, q2);
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let f = r - a as f64;
        if f < 1e-15 {
            break;
        }
        r = 1.0 / f;
    }
    let v = *best.numer() as f64 / *best.denom() as f64;
    if circle_distance(v, x) <= tol {
        let b = if best == Ratio::new(1, 1) {
            Ratio::new(0, 1)
        } else {
            best
        };
        Some(b)
    } else {
        None
    }
}

fn linear_image(x: Ratio<i64>, d: u32, eps: i8) -> Ratio<i64> {
    let y = x * d as i64 + if eps == 1 { Ratio::new(0, 1) } else { Ratio::new(1, 2) };
    y - y.floor()
}

/// Q = h(Q_g), snapped to rationals, checked forward invariant under L_ε.
pub fn pruning_set(g: &CircleMapE, h: &SemiConjugacy) -> Result<Vec<Angle>, ExternalError> {
    let mut q: Vec<Angle> = g
        .marked
        .iter()
        .map(|&x| {
            let v = frac(h.eval(x));
            match snap_angle(v, 1 << 16, 1e-7) {
                Some(r) => Angle {
                    value: *r.numer() as f64 / *r.denom() as f64,
                    exact: Some((*r.numer(), *r.denom())),
                },
                None => Angle { value: v, exact: None },
            }
        })
        .collect();
    q.sort_by(|a, b| a.value.total_cmp(&b.value));
    q.dedup_by(|a, b| circle_distance(a.value, b.value) < 1e-7);
    for a in &q {
        let ok = match a.ratio() {
            Some(r) => {
                let img = linear_image(r, g.d, g.eps);
                q.iter().any(|b| b.ratio() == Some(img))
            }
            None => {
                let img = frac(g.d as f64 * a.value + offset(g.eps));
                q.iter().any(|b| circle_distance(b.value, img) < 1e-7)
            }
        };
        if !ok {
            return Err(ExternalError::NotInvariant(a.value));
        }
    }
    Ok(q)
}

pub fn pruning_equivalent(q1: &[Angle], d1: u32, eps1: i8, q2: &[Angle], d2: u32, eps2: i8) -> bool {
    let covers = |a: &[Angle], b: &[Angle]| {
        a.iter()
            .all(|x| b.iter().any(|y| circle_distance(x.value, y.value) < 1e-7))
    };
    d1 == d2 && eps1 == eps2 && covers(q1, q2) && covers(q2, q1)
}
