use serde::{Deserialize, Serialize};

use super::{circle_distance, frac, CircleMapE, ExternalError};

/// Open arcs overlapping by less than this are not merged, so shared endpoints survive; closed
/// arcs shorter than it are dropped.
const ARC_EPS: f64 = 1e-10;

/// A finite union of open arcs on ℝ/ℤ, as lift intervals (lo, hi) with lo ∈ [0, 1) and
/// hi − lo ≤ 1, sorted and pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArcSet {
    arcs: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn new(arcs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut out: Vec<(f64, f64)> = arcs
            .into_iter()
            .filter(|&(lo, hi)| hi - lo > ARC_EPS)
            .map(|(lo, hi)| {
                let len = (hi - lo).min(1.0);
                let l = frac(lo);
                (l, l + len)
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
        for (lo, hi) in out {
            match merged.last_mut() {
                Some(last) if lo < last.1 - ARC_EPS || lo <= last.0 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        // the last arc may run past 1 into the first ones
        while merged.len() > 1 {
            let last = merged[merged.len() - 1];
            let first = merged[0];
            if first.0 + 1.0 < last.1 - ARC_EPS {
                merged.remove(0);
                let n = merged.len();
                merged[n - 1].1 = last.1.max(first.1 + 1.0);
            } else {
                break;
            }
        }
        if merged.len() == 1 && merged[0].1 - merged[0].0 >= 1.0 - ARC_EPS {
            return ArcSet { arcs: vec![(0.0, 1.0)] };
        }
        ArcSet { arcs: merged }
    }

    pub fn empty() -> Self {
        ArcSet::default()
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.arcs.len() == 1 && self.arcs[0].1 - self.arcs[0].0 >= 1.0
    }

    pub fn contains(&self, x: f64) -> bool {
        let x = frac(x);
        self.arcs
            .iter()
            .any(|&(lo, hi)| (x > lo && x < hi) || (x + 1.0 > lo && x + 1.0 < hi))
    }

    pub fn union(&self, other: &ArcSet) -> ArcSet {
        ArcSet::new(self.arcs.iter().chain(other.arcs.iter()).copied())
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|&(lo, hi)| hi - lo).sum()
    }

    pub fn endpoints(&self) -> Vec<f64> {
        self.arcs.iter().flat_map(|&(lo, hi)| [lo, frac(hi)]).collect()
    }

    /// Closed complementary arcs; the full circle is [0, 1].
    pub fn complement(&self) -> Vec<(f64, f64)> {
        if self.arcs.is_empty() {
            return vec![(0.0, 1.0)];
        }
        if self.is_full() {
            return Vec::new();
        }
        let n = self.arcs.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let hi = self.arcs[i].1;
            let next = if i + 1 < n {
                self.arcs[i + 1].0
            } else {
                self.arcs[0].0 + 1.0
            };
            if next - hi > ARC_EPS {
                let l = frac(hi);
                out.push((l, l + (next - hi)));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// g^{−1} of the set, by inverting the lift on each monotone piece.
    pub fn preimage(&self, g: &CircleMapE) -> ArcSet {
        ArcSet::new(self.arcs.iter().flat_map(|&arc| preimage_arc(g, arc)))
    }
}

/// Invert y = g*(x) on a piece, for y in [g*(p0), g*(p1)].
pub(super) fn invert_on_piece(g: &CircleMapE, piece: (f64, f64), y: f64) -> f64 {
    let (mut lo, mut hi) = piece;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g.lift_on_piece(piece, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Preimage components of one arc (open or closed; endpoints are handled the same way).
pub(super) fn preimage_arc(g: &CircleMapE, (lo, hi): (f64, f64)) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for piece in g.pieces() {
        let y0 = g.lift_on_piece(piece, piece.0);
        let y1 = g.lift_on_piece(piece, piece.1);
        let m0 = (y0 - hi).floor() as i64;
        let m1 = (y1 - lo).ceil() as i64;
        for m in m0..=m1 {
            let a = (lo + m as f64).max(y0);
            let b = (hi + m as f64).min(y1);
            if b - a <= 0.0 {
                continue;
            }
            let xa = if a <= y0 { piece.0 } else { invert_on_piece(g, piece, a) };
            let xb = if b >= y1 { piece.1 } else { invert_on_piece(g, piece, b) };
            if xb > xa {
                out.push((xa, xb));
            }
        }
    }
    out
}

/// Λ_N (avoiding Ŷ) and Λ'_N (avoiding Ŷ ∪ B̂₀) as closed arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSets {
    pub n: usize,
    pub lambda: Vec<(f64, f64)>,
    pub lambda_prime: Vec<(f64, f64)>,
    pub removed: ArcSet,
    pub removed_prime: ArcSet,
}

impl LambdaSets {
    pub fn in_lambda(&self, x: f64) -> bool {
        !self.removed.contains(x)
    }

    pub fn in_lambda_prime(&self, x: f64) -> bool {
        !self.removed_prime.contains(x)
    }
}

/// ∪_{n ≤ N} g^{−n}(U), as U ∪ g^{−1}(U ∪ g^{−1}(…)).
fn backward_union(g: &CircleMapE, u: &ArcSet, n: usize) -> ArcSet {
    let mut acc = u.clone();
    for _ in 0..n {
        acc = u.union(&acc.preimage(g));
    }
    acc
}

pub fn lambda_sets(g: &CircleMapE, yhat: &ArcSet, b0: &ArcSet, n: usize) -> Result<LambdaSets, ExternalError> {
    for e in yhat.endpoints().into_iter().chain(b0.endpoints()) {
        if g.jumps.iter().any(|j| circle_distance(j.at, e) < ARC_EPS) {
            return Err(ExternalError::EndpointOnJump(e));
        }
    }
    if let Some(j) = g.jumps.iter().find(|j| !yhat.contains(j.at)) {
        return Err(ExternalError::JumpUncovered(j.at));
    }
    let removed = backward_union(g, yhat, n);
    let removed_prime = backward_union(g, &yhat.union(b0), n);
    Ok(LambdaSets {
        n,
        lambda: removed.complement(),
        lambda_prime: removed_prime.complement(),
        removed,
        removed_prime,
    })
}

/// Every closed arc of `inner` lies in one of `outer`, up to `tol`.
pub fn arcs_nested(inner: &[(f64, f64)], outer: &[(f64, f64)], tol: f64) -> bool {
    inner.iter().all(|&(lo, hi)| {
        outer
            .iter()
            .any(|&(a, b)| [-1.0, 0.0, 1.0].iter().any(|s| lo + s >= a - tol && hi + s <= b + tol))
    })
}
