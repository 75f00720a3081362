use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{interval_distance, Arc, PrunedTree};
use crate::polymap::IntervalMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub monotone: bool,
    pub symmetric: bool,
    pub connected: bool,
    pub forward_invariant: bool,
    pub in_domain: bool,
    pub failures: Vec<String>,
}

impl TreeReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Sampled Hausdorff distance between two polylines.
fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .map(|&z| {
                y.windows(2)
                    .map(|w| super::segment_distance(z, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

pub fn check_tree_invariants(f: &IntervalMap, tree: &PrunedTree) -> TreeReport {
    let mut failures = Vec::new();
    let live: BTreeSet<usize> = tree.generations.iter().flatten().copied().collect();
    let gen_of = |id: usize| tree.arcs[id].generation;

    // monotone nesting: every arc sealed exactly once, in its own generation
    let mut monotone = live.len() == tree.generations.iter().map(Vec::len).sum::<usize>();
    for (n, ids) in tree.generations.iter().enumerate() {
        for &id in ids {
            if gen_of(id) != n {
                monotone = false;
                failures.push(format!("arc {id} listed in K_{n} but has generation {}", gen_of(id)));
            }
            if let Some(p) = tree.arcs[id].parent {
                if !live.contains(&p) || gen_of(p) + 1 != n {
                    monotone = false;
                    failures.push(format!("arc {id} has parent {p} outside K_{}", n - 1));
                }
            }
        }
    }
    if !monotone && failures.is_empty() {
        failures.push("an arc appears in more than one generation".into());
    }

    let mut symmetric = true;
    for &id in &live {
        let arc = &tree.arcs[id];
        let conj: Vec<Complex64> = arc.points.iter().map(|z| z.conj()).collect();
        let matches = |other: &Arc| hausdorff(&conj, &other.points) < 1e-9;
        let ok = (live.contains(&arc.conjugate) && matches(&tree.arcs[arc.conjugate]))
            || live.iter().any(|&j| matches(&tree.arcs[j]));
        if !ok {
            symmetric = false;
            failures.push(format!("arc {id} has no conjugate"));
        }
    }

    let mut connected = true;
    let mut forward_invariant = true;
    let mut in_domain = true;
    let p = f.poly();
    for &id in &live {
        let arc = &tree.arcs[id];
        let n = arc.generation;
        let start = arc.start();
        let attach = if n == 1 {
            interval_distance(start)
        } else {
            tree.distance(start, n - 1)
        };
        let tol = 5.0 * arc.step();
        if attach > tol {
            connected = false;
            failures.push(format!("arc {id} is detached from K_{} by {attach:e}", n - 1));
        }
        for &z in &arc.points {
            let d = interval_distance(z);
            if d >= tree.a {
                in_domain = false;
                failures.push(format!("arc {id} leaves the domain at {z}"));
                break;
            }
        }
        // f(K_{n+1} \ K_n) lands on K_n
        let image_tol = match arc.parent {
            Some(pid) => 5.0 * tree.arcs[pid].step(),
            None => 1e-9,
        };
        for &z in &arc.points {
            let w = p.eval_c(z);
            let d = match arc.parent {
                Some(pid) => {
                    let d = tree.arcs[pid].distance(w);
                    if d < image_tol {
                        d
                    } else {
                        tree.distance(w, n - 1)
                    }
                }
                None => interval_distance(w),
            };
            if d >= image_tol.max(1e-9) {
                forward_invariant = false;
                failures.push(format!("f maps a point of arc {id} to distance {d:e} from K_{}", n - 1));
                break;
            }
        }
    }
    TreeReport {
        monotone,
        symmetric,
        connected,
        forward_invariant,
        in_domain,
        failures,
    }
}
