use std::collections::{HashMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{interval_distance, PruneError, PrunedTree};
use crate::orbits::{converges_to, PeriodicOrbitRecord, Stability};
use crate::polymap::IntervalMap;

const ITER_CAP: usize = 2000;

/// One connected component of the basin meeting the real line, as a grid cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinComponent {
    /// Index into the orbit list passed to [`build_kxo`].
    pub attractor: usize,
    pub real_interval: (f64, f64),
    pub bbox: (Complex64, Complex64),
    pub cells: usize,
    pub cell_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KxoTree {
    pub tree: PrunedTree,
    pub basins: Vec<BasinComponent>,
    pub small_basins: bool,
}

fn in_basin(f: &IntervalMap, z: Complex64, orbit: &[f64]) -> bool {
    let p = f.poly();
    let mut w = z;
    for _ in 0..ITER_CAP {
        if orbit.iter().any(|&q| (w - q).norm() < 1e-6) {
            return true;
        }
        w = p.eval_c(w);
        if !(w.norm() < 1e8) {
            return false;
        }
    }
    false
}

/// Attaches the closures of the basin components meeting ℝ, for every attractor that captures
/// a critical point. Fails with `BasinTooLarge` when a component is not compactly inside Ω_a.
pub fn build_kxo(f: &IntervalMap, tree: PrunedTree, orbits: &[PeriodicOrbitRecord]) -> Result<KxoTree, PruneError> {
    let a = f.halfwidth();
    let h = (a / 40.0).max((2.0 + 2.0 * a) / 2000.0);
    let nx = ((1.0 + a) / h).ceil() as i64 + 1;
    let ny = (a / h).ceil() as i64 + 1;
    let at = |i: i64, j: i64| Complex64::new(i as f64 * h, j as f64 * h);
    let mut basins = Vec::new();
    for (k, orbit) in orbits.iter().enumerate() {
        if !matches!(orbit.stability, Stability::Attracting | Stability::SuperAttracting) {
            continue;
        }
        let captures = f
            .critical_points()
            .iter()
            .any(|c| converges_to(f, c.c, &orbit.points, ITER_CAP, 1e-8).is_some());
        if !captures {
            continue;
        }
        let mut member: HashMap<(i64, i64), bool> = HashMap::new();
        let mut test = |i: i64, j: i64| {
            *member
                .entry((i, j))
                .or_insert_with(|| in_basin(f, at(i, j), &orbit.points))
        };
        let mut comp_of: HashMap<(i64, i64), usize> = HashMap::new();
        for i0 in -nx..=nx {
            if comp_of.contains_key(&(i0, 0)) || !test(i0, 0) || at(i0, 0).re.abs() > 1.0 {
                continue;
            }
            let id = basins.len();
            let mut comp = BasinComponent {
                attractor: k,
                real_interval: (f64::INFINITY, f64::NEG_INFINITY),
                bbox: (at(i0, 0), at(i0, 0)),
                cells: 0,
                cell_size: h,
            };
            let mut queue = VecDeque::from([(i0, 0i64)]);
            comp_of.insert((i0, 0), id);
            while let Some((i, j)) = queue.pop_front() {
                let z = at(i, j);
                let reach = interval_distance(z);
                if reach >= a {
                    return Err(PruneError::BasinTooLarge { attractor: k, reach, a });
                }
                comp.cells += 1;
                if j == 0 {
                    comp.real_interval.0 = comp.real_interval.0.min(z.re);
                    comp.real_interval.1 = comp.real_interval.1.max(z.re);
                }
                comp.bbox.0 = Complex64::new(comp.bbox.0.re.min(z.re), comp.bbox.0.im.min(z.im));
                comp.bbox.1 = Complex64::new(comp.bbox.1.re.max(z.re), comp.bbox.1.im.max(z.im));
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let nb = (i + di, j + dj);
                    if nb.0.abs() > nx || nb.1.abs() > ny || comp_of.contains_key(&nb) {
                        continue;
                    }
                    if test(nb.0, nb.1) {
                        comp_of.insert(nb, id);
                        queue.push_back(nb);
                    }
                }
            }
            basins.push(comp);
        }
    }
    Ok(KxoTree {
        tree,
        basins,
        small_basins: true,
    })
}
