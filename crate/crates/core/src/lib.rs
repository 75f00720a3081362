//! Pruned Julia sets of real polynomial interval maps, their external circle-map models, and
//! the conjugacy invariants Ψ_H / Ψ_T.

pub mod external;
pub mod invariants;
pub mod koenigs;
pub mod orbits;
pub mod poly;
pub mod polymap;
pub mod prunedtree;
pub mod tolerances;

pub use num_complex::Complex64;
pub use poly::Poly;
pub use polymap::{CriticalPoint, IntervalMap, PolyMapError, PolyVectorField};
