//! Discrete machinery for boundary regularity of 2D elliptic systems with
//! skew-symmetric structure `−Δu = Ω·∇u + e` on the unit disc.

// Parameter guards are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over axes and components read closer to the formulas.
#![allow(clippy::needless_range_loop)]

pub mod elliptic;
pub mod error;
pub mod field;
pub mod gauge;
pub mod grid;
pub mod hardy_bmo;
pub mod measure;
pub mod morrey;
pub mod random;
pub mod snapshot;
pub mod sparse;
pub mod systems;

pub use error::{Error, Result};
pub use field::{Field, Shape, Structure};
pub use grid::{build_grid, Disc, DiscGrid, NodeClass};
