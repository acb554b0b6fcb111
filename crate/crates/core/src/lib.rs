//! Fast QBX layer-potential evaluation in two dimensions.
//!
//! The crate evaluates Laplace single- and double-layer potentials on and
//! near smooth closed curves with an FMM whose interaction lists are aware of
//! QBX expansion disks, so every expansion ends up with a provable accuracy
//! bound that depends only on the orders.

pub mod expansions;
pub mod geometry;
pub mod tree;
pub mod ilists;
pub mod driver;
pub mod bounds;

pub use expansions::{Expansion, ExpansionError, ExpansionKind, SourceCharge};
pub use geometry::{Curve, Discretization, GeometryError, QbxCenter, Side};
