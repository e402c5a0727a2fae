//! Necessary-condition checks for extending a first-order flex of a closed
//! triangulated polyhedron to a genuine flex.
//!
//! Two families of conditions are implemented:
//!
//! * Dehn-invariant conditions ([`dehn`]): for every element of a rational
//!   basis of the edge lengths, a linear equation in the vertex velocities
//!   built from per-edge dihedral-angle rates ([`geometry`]).
//! * Minor-stationarity conditions ([`minors`]): derivatives of minors of the
//!   rigidity matrix ([`flex`]) along the flex.
//!
//! Both are cross-checked by finite differences and numeric continuation in
//! [`oracle`].

pub mod certify;
pub mod dehn;
pub mod error;
pub mod fixtures;
pub mod flex;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod minors;
pub mod oracle;
pub mod par;
pub mod rational;

pub use error::*;

/// Positions and velocities.
pub type Vec3 = nalgebra::Vector3<f64>;
