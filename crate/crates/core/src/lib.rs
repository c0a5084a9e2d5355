//! Classical magnetic billiards inside strictly convex superellipse tables.
//!
//! A charged particle moves with unit speed inside the table bounded by
//! `|x/a|^p + |y/b|^p = 1`. Without a field it travels on straight chords;
//! with a uniform transverse field of strength `B` it travels on circles of
//! radius `1/|B|` (the Larmor radius). At the wall the tangential velocity
//! component is kept and the normal component is flipped.
//!
//! The crate is organised bottom-up:
//!
//! - [`boundary`]: the table boundary, its normals, polar parametrisation and
//!   arc length.
//! - [`stepper`]: the billiard map on the phase cylinder
//!   `(theta_pos, theta_vel)`.
//! - [`ensemble`]: seeded, order-independent orbit ensembles.
//! - [`analysis`]: invariants and independent oracles (Joachimsthal,
//!   symplectic defect, reversibility, closed-form circle table).
//! - [`output`]: CSV orbit data, metadata and SVG figures.
//! - [`cli`]: presets, geometry resolution and the verification suite used
//!   by the `magbill` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod boundary;
pub mod cli;
pub mod ensemble;
pub mod output;
pub mod stepper;
mod vec2;

pub use boundary::{BoundaryCurve, GeometryError};
pub use ensemble::{EnsembleConfig, OrbitFlags, OrbitRecord};

pub use stepper::{BoundaryState, FieldParams, PhasePoint, StepError};
pub use vec2::Vec2;

/// Default accuracy of the boundary-intersection solver.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
