//! Periodic-orbit calculus on negatively curved surfaces.
//!
//! The crate builds closed-geodesic catalogs for a genus-two hyperbolic
//! surface, assembles the flat trace of the geodesic flow as a weighted atomic
//! measure, computes its first variation under metric deformations, and checks
//! the frame-operator identities on the unit tangent bundle.

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod flat_trace;
pub mod fuchsian;
pub mod jet;
pub mod metric;
pub mod par;
pub mod so2;
pub mod variation;

pub use error::{Error, Result};
