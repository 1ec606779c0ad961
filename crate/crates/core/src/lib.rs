//! Billiards in polyhedral cones.
//!
//! A point particle moves uniformly inside a cone `Q = { y : (y, a_i) >= 0 }`
//! and reflects specularly off its walls. This crate computes the geometric
//! constants of such cones (minimal Gram eigenvalue, inscribed ball, capacity,
//! charges, nondegeneracy constant), assembles the known collision-count
//! bounds, simulates trajectories exactly and audits them against the bounds.
//! Elastic hard balls on a line are provided as an independent check through
//! the mass-weighted isomorphism onto a cone billiard.

pub mod cone;
pub mod constants;
pub mod error;
pub mod hardball;
pub mod harness;
pub mod linalg;
pub mod simulator;
pub mod wedge;

pub use cone::{contains, gram, make_cone, min_eigenvalue, reduce_to_span, ConeSpec, GramMatrix};
pub use constants::{bounds_report, BoundsReport};
pub use error::{Error, Result};
pub use simulator::{audit, run, BilliardState, TrajectoryRecord};
