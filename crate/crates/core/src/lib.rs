//! Mass renormalization of a mirror moving through a 1+1 dimensional massless
//! scalar field.
//!
//! The crate computes the kernel built from null-coordinate separations along
//! a prescribed worldline, integrates it against an exponential damping factor
//! to obtain the mass shift `mu(tau)` and its rate, splits the rate into the
//! fluxes radiated to either side, and closes the loop with a self-consistent
//! evolution of the mirror's rapidity.

pub mod dsl;
pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod massshift;
pub mod oracle;
pub mod quadrature;
pub mod taylor;
pub mod trajectory;

pub use error::{QuadratureError, TrajectoryError};
pub use quadrature::{IntegralResult, QuadratureSpec};
pub use trajectory::{Hyperbolic, RapidityJet, Trajectory, Uniform, VelocityStep};
