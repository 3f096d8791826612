//! Boundary layers and admissible boundary values for one-dimensional
//! hyperbolic conservation laws posed on the quarter plane `x > 0, t > 0`.
//!
//! The crate is organised bottom-up:
//!
//! * [`systems`] defines the conservation laws (flux, Jacobian, eigenstructure,
//!   entropy pairs, viscosity matrix).
//! * [`riemann`] solves Riemann problems and provides the trace `R(v, w)` at
//!   `x/t = 0+` together with the Godunov flux.
//! * [`schemes`] marches the viscous, Lax-Friedrichs, flux-splitting and
//!   Godunov approximations with a boundary datum imposed at `x = 0`.
//! * [`layers`] computes continuous and discrete boundary-layer profiles and
//!   the stable-manifold data at a limit state.
//! * [`admissible`] builds the sets of admissible boundary traces and the
//!   inequality-based membership tests.
//! * [`diagnostics`] extracts boundary traces and rescaled profiles from
//!   numerical runs.
//! * [`verify`] bundles the invariant checks into a runnable suite.

pub mod admissible;
pub mod diagnostics;
pub mod error;
pub mod layers;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod riemann;
pub mod roots;
pub mod schemes;
pub mod systems;
pub mod tolerances;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Mat, State};
pub use systems::SystemModel;
