//! Simulation and analysis of two quadrotors carrying a tethered point-mass
//! payload, flown either in the classic static formation or spinning about
//! the payload's vertical axis so that centrifugal force, not tilted thrust,
//! holds the tethers apart.
//!
//! - [`model`]: parameters, state and command types, frame rotation
//! - [`dynamics`]: three-body equations of motion and the RK4 loop
//! - [`equilibrium`]: equilibrium construction and actuator-disk power
//! - [`lqr`]: rotating-frame linearization and Riccati synthesis
//! - [`control`]: feedforward + LQR feedback law and spin profiles
//! - [`harness`]: flight scenarios, power metering, mode comparison
//! - [`plot`]: SVG charts

pub mod error;
pub mod model;
pub mod dynamics;
pub mod equilibrium;
pub mod lqr;
pub mod control;
pub mod harness;
pub mod plot;

pub use error::{Error, Result};
pub use model::{load_params, rotation_c_to_e, ControlCommand, SystemParams, SystemState, Vec3};
