//! Airborne attitude dynamics and control for four-wheel independent drive
//! and steering (4WIDS) robots.
//!
//! While the robot is in ballistic flight, the drive wheels act as reaction
//! wheels. Steering the diagonal wheel pairs in opposite directions (the
//! `alpha` submovement) trades roll authority against pitch authority, and
//! steering them together (`beta`) rotates the authority axes. This crate
//! provides:
//!
//! - [`kinematics`]: the submovement parametrization, torque Jacobians,
//!   manipulability and torque allocation,
//! - [`dynamics`]: closed-form rotational equations of motion and an
//!   independent Newton–Euler oracle,
//! - [`simulation`]: a fixed-step RK4 integrator with IMU model and touchdown
//!   detection,
//! - [`controller`]: the freefall state machine and PD attitude controller,
//! - [`scenario`] and [`config`]: file-driven scenarios, CSV telemetry and
//!   batch comparisons.
//!
//! Batch work (sweeps, comparisons, oracle sampling) runs on rayon when the
//! `parallel` feature is enabled and falls back to sequential iteration
//! otherwise; see [`batch`].

pub mod batch;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod params;
pub mod scenario;
pub mod simulation;
pub mod state;

pub use error::{Error, Result};
pub use params::{RobotParams, ValidationReport};
pub use state::{BodyState, BodyTorque, SteeringState, SubmovementParams, TorqueCommand};
