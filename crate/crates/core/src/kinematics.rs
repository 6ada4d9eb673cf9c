//! Steering submovements, torque Jacobians, manipulability and torque
//! allocation.
//!
//! Wheel layout (body x forward, z up):
//!
//! ```text
//!        +x
//!   2 ---+--- 1      S1 = ( a/2, -b/2)   S2 = ( a/2,  b/2)
//!   |    B    |      S3 = (-a/2,  b/2)   S4 = (-a/2, -b/2)
//!   3 ---+--- 4
//! ```
//!
//! Knuckle `i` is rotated about body z by `delta_i`, plus `pi` for wheels 2
//! and 3. The knuckle x axis is the rolling direction, y is the wheel axle
//! and z is the steering axis. Each wheel centre sits `c` from its steering
//! axis along the negative knuckle y axis, i.e. outboard in the neutral pose.
//!
//! Drive torques use a drive axis `n_i = s_i * y_i` with `s = (-1, 1, -1, 1)`:
//! in the neutral pose a positive torque rolls the front wheels forward and
//! the rear wheels backward, so the pair-antisymmetric command
//! `(tau_1, tau_2, -tau_1, -tau_2)` with `tau_1 = tau_2 > 0` rolls all four
//! wheels forward. The base receives the reaction `-tau_i * n_i`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Matrix3x4, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::params::RobotParams;
use crate::state::{BodyTorque, SteeringState, SubmovementParams, TorqueCommand};
use crate::{Error, Result};

/// `|det J_tau'|` below which allocation refuses to invert.
pub const ALLOCATION_SINGULARITY_TOL: f64 = 1e-6;
/// `|det J_tau'|` below which a manipulability report is flagged singular.
pub const REPORT_SINGULARITY_TOL: f64 = 1e-9;

pub const DRIVE_SIGN: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];
const KNUCKLE_OFFSET: [f64; 4] = [0.0, PI, PI, 0.0];

/// Orthonormal knuckle basis expressed in body axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelFrame {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
}

pub fn wheel_frame(wheel: usize, delta: f64) -> WheelFrame {
    let (s, c) = (delta + KNUCKLE_OFFSET[wheel]).sin_cos();
    WheelFrame {
        x: Vector3::new(c, s, 0.0),
        y: Vector3::new(-s, c, 0.0),
        z: Vector3::z(),
    }
}

/// Positive spin axis of wheel `wheel` in body axes.
pub fn drive_axis(wheel: usize, delta: f64) -> Vector3<f64> {
    DRIVE_SIGN[wheel] * wheel_frame(wheel, delta).y
}

/// Steering axis position relative to the base mass centre.
pub fn steering_axis_position(params: &RobotParams, wheel: usize) -> Vector3<f64> {
    let (hx, hy) = (0.5 * params.a, 0.5 * params.b);
    match wheel {
        0 => Vector3::new(hx, -hy, 0.0),
        1 => Vector3::new(hx, hy, 0.0),
        2 => Vector3::new(-hx, hy, 0.0),
        3 => Vector3::new(-hx, -hy, 0.0),
        _ => panic!("wheel index {wheel} out of range"),
    }
}

/// Offset from steering axis to wheel centre.
pub fn axis_to_wheel_offset(params: &RobotParams, wheel: usize, delta: f64) -> Vector3<f64> {
    -params.c * wheel_frame(wheel, delta).y
}

/// Wheel centre relative to the base mass centre.
pub fn wheel_centre(params: &RobotParams, wheel: usize, delta: f64) -> Vector3<f64> {
    steering_axis_position(params, wheel) + axis_to_wheel_offset(params, wheel, delta)
}

pub fn steering_from_submovements(sub: SubmovementParams) -> SteeringState {
    let d13 = sub.beta + sub.alpha;
    let d24 = sub.beta - sub.alpha;
    SteeringState::new([d13, d24, d13, d24])
}

pub fn submovements_from_steering(s: &SteeringState) -> Result<SubmovementParams> {
    if !s.is_symmetric() {
        return Err(Error::AsymmetricSteering);
    }
    let [d1, d2, d3, d4] = s.delta;
    Ok(SubmovementParams {
        alpha: ((d1 + d3) - (d2 + d4)) / 4.0,
        beta: ((d1 + d3) + (d2 + d4)) / 4.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueJacobian {
    /// `(tau_1, tau_2, tau_delta) -> (tau_x, tau_y, tau_z)`.
    pub full: Matrix3<f64>,
    /// Roll/pitch block `(tau_1, tau_2) -> (tau_x, tau_y)`.
    pub authority: Matrix2<f64>,
    /// Wheel reaction torques about each knuckle x axis, mapped to body axes.
    pub reaction: Matrix3x4<f64>,
}

/// Configuration-dependent torque Jacobian for pair-antisymmetric drive
/// torques and a common steering torque.
pub fn torque_jacobian(sub: SubmovementParams) -> TorqueJacobian {
    let (a, b) = (sub.alpha, sub.beta);
    let authority = Matrix2::new(
        -2.0 * (a + b).sin(),
        2.0 * (a - b).sin(),
        2.0 * (a + b).cos(),
        2.0 * (a - b).cos(),
    );
    let mut full = Matrix3::zeros();
    full.fixed_view_mut::<2, 2>(0, 0).copy_from(&authority);
    full[(2, 2)] = 4.0;

    let s = steering_from_submovements(sub);
    let mut reaction = Matrix3x4::zeros();
    for i in 0..4 {
        reaction.set_column(i, &wheel_frame(i, s.delta[i]).x);
    }
    TorqueJacobian {
        full,
        authority,
        reaction,
    }
}

/// Closed-form determinant of the roll/pitch block, `-4 sin(2 alpha)`.
pub fn jacobian_determinant(alpha: f64) -> f64 {
    -4.0 * (2.0 * alpha).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulabilityReport {
    /// Ellipsoid radius along the first authority axis.
    pub lambda_x_prime: f64,
    /// Ellipsoid radius along the second authority axis.
    pub lambda_y_prime: f64,
    /// Rotation of the first authority axis from body x (equals beta).
    pub axis_angle: f64,
    pub det: f64,
    pub singular: bool,
}

/// Principal radii of the torque ellipsoid `{J u : |u| = 1}` of the
/// roll/pitch block, labelled by the authority axis they lie along.
pub fn manipulability(sub: SubmovementParams) -> ManipulabilityReport {
    let j = torque_jacobian(sub).authority;
    let eig = SymmetricEigen::new(j * j.transpose());
    let x_prime = Vector2::new(sub.beta.cos(), sub.beta.sin());
    let (i_x, i_y) = if eig.eigenvectors.column(0).dot(&x_prime).abs() >= eig.eigenvectors.column(1).dot(&x_prime).abs()
    {
        (0, 1)
    } else {
        (1, 0)
    };
    let det = j.determinant();
    ManipulabilityReport {
        lambda_x_prime: eig.eigenvalues[i_x].max(0.0).sqrt(),
        lambda_y_prime: eig.eigenvalues[i_y].max(0.0).sqrt(),
        axis_angle: sub.beta,
        det,
        singular: det.abs() < REPORT_SINGULARITY_TOL,
    }
}

pub fn map_wheel_to_body_torque(cmd: &TorqueCommand, sub: SubmovementParams) -> Result<BodyTorque> {
    if !cmd.is_symmetric() {
        return Err(Error::AsymmetricTorque);
    }
    let u = Vector3::new(cmd.tau[0], cmd.tau[1], cmd.tau_delta);
    Ok(BodyTorque::from_vector(&(torque_jacobian(sub).full * u)))
}

/// Inverts the torque Jacobian for a desired body torque, then clamps each
/// channel independently to its limit.
pub fn allocate_body_torque(
    desired: &BodyTorque,
    sub: SubmovementParams,
    limits: &RobotParams,
) -> Result<TorqueCommand> {
    let jac = torque_jacobian(sub);
    let det = jac.authority.determinant();
    if det.abs() < ALLOCATION_SINGULARITY_TOL {
        return Err(Error::SingularConfiguration { det });
    }
    let inv = jac
        .authority
        .try_inverse()
        .ok_or(Error::SingularConfiguration { det })?;
    let wheels = inv * Vector2::new(desired.tau_x, desired.tau_y);
    let steer = desired.tau_z / jac.full[(2, 2)];

    let clamp = |v: f64, lim: f64| (v.clamp(-lim, lim), v.abs() > lim);
    let (t1, s1) = clamp(wheels.x, limits.tau_wheel_max);
    let (t2, s2) = clamp(wheels.y, limits.tau_wheel_max);
    let (td, sd) = clamp(steer, limits.tau_steer_max);
    let mut cmd = TorqueCommand::symmetric(t1, t2, td);
    cmd.saturated = [s1, s2, s1, s2, sd];
    Ok(cmd)
}
