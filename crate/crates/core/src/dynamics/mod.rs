//! Rotational dynamics of the airborne robot with steering held fixed.
//!
//! The closed-form path writes the three body-axis equations explicitly in
//! terms of `delta_1`, `delta_2`:
//!
//! ```text
//! M(delta) * dOmega/dt + Omega x (M(delta) * Omega + h) = J_tau * (tau_1, tau_2, tau_delta)
//! ```
//!
//! where `M` is the base inertia plus the reflected wheel masses plus the
//! wheels' transverse inertia, and `h` is the absolute spin momentum of the
//! wheels. [`oracle`] rebuilds the same quantity body by body from the wheel
//! and base Newton–Euler equations and is kept free of these closed forms.

pub mod oracle;

use nalgebra::{Matrix3, Quaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::kinematics::drive_axis;
use crate::params::RobotParams;
use crate::state::{BodyState, SteeringState, TorqueCommand};
use crate::{Error, Result};

pub use oracle::{oracle_newton_euler, ReactionLoads};

/// Wheel point masses reflected into the base inertia.
///
/// `xy` is the product-of-inertia tensor entry (`-sum m x y`); it vanishes
/// whenever `delta_2 = -delta_1` (zero `beta`) and is otherwise small but
/// non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaReflection {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
}

fn pair_angles(s: &SteeringState) -> Result<(f64, f64)> {
    if !s.is_symmetric() {
        return Err(Error::AsymmetricSteering);
    }
    Ok((s.delta[0], s.delta[1]))
}

pub fn reflected_inertia(params: &RobotParams, s: &SteeringState) -> Result<InertiaReflection> {
    let (d1, d2) = pair_angles(s)?;
    let (s1, c1) = d1.sin_cos();
    let (s2, c2) = d2.sin_cos();
    let (ha, hb, c, m) = (0.5 * params.a, 0.5 * params.b, params.c, params.wheel_mass);
    // Wheel 1 sits at (x1, -y1), wheel 2 at (x2, y2); 3 and 4 mirror them through B.
    let (x1, y1) = (ha + c * s1, hb + c * c1);
    let (x2, y2) = (ha - c * s2, hb + c * c2);
    let xx = 2.0 * m * (y1 * y1 + y2 * y2);
    let yy = 2.0 * m * (x1 * x1 + x2 * x2);
    Ok(InertiaReflection {
        xx,
        yy,
        zz: xx + yy,
        xy: 2.0 * m * (x1 * y1 - x2 * y2),
    })
}

/// Effective rotational mass matrix for fixed steering (spin axes excluded).
pub fn mass_matrix(params: &RobotParams, s: &SteeringState) -> Result<Matrix3<f64>> {
    let (d1, d2) = pair_angles(s)?;
    let refl = reflected_inertia(params, s)?;
    let (s1, c1) = d1.sin_cos();
    let (s2, c2) = d2.sin_cos();
    let jb = params.base_inertia;
    let jw = params.wheel_inertia;
    let xx = jb.xx + refl.xx + 2.0 * jw.xx * (c1 * c1 + c2 * c2);
    let yy = jb.yy + refl.yy + 2.0 * jw.xx * (s1 * s1 + s2 * s2);
    let xy = refl.xy + 2.0 * jw.xx * (c1 * s1 + c2 * s2);
    let zz = jb.zz + refl.zz + 4.0 * jw.zz;
    Ok(Matrix3::new(xx, xy, 0.0, xy, yy, 0.0, 0.0, 0.0, zz))
}

/// Absolute spin angular momentum of the four wheels in body axes.
pub fn wheel_spin_momentum(state: &BodyState, s: &SteeringState, params: &RobotParams) -> Result<Vector3<f64>> {
    let (d1, d2) = pair_angles(s)?;
    let w = state.wheel_speed;
    let n1 = drive_axis(0, d1);
    let n2 = drive_axis(1, d2);
    let o = state.omega;
    Ok(params.wheel_inertia.yy * ((2.0 * n1.dot(&o) + w[0] - w[2]) * n1 + (2.0 * n2.dot(&o) + w[1] - w[3]) * n2))
}

/// Net applied torque on the rotational dynamics in body axes. Accepts any
/// drive torques; for the pair-antisymmetric case this equals `J_tau * u`.
pub fn applied_torque(s: &SteeringState, cmd: &TorqueCommand) -> Result<Vector3<f64>> {
    let (d1, d2) = pair_angles(s)?;
    let (s1, c1) = d1.sin_cos();
    let (s2, c2) = d2.sin_cos();
    let p13 = cmd.tau[0] - cmd.tau[2];
    let p24 = cmd.tau[1] - cmd.tau[3];
    Ok(Vector3::new(
        -s1 * p13 - s2 * p24,
        c1 * p13 + c2 * p24,
        4.0 * cmd.tau_delta,
    ))
}

/// Body angular acceleration from the closed-form equations of motion.
pub fn angular_acceleration(
    state: &BodyState,
    s: &SteeringState,
    cmd: &TorqueCommand,
    params: &RobotParams,
) -> Result<Vector3<f64>> {
    let m = mass_matrix(params, s)?;
    let h = wheel_spin_momentum(state, s, params)?;
    let o = state.omega;
    let rhs = applied_torque(s, cmd)? - o.cross(&(m * o + h));
    // x/y block couples through the product of inertia; z is separate.
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(0, 1)];
    if !(det > 0.0 && m[(2, 2)] > 0.0) {
        return Err(Error::SingularMassMatrix);
    }
    Ok(Vector3::new(
        (m[(1, 1)] * rhs.x - m[(0, 1)] * rhs.y) / det,
        (m[(0, 0)] * rhs.y - m[(0, 1)] * rhs.x) / det,
        rhs.z / m[(2, 2)],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub orientation_rate: Quaternion<f64>,
    pub omega_dot: Vector3<f64>,
    pub wheel_accel: [f64; 4],
}

/// Time derivative of the full airborne state. Wheel reactions are internal,
/// so the base mass centre (which is the system mass centre) falls
/// ballistically.
pub fn state_derivative(
    state: &BodyState,
    s: &SteeringState,
    cmd: &TorqueCommand,
    params: &RobotParams,
) -> Result<StateDerivative> {
    let omega_dot = angular_acceleration(state, s, cmd, params)?;
    let mut wheel_accel = [0.0; 4];
    for (i, acc) in wheel_accel.iter_mut().enumerate() {
        *acc = cmd.tau[i] / params.wheel_inertia.yy - drive_axis(i, s.delta[i]).dot(&omega_dot);
    }
    let o = state.omega;
    let orientation_rate = state.orientation.quaternion() * Quaternion::new(0.0, o.x, o.y, o.z) * 0.5;
    Ok(StateDerivative {
        velocity: state.velocity,
        acceleration: Vector3::new(0.0, 0.0, -params.g),
        orientation_rate,
        omega_dot,
        wheel_accel,
    })
}

/// Instantaneous steering change with the relative wheel speeds held fixed.
/// The body rate is solved so that total angular momentum is unchanged.
pub fn reconfigure_steering(
    state: &BodyState,
    from: &SteeringState,
    to: &SteeringState,
    params: &RobotParams,
) -> Result<BodyState> {
    let l = mass_matrix(params, from)? * state.omega + wheel_spin_momentum(state, from, params)?;
    let jw = params.wheel_inertia.yy;
    let mut lhs = mass_matrix(params, to)?;
    let mut rhs = l;
    for i in 0..4 {
        let n = drive_axis(i, to.delta[i]);
        lhs += jw * n * n.transpose();
        rhs -= jw * state.wheel_speed[i] * n;
    }
    let omega = lhs.lu().solve(&rhs).ok_or(Error::SingularMassMatrix)?;
    Ok(BodyState { omega, ..*state })
}
