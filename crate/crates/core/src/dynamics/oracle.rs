//! First-principles Newton–Euler assembly of the base and four wheels.
//!
//! Nothing here uses the closed-form mass matrix. Each wheel is a rigid body
//! on a locked steering knuckle, free to spin about its axle under the drive
//! torque. For a trial base angular acceleration the routine builds the
//! wheel accelerations, the joint forces `F_Bi` from each wheel's linear
//! momentum, the spin acceleration from the axle component of its angular
//! momentum, and the joint torque `tau_Bi` from the remaining components;
//! the base moment balance is then affine in the trial value, so three
//! probes plus one offset give an exact 3×3 linear system.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::kinematics::{axis_to_wheel_offset, drive_axis, steering_axis_position, wheel_frame};
use crate::params::RobotParams;
use crate::state::{BodyState, SteeringState, TorqueCommand};
use crate::{Error, Result};

/// Loads the wheels exert on the base at the steering joints, body axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionLoads {
    pub force: [Vector3<f64>; 4],
    /// Component of each joint torque along the knuckle x axis.
    pub tau_x: [f64; 4],
    pub torque: [Vector3<f64>; 4],
}

struct Wheel {
    r_bs: Vector3<f64>,
    r_sw: Vector3<f64>,
    axle: Vector3<f64>,
    inertia: Matrix3<f64>,
}

fn wheels(params: &RobotParams, s: &SteeringState) -> [Wheel; 4] {
    std::array::from_fn(|i| {
        let f = wheel_frame(i, s.delta[i]);
        let jw = params.wheel_inertia;
        Wheel {
            r_bs: steering_axis_position(params, i),
            r_sw: axis_to_wheel_offset(params, i, s.delta[i]),
            axle: drive_axis(i, s.delta[i]),
            inertia: jw.xx * f.x * f.x.transpose() + jw.yy * f.y * f.y.transpose() + jw.zz * f.z * f.z.transpose(),
        }
    })
}

fn base_inertia(params: &RobotParams) -> Matrix3<f64> {
    let j = params.base_inertia;
    Matrix3::from_diagonal(&Vector3::new(j.xx, j.yy, j.zz))
}

/// Base moment-balance residual and joint loads for a trial `omega_dot`.
fn balance(
    omega_dot: &Vector3<f64>,
    state: &BodyState,
    ws: &[Wheel; 4],
    cmd: &TorqueCommand,
    params: &RobotParams,
) -> (Vector3<f64>, ReactionLoads) {
    let o = state.omega;
    let m_w = params.wheel_mass;
    let m_total = params.base_mass + 4.0 * m_w;
    let up = state.orientation.inverse_transform_vector(&Vector3::z());
    let gravity = -params.g * up;

    // Relative acceleration of each wheel centre with respect to B.
    let rel: [Vector3<f64>; 4] = std::array::from_fn(|i| {
        let r = ws[i].r_bs + ws[i].r_sw;
        omega_dot.cross(&r) + o.cross(&o.cross(&r))
    });
    // System linear momentum: only gravity acts externally.
    let a_ob = gravity - (m_w / m_total) * rel.iter().sum::<Vector3<f64>>();

    let mut loads = ReactionLoads {
        force: [Vector3::zeros(); 4],
        tau_x: [0.0; 4],
        torque: [Vector3::zeros(); 4],
    };
    let mut moment = Vector3::new(0.0, 0.0, 4.0 * cmd.tau_delta);
    for (i, w) in ws.iter().enumerate() {
        let a_ow = a_ob + rel[i];
        let f_b = -m_w * (a_ow - gravity);
        let r_ws = -w.r_sw;
        let spin = state.wheel_speed[i];
        let h = w.inertia * (o + spin * w.axle);
        let gyro = o.cross(&h);
        // Axle balance: the joint transmits only the drive torque about the axle.
        let j_axle = w.axle.dot(&(w.inertia * w.axle));
        let spin_dot =
            (cmd.tau[i] - w.axle.dot(&r_ws.cross(&f_b)) - w.axle.dot(&(w.inertia * omega_dot)) - w.axle.dot(&gyro))
                / j_axle;
        let h_dot = w.inertia * (omega_dot + spin_dot * w.axle) + gyro;
        // Wheel: -tau_B + r_WS x (-F_B) = dH/dt.
        let tau_b = -h_dot - r_ws.cross(&f_b);
        moment += tau_b + w.r_bs.cross(&f_b);
        loads.force[i] = f_b;
        loads.torque[i] = tau_b;
    }
    let jb = base_inertia(params);
    let residual = jb * omega_dot + o.cross(&(jb * o)) - moment;
    (residual, loads)
}

/// Body angular acceleration and joint loads from the Newton–Euler
/// equations of the base and each wheel.
pub fn oracle_newton_euler(
    state: &BodyState,
    s: &SteeringState,
    cmd: &TorqueCommand,
    params: &RobotParams,
) -> Result<(Vector3<f64>, ReactionLoads)> {
    let ws = wheels(params, s);
    let (offset, _) = balance(&Vector3::zeros(), state, &ws, cmd, params);
    let mut a = Matrix3::zeros();
    for k in 0..3 {
        let (r, _) = balance(&Vector3::ith(k, 1.0), state, &ws, cmd, params);
        a.set_column(k, &(r - offset));
    }
    let omega_dot = a.lu().solve(&(-offset)).ok_or(Error::SingularMassMatrix)?;
    if !omega_dot.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularMassMatrix);
    }
    let (_, mut loads) = balance(&omega_dot, state, &ws, cmd, params);
    for i in 0..4 {
        loads.tau_x[i] = loads.torque[i].dot(&wheel_frame(i, s.delta[i]).x);
    }
    Ok((omega_dot, loads))
}

/// Total angular momentum about the system mass centre in world axes,
/// summed body by body.
pub fn angular_momentum(state: &BodyState, s: &SteeringState, params: &RobotParams) -> Vector3<f64> {
    let ws = wheels(params, s);
    let o = state.omega;
    let m_total = params.base_mass + 4.0 * params.wheel_mass;
    let cm = params.wheel_mass * ws.iter().map(|w| w.r_bs + w.r_sw).sum::<Vector3<f64>>() / m_total;
    let mut l = base_inertia(params) * o - cm.cross(&(params.base_mass * o.cross(&-cm)));
    for (i, w) in ws.iter().enumerate() {
        let r = w.r_bs + w.r_sw - cm;
        let v = o.cross(&(w.r_bs + w.r_sw)) - o.cross(&cm);
        l += params.wheel_mass * r.cross(&v) + w.inertia * (o + state.wheel_speed[i] * w.axle);
    }
    state.orientation.transform_vector(&l)
}

/// Kinetic energy of rotation about the system mass centre.
pub fn rotational_energy(state: &BodyState, s: &SteeringState, params: &RobotParams) -> f64 {
    let ws = wheels(params, s);
    let o = state.omega;
    let m_total = params.base_mass + 4.0 * params.wheel_mass;
    let cm = params.wheel_mass * ws.iter().map(|w| w.r_bs + w.r_sw).sum::<Vector3<f64>>() / m_total;
    let mut e = 0.5 * o.dot(&(base_inertia(params) * o)) + 0.5 * params.base_mass * o.cross(&cm).norm_squared();
    for (i, w) in ws.iter().enumerate() {
        let v = o.cross(&(w.r_bs + w.r_sw - cm));
        let wa = o + state.wheel_speed[i] * w.axle;
        e += 0.5 * params.wheel_mass * v.norm_squared() + 0.5 * wa.dot(&(w.inertia * wa));
    }
    e
}
