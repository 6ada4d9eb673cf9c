//! State and command value types shared by every module.

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Symmetry tolerance for pair-matched steering angles and torques.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = x - two_pi * ((x + PI) / two_pi).floor();
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle_upper(x: f64) -> f64 {
    let w = wrap_angle(x);
    if w == -PI {
        PI
    } else {
        w
    }
}

/// The four steering angles. Each is measured from the forward driving
/// direction; wheels 2 and 3 carry an extra `pi` offset in their knuckle
/// frame so that all four read zero in the neutral configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringState {
    pub delta: [f64; 4],
}

impl SteeringState {
    pub fn new(delta: [f64; 4]) -> Self {
        Self {
            delta: delta.map(wrap_angle),
        }
    }

    pub fn neutral() -> Self {
        Self { delta: [0.0; 4] }
    }

    pub fn is_symmetric(&self) -> bool {
        let [d1, d2, d3, d4] = self.delta;
        wrap_angle(d1 - d3).abs() <= SYMMETRY_TOL && wrap_angle(d2 - d4).abs() <= SYMMETRY_TOL
    }
}

/// Coordinated steering submovements: `alpha` moves the two diagonal pairs in
/// opposite directions, `beta` moves them together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmovementParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SubmovementParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    /// Equal roll and pitch authority.
    pub fn isotropic() -> Self {
        Self::new(PI / 4.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn to_degrees(&self) -> [f64; 3] {
        [self.roll.to_degrees(), self.pitch.to_degrees(), self.yaw.to_degrees()]
    }

    /// True when pitch is within one degree of the Z-Y-X gimbal lock.
    pub fn near_gimbal(&self) -> bool {
        self.pitch.abs() > 89f64.to_radians()
    }

    /// Body-to-world rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        let (sr, cr) = (0.5 * self.roll).sin_cos();
        let (sp, cp) = (0.5 * self.pitch).sin_cos();
        let (sy, cy) = (0.5 * self.yaw).sin_cos();
        UnitQuaternion::new_unchecked(Quaternion::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ))
    }
}

/// Z-Y-X (yaw, pitch, roll) angles of a body-to-world unit quaternion, with
/// pitch in `[-pi/2, pi/2]`.
pub fn euler_from_quaternion(q: &UnitQuaternion<f64>) -> EulerAngles {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    EulerAngles::new(roll, pitch, yaw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    /// Position of the base mass centre in the world frame, m.
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Body-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    /// Body angular velocity in body axes, rad/s.
    pub omega: Vector3<f64>,
    /// Wheel spin rates relative to the knuckle, about each drive axis.
    pub wheel_speed: [f64; 4],
}

impl Default for BodyState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            omega: Vector3::zeros(),
            wheel_speed: [0.0; 4],
        }
    }
}

impl BodyState {
    pub fn euler(&self) -> EulerAngles {
        euler_from_quaternion(&self.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
            && self.wheel_speed.iter().all(|v| v.is_finite())
    }
}

/// Per-wheel drive torques, the common steering-joint torque and the
/// saturation flags set by allocation (`saturated[4]` is the steering
/// channel).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorqueCommand {
    pub tau: [f64; 4],
    pub tau_delta: f64,
    pub saturated: [bool; 5],
}

impl TorqueCommand {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Pair-antisymmetric command: `tau_3 = -tau_1`, `tau_4 = -tau_2`.
    pub fn symmetric(tau_1: f64, tau_2: f64, tau_delta: f64) -> Self {
        Self {
            tau: [tau_1, tau_2, -tau_1, -tau_2],
            tau_delta,
            saturated: [false; 5],
        }
    }

    pub fn is_symmetric(&self) -> bool {
        let [t1, t2, t3, t4] = self.tau;
        let scale = 1.0f64.max(t1.abs()).max(t2.abs());
        (t1 + t3).abs() <= SYMMETRY_TOL * scale && (t2 + t4).abs() <= SYMMETRY_TOL * scale
    }

    pub fn is_zero(&self) -> bool {
        self.tau.iter().all(|t| *t == 0.0) && self.tau_delta == 0.0
    }

    /// Bit `i` set when channel `i` saturated (bit 4 is steering).
    pub fn sat_mask(&self) -> u8 {
        self.saturated
            .iter()
            .enumerate()
            .fold(0u8, |m, (i, s)| if *s { m | (1 << i) } else { m })
    }
}

/// Net torque on the base in body axes, N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyTorque {
    pub tau_x: f64,
    pub tau_y: f64,
    pub tau_z: f64,
}

impl BodyTorque {
    pub fn new(tau_x: f64, tau_y: f64, tau_z: f64) -> Self {
        Self { tau_x, tau_y, tau_z }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.tau_x, self.tau_y, self.tau_z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// Components about the authority axes, which are rotated by `beta`
    /// about the body z axis: `(tau_x', tau_y')`.
    pub fn rotated(&self, beta: f64) -> (f64, f64) {
        let (s, c) = beta.sin_cos();
        (c * self.tau_x + s * self.tau_y, -s * self.tau_x + c * self.tau_y)
    }
}
