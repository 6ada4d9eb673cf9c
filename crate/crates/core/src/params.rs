//! Physical parameters of the robot and their validation.
//!
//! Only the total mass (23.59 kg) is a measured value. Everything else that
//! defaults here is an estimate: the chassis is treated as a homogeneous box
//! spanning the steering-axis footprint, and each wheel as a 2.8 kg solid
//! disk of a 6.5 inch (165.1 mm diameter) hub-motor wheel.

use serde::{Deserialize, Serialize};

/// Measured total mass of the prototype, kg.
pub const TOTAL_MASS: f64 = 23.59;
pub const DEFAULT_WHEEL_MASS: f64 = 2.8;
/// 6.5 inch wheel diameter, halved.
pub const DEFAULT_WHEEL_RADIUS: f64 = 0.5 * 6.5 * 0.0254;
pub const DEFAULT_A: f64 = 0.40;
pub const DEFAULT_B: f64 = 0.30;
pub const DEFAULT_C: f64 = 0.07;
pub const DEFAULT_CHASSIS_HEIGHT: f64 = 0.15;
pub const DEFAULT_TAU_WHEEL_MAX: f64 = 5.0;
/// Stall torque of the steering servo class (about 50 kg·cm).
pub const DEFAULT_TAU_STEER_MAX: f64 = 4.9;
/// Top ground speed of 11.4 m/s divided by the wheel radius.
pub const DEFAULT_WHEEL_SPEED_MAX: f64 = 11.4 / DEFAULT_WHEEL_RADIUS;
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Principal moments of a diagonal inertia tensor, kg·m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagInertia {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
}

impl DiagInertia {
    pub fn new(xx: f64, yy: f64, zz: f64) -> Self {
        Self { xx, yy, zz }
    }

    /// Homogeneous box with edge lengths along x, y and z.
    pub fn solid_box(mass: f64, lx: f64, ly: f64, lz: f64) -> Self {
        let k = mass / 12.0;
        Self::new(
            k * (ly * ly + lz * lz),
            k * (lx * lx + lz * lz),
            k * (lx * lx + ly * ly),
        )
    }

    /// Thin solid disk spinning about its local y axis.
    pub fn disk_about_y(mass: f64, radius: f64) -> Self {
        let transverse = 0.25 * mass * radius * radius;
        Self::new(transverse, 0.5 * mass * radius * radius, transverse)
    }

    fn feasible(&self) -> bool {
        let tol = 1e-12 * (self.xx + self.yy + self.zz);
        self.xx <= self.yy + self.zz + tol && self.yy <= self.xx + self.zz + tol && self.zz <= self.xx + self.yy + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    /// Base mass excluding the four wheels, kg.
    pub base_mass: f64,
    /// Mass of one wheel, kg.
    pub wheel_mass: f64,
    /// Longitudinal distance between front and rear steering axes, m.
    pub a: f64,
    /// Lateral distance between left and right steering axes, m.
    pub b: f64,
    /// Offset from steering axis to wheel centre, m.
    pub c: f64,
    pub base_inertia: DiagInertia,
    /// Wheel inertia in the knuckle frame; `yy` is the spin axis.
    pub wheel_inertia: DiagInertia,
    pub wheel_radius: f64,
    pub tau_wheel_max: f64,
    pub tau_steer_max: f64,
    pub wheel_speed_max: f64,
    pub g: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self::estimate(
            DEFAULT_WHEEL_MASS,
            DEFAULT_A,
            DEFAULT_B,
            DEFAULT_C,
            DEFAULT_CHASSIS_HEIGHT,
            DEFAULT_WHEEL_RADIUS,
        )
    }
}

impl RobotParams {
    /// Builds a parameter set from geometry alone: base mass is whatever the
    /// wheels leave of [`TOTAL_MASS`], the base is a homogeneous box of
    /// `a × b × chassis_height`, and the wheels are solid disks.
    pub fn estimate(wheel_mass: f64, a: f64, b: f64, c: f64, chassis_height: f64, wheel_radius: f64) -> Self {
        let base_mass = TOTAL_MASS - 4.0 * wheel_mass;
        Self {
            base_mass,
            wheel_mass,
            a,
            b,
            c,
            base_inertia: DiagInertia::solid_box(base_mass, a, b, chassis_height),
            wheel_inertia: DiagInertia::disk_about_y(wheel_mass, wheel_radius),
            wheel_radius,
            tau_wheel_max: DEFAULT_TAU_WHEEL_MAX,
            tau_steer_max: DEFAULT_TAU_STEER_MAX,
            wheel_speed_max: 11.4 / wheel_radius,
            g: STANDARD_GRAVITY,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.base_mass + 4.0 * self.wheel_mass
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let positive = [
            ("base_mass", self.base_mass),
            ("wheel_mass", self.wheel_mass),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("j_bxx", self.base_inertia.xx),
            ("j_byy", self.base_inertia.yy),
            ("j_bzz", self.base_inertia.zz),
            ("j_wxx", self.wheel_inertia.xx),
            ("j_wyy", self.wheel_inertia.yy),
            ("j_wzz", self.wheel_inertia.zz),
            ("wheel_radius", self.wheel_radius),
            ("tau_wheel_max", self.tau_wheel_max),
            ("tau_steer_max", self.tau_steer_max),
            ("wheel_speed_max", self.wheel_speed_max),
            ("g", self.g),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                report.push(field, format!("{field} must be positive"));
            }
        }
        if !self.base_inertia.feasible() {
            report.push(
                "base_inertia",
                "inertia feasibility: each principal moment must not exceed the sum of the other two",
            );
        }
        if !self.wheel_inertia.feasible() {
            report.push(
                "wheel_inertia",
                "inertia feasibility: each principal moment must not exceed the sum of the other two",
            );
        }
        // The wheel is a body of revolution about its spin axis.
        let w = self.wheel_inertia;
        if (w.xx - w.zz).abs() > 1e-9 * w.xx.abs().max(w.zz.abs()) {
            report.push(
                "wheel_inertia",
                "wheel must be axisymmetric about its spin axis (j_wxx = j_wzz)",
            );
        }
        report
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.to_string(),
            message: message.into(),
        });
    }

    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .map(|v| v.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        Err(crate::Error::InvalidParams(msg))
    }
}

pub fn validate_params(params: &RobotParams) -> ValidationReport {
    params.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_pass_and_total_mass_matches() {
        let p = RobotParams::default();
        assert!(p.validate().is_ok(), "{:?}", p.validate());
        assert!((p.total_mass() - 23.59).abs() < 1e-12);
    }

    #[test]
    fn zero_wheel_mass_is_reported() {
        let p = RobotParams {
            wheel_mass: 0.0,
            ..RobotParams::default()
        };
        let report = p.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.field == "wheel_mass" && v.message == "wheel_mass must be positive"));
    }

    #[test]
    fn infeasible_base_inertia_is_reported() {
        let mut p = RobotParams::default();
        p.base_inertia.xx = p.base_inertia.yy + p.base_inertia.zz + 0.1;
        let report = p.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.starts_with("inertia feasibility")));
        assert!(report.into_result().is_err());
    }

    #[test]
    fn non_axisymmetric_wheel_is_reported() {
        let mut p = RobotParams::default();
        p.wheel_inertia.zz *= 1.5;
        assert!(!p.validate().is_ok());
    }

    #[test]
    fn box_estimate_is_feasible_for_flat_chassis() {
        let j = DiagInertia::solid_box(12.0, 0.4, 0.3, 0.15);
        assert!(j.feasible());
        assert!((j.zz - (j.xx + j.yy - 2.0 * 12.0 / 12.0 * 0.15 * 0.15)).abs() < 1e-12);
    }
}
