//! Freefall state machine and PD attitude controller.

use std::collections::VecDeque;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::mass_matrix;
use crate::kinematics::{allocate_body_torque, steering_from_submovements};
use crate::params::RobotParams;
use crate::simulation::ImuReading;
use crate::state::{wrap_angle_upper, BodyTorque, EulerAngles, SubmovementParams, TorqueCommand};
use crate::{Error, Result};

/// Diagonal gains for (roll, pitch, yaw). A zero entry disables that axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub kp: [f64; 3],
    pub kd: [f64; 3],
}

impl ControllerGains {
    /// 75 N·m/rad and 12 N·m·s/rad on roll and pitch, yaw disabled.
    pub fn roll_pitch(kp: f64, kd: f64) -> Self {
        Self {
            kp: [kp, kp, 0.0],
            kd: [kd, kd, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kp.iter().chain(self.kd.iter()).all(|g| g.is_finite() && *g >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "controller gains must be finite and non-negative".into(),
            ))
        }
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::roll_pitch(75.0, 12.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub gains: ControllerGains,
    /// Specific-acceleration magnitude below which a reading counts as
    /// weightless, m/s².
    pub freefall_threshold: f64,
    /// Time every reading must stay below threshold, s.
    pub freefall_debounce: f64,
    /// Steering configuration commanded on entering flight.
    pub flight_submovement: SubmovementParams,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gains: ControllerGains::default(),
            freefall_threshold: 2.0,
            freefall_debounce: 0.020,
            flight_submovement: SubmovementParams::isotropic(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerMode {
    GroundTeleop,
    FreefallStabilize,
    Landed,
}

impl ControllerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerMode::GroundTeleop => "ground_teleop",
            ControllerMode::FreefallStabilize => "freefall_stabilize",
            ControllerMode::Landed => "landed",
        }
    }
}

/// True iff every reading in the trailing `debounce` window is weightless.
pub fn detect_freefall(history: &[ImuReading], threshold: f64, debounce: f64) -> Result<bool> {
    let (first, last) = match (history.first(), history.last()) {
        (Some(f), Some(l)) => (f.timestamp, l.timestamp),
        _ => {
            return Err(Error::InsufficientHistory {
                have: 0.0,
                need: debounce,
            })
        }
    };
    // Tick rounding allowance.
    let eps = 1e-9;
    if last - first < debounce - eps {
        return Err(Error::InsufficientHistory {
            have: last - first,
            need: debounce,
        });
    }
    let start = last - debounce - eps;
    Ok(history
        .iter()
        .filter(|r| r.timestamp >= start)
        .all(|r| r.specific_accel.norm() < threshold))
}

/// Transition table. `Landed` is terminal.
pub fn fsm_step(mode: ControllerMode, freefall: bool, touchdown: bool) -> ControllerMode {
    match mode {
        ControllerMode::GroundTeleop if freefall => ControllerMode::FreefallStabilize,
        ControllerMode::FreefallStabilize if touchdown => ControllerMode::Landed,
        m => m,
    }
}

/// `K_P (q_desired - q) - K_D q_dot`, with angle errors wrapped to `(-pi, pi]`.
pub fn pd_attitude(
    q: &EulerAngles,
    q_dot: &Vector3<f64>,
    q_desired: &EulerAngles,
    gains: &ControllerGains,
) -> BodyTorque {
    let err = [
        wrap_angle_upper(q_desired.roll - q.roll),
        wrap_angle_upper(q_desired.pitch - q.pitch),
        wrap_angle_upper(q_desired.yaw - q.yaw),
    ];
    let t: [f64; 3] = std::array::from_fn(|i| gains.kp[i] * err[i] - gains.kd[i] * q_dot[i]);
    BodyTorque::new(t[0], t[1], t[2])
}

/// PD law followed by allocation. Outside `FreefallStabilize` the command is
/// zero. The derivative term uses the gyro rates directly.
pub fn control_step(
    imu: &ImuReading,
    mode: ControllerMode,
    gains: &ControllerGains,
    q_desired: &EulerAngles,
    sub: SubmovementParams,
    params: &RobotParams,
) -> Result<TorqueCommand> {
    if mode != ControllerMode::FreefallStabilize {
        return Ok(TorqueCommand::zero());
    }
    let desired = pd_attitude(&imu.euler, &imu.omega, q_desired, gains);
    allocate_body_torque(&desired, sub, params)
}

/// Per-axis double-integrator inertias `1 / (J s^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPlant {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl LinearPlant {
    /// Characteristic roots of `J s^2 + K_D s + K_P` per axis.
    pub fn closed_loop_poles(&self, gains: &ControllerGains) -> [[Complex64; 2]; 3] {
        let j = [self.roll, self.pitch, self.yaw];
        std::array::from_fn(|i| quadratic_roots(j[i], gains.kd[i], gains.kp[i]))
    }

    /// Whether every axis with a non-zero gain has both poles strictly in
    /// the left half plane.
    pub fn is_stable(&self, gains: &ControllerGains) -> bool {
        self.closed_loop_poles(gains)
            .iter()
            .enumerate()
            .filter(|(i, _)| gains.kp[*i] > 0.0 || gains.kd[*i] > 0.0)
            .all(|(_, roots)| roots.iter().all(|r| r.re < 0.0))
    }

    /// The simplified inertias often used for hand design: transverse wheel
    /// inertia counted as `2*sqrt(2)*J_Wxx` on roll and pitch and the yaw
    /// axis reduced to the bare base inertia.
    pub fn simplified(params: &RobotParams) -> Result<Self> {
        let s = steering_from_submovements(SubmovementParams::isotropic());
        let refl = crate::dynamics::reflected_inertia(params, &s)?;
        let jw = 2.0 * std::f64::consts::SQRT_2 * params.wheel_inertia.xx;
        Ok(Self {
            roll: params.base_inertia.xx + refl.xx + jw,
            pitch: params.base_inertia.yy + refl.yy + jw,
            yaw: params.base_inertia.zz,
        })
    }
}

/// Decoupled plant of the full dynamics linearized at the isotropic
/// configuration with the body at rest.
pub fn linearized_plant(params: &RobotParams) -> Result<LinearPlant> {
    let m = mass_matrix(params, &steering_from_submovements(SubmovementParams::isotropic()))?;
    Ok(LinearPlant {
        roll: m[(0, 0)],
        pitch: m[(1, 1)],
        yaw: m[(2, 2)],
    })
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let sq = Complex64::new(b * b - 4.0 * a * c, 0.0).sqrt();
    [(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)]
}

/// What the controller wants applied until the next tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    pub cmd: TorqueCommand,
    /// Steering configuration to adopt now, if it changes this tick.
    pub steering: Option<SubmovementParams>,
    pub entered_freefall: bool,
    pub singular: bool,
}

/// Mutable controller state: mode, mode entry times, latched target and the
/// IMU history used for freefall detection.
#[derive(Debug, Clone)]
pub struct Controller {
    pub config: ControllerConfig,
    pub enabled: bool,
    mode: ControllerMode,
    entered: [Option<f64>; 3],
    target: EulerAngles,
    history: VecDeque<ImuReading>,
}

impl Controller {
    pub fn new(config: ControllerConfig, enabled: bool) -> Self {
        Self {
            config,
            enabled,
            mode: ControllerMode::GroundTeleop,
            entered: [Some(0.0), None, None],
            target: EulerAngles::new(0.0, 0.0, 0.0),
            history: VecDeque::new(),
        }
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn entered_at(&self, mode: ControllerMode) -> Option<f64> {
        self.entered[mode as usize]
    }

    pub fn target(&self) -> EulerAngles {
        self.target
    }

    fn set_mode(&mut self, mode: ControllerMode, t: f64) {
        if mode != self.mode {
            self.mode = mode;
            self.entered[mode as usize] = Some(t);
        }
    }

    pub fn touchdown(&mut self, t: f64) {
        let next = fsm_step(self.mode, false, true);
        self.set_mode(next, t);
    }

    /// One control tick: update the history and mode, then compute the
    /// command for the current steering configuration.
    pub fn update(&mut self, imu: &ImuReading, sub: SubmovementParams, params: &RobotParams) -> ControlDecision {
        let debounce = self.config.freefall_debounce;
        self.history.push_back(*imu);
        while self
            .history
            .front()
            .is_some_and(|r| r.timestamp < imu.timestamp - debounce - 1e-6)
        {
            self.history.pop_front();
        }
        let freefall =
            detect_freefall(self.history.make_contiguous(), self.config.freefall_threshold, debounce).unwrap_or(false);

        let before = self.mode;
        let next = fsm_step(before, freefall, false);
        self.set_mode(next, imu.timestamp);
        let entered_freefall = before == ControllerMode::GroundTeleop && next == ControllerMode::FreefallStabilize;

        let mut steering = None;
        let mut sub = sub;
        if entered_freefall {
            self.target = EulerAngles::new(0.0, 0.0, imu.euler.yaw);
            if self.enabled {
                sub = self.config.flight_submovement;
                steering = Some(sub);
            }
        }
        if !self.enabled {
            return ControlDecision {
                cmd: TorqueCommand::zero(),
                steering,
                entered_freefall,
                singular: false,
            };
        }
        match control_step(imu, self.mode, &self.config.gains, &self.target, sub, params) {
            Ok(cmd) => ControlDecision {
                cmd,
                steering,
                entered_freefall,
                singular: false,
            },
            Err(_) => ControlDecision {
                cmd: TorqueCommand::zero(),
                steering,
                entered_freefall,
                singular: true,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::map_wheel_to_body_torque;
    use std::f64::consts::PI;

    fn reading(t: f64, accel: [f64; 3]) -> ImuReading {
        ImuReading {
            euler: EulerAngles::new(0.0, 0.0, 0.0),
            omega: Vector3::zeros(),
            specific_accel: Vector3::from(accel),
            timestamp: t,
        }
    }

    fn window(n: usize, f: impl Fn(usize) -> [f64; 3]) -> Vec<ImuReading> {
        (0..n).map(|i| reading(i as f64 * 0.001, f(i))).collect()
    }

    #[test]
    fn freefall_detection_examples() {
        let rest = window(21, |_| [0.0, 0.0, 9.81]);
        assert!(!detect_freefall(&rest, 2.0, 0.02).unwrap());
        let fall = window(21, |_| [0.0; 3]);
        assert!(detect_freefall(&fall, 2.0, 0.02).unwrap());
        let dropout = window(21, |i| if i == 10 { [0.0; 3] } else { [0.0, 0.0, 9.81] });
        assert!(!detect_freefall(&dropout, 2.0, 0.02).unwrap());
        let short = window(5, |_| [0.0; 3]);
        assert!(matches!(
            detect_freefall(&short, 2.0, 0.02),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn fsm_transitions() {
        use ControllerMode::*;
        assert_eq!(fsm_step(GroundTeleop, true, false), FreefallStabilize);
        assert_eq!(fsm_step(GroundTeleop, false, false), GroundTeleop);
        assert_eq!(fsm_step(FreefallStabilize, true, true), Landed);
        assert_eq!(fsm_step(Landed, true, false), Landed);
        assert_eq!(fsm_step(Landed, false, true), Landed);
    }

    #[test]
    fn pd_examples() {
        let zero = EulerAngles::new(0.0, 0.0, 0.0);
        let gains = ControllerGains {
            kp: [75.0, 75.0, 0.0],
            kd: [12.0, 12.0, 0.0],
        };
        let t = pd_attitude(&EulerAngles::new(-0.1, 0.0, 0.0), &Vector3::zeros(), &zero, &gains);
        assert!((t.tau_x - 7.5).abs() < 1e-12);
        let t = pd_attitude(&zero, &Vector3::zeros(), &zero, &gains);
        assert_eq!(t, BodyTorque::default());
        let t = pd_attitude(&zero, &Vector3::new(0.0, 1.0, 0.0), &zero, &gains);
        assert_eq!(t.tau_y, -12.0);
    }

    #[test]
    fn yaw_error_is_continuous_across_seam() {
        let gains = ControllerGains {
            kp: [0.0, 0.0, 10.0],
            kd: [0.0; 3],
        };
        let q = EulerAngles::new(0.0, 0.0, PI - 0.01);
        let mut prev = None;
        for k in 0..=40 {
            let yaw_d = PI - 0.02 + 0.001 * k as f64;
            let t = pd_attitude(
                &q,
                &Vector3::zeros(),
                &EulerAngles::new(0.0, 0.0, wrap_angle_upper(yaw_d)),
                &gains,
            );
            if let Some(p) = prev {
                let d: f64 = t.tau_z - p;
                assert!(d.abs() < 0.011, "jump {d} at step {k}");
            }
            prev = Some(t.tau_z);
        }
    }

    #[test]
    fn gating_outside_flight() {
        let p = RobotParams::default();
        let imu = reading(0.0, [0.0; 3]);
        let mut imu_err = imu;
        imu_err.euler = EulerAngles::new(0.3, -0.2, 0.0);
        for mode in [ControllerMode::GroundTeleop, ControllerMode::Landed] {
            let cmd = control_step(
                &imu_err,
                mode,
                &ControllerGains::default(),
                &EulerAngles::new(0.0, 0.0, 0.0),
                SubmovementParams::isotropic(),
                &p,
            )
            .unwrap();
            assert!(cmd.is_zero());
        }
        let cmd = control_step(
            &imu,
            ControllerMode::FreefallStabilize,
            &ControllerGains::default(),
            &EulerAngles::new(0.0, 0.0, 0.0),
            SubmovementParams::isotropic(),
            &p,
        )
        .unwrap();
        assert!(cmd.is_zero());
    }

    #[test]
    fn unsaturated_command_reproduces_body_torque() {
        let p = RobotParams {
            tau_wheel_max: 1e6,
            ..RobotParams::default()
        };
        let mut imu = reading(0.0, [0.0; 3]);
        imu.euler = EulerAngles::new(0.05, -0.03, 0.0);
        imu.omega = Vector3::new(0.1, 0.2, 0.0);
        let gains = ControllerGains::default();
        let zero = EulerAngles::new(0.0, 0.0, 0.0);
        for beta in [-0.4, 0.0, 0.3] {
            let sub = SubmovementParams::new(0.6, beta);
            let cmd = control_step(&imu, ControllerMode::FreefallStabilize, &gains, &zero, sub, &p).unwrap();
            let want = pd_attitude(&imu.euler, &imu.omega, &zero, &gains);
            let got = map_wheel_to_body_torque(&cmd, sub).unwrap();
            assert!((got.as_vector() - want.as_vector()).norm() < 1e-9);
        }
    }

    #[test]
    fn default_gains_are_stable_on_default_plant() {
        let plant = linearized_plant(&RobotParams::default()).unwrap();
        assert!(plant.is_stable(&ControllerGains::default()));
        let unstable = ControllerGains {
            kp: [-1.0, 75.0, 0.0],
            kd: [12.0, 12.0, 0.0],
        };
        assert!(!plant.is_stable(&unstable));
    }

    #[test]
    fn controller_latches_yaw_and_switches_to_isotropic() {
        let p = RobotParams::default();
        let mut c = Controller::new(ControllerConfig::default(), true);
        let mut sub = SubmovementParams::new(0.0, 0.0);
        let mut entered = None;
        for k in 0..=25 {
            let mut imu = reading(k as f64 * 0.001, [0.0; 3]);
            imu.euler.yaw = 0.4;
            let d = c.update(&imu, sub, &p);
            if let Some(s) = d.steering {
                sub = s;
            }
            if d.entered_freefall {
                entered = Some(k);
            }
        }
        assert_eq!(entered, Some(20));
        assert_eq!(c.mode(), ControllerMode::FreefallStabilize);
        assert_eq!(sub, SubmovementParams::isotropic());
        assert_eq!(c.target().yaw, 0.4);
        c.touchdown(0.5);
        assert_eq!(c.mode(), ControllerMode::Landed);
        assert_eq!(c.entered_at(ControllerMode::Landed), Some(0.5));
    }
}
