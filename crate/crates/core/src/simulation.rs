//! Fixed-step integration, IMU model and the closed-loop drop simulation.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerConfig, ControllerMode};
use crate::dynamics::{reconfigure_steering, state_derivative, StateDerivative};
use crate::kinematics::{steering_from_submovements, wheel_centre};
use crate::params::RobotParams;
use crate::state::{euler_from_quaternion, BodyState, EulerAngles, SteeringState, SubmovementParams, TorqueCommand};
use crate::{Error, Result};

/// One classical RK4 step. Stages use the raw quaternion; the result is
/// renormalized. A non-finite result reports `t` as the offset `dt` from the
/// start of the step.
pub fn step_rk4(
    state: &BodyState,
    cmd: &TorqueCommand,
    s: &SteeringState,
    params: &RobotParams,
    dt: f64,
) -> Result<BodyState> {
    let raw = Raw::from(state);
    let k1 = state_derivative(state, s, cmd, params)?;
    let k2 = state_derivative(&raw.advance(&k1, dt / 2.0).to_state(), s, cmd, params)?;
    let k3 = state_derivative(&raw.advance(&k2, dt / 2.0).to_state(), s, cmd, params)?;
    let k4 = state_derivative(&raw.advance(&k3, dt).to_state(), s, cmd, params)?;
    let mut out = raw;
    let w = dt / 6.0;
    for (k, c) in [(&k1, w), (&k2, 2.0 * w), (&k3, 2.0 * w), (&k4, w)] {
        out = out.add(k, c);
    }
    let next = out.to_state();
    if next.is_finite() && out.q.norm().is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFiniteState { t: dt })
    }
}

#[derive(Clone, Copy)]
struct Raw {
    p: Vector3<f64>,
    v: Vector3<f64>,
    q: Quaternion<f64>,
    w: Vector3<f64>,
    ws: [f64; 4],
}

impl Raw {
    fn from(s: &BodyState) -> Self {
        Self {
            p: s.position,
            v: s.velocity,
            q: *s.orientation.quaternion(),
            w: s.omega,
            ws: s.wheel_speed,
        }
    }

    fn add(&self, d: &StateDerivative, h: f64) -> Self {
        Self {
            p: self.p + d.velocity * h,
            v: self.v + d.acceleration * h,
            q: self.q + d.orientation_rate * h,
            w: self.w + d.omega_dot * h,
            ws: std::array::from_fn(|i| self.ws[i] + d.wheel_accel[i] * h),
        }
    }

    fn advance(&self, d: &StateDerivative, h: f64) -> Self {
        self.add(d, h)
    }

    fn to_state(self) -> BodyState {
        BodyState {
            position: self.p,
            velocity: self.v,
            orientation: UnitQuaternion::new_unchecked(self.q),
            omega: self.w,
            wheel_speed: self.ws,
        }
        .renormalized()
    }
}

impl BodyState {
    fn renormalized(mut self) -> Self {
        let n = self.orientation.quaternion().norm();
        if n > 0.0 && n.is_finite() {
            self.orientation = UnitQuaternion::new_normalize(*self.orientation.quaternion());
        }
        self
    }
}

/// Additive white Gaussian noise standard deviations. Zero disables a channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Euler angle noise, rad.
    pub euler: f64,
    /// Gyro noise, rad/s.
    pub gyro: f64,
    /// Accelerometer noise, m/s².
    pub accel: f64,
}

impl NoiseModel {
    pub fn is_off(&self) -> bool {
        self.euler == 0.0 && self.gyro == 0.0 && self.accel == 0.0
    }
}

/// Seeded noise source.
#[derive(Debug, Clone)]
pub struct ImuNoise {
    model: NoiseModel,
    rng: ChaCha8Rng,
}

impl ImuNoise {
    pub fn new(model: NoiseModel, seed: u64) -> Self {
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn off() -> Self {
        Self::new(NoiseModel::default(), 0)
    }

    fn vector(&mut self, sigma: f64) -> Vector3<f64> {
        match Normal::new(0.0, sigma) {
            Ok(n) if sigma > 0.0 => Vector3::from_fn(|_, _| n.sample(&mut self.rng)),
            _ => Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuReading {
    pub euler: EulerAngles,
    /// Gyro rates in body axes, rad/s.
    pub omega: Vector3<f64>,
    /// Specific acceleration `R^T (a - g)` in body axes, m/s².
    pub specific_accel: Vector3<f64>,
    pub timestamp: f64,
}

/// Ideal IMU reading plus noise. `accel_world` is the world-frame
/// acceleration of the sensor.
pub fn imu_sample(
    state: &BodyState,
    accel_world: &Vector3<f64>,
    params: &RobotParams,
    noise: &mut ImuNoise,
    t: f64,
) -> ImuReading {
    let f_world = accel_world + Vector3::new(0.0, 0.0, params.g);
    let specific = state.orientation.inverse_transform_vector(&f_world);
    let e = state.euler();
    let de = noise.vector(noise.model.euler);
    let dw = noise.vector(noise.model.gyro);
    let da = noise.vector(noise.model.accel);
    ImuReading {
        euler: EulerAngles::new(e.roll + de.x, e.pitch + de.y, e.yaw + de.z),
        omega: state.omega + dw,
        specific_accel: specific + da,
        timestamp: t,
    }
}

/// Lowest wheel-contact height above the ground plane.
pub fn ground_clearance(state: &BodyState, s: &SteeringState, params: &RobotParams) -> f64 {
    (0..4)
        .map(|i| (state.position + state.orientation * wheel_centre(params, i, s.delta[i])).z - params.wheel_radius)
        .fold(f64::INFINITY, f64::min)
}

/// Zero any drive torque that would push a wheel further past its speed limit.
pub fn limit_wheel_speed(cmd: &TorqueCommand, state: &BodyState, params: &RobotParams) -> TorqueCommand {
    let mut out = *cmd;
    for i in 0..4 {
        let w = state.wheel_speed[i];
        if w.abs() >= params.wheel_speed_max && out.tau[i] * w > 0.0 {
            out.tau[i] = 0.0;
            out.saturated[i] = true;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Released at rest-or-moving from a height.
    Drop,
    /// Driven off a ledge at a forward speed.
    Ledge,
    Custom,
}

/// Initial conditions and run settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Fall height, m: the distance the mass centre drops before the robot
    /// touches down in the level pose.
    pub height: f64,
    pub velocity: Vector3<f64>,
    pub attitude: EulerAngles,
    pub omega: Vector3<f64>,
    /// Steering configuration before freefall is detected.
    pub initial_submovement: SubmovementParams,
    pub controller_enabled: bool,
    pub t_max: f64,
    pub dt_physics: f64,
    pub dt_control: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Settled when |roll|, |pitch| are below this, rad.
    pub settle_angle: f64,
    /// and |omega| is below this, rad/s.
    pub settle_rate: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Drop,
            height: 0.85,
            velocity: Vector3::zeros(),
            attitude: EulerAngles::new(0.0, 0.0, 0.0),
            omega: Vector3::zeros(),
            initial_submovement: SubmovementParams::new(0.0, 0.0),
            controller_enabled: true,
            t_max: 2.0,
            dt_physics: 1e-4,
            dt_control: 1e-3,
            noise: NoiseModel::default(),
            seed: 0,
            settle_angle: 2f64.to_radians(),
            settle_rate: 0.5,
        }
    }
}

impl Scenario {
    /// Physics sub-steps per control tick.
    pub fn substeps(&self) -> Result<usize> {
        if !(self.dt_physics > 0.0 && self.dt_control > 0.0) {
            return Err(Error::Config("dt_physics and dt_control must be positive".into()));
        }
        let ratio = self.dt_control / self.dt_physics;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "dt_control ({}) must be an integer multiple of dt_physics ({})",
                self.dt_control, self.dt_physics
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.substeps()?;
        let finite = [self.height, self.t_max, self.settle_angle, self.settle_rate]
            .iter()
            .chain(self.velocity.iter())
            .chain(self.omega.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("scenario values must be finite".into()));
        }
        if self.height < 0.0 || self.t_max < 0.0 {
            return Err(Error::Config("height and t_max must be non-negative".into()));
        }
        if [self.noise.euler, self.noise.gyro, self.noise.accel]
            .iter()
            .any(|s| s.is_nan() || *s < 0.0)
        {
            return Err(Error::Config("noise deviations must be non-negative".into()));
        }
        Ok(())
    }

    /// Initial state with the mass centre `height` above its level resting
    /// height.
    pub fn initial_state(&self, params: &RobotParams) -> BodyState {
        let s = steering_from_submovements(self.initial_submovement);
        let level = BodyState::default();
        BodyState {
            position: Vector3::new(0.0, 0.0, self.height - ground_clearance(&level, &s, params)),
            orientation: self.attitude.to_quaternion(),
            velocity: self.velocity,
            omega: self.omega,
            ..BodyState::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    FreefallStart,
    Settled,
    Touchdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t: f64,
    pub state: BodyState,
    pub steering: SteeringState,
    /// Command applied from this tick until the next.
    pub cmd: TorqueCommand,
    pub mode: ControllerMode,
    pub imu: ImuReading,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TelemetrySample>,
    pub events: Vec<Event>,
    /// Ticks on which allocation hit a singular configuration.
    pub singular_ticks: usize,
}

impl Trajectory {
    pub fn event_time(&self, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.t)
    }

    pub fn touchdown_time(&self) -> Option<f64> {
        self.event_time(EventKind::Touchdown)
    }

    pub fn settle_time(&self) -> Option<f64> {
        self.event_time(EventKind::Settled)
    }

    pub fn freefall_time(&self) -> Option<f64> {
        self.event_time(EventKind::FreefallStart)
    }

    pub fn last(&self) -> Option<&TelemetrySample> {
        self.samples.last()
    }

    /// Sample nearest to `t`.
    pub fn at(&self, t: f64) -> Option<&TelemetrySample> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

const TOUCHDOWN_TOL: f64 = 1e-9;

/// Closed-loop simulation from release until touchdown or `t_max`.
pub fn simulate(scenario: &Scenario, controller: &ControllerConfig, params: &RobotParams) -> Result<Trajectory> {
    params.validate().into_result()?;
    scenario.validate()?;
    controller.gains.validate()?;
    let substeps = scenario.substeps()?;
    let dt = scenario.dt_physics;

    let mut ctl = Controller::new(*controller, scenario.controller_enabled);
    let mut noise = ImuNoise::new(scenario.noise, scenario.seed);
    let mut sub = scenario.initial_submovement;
    let mut steering = steering_from_submovements(sub);
    let mut state = scenario.initial_state(params);
    let gravity = Vector3::new(0.0, 0.0, -params.g);
    let mut traj = Trajectory::default();

    let mut tick: u64 = 0;
    loop {
        let t = tick as f64 * scenario.dt_control;
        let imu = imu_sample(&state, &gravity, params, &mut noise, t);
        let decision = ctl.update(&imu, sub, params);
        if decision.singular {
            traj.singular_ticks += 1;
        }
        if let Some(next) = decision.steering {
            let target = steering_from_submovements(next);
            state = reconfigure_steering(&state, &steering, &target, params)?;
            steering = target;
            sub = next;
        }
        if decision.entered_freefall {
            traj.events.push(Event {
                t,
                kind: EventKind::FreefallStart,
            });
        }
        if traj.freefall_time().is_some() && traj.settle_time().is_none() && is_settled(&state, scenario) {
            traj.events.push(Event {
                t,
                kind: EventKind::Settled,
            });
        }
        let cmd = decision.cmd;
        traj.samples.push(TelemetrySample {
            t,
            state,
            steering,
            cmd,
            mode: ctl.mode(),
            imu,
        });
        if t >= scenario.t_max - 1e-12 {
            return Ok(traj);
        }

        for j in 0..substeps {
            let t0 = t + j as f64 * dt;
            let applied = limit_wheel_speed(&cmd, &state, params);
            let next =
                step_rk4(&state, &applied, &steering, params, dt).map_err(|_| Error::NonFiniteState { t: t0 + dt })?;
            if ground_clearance(&next, &steering, params) <= 0.0 {
                let (h, touch) = bisect_touchdown(&state, &applied, &steering, params, dt)?;
                let t_td = t0 + h;
                ctl.touchdown(t_td);
                traj.events.push(Event {
                    t: t_td,
                    kind: EventKind::Touchdown,
                });
                traj.samples.push(TelemetrySample {
                    t: t_td,
                    state: touch,
                    steering,
                    cmd: TorqueCommand::zero(),
                    mode: ctl.mode(),
                    imu: imu_sample(&touch, &gravity, params, &mut ImuNoise::off(), t_td),
                });
                return Ok(traj);
            }
            state = next;
        }
        tick += 1;
    }
}

fn is_settled(state: &BodyState, scenario: &Scenario) -> bool {
    let e = euler_from_quaternion(&state.orientation);
    e.roll.abs() < scenario.settle_angle
        && e.pitch.abs() < scenario.settle_angle
        && state.omega.norm() < scenario.settle_rate
}

/// Step length in `(0, dt]` at which the lowest contact reaches the ground.
fn bisect_touchdown(
    state: &BodyState,
    cmd: &TorqueCommand,
    s: &SteeringState,
    params: &RobotParams,
    dt: f64,
) -> Result<(f64, BodyState)> {
    let (mut lo, mut hi) = (0.0, dt);
    let mut touch = step_rk4(state, cmd, s, params, hi)?;
    while hi - lo > TOUCHDOWN_TOL {
        let mid = 0.5 * (lo + hi);
        let probe = step_rk4(state, cmd, s, params, mid)?;
        if ground_clearance(&probe, s, params) <= 0.0 {
            hi = mid;
            touch = probe;
        } else {
            lo = mid;
        }
    }
    Ok((hi, touch))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ballistic(height: f64) -> Scenario {
        Scenario {
            height,
            controller_enabled: false,
            t_max: 2.0,
            ..Scenario::default()
        }
    }

    #[test]
    fn rk4_free_fall_matches_closed_form() {
        let p = RobotParams::default();
        let s = SteeringState::neutral();
        let mut state = BodyState::default();
        let h = 0.85;
        let t_end = (2.0 * h / p.g).sqrt();
        let n = (t_end / 1e-3).floor() as usize;
        for _ in 0..n {
            state = step_rk4(&state, &TorqueCommand::zero(), &s, &p, 1e-3).unwrap();
        }
        state = step_rk4(&state, &TorqueCommand::zero(), &s, &p, t_end - n as f64 * 1e-3).unwrap();
        assert!((state.position.z + h).abs() < 1e-6);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = RobotParams::default();
        let s = steering_from_submovements(SubmovementParams::new(0.6, 0.2));
        let cmd = TorqueCommand::symmetric(0.8, -0.5, 0.3);
        let start = BodyState {
            omega: Vector3::new(0.7, -0.4, 0.9),
            wheel_speed: [3.0, -2.0, -3.0, 2.0],
            ..BodyState::default()
        };
        let run = |dt: f64| {
            let n = (0.2 / dt).round() as usize;
            let mut x = start;
            for _ in 0..n {
                x = step_rk4(&x, &cmd, &s, &p, dt).unwrap();
            }
            x
        };
        let reference = run(1e-5);
        let err = |dt: f64| (run(dt).omega - reference.omega).norm();
        let e1 = err(4e-3);
        let e2 = err(2e-3);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn rejects_non_integer_tick_ratio() {
        let sc = Scenario {
            dt_control: 1.5e-4,
            ..Scenario::default()
        };
        assert!(matches!(sc.substeps(), Err(Error::Config(_))));
        assert_eq!(Scenario::default().substeps().unwrap(), 10);
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let sc = Scenario {
            t_max: 0.0,
            ..Scenario::default()
        };
        let traj = simulate(&sc, &ControllerConfig::default(), &RobotParams::default()).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.samples[0].t, 0.0);
    }

    #[test]
    fn uncontrolled_touchdown_is_ballistic() {
        let p = RobotParams::default();
        let traj = simulate(&ballistic(0.85), &ControllerConfig::default(), &p).unwrap();
        let t = traj.touchdown_time().unwrap();
        assert!((t - (2.0 * 0.85 / p.g).sqrt()).abs() < 1e-6);
        assert!(traj.freefall_time().is_some());
    }

    #[test]
    fn imu_reads_zero_in_free_fall_and_g_at_rest() {
        let p = RobotParams::default();
        let state = BodyState {
            orientation: EulerAngles::new(0.3, -0.2, 1.0).to_quaternion(),
            ..BodyState::default()
        };
        let mut n = ImuNoise::off();
        let ff = imu_sample(&state, &Vector3::new(0.0, 0.0, -p.g), &p, &mut n, 0.0);
        assert!(ff.specific_accel.norm() < 1e-12);
        let rest = imu_sample(&state, &Vector3::zeros(), &p, &mut n, 0.0);
        assert!((rest.specific_accel.norm() - p.g).abs() < 1e-12);
    }

    #[test]
    fn noise_is_seeded() {
        let sc = Scenario {
            noise: NoiseModel {
                euler: 1e-3,
                gyro: 1e-2,
                accel: 0.05,
            },
            seed: 7,
            t_max: 0.3,
            ..Scenario::default()
        };
        let p = RobotParams::default();
        let a = simulate(&sc, &ControllerConfig::default(), &p).unwrap();
        let b = simulate(&sc, &ControllerConfig::default(), &p).unwrap();
        assert_eq!(a, b);
        let c = simulate(&Scenario { seed: 8, ..sc }, &ControllerConfig::default(), &p).unwrap();
        assert_ne!(a, c);
    }
}
