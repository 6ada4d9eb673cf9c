//! Flat key-value configuration files.
//!
//! Files are TOML with top-level keys only. Lengths are metres, times
//! seconds, torques N·m; angles are given in degrees under `_deg` keys.
//! Every key is optional and unknown keys are rejected. Omitted inertias are
//! estimated from the geometry (see [`RobotParams::estimate`]).

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, ControllerGains};
use crate::params::{DiagInertia, RobotParams, DEFAULT_A, DEFAULT_B, DEFAULT_C, DEFAULT_CHASSIS_HEIGHT};
use crate::params::{DEFAULT_WHEEL_MASS, DEFAULT_WHEEL_RADIUS};
use crate::simulation::{NoiseModel, Scenario, ScenarioKind};
use crate::state::{EulerAngles, SubmovementParams};
use crate::{Error, Result};

/// Raw contents of a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub name: Option<String>,

    // robot
    pub wheel_mass: Option<f64>,
    pub base_mass: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub chassis_height: Option<f64>,
    pub wheel_radius: Option<f64>,
    pub j_bxx: Option<f64>,
    pub j_byy: Option<f64>,
    pub j_bzz: Option<f64>,
    pub j_wxx: Option<f64>,
    pub j_wyy: Option<f64>,
    pub j_wzz: Option<f64>,
    pub tau_wheel_max: Option<f64>,
    pub tau_steer_max: Option<f64>,
    pub wheel_speed_max: Option<f64>,
    pub g: Option<f64>,

    // controller
    pub kp_roll: Option<f64>,
    pub kp_pitch: Option<f64>,
    pub kp_yaw: Option<f64>,
    pub kd_roll: Option<f64>,
    pub kd_pitch: Option<f64>,
    pub kd_yaw: Option<f64>,
    pub freefall_threshold: Option<f64>,
    pub freefall_debounce: Option<f64>,
    pub flight_alpha_deg: Option<f64>,
    pub flight_beta_deg: Option<f64>,

    // scenario
    pub kind: Option<String>,
    pub height: Option<f64>,
    pub vel_x: Option<f64>,
    pub vel_y: Option<f64>,
    pub vel_z: Option<f64>,
    pub roll_deg: Option<f64>,
    pub pitch_deg: Option<f64>,
    pub yaw_deg: Option<f64>,
    pub omega_x: Option<f64>,
    pub omega_y: Option<f64>,
    pub omega_z: Option<f64>,
    pub ground_alpha_deg: Option<f64>,
    pub ground_beta_deg: Option<f64>,
    pub controller_enabled: Option<bool>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
    pub dt_physics: Option<f64>,
    pub dt_control: Option<f64>,
    pub noise_euler_deg: Option<f64>,
    pub noise_gyro: Option<f64>,
    pub noise_accel: Option<f64>,
    pub settle_angle_deg: Option<f64>,
    pub settle_rate: Option<f64>,
}

/// Every accepted key, in file order.
pub const KEYS: &[&str] = &[
    "name",
    "wheel_mass",
    "base_mass",
    "a",
    "b",
    "c",
    "chassis_height",
    "wheel_radius",
    "j_bxx",
    "j_byy",
    "j_bzz",
    "j_wxx",
    "j_wyy",
    "j_wzz",
    "tau_wheel_max",
    "tau_steer_max",
    "wheel_speed_max",
    "g",
    "kp_roll",
    "kp_pitch",
    "kp_yaw",
    "kd_roll",
    "kd_pitch",
    "kd_yaw",
    "freefall_threshold",
    "freefall_debounce",
    "flight_alpha_deg",
    "flight_beta_deg",
    "kind",
    "height",
    "vel_x",
    "vel_y",
    "vel_z",
    "roll_deg",
    "pitch_deg",
    "yaw_deg",
    "omega_x",
    "omega_y",
    "omega_z",
    "ground_alpha_deg",
    "ground_beta_deg",
    "controller_enabled",
    "t_max",
    "seed",
    "dt_physics",
    "dt_control",
    "noise_euler_deg",
    "noise_gyro",
    "noise_accel",
    "settle_angle_deg",
    "settle_rate",
];

/// Fully resolved run definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub params: RobotParams,
    pub controller: ControllerConfig,
    pub scenario: Scenario,
}

/// Parses config text into a table, normalizing integer literals for
/// floating-point keys.
pub fn parse_table(text: &str) -> Result<toml::Table> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    for (k, v) in table.iter_mut() {
        if let toml::Value::Integer(i) = v {
            if !matches!(k.as_str(), "seed") {
                *v = toml::Value::Float(*i as f64);
            }
        }
    }
    Ok(table)
}

pub fn from_table(table: toml::Table) -> Result<ConfigFile> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

pub fn parse(text: &str) -> Result<RunConfig> {
    from_table(parse_table(text)?)?.resolve()
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut run = parse(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if run.name.is_empty() {
        run.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
    }
    Ok(run)
}

/// Replaces one key in a parsed table. The value is any TOML literal.
pub fn override_key(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    if !KEYS.contains(&key) {
        return Err(Error::UnknownParameter(key.to_string()));
    }
    let parsed = parse_table(&format!("{key} = {value}")).or_else(|_| parse_table(&format!("{key} = \"{value}\"")))?;
    table.extend(parsed);
    Ok(())
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<RunConfig> {
        let wheel_mass = self.wheel_mass.unwrap_or(DEFAULT_WHEEL_MASS);
        let wheel_radius = self.wheel_radius.unwrap_or(DEFAULT_WHEEL_RADIUS);
        let mut p = RobotParams::estimate(
            wheel_mass,
            self.a.unwrap_or(DEFAULT_A),
            self.b.unwrap_or(DEFAULT_B),
            self.c.unwrap_or(DEFAULT_C),
            self.chassis_height.unwrap_or(DEFAULT_CHASSIS_HEIGHT),
            wheel_radius,
        );
        if let Some(m) = self.base_mass {
            let h = self.chassis_height.unwrap_or(DEFAULT_CHASSIS_HEIGHT);
            p.base_mass = m;
            p.base_inertia = DiagInertia::solid_box(m, p.a, p.b, h);
        }
        let jb = p.base_inertia;
        p.base_inertia = DiagInertia::new(
            self.j_bxx.unwrap_or(jb.xx),
            self.j_byy.unwrap_or(jb.yy),
            self.j_bzz.unwrap_or(jb.zz),
        );
        let jw = p.wheel_inertia;
        p.wheel_inertia = DiagInertia::new(
            self.j_wxx.unwrap_or(jw.xx),
            self.j_wyy.unwrap_or(jw.yy),
            self.j_wzz.unwrap_or(jw.zz),
        );
        p.tau_wheel_max = self.tau_wheel_max.unwrap_or(p.tau_wheel_max);
        p.tau_steer_max = self.tau_steer_max.unwrap_or(p.tau_steer_max);
        p.wheel_speed_max = self.wheel_speed_max.unwrap_or(p.wheel_speed_max);
        p.g = self.g.unwrap_or(p.g);
        p.validate().into_result()?;

        let base = ControllerConfig::default();
        let gd = ControllerGains::default();
        let controller = ControllerConfig {
            gains: ControllerGains {
                kp: [
                    self.kp_roll.unwrap_or(gd.kp[0]),
                    self.kp_pitch.unwrap_or(gd.kp[1]),
                    self.kp_yaw.unwrap_or(gd.kp[2]),
                ],
                kd: [
                    self.kd_roll.unwrap_or(gd.kd[0]),
                    self.kd_pitch.unwrap_or(gd.kd[1]),
                    self.kd_yaw.unwrap_or(gd.kd[2]),
                ],
            },
            freefall_threshold: self.freefall_threshold.unwrap_or(base.freefall_threshold),
            freefall_debounce: self.freefall_debounce.unwrap_or(base.freefall_debounce),
            flight_submovement: SubmovementParams::new(
                deg_or(self.flight_alpha_deg, base.flight_submovement.alpha),
                deg_or(self.flight_beta_deg, base.flight_submovement.beta),
            ),
        };
        controller.gains.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(controller.freefall_threshold > 0.0 && controller.freefall_debounce >= 0.0) {
            return Err(Error::Config(
                "freefall_threshold must be positive and freefall_debounce non-negative".into(),
            ));
        }

        let d = Scenario::default();
        let kind = match self.kind.as_deref().unwrap_or("drop") {
            "drop" => ScenarioKind::Drop,
            "ledge" => ScenarioKind::Ledge,
            "custom" => ScenarioKind::Custom,
            other => return Err(Error::Config(format!("unknown scenario kind `{other}`"))),
        };
        let scenario = Scenario {
            kind,
            height: self.height.unwrap_or(d.height),
            velocity: Vector3::new(
                self.vel_x.unwrap_or(0.0),
                self.vel_y.unwrap_or(0.0),
                self.vel_z.unwrap_or(0.0),
            ),
            attitude: EulerAngles::from_degrees(
                self.roll_deg.unwrap_or(0.0),
                self.pitch_deg.unwrap_or(0.0),
                self.yaw_deg.unwrap_or(0.0),
            ),
            omega: Vector3::new(
                self.omega_x.unwrap_or(0.0),
                self.omega_y.unwrap_or(0.0),
                self.omega_z.unwrap_or(0.0),
            ),
            initial_submovement: SubmovementParams::new(
                deg_or(self.ground_alpha_deg, d.initial_submovement.alpha),
                deg_or(self.ground_beta_deg, d.initial_submovement.beta),
            ),
            controller_enabled: self.controller_enabled.unwrap_or(d.controller_enabled),
            t_max: self.t_max.unwrap_or(d.t_max),
            dt_physics: self.dt_physics.unwrap_or(d.dt_physics),
            dt_control: self.dt_control.unwrap_or(d.dt_control),
            noise: NoiseModel {
                euler: deg_or(self.noise_euler_deg, 0.0),
                gyro: self.noise_gyro.unwrap_or(0.0),
                accel: self.noise_accel.unwrap_or(0.0),
            },
            seed: self.seed.unwrap_or(d.seed),
            settle_angle: deg_or(self.settle_angle_deg, d.settle_angle),
            settle_rate: self.settle_rate.unwrap_or(d.settle_rate),
        };
        scenario.validate()?;
        if scenario.t_max <= 0.0 {
            return Err(Error::Config("t_max must be positive".into()));
        }
        Ok(RunConfig {
            name: self.name.clone().unwrap_or_default(),
            params: p,
            controller,
            scenario,
        })
    }
}

fn deg_or(deg: Option<f64>, default_rad: f64) -> f64 {
    deg.map(f64::to_radians).unwrap_or(default_rad)
}
