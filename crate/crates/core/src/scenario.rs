//! Scenario runs, comparisons, parameter sweeps and CSV telemetry.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch;
use crate::config::{self, RunConfig};
use crate::controller::linearized_plant;
use crate::simulation::{simulate, Trajectory};
use crate::{Error, Result};

/// Column order of the telemetry CSV.
pub const CSV_HEADER: &str = "t,phi,theta,psi,omega_x,omega_y,omega_z,tau_1,tau_2,tau_3,tau_4,tau_delta,delta_1,delta_2,delta_3,delta_4,pos_x,pos_y,pos_z,wheel_w1,wheel_w2,wheel_w3,wheel_w4,mode,sat_mask";

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FOURWIDS_OUT_DIR";

/// Reported in every comparison: the simulator has no contact model.
pub const IMPACT_NOTE: &str = "impact-phase accelerations are out of scope: the simulation ends at first contact";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub freefall_time: Option<f64>,
    pub settle_time: Option<f64>,
    pub touchdown_time: Option<f64>,
    /// Roll, pitch, yaw at touchdown, degrees.
    pub touchdown_euler_deg: Option<[f64; 3]>,
    /// Body rates at touchdown, rad/s.
    pub touchdown_omega: Option<[f64; 3]>,
    /// Time of the last sample, s.
    pub end_time: f64,
    pub peak_tau: [f64; 4],
    /// Fraction of control ticks in flight with each drive at its limit.
    pub saturation_fraction: [f64; 4],
    /// Largest specific-force magnitude before touchdown, m/s².
    pub max_specific_accel: f64,
    pub singular_ticks: usize,
}

pub fn summarize(name: &str, traj: &Trajectory) -> RunSummary {
    let touchdown = traj.touchdown_time().and(traj.last());
    let mut peak = [0.0f64; 4];
    let mut sat = [0usize; 4];
    let mut flight = 0usize;
    let mut max_acc = 0.0f64;
    let ticks = match traj.touchdown_time() {
        Some(_) => &traj.samples[..traj.samples.len() - 1],
        None => &traj.samples[..],
    };
    for s in ticks {
        max_acc = max_acc.max(s.imu.specific_accel.norm());
        for (pk, t) in peak.iter_mut().zip(s.cmd.tau) {
            *pk = pk.max(t.abs());
        }
        if s.mode == crate::controller::ControllerMode::FreefallStabilize {
            flight += 1;
            for (n, hit) in sat.iter_mut().zip(s.cmd.saturated) {
                *n += hit as usize;
            }
        }
    }
    let frac = |n: usize| if flight == 0 { 0.0 } else { n as f64 / flight as f64 };
    RunSummary {
        name: name.to_string(),
        freefall_time: traj.freefall_time(),
        settle_time: traj.settle_time(),
        touchdown_time: traj.touchdown_time(),
        touchdown_euler_deg: touchdown.map(|s| s.state.euler().to_degrees()),
        touchdown_omega: touchdown.map(|s| s.state.omega.into()),
        end_time: traj.last().map_or(0.0, |s| s.t),
        peak_tau: peak,
        saturation_fraction: sat.map(frac),
        max_specific_accel: max_acc,
        singular_ticks: traj.singular_ticks,
    }
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.10e}");
}

/// Telemetry as CSV text: one row per control tick plus the touchdown row.
pub fn telemetry_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(256 * (traj.samples.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let _ = write!(out, "{:.10e}", s.t);
        for v in s.state.euler().to_degrees() {
            num(&mut out, v);
        }
        for v in s.state.omega.iter() {
            num(&mut out, *v);
        }
        for v in s.cmd.tau {
            num(&mut out, v);
        }
        num(&mut out, s.cmd.tau_delta);
        for v in s.steering.delta {
            num(&mut out, v.to_degrees());
        }
        for v in s.state.position.iter() {
            num(&mut out, *v);
        }
        for v in s.state.wheel_speed {
            num(&mut out, v);
        }
        let _ = writeln!(out, ",{},{}", s.mode.as_str(), s.cmd.sat_mask());
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Simulates a resolved config and writes `<out>/<name>.csv`.
pub fn execute(run: &RunConfig, out_dir: &Path) -> Result<(RunSummary, Trajectory)> {
    let traj = simulate(&run.scenario, &run.controller, &run.params)?;
    write_file(&out_dir.join(format!("{}.csv", run.name)), &telemetry_csv(&traj))?;
    Ok((summarize(&run.name, &traj), traj))
}

pub fn run_scenario(config_path: &Path, out_dir: &Path) -> Result<RunSummary> {
    let run = config::load(config_path)?;
    execute(&run, out_dir).map(|(s, _)| s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    /// `b - a` touchdown roll, pitch, yaw in degrees.
    pub touchdown_euler_deg: Option<[f64; 3]>,
    /// `b - a` settle time, s.
    pub settle_time: Option<f64>,
    pub touchdown_time: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: RunSummary,
    pub b: RunSummary,
    pub delta: DeltaReport,
}

pub fn delta(a: &RunSummary, b: &RunSummary) -> DeltaReport {
    let diff = |x: Option<f64>, y: Option<f64>| Some(y? - x?);
    DeltaReport {
        touchdown_euler_deg: match (a.touchdown_euler_deg, b.touchdown_euler_deg) {
            (Some(x), Some(y)) => Some(std::array::from_fn(|i| y[i] - x[i])),
            _ => None,
        },
        settle_time: diff(a.settle_time, b.settle_time),
        touchdown_time: diff(a.touchdown_time, b.touchdown_time),
        note: IMPACT_NOTE.to_string(),
    }
}

/// Runs two configs, writing each run's CSV, a side-by-side attitude CSV and
/// a delta table.
pub fn compare(a: &Path, b: &Path, out_dir: &Path) -> Result<Comparison> {
    let mut runs = vec![config::load(a)?, config::load(b)?];
    if runs[0].name == runs[1].name {
        runs[0].name.push_str("_a");
        runs[1].name.push_str("_b");
    }
    let results = batch::map(&runs, |r| simulate(&r.scenario, &r.controller, &r.params));
    let mut trajs = Vec::with_capacity(2);
    for (run, res) in runs.iter().zip(results) {
        let traj = res?;
        write_file(&out_dir.join(format!("{}.csv", run.name)), &telemetry_csv(&traj))?;
        trajs.push(traj);
    }
    let sa = summarize(&runs[0].name, &trajs[0]);
    let sb = summarize(&runs[1].name, &trajs[1]);
    write_file(&out_dir.join("compare.csv"), &side_by_side(&trajs[0], &trajs[1]))?;
    let d = delta(&sa, &sb);
    write_file(&out_dir.join("delta.csv"), &delta_csv(&sa, &sb))?;
    Ok(Comparison { a: sa, b: sb, delta: d })
}

fn side_by_side(a: &Trajectory, b: &Trajectory) -> String {
    let mut out = String::from("t_a,phi_a,theta_a,psi_a,t_b,phi_b,theta_b,psi_b\n");
    let n = a.samples.len().max(b.samples.len());
    for k in 0..n {
        let mut cells = Vec::with_capacity(8);
        for traj in [a, b] {
            match traj.samples.get(k) {
                Some(s) => {
                    cells.push(format!("{:.10e}", s.t));
                    cells.extend(s.state.euler().to_degrees().iter().map(|v| format!("{v:.10e}")));
                }
                None => cells.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

fn delta_csv(a: &RunSummary, b: &RunSummary) -> String {
    let mut out = String::from("metric,a,b,delta\n");
    let mut row = |name: &str, x: Option<f64>, y: Option<f64>| {
        let d = match (x, y) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        };
        let _ = writeln!(out, "{name},{},{},{}", opt(x), opt(y), opt(d));
    };
    let e = |s: &RunSummary, i: usize| s.touchdown_euler_deg.map(|v| v[i]);
    row("touchdown_roll_deg", e(a, 0), e(b, 0));
    row("touchdown_pitch_deg", e(a, 1), e(b, 1));
    row("touchdown_yaw_deg", e(a, 2), e(b, 2));
    row("settle_time", a.settle_time, b.settle_time);
    row("touchdown_time", a.touchdown_time, b.touchdown_time);
    let _ = writeln!(out, "impact_accel,,,{IMPACT_NOTE}");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: String,
    pub value: String,
    pub summary: RunSummary,
}

/// Builds one resolved config per value of `param`.
pub fn sweep_configs(config_path: &Path, param: &str, values: &[String]) -> Result<Vec<RunConfig>> {
    let text = fs::read_to_string(config_path).map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
    let base = config::parse_table(&text)?;
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    values
        .iter()
        .map(|v| {
            let mut table = base.clone();
            config::override_key(&mut table, param, v)?;
            let mut run = config::from_table(table)?.resolve()?;
            let name = if run.name.is_empty() {
                stem.clone()
            } else {
                run.name.clone()
            };
            run.name = format!("{name}_{param}_{}", file_safe(v));
            Ok(run)
        })
        .collect()
}

fn file_safe(v: &str) -> String {
    v.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// One run per value, each checked for linear closed-loop stability first.
/// Writes per-run CSVs and `sweep_<param>.csv`.
pub fn sweep(config_path: &Path, param: &str, values: &[String], out_dir: &Path) -> Result<Vec<SweepPoint>> {
    let runs = sweep_configs(config_path, param, values)?;
    for (run, v) in runs.iter().zip(values) {
        if run.scenario.controller_enabled && !linearized_plant(&run.params)?.is_stable(&run.controller.gains) {
            return Err(Error::Config(format!("{param} = {v}: closed loop is not stable")));
        }
    }
    let results = batch::map(&runs, |r| execute(r, out_dir).map(|(s, _)| s));
    let mut points = Vec::with_capacity(runs.len());
    for (v, res) in values.iter().zip(results) {
        points.push(SweepPoint {
            param: param.to_string(),
            value: v.clone(),
            summary: res?,
        });
    }
    write_file(
        &out_dir.join(format!("sweep_{}.csv", file_safe(param))),
        &sweep_csv(&points),
    )?;
    Ok(points)
}

fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(
        "param,value,touchdown_time,settle_time,touchdown_roll_deg,touchdown_pitch_deg,peak_tau_1,peak_tau_2,peak_tau_3,peak_tau_4,sat_1,sat_2,sat_3,sat_4\n",
    );
    for p in points {
        let s = &p.summary;
        let e = |i: usize| s.touchdown_euler_deg.map(|v| v[i]);
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            p.param,
            p.value,
            opt(s.touchdown_time),
            opt(s.settle_time),
            opt(e(0)),
            opt(e(1))
        );
        for v in s.peak_tau.iter().chain(s.saturation_fraction.iter()) {
            let _ = write!(out, ",{v:.10e}");
        }
        out.push('\n');
    }
    out
}

/// Output directory from the flag, the environment, or `./out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_has_25_columns_and_rows_match() {
        let run = config::parse("t_max = 0.01").unwrap();
        let traj = simulate(&run.scenario, &run.controller, &run.params).unwrap();
        let csv = telemetry_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(CSV_HEADER.split(',').count(), 25);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.split(',').count() == 25));
    }

    #[test]
    fn identical_summaries_have_zero_delta() {
        let run = config::parse("roll_deg = 5\nt_max = 1.0").unwrap();
        let traj = simulate(&run.scenario, &run.controller, &run.params).unwrap();
        let s = summarize("x", &traj);
        let d = delta(&s, &s);
        assert_eq!(d.touchdown_euler_deg, Some([0.0; 3]));
        assert_eq!(d.touchdown_time, Some(0.0));
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(file_safe("1e-3"), "1e-3");
        assert_eq!(file_safe("\"a b\""), "_a_b_");
    }
}
