//! Flight scenarios: take-off, spin-up, hover, spin-down and landing in
//! simulation, rotor power metered over a window at the end of the hover,
//! and the static-versus-rotating comparison table.

use std::cell::Cell;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::control::{control_step, ControllerConfig, SpinProfile};
use crate::dynamics::{simulate, Trajectory};
use crate::equilibrium::{build_equilibrium_at, omega_star, power, power_report, DEFAULT_ALTITUDE};
use crate::error::{Error, Result};
use crate::lqr::{synthesize, GainCache, GainSet};
use crate::model::{angle_degrees, SystemParams, SystemState, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlightMode {
    Static,
    Rotating,
}

impl fmt::Display for FlightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlightMode::Static => "static",
            FlightMode::Rotating => "rotating",
        })
    }
}

impl FromStr for FlightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(FlightMode::Static),
            "rotating" => Ok(FlightMode::Rotating),
            other => Err(Error::InvalidScenario(format!("unknown mode `{other}`"))),
        }
    }
}

/// Phase durations in seconds. Spin ramps are ignored in static mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phases {
    pub takeoff: f64,
    pub spin_up: f64,
    pub hover: f64,
    pub spin_down: f64,
    pub land: f64,
}

impl Default for Phases {
    fn default() -> Self {
        Phases {
            takeoff: 2.0,
            spin_up: 8.0,
            hover: 40.0,
            spin_down: 8.0,
            land: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpan {
    pub name: &'static str,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub mode: FlightMode,
    /// Tether angle, rad.
    pub beta: f64,
    /// Hover spin rate; `None` selects ω*(β). Ignored in static mode.
    pub omega: Option<f64>,
    pub phases: Phases,
    /// Length of the metering window that ends with the hover, s.
    pub metering_window: f64,
    /// Rigid translation applied to the whole formation at t = 0, m.
    pub perturbation: Vec3,
    /// Record every n-th physics step.
    pub decimation: usize,
    /// Rotor efficiency; reported power is divided by it.
    pub efficiency: f64,
    pub origin: Vec3,
}

impl ScenarioSpec {
    pub fn new(mode: FlightMode, beta: f64) -> Self {
        ScenarioSpec {
            mode,
            beta,
            omega: None,
            phases: Phases::default(),
            metering_window: 20.0,
            perturbation: Vec3::zeros(),
            decimation: 10,
            efficiency: 1.0,
            origin: Vec3::new(0.0, 0.0, DEFAULT_ALTITUDE),
        }
    }

    /// Starts directly at the hover operating point and flies only the hover.
    pub fn hover_only(mode: FlightMode, beta: f64, hover: f64) -> Self {
        ScenarioSpec {
            phases: Phases {
                takeoff: 0.0,
                spin_up: 0.0,
                hover,
                spin_down: 0.0,
                land: 0.0,
            },
            metering_window: hover,
            ..Self::new(mode, beta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.phases;
        for (name, v) in [
            ("takeoff", p.takeoff),
            ("spin_up", p.spin_up),
            ("spin_down", p.spin_down),
            ("land", p.land),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} duration must be non-negative, got {v}")));
            }
        }
        if !(p.hover > 0.0 && p.hover.is_finite()) {
            return Err(Error::InvalidScenario(format!("hover duration must be positive, got {}", p.hover)));
        }
        if !(self.metering_window > 0.0 && self.metering_window <= p.hover) {
            return Err(Error::InvalidScenario(format!(
                "metering window {} s must lie within the {} s hover",
                self.metering_window, p.hover
            )));
        }
        if self.decimation == 0 {
            return Err(Error::InvalidScenario("decimation must be at least 1".into()));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidScenario(format!("efficiency must be in (0, 1], got {}", self.efficiency)));
        }
        if !self.perturbation.iter().chain(self.origin.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidScenario("perturbation and origin must be finite".into()));
        }
        if let Some(w) = self.omega {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidScenario(format!("spin rate must be non-negative, got {w}")));
            }
        }
        Ok(())
    }

    /// Hover spin rate after resolving the automatic choice.
    pub fn target_omega(&self, params: &SystemParams) -> Result<f64> {
        match (self.mode, self.omega) {
            (FlightMode::Static, _) => Ok(0.0),
            (FlightMode::Rotating, Some(w)) => Ok(w),
            (FlightMode::Rotating, None) => omega_star(self.beta, params),
        }
    }

    fn ramps(&self) -> (f64, f64) {
        match self.mode {
            FlightMode::Static => (0.0, 0.0),
            FlightMode::Rotating => (self.phases.spin_up, self.phases.spin_down),
        }
    }

    /// Phase boundaries in flight order. Empty phases are dropped.
    pub fn timeline(&self) -> Vec<PhaseSpan> {
        let (up, down) = self.ramps();
        let p = &self.phases;
        let mut spans = Vec::new();
        let mut t = 0.0;
        for (name, d) in [
            ("takeoff", p.takeoff),
            ("spin_up", up),
            ("hover", p.hover),
            ("spin_down", down),
            ("land", p.land),
        ] {
            if d > 0.0 {
                spans.push(PhaseSpan {
                    name,
                    start: t,
                    end: t + d,
                });
            }
            t += d;
        }
        spans
    }

    pub fn duration(&self) -> f64 {
        self.timeline().last().map_or(0.0, |s| s.end)
    }

    pub fn spin_profile(&self, params: &SystemParams) -> Result<SpinProfile> {
        let (up, down) = self.ramps();
        SpinProfile::new(self.target_omega(params)?, self.phases.takeoff, up, self.phases.hover, down)
    }
}

fn phase_at(timeline: &[PhaseSpan], t: f64) -> &'static str {
    timeline
        .iter()
        .find(|s| t < s.end)
        .or(timeline.last())
        .map_or("hover", |s| s.name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: FlightMode,
    pub beta: f64,
    pub omega_target: f64,
    /// Mean and population standard deviation of total rotor power, W.
    pub power_mean: f64,
    pub power_std: f64,
    /// Model power at the operating point, same efficiency.
    pub analytic_power: f64,
    /// Mean thrust tilt from vertical per vehicle, rad.
    pub tilt_mean: [f64; 2],
    /// Largest payload distance from the setpoint during the hover, m.
    pub max_payload_deviation: f64,
    /// Formation yaw rate recovered from vehicle positions, rad/s.
    pub omega_achieved: f64,
    /// Mean tether angle recovered from positions, rad.
    pub beta_measured: f64,
    /// Controller ticks whose command hit a thrust limit.
    pub saturated_ticks: usize,
    pub window: (f64, f64),
    pub phases: Vec<PhaseSpan>,
}

impl RunSummary {
    pub fn relative_power_error(&self) -> f64 {
        (self.power_mean - self.analytic_power).abs() / self.analytic_power
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("mode", self.mode.to_string());
        line("beta_deg", format!("{}", angle_degrees(self.beta)));
        line("omega_target_rad_s", format!("{}", self.omega_target));
        line("omega_achieved_rad_s", format!("{}", self.omega_achieved));
        line("beta_measured_deg", format!("{}", self.beta_measured.to_degrees()));
        line("power_mean_W", format!("{}", self.power_mean));
        line("power_std_W", format!("{}", self.power_std));
        line("power_analytic_W", format!("{}", self.analytic_power));
        line("tilt_mean_deg", format!("[{}, {}]", self.tilt_mean[0].to_degrees(), self.tilt_mean[1].to_degrees()));
        line("max_payload_deviation_m", format!("{}", self.max_payload_deviation));
        line("saturated_ticks", self.saturated_ticks.to_string());
        line("window_s", format!("[{}, {}]", self.window.0, self.window.1));
        for s in &self.phases {
            line(&format!("phase.{}", s.name), format!("[{}, {}]", s.start, s.end));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

/// Flies `spec` with gains synthesized on the spot.
pub fn run_scenario(spec: &ScenarioSpec, params: &SystemParams) -> Result<Run> {
    run_scenario_with(spec, params, None)
}

/// Flies `spec`, loading gains from `cache` when given.
pub fn run_scenario_with(spec: &ScenarioSpec, params: &SystemParams, cache: Option<&GainCache>) -> Result<Run> {
    params.validate()?;
    spec.validate()?;
    let timeline = spec.timeline();
    let profile = spec.spin_profile(params)?;
    let omega_target = profile.omega_target;
    let gain_for = |eq| match cache {
        Some(c) => c.load_or_synthesize(eq, params),
        None => synthesize(eq, params),
    };
    let wrap = |phase: &'static str, t: f64| move |e: Error| Error::Phase { phase, t, source: Box::new(e) };

    let (static_eq, _, _) = build_equilibrium_at(spec.beta, 0.0, spec.origin, params)?;
    let (target_eq, _, _) = build_equilibrium_at(spec.beta, omega_target, spec.origin, params)?;
    let hover = timeline.iter().find(|s| s.name == "hover").copied().expect("hover is never empty");
    let first = timeline[0];

    let static_gain: GainSet = gain_for(&static_eq).map_err(wrap(first.name, 0.0))?;
    let target_gain = if omega_target == 0.0 {
        static_gain.clone()
    } else {
        let used_from = timeline.iter().find(|s| s.name == "spin_up").unwrap_or(&hover);
        gain_for(&target_eq).map_err(wrap(used_from.name, used_from.start))?
    };
    let static_cfg = ControllerConfig::new(static_gain, static_eq, params.clone(), profile)?;
    let target_cfg = ControllerConfig::new(target_gain, target_eq, params.clone(), profile)?;

    // spawn at the operating point the profile asks for at t = 0
    let start = profile.sample(0.0);
    let (_, mut initial, _) = build_equilibrium_at(spec.beta, start.omega, spec.origin, params)?;
    if start.omega > 0.0 {
        initial.thrust_1 = target_cfg.eq.thrusts_at(start.omega, start.omega_dot, params)[0];
        initial.thrust_2 = target_cfg.eq.thrusts_at(start.omega, start.omega_dot, params)[1];
    }
    initial.theta = start.theta;
    for x in [&mut initial.x_p, &mut initial.x_1, &mut initial.x_2] {
        *x += spec.perturbation;
    }

    let saturated = Cell::new(0usize);
    let last_t = Cell::new(0.0);
    let mut controller = |s: &SystemState| {
        last_t.set(s.t);
        let cfg = match phase_at(&timeline, s.t) {
            "takeoff" | "land" => &static_cfg,
            _ => &target_cfg,
        };
        let cmd = control_step(s, cfg, s.t);
        if cmd.saturated {
            saturated.set(saturated.get() + 1);
        }
        cmd
    };
    let omega = |t: f64| profile.omega(t);
    let trajectory = simulate(&initial, &mut controller, &omega, params, spec.duration(), spec.decimation)
        .map_err(|e| {
            let t = match e {
                Error::IntegrationBlowup { t } => t,
                _ => last_t.get(),
            };
            Error::Phase {
                phase: phase_at(&timeline, t),
                t,
                source: Box::new(e),
            }
        })?;

    let summary = summarize(
        spec,
        params,
        &trajectory,
        omega_target,
        saturated.get(),
        hover,
        timeline.clone(),
    )?;
    Ok(Run { trajectory, summary })
}

fn summarize(
    spec: &ScenarioSpec,
    params: &SystemParams,
    traj: &Trajectory,
    omega_target: f64,
    saturated_ticks: usize,
    hover: PhaseSpan,
    phases: Vec<PhaseSpan>,
) -> Result<RunSummary> {
    let tol = 0.5 * params.dt_physics;
    let window = (hover.end - spec.metering_window, hover.end);
    let metered: Vec<&SystemState> = traj
        .samples
        .iter()
        .map(|s| &s.state)
        .filter(|s| s.t >= window.0 - tol && s.t <= window.1 + tol)
        .collect();
    if metered.is_empty() {
        return Err(Error::InvalidScenario("metering window holds no samples".into()));
    }
    let n = metered.len() as f64;

    let mut powers = Vec::with_capacity(metered.len());
    for s in &metered {
        let mut total = 0.0;
        for i in 1..=2 {
            total += power(s.actual_thrust(i).norm(), params)?.per_vehicle;
        }
        powers.push(total / spec.efficiency);
    }
    let power_mean = powers.iter().sum::<f64>() / n;
    let power_std = (powers.iter().map(|p| (p - power_mean).powi(2)).sum::<f64>() / n).sqrt();

    let mut tilt_mean = [0.0; 2];
    let mut beta_sum = 0.0;
    for s in &metered {
        for i in 0..2 {
            let t = s.actual_thrust(i + 1);
            tilt_mean[i] += t.xy().norm().atan2(t.z) / n;
            let r = s.vehicle_position(i + 1) - s.x_p;
            beta_sum += r.xy().norm().atan2(r.z);
        }
    }

    let yaw = |s: &SystemState| {
        let d = s.x_1 - s.x_2;
        d.y.atan2(d.x)
    };
    let mut unwrapped = 0.0;
    let mut prev = yaw(metered[0]);
    for s in &metered[1..] {
        let a = yaw(s);
        let mut d = a - prev;
        d -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
        unwrapped += d;
        prev = a;
    }
    let span = metered[metered.len() - 1].t - metered[0].t;
    let omega_achieved = if span > 0.0 { unwrapped / span } else { 0.0 };

    let max_payload_deviation = traj
        .samples
        .iter()
        .filter(|s| s.state.t >= hover.start - tol && s.state.t <= hover.end + tol)
        .map(|s| (s.state.x_p - spec.origin).norm())
        .fold(0.0, f64::max);

    let analytic_power = power_report(spec.beta, omega_target, params)?.power_total / spec.efficiency;
    Ok(RunSummary {
        mode: spec.mode,
        beta: spec.beta,
        omega_target,
        power_mean,
        power_std,
        analytic_power,
        tilt_mean,
        max_payload_deviation,
        omega_achieved,
        beta_measured: beta_sum / (2.0 * n),
        saturated_ticks,
        window,
        phases,
    })
}

/// First sample time after which the payload stays within `tol` of `origin`.
pub fn settling_time(traj: &Trajectory, origin: &Vec3, tol: f64) -> Option<f64> {
    let mut settled = None;
    for s in &traj.samples {
        if (s.state.x_p - origin).norm() < tol {
            settled.get_or_insert(s.state.t);
        } else {
            settled = None;
        }
    }
    settled
}

#[derive(Debug)]
pub struct ComparisonRow {
    pub beta: f64,
    pub static_run: Result<RunSummary>,
    pub rotating_run: Result<RunSummary>,
    /// Saving predicted by the power model.
    pub analytic_saving: Option<f64>,
}

impl ComparisonRow {
    /// `(P_s − P_r) / P_s` from metered power.
    pub fn saving(&self) -> Option<f64> {
        match (&self.static_run, &self.rotating_run) {
            (Ok(s), Ok(r)) => Some((s.power_mean - r.power_mean) / s.power_mean),
            _ => None,
        }
    }
}

/// Runs a static and a rotating-at-ω* scenario per tether angle. `template`
/// supplies everything but mode, angle and spin rate. Cells are flown
/// concurrently; rows come back in grid order.
pub fn compare_modes(beta_grid: &[f64], params: &SystemParams, template: &ScenarioSpec) -> Vec<ComparisonRow> {
    let cell = |i: usize| {
        let beta = beta_grid[i / 2];
        let mode = if i % 2 == 0 {
            FlightMode::Static
        } else {
            FlightMode::Rotating
        };
        let spec = ScenarioSpec {
            mode,
            beta,
            omega: None,
            ..template.clone()
        };
        run_scenario(&spec, params).map(|run| run.summary)
    };
    let cells: Vec<Result<RunSummary>> = map_cells(2 * beta_grid.len(), cell);

    let mut cells = cells.into_iter();
    beta_grid
        .iter()
        .map(|&beta| {
            let static_run = cells.next().expect("two cells per angle");
            let rotating_run = cells.next().expect("two cells per angle");
            let analytic_saving = omega_star(beta, params).ok().and_then(|w| {
                let s = power_report(beta, 0.0, params).ok()?.power_total;
                let r = power_report(beta, w, params).ok()?.power_total;
                Some((s - r) / s)
            });
            ComparisonRow {
                beta,
                static_run,
                rotating_run,
                analytic_saving,
            }
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn map_cells<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_cells<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

pub const COMPARISON_HEADER: &str = "beta_deg,omega_rad_s,P_static_mean_W,P_static_std_W,\
P_rotating_mean_W,P_rotating_std_W,saving,saving_model,status";

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{COMPARISON_HEADER}")?;
    let num = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
    for row in rows {
        let s = row.static_run.as_ref().ok();
        let r = row.rotating_run.as_ref().ok();
        let status = match (&row.static_run, &row.rotating_run) {
            (Ok(_), Ok(_)) => "ok".to_string(),
            (Err(e), _) | (_, Err(e)) => format!("\"{}\"", e.to_string().replace('"', "'")),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            angle_degrees(row.beta),
            num(r.map(|r| r.omega_target)),
            num(s.map(|s| s.power_mean)),
            num(s.map(|s| s.power_std)),
            num(r.map(|r| r.power_mean)),
            num(r.map(|r| r.power_std)),
            num(row.saving()),
            num(row.analytic_saving),
            status
        )?;
    }
    Ok(())
}
