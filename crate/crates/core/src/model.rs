//! Shared domain types: physical parameters, system state, thrust commands
//! and the rotation between the control frame C and the earth frame E.
//!
//! Frames are right-handed with `3_E` pointing up; gravity is `[0, 0, -g]`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Physical constants of the two-vehicle tethered system plus the simulation
/// and control constants that go with them. SI units throughout.
///
/// Defaults are the experimental vehicle (0.7 kg quadrotors, 0.6 kg payload,
/// 1 m tethers, four 0.1 m propellers per vehicle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Quadrotor mass, kg.
    pub m_q: f64,
    /// Payload mass, kg.
    pub m_p: f64,
    /// Tether rest length, m.
    pub ell: f64,
    /// Gravity magnitude, m/s².
    pub g: f64,
    /// Propellers per vehicle.
    pub n_p: u32,
    /// Propeller radius, m.
    pub r_p: f64,
    /// Air density, kg/m³.
    pub rho: f64,
    /// Tether stiffness, N/m.
    pub k_t: f64,
    /// Tether damping, N·s/m.
    pub c_t: f64,
    /// Time constant of the first-order thrust lag standing in for the
    /// onboard attitude loop, s.
    pub tau_att: f64,
    pub drag_enabled: bool,
    /// Quadratic drag coefficient of each vehicle, N·s²/m².
    pub c_d_quad: f64,
    /// Quadratic drag coefficient of the payload, N·s²/m².
    pub c_d_payload: f64,
    /// Physics integration step, s.
    pub dt_physics: f64,
    /// Outer-loop control rate, Hz.
    pub f_ctrl: f64,
    /// Clamp tether tension at zero (a rope cannot push).
    pub slack_clamp: bool,
    /// Thrust saturation per vehicle, N. `None` means `4 m_q g`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Added to the LQR state weight as `q_eps * I`.
    pub q_eps: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            m_q: 0.7,
            m_p: 0.6,
            ell: 1.0,
            g: 9.81,
            n_p: 4,
            r_p: 0.1,
            rho: 1.225,
            k_t: 2000.0,
            c_t: 10.0,
            tau_att: 0.05,
            drag_enabled: false,
            c_d_quad: 0.0,
            c_d_payload: 0.0,
            dt_physics: 0.0005,
            f_ctrl: 50.0,
            slack_clamp: true,
            t_max: None,
            q_eps: 0.0,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "m_q",
    "m_p",
    "ell",
    "g",
    "n_p",
    "r_p",
    "rho",
    "k_t",
    "c_t",
    "tau_att",
    "drag_enabled",
    "c_d_quad",
    "c_d_payload",
    "dt_physics",
    "f_ctrl",
    "slack_clamp",
    "t_max",
    "q_eps",
];

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl SystemParams {
    /// Reduced mass of one vehicle/payload pair, the mass seen by the
    /// tether stretch mode.
    pub fn reduced_mass(&self) -> f64 {
        self.m_q * self.m_p / (self.m_q + self.m_p)
    }

    /// Largest step the integrator guard admits: `2 / sqrt(k_T / m_red)`.
    pub fn max_stable_dt(&self) -> f64 {
        2.0 / (self.k_t / self.reduced_mass()).sqrt()
    }

    pub fn thrust_limit(&self) -> f64 {
        self.t_max.unwrap_or(4.0 * self.m_q * self.g)
    }

    pub fn gravity(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.g)
    }

    /// Physics steps per controller tick.
    pub fn steps_per_control(&self) -> usize {
        ((1.0 / (self.f_ctrl * self.dt_physics)).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_q", self.m_q),
            ("m_p", self.m_p),
            ("ell", self.ell),
            ("g", self.g),
            ("r_p", self.r_p),
            ("rho", self.rho),
            ("k_t", self.k_t),
            ("tau_att", self.tau_att),
            ("dt_physics", self.dt_physics),
            ("f_ctrl", self.f_ctrl),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(invalid(name, format!("must be positive and finite, got {value}")));
            }
        }
        let non_negative = [
            ("c_t", self.c_t),
            ("c_d_quad", self.c_d_quad),
            ("c_d_payload", self.c_d_payload),
            ("q_eps", self.q_eps),
        ];
        for (name, value) in non_negative {
            if !value.is_finite() || value < 0.0 {
                return Err(invalid(name, format!("must be non-negative and finite, got {value}")));
            }
        }
        if self.n_p < 1 {
            return Err(invalid("n_p", "at least one propeller is required"));
        }
        if let Some(t_max) = self.t_max {
            if !t_max.is_finite() || t_max <= 0.0 {
                return Err(invalid("t_max", format!("must be positive and finite, got {t_max}")));
            }
        }
        let dt_limit = self.max_stable_dt();
        if self.dt_physics >= dt_limit {
            return Err(invalid(
                "dt_physics",
                format!(
                    "{} s violates the tether-mode stability guard (must be < {dt_limit:.6} s)",
                    self.dt_physics
                ),
            ));
        }
        if self.f_ctrl * self.dt_physics > 1.0 + 1e-12 {
            return Err(invalid(
                "f_ctrl",
                format!(
                    "{} Hz with dt_physics = {} s leaves less than one physics step per control step",
                    self.f_ctrl, self.dt_physics
                ),
            ));
        }
        Ok(())
    }

    /// Parses a flat `key = value` config (TOML syntax, `#` comments).
    /// Missing keys take their default values.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::ConfigParse {
                line,
                message: e.message().to_string(),
            }
        })?;

        let mut unknown: Vec<String> = table
            .keys()
            .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            unknown.sort();
            return Err(Error::UnknownKeys(unknown));
        }

        let mut params = SystemParams::default();
        for (key, value) in &table {
            params.set(key, value)?;
        }
        params.validate()?;
        Ok(params)
    }

    fn set(&mut self, key: &str, value: &toml::Value) -> Result<()> {
        let real = || -> Result<f64> {
            match value {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                other => Err(invalid(key, format!("expected a number, got {}", other.type_str()))),
            }
        };
        let flag = || -> Result<bool> {
            value
                .as_bool()
                .ok_or_else(|| invalid(key, format!("expected true or false, got {}", value.type_str())))
        };
        match key {
            "m_q" => self.m_q = real()?,
            "m_p" => self.m_p = real()?,
            "ell" => self.ell = real()?,
            "g" => self.g = real()?,
            "n_p" => {
                let n = value
                    .as_integer()
                    .ok_or_else(|| invalid(key, "expected an integer"))?;
                self.n_p = u32::try_from(n).map_err(|_| invalid(key, format!("out of range: {n}")))?;
            }
            "r_p" => self.r_p = real()?,
            "rho" => self.rho = real()?,
            "k_t" => self.k_t = real()?,
            "c_t" => self.c_t = real()?,
            "tau_att" => self.tau_att = real()?,
            "drag_enabled" => self.drag_enabled = flag()?,
            "c_d_quad" => self.c_d_quad = real()?,
            "c_d_payload" => self.c_d_payload = real()?,
            "dt_physics" => self.dt_physics = real()?,
            "f_ctrl" => self.f_ctrl = real()?,
            "slack_clamp" => self.slack_clamp = flag()?,
            "t_max" => self.t_max = Some(real()?),
            "q_eps" => self.q_eps = real()?,
            _ => return Err(Error::UnknownKeys(vec![key.to_string()])),
        }
        Ok(())
    }

    /// Writes every field back out in the format `from_config_text` reads.
    pub fn to_config_text(&self) -> String {
        toml::to_string(self).expect("flat struct of scalars always serializes")
    }
}

/// Reads and validates a parameter file.
pub fn load_params(config_text: &str) -> Result<SystemParams> {
    SystemParams::from_config_text(config_text)
}

/// Coordinate rotation from the control frame C to the earth frame E: a
/// right-handed rotation by `theta` about `3_E`.
/// Degrees for display, with the conversion noise of a degree → radian →
/// degree round trip removed.
pub fn angle_degrees(rad: f64) -> f64 {
    let d = rad.to_degrees();
    let r = (d * 1e9).round() / 1e9;
    if (d - r).abs() < 1e-11 * d.abs().max(1.0) {
        r
    } else {
        d
    }
}

pub fn rotation_c_to_e(theta: f64) -> Mat3 {
    let (s, c) = theta.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Positions and velocities of the payload and both vehicles in E, the
/// lagged thrust actually produced by each vehicle, and the control-frame
/// angle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemState {
    pub x_p: Vec3,
    pub v_p: Vec3,
    pub x_1: Vec3,
    pub v_1: Vec3,
    pub x_2: Vec3,
    pub v_2: Vec3,
    pub thrust_1: Vec3,
    pub thrust_2: Vec3,
    pub theta: f64,
    pub t: f64,
}

/// Number of integrated scalars in a [`SystemState`] (the clock is not one).
pub const STATE_LEN: usize = 25;

impl SystemState {
    pub fn vehicle_position(&self, i: usize) -> Vec3 {
        match i {
            1 => self.x_1,
            2 => self.x_2,
            _ => panic!("vehicle index must be 1 or 2, got {i}"),
        }
    }

    pub fn actual_thrust(&self, i: usize) -> Vec3 {
        match i {
            1 => self.thrust_1,
            2 => self.thrust_2,
            _ => panic!("vehicle index must be 1 or 2, got {i}"),
        }
    }

    pub fn to_array(&self) -> [f64; STATE_LEN] {
        let mut out = [0.0; STATE_LEN];
        let vecs = [
            self.x_p,
            self.v_p,
            self.x_1,
            self.v_1,
            self.x_2,
            self.v_2,
            self.thrust_1,
            self.thrust_2,
        ];
        for (k, v) in vecs.iter().enumerate() {
            out[3 * k..3 * k + 3].copy_from_slice(v.as_slice());
        }
        out[24] = self.theta;
        out
    }

    pub fn from_array(values: &[f64; STATE_LEN], t: f64) -> Self {
        let v = |k: usize| Vec3::new(values[3 * k], values[3 * k + 1], values[3 * k + 2]);
        SystemState {
            x_p: v(0),
            v_p: v(1),
            x_1: v(2),
            v_1: v(3),
            x_2: v(4),
            v_2: v(5),
            thrust_1: v(6),
            thrust_2: v(7),
            theta: values[24],
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.to_array().iter().all(|x| x.is_finite())
    }
}

/// The two commanded thrust vectors, E frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub thrust_1: Vec3,
    pub thrust_2: Vec3,
    /// Set when saturation or the no-downward-thrust clamp changed the
    /// command.
    pub saturated: bool,
}

impl ControlCommand {
    pub fn new(thrust_1: Vec3, thrust_2: Vec3) -> Self {
        ControlCommand {
            thrust_1,
            thrust_2,
            saturated: false,
        }
    }

    pub fn zero() -> Self {
        Self::new(Vec3::zeros(), Vec3::zeros())
    }

    /// Checks the command invariants: bounded magnitude, no downward thrust.
    pub fn is_admissible(&self, t_max: f64) -> bool {
        [self.thrust_1, self.thrust_2]
            .iter()
            .all(|t| t.norm() <= t_max * (1.0 + 1e-12) && t.z >= 0.0 && t.iter().all(|x| x.is_finite()))
    }
}
