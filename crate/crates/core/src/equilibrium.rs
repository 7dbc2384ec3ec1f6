//! Static and rotating equilibria of the two-vehicle formation, and the
//! actuator-disk power needed to hold them.
//!
//! In the control frame C, vehicle 1 sits at `ell [sin β, 0, cos β]` above
//! the payload and vehicle 2 at `ell [-sin β, 0, cos β]`. With the frame
//! spinning at `ω` the payload balance fixes the tension at
//! `F = m_p g / (2 cos β)`; each vehicle then needs
//!
//! ```text
//! T cos φ = F cos β + m_q g
//! T sin φ = F sin β - m_q ω² ell sin β
//! ```
//!
//! The vertical part is independent of β and ω. The horizontal part vanishes
//! at `ω* = sqrt(m_p g / (2 m_q ell cos β))`, where every vehicle thrusts
//! straight up with `m_p g / 2 + m_q g`.
//!
//! Power uses hover momentum theory, `P = T^1.5 / (r_p sqrt(2π ρ N_p))` per
//! vehicle with the thrust shared by its `N_p` rotors. The spinning vehicles
//! translate edgewise at `ω ell sin β`; the hover formula is applied to them
//! unchanged, with no inflow correction, so rotating-mode numbers are a
//! first-order estimate.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{angle_degrees, ControlCommand, SystemParams, SystemState, Vec3};

/// Default hover altitude of the payload setpoint, m.
pub const DEFAULT_ALTITUDE: f64 = 1.5;

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && (0.0..FRAC_PI_2).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Singularity { beta })
    }
}

fn check_omega(omega_c: f64) -> Result<()> {
    if omega_c.is_finite() && omega_c >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "spin rate",
            value: omega_c,
        })
    }
}

/// Tension in each tether at equilibrium, `m_p g / (2 cos β)`.
pub fn tension_at_equilibrium(beta: f64, params: &SystemParams) -> Result<f64> {
    check_beta(beta)?;
    Ok(params.m_p * params.g / (2.0 * beta.cos()))
}

/// Horizontal (outward positive) and vertical thrust components one vehicle
/// needs at `(β, ω)` for an inextensible tether of length `ell`.
fn thrust_components(beta: f64, omega_c: f64, params: &SystemParams) -> Result<(f64, f64)> {
    check_beta(beta)?;
    check_omega(omega_c)?;
    let f = tension_at_equilibrium(beta, params)?;
    let horizontal = beta.sin() * (f - params.m_q * omega_c * omega_c * params.ell);
    let vertical = params.m_p * params.g / 2.0 + params.m_q * params.g;
    Ok((horizontal, vertical))
}

/// Required thrust magnitude per vehicle.
pub fn thrust_magnitude(beta: f64, omega_c: f64, params: &SystemParams) -> Result<f64> {
    let (h, v) = thrust_components(beta, omega_c, params)?;
    Ok(h.hypot(v))
}

/// Spin rate at which the tether tension alone supplies the centripetal
/// force. At β = 0 the horizontal term vanishes for every ω; the formula is
/// still evaluated there.
pub fn omega_star(beta: f64, params: &SystemParams) -> Result<f64> {
    check_beta(beta)?;
    Ok((params.m_p * params.g / (2.0 * params.m_q * params.ell * beta.cos())).sqrt())
}

/// Thrust tilt from vertical; positive tilts away from the spin axis.
pub fn tilt_angle(beta: f64, omega_c: f64, params: &SystemParams) -> Result<f64> {
    let (h, v) = thrust_components(beta, omega_c, params)?;
    Ok(h.atan2(v))
}

/// Per-vehicle and two-vehicle aerodynamic power for a per-vehicle thrust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorPower {
    pub per_vehicle: f64,
    pub total: f64,
}

pub fn power(thrust_per_vehicle: f64, params: &SystemParams) -> Result<RotorPower> {
    if !(thrust_per_vehicle >= 0.0) {
        return Err(Error::Domain {
            what: "thrust",
            value: thrust_per_vehicle,
        });
    }
    let per_vehicle = thrust_per_vehicle.powf(1.5) / (params.r_p * (2.0 * PI * params.rho * params.n_p as f64).sqrt());
    Ok(RotorPower {
        per_vehicle,
        total: 2.0 * per_vehicle,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerReport {
    pub beta: f64,
    pub omega_c: f64,
    pub thrust_per_vehicle: f64,
    pub power_per_vehicle: f64,
    pub power_total: f64,
    pub tilt: f64,
    pub tension: f64,
}

pub fn power_report(beta: f64, omega_c: f64, params: &SystemParams) -> Result<PowerReport> {
    let thrust = thrust_magnitude(beta, omega_c, params)?;
    let p = power(thrust, params)?;
    Ok(PowerReport {
        beta,
        omega_c,
        thrust_per_vehicle: thrust,
        power_per_vehicle: p.per_vehicle,
        power_total: p.total,
        tilt: tilt_angle(beta, omega_c, params)?,
        tension: tension_at_equilibrium(beta, params)?,
    })
}

/// A fully resolved operating point.
///
/// Thrusts are C-frame vectors for the spring tether actually used by the
/// simulator: the tether is stretched to `ell + F/k_T` so that it carries
/// exactly `F`, and the centripetal term uses that radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSpec {
    pub beta: f64,
    pub omega_c: f64,
    pub tension: f64,
    pub thrust_1: Vec3,
    pub thrust_2: Vec3,
    pub tilt: f64,
    /// `ω ell sin β`, the nominal orbit speed of each vehicle.
    pub v_tangential: f64,
    /// Loaded tether length `ell + F / k_T`.
    pub tether_length: f64,
    /// Payload setpoint (origin of the control frame) in E.
    pub origin: Vec3,
}

impl EquilibriumSpec {
    /// Vehicle positions relative to the payload, C frame.
    pub fn offsets(&self) -> [Vec3; 2] {
        let (s, c) = self.beta.sin_cos();
        let l = self.tether_length;
        [Vec3::new(l * s, 0.0, l * c), Vec3::new(-l * s, 0.0, l * c)]
    }

    /// C-frame thrusts holding the formation at this geometry while the frame
    /// spins at `omega` and accelerates at `omega_dot`. Includes vehicle drag
    /// compensation when drag is enabled.
    pub fn thrusts_at(&self, omega: f64, omega_dot: f64, params: &SystemParams) -> [Vec3; 2] {
        let (s, c) = self.beta.sin_cos();
        let radius = self.tether_length * s;
        let speed = omega * radius;
        let drag = if params.drag_enabled {
            params.c_d_quad * speed * speed.abs()
        } else {
            0.0
        };
        let t1 = Vec3::new(
            self.tension * s - params.m_q * omega * omega * radius,
            params.m_q * omega_dot * radius + drag,
            self.tension * c + params.m_q * params.g,
        );
        // Vehicle 2 is vehicle 1 rotated by π about the spin axis.
        let t2 = Vec3::new(-t1.x, -t1.y, t1.z);
        [t1, t2]
    }
}

/// [`build_equilibrium_at`] with the setpoint at `[0, 0, 1.5]`.
pub fn build_equilibrium(
    beta: f64,
    omega_c: f64,
    params: &SystemParams,
) -> Result<(EquilibriumSpec, SystemState, ControlCommand)> {
    build_equilibrium_at(beta, omega_c, Vec3::new(0.0, 0.0, DEFAULT_ALTITUDE), params)
}

/// Builds the equilibrium triple: the operating point, the E-frame state at
/// θ = 0 (inertial velocities `ω × r_i`, produced thrust already at the
/// feedforward) and the feedforward command.
pub fn build_equilibrium_at(
    beta: f64,
    omega_c: f64,
    origin: Vec3,
    params: &SystemParams,
) -> Result<(EquilibriumSpec, SystemState, ControlCommand)> {
    check_beta(beta)?;
    check_omega(omega_c)?;
    let tension = tension_at_equilibrium(beta, params)?;
    let mut spec = EquilibriumSpec {
        beta,
        omega_c,
        tension,
        thrust_1: Vec3::zeros(),
        thrust_2: Vec3::zeros(),
        tilt: 0.0,
        v_tangential: omega_c * params.ell * beta.sin(),
        tether_length: params.ell + tension / params.k_t,
        origin,
    };
    let [t1, t2] = spec.thrusts_at(omega_c, 0.0, params);
    spec.thrust_1 = t1;
    spec.thrust_2 = t2;
    spec.tilt = t1.x.atan2(t1.z);

    let spin = Vec3::new(0.0, 0.0, omega_c);
    let [r1, r2] = spec.offsets();
    let state = SystemState {
        x_p: origin,
        v_p: Vec3::zeros(),
        x_1: origin + r1,
        v_1: spin.cross(&r1),
        x_2: origin + r2,
        v_2: spin.cross(&r2),
        thrust_1: t1,
        thrust_2: t2,
        theta: 0.0,
        t: 0.0,
    };
    Ok((spec, state, ControlCommand::new(t1, t2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinMode {
    /// ω = 0.
    Static,
    /// ω = ω*(β).
    RotatingOpt,
}

impl SpinMode {
    pub fn omega(self, beta: f64, params: &SystemParams) -> Result<f64> {
        match self {
            SpinMode::Static => Ok(0.0),
            SpinMode::RotatingOpt => omega_star(beta, params),
        }
    }
}

/// One report per tether angle. A bad grid point yields an error in its slot
/// and the rest of the sweep proceeds.
pub fn sweep_beta(beta_grid: &[f64], mode: SpinMode, params: &SystemParams) -> Vec<Result<PowerReport>> {
    beta_grid
        .iter()
        .map(|&beta| power_report(beta, mode.omega(beta, params)?, params))
        .collect()
}

pub fn sweep_omega(beta: f64, omega_grid: &[f64], params: &SystemParams) -> Vec<Result<PowerReport>> {
    omega_grid
        .iter()
        .map(|&omega| power_report(beta, omega, params))
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub const SWEEP_HEADER: &str = "beta_deg,omega_rad_s,T_vehicle_N,P_vehicle_W,P_total_W,tilt_deg,tension_N";

pub fn write_sweep_csv<W: Write>(reports: &[PowerReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            angle_degrees(r.beta),
            r.omega_c,
            r.thrust_per_vehicle,
            r.power_per_vehicle,
            r.power_total,
            r.tilt.to_degrees(),
            r.tension
        )?;
    }
    Ok(())
}
