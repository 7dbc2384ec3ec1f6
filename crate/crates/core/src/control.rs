//! Outer-loop control law: feedforward plus LQR feedback computed in the
//! spinning control frame, rotated back to E and saturated.

use nalgebra::DVector;

use crate::equilibrium::EquilibriumSpec;
use crate::error::{Error, Result};
use crate::lqr::{GainSet, INPUT_DIM, STATE_DIM};
use crate::model::{rotation_c_to_e, ControlCommand, SystemParams, SystemState, Vec3};

/// Piecewise-linear spin-rate schedule: zero until `start`, a linear ramp to
/// `omega_target` over `ramp_up`, constant for `hover`, a linear ramp back to
/// zero over `ramp_down`, then zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinProfile {
    pub omega_target: f64,
    pub start: f64,
    pub ramp_up: f64,
    pub hover: f64,
    pub ramp_down: f64,
}

/// Spin rate, frame angle and spin acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSample {
    pub omega: f64,
    pub theta: f64,
    pub omega_dot: f64,
}

impl SpinProfile {
    pub fn new(omega_target: f64, start: f64, ramp_up: f64, hover: f64, ramp_down: f64) -> Result<Self> {
        for (name, value) in [("start", start), ("ramp_up", ramp_up), ("hover", hover), ("ramp_down", ramp_down)] {
            if !(value >= 0.0) {
                return Err(Error::InvalidScenario(format!("spin profile `{name}` must be non-negative, got {value}")));
            }
        }
        if !omega_target.is_finite() {
            return Err(Error::InvalidScenario(format!("spin target must be finite, got {omega_target}")));
        }
        Ok(SpinProfile {
            omega_target,
            start,
            ramp_up,
            hover,
            ramp_down,
        })
    }

    /// Spins at `omega` from t = 0 forever.
    pub fn constant(omega: f64) -> Self {
        SpinProfile {
            omega_target: omega,
            start: 0.0,
            ramp_up: 0.0,
            hover: f64::INFINITY,
            ramp_down: 0.0,
        }
    }

    pub fn stationary() -> Self {
        Self::constant(0.0)
    }

    /// Exact values at `t`; `theta` is the analytic integral of the rate.
    pub fn sample(&self, t: f64) -> SpinSample {
        let w = self.omega_target;
        let t1 = self.start + self.ramp_up;
        let t2 = t1 + self.hover;
        let t3 = t2 + self.ramp_down;
        let theta_1 = 0.5 * w * self.ramp_up;
        let theta_2 = theta_1 + w * self.hover;

        if t < self.start {
            SpinSample {
                omega: 0.0,
                theta: 0.0,
                omega_dot: 0.0,
            }
        } else if t < t1 {
            let accel = w / self.ramp_up;
            let tau = t - self.start;
            SpinSample {
                omega: accel * tau,
                theta: 0.5 * accel * tau * tau,
                omega_dot: accel,
            }
        } else if t < t2 {
            SpinSample {
                omega: w,
                theta: theta_1 + w * (t - t1),
                omega_dot: 0.0,
            }
        } else if t < t3 {
            let decel = w / self.ramp_down;
            let tau = t - t2;
            SpinSample {
                omega: w - decel * tau,
                theta: theta_2 + w * tau - 0.5 * decel * tau * tau,
                omega_dot: -decel,
            }
        } else {
            SpinSample {
                omega: 0.0,
                theta: theta_2 + 0.5 * w * self.ramp_down,
                omega_dot: 0.0,
            }
        }
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.sample(t).omega
    }
}

/// Spin rate and frame angle at `t`.
pub fn spin_profile(t: f64, profile: &SpinProfile) -> (f64, f64) {
    let s = profile.sample(t);
    (s.omega, s.theta)
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub gain: GainSet,
    pub eq: EquilibriumSpec,
    pub params: SystemParams,
    pub profile: SpinProfile,
    pub t_max: f64,
    /// Zero-order-hold period, `1 / f_ctrl`.
    pub hold: f64,
}

impl ControllerConfig {
    pub fn new(gain: GainSet, eq: EquilibriumSpec, params: SystemParams, profile: SpinProfile) -> Result<Self> {
        let t_max = params.thrust_limit();
        let hold = 1.0 / params.f_ctrl;
        if !(hold > 0.0) {
            return Err(Error::InvalidParam {
                field: "f_ctrl".into(),
                reason: "hold period must be positive".into(),
            });
        }
        let needed = eq.thrust_1.norm().max(eq.thrust_2.norm());
        if !(t_max > needed) {
            return Err(Error::InvalidParam {
                field: "t_max".into(),
                reason: format!("{t_max} N cannot hold the {needed} N equilibrium thrust"),
            });
        }
        Ok(ControllerConfig {
            gain,
            eq,
            params,
            profile,
            t_max,
            hold,
        })
    }
}

/// C-frame state `[x_p, v_p, x_1, v_1, x_2, v_2]`: positions from `origin`,
/// velocities relative to a frame at angle `theta` spinning at `omega`.
pub fn to_control_frame(state: &SystemState, theta: f64, omega: f64, origin: &Vec3) -> DVector<f64> {
    let rt = rotation_c_to_e(theta).transpose();
    let spin = Vec3::new(0.0, 0.0, omega);
    let mut s = DVector::zeros(STATE_DIM);
    for (k, (x, v)) in [(state.x_p, state.v_p), (state.x_1, state.v_1), (state.x_2, state.v_2)]
        .into_iter()
        .enumerate()
    {
        let xc = rt * (x - origin);
        let vc = rt * v - spin.cross(&xc);
        s.fixed_rows_mut::<3>(6 * k).copy_from(&xc);
        s.fixed_rows_mut::<3>(6 * k + 3).copy_from(&vc);
    }
    s
}

/// Inverse of [`to_control_frame`]. Thrust, angle and clock are copied from
/// `template`.
pub fn from_control_frame(s: &DVector<f64>, theta: f64, omega: f64, origin: &Vec3, template: &SystemState) -> SystemState {
    let r = rotation_c_to_e(theta);
    let spin = Vec3::new(0.0, 0.0, omega);
    let body = |k: usize| {
        let xc = Vec3::new(s[6 * k], s[6 * k + 1], s[6 * k + 2]);
        let vc = Vec3::new(s[6 * k + 3], s[6 * k + 4], s[6 * k + 5]);
        (origin + r * xc, r * (vc + spin.cross(&xc)))
    };
    let (x_p, v_p) = body(0);
    let (x_1, v_1) = body(1);
    let (x_2, v_2) = body(2);
    SystemState {
        x_p,
        v_p,
        x_1,
        v_1,
        x_2,
        v_2,
        ..*template
    }
}

/// Scales `t` down to `t_max` if needed, then removes any downward
/// component. Returns whether anything changed.
fn limit(t: Vec3, t_max: f64) -> (Vec3, bool) {
    let mut out = t;
    let mut changed = false;
    let norm = out.norm();
    if norm > t_max {
        out *= t_max / norm;
        changed = true;
    }
    if out.z < 0.0 {
        out.z = 0.0;
        changed = true;
    }
    (out, changed)
}

/// One tick of the outer loop: `u = ū(ω(t)) − K (s − s̄)` in C, rotated to E
/// by the frame angle of the spin profile at `t`, then saturated.
///
/// The feedforward follows the instantaneous spin rate (including the
/// tangential thrust a spin ramp needs); the gain is that of the target
/// operating point.
pub fn control_step(state: &SystemState, cfg: &ControllerConfig, t: f64) -> ControlCommand {
    let spin = cfg.profile.sample(t);
    let s = to_control_frame(state, spin.theta, spin.omega, &cfg.eq.origin);
    let ds = s - &cfg.gain.model.s_bar;

    let [ff_1, ff_2] = cfg.eq.thrusts_at(spin.omega, spin.omega_dot, &cfg.params);
    let mut u = DVector::zeros(INPUT_DIM);
    u.fixed_rows_mut::<3>(0).copy_from(&ff_1);
    u.fixed_rows_mut::<3>(3).copy_from(&ff_2);
    u -= &cfg.gain.k * ds;

    let r = rotation_c_to_e(spin.theta);
    let (t1, sat_1) = limit(r * Vec3::new(u[0], u[1], u[2]), cfg.t_max);
    let (t2, sat_2) = limit(r * Vec3::new(u[3], u[4], u[5]), cfg.t_max);
    ControlCommand {
        thrust_1: t1,
        thrust_2: t2,
        saturated: sat_1 || sat_2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{build_equilibrium, omega_star};
    use crate::lqr::synthesize;
    use approx::assert_relative_eq;

    fn rotating_setup(beta_deg: f64) -> (ControllerConfig, SystemState) {
        let p = SystemParams::default();
        let b = beta_deg.to_radians();
        let w = omega_star(b, &p).unwrap();
        let (eq, state, _) = build_equilibrium(b, w, &p).unwrap();
        let gain = synthesize(&eq, &p).unwrap();
        (ControllerConfig::new(gain, eq, p, SpinProfile::constant(w)).unwrap(), state)
    }

    #[test]
    fn profile_phases() {
        let prof = SpinProfile::new(2.9, 3.0, 5.0, 40.0, 5.0).unwrap();
        assert_eq!(spin_profile(1.0, &prof), (0.0, 0.0));
        let (w, th) = spin_profile(5.5, &prof);
        assert_relative_eq!(w, 1.45, epsilon = 1e-12);
        // ½ (2.9 / 5) 2.5²
        assert_relative_eq!(th, 1.8125, epsilon = 1e-12);
        let (_, start) = spin_profile(8.0, &prof);
        let (w, end) = spin_profile(48.0 - 1e-12, &prof);
        assert_relative_eq!(w, 2.9, epsilon = 1e-12);
        assert_relative_eq!(end - start, 116.0, epsilon = 1e-9);
        let (w, th) = spin_profile(100.0, &prof);
        assert_eq!(w, 0.0);
        assert_relative_eq!(th, 7.25 + 116.0 + 7.25, epsilon = 1e-9);
        assert!(SpinProfile::new(1.0, 0.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn theta_is_the_integral_of_omega() {
        // Simpson quadrature of the rate as an independent check
        let prof = SpinProfile::new(2.0, 1.0, 4.0, 3.0, 2.0).unwrap();
        let n = 20_000;
        let end = 12.0;
        let h = end / n as f64;
        let mut acc = prof.omega(0.0) + prof.omega(end);
        for i in 1..n {
            acc += prof.omega(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert_relative_eq!(prof.sample(end).theta, acc * h / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn frame_round_trip() {
        let (cfg, mut state) = rotating_setup(45.0);
        state.v_p = Vec3::new(0.1, -0.2, 0.3);
        state.x_2 += Vec3::new(0.05, 0.01, -0.02);
        for theta in [0.0, 0.4, 2.0, -3.0] {
            let s = to_control_frame(&state, theta, 2.4, &cfg.eq.origin);
            let back = from_control_frame(&s, theta, 2.4, &cfg.eq.origin, &state);
            for (a, b) in back.to_array().iter().zip(state.to_array().iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equilibrium_state_has_zero_control_frame_error() {
        let (cfg, state) = rotating_setup(60.0);
        let s = to_control_frame(&state, 0.0, cfg.eq.omega_c, &cfg.eq.origin);
        assert!((s - &cfg.gain.model.s_bar).amax() < 1e-12);
    }

    #[test]
    fn equilibrium_passes_feedforward_through() {
        let (cfg, state0) = rotating_setup(45.0);
        let cmd = control_step(&state0, &cfg, 0.0);
        assert_relative_eq!(cmd.thrust_1, cfg.eq.thrust_1, epsilon = 1e-12);
        assert!(!cmd.saturated);

        for k in 0..100 {
            let t = 0.37 * k as f64 + 0.01;
            let theta = cfg.profile.sample(t).theta;
            let state = from_control_frame(&cfg.gain.model.s_bar, theta, cfg.eq.omega_c, &cfg.eq.origin, &state0);
            let cmd = control_step(&state, &cfg, t);
            let r = rotation_c_to_e(theta);
            assert!((cmd.thrust_1 - r * cfg.eq.thrust_1).amax() < 1e-9);
            assert!((cmd.thrust_2 - r * cfg.eq.thrust_2).amax() < 1e-9);
        }
    }

    #[test]
    fn payload_low_raises_both_thrusts_equally() {
        let p = SystemParams::default();
        let (eq, state0, _) = build_equilibrium(45f64.to_radians(), 0.0, &p).unwrap();
        let cfg = ControllerConfig::new(synthesize(&eq, &p).unwrap(), eq, p, SpinProfile::stationary()).unwrap();
        let mut state = state0;
        state.x_p.z -= 0.1;
        let cmd = control_step(&state, &cfg, 0.0);
        let dz1 = cmd.thrust_1.z - eq.thrust_1.z;
        let dz2 = cmd.thrust_2.z - eq.thrust_2.z;
        assert!(dz1 > 0.0);
        assert_relative_eq!(dz1, dz2, max_relative = 1e-6);

        // raising the payload does the opposite
        let mut state = state0;
        state.x_p.z += 0.1;
        assert!(control_step(&state, &cfg, 0.0).thrust_1.z < eq.thrust_1.z);
    }

    #[test]
    fn saturation_keeps_direction() {
        let (cfg, mut state) = rotating_setup(45.0);
        state.x_1 += Vec3::new(-30.0, 20.0, -40.0);
        state.x_2 += Vec3::new(30.0, 10.0, 50.0);
        let cmd = control_step(&state, &cfg, 0.0);
        assert!(cmd.saturated);
        assert!(cmd.is_admissible(cfg.t_max));

        let raw = Vec3::new(30.0, -40.0, 60.0);
        let (lim, changed) = limit(raw, 20.0);
        assert!(changed);
        assert_relative_eq!(lim.norm(), 20.0, epsilon = 1e-12);
        assert!((lim.normalize().dot(&raw.normalize()) - 1.0).abs() < 1e-12);
        let (down, changed) = limit(Vec3::new(1.0, 0.0, -2.0), 20.0);
        assert!(changed);
        assert_eq!(down, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn config_rejects_unreachable_operating_point() {
        let p = SystemParams {
            t_max: Some(9.0),
            ..SystemParams::default()
        };
        let (eq, _, _) = build_equilibrium(0.5, 0.0, &SystemParams::default()).unwrap();
        let gain = synthesize(&eq, &SystemParams::default()).unwrap();
        assert!(ControllerConfig::new(gain, eq, p, SpinProfile::stationary()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn saturation_never_turns_the_thrust(x in -100.0..100.0f64, y in -100.0..100.0f64, z in 0.0..100.0f64, t_max in 1.0..50.0f64) {
                let raw = Vec3::new(x, y, z);
                prop_assume!(raw.norm() > 1e-6);
                let (lim, _) = limit(raw, t_max);
                prop_assert!(lim.norm() <= t_max * (1.0 + 1e-12));
                prop_assert!((lim.normalize().dot(&raw.normalize()) - 1.0).abs() < 1e-12);
            }
        }
    }
}
