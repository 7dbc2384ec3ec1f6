//! Nonlinear three-body equations of motion, integrated in the inertial
//! frame E with fixed-step RK4.
//!
//! Each vehicle obeys `m_q a_i = T_i + m_q g + f_d,i - F_i r_i`, the payload
//! `m_p a_p = m_p g + f_d,p + sum F_i r_i`, and each tether is a stiff
//! spring-damper `F_i = k_T (|r_i| - ell) + c_T d|r_i|/dt`. The produced
//! thrust follows the command through a first-order lag.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{ControlCommand, SystemParams, SystemState, Vec3, STATE_LEN};

/// Scalar tether tension and the unit vector from the payload to the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetherForce {
    pub tension: f64,
    pub direction: Vec3,
}

/// Time derivative of every integrated [`SystemState`] field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub v_p: Vec3,
    pub a_p: Vec3,
    pub v_1: Vec3,
    pub a_1: Vec3,
    pub v_2: Vec3,
    pub a_2: Vec3,
    pub thrust_rate_1: Vec3,
    pub thrust_rate_2: Vec3,
    pub theta_rate: f64,
}

impl StateDerivative {
    pub fn to_array(&self) -> [f64; STATE_LEN] {
        let mut out = [0.0; STATE_LEN];
        let vecs = [
            self.v_p,
            self.a_p,
            self.v_1,
            self.a_1,
            self.v_2,
            self.a_2,
            self.thrust_rate_1,
            self.thrust_rate_2,
        ];
        for (k, v) in vecs.iter().enumerate() {
            out[3 * k..3 * k + 3].copy_from_slice(v.as_slice());
        }
        out[24] = self.theta_rate;
        out
    }
}

/// Accelerations of the three bodies for given positions, velocities and
/// applied thrusts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyAccelerations {
    pub payload: Vec3,
    pub vehicles: [Vec3; 2],
    pub tethers: [TetherForce; 2],
}

pub fn tether_force(x_i: &Vec3, v_i: &Vec3, x_p: &Vec3, v_p: &Vec3, params: &SystemParams) -> Result<TetherForce> {
    tether_force_for(1, x_i, v_i, x_p, v_p, params)
}

fn tether_force_for(
    vehicle: usize,
    x_i: &Vec3,
    v_i: &Vec3,
    x_p: &Vec3,
    v_p: &Vec3,
    params: &SystemParams,
) -> Result<TetherForce> {
    let r = x_i - x_p;
    let length = r.norm();
    if !(length > 0.0) {
        return Err(Error::DegenerateGeometry { vehicle });
    }
    let direction = r / length;
    let stretch_rate = (v_i - v_p).dot(&direction);
    let mut tension = params.k_t * (length - params.ell) + params.c_t * stretch_rate;
    if params.slack_clamp && tension < 0.0 {
        tension = 0.0;
    }
    Ok(TetherForce { tension, direction })
}

fn drag(c_d: f64, v: &Vec3, params: &SystemParams) -> Vec3 {
    if params.drag_enabled {
        -c_d * v.norm() * v
    } else {
        Vec3::zeros()
    }
}

/// Newtonian accelerations. `positions` and `velocities` are ordered
/// payload, vehicle 1, vehicle 2; `thrusts` are the forces the vehicles
/// actually produce.
pub fn body_accelerations(
    positions: &[Vec3; 3],
    velocities: &[Vec3; 3],
    thrusts: &[Vec3; 2],
    params: &SystemParams,
) -> Result<BodyAccelerations> {
    let [x_p, x_1, x_2] = positions;
    let [v_p, v_1, v_2] = velocities;
    let f1 = tether_force_for(1, x_1, v_1, x_p, v_p, params)?;
    let f2 = tether_force_for(2, x_2, v_2, x_p, v_p, params)?;
    let g = params.gravity();

    let pull_1 = f1.tension * f1.direction;
    let pull_2 = f2.tension * f2.direction;

    let a_1 = (thrusts[0] + params.m_q * g + drag(params.c_d_quad, v_1, params) - pull_1) / params.m_q;
    let a_2 = (thrusts[1] + params.m_q * g + drag(params.c_d_quad, v_2, params) - pull_2) / params.m_q;
    let a_p = (params.m_p * g + drag(params.c_d_payload, v_p, params) + pull_1 + pull_2) / params.m_p;

    Ok(BodyAccelerations {
        payload: a_p,
        vehicles: [a_1, a_2],
        tethers: [f1, f2],
    })
}

pub fn derivative(
    state: &SystemState,
    cmd: &ControlCommand,
    omega_c: f64,
    params: &SystemParams,
) -> Result<StateDerivative> {
    let acc = body_accelerations(
        &[state.x_p, state.x_1, state.x_2],
        &[state.v_p, state.v_1, state.v_2],
        &[state.thrust_1, state.thrust_2],
        params,
    )?;
    Ok(StateDerivative {
        v_p: state.v_p,
        a_p: acc.payload,
        v_1: state.v_1,
        a_1: acc.vehicles[0],
        v_2: state.v_2,
        a_2: acc.vehicles[1],
        thrust_rate_1: (cmd.thrust_1 - state.thrust_1) / params.tau_att,
        thrust_rate_2: (cmd.thrust_2 - state.thrust_2) / params.tau_att,
        theta_rate: omega_c,
    })
}

/// Tensions at the given state, as reported in trajectory exports.
pub fn tensions(state: &SystemState, params: &SystemParams) -> Result<[f64; 2]> {
    let f1 = tether_force_for(1, &state.x_1, &state.v_1, &state.x_p, &state.v_p, params)?;
    let f2 = tether_force_for(2, &state.x_2, &state.v_2, &state.x_p, &state.v_p, params)?;
    Ok([f1.tension, f2.tension])
}

/// One classical RK4 step with a constant spin rate.
pub fn step(
    state: &SystemState,
    cmd: &ControlCommand,
    omega_c: f64,
    params: &SystemParams,
    dt: f64,
) -> Result<SystemState> {
    step_with_profile(state, cmd, &|_| omega_c, params, dt)
}

/// One RK4 step where the spin rate is sampled from `omega` at the stage
/// times, so `theta` integrates piecewise-quadratic profiles exactly.
pub fn step_with_profile(
    state: &SystemState,
    cmd: &ControlCommand,
    omega: &dyn Fn(f64) -> f64,
    params: &SystemParams,
    dt: f64,
) -> Result<SystemState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParam {
            field: "dt".into(),
            reason: format!("step must be positive, got {dt}"),
        });
    }
    let t0 = state.t;
    let y0 = state.to_array();
    let eval = |y: &[f64; STATE_LEN], t: f64| -> Result<[f64; STATE_LEN]> {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationBlowup { t });
        }
        let s = SystemState::from_array(y, t);
        Ok(derivative(&s, cmd, omega(t), params)?.to_array())
    };
    let axpy = |y: &[f64; STATE_LEN], k: &[f64; STATE_LEN], h: f64| {
        let mut out = *y;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += h * ki;
        }
        out
    };
    let k1 = eval(&y0, t0)?;
    let k2 = eval(&axpy(&y0, &k1, 0.5 * dt), t0 + 0.5 * dt)?;
    let k3 = eval(&axpy(&y0, &k2, 0.5 * dt), t0 + 0.5 * dt)?;
    let k4 = eval(&axpy(&y0, &k3, dt), t0 + dt)?;

    let mut y = y0;
    for i in 0..STATE_LEN {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = SystemState::from_array(&y, t0 + dt);
    if !next.is_finite() {
        return Err(Error::IntegrationBlowup { t: t0 + dt });
    }
    Ok(next)
}

/// A recorded sample: the state, the command in force over the step that
/// follows it, and the tether tensions at the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: SystemState,
    pub command: ControlCommand,
    pub tensions: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Number of times the controller was invoked.
    pub controller_calls: usize,
}

pub const TRAJECTORY_HEADER: &str = "t,x_p_x,x_p_y,x_p_z,v_p_x,v_p_y,v_p_z,\
x_1_x,x_1_y,x_1_z,v_1_x,v_1_y,v_1_z,x_2_x,x_2_y,x_2_z,v_2_x,v_2_y,v_2_z,\
T_act_1_x,T_act_1_y,T_act_1_z,T_act_2_x,T_act_2_y,T_act_2_z,F_1,F_2,theta";

pub const COMMAND_HEADER: &str = "t,T_cmd_1_x,T_cmd_1_y,T_cmd_1_z,T_cmd_2_x,T_cmd_2_y,T_cmd_2_z,saturated";

impl Trajectory {
    pub fn last(&self) -> Option<&SystemState> {
        self.samples.last().map(|s| &s.state)
    }

    /// Full-precision trajectory CSV, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for sample in &self.samples {
            let s = &sample.state;
            write!(w, "{}", s.t)?;
            for v in [s.x_p, s.v_p, s.x_1, s.v_1, s.x_2, s.v_2, s.thrust_1, s.thrust_2] {
                write!(w, ",{},{},{}", v.x, v.y, v.z)?;
            }
            writeln!(w, ",{},{},{}", sample.tensions[0], sample.tensions[1], s.theta)?;
        }
        Ok(())
    }

    /// Command log aligned row-for-row with [`Trajectory::write_csv`].
    pub fn write_command_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{COMMAND_HEADER}")?;
        for sample in &self.samples {
            let c = &sample.command;
            write!(w, "{}", sample.state.t)?;
            for v in [c.thrust_1, c.thrust_2] {
                write!(w, ",{},{},{}", v.x, v.y, v.z)?;
            }
            writeln!(w, ",{}", u8::from(c.saturated))?;
        }
        Ok(())
    }
}

/// Runs the closed loop for `duration` seconds.
///
/// The controller is called every `1/f_ctrl` seconds and its command is
/// held between calls; physics advances at `dt_physics`. A sample is
/// recorded at the start and then after every `decimation` physics steps.
pub fn simulate(
    initial: &SystemState,
    controller: &mut dyn FnMut(&SystemState) -> ControlCommand,
    omega_profile: &dyn Fn(f64) -> f64,
    params: &SystemParams,
    duration: f64,
    decimation: usize,
) -> Result<Trajectory> {
    if !(duration > 0.0) {
        return Err(Error::InvalidScenario(format!("duration must be positive, got {duration}")));
    }
    let dt = params.dt_physics;
    let steps = (duration / dt).round() as usize;
    let per_control = params.steps_per_control();
    let decimation = decimation.max(1);

    let mut traj = Trajectory {
        samples: Vec::with_capacity(steps / decimation + 2),
        controller_calls: 0,
    };
    let mut state = *initial;
    let mut cmd = ControlCommand::zero();
    for k in 0..steps {
        if k % per_control == 0 {
            cmd = controller(&state);
            traj.controller_calls += 1;
        }
        if k % decimation == 0 {
            traj.samples.push(Sample {
                state,
                command: cmd,
                tensions: tensions(&state, params)?,
            });
        }
        let mut next = step_with_profile(&state, &cmd, omega_profile, params, dt)?;
        // Re-anchor the clock so long runs do not accumulate rounding drift.
        next.t = initial.t + (k + 1) as f64 * dt;
        state = next;
    }
    if steps % decimation == 0 {
        traj.samples.push(Sample {
            state,
            command: cmd,
            tensions: tensions(&state, params)?,
        });
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rest_state() -> SystemState {
        SystemState::from_array(&[0.0; STATE_LEN], 0.0)
    }

    #[test]
    fn tension_is_zero_at_rest_length() {
        let p = SystemParams::default();
        let f = tether_force(&Vec3::new(0.0, 0.6, 0.8), &Vec3::zeros(), &Vec3::zeros(), &Vec3::zeros(), &p).unwrap();
        assert_eq!(f.tension, 0.0);
        assert_relative_eq!(f.direction.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn stretched_tether_carries_the_sixty_degree_tension() {
        // m_p g / (2 cos 60°) = 5.886 N needs 5.886/2000 m of stretch.
        let p = SystemParams::default();
        let expected = 0.6 * 9.81 / (2.0 * 60f64.to_radians().cos());
        let len = 1.0 + expected / 2000.0;
        let f = tether_force(&Vec3::new(0.0, 0.0, len), &Vec3::zeros(), &Vec3::zeros(), &Vec3::zeros(), &p).unwrap();
        assert_relative_eq!(f.tension, 5.886, epsilon = 1e-9);
        let f = tether_force(&Vec3::new(0.0, 0.0, 1.002943), &Vec3::zeros(), &Vec3::zeros(), &Vec3::zeros(), &p).unwrap();
        assert_relative_eq!(f.tension, 5.886, epsilon = 1e-9);
    }

    #[test]
    fn slack_tether_does_not_push() {
        let clamped = SystemParams::default();
        let x = Vec3::new(0.99, 0.0, 0.0);
        let f = tether_force(&x, &Vec3::zeros(), &Vec3::zeros(), &Vec3::zeros(), &clamped).unwrap();
        assert_eq!(f.tension, 0.0);
        let literal = SystemParams {
            slack_clamp: false,
            ..clamped
        };
        let f = tether_force(&x, &Vec3::zeros(), &Vec3::zeros(), &Vec3::zeros(), &literal).unwrap();
        assert_relative_eq!(f.tension, -20.0, epsilon = 1e-9);
    }

    #[test]
    fn damping_uses_the_stretch_rate() {
        let p = SystemParams::default();
        // Rest length, separating at 0.1 m/s along the tether plus a
        // tangential component that must not count.
        let f = tether_force(
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::new(0.1, 3.0, 0.0),
            &Vec3::zeros(),
            &Vec3::zeros(),
            &p,
        )
        .unwrap();
        assert_relative_eq!(f.tension, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let p = SystemParams::default();
        let x = Vec3::new(1.0, 2.0, 3.0);
        assert!(matches!(
            tether_force(&x, &Vec3::zeros(), &x, &Vec3::zeros(), &p),
            Err(Error::DegenerateGeometry { .. })
        ));
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.0, 0.0, 0.5);
        assert!(matches!(
            derivative(&s, &ControlCommand::zero(), 0.0, &p),
            Err(Error::DegenerateGeometry { vehicle: 2 })
        ));
    }

    #[test]
    fn free_fall_with_slack_tethers() {
        let p = SystemParams::default();
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.3, 0.0, 0.2);
        s.x_2 = Vec3::new(-0.3, 0.0, 0.2);
        let d = derivative(&s, &ControlCommand::zero(), 0.0, &p).unwrap();
        for a in [d.a_p, d.a_1, d.a_2] {
            assert_relative_eq!(a, Vec3::new(0.0, 0.0, -9.81), epsilon = 1e-15);
        }
    }

    #[test]
    fn thrust_lag_and_theta_rates() {
        let p = SystemParams::default();
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.3, 0.0, 0.2);
        s.x_2 = Vec3::new(-0.3, 0.0, 0.2);
        s.thrust_1 = Vec3::new(0.0, 0.0, 1.0);
        let cmd = ControlCommand::new(Vec3::new(0.0, 0.0, 2.0), Vec3::new(1.0, 0.0, 0.0));
        let d = derivative(&s, &cmd, 1.5, &p).unwrap();
        assert_relative_eq!(d.thrust_rate_1, Vec3::new(0.0, 0.0, 20.0), epsilon = 1e-12);
        assert_relative_eq!(d.thrust_rate_2, Vec3::new(20.0, 0.0, 0.0), epsilon = 1e-12);
        assert_eq!(d.theta_rate, 1.5);
    }

    #[test]
    fn drag_opposes_velocity_quadratically() {
        let p = SystemParams {
            drag_enabled: true,
            c_d_quad: 0.1,
            c_d_payload: 0.2,
            ..SystemParams::default()
        };
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.3, 0.0, 0.2);
        s.x_2 = Vec3::new(-0.3, 0.0, 0.2);
        s.v_p = Vec3::new(2.0, 0.0, 0.0);
        s.v_1 = s.v_p;
        s.v_2 = s.v_p;
        let d = derivative(&s, &ControlCommand::zero(), 0.0, &p).unwrap();
        assert_relative_eq!(d.a_p.x, -0.2 * 4.0 / 0.6, epsilon = 1e-12);
        assert_relative_eq!(d.a_1.x, -0.1 * 4.0 / 0.7, epsilon = 1e-12);
    }

    #[test]
    fn ballistic_payload_follows_free_fall() {
        // No thrust and slack tethers: every body falls together and the
        // tethers never tighten.
        let p = SystemParams::default();
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.3, 0.0, 0.2);
        s.x_2 = Vec3::new(-0.3, 0.0, 0.2);
        let cmd = ControlCommand::zero();
        for _ in 0..2000 {
            s = step(&s, &cmd, 0.0, &p, 0.0005).unwrap();
        }
        assert_relative_eq!(s.x_p.z, -4.905, epsilon = 1e-9);
        assert_relative_eq!(s.x_1.z, 0.2 - 4.905, epsilon = 1e-9);
        assert_relative_eq!(s.t, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_state_is_a_blowup() {
        let p = SystemParams::default();
        let mut s = rest_state();
        s.x_1 = Vec3::new(1.0, 0.0, 0.0);
        s.x_2 = Vec3::new(-1.0, 0.0, 0.0);
        let cmd = ControlCommand::new(Vec3::new(f64::INFINITY, 0.0, 0.0), Vec3::zeros());
        assert!(matches!(
            step(&s, &cmd, 0.0, &p, 0.0005),
            Err(Error::IntegrationBlowup { .. })
        ));
    }

    #[test]
    fn controller_rate_contract() {
        let p = SystemParams::default();
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.3, 0.0, 0.2);
        s.x_2 = Vec3::new(-0.3, 0.0, 0.2);
        let mut calls = Vec::new();
        let traj = simulate(
            &s,
            &mut |st: &SystemState| {
                calls.push(st.t);
                ControlCommand::zero()
            },
            &|_| 0.0,
            &p,
            1.0,
            10,
        )
        .unwrap();
        assert_eq!(traj.controller_calls, 50);
        assert_eq!(calls.len(), 50);
        for (k, t) in calls.iter().enumerate() {
            assert_relative_eq!(*t, k as f64 * 0.02, epsilon = 1e-12);
        }
        assert_eq!(traj.samples.len(), 201);
        assert_relative_eq!(traj.last().unwrap().t, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_order_hold_is_bit_identical_between_ticks() {
        let p = SystemParams::default();
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.0, 0.0, 1.0);
        s.x_2 = Vec3::new(0.0, 0.5, 1.0);
        let mut tick = 0u32;
        let traj = simulate(
            &s,
            &mut |st: &SystemState| {
                tick += 1;
                ControlCommand::new(Vec3::new(0.0, 0.0, 5.0 + st.x_p.z + tick as f64), Vec3::new(0.0, 0.0, 6.0))
            },
            &|_| 0.0,
            &p,
            0.2,
            1,
        )
        .unwrap();
        for chunk in traj.samples[..400].chunks(p.steps_per_control()) {
            assert!(chunk.iter().all(|x| x.command == chunk[0].command));
        }
        assert_ne!(traj.samples[0].command, traj.samples[40].command);
    }

    #[test]
    fn csv_layout() {
        let p = SystemParams::default();
        let mut s = rest_state();
        s.x_1 = Vec3::new(0.3, 0.0, 0.2);
        s.x_2 = Vec3::new(-0.3, 0.0, 0.2);
        let traj = simulate(&s, &mut |_: &SystemState| ControlCommand::zero(), &|_| 0.0, &p, 0.01, 5).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), traj.samples.len() + 1);
        assert_eq!(lines[0].split(',').count(), 28);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 28));

        let mut buf = Vec::new();
        traj.write_command_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == 8));
    }
}
