use nalgebra::{DMatrix, Matrix3};
use tetherspin::dynamics::step;
use tetherspin::equilibrium::{build_equilibrium, omega_star};
use tetherspin::harness::{compare_modes, run_scenario, FlightMode, ScenarioSpec};
use tetherspin::lqr::{synthesize, INPUT_DIM, STATE_DIM};
use tetherspin::{ControlCommand, SystemParams, SystemState, Vec3};

fn deg(d: f64) -> f64 {
    d.to_radians()
}

fn csv(run: &tetherspin::harness::Run) -> Vec<u8> {
    let mut out = Vec::new();
    run.trajectory.write_csv(&mut out).unwrap();
    run.trajectory.write_command_csv(&mut out).unwrap();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let p = SystemParams::default();
    let mut spec = ScenarioSpec::new(FlightMode::Rotating, deg(45.0));
    spec.phases.hover = 6.0;
    spec.metering_window = 4.0;
    spec.perturbation = Vec3::new(0.05, -0.02, 0.0);
    let a = run_scenario(&spec, &p).unwrap();
    let b = run_scenario(&spec, &p).unwrap();
    assert_eq!(csv(&a), csv(&b));
    assert_eq!(a.summary, b.summary);
}

#[test]
fn longer_hover_does_not_move_metered_power() {
    let p = SystemParams::default();
    for mode in [FlightMode::Static, FlightMode::Rotating] {
        let spec = ScenarioSpec::new(mode, deg(52.5));
        let mut long = spec.clone();
        long.phases.hover = 80.0;
        let a = run_scenario(&spec, &p).unwrap().summary;
        let b = run_scenario(&long, &p).unwrap().summary;
        assert!((a.power_mean - b.power_mean).abs() / a.power_mean < 1e-3, "{mode}: {a:?} vs {b:?}");
    }
}

#[test]
fn rotating_runs_hold_the_commanded_angle() {
    let p = SystemParams::default();
    for b in [30.0, 45.0, 60.0] {
        let s = run_scenario(&ScenarioSpec::new(FlightMode::Rotating, deg(b)), &p).unwrap().summary;
        assert!((s.beta_measured - deg(b)).abs() < deg(0.5), "{b}: {}", s.beta_measured.to_degrees());
        assert!(s.relative_power_error() < 0.02);
    }
}

#[test]
fn saving_grows_with_tether_angle() {
    let p = SystemParams::default();
    let template = ScenarioSpec::hover_only(FlightMode::Static, 0.0, 4.0);
    let grid: Vec<f64> = [0.0, 30.0, 37.5, 45.0, 52.5, 60.0].iter().map(|&d| deg(d)).collect();
    let rows = compare_modes(&grid, &p, &template);
    let savings: Vec<f64> = rows.iter().map(|r| r.saving().unwrap()).collect();
    assert!(savings[0].abs() < 1e-9);
    assert!(savings.windows(2).all(|w| w[1] > w[0]), "{savings:?}");
    for r in &rows {
        assert!((r.saving().unwrap() - r.analytic_saving.unwrap()).abs() < 1e-3);
    }
}

#[test]
fn closed_loop_keeps_the_half_turn_symmetry() {
    let p = SystemParams::default();
    let mut spec = ScenarioSpec::new(FlightMode::Rotating, deg(45.0));
    spec.phases.hover = 5.0;
    spec.metering_window = 5.0;
    let run = run_scenario(&spec, &p).unwrap();
    let d = Matrix3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0));
    for s in &run.trajectory.samples {
        let st = &s.state;
        assert!((st.x_2 - st.x_p - d * (st.x_1 - st.x_p)).norm() < 1e-9, "t = {}", st.t);
        assert!((st.thrust_2 - d * st.thrust_1).norm() < 1e-9);
        assert!((st.x_p.xy() - spec.origin.xy()).norm() < 1e-9);
    }
}

#[test]
fn gains_commute_with_the_vehicle_swap() {
    let p = SystemParams::default();
    let beta = deg(45.0);
    let d = Matrix3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0));
    for w in [0.0, omega_star(beta, &p).unwrap()] {
        let (eq, _, _) = build_equilibrium(beta, w, &p).unwrap();
        let g = synthesize(&eq, &p).unwrap();
        let mut ps = DMatrix::zeros(STATE_DIM, STATE_DIM);
        for (to, from) in [(0, 0), (1, 2), (2, 1)] {
            for half in 0..2 {
                let (r, c) = (6 * to + 3 * half, 6 * from + 3 * half);
                ps.view_mut((r, c), (3, 3)).copy_from(&d);
            }
        }
        let mut pu = DMatrix::zeros(INPUT_DIM, INPUT_DIM);
        pu.view_mut((0, 3), (3, 3)).copy_from(&d);
        pu.view_mut((3, 0), (3, 3)).copy_from(&d);
        let conj = &pu * &g.k * ps.transpose();
        assert!((conj - &g.k).amax() < 1e-8 * g.k.amax(), "omega = {w}");
    }
}

fn energy(s: &SystemState, p: &SystemParams) -> f64 {
    let kinetic = 0.5 * p.m_p * s.v_p.norm_squared() + 0.5 * p.m_q * (s.v_1.norm_squared() + s.v_2.norm_squared());
    let spring: f64 = [s.x_1, s.x_2]
        .iter()
        .map(|x| 0.5 * p.k_t * ((x - s.x_p).norm() - p.ell).max(0.0).powi(2))
        .sum();
    kinetic + spring
}

fn tumbling() -> SystemState {
    SystemState {
        v_p: Vec3::new(0.3, -0.1, 0.2),
        x_1: Vec3::new(0.72, 0.1, 0.7),
        v_1: Vec3::new(-0.5, 1.5, 0.0),
        x_2: Vec3::new(-0.73, 0.0, 0.7),
        v_2: Vec3::new(0.2, -1.2, 0.4),
        ..SystemState::default()
    }
}

#[test]
fn undamped_tethers_conserve_energy() {
    let p = SystemParams {
        g: 0.0,
        c_t: 0.0,
        ..SystemParams::default()
    };
    // spinning dumbbell whose tethers never go slack
    let r = 1.01;
    let w = (p.k_t * (r - p.ell) / (p.m_q * r)).sqrt();
    let mut s = SystemState {
        v_p: Vec3::new(0.01, 0.0, 0.02),
        x_1: Vec3::new(r, 0.0, 0.0),
        v_1: Vec3::new(0.0, w * r, 0.0),
        x_2: Vec3::new(-r, 0.0, 0.0),
        v_2: Vec3::new(0.0, -w * r, 0.0),
        ..SystemState::default()
    };
    let e0 = energy(&s, &p);
    for _ in 0..2000 {
        s = step(&s, &ControlCommand::zero(), 0.0, &p, 5e-4).unwrap();
        assert!(((s.x_1 - s.x_p).norm() - p.ell) > 0.0);
    }
    assert!((energy(&s, &p) - e0).abs() / e0 < 1e-8, "{} vs {e0}", energy(&s, &p));
}

#[test]
fn damped_tethers_only_dissipate() {
    let p = SystemParams {
        g: 0.0,
        ..SystemParams::default()
    };
    let mut s = tumbling();
    let mut e = energy(&s, &p);
    for _ in 0..2000 {
        s = step(&s, &ControlCommand::zero(), 0.0, &p, 5e-4).unwrap();
        let next = energy(&s, &p);
        assert!(next <= e + 1e-9 * e);
        e = next;
    }
}

#[test]
fn energy_balances_thrust_work_and_damping() {
    let p = SystemParams {
        slack_clamp: false,
        ..SystemParams::default()
    };
    let beta = deg(45.0);
    let (_, mut s, mut cmd) = build_equilibrium(beta, omega_star(beta, &p).unwrap(), &p).unwrap();
    s.x_p += Vec3::new(2e-3, -1e-3, 1e-3);
    s.v_2 += Vec3::new(0.05, 0.02, -0.04);
    cmd.thrust_1 += Vec3::new(0.3, -0.2, 0.5);
    cmd.thrust_2 += Vec3::new(-0.1, 0.4, 0.2);

    let total = |s: &SystemState| {
        let height = p.m_p * s.x_p.z + p.m_q * (s.x_1.z + s.x_2.z);
        energy(s, &p) + p.g * height
    };
    let rate = |s: &SystemState| {
        let thrust = s.thrust_1.dot(&s.v_1) + s.thrust_2.dot(&s.v_2);
        let damping: f64 = [(s.x_1, s.v_1), (s.x_2, s.v_2)]
            .iter()
            .map(|(x, v)| {
                let n = (x - s.x_p).normalize();
                p.c_t * (v - s.v_p).dot(&n).powi(2)
            })
            .sum();
        thrust - damping
    };

    let dt = 5e-4;
    let e0 = total(&s);
    let mut work = 0.0;
    let mut scale = 0.0;
    for _ in 0..2000 {
        let next = step(&s, &cmd, 2.0, &p, dt).unwrap();
        // Simpson's rule, midpoint from a half step
        let mid = step(&s, &cmd, 2.0, &p, dt / 2.0).unwrap();
        work += dt / 6.0 * (rate(&s) + 4.0 * rate(&mid) + rate(&next));
        scale += dt * rate(&s).abs();
        s = next;
    }
    let imbalance = (total(&s) - e0 - work).abs();
    assert!(imbalance < 1e-6 * scale, "imbalance {imbalance:e} vs scale {scale:e}");
}
