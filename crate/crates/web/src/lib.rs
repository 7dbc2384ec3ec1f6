//! Browser bindings: power curves, an equilibrium inspector and a short
//! closed-loop flight drawn from above. Every entry point takes the
//! parameter file text (empty for defaults) and returns SVG or plain text.

use tetherspin::equilibrium::{
    build_equilibrium, linspace, omega_star, power_report, sweep_beta, sweep_omega, PowerReport, SpinMode,
};
use tetherspin::harness::{run_scenario, FlightMode, ScenarioSpec};
use tetherspin::plot::{beta_sweep_chart, omega_sweep_chart, top_view_chart};
use tetherspin::{SystemParams, Vec3};
use wasm_bindgen::prelude::*;

/// Longest hover the page may request, s.
pub const MAX_HOVER: f64 = 20.0;

fn params(text: &str) -> Result<SystemParams, String> {
    let p = if text.trim().is_empty() {
        SystemParams::default()
    } else {
        SystemParams::from_config_text(text).map_err(|e| e.to_string())?
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn collect(reports: Vec<tetherspin::Result<PowerReport>>) -> Result<Vec<PowerReport>, String> {
    reports.into_iter().collect::<Result<_, _>>().map_err(|e| e.to_string())
}

pub fn beta_sweep(params_text: &str, max_deg: f64, n: usize) -> Result<String, String> {
    let p = params(params_text)?;
    let grid: Vec<f64> = linspace(0.0, max_deg, n.max(1)).into_iter().map(f64::to_radians).collect();
    let s = collect(sweep_beta(&grid, SpinMode::Static, &p))?;
    let r = collect(sweep_beta(&grid, SpinMode::RotatingOpt, &p))?;
    beta_sweep_chart(&s, &r).to_svg().map_err(|e| e.to_string())
}

pub fn omega_sweep(params_text: &str, betas_deg: &str, max_omega: f64, n: usize) -> Result<String, String> {
    let p = params(params_text)?;
    let grid = linspace(0.0, max_omega, n.max(1));
    let mut curves = Vec::new();
    for item in betas_deg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let b: f64 = item.parse().map_err(|_| format!("`{item}` is not an angle"))?;
        curves.push((b.to_radians(), collect(sweep_omega(b.to_radians(), &grid, &p))?));
    }
    omega_sweep_chart(&curves).to_svg().map_err(|e| e.to_string())
}

/// `omega < 0` selects the optimal spin rate.
pub fn equilibrium(params_text: &str, beta_deg: f64, omega: f64) -> Result<String, String> {
    let p = params(params_text)?;
    let b = beta_deg.to_radians();
    let w_star = omega_star(b, &p).map_err(|e| e.to_string())?;
    let w = if omega < 0.0 { w_star } else { omega };
    let r = power_report(b, w, &p).map_err(|e| e.to_string())?;
    let st = power_report(b, 0.0, &p).map_err(|e| e.to_string())?;
    let (eq, _, _) = build_equilibrium(b, w, &p).map_err(|e| e.to_string())?;
    Ok(format!(
        "spin rate          {w:.4} rad/s (optimal {w_star:.4})\n\
         tangential speed   {:.4} m/s\n\
         tether tension     {:.4} N\n\
         thrust per vehicle {:.4} N\n\
         thrust tilt        {:.3} deg\n\
         total power        {:.2} W\n\
         static power       {:.2} W\n\
         saving             {:.2} %\n",
        eq.v_tangential,
        r.tension,
        r.thrust_per_vehicle,
        r.tilt.to_degrees(),
        r.power_total,
        st.power_total,
        100.0 * (st.power_total - r.power_total) / st.power_total,
    ))
}

/// Flies a hover that starts at the operating point with the formation
/// shifted by `perturb_m` along x, and returns the top view and a summary.
pub fn fly(params_text: &str, rotating: bool, beta_deg: f64, hover_s: f64, perturb_m: f64) -> Result<(String, String), String> {
    let p = params(params_text)?;
    if !(hover_s > 0.0 && hover_s <= MAX_HOVER) {
        return Err(format!("hover must be in (0, {MAX_HOVER}] s"));
    }
    let mode = if rotating { FlightMode::Rotating } else { FlightMode::Static };
    let mut spec = ScenarioSpec::hover_only(mode, beta_deg.to_radians(), hover_s);
    spec.perturbation = Vec3::new(perturb_m, 0.0, 0.0);
    spec.decimation = 40;
    let run = run_scenario(&spec, &p).map_err(|e| e.to_string())?;
    let svg = top_view_chart(&run.trajectory).to_svg().map_err(|e| e.to_string())?;
    let s = &run.summary;
    let text = format!(
        "mean power {:.2} W (model {:.2} W), max payload offset {:.3} m, mean tilt {:.2} deg, saturated ticks {}",
        s.power_mean,
        s.analytic_power,
        s.max_payload_deviation,
        s.tilt_mean[0].to_degrees(),
        s.saturated_ticks
    );
    Ok((svg, text))
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = betaSweepSvg)]
pub fn beta_sweep_svg(params_text: &str, max_deg: f64, n: usize) -> Result<String, JsError> {
    js(beta_sweep(params_text, max_deg, n))
}

#[wasm_bindgen(js_name = omegaSweepSvg)]
pub fn omega_sweep_svg(params_text: &str, betas_deg: &str, max_omega: f64, n: usize) -> Result<String, JsError> {
    js(omega_sweep(params_text, betas_deg, max_omega, n))
}

#[wasm_bindgen(js_name = equilibriumSummary)]
pub fn equilibrium_summary(params_text: &str, beta_deg: f64, omega: f64) -> Result<String, JsError> {
    js(equilibrium(params_text, beta_deg, omega))
}

#[wasm_bindgen]
pub struct Flight {
    svg: String,
    summary: String,
}

#[wasm_bindgen]
impl Flight {
    #[wasm_bindgen(getter)]
    pub fn svg(&self) -> String {
        self.svg.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

#[wasm_bindgen(js_name = flyHover)]
pub fn fly_hover(params_text: &str, rotating: bool, beta_deg: f64, hover_s: f64, perturb_m: f64) -> Result<Flight, JsError> {
    fly(params_text, rotating, beta_deg, hover_s, perturb_m)
        .map(|(svg, summary)| Flight { svg, summary })
        .map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps_render() {
        let svg = beta_sweep("", 75.0, 31).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("static"));
        let svg = omega_sweep("", "30, 45,60", 5.0, 51).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(omega_sweep("", "thirty", 5.0, 51).is_err());
    }

    #[test]
    fn inspector_reports_the_saving() {
        let text = equilibrium("", 60.0, -1.0).unwrap();
        assert!(text.contains("2.8998 rad/s"));
        assert!(text.contains("saving             16.41 %"));
        assert!(equilibrium("m_q = -1", 60.0, -1.0).is_err());
    }

    #[test]
    fn short_flight_returns_to_the_setpoint() {
        let (svg, summary) = fly("", true, 45.0, 4.0, 0.1).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(summary.contains("saturated ticks 0"));
        assert!(fly("", false, 45.0, 60.0, 0.0).is_err());
    }
}
