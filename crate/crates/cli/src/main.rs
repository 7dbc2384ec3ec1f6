use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tetherspin::equilibrium::{
    build_equilibrium, linspace, omega_star, power_report, sweep_beta, sweep_omega, write_sweep_csv, PowerReport,
    SpinMode,
};
use tetherspin::harness::{compare_modes, run_scenario_with, write_comparison_csv, FlightMode, ScenarioSpec};
use tetherspin::lqr::{cache_key, synthesize, GainCache};
use tetherspin::plot::{beta_sweep_chart, comparison_chart, omega_sweep_chart};
use tetherspin::{Error, SystemParams, Vec3};

#[derive(Parser, Debug)]
#[command(name = "tetherspin", version, about = "Spinning two-quadrotor payload transport: equilibria, power, closed-loop flights")]
struct Cli {
    /// Parameter file (`key = value` lines); defaults are used for missing keys.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Directory for output files. Tables go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Static,
    Rotating,
}

impl From<Mode> for FlightMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Static => FlightMode::Static,
            Mode::Rotating => FlightMode::Rotating,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Operating point at one tether angle.
    Equilibrium {
        /// Tether angle, degrees.
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Spin rate, rad/s (default 0).
        #[arg(long, conflicts_with = "opt", allow_hyphen_values = true)]
        omega: Option<f64>,
        /// Spin at the power-optimal rate.
        #[arg(long)]
        opt: bool,
    },
    /// Model power over a range of tether angles.
    SweepBeta {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, default_value_t = 75.0, allow_hyphen_values = true)]
        max: f64,
        #[arg(long, default_value_t = 76)]
        n: usize,
        #[arg(long, value_enum, default_value = "rotating")]
        mode: Mode,
        /// Also draw static and rotating curves to this SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Model power over spin rates at fixed tether angles.
    SweepOmega {
        /// Tether angle(s), degrees, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        max_omega: f64,
        #[arg(long, default_value_t = 101)]
        n: usize,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Closed-loop flight: take-off, (spin-up), hover, (spin-down), landing.
    Fly {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Hover duration, s.
        #[arg(long, default_value_t = 40.0)]
        duration: f64,
        /// Initial horizontal offset of the formation, m.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        perturb: f64,
        /// Hover spin rate, rad/s (default: optimal).
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        /// Gain cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Record every n-th physics step.
        #[arg(long, default_value_t = 10)]
        decimation: usize,
    },
    /// Static versus rotating hover power over a grid of tether angles.
    Compare {
        /// Tether angles, degrees, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "30,37.5,45,52.5,60", allow_hyphen_values = true)]
        betas: Vec<f64>,
        /// Hover duration, s.
        #[arg(long, default_value_t = 40.0)]
        hover: f64,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Synthesize (or load from cache) the feedback gains and dump them.
    Gains {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, value_enum, default_value = "rotating")]
        mode: Mode,
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Model(Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load(path: Option<&Path>) -> CliResult<SystemParams> {
    let params = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            SystemParams::from_config_text(&text)?
        }
        None => SystemParams::default(),
    };
    params.validate()?;
    Ok(params)
}

fn ok_reports(reports: Vec<tetherspin::Result<PowerReport>>) -> CliResult<Vec<PowerReport>> {
    Ok(reports.into_iter().collect::<tetherspin::Result<Vec<_>>>()?)
}

/// Writes `name` into the output directory, or to stdout without one.
fn emit(out: Option<&Path>, name: &str, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            let mut file = io::BufWriter::new(fs::File::create(&path)?);
            write(&mut file)?;
            file.flush()?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn write_svg(path: &Path, svg: tetherspin::Result<String>) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, svg?)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn check_count(n: usize) -> CliResult {
    if n < 1 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let params = load(cli.params.as_deref())?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Equilibrium { beta, omega, opt } => {
            let b = beta.to_radians();
            let w_star = omega_star(b, &params)?;
            let w = if opt { w_star } else { omega.unwrap_or(0.0) };
            let r = power_report(b, w, &params)?;
            let (eq, _, _) = build_equilibrium(b, w, &params)?;
            println!("beta_deg = {beta}");
            println!("omega_rad_s = {w}");
            println!("omega_star_rad_s = {w_star}");
            println!("tangential_speed_m_s = {}", w * params.ell * b.sin());
            println!("tension_N = {}", r.tension);
            println!("thrust_per_vehicle_N = {}", r.thrust_per_vehicle);
            println!("tilt_deg = {}", r.tilt.to_degrees());
            println!("power_per_vehicle_W = {}", r.power_per_vehicle);
            println!("power_total_W = {}", r.power_total);
            println!("stretched_tether_m = {}", eq.tether_length);
        }
        Command::SweepBeta { min, max, n, mode, svg } => {
            check_count(n)?;
            let grid: Vec<f64> = linspace(min, max, n).into_iter().map(f64::to_radians).collect();
            let spin = match mode {
                Mode::Static => SpinMode::Static,
                Mode::Rotating => SpinMode::RotatingOpt,
            };
            let reports = ok_reports(sweep_beta(&grid, spin, &params))?;
            emit(out, "sweep_beta.csv", |w| write_sweep_csv(&reports, w))?;
            if let Some(path) = svg {
                let s = ok_reports(sweep_beta(&grid, SpinMode::Static, &params))?;
                let r = ok_reports(sweep_beta(&grid, SpinMode::RotatingOpt, &params))?;
                write_svg(&path, beta_sweep_chart(&s, &r).to_svg())?;
            }
        }
        Command::SweepOmega { beta, max_omega, n, svg } => {
            check_count(n)?;
            let grid = linspace(0.0, max_omega, n);
            let mut curves = Vec::new();
            for b in &beta {
                curves.push((b.to_radians(), ok_reports(sweep_omega(b.to_radians(), &grid, &params))?));
            }
            let all: Vec<PowerReport> = curves.iter().flat_map(|c| c.1.iter().copied()).collect();
            emit(out, "sweep_omega.csv", |w| write_sweep_csv(&all, w))?;
            if let Some(path) = svg {
                write_svg(&path, omega_sweep_chart(&curves).to_svg())?;
            }
        }
        Command::Fly {
            mode,
            beta,
            duration,
            perturb,
            omega,
            cache,
            decimation,
        } => {
            let mut spec = ScenarioSpec::new(mode.into(), beta.to_radians());
            spec.phases.hover = duration;
            spec.metering_window = spec.metering_window.min(duration);
            spec.perturbation = Vec3::new(perturb, 0.0, 0.0);
            spec.omega = omega;
            spec.decimation = decimation;
            let cache = cache.map(GainCache::new);
            let run = run_scenario_with(&spec, &params, cache.as_ref())?;
            let dir = out.unwrap_or(Path::new("."));
            fs::create_dir_all(dir)?;
            let mut file = io::BufWriter::new(fs::File::create(dir.join("trajectory.csv"))?);
            run.trajectory.write_csv(&mut file)?;
            file.flush()?;
            let mut file = io::BufWriter::new(fs::File::create(dir.join("commands.csv"))?);
            run.trajectory.write_command_csv(&mut file)?;
            file.flush()?;

            let s = &run.summary;
            let phases: serde_json::Map<String, serde_json::Value> = s
                .phases
                .iter()
                .map(|p| (p.name.to_string(), json!([p.start, p.end])))
                .collect();
            let summary = json!({
                "mode": s.mode.to_string(),
                "beta_deg": beta,
                "omega_target_rad_s": s.omega_target,
                "omega_achieved_rad_s": s.omega_achieved,
                "beta_measured_deg": s.beta_measured.to_degrees(),
                "power_mean_W": s.power_mean,
                "power_std_W": s.power_std,
                "power_model_W": s.analytic_power,
                "tilt_mean_deg": [s.tilt_mean[0].to_degrees(), s.tilt_mean[1].to_degrees()],
                "max_payload_deviation_m": s.max_payload_deviation,
                "saturated_ticks": s.saturated_ticks,
                "metering_window_s": [s.window.0, s.window.1],
                "phases_s": phases,
                "samples": run.trajectory.samples.len(),
                "trajectory_csv": dir.join("trajectory.csv").display().to_string(),
                "commands_csv": dir.join("commands.csv").display().to_string(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("plain values serialize"));
        }
        Command::Compare { betas, hover, svg } => {
            if betas.is_empty() {
                return Err(Failure::Usage("--betas needs at least one angle".into()));
            }
            let grid: Vec<f64> = betas.iter().map(|b| b.to_radians()).collect();
            let mut template = ScenarioSpec::new(FlightMode::Static, 0.0);
            template.phases.hover = hover;
            template.metering_window = template.metering_window.min(hover);
            template.validate()?;
            let rows = compare_modes(&grid, &params, &template);
            emit(out, "compare.csv", |w| write_comparison_csv(&rows, w))?;
            if let Some(path) = svg {
                write_svg(&path, comparison_chart(&rows).to_svg())?;
            }
        }
        Command::Gains { beta, mode, omega, cache } => {
            let b = beta.to_radians();
            let w = match mode {
                Mode::Static => 0.0,
                Mode::Rotating => match omega {
                    Some(w) => w,
                    None => omega_star(b, &params)?,
                },
            };
            let (eq, _, _) = build_equilibrium(b, w, &params)?;
            let gains = match cache {
                Some(dir) => GainCache::new(dir).load_or_synthesize(&eq, &params)?,
                None => synthesize(&eq, &params)?,
            };
            gains.check()?;
            let name = format!("gains_{}.txt", cache_key(b, w, &params));
            emit(out, &name, |f| f.write_all(gains.to_text().as_bytes()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io(_) => 2,
                ref other => other.exit_code(),
            };
            ExitCode::from(code as u8)
        }
    }
}
