//! Self-contained SVG charts. Output depends only on the data, so equal
//! inputs give identical bytes.

use std::fmt::Write;

use crate::dynamics::Trajectory;
use crate::equilibrium::PowerReport;
use crate::error::{Error, Result};
use crate::harness::ComparisonRow;
use crate::model::angle_degrees;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 58.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const MAX_MARKED_POINTS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub name: String,
    /// `(value, error half-width)` per category.
    pub bars: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub categories: Vec<String>,
    pub groups: Vec<BarGroup>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
}

impl Axis {
    fn fit(lo: f64, hi: f64) -> Axis {
        let (lo, hi) = if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            (lo - pad, hi + pad)
        } else {
            (lo, hi)
        };
        let raw = (hi - lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        Axis {
            lo: (lo / step).floor() * step,
            hi: (hi / step).ceil() * step,
            step,
        }
    }

    fn ticks(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn label(&self, v: f64) -> String {
        let decimals = (0..10)
            .find(|&d| {
                let scaled = self.step * 10f64.powi(d);
                (scaled - scaled.round()).abs() < 1e-6 * scaled
            })
            .unwrap_or(10) as usize;
        let v = if v.abs() < 1e-12 * self.step { 0.0 } else { v };
        format!("{v:.decimals$}")
    }
}

struct Frame {
    x: Axis,
    y: Axis,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.lo) / (self.x.hi - self.x.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.lo) / (self.y.hi - self.y.lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n\
<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: Option<&str>, y_label: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    for t in frame.y.ticks() {
        let y = frame.py(t);
        let _ = writeln!(
            out,
            "<line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{x1:.1}\" y2=\"{y:.1}\" stroke=\"#e4e4e4\"/>\
<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            x0 - 6.0,
            y + 4.0,
            frame.y.label(t)
        );
    }
    if let Some(label) = x_label {
        for t in frame.x.ticks() {
            let x = frame.px(t);
            let _ = writeln!(
                out,
                "<line x1=\"{x:.1}\" y1=\"{y0:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>\
<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                y0 + 5.0,
                y0 + 19.0,
                frame.x.label(t)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            (x0 + x1) / 2.0,
            HEIGHT - 14.0,
            escape(label)
        );
    }
    let _ = writeln!(
        out,
        "<rect x=\"{x0:.1}\" y=\"{y1:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>\n\
<text transform=\"translate(18 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        x1 - x0,
        y0 - y1,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    let x = WIDTH - RIGHT + 14.0;
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"14\" height=\"4\" fill=\"{}\"/>\
<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            y - 2.0,
            PALETTE[i % PALETTE.len()],
            x + 20.0,
            y + 4.0,
            escape(name)
        );
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

impl LineChart {
    pub fn to_svg(&self) -> Result<String> {
        let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
        let all = || self.series.iter().flat_map(|s| s.points.iter().filter(finite));
        let (xl, xh) = bounds(all().map(|p| p.0)).ok_or(Error::EmptyData)?;
        let (yl, yh) = bounds(all().map(|p| p.1)).ok_or(Error::EmptyData)?;
        let frame = Frame {
            x: Axis::fit(xl, xh),
            y: Axis::fit(yl, yh),
        };

        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &frame, Some(&self.x_label), &self.y_label);
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(finite)
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                .collect();
            if pts.len() > 1 {
                let _ = writeln!(
                    out,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
                    pts.join(" ")
                );
            }
            if pts.len() <= MAX_MARKED_POINTS {
                for p in &pts {
                    let (x, y) = p.split_once(',').expect("formatted above");
                    let _ = writeln!(out, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3.5\" fill=\"{color}\"/>");
                }
            }
        }
        let names: Vec<&str> = self.series.iter().map(|s| s.name.as_str()).collect();
        legend(&mut out, &names);
        out.push_str("</svg>\n");
        Ok(out)
    }
}

impl BarChart {
    pub fn to_svg(&self) -> Result<String> {
        let n_cat = self.categories.len();
        if n_cat == 0 || self.groups.is_empty() || self.groups.iter().any(|g| g.bars.len() != n_cat) {
            return Err(Error::EmptyData);
        }
        let tops = self
            .groups
            .iter()
            .flat_map(|g| g.bars.iter())
            .filter(|b| b.0.is_finite())
            .map(|b| b.0 + b.1.abs());
        let (_, hi) = bounds(tops).ok_or(Error::EmptyData)?;
        let frame = Frame {
            x: Axis { lo: 0.0, hi: 1.0, step: 1.0 },
            y: Axis::fit(0.0, hi.max(0.0)),
        };

        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &frame, None, &self.y_label);
        let plot_w = WIDTH - LEFT - RIGHT;
        let slot = plot_w / n_cat as f64;
        let bar_w = 0.8 * slot / self.groups.len() as f64;
        for (c, name) in self.categories.iter().enumerate() {
            let slot_x = LEFT + c as f64 * slot;
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                slot_x + slot / 2.0,
                HEIGHT - BOTTOM + 19.0,
                escape(name)
            );
            for (g, group) in self.groups.iter().enumerate() {
                let (value, err) = group.bars[c];
                if !value.is_finite() {
                    continue;
                }
                let x = slot_x + 0.1 * slot + g as f64 * bar_w;
                let y = frame.py(value);
                let base = frame.py(0.0);
                let _ = writeln!(
                    out,
                    "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                    y.min(base),
                    bar_w * 0.92,
                    (base - y).abs(),
                    PALETTE[g % PALETTE.len()]
                );
                if err > 0.0 {
                    let cx = x + bar_w * 0.46;
                    let (lo, hi) = (frame.py(value - err), frame.py(value + err));
                    let _ = writeln!(
                        out,
                        "<path d=\"M{cx:.2} {lo:.2}V{hi:.2}M{:.2} {lo:.2}H{:.2}M{:.2} {hi:.2}H{:.2}\" stroke=\"black\"/>",
                        cx - 4.0,
                        cx + 4.0,
                        cx - 4.0,
                        cx + 4.0
                    );
                }
            }
        }
        let names: Vec<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        legend(&mut out, &names);
        out.push_str("</svg>\n");
        Ok(out)
    }
}

fn power_series(name: String, reports: &[PowerReport], x: impl Fn(&PowerReport) -> f64) -> Series {
    Series {
        name,
        points: reports.iter().map(|r| (x(r), r.power_total)).collect(),
    }
}

/// Total power against tether angle for the static and rotating formations.
pub fn beta_sweep_chart(static_reports: &[PowerReport], rotating_reports: &[PowerReport]) -> LineChart {
    LineChart {
        title: "Rotor power vs tether angle".into(),
        x_label: "tether angle beta [deg]".into(),
        y_label: "total power [W]".into(),
        series: vec![
            power_series("static".into(), static_reports, |r| angle_degrees(r.beta)),
            power_series("rotating at omega*".into(), rotating_reports, |r| angle_degrees(r.beta)),
        ],
    }
}

/// Total power against spin rate, one curve per tether angle.
pub fn omega_sweep_chart(curves: &[(f64, Vec<PowerReport>)]) -> LineChart {
    LineChart {
        title: "Rotor power vs spin rate".into(),
        x_label: "spin rate omega [rad/s]".into(),
        y_label: "total power [W]".into(),
        series: curves
            .iter()
            .map(|(beta, reports)| power_series(format!("beta = {} deg", angle_degrees(*beta)), reports, |r| r.omega_c))
            .collect(),
    }
}

/// Metered mean power with one-sigma bars, static beside rotating.
pub fn comparison_chart(rows: &[ComparisonRow]) -> BarChart {
    let bar = |r: &crate::Result<crate::harness::RunSummary>| r.as_ref().map_or((f64::NAN, 0.0), |s| (s.power_mean, s.power_std));
    BarChart {
        title: "Metered hover power".into(),
        y_label: "total power [W]".into(),
        categories: rows.iter().map(|r| format!("{} deg", angle_degrees(r.beta))).collect(),
        groups: vec![
            BarGroup {
                name: "static".into(),
                bars: rows.iter().map(|r| bar(&r.static_run)).collect(),
            },
            BarGroup {
                name: "rotating".into(),
                bars: rows.iter().map(|r| bar(&r.rotating_run)).collect(),
            },
        ],
    }
}

/// Horizontal paths of the three bodies.
pub fn top_view_chart(traj: &Trajectory) -> LineChart {
    let path = |name: &str, f: fn(&crate::SystemState) -> crate::Vec3| Series {
        name: name.into(),
        points: traj.samples.iter().map(|s| f(&s.state)).map(|v| (v.x, v.y)).collect(),
    };
    LineChart {
        title: "Top view".into(),
        x_label: "x [m]".into(),
        y_label: "y [m]".into(),
        series: vec![
            path("payload", |s| s.x_p),
            path("vehicle 1", |s| s.x_1),
            path("vehicle 2", |s| s.x_2),
        ],
    }
}
