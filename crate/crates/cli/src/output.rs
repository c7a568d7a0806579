//! Trajectory CSV, JSON report and SVG plot writers.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use magflow_core::flow::line::LineTrajectory;
use magflow_core::flow::Record;

use crate::error::CliError;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Shortest round-trip decimal form.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// One row per (recorded time, node): t, node_index, q coordinates, e, kappa, residual, drift_h.
pub fn write_trajectory(path: &Path, records: &[Record], q: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["t", "node_index"];
    header.extend(&AXES[..q]);
    header.extend(["e", "kappa", "residual", "drift_h"]);
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        for (j, p) in r.state.positions.iter().enumerate() {
            let mut row = vec![num(r.state.time), j.to_string()];
            row.extend((0..q).map(|c| num(p[c])));
            row.extend([r.nodes.e[j], r.nodes.kappa[j], r.nodes.residual[j], r.nodes.drift[j]].map(num));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Line runs: t, node_index, s, u, exact.
pub fn write_line_trajectory(path: &Path, traj: &LineTrajectory, blow_up_time: f64) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["t", "node_index", "s", "u", "exact"]).map_err(csv_err)?;
    for st in &traj.states {
        for (j, (s, u)) in traj.grid.iter().zip(&st.values).enumerate() {
            let exact = s / (blow_up_time - st.time);
            w.write_record([num(st.time), j.to_string(), num(*s), num(*u), num(exact)]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub node: usize,
    pub coords: Vec<f64>,
    pub e: f64,
    pub kappa: f64,
    pub residual: f64,
    pub drift: f64,
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let q = r.headers().map_err(csv_err)?.len().checked_sub(6).ok_or_else(|| CliError::Io("short header".into()))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| -> Result<f64, CliError> {
            rec[i].parse().map_err(|e| CliError::Io(format!("bad number {:?}: {e}", &rec[i])))
        };
        rows.push(TrajectoryRow {
            t: f(0)?,
            node: rec[1].parse().map_err(|e| CliError::Io(format!("bad node index: {e}")))?,
            coords: (0..q).map(|c| f(2 + c)).collect::<Result<_, _>>()?,
            e: f(2 + q)?,
            kappa: f(3 + q)?,
            residual: f(4 + q)?,
            drift: f(5 + q)?,
        });
    }
    Ok(rows)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Io(e.to_string()))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    min: (f64, f64),
    max: (f64, f64),
    origin: (f64, f64),
    size: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>, origin: (f64, f64), size: (f64, f64)) -> Self {
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            min = (min.0.min(x), min.1.min(y));
            max = (max.0.max(x), max.1.max(y));
        }
        if !min.0.is_finite() {
            min = (0.0, 0.0);
            max = (1.0, 1.0);
        }
        if max.0 - min.0 < 1e-12 {
            max.0 = min.0 + 1.0;
        }
        if max.1 - min.1 < 1e-12 {
            max.1 = min.1 + 1.0;
        }
        Self { min, max, origin, size }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            self.origin.0 + (x - self.min.0) / (self.max.0 - self.min.0) * self.size.0,
            self.origin.1 + self.size.1 - (y - self.min.1) / (self.max.1 - self.min.1) * self.size.1,
        )
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, closed: bool) {
    let tag = if closed { "polygon" } else { "polyline" };
    let coords: Vec<String> = pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(out, r#"<{tag} fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Orthographic view: (x, y) for planar loops, an axonometric view in 3D.
fn view(p: &[f64]) -> (f64, f64) {
    match p.len() {
        1 => (p[0], 0.0),
        2 => (p[0], p[1]),
        _ => {
            let c = 30f64.to_radians();
            ((p[0] - p[1]) * c.cos(), p[2] + (p[0] + p[1]) * c.sin() * 0.5)
        }
    }
}

/// Loop snapshots; `loops` pairs a label with node coordinates.
pub fn loop_svg(path: &Path, title: &str, loops: &[(String, Vec<Vec<f64>>)]) -> Result<(), CliError> {
    let mut s = svg_open(title);
    let frame = Frame::fit(
        loops.iter().flat_map(|(_, l)| l.iter().map(|p| view(p))),
        (PAD, PAD),
        (WIDTH - 2.0 * PAD, HEIGHT - 2.0 * PAD - 20.0),
    );
    for (i, (label, l)) in loops.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<_> = l.iter().map(|p| frame.map(view(p))).collect();
        polyline(&mut s, &pts, color, true);
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            PAD + 150.0 * i as f64,
            HEIGHT - 12.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

/// Stacked panels, one per named series over a shared time axis.
pub fn series_svg(path: &Path, title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> Result<(), CliError> {
    let mut s = svg_open(title);
    let n = series.len().max(1) as f64;
    let panel = (HEIGHT - 2.0 * PAD) / n;
    for (i, (name, data)) in series.iter().enumerate() {
        let top = PAD + panel * i as f64;
        let frame = Frame::fit(data.iter().copied(), (PAD + 60.0, top + 4.0), (WIDTH - 2.0 * PAD - 60.0, panel - 16.0));
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r##"<rect x="{:.0}" y="{:.1}" width="{:.0}" height="{:.1}" fill="none" stroke="#cccccc"/>"##,
            PAD + 60.0,
            top + 4.0,
            WIDTH - 2.0 * PAD - 60.0,
            panel - 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{PAD}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            top + panel / 2.0,
            escape(name)
        );
        let _ = writeln!(
            s,
            r#"<text x="{PAD}" y="{:.1}" font-family="sans-serif" font-size="9">{:.3e}..{:.3e}</text>"#,
            top + panel / 2.0 + 12.0,
            frame.min.1,
            frame.max.1
        );
        let pts: Vec<_> = data.iter().map(|p| frame.map(*p)).collect();
        polyline(&mut s, &pts, color, false);
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}
