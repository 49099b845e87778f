//! CSV tables, SVG line plots and atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use sdefl_core::{Error as CoreError, Path};

use crate::error::{CliError, Result};

/// A header plus rows of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// `t,value` for scalar paths; `names` labels the value columns otherwise.
    pub fn from_path(path: &Path, names: &[&str]) -> Self {
        let mut header = vec!["t"];
        header.extend_from_slice(names);
        let mut table = Self::new(&header);
        for k in 0..path.len() {
            let mut row = vec![path.time(k)];
            row.extend_from_slice(path.get(k));
            table.rows.push(row);
        }
        table
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }
}

/// Write `bytes` to a temporary sibling and rename it over `file`.
pub fn write_atomic(file: &FsPath, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = file.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = file.file_name().ok_or_else(|| CliError::io(file, std::io::ErrorKind::InvalidInput.into()))?;
    let tmp = file.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, file).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(file, e)
    })
}

fn csv_bytes<I, R>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

/// Header row then one row per entry; `{}` formatting round-trips every f64.
pub fn emit_csv(table: &Table, file: &FsPath) -> Result<PathBuf> {
    let rows = table.rows.iter().map(|r| r.iter().map(|x| format!("{x}")).collect::<Vec<_>>());
    write_atomic(file, &csv_bytes(&table.header, rows))?;
    Ok(file.to_path_buf())
}

/// A CSV whose columns may hold text, for parameter and summary tables.
pub fn emit_records(header: &[&str], rows: &[Vec<String>], file: &FsPath) -> Result<PathBuf> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_atomic(file, &csv_bytes(&header, rows.iter().cloned()))?;
    Ok(file.to_path_buf())
}

/// The CSV for a path: `t,value` or `t,log_price,variance`.
pub fn emit_path_csv(path: &Path, file: &FsPath) -> Result<PathBuf> {
    let names: &[&str] = if path.dim() == 1 { &["value"] } else { &["log_price", "variance"] };
    emit_csv(&Table::from_path(path, names), file)
}

pub fn read_csv(file: &FsPath) -> Result<Table> {
    let bad = |reason: String| CliError::Csv { path: file.to_path_buf(), reason };
    let mut r = csv::Reader::from_path(file).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("row {}: {s:?} is not a number", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Rebuild a path from a CSV written by [`emit_path_csv`], checking the grid.
pub fn path_from_table(table: &Table, file: &FsPath) -> Result<Path> {
    let bad = |reason: String| CliError::Csv { path: file.to_path_buf(), reason };
    let dim = table.header.len().checked_sub(1).filter(|d| *d == 1 || *d == 2);
    let dim = dim.ok_or_else(|| bad("expected columns t,value or t,log_price,variance".into()))?;
    if table.header[0] != "t" {
        return Err(bad("first column must be t".into()));
    }
    let t = table.column("t").unwrap_or_default();
    if t.len() < 2 {
        return Err(bad("need at least two rows".into()));
    }
    let dt = t[1] - t[0];
    let uniform = t.iter().enumerate().all(|(k, tk)| (tk - (t[0] + k as f64 * dt)).abs() <= 1e-9 * (1.0 + tk.abs()));
    if !(dt > 0.0) || !uniform {
        return Err(bad("t must be a uniform increasing grid".into()));
    }
    let values: Vec<f64> = table.rows.iter().flat_map(|r| r[1..].to_vec()).collect();
    Ok(Path::new(t[0], dt, dim, values)?)
}

/// One labelled line of a plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64, span: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if span < 1e-2 || v.abs() >= 1e5 {
        format!("{v:.2e}")
    } else if span < 10.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.1}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

/// Render lines to a self-contained SVG document.
pub fn render_svg(series: &[Series], title: &str) -> Result<String> {
    if series.is_empty() {
        return Err(CoreError::shape("a plot needs at least one series").into());
    }
    for s in series {
        if s.x.len() != s.y.len() || s.x.is_empty() {
            return Err(CoreError::shape(format!("series {:?} needs matching non-empty x and y", s.label)).into());
        }
    }
    let finite = |s: &Series| s.x.iter().zip(&s.y).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (*x, *y)).collect::<Vec<_>>();
    let points: Vec<Vec<(f64, f64)>> = series.iter().map(finite).collect();
    let (x0, x1) = range(points.iter().flatten().map(|p| p.0));
    let (y0, y1) = range(points.iter().flatten().map(|p| p.1));
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(out, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/>"#, TOP + ph, LEFT + pw, TOP + ph);
    let _ = writeln!(out, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/>"#, TOP + ph);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g class="ticks">"#);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(xv, x1 - x0));
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, tick_label(yv, y1 - y0));
    }
    let _ = writeln!(out, "</g>");
    for (i, pts) in points.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
            coords.join(" ")
        );
    }
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let y = TOP + 12.0 + 18.0 * i as f64;
        let x = LEFT + pw - 190.0;
        let _ = writeln!(
            out,
            r#"<g class="legend-entry"><line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

pub fn emit_plot(series: &[Series], title: &str, file: &FsPath) -> Result<PathBuf> {
    let svg = render_svg(series, title)?;
    write_atomic(file, svg.as_bytes())?;
    Ok(file.to_path_buf())
}
