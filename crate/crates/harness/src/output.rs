//! results.json, sweep CSVs, plot series and static SVG charts.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const SWEEP_HEADER: &str = "# wplap-sweep v1 columns=parameter,value,metric,tolerance,pass";
pub const SERIES_HEADER: &str = "# wplap-series v1";

/// One CSV row: parameter name and value, measured metric, tolerance, outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub metric: f64,
    /// NaN when a row has no threshold of its own.
    pub tolerance: f64,
    pub pass: bool,
}

impl SweepRow {
    pub fn new(parameter: &str, value: f64, metric: f64, tolerance: f64, pass: bool) -> Self {
        SweepRow { parameter: parameter.to_string(), value, metric, tolerance, pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub name: String,
    pub metric: String,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    pub fn new(name: &str, metric: &str) -> Self {
        Sweep { name: name.to_string(), metric: metric.to_string(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: SweepRow) {
        self.rows.push(row);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

pub fn write_sweep<W: Write>(sweep: &Sweep, mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER} sweep={} metric={}", sweep.name, sweep.metric)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["parameter", "value", "metric", "tolerance", "pass"])?;
    for r in &sweep.rows {
        csv.write_record([r.parameter.clone(), fmt_num(r.value), fmt_num(r.metric), fmt_num(r.tolerance), r.pass.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub log_log: bool,
}

impl Series {
    pub fn new(name: &str, x_label: &str, y_label: &str, log_log: bool) -> Self {
        Series { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), points: Vec::new(), log_log }
    }

    /// Least-squares slope in the plotted coordinates; None with fewer than two usable points.
    pub fn fitted_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_log || (*x > 0.0 && *y > 0.0)))
            .map(|&(x, y)| if self.log_log { (x.ln(), y.ln()) } else { (x, y) })
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        Some(wplap_core::numerics::ls_slope(&xs, &ys))
    }
}

pub fn write_series_csv<W: Write>(s: &Series, mut w: W) -> Result<()> {
    let slope = s.fitted_slope().map(|v| format!(" slope={v:e}")).unwrap_or_default();
    writeln!(w, "{SERIES_HEADER} series={} log_log={}{slope}", s.name, s.log_log)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([s.x_label.as_str(), s.y_label.as_str()])?;
    for (x, y) in &s.points {
        csv.write_record([fmt_num(*x), fmt_num(*y)])?;
    }
    csv.flush()?;
    Ok(())
}

/// Static line chart.
pub fn render_svg(s: &Series) -> String {
    let (w, h, m) = (480.0, 320.0, 50.0);
    let tr = |v: f64| if s.log_log { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = s.points.iter().filter(|(x, y)| !s.log_log || (*x > 0.0 && *y > 0.0)).map(|&(x, y)| (tr(x), tr(y))).collect();
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m / 2.0, h - m);
    let _ = writeln!(out, r#"<line x1="{m}" y1="{}" x2="{m}" y2="{}" stroke="black"/>"#, h - m, m / 2.0);
    let scale = if s.log_log { " (log10)" } else { "" };
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}{scale}</text>"#, w / 2.0, h - 12.0, s.x_label);
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">{}{scale}</text>"#,
        h / 2.0,
        h / 2.0,
        s.y_label
    );
    let _ = writeln!(out, r#"<text x="{}" y="18" font-size="13" text-anchor="middle">{}</text>"#, w / 2.0, s.name);
    if !pts.is_empty() {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let sx = |x: f64| m + (w - 1.5 * m) * if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 };
        let sy = |y: f64| (h - m) - (h - 1.5 * m) * if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 };
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="2" points="{}"/>"##, path.join(" "));
        for &(x, y) in &pts {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f5fa8"/>"##, sx(x), sy(y));
        }
        let _ = writeln!(out, r#"<text x="{m}" y="{}" font-size="10">{x0:.3}</text>"#, h - m + 14.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.3}</text>"#, w - m / 2.0, h - m + 14.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.3}</text>"#, m - 4.0, h - m);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y1:.3}</text>"#, m - 4.0, m / 2.0 + 4.0);
        if let Some(sl) = s.fitted_slope() {
            let _ = writeln!(out, r#"<text x="{}" y="36" font-size="11" text-anchor="end">slope {sl:.3}</text>"#, w - m / 2.0);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `<name>.csv` in `dir` and `plots/<name>.svg`.
pub fn emit_plot_data(dir: &Path, s: &Series) -> Result<()> {
    std::fs::create_dir_all(dir.join("plots"))?;
    write_series_csv(s, std::fs::File::create(dir.join(format!("series_{}.csv", s.name)))?)?;
    std::fs::write(dir.join("plots").join(format!("{}.svg", s.name)), render_svg(s))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_is_header_only() {
        let s = Series::new("localization", "delta", "error", true);
        let mut buf = Vec::new();
        write_series_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "delta,error");
        assert!(render_svg(&s).contains("</svg>"));
    }

    #[test]
    fn slope_annotation_is_least_squares() {
        let mut s = Series::new("rate", "n", "zeta", true);
        for n in [10.0f64, 100.0, 1000.0] {
            s.points.push((n, 3.0 * n.powf(-0.5)));
        }
        assert!((s.fitted_slope().unwrap() + 0.5).abs() < 1e-12);
        let mut lin = Series::new("lin", "x", "y", false);
        lin.points = vec![(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
        assert!((lin.fitted_slope().unwrap() - 2.0).abs() < 1e-12);
        assert!(render_svg(&s).contains("slope -0.500"));
    }

    #[test]
    fn sweep_csv_layout() {
        let mut sw = Sweep::new("cauchy", "lp_distance");
        sw.push(SweepRow::new("delta", 0.4, 1e-3, f64::NAN, true));
        let mut buf = Vec::new();
        write_sweep(&sw, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with(SWEEP_HEADER));
        assert_eq!(lines[1], "parameter,value,metric,tolerance,pass");
        assert_eq!(lines[2], "delta,4e-1,1e-3,,true");
    }
}
