//! Static SVG line charts for trajectory, report and sweep CSV files.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; otherwise fitted to the data.
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{x:.1e}");
    }
    let s = format!("{x:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn data_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

impl Chart {
    fn finite_points(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    }

    fn draw(&self, out: &mut String, top: f64) {
        let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
        let (y0, y1) = (top + MARGIN_TOP, top + PANEL_HEIGHT - MARGIN_BOTTOM);
        let (xmin, xmax) = data_range(self.finite_points().map(|p| p.0));
        let (ymin, ymax) = self.y_range.unwrap_or_else(|| data_range(self.finite_points().map(|p| p.1)));
        let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
        let sy = |y: f64| y1 - (y - ymin) / (ymax - ymin) * (y1 - y0);

        writeln!(out, r#"<g class="panel">"#).unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            num((x0 + x1) / 2.0),
            num(top + 18.0),
            escape(&self.title)
        )
        .unwrap();
        writeln!(
            out,
            r#"<path class="axes" d="M{} {} L{} {} L{} {}" fill="none" stroke="black"/>"#,
            num(x0),
            num(y0),
            num(x0),
            num(y1),
            num(x1),
            num(y1)
        )
        .unwrap();
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (xmin + f * (xmax - xmin), ymin + f * (ymax - ymin));
            let (px, py) = (sx(xv), sy(yv));
            writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle" font-size="10">{4}</text>"#,
                num(px),
                num(y1),
                num(y1 + 4.0),
                num(y1 + 16.0),
                tick_label(xv)
            )
            .unwrap();
            writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end" font-size="10">{5}</text>"#,
                num(x0 - 4.0),
                num(py),
                num(x0),
                num(x0 - 6.0),
                num(py + 3.0),
                tick_label(yv)
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            num((x0 + x1) / 2.0),
            num(y1 + 34.0),
            escape(&self.x_label)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{0}" y="{1}" text-anchor="middle" font-size="12" transform="rotate(-90 {0} {1})">{2}</text>"#,
            num(18.0),
            num((y0 + y1) / 2.0),
            escape(&self.y_label)
        )
        .unwrap();
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(y))))
                .collect();
            if !pts.is_empty() {
                writeln!(
                    out,
                    r#"<polyline class="series" data-name="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    escape(&s.name),
                    color,
                    pts.join(" ")
                )
                .unwrap();
            }
            let ly = y0 + 14.0 * i as f64;
            writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/><text x="{4}" y="{5}" font-size="11">{6}</text>"#,
                num(x1 + 10.0),
                num(ly),
                num(x1 + 28.0),
                color,
                num(x1 + 32.0),
                num(ly + 4.0),
                escape(&s.name)
            )
            .unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
}

/// Renders charts stacked vertically into one SVG document.
pub fn render_svg(charts: &[Chart]) -> String {
    let height = PANEL_HEIGHT * charts.len().max(1) as f64;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        WIDTH, height, WIDTH, height
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (i, c) in charts.iter().enumerate() {
        c.draw(&mut out, i as f64 * PANEL_HEIGHT);
    }
    out.push_str("</svg>\n");
    out
}

/// CSV layouts this crate writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvKind {
    Trajectory,
    Report,
    Sweep,
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
        let header = r
            .headers()
            .map_err(|e| csv_error(&e))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        if header.iter().all(|h| h.is_empty()) {
            return Err(Error::format(0, "CSV has no header row"));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(&e))?;
            let offset = rec.position().map_or(0, |p| p.byte());
            rows.push((offset, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(0, format!("CSV lacks column '{name}'")))
    }

    fn number(&self, row: usize, col: usize) -> Result<f64> {
        let (offset, rec) = &self.rows[row];
        let s = &rec[col];
        s.parse::<f64>()
            .map_err(|_| Error::format(*offset as usize, format!("'{s}' in column '{}' is not a number", self.header[col])))
    }

    fn series(&self, x: &str, y: &str, name: &str) -> Result<Series> {
        let (cx, cy) = (self.col(x)?, self.col(y)?);
        let points = (0..self.rows.len())
            .map(|r| Ok((self.number(r, cx)?, self.number(r, cy)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Series {
            name: name.to_string(),
            points,
        })
    }
}

fn csv_error(e: &csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte() as usize);
    Error::format(offset, format!("malformed CSV: {e}"))
}

fn detect(header: &[String]) -> Result<CsvKind> {
    let has = |c: &str| header.iter().any(|h| h == c);
    if has("iter") && has("t_err") && has("v1") {
        Ok(CsvKind::Trajectory)
    } else if has("task_id") && has("final_t_err") {
        Ok(CsvKind::Report)
    } else if has("batch") && has("offset_m") {
        Ok(CsvKind::Sweep)
    } else {
        Err(Error::format(0, "unrecognized CSV header"))
    }
}

fn chart(title: &str, x: &str, y: &str, series: Vec<Series>, y_range: Option<(f64, f64)>) -> Chart {
    Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        series,
        y_range,
    }
}

/// Charts for one CSV file produced by this crate.
pub fn charts_for_csv(bytes: &[u8]) -> Result<(CsvKind, Vec<Chart>)> {
    let t = Table::parse(bytes)?;
    let kind = detect(&t.header)?;
    let charts = match kind {
        CsvKind::Trajectory => vec![
            chart(
                "Translation and feature error",
                "iteration",
                "error",
                vec![t.series("iter", "t_err", "t_err (m)")?, t.series("iter", "feat_err", "feature RMS")?],
                None,
            ),
            chart("Rotation error", "iteration", "degrees", vec![t.series("iter", "r_err", "r_err (deg)")?], None),
            chart(
                "Photometric error",
                "iteration",
                "mean |I - I*|",
                vec![t.series("iter", "photo_err", "photo_err")?],
                None,
            ),
            chart(
                "Velocity",
                "iteration",
                "m/s, rad/s",
                ["v1", "v2", "v3", "v4", "v5", "v6"]
                    .iter()
                    .map(|c| t.series("iter", c, c))
                    .collect::<Result<_>>()?,
                None,
            ),
        ],
        CsvKind::Sweep => {
            let methods: Vec<&String> = t.header.iter().skip(2).collect();
            let series = methods
                .iter()
                .map(|m| t.series("offset_m", m, m))
                .collect::<Result<_>>()?;
            vec![chart(
                "Convergence ratio",
                "per-axis offset (m)",
                "ratio",
                series,
                Some((0.0, 1.0)),
            )]
        }
        CsvKind::Report => {
            let (cm, ct) = (t.col("method")?, t.col("final_t_err")?);
            let mut series: Vec<Series> = Vec::new();
            for r in 0..t.rows.len() {
                let name = t.rows[r].1[cm].clone();
                let y = t.number(r, ct)?;
                match series.iter_mut().find(|s| s.name == name) {
                    Some(s) => s.points.push((s.points.len() as f64, y)),
                    None => series.push(Series {
                        name,
                        points: vec![(0.0, y)],
                    }),
                }
            }
            vec![chart("Final translation error", "task", "m", series, None)]
        }
    };
    Ok((kind, charts))
}

/// Renders the charts of a trajectory, report or sweep CSV as one SVG.
pub fn render_plots(bytes: &[u8]) -> Result<String> {
    Ok(render_svg(&charts_for_csv(bytes)?.1))
}
