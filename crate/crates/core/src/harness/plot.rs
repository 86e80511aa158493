//! Line charts of median step counts, written as plain SVG.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{median, ResultRow, RowStatus, SweepStructure};
use crate::error::{Error, Result};
use crate::norm::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    P,
    B,
}

impl Axis {
    fn label(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::P => "p",
            Axis::B => "b",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Axis::N),
            "p" | "P" => Ok(Axis::P),
            "b" | "B" => Ok(Axis::B),
            _ => Err(Error::InvalidArgument(format!(
                "unknown axis {s:?}, expected N, p or b"
            ))),
        }
    }
}

/// What distinguishes one polyline from another. The structure always takes
/// part, so `P` draws one line per (p, structure) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKey {
    P,
    N,
    B,
    Structure,
}

impl SeriesKey {
    fn axis(self) -> Option<Axis> {
        match self {
            SeriesKey::P => Some(Axis::P),
            SeriesKey::N => Some(Axis::N),
            SeriesKey::B => Some(Axis::B),
            SeriesKey::Structure => None,
        }
    }
}

impl FromStr for SeriesKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "P" => Ok(SeriesKey::P),
            "N" | "n" => Ok(SeriesKey::N),
            "b" | "B" => Ok(SeriesKey::B),
            "structure" => Ok(SeriesKey::Structure),
            _ => Err(Error::InvalidArgument(format!(
                "unknown series key {s:?}, expected p, N, b or structure"
            ))),
        }
    }
}

fn dim(row: &ResultRow, axis: Axis) -> usize {
    match axis {
        Axis::N => row.nodes,
        Axis::P => row.phys,
        Axis::B => row.bond,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Series {
    value: Option<usize>,
    structure: SweepStructure,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Renders the chart as an SVG document.
pub fn render_steps_svg(rows: &[ResultRow], x_axis: Axis, series: SeriesKey) -> Result<String> {
    if series.axis() == Some(x_axis) {
        return Err(Error::InvalidArgument(format!(
            "series key and x axis are both {}",
            x_axis.label()
        )));
    }
    let rows: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.status != RowStatus::Skipped)
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to plot".into()));
    }

    let methods: BTreeSet<Method> = rows.iter().map(|r| r.method).collect();
    if methods.len() > 1 {
        return Err(Error::InvalidArgument(format!(
            "rows mix methods {methods:?}; plot one method at a time"
        )));
    }
    for fixed in [Axis::N, Axis::P, Axis::B] {
        if fixed == x_axis || series.axis() == Some(fixed) {
            continue;
        }
        let values: BTreeSet<usize> = rows.iter().map(|r| dim(r, fixed)).collect();
        if values.len() > 1 {
            return Err(Error::InvalidArgument(format!(
                "rows mix {} values {values:?}, which is neither the axis nor the series",
                fixed.label()
            )));
        }
    }

    let mut samples: BTreeMap<Series, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in &rows {
        let key = Series {
            value: series.axis().map(|a| dim(r, a)),
            structure: r.structure,
        };
        samples
            .entry(key)
            .or_default()
            .entry(dim(r, x_axis))
            .or_default()
            .push(r.steps_total as f64);
    }
    let lines: Vec<(Series, Vec<(usize, f64)>)> = samples
        .into_iter()
        .map(|(key, points)| {
            let pts = points
                .into_iter()
                .map(|(x, mut ys)| (x, median(&mut ys).expect("non-empty bucket")))
                .collect();
            (key, pts)
        })
        .collect();

    let xs: BTreeSet<usize> = rows.iter().map(|r| dim(r, x_axis)).collect();
    let x_min = *xs.first().unwrap() as f64;
    let x_max = *xs.last().unwrap() as f64;
    let y_max = lines
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .fold(0.0f64, f64::max);
    let y_top = nice_ceiling(y_max.max(1.0));

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| {
        if x_max > x_min {
            LEFT + (x - x_min) / (x_max - x_min) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let sy = |y: f64| TOP + plot_h - y / y_top * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let method = methods.first().unwrap();
    let _ = writeln!(
        w,
        r#"<text x="{}" y="18" text-anchor="middle">{} steps vs {}</text>"#,
        LEFT + plot_w / 2.0,
        method.as_str(),
        x_axis.label()
    );

    // Axes and ticks.
    let (x0, y0) = (LEFT, TOP + plot_h);
    let _ = writeln!(
        w,
        r#"<path d="M{x0} {TOP} L{x0} {y0} L{} {y0}" fill="none" stroke="black"/>"#,
        LEFT + plot_w
    );
    let stride = xs.len().div_ceil(12).max(1);
    for (i, &x) in xs.iter().enumerate() {
        if i % stride != 0 && i + 1 != xs.len() {
            continue;
        }
        let px = sx(x as f64);
        let _ = writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{x}</text>"#,
            y0 + 5.0,
            y0 + 18.0
        );
    }
    for i in 0..=4 {
        let y = y_top * i as f64 / 4.0;
        let py = sy(y);
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            trim_float(y)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        x_axis.label()
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">median steps</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    // One polyline per series, then the legend.
    for (i, (key, pts)) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = match key.structure {
            SweepStructure::Tt => "",
            SweepStructure::Ttm => r#" stroke-dasharray="6 3""#,
        };
        let points: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x as f64), sy(y)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let label = match (series.axis(), key.value) {
            (Some(a), Some(v)) => format!("{} {}={}", key.structure, a.label(), v),
            _ => key.structure.to_string(),
        };
        let _ = writeln!(
            w,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{}" y="{}">{label}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the chart of median `steps_total` over seeds to `path`.
pub fn plot_steps(
    rows: &[ResultRow],
    x_axis: Axis,
    series: SeriesKey,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let svg = render_steps_svg(rows, x_axis, series)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn nice_ceiling(v: f64) -> f64 {
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 4.0, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn trim_float(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
