//! SVG rendering of interval stacks and agreement functions.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iaa::AgreementFunction;
use crate::interval::{Interval, ScaleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotStyle {
    IntervalStack,
    Iaa,
}

/// Canvas size in SVG user units. The scale axis spans the plot area, which
/// is the canvas minus `margin` on every side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub style: PlotStyle,
}

impl PlotSpec {
    pub fn new(style: PlotStyle) -> Self {
        PlotSpec {
            width: 600.0,
            height: 400.0,
            margin: 40.0,
            style,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.width) || !ok(self.height) || !(self.margin >= 0.0) {
            return Err(Error::InvalidArgument("plot dimensions must be positive".into()));
        }
        if self.plot_width() <= 0.0 || self.plot_height() <= 0.0 {
            return Err(Error::InvalidArgument("margins leave no plot area".into()));
        }
        Ok(())
    }

    pub fn plot_width(&self) -> f64 {
        self.width - 2.0 * self.margin
    }

    pub fn plot_height(&self) -> f64 {
        self.height - 2.0 * self.margin
    }

    /// Horizontal position of scale value `v`.
    pub fn x(&self, v: f64, scale: &ScaleSpec) -> f64 {
        self.margin + (v - scale.min) / scale.span() * self.plot_width()
    }

    /// Vertical position of membership level `m` in `[0, 1]`.
    pub fn y(&self, m: f64) -> f64 {
        self.margin + (1.0 - m) * self.plot_height()
    }
}

fn n(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn open(spec: &PlotSpec, class: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" class=\"{class}\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = n(spec.width),
        h = n(spec.height)
    )
}

fn axis(svg: &mut String, spec: &PlotSpec, scale: &ScaleSpec) {
    let base = spec.margin + spec.plot_height();
    let (x0, x1) = (spec.x(scale.min, scale), spec.x(scale.max, scale));
    let _ = writeln!(
        svg,
        "<line class=\"axis\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        n(x0),
        n(base),
        n(x1),
        n(base)
    );
    for &t in &scale.tick_values {
        let x = spec.x(t, scale);
        let _ = writeln!(
            svg,
            "<line class=\"axis-tick\" x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>",
            x = n(x),
            b = n(base),
            b2 = n(base + 5.0)
        );
    }
    let label_y = n(base + 20.0);
    let _ = writeln!(
        svg,
        "<text class=\"label\" x=\"{}\" y=\"{label_y}\" text-anchor=\"start\">{}</text>",
        n(x0),
        escape(&scale.left_label)
    );
    let _ = writeln!(
        svg,
        "<text class=\"label\" x=\"{}\" y=\"{label_y}\" text-anchor=\"end\">{}</text>",
        n(x1),
        escape(&scale.right_label)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Deserialize)]
struct IntervalRow {
    lo: f64,
    hi: f64,
}

/// Reads `lo,hi` rows.
pub fn read_intervals<R: Read>(input: R) -> Result<Vec<Interval>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    reader
        .deserialize::<IntervalRow>()
        .map(|row| {
            let row = row?;
            Interval::new(row.lo, row.hi)
        })
        .collect()
}

/// One horizontal bar per response, first response on top. Zero-width
/// responses are drawn as a vertical tick.
pub fn plot_intervals_svg(responses: &[Interval], scale: &ScaleSpec, spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    scale.validate()?;
    if responses.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let band = spec.plot_height() / responses.len() as f64;
    let bar = band * 0.7;
    let mut svg = open(spec, "interval-stack");
    for (i, iv) in responses.iter().enumerate() {
        let top = spec.margin + i as f64 * band + (band - bar) / 2.0;
        let (x0, x1) = (spec.x(iv.lo, scale), spec.x(iv.hi, scale));
        if iv.width() == 0.0 {
            let _ = writeln!(
                svg,
                "<line class=\"tick\" x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"steelblue\" stroke-width=\"2\"/>",
                n(top),
                n(top + bar),
                x = n(x0)
            );
        } else {
            let _ = writeln!(
                svg,
                "<rect class=\"interval\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"steelblue\"/>",
                n(x0),
                n(top),
                n(x1 - x0),
                n(bar)
            );
        }
    }
    axis(&mut svg, spec, scale);
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Vertices of the membership step outline as `(scale value, level)`.
///
/// Adjacent segments at equal level are merged. A function supported on a
/// single point is drawn as a spike to that point's level.
pub fn iaa_outline(af: &AgreementFunction) -> Vec<(f64, f64)> {
    let bps = af.breakpoints();
    if bps.len() == 1 {
        let m = af.point_levels()[0];
        return vec![(bps[0], 0.0), (bps[0], m), (bps[0], 0.0)];
    }
    let levels = af.segment_levels();
    let mut pts = vec![(bps[0], 0.0)];
    let mut current = 0.0;
    for (k, &m) in levels.iter().enumerate() {
        if m != current {
            pts.push((bps[k], current));
            pts.push((bps[k], m));
            current = m;
        }
    }
    pts.push((bps[bps.len() - 1], current));
    pts.push((bps[bps.len() - 1], 0.0));
    pts.dedup();
    pts
}

/// Step outline of membership against scale position, y axis `[0, 1]`.
pub fn plot_iaa_svg(af: &AgreementFunction, scale: &ScaleSpec, spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    scale.validate()?;
    let mut svg = open(spec, "iaa");
    let base = n(spec.y(0.0));
    let _ = writeln!(
        svg,
        "<line class=\"baseline\" x1=\"{}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"grey\"/>",
        n(spec.x(scale.min, scale)),
        n(spec.x(scale.max, scale))
    );
    let mut d = String::new();
    for (i, (v, m)) in iaa_outline(af).into_iter().enumerate() {
        let _ = write!(
            d,
            "{}{},{}",
            if i == 0 { "M" } else { " L" },
            n(spec.x(v, scale)),
            n(spec.y(m))
        );
    }
    let _ = writeln!(
        svg,
        "<path class=\"membership\" d=\"{d}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>"
    );
    axis(&mut svg, spec, scale);
    svg.push_str("</svg>\n");
    Ok(svg)
}
