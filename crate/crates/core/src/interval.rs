//! Scales, intervals and stroke extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper bound of the standardised scale used for analysis.
pub const NORMALIZED_MIN: f64 = 0.0;
pub const NORMALIZED_MAX: f64 = 100.0;

/// A continuous response scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub left_label: String,
    #[serde(default)]
    pub right_label: String,
    #[serde(default, rename = "ticks", skip_serializing_if = "Vec::is_empty")]
    pub tick_values: Vec<f64>,
}

impl ScaleSpec {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let scale = ScaleSpec {
            min,
            max,
            left_label: String::new(),
            right_label: String::new(),
            tick_values: Vec::new(),
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn with_labels(mut self, left: impl Into<String>, right: impl Into<String>) -> Self {
        self.left_label = left.into();
        self.right_label = right.into();
        self
    }

    /// The `[0, 100]` scale all analyses work on.
    pub fn normalized() -> Self {
        ScaleSpec::new(NORMALIZED_MIN, NORMALIZED_MAX).expect("static scale")
    }

    pub fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::Config("scale bounds must be finite".into()));
        }
        if self.max <= self.min {
            return Err(Error::Config(format!(
                "scale max ({}) must exceed min ({})",
                self.max, self.min
            )));
        }
        if let Some(t) = self
            .tick_values
            .iter()
            .find(|&&t| !(self.min..=self.max).contains(&t))
        {
            return Err(Error::Config(format!(
                "tick {t} outside scale [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, interval: &Interval) -> bool {
        self.min <= interval.lo && interval.hi <= self.max
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Deserialize)]
struct RawInterval {
    lo: f64,
    hi: f64,
}

impl TryFrom<RawInterval> for Interval {
    type Error = Error;

    fn try_from(raw: RawInterval) -> Result<Self> {
        Interval::new(raw.lo, raw.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInterval(format!(
                "endpoints must be finite, got [{lo}, {hi}]"
            )));
        }
        if lo > hi {
            return Err(Error::InvalidInterval(format!("lo {lo} exceeds hi {hi}")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(x: f64) -> Result<Self> {
        Interval::new(x, x)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn summarize(&self) -> IntervalSummary {
        summarize(self)
    }
}

/// Position and size of an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub midpoint: f64,
    pub width: f64,
}

pub fn summarize(interval: &Interval) -> IntervalSummary {
    IntervalSummary {
        midpoint: interval.midpoint(),
        width: interval.width(),
    }
}

/// Maps both endpoints affinely onto `[0, 100]`.
pub fn normalize(interval: &Interval, scale: &ScaleSpec) -> Result<Interval> {
    scale.validate()?;
    if !scale.contains(interval) {
        return Err(Error::InvalidInterval(format!(
            "[{}, {}] lies outside scale [{}, {}]",
            interval.lo, interval.hi, scale.min, scale.max
        )));
    }
    let span = scale.span();
    let map = |x: f64| (x - scale.min) / span * NORMALIZED_MAX;
    Interval::new(map(interval.lo), map(interval.hi))
}

/// A single sampled pen position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokePoint {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub t: i64,
}

/// Affine map `scale_x = offset + gain * canvas_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanvasMap {
    pub offset: f64,
    pub gain: f64,
}

impl CanvasMap {
    pub const IDENTITY: CanvasMap = CanvasMap {
        offset: 0.0,
        gain: 1.0,
    };

    pub fn to_scale(&self, canvas_x: f64) -> f64 {
        self.offset + self.gain * canvas_x
    }
}

/// A drawn response as captured on the canvas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub points: Vec<StrokePoint>,
    pub canvas_to_scale: CanvasMap,
}

impl Stroke {
    pub fn new(points: Vec<StrokePoint>, canvas_to_scale: CanvasMap) -> Self {
        Stroke {
            points,
            canvas_to_scale,
        }
    }

    /// Builds a stroke from `(x, y)` pairs with millisecond timestamps `0, 1, ...`.
    pub fn from_xy(xy: impl IntoIterator<Item = (f64, f64)>, canvas_to_scale: CanvasMap) -> Self {
        let points = xy
            .into_iter()
            .enumerate()
            .map(|(t, (x, y))| StrokePoint { x, y, t: t as i64 })
            .collect();
        Stroke::new(points, canvas_to_scale)
    }
}

/// Reduces a stroke to the clamped x-extent of its points in scale units.
pub fn extract_interval(stroke: &Stroke, scale: &ScaleSpec) -> Result<Interval> {
    scale.validate()?;
    let map = stroke.canvas_to_scale;
    if !map.gain.is_finite() || !map.offset.is_finite() || map.gain == 0.0 {
        return Err(Error::Config(format!(
            "canvas map is degenerate (offset {}, gain {})",
            map.offset, map.gain
        )));
    }
    if stroke.points.len() < 2 {
        return Err(Error::MalformedStroke(format!(
            "need at least 2 points, got {}",
            stroke.points.len()
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &stroke.points {
        let x = map.to_scale(p.x);
        if !x.is_finite() {
            return Err(Error::MalformedStroke(format!(
                "point x={} maps to a non-finite scale position",
                p.x
            )));
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Interval::new(scale.clamp(lo), scale.clamp(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale100() -> ScaleSpec {
        ScaleSpec::new(0.0, 100.0).unwrap()
    }

    fn ellipse(cx: f64, rx: f64, n: usize) -> Stroke {
        Stroke::from_xy(
            (0..n).map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                (cx + rx * a.cos(), 20.0 * a.sin())
            }),
            CanvasMap::IDENTITY,
        )
    }

    #[test]
    fn extracts_extrema_of_points() {
        let pts = [(12.4, 0.0), (30.0, 5.0), (57.8, 0.0), (30.0, -5.0), (12.5, 0.1)];
        let stroke = Stroke::from_xy(pts, CanvasMap::IDENTITY);
        let iv = extract_interval(&stroke, &scale100()).unwrap();
        assert_eq!(iv, Interval::new(12.4, 57.8).unwrap());
    }

    #[test]
    fn overshoot_is_clamped_to_scale_ends() {
        let stroke = Stroke::from_xy([(-5.0, 0.0), (103.0, 1.0), (40.0, 3.0)], CanvasMap::IDENTITY);
        let iv = extract_interval(&stroke, &scale100()).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.0, 100.0));
    }

    #[test]
    fn vertical_line_has_zero_width() {
        let stroke = Stroke::from_xy((0..10).map(|i| (42.0, i as f64)), CanvasMap::IDENTITY);
        let iv = extract_interval(&stroke, &scale100()).unwrap();
        assert_eq!((iv.lo, iv.hi), (42.0, 42.0));
        assert_eq!(iv.width(), 0.0);
    }

    #[test]
    fn full_circle_covers_scale() {
        let iv = extract_interval(&ellipse(50.0, 60.0, 64), &scale100()).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.0, 100.0));
    }

    #[test]
    fn canvas_map_is_applied() {
        // 400px canvas spanning a 0..40 scale
        let map = CanvasMap {
            offset: 0.0,
            gain: 0.1,
        };
        let stroke = Stroke::from_xy([(200.0, 0.0), (300.0, 0.0)], map);
        let scale = ScaleSpec::new(0.0, 40.0).unwrap();
        let iv = extract_interval(&stroke, &scale).unwrap();
        assert_eq!((iv.lo, iv.hi), (20.0, 30.0));
    }

    #[test]
    fn stroke_errors() {
        let single = Stroke::from_xy([(1.0, 1.0)], CanvasMap::IDENTITY);
        assert!(matches!(
            extract_interval(&single, &scale100()),
            Err(Error::MalformedStroke(_))
        ));
        let empty = Stroke::from_xy([], CanvasMap::IDENTITY);
        assert!(matches!(
            extract_interval(&empty, &scale100()),
            Err(Error::MalformedStroke(_))
        ));
        let flat = Stroke::from_xy(
            [(1.0, 1.0), (2.0, 2.0)],
            CanvasMap {
                offset: 3.0,
                gain: 0.0,
            },
        );
        assert!(matches!(
            extract_interval(&flat, &scale100()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn summaries() {
        let s = summarize(&Interval::new(20.0, 30.0).unwrap());
        assert_eq!((s.midpoint, s.width), (25.0, 10.0));
        let s = summarize(&Interval::point(42.0).unwrap());
        assert_eq!((s.midpoint, s.width), (42.0, 0.0));
        let s = summarize(&Interval::new(8.0, 12.0).unwrap());
        assert_eq!((s.midpoint, s.width), (10.0, 4.0));
    }

    #[test]
    fn normalization_examples() {
        let seven = ScaleSpec::new(0.0, 7.0).unwrap();
        let n = normalize(&Interval::point(3.5).unwrap(), &seven).unwrap();
        assert_eq!((n.lo, n.hi), (50.0, 50.0));
        let n = normalize(&Interval::new(0.0, 7.0).unwrap(), &seven).unwrap();
        assert_eq!((n.lo, n.hi), (0.0, 100.0));
        let years = ScaleSpec::new(0.0, 40.0).unwrap();
        let n = normalize(&Interval::new(20.0, 30.0).unwrap(), &years).unwrap();
        assert_eq!((n.lo, n.hi), (50.0, 75.0));
    }

    #[test]
    fn normalize_rejects_degenerate_scale_and_outside_interval() {
        let bad = ScaleSpec {
            min: 3.0,
            max: 3.0,
            left_label: String::new(),
            right_label: String::new(),
            tick_values: vec![],
        };
        assert!(matches!(
            normalize(&Interval::point(3.0).unwrap(), &bad),
            Err(Error::Config(_))
        ));
        assert!(normalize(&Interval::new(-1.0, 2.0).unwrap(), &scale100()).is_err());
    }

    #[test]
    fn interval_rejects_inverted_and_nan() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(serde_json::from_str::<Interval>(r#"{"lo":3,"hi":1}"#).is_err());
    }

    #[test]
    fn scale_validation() {
        assert!(ScaleSpec::new(7.0, 0.0).is_err());
        let mut s = ScaleSpec::new(0.0, 10.0).unwrap();
        s.tick_values = vec![0.0, 5.0, 11.0];
        assert!(s.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_scale() -> impl Strategy<Value = ScaleSpec> {
            (-1e3..1e3f64, 1e-3..1e3f64).prop_map(|(min, span)| ScaleSpec::new(min, min + span).unwrap())
        }

        proptest! {
            #[test]
            fn extraction_is_idempotent(
                scale in any_scale(),
                xs in prop::collection::vec(-2e3..2e3f64, 2..40),
            ) {
                let stroke = Stroke::from_xy(xs.iter().map(|&x| (x, 0.0)), CanvasMap::IDENTITY);
                let iv = extract_interval(&stroke, &scale).unwrap();
                let again = Stroke::from_xy([(iv.lo, 0.0), (iv.hi, 0.0)], CanvasMap::IDENTITY);
                prop_assert_eq!(extract_interval(&again, &scale).unwrap(), iv);
                prop_assert!(iv.width() <= scale.span());
            }

            #[test]
            fn normalize_is_monotone_and_scales_width(
                scale in any_scale(),
                a in 0.0..=1.0f64,
                b in 0.0..=1.0f64,
            ) {
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                let iv = Interval::new(
                    scale.min + a * scale.span(),
                    (scale.min + b * scale.span()).min(scale.max),
                ).unwrap();
                let n = normalize(&iv, &scale).unwrap();
                prop_assert!(n.lo <= n.hi);
                let expected = 100.0 * iv.width() / scale.span();
                prop_assert!((n.width() - expected).abs() <= 1e-9 * (1.0 + expected));
                let ends = normalize(&Interval::new(scale.min, scale.max).unwrap(), &scale).unwrap();
                prop_assert_eq!((ends.lo, ends.hi), (0.0, 100.0));
            }
        }
    }
}
