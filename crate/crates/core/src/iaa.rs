//! Interval agreement aggregation.
//!
//! The agreement function of `N` closed intervals has height
//! `|{i : lo_i <= x <= hi_i}| / N` at every `x`. It is piecewise constant:
//! one level on each open segment between consecutive distinct endpoints and
//! a separate level at each endpoint itself, which can exceed both
//! neighbouring segments (touching intervals, zero-width responses).

use std::io::Write;

use crate::error::{Error, Result};
use crate::interval::Interval;

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementFunction {
    breakpoints: Vec<f64>,
    /// Coverage count at each breakpoint.
    point_counts: Vec<u32>,
    /// Coverage count on `(breakpoints[k], breakpoints[k + 1])`.
    segment_counts: Vec<u32>,
    n: u32,
}

/// Builds the agreement function of `intervals`.
pub fn build_agreement(intervals: &[Interval]) -> Result<AgreementFunction> {
    if intervals.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let n = u32::try_from(intervals.len())
        .map_err(|_| Error::InvalidArgument("too many intervals".into()))?;

    let mut starts: Vec<f64> = intervals.iter().map(|iv| iv.lo).collect();
    let mut ends: Vec<f64> = intervals.iter().map(|iv| iv.hi).collect();
    starts.sort_by(f64::total_cmp);
    ends.sort_by(f64::total_cmp);

    let mut breakpoints: Vec<f64> = starts.iter().chain(&ends).copied().collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let mut point_counts = Vec::with_capacity(breakpoints.len());
    let mut segment_counts = Vec::with_capacity(breakpoints.len().saturating_sub(1));
    let (mut si, mut ei) = (0usize, 0usize);
    // intervals covering the open segment immediately left of the current breakpoint
    let mut active: u32 = 0;
    for (k, &v) in breakpoints.iter().enumerate() {
        let mut opened = 0;
        while si < starts.len() && starts[si] == v {
            opened += 1;
            si += 1;
        }
        let mut closed = 0;
        while ei < ends.len() && ends[ei] == v {
            closed += 1;
            ei += 1;
        }
        let at_point = active + opened;
        point_counts.push(at_point);
        active = at_point - closed;
        if k + 1 < breakpoints.len() {
            segment_counts.push(active);
        }
    }
    debug_assert_eq!(active, 0);

    Ok(AgreementFunction {
        breakpoints,
        point_counts,
        segment_counts,
        n,
    })
}

impl AgreementFunction {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of contributing intervals.
    pub fn count(&self) -> usize {
        self.n as usize
    }

    /// Membership levels on the open segments between breakpoints.
    pub fn segment_levels(&self) -> Vec<f64> {
        self.segment_counts.iter().map(|&c| self.level(c)).collect()
    }

    /// Membership levels at the breakpoints themselves.
    pub fn point_levels(&self) -> Vec<f64> {
        self.point_counts.iter().map(|&c| self.level(c)).collect()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    fn level(&self, count: u32) -> f64 {
        f64::from(count) / f64::from(self.n)
    }

    /// Number of intervals containing `x`.
    pub fn coverage(&self, x: f64) -> u32 {
        match self.breakpoints.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(k) => self.point_counts[k],
            Err(0) => 0,
            Err(k) if k == self.breakpoints.len() => 0,
            Err(k) => self.segment_counts[k - 1],
        }
    }

    pub fn membership(&self, x: f64) -> f64 {
        if x.is_nan() {
            return 0.0;
        }
        self.level(self.coverage(x))
    }

    pub fn max_membership(&self) -> f64 {
        self.level(self.point_counts.iter().copied().max().unwrap_or(0))
    }

    /// Area under the membership function.
    pub fn integral(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.segment_counts)
            .map(|(w, &c)| self.level(c) * (w[1] - w[0]))
            .sum()
    }

    /// Samples membership at `lo, lo + step, ...` up to `hi`; `hi` itself is
    /// always the final sample.
    pub fn discretize(&self, lo: f64, hi: f64, step: f64) -> Result<Vec<(f64, f64)>> {
        discretize(self, lo, hi, step)
    }
}

pub fn membership(af: &AgreementFunction, x: f64) -> f64 {
    af.membership(x)
}

/// Rounds each endpoint half-away-from-zero.
pub fn round_to_integers(intervals: &[Interval]) -> Vec<Interval> {
    intervals
        .iter()
        .map(|iv| Interval {
            lo: iv.lo.round(),
            hi: iv.hi.round(),
        })
        .collect()
}

pub fn discretize(af: &AgreementFunction, lo: f64, hi: f64, step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidArgument(format!("bad sampling range [{lo}, {hi}]")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut out: Vec<(f64, f64)> = (0..=count)
        .map(|i| lo + i as f64 * step)
        .filter(|&x| x <= hi)
        .map(|x| (x, af.membership(x)))
        .collect();
    if out.last().is_none_or(|&(x, _)| x < hi) {
        out.push((hi, af.membership(hi)));
    }
    Ok(out)
}

/// Samples over the support of `af`.
pub fn discretize_support(af: &AgreementFunction, step: f64) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = af.support();
    discretize(af, lo, hi, step)
}

/// Two-column `x,membership` text.
pub fn write_samples<W: Write>(out: W, samples: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "membership"])?;
    for (x, m) in samples {
        w.write_record([x.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
