#![no_main]

use ivstat::iaa::build_agreement;
use ivstat::plot::{plot_iaa_svg, plot_intervals_svg, read_intervals, PlotSpec, PlotStyle};
use ivstat::ScaleSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(intervals) = read_intervals(data) else { return };
    if intervals.is_empty() {
        return;
    }
    let scale = ScaleSpec::normalized();
    let clamped: Vec<_> = intervals
        .iter()
        .map(|iv| ivstat::Interval::new(scale.clamp(iv.lo), scale.clamp(iv.hi)).unwrap())
        .collect();
    plot_intervals_svg(&clamped, &scale, &PlotSpec::new(PlotStyle::IntervalStack)).unwrap();
    let af = build_agreement(&intervals).unwrap();
    plot_iaa_svg(&af, &scale, &PlotSpec::new(PlotStyle::Iaa)).unwrap();
});
