//! SVG views of the aggregate table.

use std::path::Path;

use anyhow::{anyhow, Result};
use blindsr::pipeline::{AggregateRow, MeanSe};
use plotters::prelude::*;

const SERIES: [(&str, RGBColor); 4] = [
    ("NMSE theta", RGBColor(31, 119, 180)),
    ("NMSE alpha", RGBColor(214, 39, 40)),
    ("NMSE phi", RGBColor(44, 160, 44)),
    ("NMSE h", RGBColor(148, 103, 189)),
];

fn finite_points(rows: &[AggregateRow], pick: impl Fn(&AggregateRow) -> &MeanSe) -> Vec<(f64, f64)> {
    rows.iter()
        .map(|r| (r.sweep_value, pick(r).mean))
        .filter(|(x, y)| x.is_finite() && y.is_finite() && *y > 0.0)
        .collect()
}

fn span(xs: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
    if !lo.is_finite() {
        return None;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    Some((lo - pad, hi + pad))
}

/// Mean NMSE curves against SNR on a log scale.
pub fn nmse_vs_snr(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let pickers: [fn(&AggregateRow) -> &MeanSe; 4] =
        [|r| &r.nmse_theta, |r| &r.nmse_alpha, |r| &r.nmse_phi, |r| &r.nmse_h];
    let curves: Vec<Vec<(f64, f64)>> = pickers.iter().map(|p| finite_points(rows, p)).collect();
    let all = || curves.iter().flatten();
    let (x0, x1) = span(all().map(|p| p.0)).ok_or_else(|| anyhow!("no finite NMSE values to plot"))?;
    let lo = all().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = all().map(|p| p.1).fold(0.0, f64::max);

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Mean NMSE vs SNR", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (lo / 2.0..hi * 2.0).log_scale())?;
    chart.configure_mesh().x_desc("SNR (dB)").y_desc("NMSE").draw()?;
    for ((label, color), pts) in SERIES.iter().zip(&curves) {
        let color = *color;
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
            .label(*label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))?;
    }
    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw()?;
    root.present()?;
    Ok(())
}

/// Mean detection rate against antenna count, with one-SE bars.
pub fn dr_vs_antennas(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.sweep_value, r.dr.mean, r.dr.se)).collect();
    let (x0, x1) = span(pts.iter().map(|p| p.0)).ok_or_else(|| anyhow!("no points to plot"))?;
    let color = SERIES[0].1;

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Detection rate vs antennas", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, 0.0..1.05)?;
    chart.configure_mesh().x_desc("N").y_desc("DR").draw()?;
    chart.draw_series(LineSeries::new(pts.iter().map(|p| (p.0, p.1)), color.stroke_width(2)))?;
    chart.draw_series(pts.iter().map(|&(x, y, se)| {
        ErrorBar::new_vertical(x, (y - se).max(0.0), y, (y + se).min(1.05), color.filled(), 8)
    }))?;
    root.present()?;
    Ok(())
}
