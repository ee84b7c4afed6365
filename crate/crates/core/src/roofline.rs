//! Roofline predictions `P = min(P_peak, I * b_s)` and chart datasets.

use std::fmt;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::machine_model::{CeilingKind, MachineModel};
use crate::svg::{self, Axis, Plot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    Memory,
    Compute,
}

impl Bound {
    pub fn as_str(self) -> &'static str {
        match self {
            Bound::Memory => "memory-bound",
            Bound::Compute => "compute-bound",
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Operating configuration a prediction is made for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RooflineConfig {
    pub cores: u32,
    pub freq_ghz: f64,
    pub simd: bool,
    pub ceiling: CeilingKind,
}

impl RooflineConfig {
    /// One full ccNUMA domain at base clock, scalar peak, update ceiling.
    pub fn domain(m: &MachineModel) -> Self {
        RooflineConfig {
            cores: m.cores_per_domain,
            freq_ghz: m.base_freq_ghz,
            simd: false,
            ceiling: CeilingKind::Update,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RooflinePrediction {
    pub kernel: String,
    pub intensity_fpb: f64,
    pub ceiling: CeilingKind,
    pub ceiling_used_gbs: f64,
    pub peak_gflops: f64,
    pub predicted_gflops: f64,
    pub bound: Bound,
    pub ridge_fpb: f64,
}

/// Ceilings in effect for a configuration: `(peak Gflop/s, b_s GB/s)`.
pub fn ceilings(m: &MachineModel, cfg: &RooflineConfig) -> Result<(f64, f64)> {
    let peak = m.effective_peak(cfg.cores, cfg.freq_ghz, cfg.simd)?;
    let bw = m.bandwidth_for_cores(cfg.ceiling, cfg.cores)?;
    Ok((peak, bw))
}

pub fn predict_performance(
    intensity: f64,
    m: &MachineModel,
    cfg: &RooflineConfig,
) -> Result<RooflinePrediction> {
    predict("", intensity, m, cfg)
}

pub fn predict(
    kernel: &str,
    intensity: f64,
    m: &MachineModel,
    cfg: &RooflineConfig,
) -> Result<RooflinePrediction> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(Error::Domain(format!(
            "intensity must be a positive number, got {intensity}"
        )));
    }
    let (peak, bw) = ceilings(m, cfg)?;
    let ridge = peak / bw;
    let predicted = peak.min(intensity * bw);
    // exactly at the ridge counts as compute-bound
    let bound = if intensity < ridge {
        Bound::Memory
    } else {
        Bound::Compute
    };
    Ok(RooflinePrediction {
        kernel: kernel.to_string(),
        intensity_fpb: intensity,
        ceiling: cfg.ceiling,
        ceiling_used_gbs: bw,
        peak_gflops: peak,
        predicted_gflops: predicted,
        bound,
        ridge_fpb: ridge,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredPoint {
    pub kernel: String,
    pub intensity_fpb: f64,
    pub gflops: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Line,
    /// Analytic prediction.
    EmptyCircle,
    /// Measurement.
    FilledCircle,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::Line => "line",
            Marker::EmptyCircle => "empty_circle",
            Marker::FilledCircle => "filled_circle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartLine {
    pub series: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub series: String,
    pub x_fpb: f64,
    pub y_gflops: f64,
    pub marker: Marker,
    pub above_roof: bool,
}

/// Everything needed to draw a log-log Roofline chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDataset {
    pub title: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Bandwidth band (update, readonly) followed by the peak ceiling.
    pub lines: Vec<ChartLine>,
    pub points: Vec<ChartPoint>,
}

fn decade_floor(v: f64) -> f64 {
    10f64.powf(v.log10().floor())
}

fn decade_ceil(v: f64) -> f64 {
    10f64.powf(v.log10().ceil())
}

pub fn roofline_chart(
    m: &MachineModel,
    cfg: &RooflineConfig,
    predictions: &[RooflinePrediction],
    measured: &[MeasuredPoint],
) -> Result<ChartDataset> {
    let peak = m.effective_peak(cfg.cores, cfg.freq_ghz, cfg.simd)?;
    let band = [CeilingKind::Update, CeilingKind::Readonly];
    let bws: Vec<f64> = band
        .iter()
        .map(|&k| m.bandwidth_for_cores(k, cfg.cores))
        .collect::<Result<_>>()?;
    let model_bw = m.bandwidth_for_cores(cfg.ceiling, cfg.cores)?;

    let xs = predictions
        .iter()
        .map(|p| p.intensity_fpb)
        .chain(measured.iter().map(|p| p.intensity_fpb))
        .filter(|x| *x > 0.0);
    let (mut x_lo, mut x_hi) = (0.01f64, peak / bws[0] * 10.0);
    for x in xs {
        x_lo = x_lo.min(x / 2.0);
        x_hi = x_hi.max(x * 2.0);
    }
    let x_range = (decade_floor(x_lo), decade_ceil(x_hi));
    let mut y_lo = bws[0] * x_range.0;
    let mut y_hi = peak * 2.0;
    for y in predictions
        .iter()
        .map(|p| p.predicted_gflops)
        .chain(measured.iter().map(|p| p.gflops))
        .filter(|y| *y > 0.0)
    {
        y_lo = y_lo.min(y / 2.0);
        y_hi = y_hi.max(y * 2.0);
    }
    let y_range = (decade_floor(y_lo), decade_ceil(y_hi));

    let mut lines = Vec::with_capacity(3);
    for (kind, bw) in band.iter().zip(&bws) {
        lines.push(ChartLine {
            series: format!("bw_{kind} {bw} GB/s"),
            points: vec![(x_range.0, bw * x_range.0), (peak / bw, peak)],
        });
    }
    lines.push(ChartLine {
        series: format!(
            "peak_{} {peak} Gflop/s",
            if cfg.simd { "simd" } else { "scalar" }
        ),
        points: vec![(peak / bws[1], peak), (x_range.1, peak)],
    });

    let mut points: Vec<ChartPoint> = predictions
        .iter()
        .map(|p| ChartPoint {
            series: p.kernel.clone(),
            x_fpb: p.intensity_fpb,
            y_gflops: p.predicted_gflops,
            marker: Marker::EmptyCircle,
            above_roof: false,
        })
        .collect();
    points.extend(measured.iter().map(|p| ChartPoint {
        series: p.kernel.clone(),
        x_fpb: p.intensity_fpb,
        y_gflops: p.gflops,
        marker: Marker::FilledCircle,
        above_roof: p.gflops > peak.min(p.intensity_fpb * model_bw),
    }));

    Ok(ChartDataset {
        title: format!(
            "{} roofline, {} cores @ {} GHz",
            m.name, cfg.cores, cfg.freq_ghz
        ),
        x_range,
        y_range,
        lines,
        points,
    })
}

impl ChartDataset {
    /// CSV with columns `series,x_fpb,y_gflops,marker,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,x_fpb,y_gflops,marker,flag\n");
        for l in &self.lines {
            for (x, y) in &l.points {
                let _ = writeln!(
                    out,
                    "{},{x},{y},{},",
                    csv_field(&l.series),
                    Marker::Line.as_str()
                );
            }
        }
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&p.series),
                p.x_fpb,
                p.y_gflops,
                p.marker.as_str(),
                if p.above_roof { "above_roof" } else { "" }
            );
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let mut plot = Plot::new(
            Axis::log(self.x_range.0, self.x_range.1),
            Axis::log(self.y_range.0, self.y_range.1),
        )
        .title(&self.title)
        .labels("computational intensity [F/B]", "performance [Gflop/s]");
        for (i, l) in self.lines.iter().enumerate() {
            let is_peak = i + 1 == self.lines.len();
            plot.polyline(&l.points, "#333", !is_peak && i > 0, 2.0);
            if let Some(&(x, y)) = if is_peak {
                l.points.last()
            } else {
                l.points.first()
            } {
                let anchor = if is_peak { x / 20.0 } else { x * 1.5 };
                plot.text(anchor, if is_peak { y } else { y * 1.6 }, &l.series, "#333");
            }
        }
        let mut kernels: Vec<&str> = Vec::new();
        for p in &self.points {
            let idx = match kernels.iter().position(|k| *k == p.series) {
                Some(i) => i,
                None => {
                    kernels.push(&p.series);
                    kernels.len() - 1
                }
            };
            let label = format!(
                "{}: I={:.4} F/B, {:.2} Gflop/s{}",
                p.series,
                p.x_fpb,
                p.y_gflops,
                if p.above_roof { " (above roof)" } else { "" }
            );
            plot.circle(
                p.x_fpb,
                p.y_gflops,
                svg::color(idx),
                p.marker == Marker::FilledCircle,
                &label,
            );
        }
        plot.render()
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
