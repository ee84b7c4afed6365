//! Power models, energy to solution, energy-delay product and z-plots.
//!
//! Work is counted in elements solved (`z`): mesh elements times
//! iterations. Performance is `z/s`, normalized energy `J/z`. For a fixed
//! problem size the per-work EDP `J/z * s/z` is proportional to the raw
//! `J * s`, so every line through the origin of a z-plot is a locus of
//! constant EDP.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::roofline::csv_field;
use crate::svg::{self, Axis, Plot};

/// Regressor of a linear power fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regressor {
    /// Core clock in GHz; the intercept is the zero-frequency baseline.
    #[default]
    Frequency,
    /// Active core count; the intercept is the zero-core baseline.
    Cores,
}

impl Regressor {
    pub fn as_str(self) -> &'static str {
        match self {
            Regressor::Frequency => "freq",
            Regressor::Cores => "cores",
        }
    }
}

/// `W = W0 + Wd * x`, fitted by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    pub regressor: Regressor,
    pub w0_baseline_w: f64,
    /// W/GHz for a frequency fit, W/core for a core-count fit.
    pub wd_dynamic_w_per_ghz: f64,
    pub fit_residual_rms_w: f64,
    pub n_points: usize,
}

impl PowerModel {
    pub fn power_at(&self, x: f64) -> f64 {
        self.w0_baseline_w + self.wd_dynamic_w_per_ghz * x
    }
}

/// Ordinary least squares on centered data. Returns `(intercept, slope,
/// residual rms)`.
fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Contract(format!(
            "degenerate fit: need at least 2 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    let spread = points
        .iter()
        .any(|p| (p.0 - points[0].0).abs() > f64::EPSILON * p.0.abs().max(1.0));
    if !spread || sxx <= 0.0 {
        return Err(Error::Contract(
            "degenerate fit: fewer than 2 distinct regressor values".to_string(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok((intercept, slope, (sse / nf).sqrt()))
}

/// Fits total power against core frequency from `(freq_ghz, power_w)`.
pub fn fit_power_model(samples: &[(f64, f64)]) -> Result<PowerModel> {
    fit_power(samples, Regressor::Frequency)
}

/// Fits power against a chosen regressor from `(x, power_w)` pairs.
pub fn fit_power(samples: &[(f64, f64)], regressor: Regressor) -> Result<PowerModel> {
    if let Some(bad) = samples
        .iter()
        .find(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(Error::Domain(format!("non-finite sample {bad:?}")));
    }
    let (w0, wd, rms) = least_squares(samples)?;
    Ok(PowerModel {
        regressor,
        w0_baseline_w: w0,
        wd_dynamic_w_per_ghz: wd,
        fit_residual_rms_w: rms,
        n_points: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySample {
    pub kernel_or_app: String,
    pub cores: u32,
    pub freq_ghz: f64,
    pub runtime_s: f64,
    pub cpu_energy_j: f64,
    pub dram_energy_j: f64,
    /// Elements solved: elements × iterations.
    pub work_z: f64,
}

impl EnergySample {
    pub fn validate(&self) -> Result<()> {
        if !(self.runtime_s.is_finite() && self.runtime_s > 0.0) {
            return Err(Error::validation("runtime_s", "must be > 0"));
        }
        if !(self.cpu_energy_j >= 0.0 && self.dram_energy_j >= 0.0) {
            return Err(Error::validation("energy", "must be >= 0"));
        }
        if !(self.work_z.is_finite() && self.work_z > 0.0) {
            return Err(Error::validation("work_z", "must be > 0"));
        }
        Ok(())
    }

    pub fn total_energy_j(&self) -> f64 {
        self.cpu_energy_j + self.dram_energy_j
    }

    /// Average total power over the run.
    pub fn power_w(&self) -> f64 {
        self.total_energy_j() / self.runtime_s
    }

    /// Figure of merit in elements solved per second.
    pub fn performance_z_per_s(&self) -> f64 {
        self.work_z / self.runtime_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyToSolution {
    pub total_j: f64,
    pub per_work_j_per_z: f64,
}

pub fn energy_to_solution(sample: &EnergySample) -> EnergyToSolution {
    let total = sample.total_energy_j();
    EnergyToSolution {
        total_j: total,
        per_work_j_per_z: total / sample.work_z,
    }
}

/// Energy-delay product in J·s.
pub fn edp(energy_j: f64, runtime_s: f64) -> f64 {
    energy_j * runtime_s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    #[default]
    Freq,
    Cores,
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq" => Ok(GroupBy::Freq),
            "cores" => Ok(GroupBy::Cores),
            other => Err(Error::validation(
                "group_by",
                format!("expected `freq` or `cores`, found `{other}`"),
            )),
        }
    }
}

/// Which EDP a z-plot or search reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdpConvention {
    /// `J * s` of the whole run; only comparable at fixed work.
    #[default]
    Raw,
    /// `J/z * s/z`; comparable across problem sizes.
    PerWork,
}

impl EdpConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            EdpConvention::Raw => "raw J*s",
            EdpConvention::PerWork => "per-work J*s/z^2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZPoint {
    pub performance_z_per_s: f64,
    pub energy_j_per_z: f64,
    pub cores: u32,
    pub freq_ghz: f64,
    /// `energy_j_per_z / performance_z_per_s`.
    pub edp_js_per_z2: f64,
    pub edp_raw_js: f64,
}

impl ZPoint {
    pub fn from_sample(s: &EnergySample) -> Self {
        let perf = s.performance_z_per_s();
        let e = energy_to_solution(s);
        ZPoint {
            performance_z_per_s: perf,
            energy_j_per_z: e.per_work_j_per_z,
            cores: s.cores,
            freq_ghz: s.freq_ghz,
            edp_js_per_z2: e.per_work_j_per_z / perf,
            edp_raw_js: edp(e.total_j, s.runtime_s),
        }
    }

    pub fn edp(&self, convention: EdpConvention) -> f64 {
        match convention {
            EdpConvention::Raw => self.edp_raw_js,
            EdpConvention::PerWork => self.edp_js_per_z2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZPlotSeries {
    pub parameter_label: String,
    /// Ordered by cores, then frequency.
    pub points: Vec<ZPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZPlot {
    pub group_by: GroupBy,
    pub convention: EdpConvention,
    pub series: Vec<ZPlotSeries>,
}

fn uniform_work(samples: &[EnergySample]) -> bool {
    samples.windows(2).all(|w| w[0].work_z == w[1].work_z)
}

/// Frequency grouping key in MHz, so 2.4 and 2.4000000001 share a series.
fn freq_key(f: f64) -> i64 {
    (f * 1000.0).round() as i64
}

/// Groups samples into z-plot series. With the raw convention all samples
/// must share one work size; per-work data may mix sizes.
pub fn build_zplot(
    samples: &[EnergySample],
    group_by: GroupBy,
    convention: EdpConvention,
) -> Result<ZPlot> {
    for s in samples {
        s.validate()?;
    }
    if convention == EdpConvention::Raw && !uniform_work(samples) {
        return Err(Error::Contract(
            "samples mix different work_z; use the per-work convention".to_string(),
        ));
    }
    let mut groups: BTreeMap<i64, Vec<ZPoint>> = BTreeMap::new();
    for s in samples {
        let key = match group_by {
            GroupBy::Freq => freq_key(s.freq_ghz),
            GroupBy::Cores => i64::from(s.cores),
        };
        groups.entry(key).or_default().push(ZPoint::from_sample(s));
    }
    let series = groups
        .into_iter()
        .map(|(key, mut points)| {
            points.sort_by(|a, b| {
                a.cores
                    .cmp(&b.cores)
                    .then(a.freq_ghz.total_cmp(&b.freq_ghz))
            });
            let parameter_label = match group_by {
                GroupBy::Freq => format!("{} GHz", key as f64 / 1000.0),
                GroupBy::Cores => format!("{key} cores"),
            };
            ZPlotSeries {
                parameter_label,
                points,
            }
        })
        .collect();
    Ok(ZPlot {
        group_by,
        convention,
        series,
    })
}

impl ZPlot {
    /// CSV with columns `series,x_perf,y_energy_per_work,cores,freq_ghz,edp`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,x_perf,y_energy_per_work,cores,freq_ghz,edp\n");
        for s in &self.series {
            for p in &s.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    csv_field(&s.parameter_label),
                    p.performance_z_per_s,
                    p.energy_j_per_z,
                    p.cores,
                    p.freq_ghz,
                    p.edp(self.convention)
                );
            }
        }
        out
    }

    /// Linear-axis z-plot with dashed constant-EDP guide lines through the
    /// origin at the minimum EDP point and at 2x and 4x that value.
    pub fn to_svg(&self, title: &str) -> String {
        let all: Vec<&ZPoint> = self.series.iter().flat_map(|s| &s.points).collect();
        let x_max = all
            .iter()
            .map(|p| p.performance_z_per_s)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
            * 1.1;
        let y_max = all
            .iter()
            .map(|p| p.energy_j_per_z)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
            * 1.1;
        let mut plot = Plot::new(Axis::linear(0.0, x_max), Axis::linear(0.0, y_max))
            .title(title)
            .labels("performance [z/s]", "energy to solution [J/z]");
        // slope of a point is energy/perf = per-work EDP
        if let Some(min_slope) = all
            .iter()
            .map(|p| p.edp_js_per_z2)
            .min_by(|a, b| a.total_cmp(b))
        {
            for k in [1.0, 2.0, 4.0] {
                let slope = min_slope * k;
                let x_end = x_max.min(y_max / slope);
                plot.polyline(&[(0.0, 0.0), (x_end, slope * x_end)], "#999", true, 1.0);
            }
        }
        for (i, s) in self.series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .map(|p| (p.performance_z_per_s, p.energy_j_per_z))
                .collect();
            plot.polyline(&pts, svg::color(i), false, 1.5);
            for p in &s.points {
                let label = format!(
                    "{}: {} cores @ {} GHz, EDP {:.4e}",
                    s.parameter_label,
                    p.cores,
                    p.freq_ghz,
                    p.edp(self.convention)
                );
                plot.circle(
                    p.performance_z_per_s,
                    p.energy_j_per_z,
                    svg::color(i),
                    true,
                    &label,
                );
            }
            if let Some(last) = s.points.last() {
                plot.text(
                    last.performance_z_per_s,
                    last.energy_j_per_z,
                    &s.parameter_label,
                    svg::color(i),
                );
            }
        }
        plot.render()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    MinEdp,
    MinEnergy,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::MinEdp => "min_edp",
            Objective::MinEnergy => "min_energy",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_edp" | "min-edp" | "edp" => Ok(Objective::MinEdp),
            "min_energy" | "min-energy" | "energy" => Ok(Objective::MinEnergy),
            other => Err(Error::validation(
                "objective",
                format!("expected `min_edp` or `min_energy`, found `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub cores: u32,
    pub freq_ghz: f64,
    /// EDP in J·s or energy in J, depending on the objective.
    pub value: f64,
    pub energy_j: f64,
    pub runtime_s: f64,
}

/// Exhaustive scan for the best sample. Ties go to lower energy, then lower
/// frequency, then fewer cores.
pub fn optimal_operating_point(
    samples: &[EnergySample],
    objective: Objective,
) -> Result<OperatingPoint> {
    if samples.is_empty() {
        return Err(Error::Contract("no samples to search".to_string()));
    }
    if !uniform_work(samples) {
        return Err(Error::Contract(
            "samples mix different work_z; operating points are only comparable at fixed work"
                .to_string(),
        ));
    }
    for s in samples {
        s.validate()?;
    }
    let candidates = samples.iter().map(|s| {
        let energy = s.total_energy_j();
        let value = match objective {
            Objective::MinEdp => edp(energy, s.runtime_s),
            Objective::MinEnergy => energy,
        };
        OperatingPoint {
            cores: s.cores,
            freq_ghz: s.freq_ghz,
            value,
            energy_j: energy,
            runtime_s: s.runtime_s,
        }
    });
    let best = candidates.min_by(compare_points).expect("non-empty");
    Ok(best)
}

fn compare_points(a: &OperatingPoint, b: &OperatingPoint) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.energy_j.total_cmp(&b.energy_j))
        .then(a.freq_ghz.total_cmp(&b.freq_ghz))
        .then(a.cores.cmp(&b.cores))
}
