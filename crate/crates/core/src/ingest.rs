//! Measurement ingestion and model validation.
//!
//! Measurements come in a normalized CSV schema, one row per measured
//! configuration of one instrumented region:
//!
//! ```text
//! region,kernel,cores,freq_mhz,uncore_mhz,runtime_s,flops,load_bytes,store_bytes,cpu_energy_j,dram_energy_j,work_z,instructions
//! ```
//!
//! `uncore_mhz` and `instructions` are optional columns and may also be
//! left empty per row. Counter exports from other tools are expected to be
//! converted to this schema beforehand.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write;

use crate::energy::EnergySample;
use crate::error::{Error, Result};
use crate::kernel_model::{self, KernelSpec, Variant};
use crate::machine_model::{CeilingKind, MachineModel};
use crate::roofline::csv_field;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub region: String,
    pub kernel: String,
    pub cores: u32,
    pub freq_mhz: f64,
    pub uncore_mhz: Option<f64>,
    pub runtime_s: f64,
    pub flops: u64,
    pub load_bytes: u64,
    pub store_bytes: u64,
    pub cpu_energy_j: f64,
    pub dram_energy_j: f64,
    pub work_z: u64,
    /// Carried through for instructions-per-work reporting only.
    pub instructions: Option<u64>,
}

pub const COLUMNS: [&str; 13] = [
    "region",
    "kernel",
    "cores",
    "freq_mhz",
    "uncore_mhz",
    "runtime_s",
    "flops",
    "load_bytes",
    "store_bytes",
    "cpu_energy_j",
    "dram_energy_j",
    "work_z",
    "instructions",
];

const OPTIONAL: [&str; 2] = ["uncore_mhz", "instructions"];

// Largest integer an f64 represents exactly.
const MAX_EXACT: f64 = 9_007_199_254_740_992.0;

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !f.is_finite() || f < 0.0 {
        return Err(format!("`{s}` must be a non-negative count"));
    }
    if f.fract() != 0.0 || f > MAX_EXACT {
        return Err(format!("`{s}` is not an exact integer count"));
    }
    Ok(f as u64)
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

struct RowReader<'a> {
    record: &'a csv::StringRecord,
    index: &'a HashMap<&'static str, usize>,
    row: usize,
}

impl RowReader<'_> {
    fn raw(&self, col: &'static str) -> Option<&str> {
        self.index
            .get(col)
            .and_then(|&i| self.record.get(i))
            .map(str::trim)
    }

    fn cell_error(&self, col: &str, message: String) -> Error {
        Error::Cell {
            row: self.row,
            column: col.to_string(),
            message,
        }
    }

    fn text(&self, col: &'static str) -> Result<String> {
        match self.raw(col) {
            Some(s) if !s.is_empty() => Ok(s.to_string()),
            _ => Err(self.cell_error(col, "empty value".into())),
        }
    }

    fn count(&self, col: &'static str) -> Result<u64> {
        let s = self.raw(col).unwrap_or("");
        parse_count(s).map_err(|m| self.cell_error(col, m))
    }

    fn real(&self, col: &'static str) -> Result<f64> {
        let s = self.raw(col).unwrap_or("");
        parse_real(s).map_err(|m| self.cell_error(col, m))
    }

    fn opt_count(&self, col: &'static str) -> Result<Option<u64>> {
        match self.raw(col) {
            None | Some("") => Ok(None),
            Some(s) => parse_count(s)
                .map(Some)
                .map_err(|m| self.cell_error(col, m)),
        }
    }

    fn opt_real(&self, col: &'static str) -> Result<Option<f64>> {
        match self.raw(col) {
            None | Some("") => Ok(None),
            Some(s) => parse_real(s).map(Some).map_err(|m| self.cell_error(col, m)),
        }
    }
}

/// Parses the normalized measurement CSV. Rows are numbered from 1 for the
/// first data row.
pub fn parse_measurements(source: &str) -> Result<Vec<MeasurementRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(source.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Cell {
            row: 0,
            column: "header".into(),
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::MissingColumn {
            column: COLUMNS[0].to_string(),
        });
    }
    let mut index = HashMap::new();
    for col in COLUMNS {
        match headers.iter().position(|h| h == col) {
            Some(i) => {
                index.insert(col, i);
            }
            None if OPTIONAL.contains(&col) => {}
            None => {
                return Err(Error::MissingColumn {
                    column: col.to_string(),
                })
            }
        }
    }

    let mut out = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| Error::Cell {
            row,
            column: "*".into(),
            message: e.to_string(),
        })?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let r = RowReader {
            record: &record,
            index: &index,
            row,
        };
        let cores = r.count("cores")?;
        let rec = MeasurementRecord {
            region: r.text("region")?,
            kernel: r.text("kernel")?,
            cores: u32::try_from(cores)
                .map_err(|_| r.cell_error("cores", format!("{cores} too large")))?,
            freq_mhz: r.real("freq_mhz")?,
            uncore_mhz: r.opt_real("uncore_mhz")?,
            runtime_s: r.real("runtime_s")?,
            flops: r.count("flops")?,
            load_bytes: r.count("load_bytes")?,
            store_bytes: r.count("store_bytes")?,
            cpu_energy_j: r.real("cpu_energy_j")?,
            dram_energy_j: r.real("dram_energy_j")?,
            work_z: r.count("work_z")?,
            instructions: r.opt_count("instructions")?,
        };
        check_record(&rec).map_err(|(col, msg)| r.cell_error(col, msg))?;
        out.push(rec);
    }
    Ok(out)
}

fn check_record(r: &MeasurementRecord) -> std::result::Result<(), (&'static str, String)> {
    if r.runtime_s <= 0.0 {
        return Err(("runtime_s", format!("must be > 0, got {}", r.runtime_s)));
    }
    if r.freq_mhz <= 0.0 {
        return Err(("freq_mhz", format!("must be > 0, got {}", r.freq_mhz)));
    }
    if r.uncore_mhz.is_some_and(|u| u <= 0.0) {
        return Err(("uncore_mhz", "must be > 0".into()));
    }
    if r.cores == 0 {
        return Err(("cores", "must be >= 1".into()));
    }
    if r.cpu_energy_j < 0.0 {
        return Err(("cpu_energy_j", "must be >= 0".into()));
    }
    if r.dram_energy_j < 0.0 {
        return Err(("dram_energy_j", "must be >= 0".into()));
    }
    if r.work_z == 0 {
        return Err(("work_z", "must be > 0".into()));
    }
    Ok(())
}

/// Writes records in the same schema `parse_measurements` reads, with
/// every column present.
pub fn write_measurements(records: &[MeasurementRecord]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.region),
            csv_field(&r.kernel),
            r.cores,
            r.freq_mhz,
            opt_f(r.uncore_mhz),
            r.runtime_s,
            r.flops,
            r.load_bytes,
            r.store_bytes,
            r.cpu_energy_j,
            r.dram_energy_j,
            r.work_z,
            opt_u(r.instructions),
        );
    }
    out
}

impl MeasurementRecord {
    pub fn traffic_bytes(&self) -> u64 {
        self.load_bytes + self.store_bytes
    }

    /// Memory bandwidth in GB/s.
    pub fn bandwidth_gbs(&self) -> f64 {
        self.traffic_bytes() as f64 / self.runtime_s / 1e9
    }

    pub fn gflops(&self) -> f64 {
        self.flops as f64 / self.runtime_s / 1e9
    }

    pub fn freq_ghz(&self) -> f64 {
        self.freq_mhz / 1000.0
    }
}

/// Counter-based intensity `flops / (load + store bytes)`.
pub fn measured_intensity(r: &MeasurementRecord) -> Result<f64> {
    let bytes = r.traffic_bytes();
    if bytes == 0 {
        return Err(Error::Domain(format!(
            "{}/{}: no memory traffic recorded; intensity undefined",
            r.region, r.kernel
        )));
    }
    Ok(r.flops as f64 / bytes as f64)
}

pub fn to_energy_samples(records: &[MeasurementRecord]) -> Vec<EnergySample> {
    records
        .iter()
        .map(|r| EnergySample {
            kernel_or_app: r.kernel.clone(),
            cores: r.cores,
            freq_ghz: r.freq_ghz(),
            runtime_s: r.runtime_s,
            cpu_energy_j: r.cpu_energy_j,
            dram_energy_j: r.dram_energy_j,
            work_z: r.work_z as f64,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
    /// Reported without a verdict (multi-threaded comparisons).
    Unrated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Warn => "warn",
            Verdict::Fail => "fail",
            Verdict::Unrated => "unrated",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub pass: f64,
    pub warn: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            pass: 0.15,
            warn: 0.30,
        }
    }
}

impl Thresholds {
    pub fn new(pass: f64, warn: f64) -> Result<Self> {
        if !(pass >= 0.0 && warn >= pass && warn.is_finite()) {
            return Err(Error::validation(
                "thresholds",
                format!("need 0 <= pass <= warn, got {pass},{warn}"),
            ));
        }
        Ok(Thresholds { pass, warn })
    }

    pub fn verdict(&self, rel_error: f64) -> Verdict {
        if rel_error <= self.pass {
            Verdict::Pass
        } else if rel_error <= self.warn {
            Verdict::Warn
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValidationOptions {
    pub thresholds: Thresholds,
    pub ceiling: CeilingKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub region: String,
    pub kernel: String,
    pub cores: u32,
    pub variant: Variant,
    pub measured_intensity: Option<f64>,
    pub predicted_intensity: Option<f64>,
    pub rel_error: Option<f64>,
    pub measured_bw_gbs: f64,
    pub ceiling_bw_gbs: Option<f64>,
    pub bw_utilization: Option<f64>,
    pub above_roof: bool,
    pub verdict: Verdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

/// Compares each record with the analytic intensity of its kernel and with
/// the machine's bandwidth ceiling for the record's core count.
///
/// Single-core records are rated against the single-threaded model;
/// multi-core records are compared with the multi-threaded model but not
/// rated.
pub fn validate(
    records: &[MeasurementRecord],
    kernels: &[KernelSpec],
    machine: &MachineModel,
    opts: &ValidationOptions,
) -> ValidationReport {
    let rows = records
        .iter()
        .map(|r| validate_record(r, kernels, machine, opts))
        .collect();
    ValidationReport { rows }
}

fn validate_record(
    r: &MeasurementRecord,
    kernels: &[KernelSpec],
    machine: &MachineModel,
    opts: &ValidationOptions,
) -> ValidationRow {
    let variant = if r.cores > 1 {
        Variant::Multi
    } else {
        Variant::Single
    };
    let measured_bw = r.bandwidth_gbs();
    let mut notes: Vec<String> = Vec::new();

    let ceiling_bw = match machine.bandwidth_for_cores(opts.ceiling, r.cores) {
        Ok(bw) => Some(bw),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let utilization = ceiling_bw.map(|c| measured_bw / c);
    let above_roof = utilization.is_some_and(|u| u > 1.0);
    if above_roof {
        notes.push("above_roof".into());
    }

    let measured = match measured_intensity(r) {
        Ok(i) => Some(i),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };

    let predicted = match kernels.iter().find(|k| k.name == r.kernel) {
        None => {
            notes.push(format!("no kernel model named `{}`", r.kernel));
            None
        }
        Some(k) => match kernel_model::kernel_intensity(k, variant) {
            Ok(res) => Some(res.intensity_fpb()),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        },
    };

    let rel_error = match (measured, predicted) {
        (Some(m), Some(p)) if p > 0.0 => Some((m - p).abs() / p),
        (Some(_), Some(_)) => {
            notes.push("predicted intensity is zero".into());
            None
        }
        _ => None,
    };

    let verdict = match rel_error {
        None => Verdict::Warn,
        Some(_) if variant == Variant::Multi => {
            notes.push("multi-threaded comparison, not rated".into());
            Verdict::Unrated
        }
        Some(e) => opts.thresholds.verdict(e),
    };

    ValidationRow {
        region: r.region.clone(),
        kernel: r.kernel.clone(),
        cores: r.cores,
        variant,
        measured_intensity: measured,
        predicted_intensity: predicted,
        rel_error,
        measured_bw_gbs: measured_bw,
        ceiling_bw_gbs: ceiling_bw,
        bw_utilization: utilization,
        above_roof,
        verdict,
        note: notes.join("; "),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_fixed(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}"))
        .unwrap_or_else(|| "-".into())
}

impl ValidationReport {
    pub fn any_fail(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Fail)
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.rows.iter().filter(|r| r.verdict == v).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "region,kernel,cores,variant,measured_intensity,predicted_intensity,rel_error,\
             measured_bw_gbs,ceiling_bw_gbs,bw_utilization,verdict,note\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&r.region),
                csv_field(&r.kernel),
                r.cores,
                r.variant,
                opt(r.measured_intensity),
                opt(r.predicted_intensity),
                opt(r.rel_error),
                r.measured_bw_gbs,
                opt(r.ceiling_bw_gbs),
                opt(r.bw_utilization),
                r.verdict,
                csv_field(&r.note),
            );
        }
        out
    }

    /// Human-readable aligned table.
    pub fn to_table(&self) -> String {
        let header = [
            "region",
            "kernel",
            "cores",
            "I_meas",
            "I_pred",
            "rel_err",
            "bw_GB/s",
            "ceil_GB/s",
            "util",
            "verdict",
            "note",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.region.clone(),
                    r.kernel.clone(),
                    r.cores.to_string(),
                    opt_fixed(r.measured_intensity, 4),
                    opt_fixed(r.predicted_intensity, 4),
                    opt_fixed(r.rel_error, 3),
                    format!("{:.2}", r.measured_bw_gbs),
                    opt_fixed(r.ceiling_bw_gbs, 1),
                    opt_fixed(r.bw_utilization, 2),
                    r.verdict.to_string(),
                    r.note.clone(),
                ]
            })
            .collect();
        align(&header, &rows)
    }
}

/// Left-aligns columns separated by two spaces.
pub fn align(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &mut dyn Iterator<Item = &str>, out: &mut String| {
        let mut s = String::new();
        for (i, c) in cells.enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{c:<width$}", width = widths[i]);
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied(), &mut out);
    for row in rows {
        line(&mut row.iter().map(String::as_str), &mut out);
    }
    out
}
