//! Per-iteration flop and memory-traffic accounting for loop kernels.
//!
//! A kernel is described by its flop count per outer-loop iteration and a
//! list of byte streams. Each stream contributes to main-memory traffic
//! unless it is marked `cached`; store streams with `write_allocate` also
//! contribute their bytes to the load side. Intensities are kept as exact
//! rationals and only rounded for display.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use toml::{Table, Value};

use crate::config;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Load,
    Store,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Load => "load",
            Direction::Store => "store",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "load" => Ok(Direction::Load),
            "store" => Ok(Direction::Store),
            other => Err(Error::validation(
                "direction",
                format!("expected `load` or `store`, found `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficStream {
    pub label: String,
    pub direction: Direction,
    pub elements_per_iter: u64,
    pub element_bytes: u64,
    /// Only meaningful for stores.
    pub write_allocate: bool,
    /// Served from cache; contributes no memory traffic.
    pub cached: bool,
}

impl TrafficStream {
    pub fn load(label: impl Into<String>, elements: u64, element_bytes: u64) -> Self {
        TrafficStream {
            label: label.into(),
            direction: Direction::Load,
            elements_per_iter: elements,
            element_bytes,
            write_allocate: false,
            cached: false,
        }
    }

    pub fn store(label: impl Into<String>, elements: u64, element_bytes: u64) -> Self {
        TrafficStream {
            direction: Direction::Store,
            ..TrafficStream::load(label, elements, element_bytes)
        }
    }

    pub fn with_write_allocate(mut self) -> Self {
        self.write_allocate = true;
        self
    }

    pub fn with_cached(mut self) -> Self {
        self.cached = true;
        self
    }

    pub fn bytes_per_iter(&self) -> u64 {
        self.elements_per_iter * self.element_bytes
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.element_bytes, 1 | 2 | 4 | 8) {
            return Err(Error::validation(
                "element_bytes",
                format!(
                    "stream `{}`: {} not in {{1,2,4,8}}",
                    self.label, self.element_bytes
                ),
            ));
        }
        if self.write_allocate && self.direction == Direction::Load {
            return Err(Error::validation(
                "write_allocate",
                format!(
                    "stream `{}`: write_allocate set on a load stream",
                    self.label
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    #[default]
    Single,
    Multi,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Single => "single",
            Variant::Multi => "multi",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Variant::Single),
            "multi" => Ok(Variant::Multi),
            other => Err(Error::validation(
                "variant",
                format!("expected `single` or `multi`, found `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub name: String,
    /// Flops per iteration as counted by hardware counters (post-compiler).
    pub flops_per_iter: u64,
    pub streams_single: Vec<TrafficStream>,
    /// `None` means the multi-threaded traffic equals the single-threaded one.
    pub streams_multi: Option<Vec<TrafficStream>>,
    /// Externally reported single-thread intensity, two decimals.
    pub reference_intensity: Option<f64>,
    pub reference_intensity_multi: Option<f64>,
}

const SPEC_KEYS: &[&str] = &[
    "name",
    "flops_per_iter",
    "streams_single",
    "streams_multi",
    "reference_intensity",
    "reference_intensity_multi",
];

const STREAM_KEYS: &[&str] = &[
    "label",
    "direction",
    "elements_per_iter",
    "element_bytes",
    "write_allocate",
    "cached",
];

fn parse_streams(table: &Table, key: &str) -> Result<Option<Vec<TrafficStream>>> {
    let Some(value) = table.get(key) else {
        return Ok(None);
    };
    let Value::Array(items) = value else {
        return Err(Error::validation(key, "expected an array of stream tables"));
    };
    let mut streams = Vec::with_capacity(items.len());
    for item in items {
        let Value::Table(t) = item else {
            return Err(Error::validation(key, "expected an array of stream tables"));
        };
        config::reject_unknown(t, STREAM_KEYS, "stream block")?;
        let stream = TrafficStream {
            label: config::get_str(t, "label")?,
            direction: config::get_str(t, "direction")?.parse()?,
            elements_per_iter: config::get_u64(t, "elements_per_iter")?,
            element_bytes: config::get_u64(t, "element_bytes")?,
            write_allocate: config::get_bool_or(t, "write_allocate", false)?,
            cached: config::get_bool_or(t, "cached", false)?,
        };
        stream.validate()?;
        streams.push(stream);
    }
    Ok(Some(streams))
}

impl KernelSpec {
    pub fn new(name: impl Into<String>, flops_per_iter: u64, streams: Vec<TrafficStream>) -> Self {
        KernelSpec {
            name: name.into(),
            flops_per_iter,
            streams_single: streams,
            streams_multi: None,
            reference_intensity: None,
            reference_intensity_multi: None,
        }
    }

    pub fn from_config(source: &str) -> Result<Self> {
        let table = config::parse_table(source, "kernel")?;
        config::reject_unknown(&table, SPEC_KEYS, "kernel description")?;
        let spec = KernelSpec {
            name: config::get_str(&table, "name")?,
            flops_per_iter: config::get_u64(&table, "flops_per_iter")?,
            streams_single: parse_streams(&table, "streams_single")?.unwrap_or_default(),
            streams_multi: parse_streams(&table, "streams_multi")?,
            reference_intensity: config::get_opt_f64(&table, "reference_intensity")?,
            reference_intensity_multi: config::get_opt_f64(&table, "reference_intensity_multi")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        for s in self
            .streams_single
            .iter()
            .chain(self.streams_multi.iter().flatten())
        {
            s.validate()?;
        }
        for (key, v) in [
            ("reference_intensity", self.reference_intensity),
            ("reference_intensity_multi", self.reference_intensity_multi),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::validation(key, "must be a finite value >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn has_multi(&self) -> bool {
        self.streams_multi.is_some()
    }

    /// Streams for `variant`; multi falls back to single when not given.
    pub fn streams(&self, variant: Variant) -> &[TrafficStream] {
        match variant {
            Variant::Single => &self.streams_single,
            Variant::Multi => self
                .streams_multi
                .as_deref()
                .unwrap_or(&self.streams_single),
        }
    }

    pub fn reference(&self, variant: Variant) -> Option<f64> {
        match variant {
            Variant::Single => self.reference_intensity,
            Variant::Multi if self.has_multi() => self.reference_intensity_multi,
            Variant::Multi => self.reference_intensity,
        }
    }
}

/// Memory traffic per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Volumes {
    pub load_bytes: u64,
    pub store_bytes: u64,
}

impl Volumes {
    pub fn total(&self) -> u64 {
        self.load_bytes + self.store_bytes
    }
}

/// Sums the non-cached streams of one variant. Write-allocated stores count
/// on both sides.
pub fn traffic_volumes(kernel: &KernelSpec, variant: Variant) -> Volumes {
    volumes_of(kernel.streams(variant))
}

pub fn volumes_of(streams: &[TrafficStream]) -> Volumes {
    let mut v = Volumes::default();
    for s in streams.iter().filter(|s| !s.cached) {
        let bytes = s.bytes_per_iter();
        match s.direction {
            Direction::Load => v.load_bytes += bytes,
            Direction::Store => {
                v.store_bytes += bytes;
                if s.write_allocate {
                    v.load_bytes += bytes;
                }
            }
        }
    }
    v
}

/// Computational intensity `flops / (load + store)` in flop per byte.
pub fn intensity(flops: u64, load_bytes: u64, store_bytes: u64) -> Result<Ratio<u64>> {
    let bytes = load_bytes + store_bytes;
    if bytes == 0 {
        return Err(Error::Domain(
            "pure compute kernel; intensity undefined".to_string(),
        ));
    }
    Ok(Ratio::new(flops, bytes))
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Rounds a non-negative rational to the nearest hundredth (half away from
/// zero), returned in hundredths.
pub fn round_hundredths(r: Ratio<u64>) -> u64 {
    let scaled = r * Ratio::from_integer(100u64);
    let floor = scaled.to_integer();
    if scaled - Ratio::from_integer(floor) >= Ratio::new(1, 2) {
        floor + 1
    } else {
        floor
    }
}

/// Hundredths of a two-decimal reference value.
fn reference_hundredths(v: f64) -> u64 {
    (v * 100.0).round() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityResult {
    pub kernel: String,
    pub variant: Variant,
    pub flops_per_iter: u64,
    pub v_load_bytes: u64,
    pub v_store_bytes: u64,
    pub intensity: Ratio<u64>,
    pub reference_value: Option<f64>,
    /// Reference present and off by more than 0.01 after rounding to two
    /// decimals.
    pub mismatch: bool,
}

impl IntensityResult {
    pub fn intensity_fpb(&self) -> f64 {
        ratio_to_f64(self.intensity)
    }

    pub fn rounded(&self) -> f64 {
        round_hundredths(self.intensity) as f64 / 100.0
    }
}

pub fn kernel_intensity(kernel: &KernelSpec, variant: Variant) -> Result<IntensityResult> {
    let v = traffic_volumes(kernel, variant);
    let i = intensity(kernel.flops_per_iter, v.load_bytes, v.store_bytes)?;
    let reference_value = kernel.reference(variant);
    let mismatch = reference_value
        .map(|r| round_hundredths(i).abs_diff(reference_hundredths(r)) > 1)
        .unwrap_or(false);
    Ok(IntensityResult {
        kernel: kernel.name.clone(),
        variant,
        flops_per_iter: kernel.flops_per_iter,
        v_load_bytes: v.load_bytes,
        v_store_bytes: v.store_bytes,
        intensity: i,
        reference_value,
        mismatch,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelTable {
    pub rows: Vec<IntensityResult>,
    /// Skipped kernels and variant fallbacks, in input order.
    pub notices: Vec<String>,
}

impl KernelTable {
    pub fn mismatches(&self) -> usize {
        self.rows.iter().filter(|r| r.mismatch).count()
    }
}

pub fn kernel_table(kernels: &[KernelSpec], variant: Variant) -> KernelTable {
    let mut table = KernelTable::default();
    for k in kernels {
        if variant == Variant::Multi && !k.has_multi() {
            table.notices.push(format!(
                "{}: no multi-threaded traffic model, using single-threaded streams",
                k.name
            ));
        }
        if k.streams(variant).is_empty() {
            table
                .notices
                .push(format!("{}: no {variant} streams, skipped", k.name));
            continue;
        }
        match kernel_intensity(k, variant) {
            Ok(row) => table.rows.push(row),
            Err(e) => table.notices.push(format!("{}: {e}, skipped", k.name)),
        }
    }
    table
}

/// Loads every `*.kernel` file of a directory, ordered by file name.
pub fn load_kernel_dir(dir: impl AsRef<Path>) -> Result<Vec<KernelSpec>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "kernel"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            KernelSpec::from_file(p).map_err(|e| match e {
                Error::Syntax { line, message } => Error::Syntax {
                    line,
                    message: format!("{}: {message}", p.display()),
                },
                Error::Validation { field, message } => Error::Validation {
                    field,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })
        })
        .collect()
}
