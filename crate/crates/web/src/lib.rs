//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes and returns plain strings and numbers; errors come back
//! as a message string, so the same functions run natively under `cargo test`.

use std::fmt::Write as _;

use roofkit::energy::{self, EdpConvention, GroupBy, Objective};
use roofkit::ingest;
use roofkit::roofline::{self, RooflineConfig};
use roofkit::traffic_oracle::{self, CacheSimConfig, Pattern};
use roofkit::{samples, CeilingKind, MachineModel};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Description text of a bundled machine (`icl` or `spr`).
#[wasm_bindgen]
pub fn machine_preset(name: &str) -> Result<String, String> {
    match name {
        "icl" => Ok(samples::ICL_MACHINE.to_string()),
        "spr" => Ok(samples::SPR_MACHINE.to_string()),
        other => Err(format!("unknown machine `{other}`")),
    }
}

/// The bundled measurement CSV.
#[wasm_bindgen]
pub fn sample_measurements() -> String {
    samples::MEASUREMENTS_CSV.to_string()
}

fn parse_intensities(list: &str) -> Result<Vec<f64>, String> {
    list.split([',', ' ', '\n'])
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: `{}`", s.trim()))
        })
        .collect()
}

fn roofline_setup(
    machine: &str,
    cores: u32,
    freq_ghz: f64,
    simd: bool,
    ceiling: &str,
) -> Result<(MachineModel, RooflineConfig), String> {
    let m = MachineModel::from_config(machine).map_err(err)?;
    let cfg = RooflineConfig {
        cores,
        freq_ghz,
        simd,
        ceiling: ceiling.parse::<CeilingKind>().map_err(err)?,
    };
    Ok((m, cfg))
}

/// Roofline chart as SVG. `intensities` is a comma-separated list in F/B;
/// the bundled kernel models are always drawn.
#[wasm_bindgen]
pub fn roofline_svg(
    machine: &str,
    cores: u32,
    freq_ghz: f64,
    simd: bool,
    ceiling: &str,
    intensities: &str,
) -> Result<String, String> {
    let (m, cfg) = roofline_setup(machine, cores, freq_ghz, simd, ceiling)?;
    let mut preds = Vec::new();
    for k in samples::kernels().map_err(err)? {
        let r =
            roofkit::kernel_model::kernel_intensity(&k, roofkit::Variant::Single).map_err(err)?;
        preds.push(roofline::predict(&r.kernel, r.intensity_fpb(), &m, &cfg).map_err(err)?);
    }
    for (n, i) in parse_intensities(intensities)?.into_iter().enumerate() {
        preds.push(roofline::predict(&format!("I{}", n + 1), i, &m, &cfg).map_err(err)?);
    }
    let chart = roofline::roofline_chart(&m, &cfg, &preds, &[]).map_err(err)?;
    Ok(chart.to_svg())
}

/// One prediction line per intensity.
#[wasm_bindgen]
pub fn roofline_predict(
    machine: &str,
    cores: u32,
    freq_ghz: f64,
    simd: bool,
    ceiling: &str,
    intensities: &str,
) -> Result<String, String> {
    let (m, cfg) = roofline_setup(machine, cores, freq_ghz, simd, ceiling)?;
    let mut out = String::new();
    for i in parse_intensities(intensities)? {
        let p = roofline::predict("", i, &m, &cfg).map_err(err)?;
        let _ = writeln!(
            out,
            "I = {i} F/B: {:.2} Gflop/s, {} (peak {:.1} Gflop/s, {} GB/s, ridge {:.3} F/B)",
            p.predicted_gflops, p.bound, p.peak_gflops, p.ceiling_used_gbs, p.ridge_fpb
        );
    }
    Ok(out)
}

fn energy_samples(csv: &str, kernel: &str) -> Result<Vec<energy::EnergySample>, String> {
    let records: Vec<_> = ingest::parse_measurements(csv)
        .map_err(err)?
        .into_iter()
        .filter(|r| kernel.is_empty() || r.kernel == kernel)
        .collect();
    if records.is_empty() {
        return Err(format!("no measurements for kernel `{kernel}`"));
    }
    Ok(ingest::to_energy_samples(&records))
}

/// Z-plot of the measurements of one kernel (empty string: all), grouped by
/// `freq` or `cores`, with per-work EDP guide lines.
#[wasm_bindgen]
pub fn zplot_svg(csv: &str, kernel: &str, group_by: &str) -> Result<String, String> {
    let group_by = match group_by {
        "freq" => GroupBy::Freq,
        "cores" => GroupBy::Cores,
        other => return Err(format!("group by `freq` or `cores`, not `{other}`")),
    };
    let samples = energy_samples(csv, kernel)?;
    let plot = energy::build_zplot(&samples, group_by, EdpConvention::PerWork).map_err(err)?;
    let title = if kernel.is_empty() { "z-plot" } else { kernel };
    Ok(plot.to_svg(title))
}

/// Best measured operating point for `min_edp` or `min_energy`.
#[wasm_bindgen]
pub fn optimal_point(csv: &str, kernel: &str, objective: &str) -> Result<String, String> {
    let objective: Objective = objective.parse().map_err(err)?;
    let samples = energy_samples(csv, kernel)?;
    let p = energy::optimal_operating_point(&samples, objective).map_err(err)?;
    Ok(format!(
        "{objective}: {} cores @ {} GHz, energy {:.1} J, runtime {:.3} s",
        p.cores, p.freq_ghz, p.energy_j, p.runtime_s
    ))
}

/// Simulates a generated access pattern through an LRU cache. For `gather8`
/// `size` is the mesh edge, otherwise the number of 8-byte elements.
#[wasm_bindgen]
pub fn cache_oracle(
    pattern: &str,
    size: u32,
    capacity_kib: u32,
    associativity: u32,
    write_allocate: bool,
) -> Result<String, String> {
    let pattern: Pattern = pattern.parse().map_err(err)?;
    let cfg = CacheSimConfig {
        capacity_bytes: u64::from(capacity_kib) * 1024,
        associativity: u64::from(associativity),
        write_allocate,
        ..CacheSimConfig::default()
    };
    let trace = if pattern == Pattern::Gather8 {
        let table = traffic_oracle::hex_mesh_nodelist(size);
        traffic_oracle::generate_trace(pattern, u64::from(size).pow(3), 8, Some(&table))
    } else {
        traffic_oracle::generate_trace(pattern, u64::from(size), 8, None)
    }
    .map_err(err)?;
    let r = traffic_oracle::simulate_cache(&trace, &cfg).map_err(err)?;
    Ok(format!("events = {}\n{}", trace.len(), r.to_key_value()))
}
