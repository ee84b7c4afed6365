use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use roofkit::energy::{self, EdpConvention, EnergySample, GroupBy, Objective, Regressor, ZPlot};
use roofkit::ingest::{self, align, MeasurementRecord, Thresholds, ValidationOptions};
use roofkit::kernel_model::{self, round_hundredths, KernelTable};
use roofkit::roofline::{self, MeasuredPoint, RooflineConfig, RooflinePrediction};
use roofkit::traffic_oracle::{self, AccessTrace, CacheSimConfig, Pattern, TrafficComparison};
use roofkit::{KernelSpec, MachineModel};

use crate::args::*;

/// Process exit status of a successful run.
pub enum Status {
    Ok,
    /// At least one validation row failed.
    Failed,
}

impl From<Status> for std::process::ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Ok => std::process::ExitCode::SUCCESS,
            Status::Failed => std::process::ExitCode::from(1),
        }
    }
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::Table(a) => table(a),
        Command::Predict(a) => predict(a),
        Command::Roofline(a) => roofline_cmd(a),
        Command::Validate(a) => validate(a),
        Command::Zplot(a) => zplot(a),
        Command::FitPower(a) => fit_power(a),
        Command::Optimal(a) => optimal(a),
        Command::Oracle(a) => oracle(a),
    }
}

/// Six significant digits without trailing zeros.
fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let digits = (5 - x.abs().log10().floor() as i32).clamp(0, 12) as usize;
    let s = format!("{x:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn emit(output: &OutputArgs, csv: String, table: String, svg: Option<String>) -> Result<()> {
    let text = match output.format {
        Format::Csv => csv,
        Format::Table => table,
    };
    match &output.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let is_svg = path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("svg"));
            let body = match (is_svg, svg) {
                (true, Some(svg)) => svg,
                (true, None) => bail!("this subcommand has no SVG rendering"),
                (false, _) => text,
            };
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
    }
}

fn load_machine(path: &Path) -> Result<MachineModel> {
    MachineModel::from_file(path).with_context(|| format!("loading machine {}", path.display()))
}

fn load_kernels(dir: &Path) -> Result<Vec<KernelSpec>> {
    kernel_model::load_kernel_dir(dir)
        .with_context(|| format!("loading kernel models from {}", dir.display()))
}

fn load_measurements(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ingest::parse_measurements(&text).with_context(|| format!("parsing {}", path.display()))
}

fn operating_config(m: &MachineModel, op: &OperatingArgs) -> RooflineConfig {
    let mut cfg = RooflineConfig::domain(m);
    if let Some(c) = op.cores {
        cfg.cores = c;
    }
    if let Some(f) = op.freq {
        cfg.freq_ghz = f;
    }
    cfg.simd = op.simd;
    cfg.ceiling = op.ceiling.into();
    cfg
}

fn hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

fn table(a: TableArgs) -> Result<Status> {
    let kernels = load_kernels(&a.kernels)?;
    let t: KernelTable = kernel_model::kernel_table(&kernels, a.variant.into());
    for n in &t.notices {
        eprintln!("notice: {n}");
    }
    let mut csv = String::from(
        "kernel,variant,flops_per_iter,v_load_bytes,v_store_bytes,intensity_fpb,intensity_2dp,reference,mismatch\n",
    );
    let mut rows = Vec::new();
    for r in &t.rows {
        let reference = r.reference_value.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.6},{},{},{}",
            r.kernel,
            r.variant,
            r.flops_per_iter,
            r.v_load_bytes,
            r.v_store_bytes,
            r.intensity_fpb(),
            hundredths(round_hundredths(r.intensity)),
            reference,
            r.mismatch
        );
        rows.push(vec![
            r.kernel.clone(),
            r.variant.to_string(),
            format!(
                "{}/({}+{})",
                r.flops_per_iter, r.v_load_bytes, r.v_store_bytes
            ),
            format!("{:.4}", r.intensity_fpb()),
            hundredths(round_hundredths(r.intensity)),
            if reference.is_empty() {
                "-".into()
            } else {
                reference
            },
            if r.mismatch {
                "MISMATCH".into()
            } else {
                String::new()
            },
        ]);
    }
    let mut text = align(
        &[
            "kernel",
            "variant",
            "N_F/(V_LD+V_ST)",
            "I [F/B]",
            "2dp",
            "reference",
            "",
        ],
        &rows,
    );
    let _ = writeln!(text, "{} reference mismatch(es)", t.mismatches());
    emit(&a.output, csv, text, None)?;
    Ok(Status::Ok)
}

const PREDICTION_HEADER: &str =
    "kernel,intensity_fpb,ceiling,ceiling_gbs,peak_gflops,predicted_gflops,bound,ridge_fpb\n";

fn prediction_csv(preds: &[RooflinePrediction]) -> String {
    let mut csv = String::from(PREDICTION_HEADER);
    for p in preds {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            p.kernel,
            p.intensity_fpb,
            p.ceiling,
            p.ceiling_used_gbs,
            p.peak_gflops,
            p.predicted_gflops,
            match p.bound {
                roofline::Bound::Memory => "memory",
                roofline::Bound::Compute => "compute",
            },
            p.ridge_fpb
        );
    }
    csv
}

fn kernel_predictions(
    kernels: &[KernelSpec],
    variant: roofkit::Variant,
    m: &MachineModel,
    cfg: &RooflineConfig,
) -> Result<Vec<RooflinePrediction>> {
    let table = kernel_model::kernel_table(kernels, variant);
    for n in &table.notices {
        eprintln!("notice: {n}");
    }
    table
        .rows
        .iter()
        .filter(|r| r.intensity_fpb() > 0.0)
        .map(|r| Ok(roofline::predict(&r.kernel, r.intensity_fpb(), m, cfg)?))
        .collect()
}

fn predict(a: PredictArgs) -> Result<Status> {
    let m = load_machine(&a.machine)?;
    let cfg = operating_config(&m, &a.op);
    let mut preds = Vec::new();
    for &i in &a.intensity {
        preds.push(roofline::predict("", i, &m, &cfg)?);
    }
    if let Some(dir) = &a.kernels {
        preds.extend(kernel_predictions(
            &load_kernels(dir)?,
            a.variant.into(),
            &m,
            &cfg,
        )?);
    }
    let mut text = String::new();
    for p in &preds {
        let who = if p.kernel.is_empty() {
            format!("I = {} F/B", sig(p.intensity_fpb))
        } else {
            format!("{} (I = {} F/B)", p.kernel, sig(p.intensity_fpb))
        };
        let _ = writeln!(
            text,
            "{who}: {} Gflop/s {} [P_peak {} Gflop/s, b_s {} GB/s ({}), ridge {} F/B]",
            sig(p.predicted_gflops),
            p.bound,
            sig(p.peak_gflops),
            sig(p.ceiling_used_gbs),
            p.ceiling,
            sig(p.ridge_fpb)
        );
    }
    emit(&a.output, prediction_csv(&preds), text, None)?;
    Ok(Status::Ok)
}

fn roofline_cmd(a: RooflineArgs) -> Result<Status> {
    let m = load_machine(&a.machine)?;
    let cfg = operating_config(&m, &a.op);
    let preds = match &a.kernels {
        Some(dir) => kernel_predictions(&load_kernels(dir)?, a.variant.into(), &m, &cfg)?,
        None => Vec::new(),
    };
    let mut measured = Vec::new();
    if let Some(path) = &a.measurements {
        for r in load_measurements(path)?
            .iter()
            .filter(|r| r.cores == cfg.cores)
        {
            match ingest::measured_intensity(r) {
                Ok(i) if i > 0.0 => measured.push(MeasuredPoint {
                    kernel: r.kernel.clone(),
                    intensity_fpb: i,
                    gflops: r.gflops(),
                }),
                _ => eprintln!(
                    "notice: {}/{}: no intensity, not plotted",
                    r.region, r.kernel
                ),
            }
        }
    }
    let chart = roofline::roofline_chart(&m, &cfg, &preds, &measured)?;
    let csv = chart.to_csv();
    let rows: Vec<Vec<String>> = chart
        .points
        .iter()
        .map(|p| {
            vec![
                p.series.clone(),
                sig(p.x_fpb),
                sig(p.y_gflops),
                p.marker.as_str().to_string(),
                if p.above_roof {
                    "above_roof".into()
                } else {
                    String::new()
                },
            ]
        })
        .collect();
    let mut text = String::new();
    for l in &chart.lines {
        let _ = writeln!(text, "ceiling {}", l.series);
    }
    text.push_str(&align(
        &["series", "I [F/B]", "Gflop/s", "marker", "flag"],
        &rows,
    ));
    emit(&a.output, csv, text, Some(chart.to_svg()))?;
    Ok(Status::Ok)
}

fn validate(a: ValidateArgs) -> Result<Status> {
    let m = load_machine(&a.machine)?;
    let kernels = load_kernels(&a.kernels)?;
    let thresholds = Thresholds::new(a.thresholds[0], a.thresholds[1])?;
    let opts = ValidationOptions {
        thresholds,
        ceiling: a.ceiling.into(),
    };
    // files are parsed concurrently; output keeps command-line order
    let parsed: Vec<Result<Vec<MeasurementRecord>>> = std::thread::scope(|s| {
        let handles: Vec<_> = a
            .measurements
            .iter()
            .map(|p| s.spawn(move || load_measurements(p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("measurement parser panicked"))
            .collect()
    });
    let mut records = Vec::new();
    for r in parsed {
        records.extend(r?);
    }
    let report = ingest::validate(&records, &kernels, &m, &opts);
    let mut text = report.to_table();
    let _ = writeln!(
        text,
        "{} pass, {} warn, {} fail, {} unrated",
        report.count(ingest::Verdict::Pass),
        report.count(ingest::Verdict::Warn),
        report.count(ingest::Verdict::Fail),
        report.count(ingest::Verdict::Unrated)
    );
    emit(&a.output, report.to_csv(), text, None)?;
    Ok(if report.any_fail() {
        Status::Failed
    } else {
        Status::Ok
    })
}

fn filtered_samples(f: &SampleFilter) -> Result<Vec<(MeasurementRecord, EnergySample)>> {
    let records: Vec<MeasurementRecord> = load_measurements(&f.measurements)?
        .into_iter()
        .filter(|r| f.kernel.as_ref().is_none_or(|k| &r.kernel == k))
        .filter(|r| f.region.as_ref().is_none_or(|g| &r.region == g))
        .collect();
    let samples = ingest::to_energy_samples(&records);
    Ok(records.into_iter().zip(samples).collect())
}

fn zplot(a: ZplotArgs) -> Result<Status> {
    let samples: Vec<EnergySample> = filtered_samples(&a.filter)?
        .into_iter()
        .map(|p| p.1)
        .collect();
    let convention = if a.per_work {
        EdpConvention::PerWork
    } else {
        EdpConvention::Raw
    };
    let group_by = match a.group_by {
        GroupByArg::Freq => GroupBy::Freq,
        GroupByArg::Cores => GroupBy::Cores,
    };
    let plot: ZPlot = energy::build_zplot(&samples, group_by, convention)?;
    let mut text = format!("EDP convention: {}\n", convention.as_str());
    let rows: Vec<Vec<String>> = plot
        .series
        .iter()
        .flat_map(|s| {
            s.points.iter().map(move |p| {
                vec![
                    s.parameter_label.clone(),
                    p.cores.to_string(),
                    sig(p.freq_ghz),
                    sig(p.performance_z_per_s),
                    sig(p.energy_j_per_z),
                    sig(p.edp(convention)),
                ]
            })
        })
        .collect();
    text.push_str(&align(
        &[
            "series",
            "cores",
            "GHz",
            "perf [z/s]",
            "energy [J/z]",
            "EDP",
        ],
        &rows,
    ));
    let title = match &a.filter.kernel {
        Some(k) => format!("z-plot: {k}"),
        None => "z-plot".to_string(),
    };
    emit(&a.output, plot.to_csv(), text, Some(plot.to_svg(&title)))?;
    Ok(Status::Ok)
}

fn fit_power(a: FitPowerArgs) -> Result<Status> {
    let regressor = match a.regressor {
        RegressorArg::Freq => Regressor::Frequency,
        RegressorArg::Cores => Regressor::Cores,
    };
    let points: Vec<(f64, f64)> = filtered_samples(&a.filter)?
        .into_iter()
        .filter(|(r, _)| a.cores.is_none_or(|c| r.cores == c))
        .filter(|(r, _)| a.freq.is_none_or(|f| (r.freq_ghz() - f).abs() < 5e-4))
        .map(|(_, s)| {
            let x = match regressor {
                Regressor::Frequency => s.freq_ghz,
                Regressor::Cores => f64::from(s.cores),
            };
            (x, s.power_w())
        })
        .collect();
    let model = energy::fit_power(&points, regressor)?;
    let csv = format!(
        "regressor,w0_baseline_w,wd_dynamic_w_per_unit,fit_residual_rms_w,n_points\n{},{},{},{},{}\n",
        regressor.as_str(),
        model.w0_baseline_w,
        model.wd_dynamic_w_per_ghz,
        model.fit_residual_rms_w,
        model.n_points
    );
    let unit = match regressor {
        Regressor::Frequency => "W/GHz",
        Regressor::Cores => "W/core",
    };
    let text = format!(
        "W = {} W + {} {unit} * {}\nbaseline (x = 0): {} W\nresidual rms: {} W over {} points\n",
        sig(model.w0_baseline_w),
        sig(model.wd_dynamic_w_per_ghz),
        regressor.as_str(),
        sig(model.w0_baseline_w),
        sig(model.fit_residual_rms_w),
        model.n_points
    );
    emit(&a.output, csv, text, None)?;
    Ok(Status::Ok)
}

fn optimal(a: OptimalArgs) -> Result<Status> {
    let samples: Vec<EnergySample> = filtered_samples(&a.filter)?
        .into_iter()
        .map(|p| p.1)
        .collect();
    let objective = match a.objective {
        ObjectiveArg::MinEdp => Objective::MinEdp,
        ObjectiveArg::MinEnergy => Objective::MinEnergy,
    };
    let p = energy::optimal_operating_point(&samples, objective)?;
    let csv = format!(
        "objective,cores,freq_ghz,value,energy_j,runtime_s\n{},{},{},{},{},{}\n",
        objective, p.cores, p.freq_ghz, p.value, p.energy_j, p.runtime_s
    );
    let unit = match objective {
        Objective::MinEdp => "J*s (raw EDP)",
        Objective::MinEnergy => "J",
    };
    let text = format!(
        "{objective}: {} cores @ {} GHz, {} {unit} (energy {} J, runtime {} s, {} samples scanned)\n",
        p.cores,
        sig(p.freq_ghz),
        sig(p.value),
        sig(p.energy_j),
        sig(p.runtime_s),
        samples.len()
    );
    emit(&a.output, csv, text, None)?;
    Ok(Status::Ok)
}

fn oracle(a: OracleArgs) -> Result<Status> {
    let cfg = CacheSimConfig {
        capacity_bytes: a.capacity,
        line_bytes: a.line,
        associativity: a.assoc,
        write_allocate: !a.no_write_allocate,
        ..CacheSimConfig::default()
    };
    let eb = u64::from(a.elem_bytes);
    // (trace, analytic volumes per iteration, iterations)
    let (trace, model, iters): (AccessTrace, Option<kernel_model::Volumes>, u64) =
        match (&a.trace, a.pattern) {
            (Some(path), _) => (read_trace(path)?, None, a.iters.unwrap_or(1)),
            (None, Some(p)) => {
                let pattern = match p {
                    PatternArg::Stream => Pattern::Stream,
                    PatternArg::Gather8 => Pattern::Gather8,
                    PatternArg::StreamStore => Pattern::StreamStore,
                };
                let (trace, iters) = if pattern == Pattern::Gather8 {
                    let table = traffic_oracle::hex_mesh_nodelist(a.mesh_edge);
                    let n = u64::from(a.mesh_edge).pow(3);
                    (
                        traffic_oracle::generate_trace(pattern, n, a.elem_bytes, Some(&table))?,
                        n,
                    )
                } else {
                    (
                        traffic_oracle::generate_trace(pattern, a.n_elems, a.elem_bytes, None)?,
                        a.n_elems,
                    )
                };
                let v = match pattern {
                    Pattern::Stream => (eb, 0),
                    Pattern::StreamStore if cfg.write_allocate => (eb, eb),
                    Pattern::StreamStore => (0, eb),
                    // 8 indices per element; each node's data loaded once
                    Pattern::Gather8 => (32 + eb, 0),
                };
                let v = kernel_model::Volumes {
                    load_bytes: v.0,
                    store_bytes: v.1,
                };
                (trace, Some(v), a.iters.unwrap_or(iters))
            }
            (None, None) => bail!("either --pattern or --trace is required"),
        };
    let analytic = match (a.analytic_load, a.analytic_store) {
        (None, None) => model,
        (l, s) => Some(kernel_model::Volumes {
            load_bytes: l.unwrap_or(0),
            store_bytes: s.unwrap_or(0),
        }),
    };
    let result = traffic_oracle::simulate_cache(&trace, &cfg)?;
    let cmp: Option<TrafficComparison> = match analytic {
        Some(v) => Some(traffic_oracle::compare_to_analytic(&result, v, iters)?),
        None => None,
    };

    let mut rows: Vec<(String, String)> = vec![
        ("events".into(), trace.len().to_string()),
        ("mem_load_bytes".into(), result.mem_load_bytes.to_string()),
        ("mem_store_bytes".into(), result.mem_store_bytes.to_string()),
        ("hits".into(), result.hits.to_string()),
        ("misses".into(), result.misses.to_string()),
        ("writebacks".into(), result.writebacks.to_string()),
        ("flushed".into(), result.flushed.to_string()),
        ("load_fills".into(), result.load_fills.to_string()),
        ("store_fills".into(), result.store_fills.to_string()),
        ("streamed_stores".into(), result.streamed_stores.to_string()),
    ];
    if let (Some(v), Some(c)) = (analytic, cmp) {
        let opt = |x: Option<f64>| x.map(|e| e.to_string()).unwrap_or_else(|| "n/a".into());
        rows.push((
            "analytic_load_bytes_per_iter".into(),
            v.load_bytes.to_string(),
        ));
        rows.push((
            "analytic_store_bytes_per_iter".into(),
            v.store_bytes.to_string(),
        ));
        rows.push(("iterations".into(), iters.to_string()));
        rows.push(("rel_err_load".into(), opt(c.rel_err_load)));
        rows.push(("rel_err_store".into(), opt(c.rel_err_store)));
    }
    let mut csv = String::from("metric,value\n");
    let mut text = String::new();
    for (k, v) in &rows {
        let _ = writeln!(csv, "{k},{v}");
        let _ = writeln!(text, "{k} = {v}");
    }
    emit(&a.output, csv, text, None)?;
    Ok(Status::Ok)
}

fn read_trace(path: &PathBuf) -> Result<AccessTrace> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    AccessTrace::parse(&text).with_context(|| format!("parsing {}", path.display()))
}
