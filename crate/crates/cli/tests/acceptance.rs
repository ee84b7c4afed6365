//! End-to-end acceptance checks. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; the process fails if any criterion does.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roofkit::energy::{self, EdpConvention, EnergySample, GroupBy, Objective, Regressor};
use roofkit::ingest::{self, MeasurementRecord, ValidationOptions, Verdict};
use roofkit::kernel_model::Volumes;
use roofkit::roofline::{self, Bound, RooflineConfig};
use roofkit::samples;
use roofkit::traffic_oracle::{self, AccessKind, AccessTrace, CacheSimConfig, Pattern};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Option<Duration>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(rel: &str) -> String {
    root().join("data").join(rel).to_string_lossy().into_owned()
}

fn roofkit(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_roofkit"))
        .args(args)
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`roofkit {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn csv_rows(bytes: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8_lossy(bytes)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn sig4(x: f64) -> String {
    format!("{x:.3e}")
}

fn intensity_table() -> Check {
    let kernels = data("kernels");
    let single = csv_rows(&roofkit(&["table", "--kernels", &kernels])?);
    let multi = csv_rows(&roofkit(&[
        "table",
        "--kernels",
        &kernels,
        "--variant",
        "multi",
    ])?);
    // (flops, load, store, printed 2dp value)
    let single_expected = [
        (325.0, 636.0, 584.0, 0.27),
        (824.0, 584.0, 48.0, 1.39),
        (386.0, 144.0, 56.0, 2.01),
        (205.0, 240.0, 56.0, 0.69),
        (6.0, 48.0, 16.0, 0.10),
    ];
    let multi_expected = [(824.0, 776.0, 240.0, 0.80), (386.0, 336.0, 248.0, 0.66)];
    ensure(single.len() == 5, || {
        format!("{} single rows, want 5", single.len())
    })?;
    for (row, &(f, l, s, _)) in single.iter().zip(&single_expected) {
        let got: f64 = row[5].parse().map_err(|e| format!("{e}"))?;
        ensure(sig4(got) == sig4(f / (l + s)), || {
            format!("{}: {got} vs {}", row[0], f / (l + s))
        })?;
    }
    for idx in [0, 3, 4] {
        let got: f64 = single[idx][6].parse().unwrap();
        ensure((got - single_expected[idx].3).abs() <= 0.01 + 1e-12, || {
            format!("{}: 2dp {got}", single[idx][0])
        })?;
    }
    let multi: Vec<_> = multi
        .into_iter()
        .filter(|r| r[0] == single[1][0] || r[0] == single[2][0])
        .collect();
    ensure(multi.len() == 2, || {
        "multi rows for hot spots 2 and 3 missing".into()
    })?;
    for (row, &(f, l, s, printed)) in multi.iter().zip(&multi_expected) {
        let got: f64 = row[5].parse().unwrap();
        ensure(sig4(got) == sig4(f / (l + s)), || {
            format!("multi {}: {got}", row[0])
        })?;
        let r2: f64 = row[6].parse().unwrap();
        ensure((r2 - printed).abs() <= 0.01 + 1e-12, || {
            format!("multi {}: 2dp {r2}", row[0])
        })?;
    }
    let flagged: Vec<&str> = single
        .iter()
        .filter(|r| r[8] == "true")
        .map(|r| r[0].as_str())
        .collect();
    ensure(
        flagged == [single[1][0].as_str(), single[2][0].as_str()],
        || format!("flagged {flagged:?}"),
    )?;
    Ok("7 quotients to 4 significant digits, 2 mismatches (hot spots 2, 3)".into())
}

fn roofline_arithmetic() -> Check {
    let m = samples::icl();
    let cfg = RooflineConfig::domain(&m);
    for i in [0.0938, 0.2664, 0.6926, 1.3038, 1.9300] {
        let p = roofline::predict("", i, &m, &cfg).map_err(|e| e.to_string())?;
        ensure(p.bound == Bound::Memory, || {
            format!("I={i} not memory-bound")
        })?;
        let want = i * 71.0;
        ensure(((p.predicted_gflops - want) / want).abs() <= 1e-9, || {
            format!("I={i}: {} vs {want}", p.predicted_gflops)
        })?;
        ensure((p.ridge_fpb - 172.8 / 71.0).abs() < 1e-12, || {
            format!("ridge {}", p.ridge_fpb)
        })?;
    }
    let p = roofline::predict("", 3.0, &m, &cfg).map_err(|e| e.to_string())?;
    ensure(p.bound == Bound::Compute, || {
        "I=3.0 not compute-bound".into()
    })?;
    ensure(format!("{:.3}", p.ridge_fpb) == "2.434", || {
        format!("ridge {}", p.ridge_fpb)
    })?;
    Ok(format!(
        "peak {:.1} Gflop/s, ridge {:.4} F/B",
        p.peak_gflops, p.ridge_fpb
    ))
}

fn power_fit_recovery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let freqs: Vec<f64> = (0..10).map(|k| 1.0 + 0.2 * f64::from(k)).collect();
    let trials = 1000;
    let mut ok = 0;
    for _ in 0..trials {
        let w0 = rng.gen_range(40.0..=120.0);
        let wd = rng.gen_range(10.0..=60.0);
        let pts: Vec<(f64, f64)> = freqs
            .iter()
            .map(|&f| (f, w0 + wd * f + rng.gen_range(-1.0..=1.0)))
            .collect();
        let fit = energy::fit_power(&pts, Regressor::Frequency).map_err(|e| e.to_string())?;
        if (fit.w0_baseline_w - w0).abs() <= 2.0 && (fit.wd_dynamic_w_per_ghz - wd).abs() <= 1.5 {
            ok += 1;
        }
    }
    let rate = f64::from(ok) / f64::from(trials);
    ensure(rate >= 0.99, || format!("recovered {ok}/{trials}"))?;
    Ok(format!("recovered {ok}/{trials}"))
}

fn sample(cores: u32, freq: f64, runtime: f64, cpu: f64, dram: f64, work: f64) -> EnergySample {
    EnergySample {
        kernel_or_app: "k".into(),
        cores,
        freq_ghz: freq,
        runtime_s: runtime,
        cpu_energy_j: cpu,
        dram_energy_j: dram,
        work_z: work,
    }
}

fn edp_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let err = |e: roofkit::Error| e.to_string();

    for set in 0..500 {
        let n = rng.gen_range(1..40);
        let samples: Vec<EnergySample> = (0..n)
            .map(|_| {
                sample(
                    rng.gen_range(1..=72),
                    f64::from(rng.gen_range(10..=28)) / 10.0,
                    rng.gen_range(0.1..100.0),
                    rng.gen_range(1.0..1e4),
                    rng.gen_range(0.0..1e3),
                    1e6,
                )
            })
            .collect();
        let k = rng.gen_range(0.01..100.0);
        let scaled: Vec<EnergySample> = samples
            .iter()
            .map(|s| EnergySample {
                cpu_energy_j: s.cpu_energy_j * k,
                dram_energy_j: s.dram_energy_j * k,
                ..s.clone()
            })
            .collect();
        for obj in [Objective::MinEdp, Objective::MinEnergy] {
            let a = energy::optimal_operating_point(&samples, obj).map_err(err)?;
            let b = energy::optimal_operating_point(&scaled, obj).map_err(err)?;
            ensure((a.cores, a.freq_ghz) == (b.cores, b.freq_ghz), || {
                format!("set {set} {obj}: argmin moved under scaling by {k}")
            })?;
        }
    }

    // equal EDP (2*3 == 3*2); lower energy wins, then lower clock, then fewer cores
    let mut tied = vec![
        sample(8, 2.0, 2.0, 3.0, 0.0, 1.0),
        sample(4, 2.0, 3.0, 2.0, 0.0, 1.0),
        sample(4, 1.6, 3.0, 2.0, 0.0, 1.0),
        sample(2, 1.6, 3.0, 2.0, 0.0, 1.0),
        sample(6, 1.6, 3.0, 2.0, 0.0, 1.0),
    ];
    for _ in 0..50 {
        tied.shuffle(&mut rng);
        let p = energy::optimal_operating_point(&tied, Objective::MinEdp).map_err(err)?;
        ensure((p.cores, p.freq_ghz) == (2, 1.6), || {
            format!("tie resolved to {} cores @ {} GHz", p.cores, p.freq_ghz)
        })?;
    }

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let target = rng.gen_range(1e-12..1e-3);
        let pts: Vec<EnergySample> = (0..8)
            .map(|c| {
                let work = rng.gen_range(1e3..1e9);
                let perf = rng.gen_range(1e3..1e9);
                let runtime = work / perf;
                sample(c + 1, 2.0, runtime, target * perf * work, 0.0, work)
            })
            .collect();
        let plot =
            energy::build_zplot(&pts, GroupBy::Cores, EdpConvention::PerWork).map_err(err)?;
        let points: Vec<_> = plot.series.iter().flat_map(|s| s.points.iter()).collect();
        let (x0, y0) = (points[0].performance_z_per_s, points[0].energy_j_per_z);
        for p in &points {
            // cross product with the first point, relative to its magnitude
            let cross = (p.energy_j_per_z * x0 - y0 * p.performance_z_per_s).abs();
            worst = worst.max(cross / (p.energy_j_per_z * x0));
            worst = worst.max(((p.edp_js_per_z2 - target) / target).abs());
        }
    }
    ensure(worst <= 1e-9, || {
        format!("collinearity deviation {worst:e}")
    })?;
    Ok(format!(
        "500 sets invariant, ties deterministic, collinear to {worst:.1e}"
    ))
}

fn stream_rel_err(n: u64, capacity: u64) -> Result<f64, String> {
    let trace =
        traffic_oracle::generate_trace(Pattern::Stream, n, 8, None).map_err(|e| e.to_string())?;
    let cfg = CacheSimConfig::fully_associative(capacity, 64, true);
    let sim = traffic_oracle::simulate_cache(&trace, &cfg).map_err(|e| e.to_string())?;
    let cmp = traffic_oracle::compare_to_analytic(
        &sim,
        Volumes {
            load_bytes: 8,
            store_bytes: 0,
        },
        n,
    )
    .map_err(|e| e.to_string())?;
    cmp.rel_err_load.ok_or_else(|| "no load comparison".into())
}

fn oracle_agreement() -> Check {
    let mib = 1 << 20;
    let e1 = stream_rel_err(1_000_000, mib)?;
    ensure(e1 <= 0.02, || format!("1e6 stream rel err {e1}"))?;
    // same 1 MiB cache with a working set of exactly 100x its capacity
    let e2 = stream_rel_err(100 * mib / 8, mib)?;
    ensure(e2 <= 0.02, || format!("100x stream rel err {e2}"))?;

    let stores = traffic_oracle::generate_trace(Pattern::StreamStore, 1_000_000, 8, None)
        .map_err(|e| e.to_string())?;
    let r =
        traffic_oracle::simulate_cache(&stores, &CacheSimConfig::fully_associative(mib, 64, true))
            .map_err(|e| e.to_string())?;
    ensure(
        r.mem_load_bytes == r.mem_store_bytes && r.mem_load_bytes > 0,
        || {
            format!(
                "WA store stream: load {} store {}",
                r.mem_load_bytes, r.mem_store_bytes
            )
        },
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    for t in 0..200 {
        let mut trace = AccessTrace::default();
        let span = rng.gen_range(256..16384u64);
        for _ in 0..rng.gen_range(1..2000) {
            let kind = if rng.gen_bool(0.3) {
                AccessKind::Store
            } else {
                AccessKind::Load
            };
            trace.push(
                rng.gen_range(0..span),
                *[1u32, 4, 8, 16, 64].choose(&mut rng).unwrap(),
                kind,
            );
        }
        let mut prev: Option<(u64, u64, u64)> = None;
        for lines in [1u64, 2, 3, 4, 8, 16, 32, 64, 256] {
            let cfg = CacheSimConfig::fully_associative(lines * 64, 64, true);
            let r = traffic_oracle::simulate_cache(&trace, &cfg).map_err(|e| e.to_string())?;
            if let Some((pl, pm, pld)) = prev {
                ensure(r.misses <= pm && r.mem_load_bytes <= pld, || {
                    format!("trace {t}: {lines} lines moved more traffic than {pl}")
                })?;
            }
            prev = Some((lines, r.misses, r.mem_load_bytes));
        }
    }
    Ok(format!(
        "stream err {e1:.2e} (1e6), {e2:.2e} (100x); WA load == store; 200 traces monotone"
    ))
}

fn random_record(rng: &mut ChaCha8Rng, i: usize) -> MeasurementRecord {
    let names = [
        "plain",
        "with,comma",
        "with \"quote\"",
        "CalcHourglassControlForElems",
    ];
    MeasurementRecord {
        region: format!("r{i}"),
        kernel: names[rng.gen_range(0..names.len())].to_string(),
        cores: rng.gen_range(1..=104),
        freq_mhz: f64::from(rng.gen_range(800..=3500)),
        uncore_mhz: rng.gen_bool(0.5).then(|| rng.gen_range(800.0..2500.0)),
        runtime_s: rng.gen_range(1e-6..1e4),
        flops: rng.gen_range(0..1u64 << 50),
        load_bytes: rng.gen_range(1..1u64 << 50),
        store_bytes: rng.gen_range(0..1u64 << 50),
        cpu_energy_j: rng.gen_range(0.0..1e6),
        dram_energy_j: rng.gen_range(0.0..1e5),
        work_z: rng.gen_range(1..1u64 << 40),
        instructions: rng.gen_bool(0.5).then(|| rng.gen_range(0..1u64 << 52)),
    }
}

fn ingest_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let records: Vec<MeasurementRecord> = (0..1000).map(|i| random_record(&mut rng, i)).collect();
    let text = ingest::write_measurements(&records);
    let back = ingest::parse_measurements(&text).map_err(|e| e.to_string())?;
    ensure(back == records, || "parse(write(records)) differs".into())?;
    let again = ingest::parse_measurements(&ingest::write_measurements(&back))
        .map_err(|e| e.to_string())?;
    ensure(again == back, || "second round trip differs".into())?;

    let n = 1_000_000u64;
    let eos = MeasurementRecord {
        region: "eos".into(),
        kernel: "EvalEOSForElems".into(),
        cores: 1,
        freq_mhz: 2400.0,
        uncore_mhz: None,
        runtime_s: 0.01,
        flops: 6 * n,
        load_bytes: 45 * n,
        store_bytes: 14 * n,
        cpu_energy_j: 1.0,
        dram_energy_j: 0.1,
        work_z: n,
        instructions: None,
    };
    let kernels = samples::kernels().map_err(|e| e.to_string())?;
    let report = ingest::validate(
        &[eos],
        &kernels,
        &samples::icl(),
        &ValidationOptions::default(),
    );
    let row = &report.rows[0];
    ensure(row.verdict == Verdict::Pass, || {
        format!("EvalEOS verdict {:?}: {}", row.verdict, row.note)
    })?;
    let err = row.rel_error.unwrap_or(f64::NAN);
    ensure(err < 0.15, || format!("rel_error {err}"))?;
    Ok(format!(
        "1000 rows field-identical; EvalEOS pass, rel_error {err:.4}"
    ))
}

fn cli_determinism() -> Check {
    let machine = data("machines/icl.machine");
    let kernels = data("kernels");
    let meas = data("measurements/sample.csv");
    let runs: Vec<Vec<&str>> = vec![
        vec!["table", "--kernels", &kernels],
        vec![
            "predict",
            "--machine",
            &machine,
            "--kernels",
            &kernels,
            "--intensity",
            "0.1,3",
        ],
        vec![
            "roofline",
            "--machine",
            &machine,
            "--kernels",
            &kernels,
            "--measurements",
            &meas,
            "--cores",
            "1",
        ],
        vec![
            "validate",
            "--machine",
            &machine,
            "--kernels",
            &kernels,
            "--measurements",
            &meas,
            &meas,
        ],
        vec!["zplot", "--measurements", &meas, "--region", "sweep"],
        vec![
            "fit-power",
            "--measurements",
            &meas,
            "--region",
            "sweep",
            "--cores",
            "1",
        ],
        vec!["optimal", "--measurements", &meas, "--region", "sweep"],
        vec!["oracle", "--pattern", "gather8", "--mesh-edge", "24"],
    ];
    for args in &runs {
        let a = roofkit(args)?;
        let b = roofkit(args)?;
        ensure(a == b, || {
            format!("`{}` output differs between runs", args[0])
        })?;
        ensure(!a.is_empty(), || format!("`{}` printed nothing", args[0]))?;
    }
    Ok(format!(
        "{} subcommands byte-identical across two runs",
        runs.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        (
            "intensity table reproduction",
            intensity_table,
            Some(Duration::from_secs(1)),
        ),
        (
            "roofline arithmetic",
            roofline_arithmetic,
            Some(Duration::from_secs(1)),
        ),
        (
            "power-fit recovery",
            power_fit_recovery,
            Some(Duration::from_secs(10)),
        ),
        (
            "EDP properties",
            edp_properties,
            Some(Duration::from_secs(5)),
        ),
        (
            "oracle agreement",
            oracle_agreement,
            Some(Duration::from_secs(30)),
        ),
        (
            "ingest round trip and validation",
            ingest_round_trip,
            Some(Duration::from_secs(5)),
        ),
        ("CLI determinism", cli_determinism, None),
    ];
    let mut failed = 0;
    for (n, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(msg), Some(limit)) = (&outcome, limit) {
            if elapsed > *limit {
                outcome = Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(msg) => println!("PASS {} {name}: {msg} ({elapsed:.2?})", n + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg} ({elapsed:.2?})", n + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
