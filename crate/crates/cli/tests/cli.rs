use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roofkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(run(&["table", "--bogus"]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn table_csv() {
    let out = stdout(&["table", "--kernels", &data("kernels")]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("kernel,variant,flops_per_iter"));
    assert!(lines[2]
        .starts_with("CalcFBHourglassForceForElems,single,824,584,48,1.303797,1.30,1.39,true"));
    assert!(lines[5].ends_with(",false"));
}

#[test]
fn multi_table_reports_fallbacks() {
    let out = run(&["table", "--kernels", &data("kernels"), "--variant", "multi"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.matches("notice:").count(), 3);
    assert!(String::from_utf8_lossy(&out.stdout)
        .contains("IntegrateStressForElems,multi,386,336,248,0.660959,0.66,0.66,false"));
}

#[test]
fn predict_table_format() {
    let out = stdout(&[
        "predict",
        "--machine",
        &data("machines/icl.machine"),
        "--intensity",
        "0.1,3",
        "--format",
        "table",
    ]);
    assert!(out.contains("I = 0.1 F/B: 7.1 Gflop/s memory-bound"));
    assert!(out.contains("I = 3 F/B: 172.8 Gflop/s compute-bound"));
}

#[test]
fn predict_needs_an_input() {
    let out = run(&["predict", "--machine", &data("machines/icl.machine")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_rejects_cores_beyond_machine() {
    let out = run(&[
        "predict",
        "--machine",
        &data("machines/icl.machine"),
        "--intensity",
        "1",
        "--cores",
        "73",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn roofline_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg: PathBuf = dir.path().join("roof.svg");
    stdout(&[
        "roofline",
        "--machine",
        &data("machines/icl.machine"),
        "--kernels",
        &data("kernels"),
        "--out",
        svg.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.trim_end().ends_with("</svg>"));
}

#[test]
fn validate_exit_status_follows_verdicts() {
    let machine = data("machines/icl.machine");
    let kernels = data("kernels");
    let out = stdout(&[
        "validate",
        "--machine",
        &machine,
        "--kernels",
        &kernels,
        "--measurements",
        &data("measurements/sample.csv"),
    ]);
    assert!(out.lines().next().unwrap().starts_with("region,kernel"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "region,kernel,cores,freq_mhz,runtime_s,flops,load_bytes,store_bytes,cpu_energy_j,dram_energy_j,work_z\n\
         x,EvalEOSForElems,1,2400,1,6000000,10000000,0,1,1,1000000\n",
    )
    .unwrap();
    let out = run(&[
        "validate",
        "--machine",
        &machine,
        "--kernels",
        &kernels,
        "--measurements",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",fail,"));
}

#[test]
fn validate_merges_files_in_order() {
    let machine = data("machines/icl.machine");
    let kernels = data("kernels");
    let sample = data("measurements/sample.csv");
    let one = stdout(&[
        "validate",
        "--machine",
        &machine,
        "--kernels",
        &kernels,
        "--measurements",
        &sample,
    ]);
    let two = stdout(&[
        "validate",
        "--machine",
        &machine,
        "--kernels",
        &kernels,
        "--measurements",
        &sample,
        &sample,
    ]);
    let body: Vec<&str> = one.lines().skip(1).collect();
    let doubled: Vec<&str> = two.lines().skip(1).collect();
    assert_eq!(doubled.len(), 2 * body.len());
    assert_eq!(&doubled[..body.len()], &body[..]);
    assert_eq!(&doubled[body.len()..], &body[..]);
}

#[test]
fn malformed_csv_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "region,kernel,cores,freq_mhz,runtime_s,flops,load_bytes,store_bytes,cpu_energy_j,dram_energy_j,work_z\n\
         x,k,1,2400,-1,1,1,0,1,1,1\n",
    )
    .unwrap();
    let out = run(&["optimal", "--measurements", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 1"), "{err}");
}

#[test]
fn zplot_raw_rejects_mixed_work() {
    let meas = data("measurements/sample.csv");
    assert_eq!(
        run(&["zplot", "--measurements", &meas]).status.code(),
        Some(2)
    );
    let out = stdout(&["zplot", "--measurements", &meas, "--per-work"]);
    assert!(out.starts_with("series,x_perf,y_energy_per_work,cores,freq_ghz,edp\n"));
}

#[test]
fn energy_subcommands() {
    let meas = data("measurements/sample.csv");
    let fit = stdout(&[
        "fit-power",
        "--measurements",
        &meas,
        "--region",
        "sweep",
        "--cores",
        "1",
    ]);
    let row: Vec<&str> = fit.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "freq");
    assert_eq!(row[4], "6");
    let best = stdout(&[
        "optimal",
        "--measurements",
        &meas,
        "--region",
        "sweep",
        "--objective",
        "min-energy",
    ]);
    assert!(best.lines().nth(1).unwrap().starts_with("min_energy,"));
}

#[test]
fn oracle_stream_matches_model() {
    let out = stdout(&["oracle", "--pattern", "stream", "--n-elems", "100000"]);
    assert!(out.contains("mem_load_bytes,800000\n"));
    assert!(out.contains("rel_err_load,0\n"));
    assert!(out.contains("rel_err_store,n/a\n"));
}

#[test]
fn oracle_reads_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    std::fs::write(
        &trace,
        "# hex addresses, all in line 0\nL 0 8\nL 8 8\nS 28 8\n",
    )
    .unwrap();
    let out = stdout(&[
        "oracle",
        "--trace",
        trace.to_str().unwrap(),
        "--analytic-load",
        "64",
        "--analytic-store",
        "64",
    ]);
    assert!(out.contains("events,3\n"));
    assert!(out.contains("mem_load_bytes,64\n"));
    assert!(out.contains("mem_store_bytes,64\n"));
    assert!(out.contains("rel_err_store,0\n"));
}
