use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "roofkit",
    version,
    about = "Roofline, memory-traffic and energy analysis for loop kernels",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Computational intensity table of kernel traffic models.
    Table(TableArgs),
    /// Roofline performance prediction for intensities or kernel models.
    Predict(PredictArgs),
    /// Roofline chart dataset (CSV) or rendering (SVG via --out).
    Roofline(RooflineArgs),
    /// Validate measurements against kernel models and machine ceilings.
    Validate(ValidateArgs),
    /// Energy vs performance z-plot series from measurements.
    Zplot(ZplotArgs),
    /// Fit a linear power model W = W0 + Wd*x to measurements.
    FitPower(FitPowerArgs),
    /// Best measured operating point for EDP or energy.
    Optimal(OptimalArgs),
    /// Cache-simulator cross-check of analytic traffic volumes.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Ceiling {
    Theoretical,
    Readonly,
    #[default]
    Update,
}

impl From<Ceiling> for roofkit::CeilingKind {
    fn from(c: Ceiling) -> Self {
        match c {
            Ceiling::Theoretical => roofkit::CeilingKind::Theoretical,
            Ceiling::Readonly => roofkit::CeilingKind::Readonly,
            Ceiling::Update => roofkit::CeilingKind::Update,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum VariantArg {
    #[default]
    Single,
    Multi,
}

impl From<VariantArg> for roofkit::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Single => roofkit::Variant::Single,
            VariantArg::Multi => roofkit::Variant::Multi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum ObjectiveArg {
    #[default]
    MinEdp,
    MinEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum GroupByArg {
    #[default]
    Freq,
    Cores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum RegressorArg {
    #[default]
    Freq,
    Cores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatternArg {
    Stream,
    Gather8,
    StreamStore,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Write to this file instead of standard output (`.svg` renders a chart
    /// where supported).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OperatingArgs {
    /// Active cores (default: one full ccNUMA domain).
    #[arg(long)]
    pub cores: Option<u32>,
    /// Core clock in GHz (default: base clock).
    #[arg(long)]
    pub freq: Option<f64>,
    /// Use the SIMD instead of the scalar peak.
    #[arg(long)]
    pub simd: bool,
    #[arg(long, value_enum, default_value_t)]
    pub ceiling: Ceiling,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Directory of `*.kernel` files.
    #[arg(long)]
    pub kernels: PathBuf,
    /// Accepted for symmetry with the other subcommands; not used.
    #[arg(long)]
    pub machine: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub machine: PathBuf,
    /// Intensities in F/B; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', required_unless_present = "kernels")]
    pub intensity: Vec<f64>,
    /// Predict every kernel model in this directory.
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub op: OperatingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RooflineArgs {
    #[arg(long)]
    pub machine: PathBuf,
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    /// Measurements plotted as filled points (records with matching cores).
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub op: OperatingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub machine: PathBuf,
    #[arg(long)]
    pub kernels: PathBuf,
    /// One or more measurement CSV files.
    #[arg(long, required = true, num_args = 1..)]
    pub measurements: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub ceiling: Ceiling,
    /// Pass and warn limits on the relative intensity error.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.15, 0.30])]
    pub thresholds: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SampleFilter {
    #[arg(long)]
    pub measurements: PathBuf,
    /// Only records of this kernel.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Only records of this region.
    #[arg(long)]
    pub region: Option<String>,
}

#[derive(Debug, Args)]
pub struct ZplotArgs {
    #[command(flatten)]
    pub filter: SampleFilter,
    #[arg(long, value_enum, default_value_t)]
    pub group_by: GroupByArg,
    /// Report per-work EDP (J/z * s/z), allowing mixed problem sizes.
    #[arg(long)]
    pub per_work: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FitPowerArgs {
    #[command(flatten)]
    pub filter: SampleFilter,
    /// Regress power on core clock (zero-frequency baseline) or active
    /// cores (zero-core baseline).
    #[arg(long, value_enum, default_value_t)]
    pub regressor: RegressorArg,
    /// Only records with this core count.
    #[arg(long)]
    pub cores: Option<u32>,
    /// Only records at this clock in GHz.
    #[arg(long)]
    pub freq: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimalArgs {
    #[command(flatten)]
    pub filter: SampleFilter,
    #[arg(long, value_enum, default_value_t)]
    pub objective: ObjectiveArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Access pattern archetype to generate.
    #[arg(long, value_enum, required_unless_present = "trace")]
    pub pattern: Option<PatternArg>,
    /// Read the access trace from a text file instead.
    #[arg(long, conflicts_with = "pattern")]
    pub trace: Option<PathBuf>,
    /// Elements for stream patterns.
    #[arg(long, default_value_t = 1_000_000)]
    pub n_elems: u64,
    /// Mesh edge for gather8 (edge^3 elements).
    #[arg(long, default_value_t = 40)]
    pub mesh_edge: u32,
    #[arg(long, default_value_t = 8)]
    pub elem_bytes: u32,
    #[arg(long, default_value_t = 1 << 20)]
    pub capacity: u64,
    #[arg(long, default_value_t = 64)]
    pub line: u64,
    /// Ways per set, 0 for fully associative.
    #[arg(long, default_value_t = 0)]
    pub assoc: u64,
    #[arg(long)]
    pub no_write_allocate: bool,
    /// Analytic bytes loaded per iteration (overrides the archetype model).
    #[arg(long)]
    pub analytic_load: Option<u64>,
    #[arg(long)]
    pub analytic_store: Option<u64>,
    /// Iterations the analytic volumes are multiplied by.
    #[arg(long)]
    pub iters: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}
