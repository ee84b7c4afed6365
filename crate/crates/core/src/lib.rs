//! Analytic Roofline and energy modeling for memory-bound loop kernels.
//!
//! * [`machine_model`]: compute peaks and bandwidth ceilings of a machine.
//! * [`kernel_model`]: per-iteration traffic accounting and intensities.
//! * [`roofline`]: `P = min(P_peak, I * b_s)` predictions and chart data.
//! * [`energy`]: power-model fits, energy to solution, EDP and z-plots.
//! * [`ingest`]: counter measurements, and validation against the models.
//! * [`traffic_oracle`]: trace-driven LRU cache simulator used to cross-check
//!   analytic traffic volumes.

mod config;
pub mod energy;
pub mod error;
pub mod ingest;
pub mod kernel_model;
pub mod machine_model;
pub mod roofline;
pub mod samples;
pub mod svg;
pub mod traffic_oracle;

pub use error::{Error, Result};
pub use kernel_model::{KernelSpec, TrafficStream, Variant};
pub use machine_model::{CeilingKind, MachineModel};
