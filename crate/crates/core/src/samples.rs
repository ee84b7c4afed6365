//! Bundled machine and kernel descriptions, embedded at compile time.

use crate::error::Result;
use crate::kernel_model::KernelSpec;
use crate::machine_model::MachineModel;

pub const ICL_MACHINE: &str = include_str!("../../../data/machines/icl.machine");
pub const SPR_MACHINE: &str = include_str!("../../../data/machines/spr.machine");

/// `(file name, contents)` of the five memory-bound hot-spot kernels, in
/// table order.
pub const KERNELS: [(&str, &str); 5] = [
    (
        "1_CalcHourglassControlForElems.kernel",
        include_str!("../../../data/kernels/1_CalcHourglassControlForElems.kernel"),
    ),
    (
        "2_CalcFBHourglassForceForElems.kernel",
        include_str!("../../../data/kernels/2_CalcFBHourglassForceForElems.kernel"),
    ),
    (
        "3_IntegrateStressForElems.kernel",
        include_str!("../../../data/kernels/3_IntegrateStressForElems.kernel"),
    ),
    (
        "4_CalcMonotonicQGradientsForElems.kernel",
        include_str!("../../../data/kernels/4_CalcMonotonicQGradientsForElems.kernel"),
    ),
    (
        "5_EvalEOSForElems.kernel",
        include_str!("../../../data/kernels/5_EvalEOSForElems.kernel"),
    ),
];

pub const MEASUREMENTS_CSV: &str = include_str!("../../../data/measurements/sample.csv");

pub fn icl() -> MachineModel {
    MachineModel::from_config(ICL_MACHINE).expect("bundled ICL description is valid")
}

pub fn spr() -> MachineModel {
    MachineModel::from_config(SPR_MACHINE).expect("bundled SPR description is valid")
}

pub fn machine(name: &str) -> Option<MachineModel> {
    match name.to_ascii_lowercase().as_str() {
        "icl" => Some(icl()),
        "spr" => Some(spr()),
        _ => None,
    }
}

pub fn kernels() -> Result<Vec<KernelSpec>> {
    KERNELS
        .iter()
        .map(|(_, text)| KernelSpec::from_config(text))
        .collect()
}
