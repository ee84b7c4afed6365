//! Machine ceilings: compute peaks, the per-domain bandwidth band and the
//! topology needed to scale them to a core count.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::config;
use crate::error::{Error, Result};

/// Ceilings of one machine. Bandwidths are per ccNUMA domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineModel {
    pub name: String,
    pub ccnuma_domains_per_node: u32,
    pub cores_per_domain: u32,
    pub base_freq_ghz: f64,
    pub flops_per_cycle_scalar: u32,
    pub flops_per_cycle_simd: u32,
    pub bw_theoretical_gbs: f64,
    pub bw_readonly_gbs: f64,
    pub bw_update_gbs: f64,
    pub tdp_socket_w: f64,
    pub cache_line_bytes: u64,
    pub llc_bytes_per_domain: u64,
}

const KEYS: &[&str] = &[
    "name",
    "ccnuma_domains_per_node",
    "cores_per_domain",
    "base_freq_ghz",
    "flops_per_cycle_scalar",
    "flops_per_cycle_simd",
    "bw_theoretical_gbs",
    "bw_readonly_gbs",
    "bw_update_gbs",
    "tdp_socket_w",
    "cache_line_bytes",
    "llc_bytes_per_domain",
];

/// Which memory bandwidth ceiling to use as `b_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum CeilingKind {
    Theoretical,
    Readonly,
    /// Update (read-modify-write) benchmark bandwidth; the ceiling that
    /// application-like kernels actually reach.
    #[default]
    Update,
}

impl CeilingKind {
    pub const ALL: [CeilingKind; 3] = [
        CeilingKind::Theoretical,
        CeilingKind::Readonly,
        CeilingKind::Update,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CeilingKind::Theoretical => "theoretical",
            CeilingKind::Readonly => "readonly",
            CeilingKind::Update => "update",
        }
    }
}

impl fmt::Display for CeilingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CeilingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(CeilingKind::Theoretical),
            "readonly" => Ok(CeilingKind::Readonly),
            "update" => Ok(CeilingKind::Update),
            other => Err(Error::validation(
                "ceiling",
                format!("unknown ceiling kind `{other}` (theoretical|readonly|update)"),
            )),
        }
    }
}

impl MachineModel {
    /// Parses a machine description and checks every invariant.
    pub fn from_config(source: &str) -> Result<Self> {
        let table = config::parse_table(source, "machine")?;
        config::reject_unknown(&table, KEYS, "machine description")?;
        let u32_field = |key: &str| -> Result<u32> {
            let v = config::get_u64(&table, key)?;
            u32::try_from(v).map_err(|_| Error::validation(key, "value too large"))
        };
        let model = MachineModel {
            name: config::get_str(&table, "name")?,
            ccnuma_domains_per_node: u32_field("ccnuma_domains_per_node")?,
            cores_per_domain: u32_field("cores_per_domain")?,
            base_freq_ghz: config::get_f64(&table, "base_freq_ghz")?,
            flops_per_cycle_scalar: u32_field("flops_per_cycle_scalar")?,
            flops_per_cycle_simd: u32_field("flops_per_cycle_simd")?,
            bw_theoretical_gbs: config::get_f64(&table, "bw_theoretical_gbs")?,
            bw_readonly_gbs: config::get_f64(&table, "bw_readonly_gbs")?,
            bw_update_gbs: config::get_f64(&table, "bw_update_gbs")?,
            tdp_socket_w: config::get_f64(&table, "tdp_socket_w")?,
            cache_line_bytes: config::get_u64(&table, "cache_line_bytes")?,
            llc_bytes_per_domain: config::get_u64(&table, "llc_bytes_per_domain")?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config(&text)
    }

    /// Serializes to the same key-value format `from_config` reads.
    pub fn to_config(&self) -> String {
        use config::fmt_f64 as f;
        format!(
            "name = {}\n\
             ccnuma_domains_per_node = {}\n\
             cores_per_domain = {}\n\
             base_freq_ghz = {}\n\
             flops_per_cycle_scalar = {}\n\
             flops_per_cycle_simd = {}\n\
             bw_theoretical_gbs = {}\n\
             bw_readonly_gbs = {}\n\
             bw_update_gbs = {}\n\
             tdp_socket_w = {}\n\
             cache_line_bytes = {}\n\
             llc_bytes_per_domain = {}\n",
            config::quote(&self.name),
            self.ccnuma_domains_per_node,
            self.cores_per_domain,
            f(self.base_freq_ghz),
            self.flops_per_cycle_scalar,
            self.flops_per_cycle_simd,
            f(self.bw_theoretical_gbs),
            f(self.bw_readonly_gbs),
            f(self.bw_update_gbs),
            f(self.tdp_socket_w),
            self.cache_line_bytes,
            self.llc_bytes_per_domain,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be > 0, got {v}")))
            }
        };
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        if self.ccnuma_domains_per_node < 1 {
            return Err(Error::validation("ccnuma_domains_per_node", "must be >= 1"));
        }
        if self.cores_per_domain < 1 {
            return Err(Error::validation("cores_per_domain", "must be >= 1"));
        }
        positive("base_freq_ghz", self.base_freq_ghz)?;
        if self.flops_per_cycle_scalar < 1 {
            return Err(Error::validation("flops_per_cycle_scalar", "must be >= 1"));
        }
        if self.flops_per_cycle_simd < 1 {
            return Err(Error::validation("flops_per_cycle_simd", "must be >= 1"));
        }
        positive("bw_update_gbs", self.bw_update_gbs)?;
        positive("bw_readonly_gbs", self.bw_readonly_gbs)?;
        positive("bw_theoretical_gbs", self.bw_theoretical_gbs)?;
        if self.bw_update_gbs > self.bw_readonly_gbs {
            return Err(Error::validation(
                "bw_update_gbs",
                format!(
                    "{} exceeds bw_readonly_gbs {}",
                    self.bw_update_gbs, self.bw_readonly_gbs
                ),
            ));
        }
        if self.bw_readonly_gbs > self.bw_theoretical_gbs {
            return Err(Error::validation(
                "bw_readonly_gbs",
                format!(
                    "{} exceeds bw_theoretical_gbs {}",
                    self.bw_readonly_gbs, self.bw_theoretical_gbs
                ),
            ));
        }
        if !(self.tdp_socket_w.is_finite() && self.tdp_socket_w >= 0.0) {
            return Err(Error::validation("tdp_socket_w", "must be >= 0"));
        }
        if !self.cache_line_bytes.is_power_of_two() {
            return Err(Error::validation(
                "cache_line_bytes",
                format!("{} is not a power of two", self.cache_line_bytes),
            ));
        }
        Ok(())
    }

    pub fn total_cores(&self) -> u32 {
        self.cores_per_domain * self.ccnuma_domains_per_node
    }

    /// Number of ccNUMA domains covered by `cores` compactly pinned cores.
    pub fn domains_spanned(&self, cores: u32) -> u32 {
        cores.div_ceil(self.cores_per_domain).max(1)
    }

    fn check_cores(&self, cores: u32) -> Result<()> {
        if cores < 1 || cores > self.total_cores() {
            return Err(Error::Domain(format!(
                "core count {cores} outside 1..={} for {}",
                self.total_cores(),
                self.name
            )));
        }
        Ok(())
    }

    /// Peak performance in Gflop/s: cores × GHz × flops/cycle.
    pub fn effective_peak(&self, cores: u32, freq_ghz: f64, simd: bool) -> Result<f64> {
        self.check_cores(cores)?;
        if !(freq_ghz.is_finite() && freq_ghz > 0.0) {
            return Err(Error::Domain(format!(
                "frequency must be > 0, got {freq_ghz}"
            )));
        }
        let per_cycle = if simd {
            self.flops_per_cycle_simd
        } else {
            self.flops_per_cycle_scalar
        };
        Ok(f64::from(cores) * freq_ghz * f64::from(per_cycle))
    }

    /// Per-domain bandwidth ceiling in GB/s.
    pub fn bandwidth_ceiling(&self, kind: CeilingKind) -> f64 {
        match kind {
            CeilingKind::Theoretical => self.bw_theoretical_gbs,
            CeilingKind::Readonly => self.bw_readonly_gbs,
            CeilingKind::Update => self.bw_update_gbs,
        }
    }

    /// Bandwidth ceiling for `cores` compactly pinned cores: the per-domain
    /// value times the number of domains they span.
    pub fn bandwidth_for_cores(&self, kind: CeilingKind, cores: u32) -> Result<f64> {
        self.check_cores(cores)?;
        Ok(self.bandwidth_ceiling(kind) * f64::from(self.domains_spanned(cores)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn icl() -> MachineModel {
        MachineModel::from_config(samples::ICL_MACHINE).unwrap()
    }

    fn spr() -> MachineModel {
        MachineModel::from_config(samples::SPR_MACHINE).unwrap()
    }

    #[test]
    fn shipped_icl_file() {
        let m = icl();
        assert_eq!(m.cores_per_domain, 18);
        assert_eq!(m.base_freq_ghz, 2.4);
        assert_eq!(m.bw_theoretical_gbs, 102.4);
        assert_eq!(m.bw_readonly_gbs, 90.0);
        assert_eq!(m.bw_update_gbs, 71.0);
        assert_eq!(m.total_cores(), 72);
    }

    #[test]
    fn peaks_for_one_domain() {
        let p = icl().effective_peak(18, 2.4, false).unwrap();
        assert!((p - 172.8).abs() < 1e-9, "{p}");
        let p = spr().effective_peak(13, 2.0, false).unwrap();
        assert!((p - 104.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn peak_identity_case() {
        let mut m = icl();
        m.flops_per_cycle_scalar = 1;
        assert_eq!(m.effective_peak(1, 1.0, false).unwrap(), 1.0);
    }

    #[test]
    fn peak_out_of_range() {
        let m = icl();
        assert!(matches!(
            m.effective_peak(0, 2.4, false),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            m.effective_peak(73, 2.4, false),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            m.effective_peak(1, 0.0, false),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ceilings() {
        assert_eq!(icl().bandwidth_ceiling(CeilingKind::Theoretical), 102.4);
        assert_eq!(icl().bandwidth_ceiling(CeilingKind::Update), 71.0);
        assert_eq!(spr().bandwidth_ceiling(CeilingKind::Readonly), 68.5);
        assert_eq!(
            icl().bandwidth_for_cores(CeilingKind::Update, 19).unwrap(),
            142.0
        );
    }

    #[test]
    fn readonly_above_theoretical_is_rejected() {
        let text =
            samples::ICL_MACHINE.replace("bw_readonly_gbs = 90.0", "bw_readonly_gbs = 110.0");
        match MachineModel::from_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "bw_readonly_gbs"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_source_is_syntax_error() {
        assert!(matches!(
            MachineModel::from_config(""),
            Err(Error::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            MachineModel::from_config("# only a comment\n\n"),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "name = \"x\"\ncores_per_domain = 4\nbase_freq_ghz = = 2\n";
        match MachineModel::from_config(text) {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{}turbo_ghz = 3.5\n", samples::ICL_MACHINE);
        match MachineModel::from_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "turbo_ghz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn line_size_must_be_power_of_two() {
        let text = samples::ICL_MACHINE.replace("cache_line_bytes = 64", "cache_line_bytes = 48");
        match MachineModel::from_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "cache_line_bytes"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serialization_round_trip() {
        for m in [icl(), spr()] {
            let back = MachineModel::from_config(&m.to_config()).unwrap();
            assert_eq!(back, m);
        }
    }
}
