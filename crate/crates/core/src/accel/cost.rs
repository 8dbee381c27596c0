//! Analytic device throughput model.
//!
//! Small packages are dominated by per-package dispatch overhead, so
//! device throughput scales linearly with package payload until the
//! streaming fabric saturates. The calibration point puts an 8-document
//! package of 128-byte documents at one tenth of peak.

use super::NUM_LANES;

/// Saturated streaming rate of the emulated device.
pub const PEAK_BYTES_PER_SECOND: f64 = 500e6;

/// Stage clock. One character per lane per cycle.
pub const CLOCK_HZ: f64 = 250e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub peak_bytes_per_s: f64,
    /// Packages the dispatch path can issue per second in the
    /// overhead-dominated regime.
    pub package_rate_per_s: f64,
    pub lanes: u32,
    pub clock_hz: f64,
}

impl CostModel {
    pub fn calibrated() -> CostModel {
        let reference_payload = 8.0 * 128.0;
        CostModel {
            peak_bytes_per_s: PEAK_BYTES_PER_SECOND,
            package_rate_per_s: (PEAK_BYTES_PER_SECOND / 10.0) / reference_payload,
            lanes: NUM_LANES as u32,
            clock_hz: CLOCK_HZ,
        }
    }

    /// Modeled device throughput in bytes/s for a steady stream of
    /// packages with the given shape.
    pub fn model_throughput(&self, docs_per_package: f64, doc_bytes: f64) -> f64 {
        let per_package = self.package_rate_per_s * docs_per_package * doc_bytes;
        per_package.min(self.peak_bytes_per_s)
    }

    /// Wall-clock seconds for a measured busy-cycle count.
    pub fn time_for_cycles(&self, cycles: u64) -> f64 {
        cycles as f64 / self.clock_hz
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::calibrated()
    }
}
