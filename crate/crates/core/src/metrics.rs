//! Comparison figures between a baseline and a partitioned compile.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("baseline depth is zero")]
    ZeroBaseline,
}

/// Signed depth change of PAC against the baseline, in percent:
/// `100 * (pac - base) / base`. Negative means PAC is shallower.
pub fn layer_reduction_ratio(pac_layers: usize, base_layers: usize) -> Result<f64, MetricsError> {
    if base_layers == 0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(100.0 * (pac_layers as f64 - base_layers as f64) / base_layers as f64)
}

/// `base / pac` compile time.
pub fn speedup(base_time: f64, pac_time: f64) -> f64 {
    base_time / pac_time
}

/// One benchmark row. Times are seconds; a timed-out run keeps the elapsed
/// time and sets its flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub name: String,
    pub qubits: usize,
    pub base_time: f64,
    pub pac_time: f64,
    pub base_layers: Option<usize>,
    pub pac_layers: Option<usize>,
    pub base_timed_out: bool,
    pub pac_timed_out: bool,
}

impl BenchRecord {
    pub fn speedup(&self) -> f64 {
        speedup(self.base_time, self.pac_time)
    }

    /// `pac - base` layers, when both finished.
    pub fn delta_layers(&self) -> Option<i64> {
        Some(self.pac_layers? as i64 - self.base_layers? as i64)
    }

    /// Layer change in percent, when both finished and the baseline fired.
    pub fn reduction_pct(&self) -> Option<f64> {
        layer_reduction_ratio(self.pac_layers?, self.base_layers?).ok()
    }
}
