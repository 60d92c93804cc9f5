use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanRole {
    Measurement,
    Reference,
}

/// Counts recorded while stepping the mask grating at one deflector voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    /// Mask grating positions in m, strictly increasing.
    pub positions: Vec<f64>,
    /// Detected counts per position. Integer-valued for real data; the
    /// noiseless simulator writes exact expectation values.
    pub counts: Vec<f64>,
    /// Seconds per point.
    pub dwell: f64,
    /// Volts.
    pub voltage: f64,
    /// Position in the acquisition order.
    pub sequence: u32,
    pub role: ScanRole,
}

impl FringeScan {
    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.counts.len() {
            return Err(Error::Domain(format!(
                "scan {}: {} positions but {} counts",
                self.sequence,
                self.positions.len(),
                self.counts.len()
            )));
        }
        if self.positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "scan {}: positions must increase strictly",
                self.sequence
            )));
        }
        if self.counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::Domain(format!(
                "scan {}: counts must be finite and >= 0",
                self.sequence
            )));
        }
        if !(self.voltage >= 0.0) {
            return Err(Error::Domain(format!("scan {}: negative voltage", self.sequence)));
        }
        if self.role == ScanRole::Reference && self.voltage != 0.0 {
            return Err(Error::Protocol(format!(
                "reference scan {} recorded at {} V instead of 0 V",
                self.sequence, self.voltage
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.dwell * self.positions.len() as f64
    }
}

/// `n` positions starting at `start`, spaced by `step` (both in m).
pub fn scan_positions(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

/// Standard protocol grid: 20 nm steps covering three grating periods.
pub fn default_positions(grating_period: f64) -> Vec<f64> {
    let step = 20e-9;
    let n = (3.0 * grating_period / step).ceil() as usize;
    scan_positions(0.0, step, n)
}
