use serde::{Deserialize, Serialize};

use crate::distribution::VelocityDistribution;
use crate::error::{Error, Result};
use crate::estimation::scan::{FringeScan, ScanRole};
use crate::model::Deflectometer;

/// Scans recorded with one source setting, i.e. one velocity distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocitySetting {
    pub label: String,
    pub distribution: VelocityDistribution,
    pub scans: Vec<FringeScan>,
}

/// Signal recorded at a fixed mask position while the voltage is swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub label: String,
    pub distribution: VelocityDistribution,
    /// Mask grating position in m.
    pub grating_position: f64,
    pub voltages: Vec<f64>,
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub setup: Deflectometer,
    pub settings: Vec<VelocitySetting>,
    /// Allowed deflection voltages (V), inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepRecord>,
}

/// Indices into `VelocitySetting::scans` of a measurement and its references.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bracket {
    pub measurement: usize,
    pub before: usize,
    pub after: usize,
}

impl VelocitySetting {
    /// Pairs every measurement scan with the nearest reference scans before
    /// and after it in acquisition order.
    pub fn brackets(&self) -> Result<Vec<Bracket>> {
        let mut order: Vec<usize> = (0..self.scans.len()).collect();
        order.sort_by_key(|&i| self.scans[i].sequence);
        if order
            .windows(2)
            .any(|w| self.scans[w[0]].sequence == self.scans[w[1]].sequence)
        {
            return Err(Error::Protocol(format!(
                "setting '{}': duplicate sequence index",
                self.label
            )));
        }
        let mut out = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if self.scans[i].role != ScanRole::Measurement {
                continue;
            }
            let before = order[..pos]
                .iter()
                .rev()
                .find(|&&j| self.scans[j].role == ScanRole::Reference);
            let after = order[pos + 1..]
                .iter()
                .find(|&&j| self.scans[j].role == ScanRole::Reference);
            match (before, after) {
                (Some(&before), Some(&after)) => out.push(Bracket {
                    measurement: i,
                    before,
                    after,
                }),
                _ => {
                    return Err(Error::Protocol(format!(
                        "setting '{}': scan {} at {} V lacks a reference on both sides",
                        self.label, self.scans[i].sequence, self.scans[i].voltage
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        self.setup.species.validate()?;
        self.setup.geometry.validate()?;
        self.setup.field.validate()?;
        if self.settings.is_empty() {
            return Err(Error::InsufficientData("campaign has no velocity settings".into()));
        }
        for s in &self.settings {
            s.distribution.validate()?;
            for scan in &s.scans {
                scan.validate()?;
                if let (Some((lo, hi)), ScanRole::Measurement) = (self.voltage_range, scan.role) {
                    if scan.voltage < lo || scan.voltage > hi {
                        return Err(Error::Protocol(format!(
                            "setting '{}': scan {} at {} V outside [{lo}, {hi}] V",
                            s.label, scan.sequence, scan.voltage
                        )));
                    }
                }
            }
            if s.brackets()?.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "setting '{}' has no measurement scans",
                    s.label
                )));
            }
        }
        Ok(())
    }
}
