//! Drift compensation from zero-voltage reference scans.

use crate::error::{Error, Result};
use crate::estimation::sinusoid::ScanFit;
use crate::signal::wrap_phase;

/// A fitted scan tagged with its place in the acquisition order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequencedFit {
    pub fit: ScanFit,
    pub sequence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedPhase {
    /// Radians in (−π, π].
    pub phase: f64,
    pub variance: f64,
}

/// Subtracts the reference phase interpolated linearly in sequence index
/// between the bracketing references.
pub fn drift_correct(
    measurement: &SequencedFit,
    before: &SequencedFit,
    after: &SequencedFit,
) -> Result<CorrectedPhase> {
    if !(before.sequence < measurement.sequence && measurement.sequence < after.sequence) {
        return Err(Error::Protocol(format!(
            "references at {} and {} do not bracket scan {}",
            before.sequence, after.sequence, measurement.sequence
        )));
    }
    let t = (measurement.sequence - before.sequence) / (after.sequence - before.sequence);
    let ref_step = wrap_phase(after.fit.phase - before.fit.phase);
    let reference = before.fit.phase + t * ref_step;
    Ok(CorrectedPhase {
        phase: wrap_phase(measurement.fit.phase - reference),
        variance: measurement.fit.phase_variance()
            + (1.0 - t).powi(2) * before.fit.phase_variance()
            + t * t * after.fit.phase_variance(),
    })
}
