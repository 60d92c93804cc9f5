//! Synthetic fringe scans and measurement campaigns.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded
//! with the campaign seed; each scan uses the ChaCha stream numbered by its
//! sequence index, so any scan can be regenerated on its own. Counts are
//! Poisson draws (`rand_distr::Poisson`) around the expected signal.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::distribution::VelocityDistribution;
use crate::error::{Error, Result};
use crate::estimation::campaign::{Campaign, VelocitySetting};
use crate::estimation::scan::{default_positions, FringeScan, ScanRole};
use crate::model::Deflectometer;
use crate::signal::{PatternMoments, SignalModel};
use crate::visibility::VisibilityCurve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mean counts per point where the normalized signal equals 1.
    pub counts_scale: f64,
    /// Instrument phase drift in rad per sequence index.
    pub drift_rate: f64,
    pub seed: u64,
    /// Draw Poisson counts; otherwise write exact expectation values.
    pub shot_noise: bool,
}

impl NoiseModel {
    pub fn noiseless(counts_scale: f64) -> Self {
        Self {
            counts_scale,
            drift_rate: 0.0,
            seed: 0,
            shot_noise: false,
        }
    }

    pub fn shot_noise(counts_scale: f64, seed: u64) -> Self {
        Self {
            counts_scale,
            drift_rate: 0.0,
            seed,
            shot_noise: true,
        }
    }

    /// Sets the drift from a rate in rad/hour, given how long one scan takes.
    pub fn with_drift_per_hour(mut self, rad_per_hour: f64, scan_duration_s: f64) -> Self {
        self.drift_rate = rad_per_hour * scan_duration_s / 3600.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.counts_scale >= 0.0 && self.counts_scale.is_finite()) {
            return Err(Error::Domain(format!(
                "counts scale must be finite and >= 0, got {}",
                self.counts_scale
            )));
        }
        if !self.drift_rate.is_finite() {
            return Err(Error::Domain("drift rate must be finite".into()));
        }
        Ok(())
    }
}

/// Where and how long each scan samples the pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanProtocol {
    /// Mask positions in m.
    pub positions: Vec<f64>,
    /// Seconds per point.
    pub dwell: f64,
    /// High-voltage settings in V, scanned in this order.
    pub voltages: Vec<f64>,
}

impl ScanProtocol {
    /// 20 nm steps over three periods; 3–15 kV in 1 kV steps.
    pub fn standard(grating_period: f64) -> Self {
        Self {
            positions: default_positions(grating_period),
            dwell: 1.0,
            voltages: (3..=15).map(|k| f64::from(k) * 1e3).collect(),
        }
    }

    pub fn scan_duration(&self) -> f64 {
        self.dwell * self.positions.len() as f64
    }
}

/// Counts for a pattern with known moments.
#[allow(clippy::too_many_arguments)]
fn draw_scan(
    moments: &PatternMoments,
    grating_period: f64,
    voltage: f64,
    role: ScanRole,
    sequence: u32,
    positions: &[f64],
    dwell: f64,
    noise: &NoiseModel,
) -> Result<FringeScan> {
    noise.validate()?;
    let k = 2.0 * std::f64::consts::PI / grating_period;
    let drift = noise.drift_rate * f64::from(sequence);
    let mut rng = ChaCha20Rng::seed_from_u64(noise.seed);
    rng.set_stream(u64::from(sequence));
    let counts = positions
        .iter()
        .map(|&x| {
            let signal = 1.0 + moments.mean_visibility * (k * (x - moments.mean_shift) - drift).cos();
            let mean = noise.counts_scale * signal;
            if !noise.shot_noise {
                Ok(mean)
            } else if mean <= 0.0 {
                Ok(0.0)
            } else {
                let p = Poisson::new(mean)
                    .map_err(|e| Error::NumericFailure(format!("Poisson mean {mean}: {e}")))?;
                Ok(p.sample(&mut rng))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FringeScan {
        positions: positions.to_vec(),
        counts,
        dwell,
        voltage,
        sequence,
        role,
    })
}

/// One scan of the velocity-averaged pattern at `voltage`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_scan(
    model: &SignalModel,
    alpha_vol: f64,
    voltage: f64,
    dist: &VelocityDistribution,
    vis: &VisibilityCurve,
    noise: &NoiseModel,
    positions: &[f64],
    sequence: u32,
) -> Result<FringeScan> {
    let moments = model.phasor_moments(alpha_vol, voltage, dist, vis)?;
    let role = if voltage == 0.0 {
        ScanRole::Reference
    } else {
        ScanRole::Measurement
    };
    draw_scan(
        &moments,
        model.grating_period(),
        voltage,
        role,
        sequence,
        positions,
        1.0,
        noise,
    )
}

/// Full campaign: for every setting, a reference scan at 0 V before and
/// after each high-voltage scan. Sequence indices run on across settings.
pub fn synthesize_campaign(
    model: &SignalModel,
    alpha_vol: f64,
    settings: &[(String, VelocityDistribution)],
    vis: &VisibilityCurve,
    protocol: &ScanProtocol,
    noise: &NoiseModel,
) -> Result<Campaign> {
    if settings.is_empty() {
        return Err(Error::InsufficientData("at least one velocity setting is required".into()));
    }
    if protocol.voltages.iter().any(|u| !(*u > 0.0)) {
        return Err(Error::Domain("protocol voltages must be > 0".into()));
    }
    let g = model.grating_period();
    let mut sequence = 0u32;
    let mut out = Vec::with_capacity(settings.len());
    for (label, dist) in settings {
        let reference = model.phasor_moments(alpha_vol, 0.0, dist, vis)?;
        let moments = model.phasor_series(alpha_vol, &protocol.voltages, dist, vis)?;
        let mut scans = Vec::with_capacity(2 * protocol.voltages.len() + 1);
        let mut push = |m: &PatternMoments, voltage: f64, role: ScanRole, seq: &mut u32| -> Result<()> {
            scans.push(draw_scan(m, g, voltage, role, *seq, &protocol.positions, protocol.dwell, noise)?);
            *seq += 1;
            Ok(())
        };
        push(&reference, 0.0, ScanRole::Reference, &mut sequence)?;
        for (m, &u) in moments.iter().zip(&protocol.voltages) {
            push(m, u, ScanRole::Measurement, &mut sequence)?;
            push(&reference, 0.0, ScanRole::Reference, &mut sequence)?;
        }
        out.push(VelocitySetting {
            label: label.clone(),
            distribution: dist.clone(),
            scans,
        });
    }
    let (lo, hi) = protocol
        .voltages
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &u| (l.min(u), h.max(u)));
    Ok(Campaign {
        setup: model.setup.clone(),
        settings: out,
        voltage_range: Some((lo, hi)),
        sweeps: Vec::new(),
    })
}

/// Default setup for the three velocity classes used in the reference
/// measurements: 109, 117 and 199 m/s with 7, 8 and 16 % widths.
pub fn reference_settings() -> Vec<(String, VelocityDistribution)> {
    [(109.0, 0.07), (117.0, 0.08), (199.0, 0.16)]
        .into_iter()
        .map(|(v, w)| {
            (
                format!("v{v:.0}"),
                VelocityDistribution::Gaussian {
                    mean_v: v,
                    rel_width: w,
                },
            )
        })
        .collect()
}

/// Smooth stand-in for the velocity-dependent visibility of the
/// interferometer: a broad maximum of 0.4 around 150 m/s on a 0.15 floor.
pub fn reference_visibility() -> VisibilityCurve {
    let grid: Vec<f64> = (0..=56).map(|i| 20.0 + 5.0 * f64::from(i)).collect();
    VisibilityCurve::from_fn(grid, |v| 0.15 + 0.25 * (-((v - 150.0) / 60.0).powi(2)).exp())
        .expect("values lie in [0.15, 0.4]")
}

/// Convenience wrapper: the reference deflectometer for a species.
pub fn reference_model(species: crate::model::MoleculeSpecies) -> SignalModel {
    SignalModel::new(Deflectometer::reference_c60().with_species(species))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::sinusoid::fit_sinusoid;
    use crate::model::MoleculeSpecies;

    #[test]
    fn zero_scale_gives_zero_counts() {
        let model = reference_model(MoleculeSpecies::c60());
        let dist = VelocityDistribution::gaussian(117.0, 0.08).unwrap();
        let pos = default_positions(model.grating_period());
        for noise in [NoiseModel::noiseless(0.0), NoiseModel::shot_noise(0.0, 1)] {
            let s = synthesize_scan(&model, 88.9, 6e3, &dist, &reference_visibility(), &noise, &pos, 0).unwrap();
            assert!(s.counts.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn noiseless_scan_fits_exactly() {
        let model = reference_model(MoleculeSpecies::c60());
        let dist = VelocityDistribution::gaussian(117.0, 0.08).unwrap();
        let vis = reference_visibility();
        let pos = default_positions(model.grating_period());
        let s = synthesize_scan(&model, 88.9, 6e3, &dist, &vis, &NoiseModel::noiseless(1e4), &pos, 3).unwrap();
        let m = model.phasor_moments(88.9, 6e3, &dist, &vis).unwrap();
        let f = fit_sinusoid(&s, model.grating_period()).unwrap();
        assert!((f.offset - 1e4).abs() / 1e4 < 1e-10);
        assert!((f.visibility - m.mean_visibility).abs() / m.mean_visibility < 1e-10);
        let k = 2.0 * std::f64::consts::PI / model.grating_period();
        let expected = crate::signal::wrap_phase(k * m.mean_shift);
        assert!((f.phase - expected).abs() < 1e-10);
    }

    #[test]
    fn seeded_scans_repeat() {
        let model = reference_model(MoleculeSpecies::c60());
        let dist = VelocityDistribution::gaussian(117.0, 0.08).unwrap();
        let vis = reference_visibility();
        let pos = default_positions(model.grating_period());
        let noise = NoiseModel::shot_noise(1e4, 77);
        let a = synthesize_scan(&model, 88.9, 6e3, &dist, &vis, &noise, &pos, 5).unwrap();
        let b = synthesize_scan(&model, 88.9, 6e3, &dist, &vis, &noise, &pos, 5).unwrap();
        assert_eq!(a, b);
        let c = synthesize_scan(&model, 88.9, 6e3, &dist, &vis, &noise, &pos, 6).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn protocol_counts() {
        let model = reference_model(MoleculeSpecies::c60());
        let c = synthesize_campaign(
            &model,
            88.9,
            &reference_settings(),
            &reference_visibility(),
            &ScanProtocol::standard(model.grating_period()),
            &NoiseModel::noiseless(1e4),
        )
        .unwrap();
        assert_eq!(c.settings.len(), 3);
        for s in &c.settings {
            let hv = s.scans.iter().filter(|x| x.role == ScanRole::Measurement).count();
            let refs = s.scans.iter().filter(|x| x.role == ScanRole::Reference).count();
            assert_eq!((hv, refs), (13, 14));
            assert_eq!(s.brackets().unwrap().len(), 13);
        }
        let seqs: Vec<u32> = c.settings.iter().flat_map(|s| s.scans.iter().map(|x| x.sequence)).collect();
        assert_eq!(seqs, (0..81).collect::<Vec<_>>());
        c.validate().unwrap();
    }

    #[test]
    fn poisson_mean() {
        // 10^4 draws at mean 50: sample mean within 3 sigma.
        let pos: Vec<f64> = (0..10_000).map(|i| f64::from(i) * 1e-9).collect();
        let m = PatternMoments {
            mean_visibility: 0.0,
            mean_shift: 0.0,
            mean_offset: 1.0,
        };
        let s = draw_scan(&m, 991e-9, 0.0, ScanRole::Reference, 0, &pos, 1.0, &NoiseModel::shot_noise(50.0, 9)).unwrap();
        let mean = s.counts.iter().sum::<f64>() / s.counts.len() as f64;
        assert!((mean - 50.0).abs() < 3.0 * (50.0f64 / 1e4).sqrt(), "{mean}");
    }
}
