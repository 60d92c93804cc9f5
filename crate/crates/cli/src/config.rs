//! Run configuration: built-in defaults overlaid with an optional JSON file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tlstark::distribution::VelocityDistribution;
use tlstark::field::ElectrodeGeometry2D;
use tlstark::model::{Deflectometer, DeflectometerGeometry, DeflectorField, MoleculeSpecies};
use tlstark::quadrature::QuadratureConfig;
use tlstark::synth::reference_visibility;
use tlstark::visibility::VisibilityCurve;
use tlstark::{Error, Result};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[allow(dead_code)]
    #[serde(default, skip_serializing)]
    pub notes: Value,
    pub species: Vec<MoleculeSpecies>,
    pub geometry: DeflectometerGeometry,
    pub field: DeflectorField,
    pub velocity_settings: Vec<SettingConfig>,
    /// `None` selects the built-in reference curve.
    pub visibility: Option<VisibilityCurve>,
    pub protocol: ProtocolConfig,
    pub noise: NoiseConfig,
    pub quadrature: QuadratureConfig,
    pub fit: FitConfig,
    pub systematics: SystematicsConfig,
    pub sweep: SweepConfig,
    pub deconvolution: DeconvolutionConfig,
    pub field_solver: FieldSolverConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingConfig {
    pub label: String,
    pub mean_v: f64,
    pub rel_width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub step_nm: f64,
    pub periods: f64,
    pub dwell_s: f64,
    pub voltages_kv: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub counts_scale: f64,
    pub drift_rad_per_hour: f64,
    pub seed: u64,
    pub shot_noise: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub alpha_tol: f64,
    pub drift_correction: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystematicsConfig {
    pub relative: BTreeMap<String, f64>,
    pub resolution_m: f64,
    pub max_shift_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Result<Vec<f64>> {
        range_values(self.start, self.stop, self.step)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub position_nm: f64,
    pub voltages_kv: Range,
    /// Relative change of the mean velocity for the sensitivity band.
    pub mean_v_rel_delta: f64,
    /// Absolute change of the relative width for the sensitivity band.
    pub rel_width_delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvolutionConfig {
    pub lambda: Option<f64>,
    pub grid: Range,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSolverConfig {
    /// `None` selects the surrogate rod-over-plate cross-section.
    pub transverse: Option<ElectrodeGeometry2D>,
    pub longitudinal: Option<ElectrodeGeometry2D>,
    pub spacing_m: f64,
    pub longitudinal_spacing_m: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub probe: [f64; 2],
    pub segment_half_length_m: f64,
    pub segment_samples: usize,
    /// Electrode length of the surrogate longitudinal model.
    pub electrode_length_m: f64,
}

/// `start, start+step, …` up to `stop` inclusive (with a little slack).
pub fn range_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Config(format!("bad range {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(Error::Config("range has more than a million points".into()));
    }
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

/// Recursive merge: objects merge key by key, anything else replaces.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut value: Value = serde_json::from_str(DEFAULT_CONFIG)
            .map_err(|e| Error::Config(format!("built-in config: {e}")))?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            let over: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            merge(&mut value, over);
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(Error::Config("no species defined".into()));
        }
        for s in &self.species {
            s.validate().map_err(config)?;
        }
        self.geometry.validate().map_err(config)?;
        self.field.validate().map_err(config)?;
        for s in &self.velocity_settings {
            VelocityDistribution::gaussian(s.mean_v, s.rel_width).map_err(config)?;
        }
        if !(self.fit.alpha_tol > 0.0 && self.fit.alpha_tol < 0.1) {
            return Err(Error::Config("fit.alpha_tol must lie in (0, 0.1)".into()));
        }
        if !(self.protocol.step_nm > 0.0 && self.protocol.periods >= 1.0 && self.protocol.dwell_s > 0.0) {
            return Err(Error::Config(
                "protocol needs step_nm > 0, periods >= 1 and dwell_s > 0".into(),
            ));
        }
        if let Some(l) = self.deconvolution.lambda {
            check_lambda(l)?;
        }
        Ok(())
    }

    pub fn species(&self, name: &str) -> Result<MoleculeSpecies> {
        self.species
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
            .cloned()
            .ok_or_else(|| {
                let known: Vec<&str> = self.species.iter().map(|s| s.name.as_str()).collect();
                Error::Config(format!("unknown species '{name}' (known: {})", known.join(", ")))
            })
    }

    pub fn setup(&self, species: &str) -> Result<Deflectometer> {
        Deflectometer::new(self.species(species)?, self.geometry.clone(), self.field.clone())
    }

    pub fn visibility(&self) -> VisibilityCurve {
        self.visibility.clone().unwrap_or_else(reference_visibility)
    }

    /// The configured settings, or one per requested mean velocity. A
    /// velocity not listed in the config gets a width interpolated between
    /// 7 % at 100 m/s and 16 % at 200 m/s.
    pub fn settings(&self, velocities: Option<&[f64]>) -> Result<Vec<(String, VelocityDistribution)>> {
        let picked: Vec<SettingConfig> = match velocities {
            None => self.velocity_settings.clone(),
            Some(vs) => vs
                .iter()
                .map(|&v| {
                    self.velocity_settings
                        .iter()
                        .find(|s| (s.mean_v - v).abs() < 1e-9)
                        .cloned()
                        .unwrap_or_else(|| SettingConfig {
                            label: format!("v{v}"),
                            mean_v: v,
                            rel_width: default_width(v),
                        })
                })
                .collect(),
        };
        if picked.is_empty() {
            return Err(Error::Config("no velocity settings".into()));
        }
        picked
            .into_iter()
            .map(|s| Ok((s.label, VelocityDistribution::gaussian(s.mean_v, s.rel_width).map_err(config)?)))
            .collect()
    }
}

pub fn default_width(v: f64) -> f64 {
    (0.07 + 0.09 * (v - 100.0) / 100.0).clamp(0.07, 0.16)
}

pub fn check_lambda(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("lambda must be finite and > 0, got {l}")))
    }
}

pub fn check_tol(t: f64) -> Result<()> {
    if t > 0.0 && t < 0.1 {
        Ok(())
    } else {
        Err(Error::Config(format!("--tol must lie in (0, 0.1), got {t}")))
    }
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_defaults_load() {
        let cfg = RunConfig::load(None).unwrap();
        assert_eq!(cfg.species("c70").unwrap().mass_amu, 840.77);
        assert_eq!(cfg.geometry.grating_period, 991e-9);
        assert_eq!(cfg.protocol.voltages_kv.len(), 13);
        assert_eq!(cfg.settings(None).unwrap().len(), 3);
    }

    #[test]
    fn overlay_merges() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"field": {"grad_product_ref": 2e14}, "noise": {"seed": 9}}"#).unwrap();
        let cfg = RunConfig::load(Some(&p)).unwrap();
        assert_eq!(cfg.field.grad_product_ref, 2e14);
        assert_eq!(cfg.field.reference_voltage, 1e4);
        assert_eq!(cfg.noise.seed, 9);
    }

    #[test]
    fn bad_overlays() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"feild": {}}"#).unwrap();
        assert!(matches!(RunConfig::load(Some(&p)), Err(Error::Config(_))));
        std::fs::write(&p, r#"{"geometry": {"grating_period": 1.0}}"#).unwrap();
        assert!(matches!(RunConfig::load(Some(&p)), Err(Error::Config(_))));
        assert!(RunConfig::load(Some(&dir.path().join("missing.json"))).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(range_values(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(range_values(0.0, 15.0, 0.1).unwrap().len(), 151);
        assert!(range_values(1.0, 0.0, 0.1).is_err());
        assert!(range_values(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn widths_between_anchors() {
        assert_eq!(default_width(100.0), 0.07);
        assert!((default_width(150.0) - 0.115).abs() < 1e-15);
        assert_eq!(default_width(300.0), 0.16);
    }
}
