//! File formats: campaign directories, scan CSVs, two-column curves.
//!
//! A campaign directory holds `manifest.json` and one CSV per scan under
//! `scans/`. Scan files have the header `position_nm,counts,dwell_s`.
//! Curves (visibility, velocity tables) are whitespace-separated text with
//! `#` comment lines.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::distribution::VelocityDistribution;
use crate::error::{Error, Result};
use crate::estimation::{Campaign, FringeScan, ScanRole, SweepRecord, VelocitySetting};
use crate::model::{Deflectometer, DeflectometerGeometry, DeflectorField, MoleculeSpecies};
use crate::synth::NoiseModel;
use crate::visibility::VisibilityCurve;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "tlstark-campaign/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    /// Relative to the campaign directory.
    pub file: PathBuf,
    pub voltage: f64,
    pub sequence: u32,
    pub role: ScanRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingEntry {
    pub label: String,
    pub distribution: VelocityDistribution,
    pub scans: Vec<ScanEntry>,
}

/// Generator inputs recorded alongside synthetic campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub alpha_vol: f64,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub species: MoleculeSpecies,
    pub geometry: DeflectometerGeometry,
    pub field: DeflectorField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_range: Option<(f64, f64)>,
    pub settings: Vec<SettingEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepRecord>,
    /// Visibility curve file, relative to the campaign directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SyntheticTruth>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_scan_csv(path: &Path, scan: &FringeScan) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let rows = (|| -> csv::Result<()> {
        w.write_record(["position_nm", "counts", "dwell_s"])?;
        for (x, c) in scan.positions.iter().zip(&scan.counts) {
            w.write_record([
                format!("{}", x * 1e9),
                format!("{c}"),
                format!("{}", scan.dwell),
            ])?;
        }
        Ok(())
    })();
    rows.map_err(|e| Error::parse(path, e))?;
    let bytes = w.into_inner().map_err(|e| Error::parse(path, e.to_string()))?;
    write_text(path, &String::from_utf8_lossy(&bytes))
}

#[derive(Deserialize)]
struct ScanRow {
    position_nm: f64,
    counts: f64,
    dwell_s: f64,
}

/// Reads a scan CSV; voltage, sequence and role come from the manifest.
pub fn read_scan_csv(path: &Path, voltage: f64, sequence: u32, role: ScanRole) -> Result<FringeScan> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    })?;
    let headers = r.headers().map_err(|e| Error::parse(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["position_nm", "counts", "dwell_s"] {
        return Err(Error::parse(path, "expected header position_nm,counts,dwell_s"));
    }
    let mut positions = Vec::new();
    let mut counts = Vec::new();
    let mut dwell: Option<f64> = None;
    for (line, row) in r.deserialize::<ScanRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path, e))?;
        match dwell {
            None => dwell = Some(row.dwell_s),
            Some(d) if d != row.dwell_s => {
                return Err(Error::parse(
                    path,
                    format!("row {}: dwell {} differs from {d}", line + 1, row.dwell_s),
                ))
            }
            _ => {}
        }
        positions.push(row.position_nm * 1e-9);
        counts.push(row.counts);
    }
    let dwell = dwell.ok_or_else(|| Error::parse(path, "no data rows"))?;
    if !(dwell > 0.0) {
        return Err(Error::parse(path, "dwell_s must be > 0"));
    }
    let scan = FringeScan {
        positions,
        counts,
        dwell,
        voltage,
        sequence,
        role,
    };
    scan.validate().map_err(|e| Error::parse(path, e))?;
    Ok(scan)
}

fn scan_file_name(label: &str, sequence: u32) -> PathBuf {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    Path::new("scans").join(format!("{safe}_{sequence:04}.csv"))
}

/// Writes `campaign` into `dir`, optionally with its visibility curve and
/// generator inputs. Returns the manifest written.
pub fn write_campaign(
    dir: &Path,
    campaign: &Campaign,
    visibility: Option<&VisibilityCurve>,
    truth: Option<SyntheticTruth>,
) -> Result<Manifest> {
    fs::create_dir_all(dir.join("scans")).map_err(|e| Error::io(dir, e))?;
    let mut settings = Vec::with_capacity(campaign.settings.len());
    for s in &campaign.settings {
        let mut scans = Vec::with_capacity(s.scans.len());
        for scan in &s.scans {
            let file = scan_file_name(&s.label, scan.sequence);
            write_scan_csv(&dir.join(&file), scan)?;
            scans.push(ScanEntry {
                file,
                voltage: scan.voltage,
                sequence: scan.sequence,
                role: scan.role,
            });
        }
        settings.push(SettingEntry {
            label: s.label.clone(),
            distribution: s.distribution.clone(),
            scans,
        });
    }
    let visibility_file = match visibility {
        Some(curve) => {
            let file = PathBuf::from("visibility.txt");
            write_visibility_curve(&dir.join(&file), curve)?;
            Some(file)
        }
        None => None,
    };
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        species: campaign.setup.species.clone(),
        geometry: campaign.setup.geometry.clone(),
        field: campaign.setup.field.clone(),
        voltage_range: campaign.voltage_range,
        settings,
        sweeps: campaign.sweeps.clone(),
        visibility_file,
        truth,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Loads a campaign directory and, when the manifest names one, its
/// visibility curve.
pub fn read_campaign(dir: &Path) -> Result<(Campaign, Manifest, Option<VisibilityCurve>)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::parse(
            &manifest_path,
            format!("unsupported format '{}'", manifest.format),
        ));
    }
    let mut settings = Vec::with_capacity(manifest.settings.len());
    for s in &manifest.settings {
        let scans = s
            .scans
            .iter()
            .map(|e| read_scan_csv(&dir.join(&e.file), e.voltage, e.sequence, e.role))
            .collect::<Result<Vec<_>>>()?;
        settings.push(VelocitySetting {
            label: s.label.clone(),
            distribution: s.distribution.clone(),
            scans,
        });
    }
    let campaign = Campaign {
        setup: Deflectometer::new(
            manifest.species.clone(),
            manifest.geometry.clone(),
            manifest.field.clone(),
        )?,
        settings,
        voltage_range: manifest.voltage_range,
        sweeps: manifest.sweeps.clone(),
    };
    campaign.validate()?;
    let vis = match &manifest.visibility_file {
        Some(f) => Some(read_visibility_curve(&dir.join(f))?),
        None => None,
    };
    Ok((campaign, manifest, vis))
}

/// Rows of a whitespace- or comma-separated two-column text file.
pub fn read_two_column(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                format!("line {}: expected 2 columns, found {}", n + 1, fields.len()),
            ));
        }
        let parse = |f: &str| {
            f.parse::<f64>()
                .map_err(|e| Error::parse(path, format!("line {}: {e}", n + 1)))
        };
        rows.push((parse(fields[0])?, parse(fields[1])?));
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    Ok(rows)
}

pub fn write_two_column(path: &Path, header: &[&str], rows: &[(f64, f64)]) -> Result<()> {
    let mut text = String::new();
    for h in header {
        text.push_str("# ");
        text.push_str(h);
        text.push('\n');
    }
    for (a, b) in rows {
        text.push_str(&format!("{a} {b}\n"));
    }
    write_text(path, &text)
}

pub fn read_visibility_curve(path: &Path) -> Result<VisibilityCurve> {
    let rows = read_two_column(path)?;
    let (grid, values) = rows.into_iter().unzip();
    VisibilityCurve::new(grid, values).map_err(|e| Error::parse(path, e))
}

pub fn write_visibility_curve(path: &Path, curve: &VisibilityCurve) -> Result<()> {
    let rows: Vec<(f64, f64)> = curve
        .grid()
        .iter()
        .copied()
        .zip(curve.values().iter().copied())
        .collect();
    write_two_column(path, &["velocity_m_per_s visibility"], &rows)
}

/// Tabulated velocity distribution: velocity (m/s) and relative density.
pub fn read_velocity_table(path: &Path) -> Result<VelocityDistribution> {
    VelocityDistribution::tabulated(read_two_column(path)?).map_err(|e| Error::parse(path, e))
}

pub fn write_velocity_table(path: &Path, table: &[(f64, f64)]) -> Result<()> {
    write_two_column(path, &["velocity_m_per_s density_s_per_m"], table)
}
