//! Polarizability from drift-corrected fringe shifts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::budget::{reference_uncertainties, systematic_budget, SystematicBudget};
use crate::estimation::campaign::{Campaign, VelocitySetting};
use crate::estimation::drift::{drift_correct, SequencedFit};
use crate::estimation::sinusoid::fit_sinusoid;
use crate::estimation::unwrap::unwrap_shift_series;
use crate::optimize::{bracket_minimum, brent_minimize};
use crate::quadrature::QuadratureConfig;
use crate::signal::SignalModel;
use crate::visibility::VisibilityCurve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystematicInputs {
    /// Named relative uncertainties other than the resolution term.
    pub relative: Vec<(String, f64)>,
    /// Lateral resolution in m, converted against the largest observed shift.
    pub resolution: Option<f64>,
}

impl Default for SystematicInputs {
    fn default() -> Self {
        Self {
            relative: reference_uncertainties(1.0)
                .into_iter()
                .filter(|(n, _)| *n != "resolution")
                .map(|(n, v)| (n.to_string(), v))
                .collect(),
            resolution: Some(15e-9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Relative tolerance on α for the scalar minimization.
    pub alpha_tol: f64,
    pub drift_correction: bool,
    pub systematics: SystematicInputs,
    pub quadrature: QuadratureConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            alpha_tol: 1e-4,
            drift_correction: true,
            systematics: SystematicInputs::default(),
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    /// Volts.
    pub voltage: f64,
    /// Measured shift in m.
    pub shift: f64,
    pub shift_err: f64,
    /// Fitted model shift in m.
    pub model_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityAlpha {
    pub label: String,
    pub mean_v: f64,
    pub rel_width: f64,
    pub alpha_vol: f64,
    /// From the curvature of χ² at the minimum.
    pub alpha_err: f64,
    pub chi_squared: f64,
    pub shifts: Vec<ShiftPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub species: String,
    /// Inverse-variance weighted mean over velocity settings, Å³.
    pub alpha_vol: f64,
    /// Standard deviation of the per-velocity values, Å³.
    pub stat_err: f64,
    /// Error of the weighted mean from the per-fit covariances, Å³.
    pub pooled_err: f64,
    pub sys_err: f64,
    pub per_velocity: Vec<VelocityAlpha>,
    pub budget: SystematicBudget,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRatio {
    pub ratio: f64,
    pub error: f64,
}

struct ShiftSeries {
    voltages: Vec<f64>,
    shifts: Vec<f64>,
    errors: Vec<f64>,
}

fn measured_shifts(setting: &VelocitySetting, g: f64, drift_correction: bool) -> Result<ShiftSeries> {
    let brackets = setting.brackets()?;
    let fits = setting
        .scans
        .iter()
        .map(|s| {
            Ok(SequencedFit {
                fit: fit_sinusoid(s, g)?,
                sequence: f64::from(s.sequence),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = brackets
        .iter()
        .map(|b| {
            let m = &fits[b.measurement];
            let (phase, variance) = if drift_correction {
                let c = drift_correct(m, &fits[b.before], &fits[b.after])?;
                (c.phase, c.variance)
            } else {
                (m.fit.phase, m.fit.phase_variance())
            };
            Ok((setting.scans[b.measurement].voltage, phase, variance))
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let voltages: Vec<f64> = points.iter().map(|p| p.0).collect();
    let phases: Vec<f64> = points.iter().map(|p| p.1).collect();
    let shifts = unwrap_shift_series(&phases, &voltages, g)?;
    let errors = points.iter().map(|p| p.2.sqrt() * g / (2.0 * PI)).collect();
    Ok(ShiftSeries {
        voltages,
        shifts,
        errors,
    })
}

fn fit_setting(
    model: &SignalModel,
    setting: &VelocitySetting,
    vis: &VisibilityCurve,
    series: &ShiftSeries,
    tol: f64,
) -> Result<VelocityAlpha> {
    let dist = &setting.distribution;
    let weights: Vec<f64> = series
        .errors
        .iter()
        .map(|e| if *e > 0.0 { 1.0 / (e * e) } else { 1.0 })
        .collect();
    let model_shifts = |alpha: f64| -> Result<Vec<f64>> {
        Ok(model
            .phasor_series(alpha, &series.voltages, dist, vis)?
            .into_iter()
            .map(|m| m.mean_shift)
            .collect())
    };
    let chi2 = |alpha: f64| -> Result<f64> {
        Ok(model_shifts(alpha)?
            .iter()
            .zip(&series.shifts)
            .zip(&weights)
            .map(|((m, s), w)| w * (s - m).powi(2))
            .sum())
    };

    // Start from the single-velocity law at the mean velocity.
    let v = dist.mean_v();
    let unit: Vec<f64> = series
        .voltages
        .iter()
        .map(|&u| Ok(model.setup.shift_coefficient(1.0, u)? / (v * v)))
        .collect::<Result<_>>()?;
    let num: f64 = unit.iter().zip(&series.shifts).zip(&weights).map(|((a, s), w)| w * a * s).sum();
    let den: f64 = unit.iter().zip(&weights).map(|(a, w)| w * a * a).sum();
    let alpha0 = num / den;
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::Fit(format!(
            "setting '{}': shifts do not grow with voltage",
            setting.label
        )));
    }

    // Bracket in ln α so the search never leaves α > 0; exp keeps the
    // ordering, so the same triple brackets the minimum in α.
    let mut log_objective = |u: f64| chi2(u.exp());
    let (a, b, c) = bracket_minimum(&mut log_objective, alpha0.ln(), alpha0.ln() + 0.05, 60)?;
    let mut objective = |alpha: f64| chi2(alpha);
    let best = brent_minimize(&mut objective, (a.exp(), b.exp(), c.exp()), tol, 200)?;
    let alpha = best.x;

    // Gauss–Newton curvature: σ_α² = 1 / Σ w (∂Δs/∂α)².
    let h = 1e-4 * alpha;
    let up = model_shifts(alpha + h)?;
    let down = model_shifts(alpha - h)?;
    let info: f64 = up
        .iter()
        .zip(&down)
        .zip(&weights)
        .map(|((u, d), w)| w * ((u - d) / (2.0 * h)).powi(2))
        .sum();
    let fitted = model_shifts(alpha)?;
    let shifts = (0..series.voltages.len())
        .map(|j| ShiftPoint {
            voltage: series.voltages[j],
            shift: series.shifts[j],
            shift_err: series.errors[j],
            model_shift: fitted[j],
        })
        .collect();
    Ok(VelocityAlpha {
        label: setting.label.clone(),
        mean_v: dist.mean_v(),
        rel_width: dist.rel_width(),
        alpha_vol: alpha,
        alpha_err: info.recip().sqrt(),
        chi_squared: best.value,
        shifts,
    })
}

/// Fits α for every velocity setting and combines the results.
pub fn fit_alpha(campaign: &Campaign, vis: &VisibilityCurve, options: &FitOptions) -> Result<AlphaEstimate> {
    campaign.validate()?;
    let model = SignalModel::new(campaign.setup.clone()).with_quadrature(options.quadrature);
    let g = campaign.setup.geometry.grating_period;
    let mut flags = Vec::new();
    let mut per_velocity = Vec::new();
    let mut max_shift: f64 = 0.0;
    for setting in &campaign.settings {
        let series = measured_shifts(setting, g, options.drift_correction)?;
        max_shift = series.shifts.iter().fold(max_shift, |m, s| m.max(s.abs()));
        match fit_setting(&model, setting, vis, &series, options.alpha_tol) {
            Ok(v) => per_velocity.push(v),
            Err(Error::Fit(msg)) => flags.push(format!("setting '{}' excluded: {msg}", setting.label)),
            Err(e) => return Err(e),
        }
    }
    if per_velocity.is_empty() {
        return Err(Error::Fit("no velocity setting produced a bracketed minimum".into()));
    }

    let wsum: f64 = per_velocity.iter().map(|p| p.alpha_err.powi(-2)).sum();
    let alpha_vol = per_velocity
        .iter()
        .map(|p| p.alpha_vol * p.alpha_err.powi(-2))
        .sum::<f64>()
        / wsum;
    let pooled_err = wsum.recip().sqrt();
    let n = per_velocity.len();
    let stat_err = if n >= 2 {
        let mean = per_velocity.iter().map(|p| p.alpha_vol).sum::<f64>() / n as f64;
        (per_velocity.iter().map(|p| (p.alpha_vol - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        flags.push("single velocity setting: statistical error is covariance-only".into());
        pooled_err
    };

    let mut inputs: Vec<(&str, f64)> = options
        .systematics
        .relative
        .iter()
        .map(|(n, v)| (n.as_str(), *v))
        .collect();
    if let Some(res) = options.systematics.resolution {
        if max_shift > 0.0 {
            inputs.push(("resolution", res / max_shift));
        }
    }
    let budget = systematic_budget(&campaign.setup.geometry, inputs)?;
    Ok(AlphaEstimate {
        species: campaign.setup.species.name.clone(),
        alpha_vol,
        stat_err,
        pooled_err,
        sys_err: budget.total * alpha_vol,
        per_velocity,
        budget,
        flags,
    })
}

/// `numerator / denominator` with statistical errors in quadrature; common
/// systematics cancel in the ratio.
pub fn alpha_ratio(numerator: &AlphaEstimate, denominator: &AlphaEstimate) -> Result<AlphaRatio> {
    if denominator.alpha_vol == 0.0 {
        return Err(Error::Domain("ratio with zero polarizability in the denominator".into()));
    }
    let ratio = numerator.alpha_vol / denominator.alpha_vol;
    let rel = ((numerator.stat_err / numerator.alpha_vol).powi(2)
        + (denominator.stat_err / denominator.alpha_vol).powi(2))
    .sqrt();
    Ok(AlphaRatio {
        ratio,
        error: ratio * rel,
    })
}
