use tlstark::estimation::{fit_alpha, Campaign, FitOptions};
use tlstark::model::MoleculeSpecies;
use tlstark::synth::*;
use tlstark::visibility::VisibilityCurve;

const C60_ALPHA: f64 = 88.9;
const C70_ALPHA: f64 = 108.5;

fn campaign(species: MoleculeSpecies, alpha: f64, noise: &NoiseModel) -> (Campaign, VisibilityCurve) {
    let model = reference_model(species);
    let vis = reference_visibility();
    let protocol = ScanProtocol::standard(model.grating_period());
    let c = synthesize_campaign(&model, alpha, &reference_settings(), &vis, &protocol, noise).unwrap();
    (c, vis)
}

fn drift_noise(seed: u64) -> NoiseModel {
    let g = reference_model(MoleculeSpecies::c60()).grating_period();
    let duration = ScanProtocol::standard(g).scan_duration();
    NoiseModel::shot_noise(1e4, seed).with_drift_per_hour(0.5, duration)
}

#[test]
fn noiseless_campaign_returns_truth() {
    let (c, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::noiseless(1e4));
    let est = fit_alpha(&c, &vis, &FitOptions::default()).unwrap();
    assert!((est.alpha_vol / C60_ALPHA - 1.0).abs() < 1e-3, "{}", est.alpha_vol);
    assert_eq!(est.per_velocity.len(), 3);
    assert!(est.flags.is_empty());
    for p in &est.per_velocity {
        assert!((p.alpha_vol / C60_ALPHA - 1.0).abs() < 1e-3);
        assert_eq!(p.shifts.len(), 13);
    }
}

#[test]
fn shot_noise_recovery_within_stat_error() {
    let (c, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(1e4, 1));
    let est = fit_alpha(&c, &vis, &FitOptions::default()).unwrap();
    assert!((est.alpha_vol - C60_ALPHA).abs() <= 2.0 * est.stat_err, "{est:?}");
    // shot-noise limited precision is at or below the 0.1 % level
    assert!(est.pooled_err / est.alpha_vol <= 1e-3);
    let budget_total: f64 = est.budget.entries.iter().map(|e| e.contribution.powi(2)).sum::<f64>().sqrt();
    assert!((budget_total - est.budget.total).abs() < 1e-12);
    assert!((est.sys_err - est.budget.total * est.alpha_vol).abs() < 1e-9);
}

#[test]
fn quadrupled_counts_halve_pooled_error() {
    let (a, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(1e4, 7));
    let (b, _) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(4e4, 7));
    let ea = fit_alpha(&a, &vis, &FitOptions::default()).unwrap();
    let eb = fit_alpha(&b, &vis, &FitOptions::default()).unwrap();
    let ratio = ea.pooled_err / eb.pooled_err;
    assert!((ratio / 2.0 - 1.0).abs() <= 0.25, "{ratio}");
}

#[test]
fn c70_recovery() {
    let (c, vis) = campaign(MoleculeSpecies::c70(), C70_ALPHA, &NoiseModel::shot_noise(1e4, 1));
    let est = fit_alpha(&c, &vis, &FitOptions::default()).unwrap();
    assert_eq!(est.species, "C70");
    assert!((est.alpha_vol - C70_ALPHA).abs() <= 2.0 * est.stat_err, "{est:?}");
}

#[test]
fn drift_is_compensated_by_references() {
    let (c, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &drift_noise(4));
    let corrected = fit_alpha(&c, &vis, &FitOptions::default()).unwrap();
    let sigma = corrected.stat_err.max(corrected.pooled_err);
    assert!((corrected.alpha_vol - C60_ALPHA).abs() <= 2.0 * sigma, "{corrected:?}");

    let raw = fit_alpha(
        &c,
        &vis,
        &FitOptions {
            drift_correction: false,
            ..FitOptions::default()
        },
    )
    .unwrap();
    assert!((raw.alpha_vol - C60_ALPHA).abs() > 10.0 * raw.pooled_err, "{}", raw.alpha_vol);
}

#[test]
fn noiseless_drift_is_removed_exactly() {
    let mut noise = drift_noise(0);
    noise.shot_noise = false;
    let (c, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &noise);
    let est = fit_alpha(&c, &vis, &FitOptions::default()).unwrap();
    assert!((est.alpha_vol / C60_ALPHA - 1.0).abs() < 1e-3);
}

#[test]
fn drifted_shift_series_match_drift_free_truth() {
    let (drifted, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &drift_noise(9));
    let (clean, _) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::noiseless(1e4));
    let a = fit_alpha(&drifted, &vis, &FitOptions::default()).unwrap();
    let b = fit_alpha(&clean, &vis, &FitOptions::default()).unwrap();
    for (pa, pb) in a.per_velocity.iter().zip(&b.per_velocity) {
        for (sa, sb) in pa.shifts.iter().zip(&pb.shifts) {
            assert!((sa.shift - sb.shift).abs() <= 4.0 * sa.shift_err, "{sa:?} vs {sb:?}");
        }
    }
}

#[test]
fn count_scale_does_not_move_alpha() {
    let (a, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::noiseless(1e4));
    let (b, _) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::noiseless(2e4));
    let ea = fit_alpha(&a, &vis, &FitOptions::default()).unwrap();
    let eb = fit_alpha(&b, &vis, &FitOptions::default()).unwrap();
    assert!((ea.alpha_vol / eb.alpha_vol - 1.0).abs() < 1e-9);
}

#[test]
fn voltage_and_field_rescaling_cancel() {
    let (c, vis) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(1e4, 3));
    let mut scaled = c.clone();
    let k = 3.0;
    scaled.setup.field.grad_product_ref /= k * k;
    scaled.voltage_range = c.voltage_range.map(|(lo, hi)| (lo * k, hi * k));
    for s in &mut scaled.settings {
        for scan in &mut s.scans {
            scan.voltage *= k;
        }
    }
    let a = fit_alpha(&c, &vis, &FitOptions::default()).unwrap();
    let b = fit_alpha(&scaled, &vis, &FitOptions::default()).unwrap();
    assert!((a.alpha_vol / b.alpha_vol - 1.0).abs() < 1e-6, "{} {}", a.alpha_vol, b.alpha_vol);
}

#[test]
fn c70_slow_setting_unwraps_three_periods() {
    let (c, vis) = campaign(MoleculeSpecies::c70(), C70_ALPHA, &NoiseModel::shot_noise(1e4, 2));
    let est = fit_alpha(&c, &vis, &FitOptions::default()).unwrap();
    let slow = &est.per_velocity[0];
    assert_eq!(slow.mean_v, 109.0);
    let model = reference_model(MoleculeSpecies::c70());
    let volts: Vec<f64> = slow.shifts.iter().map(|s| s.voltage).collect();
    let truth = model
        .phasor_series(C70_ALPHA, &volts, &c.settings[0].distribution, &vis)
        .unwrap();
    assert!(truth.last().unwrap().mean_shift > 2.5 * model.grating_period());
    for (s, t) in slow.shifts.iter().zip(&truth) {
        assert!((s.shift - t.mean_shift).abs() <= 4.0 * s.shift_err, "{s:?} vs {t:?}");
    }
}

#[test]
fn campaigns_repeat_bit_for_bit() {
    let noise = drift_noise(42);
    let (a, _) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &noise);
    let (b, _) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &noise);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let (c, _) = campaign(MoleculeSpecies::c60(), C60_ALPHA, &drift_noise(43));
    assert_ne!(a, c);
}
