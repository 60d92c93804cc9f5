//! The nine acceptance criteria. Each prints one PASS/FAIL line; the process
//! exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tlstark::deconvolution::{deconvolve_visibility, DeconvolutionOptions, VisibilityMeasurement};
use tlstark::distribution::VelocityDistribution;
use tlstark::estimation::{alpha_ratio, fit_alpha, reference_uncertainties, systematic_budget, AlphaEstimate, FitOptions};
use tlstark::field::*;
use tlstark::model::{Deflectometer, MoleculeSpecies};
use tlstark::quadrature::QuadratureConfig;
use tlstark::signal::{forward_visibility, SignalModel};
use tlstark::synth::*;
use tlstark::visibility::VisibilityCurve;

const C60_ALPHA: f64 = 88.9;
const C70_ALPHA: f64 = 108.5;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn fit_campaign(species: MoleculeSpecies, alpha: f64, noise: &NoiseModel) -> AlphaEstimate {
    let model = reference_model(species);
    let vis = reference_visibility();
    let protocol = ScanProtocol::standard(model.grating_period());
    let c = synthesize_campaign(&model, alpha, &reference_settings(), &vis, &protocol, noise).unwrap();
    fit_alpha(&c, &vis, &FitOptions::default()).unwrap()
}

fn quadratic_law() -> Verdict {
    let setup = Deflectometer::reference_c60();
    let volts: Vec<f64> = (3..=15).map(|k| f64::from(k) * 1e3).collect();
    let shifts: Vec<f64> = volts
        .iter()
        .map(|&u| setup.fringe_shift(C60_ALPHA, u, 117.0).unwrap().shift)
        .collect();
    let c = volts.iter().zip(&shifts).map(|(u, s)| s * u * u).sum::<f64>()
        / volts.iter().map(|u| u.powi(4)).sum::<f64>();
    let worst = volts
        .iter()
        .zip(&shifts)
        .map(|(u, s)| ((s - c * u * u) / s).abs())
        .fold(0.0, f64::max);

    let est = fit_campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(1e4, 1));
    let chi2: f64 = est.per_velocity.iter().map(|p| p.chi_squared).sum();
    let dof: usize = est.per_velocity.iter().map(|p| p.shifts.len() - 1).sum();
    let q95 = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.95);
    verdict(
        worst < 1e-10 && chi2 <= q95,
        format!("exact residual {worst:.1e} (< 1e-10); shot-noise chi2 {chi2:.1} / {dof} dof, 95% bound {q95:.1}"),
    )
}

fn pi_shift() -> Verdict {
    let setup = Deflectometer::reference_c60();
    let phase = setup.fringe_shift(C60_ALPHA, 6e3, 117.0).unwrap().phase;
    verdict(
        (0.8 * PI..=1.2 * PI).contains(&phase),
        format!("phase at 6 kV, 117 m/s = {:.4} pi (residual vs pi {:+.4} pi)", phase / PI, phase / PI - 1.0),
    )
}

fn closed_loop() -> Verdict {
    let noisy = fit_campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(1e4, 1));
    let within = (noisy.alpha_vol - C60_ALPHA).abs() <= 2.0 * noisy.stat_err;
    let clean = fit_campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::noiseless(1e4));
    let clean_rel = (clean.alpha_vol / C60_ALPHA - 1.0).abs();
    let quad = fit_campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(4e4, 1));
    let ratio = noisy.pooled_err / quad.pooled_err;
    verdict(
        within && clean_rel < 1e-3 && (ratio / 2.0 - 1.0).abs() <= 0.25,
        format!(
            "noisy {:.4} +/- {:.4}; noiseless off by {:.1e}; pooled error ratio at 4x counts {ratio:.3}",
            noisy.alpha_vol, noisy.stat_err, clean_rel
        ),
    )
}

fn ratio() -> Verdict {
    let c60 = fit_campaign(MoleculeSpecies::c60(), C60_ALPHA, &NoiseModel::shot_noise(1e4, 2));
    let c70 = fit_campaign(MoleculeSpecies::c70(), C70_ALPHA, &NoiseModel::shot_noise(1e4, 3));
    let r = alpha_ratio(&c70, &c60).unwrap();
    verdict(
        (r.ratio - 1.2205).abs() <= 0.03,
        format!("C70/C60 = {:.4} +/- {:.4} (target 1.2205 +/- 0.03)", r.ratio, r.error),
    )
}

fn crossings(a: &[f64], b: &[f64]) -> usize {
    let signs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn dephasing() -> Verdict {
    let model = SignalModel::new(Deflectometer::reference_c60());
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let volts: Vec<f64> = (0..=20).map(|k| f64::from(k) * 1e3).collect();
    let mut violations = 0;
    for _ in 0..100 {
        let grid: Vec<f64> = (0..8).map(|i| 20.0 + 60.0 * f64::from(i)).collect();
        let values: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
        let vis = VisibilityCurve::new(grid, values).unwrap();
        let dist = VelocityDistribution::gaussian(rng.random_range(80.0..250.0), rng.random_range(0.02..0.18)).unwrap();
        let alpha = rng.random_range(10.0..200.0);
        let m = model.phasor_series(alpha, &volts, &dist, &vis).unwrap();
        let v0 = m[0].mean_visibility;
        if m.iter().any(|p| p.mean_visibility > v0 * (1.0 + 1e-12) + 1e-15) {
            violations += 1;
        }
    }

    let c70 = SignalModel::new(Deflectometer::reference_c60().with_species(MoleculeSpecies::c70()));
    let dist = VelocityDistribution::gaussian(103.2, 0.07).unwrap();
    let vis = reference_visibility();
    let sweep_volts: Vec<f64> = (0..=150).map(|k| f64::from(k) * 100.0).collect();
    let sweep = c70.voltage_sweep(C70_ALPHA, &dist, &vis, 0.0, &sweep_volts).unwrap();
    let v0 = sweep[0].visibility;
    let min_ratio = sweep.iter().map(|p| p.visibility / v0).fold(f64::INFINITY, f64::min);
    let drops = min_ratio < 0.2;

    let base: Vec<f64> = sweep.iter().map(|p| p.signal).collect();
    let mut band = 0.0_f64;
    let mut counts = Vec::new();
    for (mf, wf) in [(1.01, 1.0), (0.99, 1.0), (1.0, 0.08 / 0.07), (1.0, 0.06 / 0.07)] {
        let d = dist.perturbed(mf, wf).unwrap();
        let curve: Vec<f64> = c70
            .voltage_sweep(C70_ALPHA, &d, &vis, 0.0, &sweep_volts)
            .unwrap()
            .iter()
            .map(|p| p.signal)
            .collect();
        band = band.max(curve.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        counts.push(crossings(&curve, &base));
    }
    verdict(
        violations == 0 && drops && band > 0.0,
        format!(
            "monotone envelope violations {violations}/100; C70 min V(U)/V(0) for U <= 15 kV = {min_ratio:.3} (needs < 0.2); \
             perturbation band max {band:.3}, crossings {counts:?}"
        ),
    )
}

fn deconvolution() -> Verdict {
    let truth = |v: f64| 0.2 + 0.3 * (-((v - 150.0) / 40.0_f64).powi(2)).exp();
    let dense = VisibilityCurve::from_fn((0..=600).map(|i| 20.0 + 0.5 * f64::from(i)).collect(), truth).unwrap();
    let q = QuadratureConfig::default();
    let sigma = 0.005;
    let kernels: Vec<VelocityDistribution> = (0..8)
        .map(|i| {
            let t = f64::from(i) / 7.0;
            VelocityDistribution::gaussian(100.0 + 100.0 * t, 0.07 + 0.09 * t).unwrap()
        })
        .collect();
    let grid: Vec<f64> = (0..=50).map(|i| 50.0 + 5.0 * f64::from(i)).collect();
    let sup = |c: &VisibilityCurve| {
        (100..=200)
            .map(|v| (c.eval(f64::from(v)) - truth(f64::from(v))).abs())
            .fold(0.0, f64::max)
    };
    let run = |seed: Option<u64>| {
        let mut rng = seed.map(ChaCha20Rng::seed_from_u64);
        let normal = Normal::new(0.0, sigma).unwrap();
        let ms: Vec<VisibilityMeasurement> = kernels
            .iter()
            .map(|d| {
                let mut v = forward_visibility(d, &dense, &q).unwrap();
                if let Some(r) = rng.as_mut() {
                    v += normal.sample(r);
                }
                VisibilityMeasurement {
                    distribution: d.clone(),
                    visibility: v,
                    uncertainty: sigma,
                }
            })
            .collect();
        let r = deconvolve_visibility(&ms, &grid, &DeconvolutionOptions::default()).unwrap();
        let worst = r.residuals.iter().map(|x| x.abs()).fold(0.0, f64::max) / sigma;
        (sup(&r.curve), worst)
    };
    let (sup_exact, res_exact) = run(None);
    let (sup_noisy, res_noisy) = run(Some(11));
    verdict(
        sup_exact <= 0.02 && res_exact <= 2.0 && res_noisy <= 2.0,
        format!(
            "exact data: sup error {sup_exact:.4}, max residual {res_exact:.2} sigma; \
             noisy data: sup error {sup_noisy:.4}, max residual {res_noisy:.2} sigma"
        ),
    )
}

fn field_oracles() -> Verdict {
    let (r1, r2, u) = (2e-3, 10e-3, 1000.0);
    let h = (r2 - r1) / 32.0;
    let opts = SolverOptions::default();
    let coax = solve_potential(&ElectrodeGeometry2D::coaxial(r1, r2, u, 512), h, &opts).unwrap();
    let mut worst_coax = 0.0_f64;
    for r in [4e-3, 5e-3, 6.5e-3] {
        let e = u / (r * (r2 / r1).ln());
        let k = gradient_product(&coax, [r, 0.0]).unwrap();
        worst_coax = worst_coax.max((k / (-e * e / r) - 1.0).abs());
    }
    let reference = gradient_product(&coax, [5e-3, 0.0]).unwrap().abs();
    let plates = solve_potential(&ElectrodeGeometry2D::parallel_plates(r2 - r1, 1e-3, 8e-3, u), h, &opts).unwrap();
    let floor = [-2e-3, 0.0, 1e-3]
        .iter()
        .map(|&x| gradient_product(&plates, [x, 0.0]).unwrap().abs())
        .fold(0.0, f64::max)
        / reference;

    let g = ElectrodeGeometry2D::surrogate_transverse(5e3);
    let a = solve_potential(&g, 0.5e-3, &opts).unwrap();
    let b = solve_potential(&g.scaled(2.0), 0.5e-3, &opts).unwrap();
    let scaling = [[3e-3, 0.0], [2e-3, 1.5e-3]]
        .iter()
        .map(|&p| (gradient_product(&b, p).unwrap() / gradient_product(&a, p).unwrap() - 4.0).abs() / 4.0)
        .fold(0.0, f64::max);

    // edges half-way between samples
    let (dz, n) = (1e-4, 225);
    let w = (2 * n + 1) as f64 * dz;
    let z: Vec<f64> = (-400..=400).map(|i| f64::from(i) * dz).collect();
    let hat: Vec<f64> = z.iter().map(|&x| if x.abs() < 0.5 * w { 1.0 } else { 0.0 }).collect();
    let d = effective_length(&z, &hat).unwrap();
    let hat_err = (d / w - 1.0).abs();

    verdict(
        worst_coax < 0.02 && floor < 1e-3 && scaling <= 1e-12 && hat_err <= 1e-12,
        format!(
            "coaxial K error {:.2}% at gap/32; plates |K|/coax {floor:.1e}; U^2 scaling error {scaling:.1e}; top-hat d_eff error {hat_err:.1e}",
            100.0 * worst_coax
        ),
    )
}

fn budget() -> Verdict {
    let setup = Deflectometer::reference_c60();
    let inputs = reference_uncertainties(3.0 * setup.grating_period());
    let b = systematic_budget(&setup.geometry, inputs.iter().map(|(k, v)| (*k, *v))).unwrap();
    println!("{b}");
    verdict(
        (0.05..=0.07).contains(&b.total) && b.entries.len() == 6,
        format!("total {:.2}% over {} terms", 100.0 * b.total, b.entries.len()),
    )
}

fn force_sensitivity() -> Verdict {
    let f = Deflectometer::reference_c60().force_for_shift(15e-9, 117.0);
    let decades = (f / 1e-26).log10();
    verdict(decades.abs() <= 1.0, format!("minimum force {f:.3e} N ({decades:+.2} decades from 1e-26 N)"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("quadratic voltage law", quadratic_law),
        ("pi shift at 6 kV", pi_shift),
        ("closed-loop recovery", closed_loop),
        ("C70/C60 ratio", ratio),
        ("dephasing envelope", dephasing),
        ("deconvolution round trip", deconvolution),
        ("field solver oracles", field_oracles),
        ("systematic budget", budget),
        ("force sensitivity", force_sensitivity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({}) [{:.1} s]",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
