use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use tlstark::deconvolution::{deconvolve_visibility, DeconvolutionOptions, Regularization, VisibilityMeasurement};
use tlstark::estimation::{fit_alpha, scan::scan_positions, systematic_budget, AlphaEstimate, FitOptions, SystematicInputs};
use tlstark::field::{
    effective_length, gradient_product, homogeneity, longitudinal_profile, solve_potential,
    ElectrodeGeometry2D, Homogeneity, PotentialGrid, SolverOptions,
};
use tlstark::io;
use tlstark::signal::SignalModel;
use tlstark::synth::{synthesize_campaign, NoiseModel, ScanProtocol};
use tlstark::{Error, Result};

use crate::config::{check_lambda, check_tol, range_values, RunConfig};
use crate::{Cli, Command, GridArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Numbers separated by commas; `a:b:s` expands to a range.
pub fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = token.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("'{s}' is not a number")))
        };
        match parts.as_slice() {
            [x] => out.push(num(x)?),
            [a, b, s] => out.extend(range_values(num(a)?, num(b)?, num(s)?)?),
            _ => return Err(CliError::Usage(format!("cannot parse list item '{token}'"))),
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("empty list '{text}'")));
    }
    Ok(out)
}

pub fn run(cli: &Cli) -> CliResult {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(t) = cli.tol {
        check_tol(t)?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Shift(grid) => shift(&cfg, grid, out),
        Command::Sweep {
            grid,
            width,
            position_nm,
        } => sweep(&cfg, cli.tol, grid, *width, *position_nm, out),
        Command::Synth {
            grid,
            seed,
            counts,
            drift,
            noiseless,
        } => synth(&cfg, cli.tol, grid, *seed, *counts, *drift, *noiseless, out),
        Command::Fit {
            campaign,
            visibility,
            no_drift_correction,
        } => fit(&cfg, cli.tol, campaign, visibility.as_deref(), *no_drift_correction, out),
        Command::Deconv { measurements, lambda } => deconv(&cfg, cli.tol, measurements, *lambda, out),
        Command::Field {
            geometry,
            longitudinal,
            spacing,
        } => field(&cfg, cli.tol, geometry.as_deref(), longitudinal.as_deref(), *spacing, out),
        Command::Budget { max_shift_nm, term } => budget(&cfg, *max_shift_nm, term, out),
    }
}

fn alpha_for(cfg: &RunConfig, grid: &GridArgs) -> CliResult<f64> {
    let alpha = match grid.alpha {
        Some(a) => a,
        None => cfg.species(&grid.species)?.alpha_ref.ok_or_else(|| {
            CliError::Usage(format!("species {} has no reference α; pass --alpha", grid.species))
        })?,
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CliError::Usage(format!("--alpha must be > 0, got {alpha}")));
    }
    Ok(alpha)
}

fn voltages_v(grid: &GridArgs, default_kv: &[f64]) -> CliResult<Vec<f64>> {
    let kv = match &grid.voltage_kv {
        Some(text) => parse_list(text)?,
        None => default_kv.to_vec(),
    };
    if let Some(u) = kv.iter().find(|u| !(**u >= 0.0)) {
        return Err(CliError::Usage(format!("voltages must be >= 0 kV, got {u}")));
    }
    Ok(kv.iter().map(|u| u * 1e3).collect())
}

fn velocities(grid: &GridArgs) -> CliResult<Option<Vec<f64>>> {
    grid.velocity.as_deref().map(parse_list).transpose()
}

fn signal_model(cfg: &RunConfig, species: &str, tol: Option<f64>) -> Result<SignalModel> {
    let mut q = cfg.quadrature;
    if let Some(t) = tol {
        q = q.with_rel_tol(t);
    }
    Ok(SignalModel::new(cfg.setup(species)?).with_quadrature(q))
}

/// Writes `text` to `out/name`, or to stdout without an output directory.
fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(name);
            io::write_text(&path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn shift(cfg: &RunConfig, grid: &GridArgs, out: Option<&Path>) -> CliResult {
    let setup = cfg.setup(&grid.species)?;
    let alpha = alpha_for(cfg, grid)?;
    let volts = voltages_v(grid, &cfg.protocol.voltages_kv)?;
    let vs = match velocities(grid)? {
        Some(v) => v,
        None => cfg.velocity_settings.iter().map(|s| s.mean_v).collect(),
    };
    let mut text = String::new();
    let _ = writeln!(text, "# species {} alpha {alpha} A^3", setup.species.name);
    let _ = writeln!(text, "# voltage_kV velocity_m_per_s shift_nm phase_rad phase_over_pi");
    for &v in &vs {
        for &u in &volts {
            let s = setup.fringe_shift(alpha, u, v)?;
            let _ = writeln!(
                text,
                "{} {} {:.6} {:.6} {:.6}",
                u / 1e3,
                v,
                s.shift * 1e9,
                s.phase,
                s.phase / std::f64::consts::PI
            );
        }
    }
    emit(out, "shift.txt", &text)?;
    Ok(())
}

/// Sign changes of `a − b`, ignoring exact ties.
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

fn sweep(
    cfg: &RunConfig,
    tol: Option<f64>,
    grid: &GridArgs,
    width: Option<f64>,
    position_nm: Option<f64>,
    out: Option<&Path>,
) -> CliResult {
    let model = signal_model(cfg, &grid.species, tol)?;
    let alpha = alpha_for(cfg, grid)?;
    let volts = match &grid.voltage_kv {
        Some(_) => voltages_v(grid, &[])?,
        None => cfg.sweep.voltages_kv.values()?.iter().map(|u| u * 1e3).collect(),
    };
    let x = position_nm.unwrap_or(cfg.sweep.position_nm) * 1e-9;
    let vis = cfg.visibility();
    let settings = cfg.settings(velocities(grid)?.as_deref())?;
    for (label, dist) in settings {
        let dist = match width {
            Some(w) => tlstark::distribution::VelocityDistribution::gaussian(dist.mean_v(), w)?,
            None => dist,
        };
        let nominal = model.voltage_sweep(alpha, &dist, &vis, x, &volts)?;
        let w = dist.rel_width();
        let dv = cfg.sweep.mean_v_rel_delta;
        let dw = cfg.sweep.rel_width_delta;
        let variants = [
            (1.0 + dv, 1.0),
            (1.0 - dv, 1.0),
            (1.0, (w + dw) / w),
            (1.0, (w - dw).max(1e-3) / w),
        ];
        let base: Vec<f64> = nominal.iter().map(|p| p.signal).collect();
        let mut low = base.clone();
        let mut high = base.clone();
        let mut crossing_counts = Vec::new();
        for (mf, wf) in variants {
            let d = dist.perturbed(mf, wf)?;
            let curve: Vec<f64> = model
                .voltage_sweep(alpha, &d, &vis, x, &volts)?
                .iter()
                .map(|p| p.signal)
                .collect();
            for (i, s) in curve.iter().enumerate() {
                low[i] = low[i].min(*s);
                high[i] = high[i].max(*s);
            }
            crossing_counts.push(crossings(&curve, &base));
        }
        let mut text = String::new();
        let _ = writeln!(
            text,
            "# species {} alpha {alpha} A^3 mean_v {} rel_width {w} position_nm {}",
            model.setup.species.name,
            dist.mean_v(),
            x * 1e9
        );
        let _ = writeln!(
            text,
            "# band: mean_v x(1 +/- {dv}), rel_width +/- {dw}; crossings with nominal {crossing_counts:?}"
        );
        let _ = writeln!(
            text,
            "# voltage_kV signal envelope_low envelope_high visibility shift_nm band_low band_high"
        );
        for (i, p) in nominal.iter().enumerate() {
            let _ = writeln!(
                text,
                "{:.4} {:.9} {:.9} {:.9} {:.9} {:.6} {:.9} {:.9}",
                p.voltage / 1e3,
                p.signal,
                p.envelope_low,
                p.envelope_high,
                p.visibility,
                p.shift * 1e9,
                low[i],
                high[i]
            );
        }
        emit(out, &format!("sweep_{label}.txt"), &text)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn synth(
    cfg: &RunConfig,
    tol: Option<f64>,
    grid: &GridArgs,
    seed: Option<u64>,
    counts: Option<f64>,
    drift: Option<f64>,
    noiseless: bool,
    out: Option<&Path>,
) -> CliResult {
    let out = out.ok_or_else(|| CliError::Usage("synth needs --out DIR".into()))?;
    let model = signal_model(cfg, &grid.species, tol)?;
    let alpha = alpha_for(cfg, grid)?;
    let g = model.grating_period();
    let step = cfg.protocol.step_nm * 1e-9;
    let n = (cfg.protocol.periods * g / step).ceil() as usize;
    let protocol = ScanProtocol {
        positions: scan_positions(0.0, step, n),
        dwell: cfg.protocol.dwell_s,
        voltages: voltages_v(grid, &cfg.protocol.voltages_kv)?,
    };
    let noise = NoiseModel {
        counts_scale: counts.unwrap_or(cfg.noise.counts_scale),
        drift_rate: 0.0,
        seed: seed.unwrap_or(cfg.noise.seed),
        shot_noise: cfg.noise.shot_noise && !noiseless,
    }
    .with_drift_per_hour(drift.unwrap_or(cfg.noise.drift_rad_per_hour), protocol.scan_duration());
    let settings = cfg.settings(velocities(grid)?.as_deref())?;
    let vis = cfg.visibility();
    let campaign = synthesize_campaign(&model, alpha, &settings, &vis, &protocol, &noise)?;
    let truth = io::SyntheticTruth { alpha_vol: alpha, noise };
    let manifest = io::write_campaign(out, &campaign, Some(&vis), Some(truth))?;
    let scans: usize = manifest.settings.iter().map(|s| s.scans.len()).sum();
    println!(
        "wrote {scans} scans in {} velocity settings to {}",
        manifest.settings.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    estimate: &'a AlphaEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_alpha_vol: Option<f64>,
}

fn fit(
    cfg: &RunConfig,
    tol: Option<f64>,
    dir: &Path,
    visibility: Option<&Path>,
    no_drift_correction: bool,
    out: Option<&Path>,
) -> CliResult {
    let (campaign, manifest, stored) = io::read_campaign(dir)?;
    let vis = match (visibility, stored) {
        (Some(p), _) => io::read_visibility_curve(p)?,
        (None, Some(v)) => v,
        (None, None) => {
            log::warn!("campaign has no visibility curve; using the configured one");
            cfg.visibility()
        }
    };
    let options = FitOptions {
        alpha_tol: tol.unwrap_or(cfg.fit.alpha_tol),
        drift_correction: cfg.fit.drift_correction && !no_drift_correction,
        systematics: SystematicInputs {
            relative: cfg.systematics.relative.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            resolution: Some(cfg.systematics.resolution_m),
        },
        quadrature: cfg.quadrature,
    };
    let est = fit_alpha(&campaign, &vis, &options)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{}: alpha = {:.4} +/- {:.4} (stat) +/- {:.4} (sys) A^3; pooled stat {:.4}",
        est.species, est.alpha_vol, est.stat_err, est.sys_err, est.pooled_err
    );
    for p in &est.per_velocity {
        let _ = writeln!(
            text,
            "  {:<8} v={:<7} width={:<5} alpha={:.4} +/- {:.4}  chi2={:.2}/{}",
            p.label,
            p.mean_v,
            p.rel_width,
            p.alpha_vol,
            p.alpha_err,
            p.chi_squared,
            p.shifts.len().saturating_sub(1)
        );
    }
    if let Some(t) = &manifest.truth {
        let _ = writeln!(text, "  generator alpha {:.4} A^3", t.alpha_vol);
    }
    for f in &est.flags {
        let _ = writeln!(text, "  flag: {f}");
    }
    let _ = writeln!(text, "{}", est.budget);
    print!("{text}");
    if let Some(o) = out {
        io::write_json(
            &o.join("report.json"),
            &FitReport {
                estimate: &est,
                truth_alpha_vol: manifest.truth.as_ref().map(|t| t.alpha_vol),
            },
        )?;
        io::write_text(&o.join("budget.txt"), &format!("{}\n", est.budget))?;
    }
    Ok(())
}

fn deconv(cfg: &RunConfig, tol: Option<f64>, input: &Path, lambda: Option<f64>, out: Option<&Path>) -> CliResult {
    let measurements: Vec<VisibilityMeasurement> = io::read_json(input)?;
    let lambda = lambda.or(cfg.deconvolution.lambda);
    if let Some(l) = lambda {
        check_lambda(l)?;
    }
    let mut quadrature = cfg.quadrature;
    if let Some(t) = tol {
        quadrature = quadrature.with_rel_tol(t);
    }
    let options = DeconvolutionOptions {
        regularization: lambda.map_or(Regularization::Discrepancy, Regularization::Fixed),
        quadrature,
    };
    let grid = cfg.deconvolution.grid.values()?;
    let r = deconvolve_visibility(&measurements, &grid, &options)?;
    println!("lambda {:.6e} chi2 {:.6} ({} measurements)", r.lambda, r.chi_squared, measurements.len());
    for (m, res) in measurements.iter().zip(&r.residuals) {
        println!(
            "  mean_v {:<8} V {:.5} +/- {:.5}  residual {:+.5}",
            m.distribution.mean_v(),
            m.visibility,
            m.uncertainty,
            res
        );
    }
    match out {
        Some(o) => io::write_visibility_curve(&o.join("visibility.txt"), &r.curve)?,
        None => {
            for (v, x) in r.curve.grid().iter().zip(r.curve.values()) {
                println!("{v} {x}");
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GridSummary {
    nx: usize,
    ny: usize,
    h: f64,
    iterations: usize,
    residual: f64,
}

impl From<&PotentialGrid> for GridSummary {
    fn from(g: &PotentialGrid) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            h: g.h,
            iterations: g.iterations,
            residual: g.residual,
        }
    }
}

#[derive(Serialize)]
struct FieldReport {
    probe: [f64; 2],
    grad_product: f64,
    homogeneity_reference: f64,
    homogeneity_deviation: f64,
    homogeneity_relative: bool,
    effective_length: f64,
    transverse: GridSummary,
    longitudinal: GridSummary,
}

fn load_geometry(path: Option<&Path>, configured: &Option<ElectrodeGeometry2D>, fallback: ElectrodeGeometry2D) -> Result<ElectrodeGeometry2D> {
    match (path, configured) {
        (Some(p), _) => io::read_json(p),
        (None, Some(g)) => Ok(g.clone()),
        (None, None) => Ok(fallback),
    }
}

fn field(
    cfg: &RunConfig,
    tol: Option<f64>,
    transverse: Option<&Path>,
    longitudinal: Option<&Path>,
    spacing: Option<f64>,
    out: Option<&Path>,
) -> CliResult {
    let fs = &cfg.field_solver;
    let u = cfg.field.reference_voltage;
    let opts = SolverOptions {
        tol: tol.unwrap_or(fs.tol),
        max_iterations: fs.max_iterations,
        ..SolverOptions::default()
    };
    let tg = load_geometry(transverse, &fs.transverse, ElectrodeGeometry2D::surrogate_transverse(u))?;
    let lg = load_geometry(
        longitudinal,
        &fs.longitudinal,
        ElectrodeGeometry2D::surrogate_longitudinal(u, fs.electrode_length_m),
    )?;
    let grid = solve_potential(&tg, spacing.unwrap_or(fs.spacing_m), &opts)?;
    let probe = fs.probe;
    let k = gradient_product(&grid, probe)?;
    let a = [probe[0] - fs.segment_half_length_m, probe[1]];
    let b = [probe[0] + fs.segment_half_length_m, probe[1]];
    let hom: Homogeneity = homogeneity(&grid, a, b, fs.segment_samples)?;

    let lgrid = solve_potential(&lg, fs.longitudinal_spacing_m, &opts)?;
    let h = lgrid.h;
    let (z0, z1) = (lg.domain.min[1] + 5.0 * h, lg.domain.max[1] - 5.0 * h);
    let z: Vec<f64> = range_values(z0, z1, h)?;
    let profile = longitudinal_profile(&lgrid, probe[0], &z)?;
    let d_eff = effective_length(&z, &profile)?;

    let report = FieldReport {
        probe,
        grad_product: k,
        homogeneity_reference: hom.reference,
        homogeneity_deviation: hom.deviation,
        homogeneity_relative: hom.relative,
        effective_length: d_eff,
        transverse: (&grid).into(),
        longitudinal: (&lgrid).into(),
    };
    println!("(E.grad)E_x at ({:e}, {:e}) m: {:.6e} V^2/m^3", probe[0], probe[1], k);
    if hom.relative {
        println!("homogeneity over +/-{:e} m: {:.4}% relative", fs.segment_half_length_m, 100.0 * hom.deviation);
    } else {
        println!("homogeneity over +/-{:e} m: {:.3e} V^2/m^3 absolute", fs.segment_half_length_m, hom.deviation);
    }
    println!("effective length: {:.6} m", d_eff);
    if let Some(o) = out {
        io::write_json(&o.join("field_report.json"), &report)?;
        std::fs::create_dir_all(o).map_err(|e| Error::Io { path: o.to_path_buf(), source: e })?;
        grid.write_field_map(&o.join("field_map.txt"))?;
        let rows: Vec<(f64, f64)> = z.iter().copied().zip(profile).collect();
        io::write_two_column(&o.join("longitudinal_profile.txt"), &["z_m E_squared_V2_per_m2"], &rows)?;
    }
    Ok(())
}

fn budget(cfg: &RunConfig, max_shift_nm: Option<f64>, terms: &[String], out: Option<&Path>) -> CliResult {
    let mut relative = cfg.systematics.relative.clone();
    for t in terms {
        let (name, value) = t
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--term expects NAME=VALUE, got '{t}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--term {name}: '{value}' is not a number")))?;
        relative.insert(name.trim().to_string(), value);
    }
    if !relative.contains_key("resolution") {
        let max_shift = match max_shift_nm {
            Some(nm) => nm * 1e-9,
            None => cfg.systematics.max_shift_m.unwrap_or(3.0 * cfg.geometry.grating_period),
        };
        if !(max_shift > 0.0) {
            return Err(Error::Config(format!("maximum shift must be > 0, got {max_shift}")).into());
        }
        relative.insert("resolution".into(), cfg.systematics.resolution_m / max_shift);
    }
    let b = systematic_budget(&cfg.geometry, relative.iter().map(|(k, v)| (k.as_str(), *v)))?;
    emit(out, "budget.txt", &format!("{b}\n"))?;
    if let Some(o) = out {
        io::write_json(&o.join("budget.json"), &b)?;
    }
    Ok(())
}
