//! Recovery of V(v) from visibilities measured with broad velocity
//! distributions.
//!
//! Each measurement is a first-kind integral `V_k = ∫ f_k(v) V(v) dv`.
//! V is discretized on a velocity grid with piecewise-linear hat functions
//! (the first and last held constant beyond the grid), which turns the
//! integrals into a matrix K. The node values minimize
//!
//! ```text
//! Σ_k (K V − V_meas)_k² / σ_k²  +  λ Σ_j (slope_{j+1} − slope_j)²
//! ```
//!
//! subject to 0 ≤ V ≤ 1. Constants and straight lines are not penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distribution::VelocityDistribution;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::signal::forward_visibility;
use crate::visibility::VisibilityCurve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMeasurement {
    pub distribution: VelocityDistribution,
    pub visibility: f64,
    /// One standard deviation.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    /// Pick λ so that the weighted misfit equals the number of measurements.
    Discrepancy,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvolutionOptions {
    pub regularization: Regularization,
    pub quadrature: QuadratureConfig,
}

impl Default for DeconvolutionOptions {
    fn default() -> Self {
        Self {
            regularization: Regularization::Discrepancy,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deconvolution {
    pub curve: VisibilityCurve,
    /// λ actually used.
    pub lambda: f64,
    /// Weighted misfit of the discretized solution.
    pub chi_squared: f64,
    /// Forward-mapped curve minus measurement, per measurement.
    pub residuals: Vec<f64>,
}

const MIN_MEASUREMENTS: usize = 3;

pub fn deconvolve_visibility(
    measurements: &[VisibilityMeasurement],
    grid: &[f64],
    options: &DeconvolutionOptions,
) -> Result<Deconvolution> {
    if measurements.len() < MIN_MEASUREMENTS {
        return Err(Error::InsufficientData(format!(
            "deconvolution needs at least {MIN_MEASUREMENTS} measurements, got {}",
            measurements.len()
        )));
    }
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "velocity grid needs at least 3 strictly increasing nodes".into(),
        ));
    }
    for m in measurements {
        m.distribution.validate()?;
        if !(m.uncertainty > 0.0) {
            return Err(Error::Domain(format!(
                "measurement uncertainty must be > 0, got {}",
                m.uncertainty
            )));
        }
        let (lo, hi) = m.distribution.effective_support();
        if lo < grid[0] || hi > grid[grid.len() - 1] {
            return Err(Error::Domain(format!(
                "grid [{}, {}] does not cover distribution support [{lo:.2}, {hi:.2}]",
                grid[0],
                grid[grid.len() - 1]
            )));
        }
    }

    let kernel = kernel_matrix(measurements, grid, &options.quadrature)?;
    let weights = DVector::from_iterator(
        measurements.len(),
        measurements.iter().map(|m| 1.0 / (m.uncertainty * m.uncertainty)),
    );
    let data = DVector::from_iterator(measurements.len(), measurements.iter().map(|m| m.visibility));
    let penalty = curvature_operator(grid);

    let sqrt_w = weights.map(f64::sqrt);
    let weighted_kernel = DMatrix::from_diagonal(&sqrt_w) * &kernel;
    let weighted_data = data.component_mul(&sqrt_w);
    let (m, n) = (measurements.len(), grid.len());

    // Stacked least squares [√W K; √λ D] V ≈ [√W d; 0], solved without
    // forming normal equations.
    let solve = |lambda: f64| -> Result<(DVector<f64>, f64)> {
        let mut stacked = DMatrix::zeros(m + penalty.nrows(), n);
        stacked.rows_mut(0, m).copy_from(&weighted_kernel);
        stacked
            .rows_mut(m, penalty.nrows())
            .copy_from(&(&penalty * lambda.sqrt()));
        let mut target = DVector::zeros(m + penalty.nrows());
        target.rows_mut(0, m).copy_from(&weighted_data);
        let x = box_constrained_lsq(&stacked, &target)?;
        let r = &kernel * &x - &data;
        let chi2 = r.iter().zip(weights.iter()).map(|(r, w)| r * r * w).sum();
        Ok((x, chi2))
    };

    let lambda = match options.regularization {
        Regularization::Fixed(l) if l > 0.0 && l.is_finite() => l,
        Regularization::Fixed(l) => {
            return Err(Error::Domain(format!("regularization strength must be > 0, got {l}")))
        }
        Regularization::Discrepancy => {
            let scale = weighted_kernel.norm_squared() / penalty.norm_squared();
            let target = measurements.len() as f64;
            let (mut lo, mut hi) = ((1e-12 * scale).ln(), (1e12 * scale).ln());
            if solve(lo.exp())?.1 >= target {
                lo.exp()
            } else if solve(hi.exp())?.1 <= target {
                hi.exp()
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if solve(mid.exp())?.1 > target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                lo.exp()
            }
        }
    };

    let (x, chi_squared) = solve(lambda)?;
    let values: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let curve = VisibilityCurve::new(grid.to_vec(), values)?;
    let residuals = measurements
        .iter()
        .map(|m| Ok(forward_visibility(&m.distribution, &curve, &options.quadrature)? - m.visibility))
        .collect::<Result<Vec<_>>>()?;
    Ok(Deconvolution {
        curve,
        lambda,
        chi_squared,
        residuals,
    })
}

/// K[k][j] = ∫ f_k(v) φ_j(v) dv with hat functions φ_j on `grid`.
fn kernel_matrix(
    measurements: &[VisibilityMeasurement],
    grid: &[f64],
    quadrature: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    let n = grid.len();
    let mut k = DMatrix::zeros(measurements.len(), n);
    for (row, m) in measurements.iter().enumerate() {
        let dist = &m.distribution;
        let dist_breaks = dist.breakpoints();
        let (s_lo, s_hi) = (dist_breaks[0], dist_breaks[dist_breaks.len() - 1]);
        for j in 0..n {
            let lo = if j == 0 { f64::NEG_INFINITY } else { grid[j - 1] };
            let hi = if j == n - 1 { f64::INFINITY } else { grid[j + 1] };
            let (a, b) = (lo.max(s_lo), hi.min(s_hi));
            if !(b > a) {
                continue;
            }
            let mut breaks: Vec<f64> = dist_breaks
                .iter()
                .copied()
                .chain([grid[j]])
                .filter(|&v| v > a && v < b)
                .collect();
            breaks.push(a);
            breaks.push(b);
            breaks.sort_by(f64::total_cmp);
            let hat = |v: f64| {
                if v <= grid[j] {
                    if j == 0 {
                        1.0
                    } else {
                        (v - grid[j - 1]) / (grid[j] - grid[j - 1])
                    }
                } else if j == n - 1 {
                    1.0
                } else {
                    (grid[j + 1] - v) / (grid[j + 1] - grid[j])
                }
            };
            k[(row, j)] = integrate(|v| dist.density(v) * hat(v), &breaks, quadrature)?;
        }
    }
    Ok(k)
}

/// Differences of consecutive slopes; annihilates straight lines on any grid.
fn curvature_operator(grid: &[f64]) -> DMatrix<f64> {
    let n = grid.len();
    let mut d = DMatrix::zeros(n - 2, n);
    for i in 0..n - 2 {
        let h0 = grid[i + 1] - grid[i];
        let h1 = grid[i + 2] - grid[i + 1];
        // Dimensionless: scale by the mean spacing of the two cells.
        let s = 0.5 * (h0 + h1);
        d[(i, i)] = s / h0;
        d[(i, i + 1)] = -s / h0 - s / h1;
        d[(i, i + 2)] = s / h1;
    }
    d
}

/// Minimizes ‖Mx − y‖² over the unit box with a primal active-set method:
/// the iterate stays feasible, and a step towards the subspace minimizer is
/// cut short at the first bound it would cross.
fn box_constrained_lsq(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = m.ncols();
    let mut free = vec![true; n];
    let mut x = DVector::from_element(n, 0.5);
    let tol = 1e-10 * (1.0 + (m.transpose() * y).amax());
    for _ in 0..(10 * n + 20) {
        let z = subspace_minimizer(m, y, &x, &free)?;
        // Largest feasible fraction of the step x -> z.
        let mut t = 1.0;
        let mut blocking = None;
        for i in (0..n).filter(|&i| free[i]) {
            let d = z[i] - x[i];
            let limit = if d < 0.0 {
                x[i] / -d
            } else if d > 0.0 {
                (1.0 - x[i]) / d
            } else {
                f64::INFINITY
            };
            if limit < t {
                t = limit;
                blocking = Some(i);
            }
        }
        for i in (0..n).filter(|&i| free[i]) {
            x[i] += t * (z[i] - x[i]);
        }
        if let Some(i) = blocking {
            x[i] = if z[i] < x[i] { 0.0 } else { 1.0 };
            free[i] = false;
            continue;
        }
        // Subspace optimum reached; release the most violated bound, if any.
        let grad = m.transpose() * (m * &x - y);
        let worst = (0..n)
            .filter(|&i| !free[i])
            .filter_map(|i| {
                let pull = if x[i] == 0.0 { -grad[i] } else { grad[i] };
                (pull > tol).then_some((i, pull))
            })
            .max_by(|p, q| p.1.total_cmp(&q.1));
        match worst {
            Some((i, _)) => free[i] = true,
            None => return Ok(x),
        }
    }
    Err(Error::NumericFailure(
        "bounded least squares did not settle on an active set".into(),
    ))
}

/// Least-squares minimizer over the free coordinates, others held fixed.
fn subspace_minimizer(
    m: &DMatrix<f64>,
    y: &DVector<f64>,
    x: &DVector<f64>,
    free: &[bool],
) -> Result<DVector<f64>> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| free[i]).collect();
    let mut z = x.clone();
    if idx.is_empty() {
        return Ok(z);
    }
    let mut rhs = y.clone();
    for j in (0..x.len()).filter(|&j| !free[j]) {
        rhs.axpy(-x[j], &m.column(j), 1.0);
    }
    let sub = m.select_columns(&idx);
    let sol = sub
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NumericFailure(format!("deconvolution solve failed: {e}")))?;
    for (p, &i) in idx.iter().enumerate() {
        z[i] = sol[p];
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernels() -> Vec<VelocityDistribution> {
        (0..8)
            .map(|i| {
                let t = i as f64 / 7.0;
                VelocityDistribution::gaussian(100.0 + 100.0 * t, 0.07 + 0.09 * t).unwrap()
            })
            .collect()
    }

    fn grid() -> Vec<f64> {
        (0..=60).map(|i| 40.0 + 5.0 * i as f64).collect()
    }

    fn data(truth: &VisibilityCurve, sigma: f64) -> Vec<VisibilityMeasurement> {
        let q = QuadratureConfig::default();
        kernels()
            .into_iter()
            .map(|d| VisibilityMeasurement {
                visibility: forward_visibility(&d, truth, &q).unwrap(),
                distribution: d,
                uncertainty: sigma,
            })
            .collect()
    }

    #[test]
    fn constant_is_recovered_for_any_lambda() {
        let truth = VisibilityCurve::constant(0.4).unwrap();
        let meas = data(&truth, 0.01);
        for lambda in [1e-6, 1e-3, 1.0, 1e3] {
            let opts = DeconvolutionOptions {
                regularization: Regularization::Fixed(lambda),
                ..Default::default()
            };
            let r = deconvolve_visibility(&meas, &grid(), &opts).unwrap();
            for v in r.curve.values() {
                assert!((v - 0.4).abs() < 1e-6, "lambda {lambda}: {v}");
            }
            for res in &r.residuals {
                assert!(res.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn duplicates_equal_combined_weight() {
        let truth = VisibilityCurve::from_fn(grid(), |v| 0.2 + 0.1 * (v / 50.0).sin()).unwrap();
        let mut meas = data(&truth, 0.01);
        meas[2].visibility += 0.01;
        let opts = DeconvolutionOptions {
            regularization: Regularization::Fixed(0.5),
            ..Default::default()
        };
        let mut dup = meas.clone();
        dup.push(meas[0].clone());
        let mut single = meas.clone();
        single[0].uncertainty /= 2f64.sqrt();
        let a = deconvolve_visibility(&dup, &grid(), &opts).unwrap();
        let b = deconvolve_visibility(&single, &grid(), &opts).unwrap();
        for (x, y) in a.curve.values().iter().zip(b.curve.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_measurements() {
        let truth = VisibilityCurve::constant(0.4).unwrap();
        let meas = data(&truth, 0.01);
        let r = deconvolve_visibility(&meas[..2], &grid(), &DeconvolutionOptions::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn grid_must_cover_support() {
        let truth = VisibilityCurve::constant(0.4).unwrap();
        let meas = data(&truth, 0.01);
        let short: Vec<f64> = (0..=20).map(|i| 100.0 + 5.0 * i as f64).collect();
        let r = deconvolve_visibility(&meas, &short, &DeconvolutionOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn bounds_are_respected() {
        // Data that wants V above 1 on one side.
        let truth = VisibilityCurve::from_fn(grid(), |v| (0.5 + (v - 150.0) / 80.0).clamp(0.0, 1.0)).unwrap();
        let mut meas = data(&truth, 0.005);
        for m in meas.iter_mut().skip(6) {
            m.visibility = (m.visibility + 0.1).min(1.0);
        }
        let opts = DeconvolutionOptions {
            regularization: Regularization::Fixed(1e-3),
            ..Default::default()
        };
        let r = deconvolve_visibility(&meas, &grid(), &opts);
        let r = r.unwrap();
        assert!(r.curve.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic() {
        let truth = VisibilityCurve::from_fn(grid(), |v| 0.3 + 0.1 * ((v - 150.0) / 40.0).tanh()).unwrap();
        let meas = data(&truth, 0.003);
        let a = deconvolve_visibility(&meas, &grid(), &DeconvolutionOptions::default()).unwrap();
        let b = deconvolve_visibility(&meas, &grid(), &DeconvolutionOptions::default()).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.lambda, b.lambda);
    }
}
