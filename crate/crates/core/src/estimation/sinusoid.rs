//! Fringe parameters from a grating scan.
//!
//! The period is known (it equals the grating period), so the model
//! `a + b cos(kx) + c sin(kx)` is linear in its coefficients and is solved
//! by weighted least squares with Poisson variances max(count, 1). It maps
//! onto `a (1 + V cos(k x − φ))` with V = √(b² + c²)/a and φ = atan2(c, b).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::scan::FringeScan;

const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanFit {
    /// Mean counts per point.
    pub offset: f64,
    pub visibility: f64,
    /// Radians in (−π, π].
    pub phase: f64,
    /// Covariance of (offset, visibility, phase).
    pub covariance: [[f64; 3]; 3],
}

impl ScanFit {
    pub fn phase_variance(&self) -> f64 {
        self.covariance[2][2]
    }

    pub fn visibility_std(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

pub fn fit_sinusoid(scan: &FringeScan, grating_period: f64) -> Result<ScanFit> {
    scan.validate()?;
    let n = scan.positions.len();
    if n < MIN_POINTS {
        return Err(Error::Fit(format!(
            "scan {}: {n} points, need at least {MIN_POINTS}",
            scan.sequence
        )));
    }
    let span = scan.positions[n - 1] - scan.positions[0];
    let mean_step = span / (n - 1) as f64;
    if span + mean_step < grating_period * (1.0 - 1e-9) {
        return Err(Error::Fit(format!(
            "scan {}: covers {:.1} nm, less than one period of {:.1} nm",
            scan.sequence,
            (span + mean_step) * 1e9,
            grating_period * 1e9
        )));
    }
    let k = 2.0 * std::f64::consts::PI / grating_period;
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&x, &c) in scan.positions.iter().zip(&scan.counts) {
        let row = Vector3::new(1.0, (k * x).cos(), (k * x).sin());
        let w = 1.0 / c.max(1.0);
        normal += row * row.transpose() * w;
        rhs += row * (c * w);
    }
    let cov_lin = normal
        .cholesky()
        .filter(|ch| {
            let d = ch.l().diagonal();
            d.min() > 1e-10 * d.max()
        })
        .ok_or_else(|| Error::Fit(format!("scan {}: rank-deficient design", scan.sequence)))?
        .inverse();
    let p = cov_lin * rhs;
    let (a, b, c) = (p[0], p[1], p[2]);
    if !(a > 0.0) {
        return Err(Error::Fit(format!(
            "scan {}: non-positive fitted offset {a}",
            scan.sequence
        )));
    }
    let r = b.hypot(c);
    let mut visibility = r / a;
    if visibility > 1.0 {
        log::warn!(
            "scan {}: fitted visibility {visibility:.4} exceeds 1, clipped",
            scan.sequence
        );
        visibility = 1.0;
    }
    let phase = c.atan2(b);

    // Linear error propagation (a, b, c) -> (a, V, φ).
    let jac = if r > 0.0 {
        Matrix3::new(
            1.0,
            0.0,
            0.0,
            -r / (a * a),
            b / (a * r),
            c / (a * r),
            0.0,
            -c / (r * r),
            b / (r * r),
        )
    } else {
        // Phase undefined: report an uninformative variance.
        Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0 / a, 0.0, 0.0, 0.0, 0.0)
    };
    let cov = jac * cov_lin * jac.transpose();
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
        }
    }
    if r == 0.0 {
        covariance[2][2] = std::f64::consts::PI.powi(2) / 3.0;
    }
    Ok(ScanFit {
        offset: a,
        visibility,
        phase,
        covariance,
    })
}
