//! Derived field quantities: (E·∇)E_x, effective length, homogeneity.

use crate::error::{Error, Result};

use super::geometry::Point;
use super::solver::PotentialGrid;

/// Nodal derivatives (Φx, Φy, Φxx, Φxy) from centred differences. Every
/// node in the 3×3 block must be free.
fn nodal_derivatives(grid: &PotentialGrid, i: usize, j: usize) -> Result<[f64; 4]> {
    if i == 0 || j == 0 || i + 1 >= grid.nx || j + 1 >= grid.ny {
        return Err(too_close(grid, i, j));
    }
    for b in j - 1..=j + 1 {
        for a in i - 1..=i + 1 {
            if grid.is_fixed(a, b) {
                return Err(too_close(grid, i, j));
            }
        }
    }
    let h = grid.h;
    let v = |a: usize, b: usize| grid.value(a, b);
    let px = (v(i + 1, j) - v(i - 1, j)) / (2.0 * h);
    let py = (v(i, j + 1) - v(i, j - 1)) / (2.0 * h);
    let pxx = (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (h * h);
    let pxy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h * h);
    Ok([px, py, pxx, pxy])
}

fn too_close(grid: &PotentialGrid, i: usize, j: usize) -> Error {
    let p = grid.node(i, j);
    Error::Domain(format!(
        "probe near ({:.4e}, {:.4e}) is within 2h of an electrode or the boundary",
        p[0], p[1]
    ))
}

fn interpolate<F>(grid: &PotentialGrid, p: Point, f: F) -> Result<f64>
where
    F: Fn([f64; 4]) -> f64,
{
    let (i, j, fx, fy) = grid.cell(p)?;
    let k = |a, b| nodal_derivatives(grid, a, b).map(&f);
    Ok((1.0 - fx) * (1.0 - fy) * k(i, j)?
        + fx * (1.0 - fy) * k(i + 1, j)?
        + (1.0 - fx) * fy * k(i, j + 1)?
        + fx * fy * k(i + 1, j + 1)?)
}

/// Field vector E = −∇Φ at `p`.
pub fn electric_field(grid: &PotentialGrid, p: Point) -> Result<[f64; 2]> {
    Ok([
        interpolate(grid, p, |d| -d[0])?,
        interpolate(grid, p, |d| -d[1])?,
    ])
}

/// |E|² at `p`.
pub fn field_strength_sq(grid: &PotentialGrid, p: Point) -> Result<f64> {
    interpolate(grid, p, |d| d[0] * d[0] + d[1] * d[1])
}

/// (E·∇)E_x = Φx·Φxx + Φy·Φxy, formed at the four surrounding nodes and
/// interpolated bilinearly.
pub fn gradient_product(grid: &PotentialGrid, p: Point) -> Result<f64> {
    interpolate(grid, p, |d| d[0] * d[2] + d[1] * d[3])
}

/// |E|² sampled along the line x = `x` of a longitudinal grid. Along the
/// beam the transverse pattern only changes in strength, so this profile
/// is proportional to (E·∇)E_x.
pub fn longitudinal_profile(grid: &PotentialGrid, x: f64, z: &[f64]) -> Result<Vec<f64>> {
    z.iter().map(|&z| field_strength_sq(grid, [x, z])).collect()
}

/// Top-hat-equivalent length ∫K dz / K(z_c) of a sampled profile, with z_c
/// the midpoint of the sampled range.
pub fn effective_length(z: &[f64], k: &[f64]) -> Result<f64> {
    if z.len() != k.len() || z.len() < 3 {
        return Err(Error::InsufficientData(
            "profile needs at least 3 matching samples".into(),
        ));
    }
    if z.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("profile positions must increase strictly".into()));
    }
    let peak = k.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::Domain("profile is identically zero".into()));
    }
    let (first, last) = (k[0].abs(), k[k.len() - 1].abs());
    if first > 0.01 * peak || last > 0.01 * peak {
        return Err(Error::Domain(format!(
            "profile ends at {:.2}% / {:.2}% of its peak; widen the box",
            100.0 * first / peak,
            100.0 * last / peak
        )));
    }
    let area: f64 = z
        .windows(2)
        .zip(k.windows(2))
        .map(|(zw, kw)| 0.5 * (zw[1] - zw[0]) * (kw[0] + kw[1]))
        .sum();
    let zc = 0.5 * (z[0] + z[z.len() - 1]);
    let s = z.partition_point(|&v| v <= zc).clamp(1, z.len() - 1);
    let t = (zc - z[s - 1]) / (z[s] - z[s - 1]);
    let kc = k[s - 1] + t * (k[s] - k[s - 1]);
    if kc == 0.0 {
        return Err(Error::Domain("profile vanishes at its centre".into()));
    }
    Ok(area / kc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homogeneity {
    /// (E·∇)E_x at the segment midpoint.
    pub reference: f64,
    /// max |K − reference|, relative to |reference| unless `relative` is false.
    pub deviation: f64,
    pub relative: bool,
}

/// Spread of (E·∇)E_x along the segment a→b, sampled at `samples` points.
///
/// When the reference value sits at the discretisation floor, taken as
/// 1e-6·|E|²/h, the deviation is reported in absolute units.
pub fn homogeneity(grid: &PotentialGrid, a: Point, b: Point, samples: usize) -> Result<Homogeneity> {
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let reference = gradient_product(grid, mid)?;
    let n = if a == b { 1 } else { samples.max(2) };
    let mut worst = 0.0_f64;
    for s in 0..n {
        let t = if n == 1 { 0.5 } else { s as f64 / (n - 1) as f64 };
        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        worst = worst.max((gradient_product(grid, p)? - reference).abs());
    }
    let floor = 1e-6 * field_strength_sq(grid, mid)? / grid.h;
    if reference.abs() <= floor {
        Ok(Homogeneity {
            reference,
            deviation: worst,
            relative: false,
        })
    } else {
        Ok(Homogeneity {
            reference,
            deviation: worst / reference.abs(),
            relative: true,
        })
    }
}
