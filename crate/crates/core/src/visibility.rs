//! Velocity-resolved fringe visibility V(v).
//!
//! Between nodes the curve is a monotone piecewise-cubic Hermite
//! interpolant (Fritsch–Butland slopes, as in the usual PCHIP). Each cubic
//! piece stays between its two node values, so a curve with node values in
//! [0, 1] never leaves [0, 1]. Outside the grid the end values are held.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct VisibilityCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawCurve> for VisibilityCurve {
    type Error = Error;
    fn try_from(raw: RawCurve) -> Result<Self> {
        VisibilityCurve::new(raw.grid, raw.values)
    }
}

impl From<VisibilityCurve> for RawCurve {
    fn from(c: VisibilityCurve) -> Self {
        RawCurve {
            grid: c.grid,
            values: c.values,
        }
    }
}

impl VisibilityCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::Domain(format!(
                "visibility curve needs matching non-empty grid and values ({} vs {})",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::Domain("visibility grid must increase strictly".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::Domain(format!("visibility {bad} outside [0, 1]")));
        }
        let slopes = pchip_slopes(&grid, &values);
        Ok(Self {
            grid,
            values,
            slopes,
        })
    }

    /// The same visibility at every velocity.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![value])
    }

    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&v| f(v)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.grid.len();
        if n == 1 || v <= self.grid[0] {
            return self.values[0];
        }
        if v >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let i = self.grid.partition_point(|&x| x <= v).clamp(1, n - 1) - 1;
        let h = self.grid[i + 1] - self.grid[i];
        let t = (v - self.grid[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![0.0];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

// One-sided three-point estimate, limited to keep the end piece monotone.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
