//! Molecular velocity distributions.
//!
//! Widths follow the 1/e² convention: a relative width σ_v puts the points
//! where the density has fallen to 1/e² of its peak at v̄(1 ± σ_v), so the
//! Gaussian standard deviation is s = σ_v·v̄/2.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Gaussian tails are integrated out to this many standard deviations.
const SUPPORT_SIGMAS: f64 = 10.0;
/// Mass outside ±6 s is below 2·10⁻⁹.
const EFFECTIVE_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum VelocityDistribution {
    Gaussian { mean_v: f64, rel_width: f64 },
    Tabulated { table: TabulatedVelocity },
}

impl VelocityDistribution {
    pub fn gaussian(mean_v: f64, rel_width: f64) -> Result<Self> {
        let d = VelocityDistribution::Gaussian { mean_v, rel_width };
        d.validate()?;
        Ok(d)
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Result<Self> {
        Ok(VelocityDistribution::Tabulated {
            table: TabulatedVelocity::try_from(table)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            VelocityDistribution::Gaussian { mean_v, rel_width } => {
                if !(mean_v > 0.0 && mean_v.is_finite()) {
                    return Err(Error::Domain(format!("mean velocity must be > 0, got {mean_v}")));
                }
                if !(rel_width > 0.0 && rel_width < 0.5) {
                    return Err(Error::Domain(format!(
                        "relative width must lie in (0, 0.5), got {rel_width}"
                    )));
                }
                Ok(())
            }
            VelocityDistribution::Tabulated { .. } => Ok(()),
        }
    }

    pub fn mean_v(&self) -> f64 {
        match self {
            VelocityDistribution::Gaussian { mean_v, .. } => *mean_v,
            VelocityDistribution::Tabulated { table } => table.mean,
        }
    }

    /// Relative 1/e² half-width; for tables, twice the relative standard deviation.
    pub fn rel_width(&self) -> f64 {
        match self {
            VelocityDistribution::Gaussian { rel_width, .. } => *rel_width,
            VelocityDistribution::Tabulated { table } => 2.0 * table.std_dev / table.mean,
        }
    }

    /// Probability density in s/m. Zero for v ≤ 0 and outside a table.
    pub fn density(&self, v: f64) -> f64 {
        if !(v > 0.0) {
            return 0.0;
        }
        match *self {
            VelocityDistribution::Gaussian { mean_v, rel_width } => {
                let s = 0.5 * rel_width * mean_v;
                let z = (v - mean_v) / s;
                (-0.5 * z * z).exp() / gaussian_norm(mean_v, s)
            }
            VelocityDistribution::Tabulated { ref table } => table.eval(v),
        }
    }

    /// Integration breakpoints covering the whole support.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            VelocityDistribution::Gaussian { mean_v, rel_width } => {
                let s = 0.5 * rel_width * mean_v;
                let mut b: Vec<f64> = [-SUPPORT_SIGMAS, -3.0, -1.0, 0.0, 1.0, 3.0, SUPPORT_SIGMAS]
                    .iter()
                    .map(|k| mean_v + k * s)
                    .filter(|&v| v > 0.0)
                    .collect();
                if mean_v - SUPPORT_SIGMAS * s <= 0.0 {
                    b.insert(0, 0.0);
                }
                b
            }
            VelocityDistribution::Tabulated { ref table } => table.nodes.clone(),
        }
    }

    /// Range holding all but a negligible fraction of the probability mass.
    pub fn effective_support(&self) -> (f64, f64) {
        match *self {
            VelocityDistribution::Gaussian { mean_v, rel_width } => {
                let s = 0.5 * rel_width * mean_v;
                (
                    (mean_v - EFFECTIVE_SIGMAS * s).max(0.0),
                    mean_v + EFFECTIVE_SIGMAS * s,
                )
            }
            VelocityDistribution::Tabulated { ref table } => {
                (table.nodes[0], *table.nodes.last().expect("table has nodes"))
            }
        }
    }

    /// Distribution with mean and width scaled by the given factors.
    pub fn perturbed(&self, mean_factor: f64, width_factor: f64) -> Result<Self> {
        match *self {
            VelocityDistribution::Gaussian { mean_v, rel_width } => {
                Self::gaussian(mean_v * mean_factor, rel_width * width_factor)
            }
            VelocityDistribution::Tabulated { .. } => Err(Error::Domain(
                "perturbation is defined for gaussian distributions only".into(),
            )),
        }
    }
}

/// ∫₀^∞ exp(−(v−v̄)²/2s²) dv.
fn gaussian_norm(mean_v: f64, s: f64) -> f64 {
    s * (2.0 * PI).sqrt() * 0.5 * erfc(-mean_v / (s * std::f64::consts::SQRT_2))
}

/// Piecewise-linear density through tabulated nodes, renormalized to unit area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct TabulatedVelocity {
    nodes: Vec<f64>,
    density: Vec<f64>,
    mean: f64,
    std_dev: f64,
}

impl TabulatedVelocity {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn eval(&self, v: f64) -> f64 {
        let n = &self.nodes;
        if v < n[0] || v > n[n.len() - 1] {
            return 0.0;
        }
        let i = n.partition_point(|&x| x <= v).clamp(1, n.len() - 1);
        let t = (v - n[i - 1]) / (n[i] - n[i - 1]);
        self.density[i - 1] + t * (self.density[i] - self.density[i - 1])
    }
}

impl TryFrom<Vec<(f64, f64)>> for TabulatedVelocity {
    type Error = Error;

    fn try_from(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::Domain("velocity table needs at least two rows".into()));
        }
        if table[0].0 < 0.0 {
            return Err(Error::Domain("tabulated velocities must be >= 0".into()));
        }
        if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Domain("tabulated velocities must increase strictly".into()));
        }
        if table.iter().any(|r| !(r.1 >= 0.0 && r.1.is_finite())) {
            return Err(Error::Domain("tabulated densities must be finite and >= 0".into()));
        }
        // Exact moments of the piecewise-linear interpolant.
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for w in table.windows(2) {
            let ((a, fa), (b, fb)) = (w[0], w[1]);
            let h = b - a;
            m0 += 0.5 * h * (fa + fb);
            // ∫ v f dv and ∫ v² f dv over a linear segment, with f = fa + (fb-fa)(v-a)/h.
            m1 += h / 6.0 * (fa * (2.0 * a + b) + fb * (a + 2.0 * b));
            m2 += h / 12.0
                * (fa * (3.0 * a * a + 2.0 * a * b + b * b) + fb * (a * a + 2.0 * a * b + 3.0 * b * b));
        }
        if !(m0 > 0.0) {
            return Err(Error::Domain("velocity table has zero total weight".into()));
        }
        let mean = m1 / m0;
        let var = (m2 / m0 - mean * mean).max(0.0);
        Ok(Self {
            nodes: table.iter().map(|r| r.0).collect(),
            density: table.iter().map(|r| r.1 / m0).collect(),
            mean,
            std_dev: var.sqrt(),
        })
    }
}

impl From<TabulatedVelocity> for Vec<(f64, f64)> {
    fn from(t: TabulatedVelocity) -> Self {
        t.nodes.into_iter().zip(t.density).collect()
    }
}
