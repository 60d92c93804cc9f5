//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Integrands are complex-valued so that the phasor integrals of the signal
//! model and plain real integrals share one code path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of equal panels each breakpoint interval starts with.
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            initial_panels: 8,
            max_panels: 20_000,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_initial_panels(mut self, n: usize) -> Self {
        self.initial_panels = n.max(1);
        self
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let sum = f(c - dx) + f(c + dx);
        kron += sum * WGK[j];
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    Panel {
        a,
        b,
        value: kron * h,
        error: ((kron - gauss) * h).norm(),
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, never straddling an
/// interior breakpoint with a single panel.
pub fn integrate_complex<F>(mut f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Complex64>
where
    F: FnMut(f64) -> Complex64,
{
    if breaks.len() < 2 {
        return Err(Error::Domain("quadrature needs at least two breakpoints".into()));
    }
    if breaks.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain("quadrature breakpoints must be sorted".into()));
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let n = cfg.initial_panels.max(1);
        let step = (w[1] - w[0]) / n as f64;
        for i in 0..n {
            let a = w[0] + step * i as f64;
            let b = if i + 1 == n { w[1] } else { a + step };
            heap.push(kronrod(&mut f, a, b));
        }
    }
    loop {
        let (value, error) = heap
            .iter()
            .fold((Complex64::new(0.0, 0.0), 0.0), |(v, e), p| (v + p.value, e + p.error));
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.norm()) {
            return Ok(value);
        }
        if heap.len() >= cfg.max_panels {
            return Err(Error::NumericFailure(format!(
                "quadrature did not converge: error estimate {error:.3e} after {} panels",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::NumericFailure(
                "quadrature panel shrank below floating-point resolution".into(),
            ));
        }
        heap.push(kronrod(&mut f, worst.a, mid));
        heap.push(kronrod(&mut f, mid, worst.b));
    }
}

pub fn integrate<F>(mut f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_complex(|x| Complex64::new(f(x), 0.0), breaks, cfg).map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        // K15 integrates degree 22 exactly.
        let cfg = QuadratureConfig::default();
        let v = integrate(|x| x.powi(6) - 3.0 * x, &[0.0, 2.0], &cfg).unwrap();
        assert!((v - (128.0 / 7.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_phasor() {
        let cfg = QuadratureConfig::default();
        let k = 40.0;
        let v = integrate_complex(|x| Complex64::new(0.0, k * x).exp(), &[0.0, 1.0], &cfg).unwrap();
        let exact = (Complex64::new(0.0, k).exp() - 1.0) / Complex64::new(0.0, k);
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn sharp_peak_is_refined() {
        let cfg = QuadratureConfig::default();
        let s: f64 = 1e-3;
        let v = integrate(|x| (-(x - 0.3).powi(2) / (2.0 * s * s)).exp(), &[0.0, 1.0], &cfg).unwrap();
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn cap_reports_failure() {
        let cfg = QuadratureConfig {
            max_panels: 4,
            ..Default::default()
        };
        let r = integrate(|x| (1.0 / x).sin(), &[1e-6, 1.0], &cfg);
        assert!(matches!(r, Err(Error::NumericFailure(_))));
    }

    #[test]
    fn unsorted_breaks_rejected() {
        let cfg = QuadratureConfig::default();
        assert!(integrate(|x| x, &[1.0, 0.0], &cfg).is_err());
    }
}
