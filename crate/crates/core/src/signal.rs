//! Velocity-averaged interference signal.
//!
//! Every velocity class contributes a sinusoid `1 + V(v) cos(k(x − Δs(v)))`
//! with k = 2π/g. Weighted by the velocity density these add up to a single
//! sinusoid of the same period,
//!
//! ```text
//! ∫ f(v) [1 + V(v) cos(k(x − Δs(v)))] dv = 1 + |A| cos(k x − arg A),
//! A = ∫ f(v) V(v) exp(i k Δs(v)) dv,
//! ```
//!
//! because `V cos(kx − θ) = Re[V e^{iθ} e^{−ikx}]` and the integral is linear.
//! The averaged visibility is |A| and the averaged shift is arg(A)/k. The
//! argument is only known modulo 2π; it is continued from U = 0, where A is
//! real and non-negative, along increasing U².

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distribution::VelocityDistribution;
use crate::error::{Error, Result};
use crate::model::Deflectometer;
use crate::quadrature::{integrate, integrate_complex, QuadratureConfig};
use crate::visibility::VisibilityCurve;

/// Largest phase advance of the mean velocity class per continuation step.
const CONTINUATION_STEP: f64 = FRAC_PI_4;
const MAX_BISECTIONS: u32 = 24;

/// Averaged fringe parameters of the velocity-integrated pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternMoments {
    pub mean_visibility: f64,
    /// Metres along +x.
    pub mean_shift: f64,
    /// Mean of the normalized signal over one period.
    pub mean_offset: f64,
}

/// Deflectometer plus the numerical settings used to average over velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub setup: Deflectometer,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

impl SignalModel {
    pub fn new(setup: Deflectometer) -> Self {
        Self {
            setup,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureConfig) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn grating_period(&self) -> f64 {
        self.setup.grating_period()
    }

    fn breaks(&self, dist: &VelocityDistribution, vis: &VisibilityCurve) -> Vec<f64> {
        merged_breaks(dist, vis)
    }

    /// A = ∫ f V exp(i k Δs(v)) dv for a given shift coefficient Δs·v².
    fn phasor_at(
        &self,
        coefficient: f64,
        dist: &VelocityDistribution,
        vis: &VisibilityCurve,
        breaks: &[f64],
    ) -> Result<Complex64> {
        let k = self.setup.geometry.wavenumber();
        integrate_complex(
            |v| {
                let w = dist.density(v);
                if w == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::from_polar(w * vis.eval(v), k * coefficient / (v * v))
            },
            breaks,
            &self.quadrature,
        )
    }

    /// Averaged visibility and shift at one voltage.
    pub fn phasor_moments(
        &self,
        alpha_vol: f64,
        voltage: f64,
        dist: &VelocityDistribution,
        vis: &VisibilityCurve,
    ) -> Result<PatternMoments> {
        Ok(self.phasor_series(alpha_vol, &[voltage], dist, vis)?[0])
    }

    /// Averaged visibility and shift for several voltages, in input order.
    ///
    /// The phase of A is tracked by continuation in U², so a single pass
    /// serves all voltages.
    pub fn phasor_series(
        &self,
        alpha_vol: f64,
        voltages: &[f64],
        dist: &VelocityDistribution,
        vis: &VisibilityCurve,
    ) -> Result<Vec<PatternMoments>> {
        dist.validate()?;
        if let Some(u) = voltages.iter().find(|u| !(**u >= 0.0)) {
            return Err(Error::Domain(format!("voltage must be >= 0, got {u}")));
        }
        let breaks = self.breaks(dist, vis);
        let k = self.setup.geometry.wavenumber();
        // Shift coefficient per V².
        let coef_per_u2 = self.setup.shift_coefficient(alpha_vol, 1.0)?;
        let v_mean = dist.mean_v();

        let mut zero = self.phasor_at(0.0, dist, vis, &breaks)?;
        let vis_mean = zero.re;
        // With V ≡ 0 the phase is undefined; track the unit-visibility pattern instead.
        let unit = VisibilityCurve::constant(1.0)?;
        let degenerate = vis_mean <= 0.0;
        let track_vis = if degenerate { &unit } else { vis };
        if degenerate {
            zero = self.phasor_at(0.0, dist, track_vis, &breaks)?;
        }

        let mut order: Vec<usize> = (0..voltages.len()).collect();
        order.sort_by(|&a, &b| voltages[a].total_cmp(&voltages[b]));

        let mut out = vec![
            PatternMoments {
                mean_visibility: 0.0,
                mean_shift: 0.0,
                mean_offset: 1.0,
            };
            voltages.len()
        ];
        let mut t_prev = 0.0;
        let mut arg_prev = 0.0;
        let mut a_prev = zero;
        for idx in order {
            let t_target = voltages[idx] * voltages[idx];
            while t_prev < t_target {
                // Phase advance of the mean class is linear in t.
                let rate = k * coef_per_u2 / (v_mean * v_mean);
                let mut dt = if rate > 0.0 {
                    (CONTINUATION_STEP / rate).min(t_target - t_prev)
                } else {
                    t_target - t_prev
                };
                let mut bisections = 0;
                loop {
                    let t_next = if dt >= t_target - t_prev { t_target } else { t_prev + dt };
                    let a = self.phasor_at(coef_per_u2 * t_next, dist, track_vis, &breaks)?;
                    let step = wrap_phase(a.arg() - arg_prev);
                    if step.abs() <= FRAC_PI_2 || bisections >= MAX_BISECTIONS {
                        arg_prev += step;
                        t_prev = t_next;
                        a_prev = a;
                        break;
                    }
                    dt *= 0.5;
                    bisections += 1;
                }
            }
            let a = if degenerate {
                self.phasor_at(coef_per_u2 * t_target, dist, vis, &breaks)?
            } else {
                a_prev
            };
            out[idx] = PatternMoments {
                mean_visibility: a.norm(),
                mean_shift: arg_prev / k,
                mean_offset: 1.0,
            };
        }
        Ok(out)
    }

    /// Normalized signal at fixed grating position for each voltage, with
    /// its visibility envelope.
    pub fn voltage_sweep(
        &self,
        alpha_vol: f64,
        dist: &VelocityDistribution,
        vis: &VisibilityCurve,
        x_fixed: f64,
        voltages: &[f64],
    ) -> Result<Vec<SweepPoint>> {
        let g = self.grating_period();
        let moments = self.phasor_series(alpha_vol, voltages, dist, vis)?;
        Ok(voltages
            .iter()
            .zip(moments)
            .map(|(&voltage, m)| SweepPoint {
                voltage,
                signal: expected_pattern(x_fixed, &m, g),
                envelope_low: 1.0 - m.mean_visibility,
                envelope_high: 1.0 + m.mean_visibility,
                visibility: m.mean_visibility,
                shift: m.mean_shift,
            })
            .collect())
    }

    /// The velocity average of the single-class sinusoids, evaluated
    /// directly at one grating position without the phasor identity.
    pub fn averaged_pattern_direct(
        &self,
        x: f64,
        alpha_vol: f64,
        voltage: f64,
        dist: &VelocityDistribution,
        vis: &VisibilityCurve,
    ) -> Result<f64> {
        let k = self.setup.geometry.wavenumber();
        let coef = self.setup.shift_coefficient(alpha_vol, voltage)?;
        integrate(
            |v| {
                let w = dist.density(v);
                if w == 0.0 {
                    return 0.0;
                }
                w * (1.0 + vis.eval(v) * (k * (x - coef / (v * v))).cos())
            },
            &self.breaks(dist, vis),
            &self.quadrature,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Volts.
    pub voltage: f64,
    pub signal: f64,
    pub envelope_low: f64,
    pub envelope_high: f64,
    pub visibility: f64,
    /// Metres.
    pub shift: f64,
}

/// `1 + V̄ cos(2π(x − Δs)/g)`.
pub fn expected_pattern(x: f64, moments: &PatternMoments, grating_period: f64) -> f64 {
    1.0 + moments.mean_visibility * (2.0 * PI * (x - moments.mean_shift) / grating_period).cos()
}

/// ∫ f(v) V(v) dv.
pub fn forward_visibility(
    dist: &VelocityDistribution,
    vis: &VisibilityCurve,
    quadrature: &QuadratureConfig,
) -> Result<f64> {
    dist.validate()?;
    integrate(
        |v| dist.density(v) * vis.eval(v),
        &merged_breaks(dist, vis),
        quadrature,
    )
}

/// Distribution breakpoints plus every visibility node inside them.
fn merged_breaks(dist: &VelocityDistribution, vis: &VisibilityCurve) -> Vec<f64> {
    let mut b = dist.breakpoints();
    let (lo, hi) = (b[0], b[b.len() - 1]);
    b.extend(vis.grid().iter().copied().filter(|&v| v > lo && v < hi));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Wraps a phase into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SignalModel {
        SignalModel::new(Deflectometer::reference_c60())
    }

    fn bump() -> VisibilityCurve {
        VisibilityCurve::from_fn((0..=30).map(|i| 40.0 + 10.0 * i as f64).collect(), |v| {
            0.15 + 0.25 * (-((v - 150.0) / 60.0).powi(2)).exp()
        })
        .unwrap()
    }

    #[test]
    fn zero_voltage_moments() {
        let m = model();
        let dist = VelocityDistribution::gaussian(117.0, 0.08).unwrap();
        let vis = VisibilityCurve::constant(0.3).unwrap();
        let mo = m.phasor_moments(88.9, 0.0, &dist, &vis).unwrap();
        assert!((mo.mean_visibility - 0.3).abs() < 1e-10);
        assert_eq!(mo.mean_shift, 0.0);
    }

    #[test]
    fn narrow_distribution_matches_single_class() {
        let m = model();
        let dist = VelocityDistribution::gaussian(117.0, 1e-6).unwrap();
        let vis = bump();
        let mo = m.phasor_moments(88.9, 6e3, &dist, &vis).unwrap();
        let single = m.setup.fringe_shift(88.9, 6e3, 117.0).unwrap().shift;
        assert!((mo.mean_shift - single).abs() / single < 1e-6);
        assert!((mo.mean_visibility - vis.eval(117.0)).abs() < 1e-6);
    }

    #[test]
    fn pattern_peaks_and_troughs() {
        let g = 991e-9;
        let mo = PatternMoments {
            mean_visibility: 0.35,
            mean_shift: 200e-9,
            mean_offset: 1.0,
        };
        assert!((expected_pattern(200e-9, &mo, g) - 1.35).abs() < 1e-15);
        assert!((expected_pattern(200e-9 + g / 2.0, &mo, g) - 0.65).abs() < 1e-15);
        assert!((expected_pattern(200e-9 + g, &mo, g) - 1.35).abs() < 1e-12);
    }

    #[test]
    fn forward_constant_kernel() {
        let q = QuadratureConfig::default();
        let vis = VisibilityCurve::constant(0.27).unwrap();
        for d in [(109.0, 0.07), (199.0, 0.16), (60.0, 0.45)] {
            let dist = VelocityDistribution::gaussian(d.0, d.1).unwrap();
            assert!((forward_visibility(&dist, &vis, &q).unwrap() - 0.27).abs() < 1e-10);
        }
    }

    #[test]
    fn forward_delta_limit() {
        let q = QuadratureConfig::default();
        let vis = bump();
        let dist = VelocityDistribution::gaussian(133.0, 1e-7).unwrap();
        assert!((forward_visibility(&dist, &vis, &q).unwrap() - vis.eval(133.0)).abs() < 1e-8);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_phase(0.0), 0.0);
    }

    #[test]
    fn sweep_first_point_and_band() {
        let m = model();
        let dist = VelocityDistribution::gaussian(117.0, 0.08).unwrap();
        let vis = bump();
        let x = 150e-9;
        let volts: Vec<f64> = (0..=30).map(|i| 500.0 * i as f64).collect();
        let sweep = m.voltage_sweep(88.9, &dist, &vis, x, &volts).unwrap();
        let v0 = forward_visibility(&dist, &vis, &m.quadrature).unwrap();
        let expect0 = 1.0 + v0 * (2.0 * PI * x / m.grating_period()).cos();
        assert!((sweep[0].signal - expect0).abs() < 1e-10);
        for p in &sweep {
            assert!(p.signal >= p.envelope_low - 1e-12 && p.signal <= p.envelope_high + 1e-12);
        }
    }

    #[test]
    fn voltage_order_does_not_matter() {
        let m = model();
        let dist = VelocityDistribution::gaussian(109.0, 0.07).unwrap();
        let vis = bump();
        let up = m.phasor_series(88.9, &[3e3, 9e3, 15e3], &dist, &vis).unwrap();
        let down = m.phasor_series(88.9, &[15e3, 3e3, 9e3], &dist, &vis).unwrap();
        assert_eq!(up[0], down[1]);
        assert_eq!(up[2], down[0]);
        assert!(up[2].mean_shift > 2.0 * m.grating_period());
    }
}
