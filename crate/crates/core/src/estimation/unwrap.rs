//! Unwrapping fringe phases along a voltage series.
//!
//! Shifts grow as U², so each new phase is placed on the 2π branch closest
//! to the quadratic trend fitted to the points already unwrapped.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Turns wrapped phases (rad) at ascending voltages into shifts (m).
pub fn unwrap_shift_series(phases: &[f64], voltages: &[f64], grating_period: f64) -> Result<Vec<f64>> {
    if phases.len() != voltages.len() {
        return Err(Error::Domain("phase and voltage series differ in length".into()));
    }
    if voltages.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain("voltages must be sorted ascending".into()));
    }
    let mut unwrapped: Vec<f64> = Vec::with_capacity(phases.len());
    // Running least-squares fit of φ = c U² through the origin.
    let (mut s_pu, mut s_uu) = (0.0, 0.0);
    for (&raw, &u) in phases.iter().zip(voltages) {
        let u2 = u * u;
        let phi = if s_uu > 0.0 {
            let predicted = s_pu / s_uu * u2;
            let phi = raw + 2.0 * PI * ((predicted - raw) / (2.0 * PI)).round();
            let residual = phi - predicted;
            if residual.abs() > FRAC_PI_2 {
                return Err(Error::AmbiguousUnwrap {
                    voltage: u,
                    residual,
                });
            }
            phi
        } else {
            // No trend yet: the first point sits on the principal branch.
            crate::signal::wrap_phase(raw)
        };
        s_pu += phi * u2;
        s_uu += u2 * u2;
        unwrapped.push(phi);
    }
    Ok(unwrapped
        .into_iter()
        .map(|p| p * grating_period / (2.0 * PI))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::wrap_phase;

    const G: f64 = 991e-9;

    fn volts() -> Vec<f64> {
        (3..=15).map(|k| k as f64 * 1e3).collect()
    }

    #[test]
    fn small_shifts_unchanged() {
        let v = volts();
        let phases: Vec<f64> = v.iter().map(|u| 2.5 * (u / 15e3).powi(2)).collect();
        let s = unwrap_shift_series(&phases, &v, G).unwrap();
        for (p, s) in phases.iter().zip(s) {
            assert!((s - p * G / (2.0 * PI)).abs() < 1e-20);
        }
    }

    #[test]
    fn three_periods() {
        let v = volts();
        let truth: Vec<f64> = v.iter().map(|u| 3.1 * G * (u / 15e3).powi(2)).collect();
        let wrapped: Vec<f64> = truth.iter().map(|s| wrap_phase(2.0 * PI * s / G)).collect();
        let s = unwrap_shift_series(&wrapped, &v, G).unwrap();
        for (a, b) in s.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn global_two_pi_offset_is_invisible() {
        let v = volts();
        let wrapped: Vec<f64> = v.iter().map(|u| wrap_phase(19.0 * (u / 15e3).powi(2))).collect();
        let shifted: Vec<f64> = wrapped.iter().map(|p| p + 2.0 * PI).collect();
        let a = unwrap_shift_series(&wrapped, &v, G).unwrap();
        let b = unwrap_shift_series(&shifted, &v, G).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-21);
        }
    }

    #[test]
    fn zeros() {
        let v = volts();
        let s = unwrap_shift_series(&vec![0.0; v.len()], &v, G).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn off_trend_point_is_flagged() {
        let v = volts();
        let mut phases: Vec<f64> = v.iter().map(|u| wrap_phase(10.0 * (u / 15e3).powi(2))).collect();
        phases[6] = wrap_phase(phases[6] + 2.5);
        assert!(matches!(
            unwrap_shift_series(&phases, &v, G),
            Err(Error::AmbiguousUnwrap { .. })
        ));
    }

    #[test]
    fn unsorted_rejected() {
        assert!(unwrap_shift_series(&[0.0, 0.0], &[2.0, 1.0], G).is_err());
    }
}
