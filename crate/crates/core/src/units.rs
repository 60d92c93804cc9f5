//! Physical constants and unit conversions.
//!
//! Constants are CODATA 2018 recommended values.

use crate::error::{Error, Result};

/// Vacuum permittivity ε₀ in F/m (CODATA 2018: 8.854 187 8128(13) × 10⁻¹²).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Unified atomic mass unit in kg (CODATA 2018: 1.660 539 066 60(50) × 10⁻²⁷).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// One cubic ångström in m³.
pub const CUBIC_ANGSTROM: f64 = 1e-30;

/// Polarizability volume (Å³) per SI polarizability (C·m²/V) factor, 4πε₀·10⁻³⁰.
const VOLUME_TO_SI: f64 = 4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * CUBIC_ANGSTROM;

/// Converts a polarizability volume in Å³ to SI units (C·m²/V).
pub fn alpha_to_si(alpha_vol: f64) -> Result<f64> {
    if !(alpha_vol >= 0.0) {
        return Err(Error::Domain(format!(
            "polarizability volume must be >= 0, got {alpha_vol}"
        )));
    }
    Ok(alpha_vol * VOLUME_TO_SI)
}

/// Inverse of [`alpha_to_si`].
pub fn alpha_from_si(alpha_si: f64) -> Result<f64> {
    if !(alpha_si >= 0.0) {
        return Err(Error::Domain(format!(
            "SI polarizability must be >= 0, got {alpha_si}"
        )));
    }
    Ok(alpha_si / VOLUME_TO_SI)
}
