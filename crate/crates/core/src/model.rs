//! Single-molecule deflection law.
//!
//! A molecule of polarizability α and mass m crossing a deflector of
//! effective length d, whose front edge sits a distance L behind the first
//! grating, picks up a lateral fringe displacement at the mask grating of
//!
//! ```text
//! Δs = α (E·∇)E_x / m · d / v² · (d/2 + L)
//! ```
//!
//! The field product (E·∇)E_x scales exactly with the square of the
//! deflector voltage.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{alpha_to_si, ATOMIC_MASS_UNIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpecies {
    pub name: String,
    /// Mass in unified atomic mass units.
    pub mass_amu: f64,
    /// Reference polarizability volume in Å³, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_ref: Option<f64>,
}

impl MoleculeSpecies {
    pub fn new(name: impl Into<String>, mass_amu: f64, alpha_ref: Option<f64>) -> Result<Self> {
        let species = Self {
            name: name.into(),
            mass_amu,
            alpha_ref,
        };
        species.validate()?;
        Ok(species)
    }

    /// Buckminsterfullerene with natural isotope abundance.
    pub fn c60() -> Self {
        Self {
            name: "C60".into(),
            mass_amu: 720.66,
            alpha_ref: Some(88.9),
        }
    }

    pub fn c70() -> Self {
        Self {
            name: "C70".into(),
            mass_amu: 840.77,
            alpha_ref: Some(108.5),
        }
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * ATOMIC_MASS_UNIT
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_amu > 0.0 && self.mass_amu.is_finite()) {
            return Err(Error::Domain(format!(
                "{}: mass must be > 0, got {}",
                self.name, self.mass_amu
            )));
        }
        if let Some(a) = self.alpha_ref {
            if !(a > 0.0) {
                return Err(Error::Domain(format!(
                    "{}: reference polarizability must be > 0, got {a}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Interferometer and deflector placement. All lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectometerGeometry {
    pub grating_period: f64,
    /// First grating to the deflector front edge.
    pub deflector_distance: f64,
    /// Effective electrode length, including fringe fields.
    pub deflector_length: f64,
}

impl DeflectometerGeometry {
    pub const MIN_PERIOD: f64 = 100e-9;
    pub const MAX_PERIOD: f64 = 10e-6;

    pub fn new(grating_period: f64, deflector_distance: f64, deflector_length: f64) -> Result<Self> {
        let geom = Self {
            grating_period,
            deflector_distance,
            deflector_length,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grating_period;
        if !(g > Self::MIN_PERIOD && g < Self::MAX_PERIOD) {
            return Err(Error::Domain(format!(
                "grating period {g} m outside ({}, {}) m",
                Self::MIN_PERIOD,
                Self::MAX_PERIOD
            )));
        }
        if !(self.deflector_distance > 0.0 && self.deflector_length > 0.0) {
            return Err(Error::Domain(
                "deflector distance and length must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// d·(d/2 + L), the geometric lever of the deflection law in m².
    pub fn lever(&self) -> f64 {
        let d = self.deflector_length;
        d * (0.5 * d + self.deflector_distance)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.grating_period
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectorField {
    /// Voltage at which `grad_product_ref` was determined, in V.
    pub reference_voltage: f64,
    /// (E·∇)E_x at the beam centre at `reference_voltage`, in V²/m³.
    pub grad_product_ref: f64,
    /// Relative deviation of the force across the beam.
    #[serde(default)]
    pub homogeneity_bound: f64,
}

impl DeflectorField {
    pub fn new(reference_voltage: f64, grad_product_ref: f64, homogeneity_bound: f64) -> Result<Self> {
        let field = Self {
            reference_voltage,
            grad_product_ref,
            homogeneity_bound,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_voltage > 0.0 && self.grad_product_ref > 0.0) {
            return Err(Error::Domain(
                "reference voltage and field product must be > 0".into(),
            ));
        }
        if !(self.homogeneity_bound >= 0.0) {
            return Err(Error::Domain("homogeneity bound must be >= 0".into()));
        }
        Ok(())
    }

    /// (E·∇)E_x at `voltage`, in V²/m³.
    pub fn grad_product_at(&self, voltage: f64) -> f64 {
        let r = voltage / self.reference_voltage;
        self.grad_product_ref * r * r
    }
}

/// Lateral fringe displacement and the matching fringe phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeShift {
    /// Metres along +x.
    pub shift: f64,
    /// 2π·shift/g, not wrapped.
    pub phase: f64,
}

impl FringeShift {
    pub fn from_shift(shift: f64, grating_period: f64) -> Self {
        Self {
            shift,
            phase: 2.0 * PI * shift / grating_period,
        }
    }
}

/// Force on the molecule in N.
pub fn gradient_force(alpha_vol: f64, field: &DeflectorField, voltage: f64) -> Result<f64> {
    if !(voltage >= 0.0) {
        return Err(Error::Domain(format!("voltage must be >= 0, got {voltage}")));
    }
    Ok(alpha_to_si(alpha_vol)? * field.grad_product_at(voltage))
}

/// Fringe shift of a single velocity class.
pub fn fringe_shift(
    species: &MoleculeSpecies,
    alpha_vol: f64,
    field: &DeflectorField,
    geom: &DeflectometerGeometry,
    voltage: f64,
    velocity: f64,
) -> Result<FringeShift> {
    if !(velocity > 0.0) {
        return Err(Error::Domain(format!("velocity must be > 0, got {velocity}")));
    }
    let force = gradient_force(alpha_vol, field, voltage)?;
    let shift = force / species.mass_kg() * geom.lever() / (velocity * velocity);
    Ok(FringeShift::from_shift(shift, geom.grating_period))
}

/// Everything needed to turn (α, U, v) into a fringe shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deflectometer {
    pub species: MoleculeSpecies,
    pub geometry: DeflectometerGeometry,
    pub field: DeflectorField,
}

impl Deflectometer {
    pub fn new(
        species: MoleculeSpecies,
        geometry: DeflectometerGeometry,
        field: DeflectorField,
    ) -> Result<Self> {
        species.validate()?;
        geometry.validate()?;
        field.validate()?;
        Ok(Self {
            species,
            geometry,
            field,
        })
    }

    /// Reference setup: C60 with the deflector and interferometer used for the
    /// published fullerene measurements (g = 991 nm, L = 26.6 cm,
    /// d_eff = 4.73 cm, (E·∇)E_x = 1.45e14 V²/m³ at 10 kV).
    pub fn reference_c60() -> Self {
        Self {
            species: MoleculeSpecies::c60(),
            geometry: DeflectometerGeometry {
                grating_period: 991e-9,
                deflector_distance: 0.266,
                deflector_length: 0.0473,
            },
            field: DeflectorField {
                reference_voltage: 10e3,
                grad_product_ref: 1.45e14,
                homogeneity_bound: 0.005,
            },
        }
    }

    pub fn with_species(&self, species: MoleculeSpecies) -> Self {
        Self {
            species,
            ..self.clone()
        }
    }

    pub fn grating_period(&self) -> f64 {
        self.geometry.grating_period
    }

    /// Δs·v² in m³/s², the velocity-independent part of the shift.
    pub fn shift_coefficient(&self, alpha_vol: f64, voltage: f64) -> Result<f64> {
        let force = gradient_force(alpha_vol, &self.field, voltage)?;
        Ok(force / self.species.mass_kg() * self.geometry.lever())
    }

    pub fn fringe_shift(&self, alpha_vol: f64, voltage: f64, velocity: f64) -> Result<FringeShift> {
        fringe_shift(
            &self.species,
            alpha_vol,
            &self.field,
            &self.geometry,
            voltage,
            velocity,
        )
    }

    /// Force that displaces the fringes of velocity class `velocity` by
    /// `shift` metres, i.e. the deflection law solved for F.
    pub fn force_for_shift(&self, shift: f64, velocity: f64) -> f64 {
        shift * self.species.mass_kg() * velocity * velocity / self.geometry.lever()
    }
}
