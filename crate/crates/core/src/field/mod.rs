//! Electrostatics of the deflector: potential, (E·∇)E_x, effective length
//! and homogeneity from a two-dimensional electrode layout.

mod analysis;
mod geometry;
mod solver;

pub use analysis::{
    effective_length, electric_field, field_strength_sq, gradient_product, homogeneity,
    longitudinal_profile, Homogeneity,
};
pub use geometry::{Domain, Electrode, ElectrodeGeometry2D, Plane, Point, Shape};
pub use solver::{solve_potential, PotentialGrid, SolverOptions};
