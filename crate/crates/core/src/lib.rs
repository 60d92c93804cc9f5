//! Forward model, simulation and estimation for Talbot–Lau Stark
//! deflectometry.
//!
//! A molecular beam passes an electric deflector between the first and
//! second grating of a three-grating near-field interferometer. The force
//! α(E·∇)E_x shifts the fringe pattern at the mask grating by
//!
//! Δs = α (E·∇)E_x / m · d / v² · (d/2 + L).
//!
//! The crate is layered bottom-up:
//!
//! - [`model`]: species, geometry, field and the single-velocity shift law.
//! - [`signal`]: velocity-averaged fringe visibility and shift, voltage
//!   sweeps, and [`deconvolution`] of the visibility curve.
//! - [`estimation`]: sinusoid fits, drift correction, unwrapping, α fits
//!   and systematic budgets.
//! - [`field`]: finite-difference electrostatics for (E·∇)E_x, effective
//!   length and homogeneity.
//! - [`synth`]: seeded synthetic scans and campaigns; [`io`] reads and
//!   writes them.
//!
//! ```
//! use tlstark::model::Deflectometer;
//!
//! let setup = Deflectometer::reference_c60();
//! let shift = setup.fringe_shift(88.9, 6e3, 117.0).unwrap();
//! assert!((shift.shift - 431.8e-9).abs() < 0.1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deconvolution;
pub mod distribution;
pub mod error;
pub mod estimation;
pub mod field;
pub mod io;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod signal;
pub mod synth;
pub mod units;
pub mod visibility;

pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/shift-law.md")]
    mod shift_law {}
    #[doc = include_str!("../../../book/src/velocity-averaging.md")]
    mod velocity_averaging {}
    #[doc = include_str!("../../../book/src/fringe-scans.md")]
    mod fringe_scans {}
    #[doc = include_str!("../../../book/src/polarizability-fit.md")]
    mod polarizability_fit {}
    #[doc = include_str!("../../../book/src/deconvolution.md")]
    mod deconvolution {}
    #[doc = include_str!("../../../book/src/field-solver.md")]
    mod field_solver {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
