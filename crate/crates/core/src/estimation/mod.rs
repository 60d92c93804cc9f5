//! From fringe scans to a polarizability with its uncertainty budget.

pub mod alpha;
pub mod budget;
pub mod campaign;
pub mod drift;
pub mod scan;
pub mod sinusoid;
pub mod unwrap;

pub use alpha::{alpha_ratio, fit_alpha, AlphaEstimate, AlphaRatio, FitOptions, SystematicInputs};
pub use budget::{reference_uncertainties, systematic_budget, SystematicBudget, SystematicTerm};
pub use campaign::{Campaign, SweepRecord, VelocitySetting};
pub use drift::{drift_correct, SequencedFit};
pub use scan::{FringeScan, ScanRole};
pub use sinusoid::{fit_sinusoid, ScanFit};
pub use unwrap::unwrap_shift_series;
