//! Spin-1/2 measured by a damped oscillator pointer coupled to a thermal bath.
//!
//! The reduced density matrix splits into four spin sectors that each obey a
//! first-order transport equation in the partial-Fourier variables `(Q, r)`.
//! [`analytic`] evaluates the exact characteristic solution, [`oracle`]
//! integrates the same equations numerically, and [`observables`] turns the
//! result into decoherence times, pointer-state fidelities and marginals.

pub mod error;
pub mod grids;
pub mod params;
pub mod states;
pub mod analytic;
pub mod oracle;
pub mod observables;
pub mod cli;

#[cfg(test)]
extern crate self as decohere;
#[cfg(test)]
mod property_suite;

pub use error::{Error, Result};
pub use grids::{GridSpec, Representation, SectorField};
pub use params::{derive_constants, validate, Bath, DerivedConstants, PhysicalParams, SectorLabel, SpinAmplitudes};
pub use states::{assemble_initial, ApparatusState, DensityMatrix, QrEvaluator};
