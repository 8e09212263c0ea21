//! Two-level emitter coupled to quantized photon modes.
//!
//! The crate propagates the coupled amplitude on displacement grids, solves
//! the single-excitation emission problem over a quasi-continuum of modes,
//! and inverts solutions into a marginal photonic amplitude times a
//! normalized conditional amplitude to obtain the exact potential surface
//! acting on the photons.

pub mod error;
pub mod factorization;
pub mod fock;
pub mod hermite;
pub mod model;
pub mod observables;
pub mod propagator;
pub mod spectral;
pub mod ww;

pub use error::{Error, Result};
pub use model::{
    build_initial_state, qbo_surfaces, InitialKind, ModelParams, QGrid, QboSurfaces, SpinorField,
};
pub use propagator::{energy_expectation, propagate, Method, PropagatorConfig, Trajectory};
