//! Self-consistent mean-field dynamics of N Pauli spinors, including the
//! coherent couplings between the internal mean field and an external laser
//! pulse at second order in 1/c.
//!
//! Layering, bottom up: grids and FFTs, fields, spectral operators, source
//! densities and currents, electrostatic/magnetostatic solvers, the
//! Hamiltonian terms, time propagation, and the two-electron reduction used
//! for cross validation.

pub mod analysis;
pub mod breit_pauli;
pub mod constants;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod hamiltonian;
pub mod kernels;
pub mod laser;
pub mod ops;
pub mod output;
pub mod propagator;
pub mod solver;
pub mod sources;
pub mod synth;
pub mod units;

pub use analysis::{MechanismCell, MechanismReport, YieldInputs};
pub use constants::PhysicalConstants;
pub use error::{CoreError, Result};
pub use hamiltonian::{TermGroup, TermId, TermToggles};
pub use field::{ScalarField, SpinorField, VectorField};
pub use grid::Grid3;
pub use laser::{Envelope, ExternalSample, LaserPulse, SpatialProfile};
pub use propagator::{Observables, Scenario, Trajectory};
pub use sources::SourceSet;
pub use synth::GaussianSpec;
pub use units::{Dimension, UnitSystem};
