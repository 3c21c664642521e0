//! Simulation suite for the three-photon Kerr parametric oscillator (KPO).
//!
//! The crate is organized bottom-up:
//!
//! - [`fock`]: truncated Fock-space states, operators and measurements.
//! - [`circuit`]: circuit parameters to rotating-frame coefficients.
//! - [`model`]: the rotating-frame Hamiltonian, classical landscape, pump
//!   envelopes and dissipation channels.
//! - [`spectrum`]: diagonalization, qutrit/excited manifold labels, gaps.
//! - [`dynamics`]: unitary and Lindblad evolution, steady states, and the
//!   decaying-cosine frequency fit.
//! - [`tomography`]: Wigner functions, the joint parity-measurement oracle,
//!   effective-decay surrogate and density-matrix reconstruction.
//! - [`experiments`]: composed workflows (chevrons, breathing, relaxation,
//!   steady-state scans).
//! - [`io`]: TSV tables and matrix serialization.
//!
//! Units: times in seconds, angular frequencies in rad/s. Conversion from
//! ordinary frequencies (Hz) happens at the configuration boundary.

pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod io;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod spectrum;
pub mod tomography;

pub use error::{ErrorClass, KpoError, Result};
pub use fock::{DensityMatrix, Ket, OperatorMatrix, StateRef};
pub use linalg::C64;
pub use model::{DissipationSpec, KpoParams, PumpSchedule, RampShape};

/// `2 pi`, for Hz to rad/s conversions.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
