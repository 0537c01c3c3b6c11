//! Simulation core for a driven membrane-in-the-middle optomechanical cavity
//! operated at mechanical amplitudes comparable to the optical wavelength.
//!
//! The crate is organized around the pipeline the physics imposes:
//!
//! * [`model`] — the position-dependent cavity-mode frequency landscape
//!   `omega_c(q)`, its analytic derivatives, the detuning in cancellation-free
//!   form, and derived scales (zero-point spreads, drive amplitude, thermal
//!   occupation).
//! * [`dynamics`] — fixed-step RK4 integration of the classical mean-field
//!   equations for `(q0, p0, alpha)`.
//! * [`attractor`] — limit-cycle statistics, convergence detection,
//!   power/initial-condition sweeps and amplitude clustering
//!   (dynamical multistability), photon-number peak detection.
//! * [`covariance`] — co-propagation of the 4x4 covariance matrix of the
//!   Gaussian quadrature fluctuations along the classical orbit, symplectic
//!   spectra and logarithmic negativity.
//!
//! All public interfaces speak SI units. Internally the integrators work in
//! membrane-wavelength / inverse-mechanical-frequency units so that every
//! state component stays O(1).

pub mod attractor;
pub mod constants;
pub mod covariance;
pub mod dynamics;
pub mod error;
pub mod model;

pub use constants::PhysicalConstants;
pub use error::{Result, SimError};
pub use model::{
    check_single_mode_validity, derive_scales, detuning, mode_frequency_jet, DerivedScales,
    DriveFrequencyRule, ModeJet, ModeParity, SystemParams, ValidityReport, ValidityStatus,
};
