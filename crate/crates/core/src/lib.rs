//! Numerics for squeezed-state metrology with spin-orbit coupled trapped gases.
//!
//! The crate is organised bottom-up:
//!
//! * [`fockcore`]: truncated Fock space and spin-1/2 operator algebra, the squeeze
//!   operator and Hermite-function wavefunctions.
//! * [`models`]: Rabi-form and effective (Schrieffer-Wolff) Hamiltonians, squeeze
//!   parameter, sweep time, thermal populations and dense diagonalization.
//! * [`metrology`]: quantum Fisher information of the frequency `Omega` via closed
//!   forms, collective-generator variances, finite differences and the mixed-state
//!   spectral sum.
//! * [`measurement`]: position/momentum distributions, classical Fisher information,
//!   grid QFI for real wavefunctions and a maximum-likelihood Monte Carlo harness.
//!
//! Natural units are used throughout: `hbar = 1`, and by default `m = omega = 1`.

pub mod error;
pub mod fockcore;
pub mod measurement;
pub mod metrology;
pub mod models;

pub use error::{Error, Result};
pub use fockcore::{FockOperator, SqueezedFockState, StateVector, C64};
pub use measurement::{EstimationRun, Grid1D, MeasurementDistribution, Observable};
pub use metrology::{FisherMethod, FisherResult, ManyBodyProbe, Statistics};
pub use models::{ModelParams, SpectrumResult};
