//! Simulation of a heralded "disentanglement eraser": a three-photon GHZ
//! source whose third photon, analyzed in a parity basis, restores the
//! polarization entanglement hidden in the A,B coincidence statistics.
//!
//! The crate covers the polarization state engine ([`state`]), the eraser
//! protocol ([`protocol`]), entanglement diagnostics ([`entanglement`],
//! [`tomography`]), finite-count sampling ([`montecarlo`]) and the crystal
//! optics of the three-photon source ([`optics`]).

pub mod entanglement;
pub mod error;
pub mod montecarlo;
pub mod optics;
pub mod protocol;
pub mod state;
pub mod tomography;

pub use error::{Error, Result};
pub use state::{BornRule, DensityMatrix, LinearOperator, PureState, C64};
