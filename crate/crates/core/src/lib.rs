//! Models for a thermal microwave quantum link: a transmission-line circuit
//! with a flux-tunable dissipative coupler, the open-system dynamics of two
//! Duffing qubits exchanging photons through one standing mode, the
//! time-domain protocols run on that system, tomography, and the data
//! reduction used to interpret all of it.
//!
//! All physical quantities are SI (seconds, rad/s, ohm, farad, henry)
//! unless a name carries an explicit unit suffix.

pub mod analysis;
pub mod circuit;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod protocols;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
