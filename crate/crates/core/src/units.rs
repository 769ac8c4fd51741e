//! Physical constants and unit helpers.

use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Magnetic flux quantum, Wb.
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

pub const NS: f64 = 1e-9;
pub const US: f64 = 1e-6;

/// Angular frequency (rad/s) from a frequency in GHz.
pub fn ghz(f: f64) -> f64 {
    2.0 * PI * f * 1e9
}

/// Angular frequency (rad/s) from a frequency in MHz.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// Ordinary frequency in GHz from an angular frequency.
pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

/// Ordinary frequency in MHz from an angular frequency.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

/// Rate (1/s) for a lifetime given in seconds.
pub fn rate_from_lifetime(lifetime: f64) -> f64 {
    1.0 / lifetime
}
