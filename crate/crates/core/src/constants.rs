//! Fundamental physical constants (CODATA values by default).

use crate::error::{Result, SimError};

/// `hbar`, `k_B` and `c` in SI units. Overridable only through configuration,
/// for testing; every physical formula in the crate reads them from here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Speed of light in vacuum, m/s.
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            k_b: 1.380_649e-23,
            c: 299_792_458.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("k_b", self.k_b), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::invalid(name, "must be strictly positive"));
            }
        }
        Ok(())
    }
}
