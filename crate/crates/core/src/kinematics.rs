//! Laboratory energy / wave-number conversions in reduced units.
//!
//! Everything internal works with `hbar = 2 mu = 1`: wave numbers in fm^-1,
//! potentials in fm^-2. Energies in MeV only show up at the I/O boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalConstants {
    /// Neutron mass (MeV).
    pub m_n: f64,
    /// Proton mass (MeV).
    pub m_p: f64,
    /// hbar c (MeV fm).
    pub hbarc: f64,
    /// hbar^2 / (2 mu) (MeV fm^2).
    pub hbar2_over_2mu: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            m_n: 939.565,
            m_p: 938.272,
            hbarc: 197.33,
            hbar2_over_2mu: 41.47,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m_n", self.m_n),
            ("m_p", self.m_p),
            ("hbarc", self.hbarc),
            ("hbar2_over_2mu", self.hbar2_over_2mu),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "physical constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// E_lab / k^2 in MeV fm^2.
    fn lab_factor(&self) -> f64 {
        self.hbar2_over_2mu * (self.m_p + self.m_n) / self.m_p
    }

    /// Converts a potential in fm^-2 to MeV.
    pub fn to_mev(&self, v_reduced: f64) -> f64 {
        v_reduced * self.hbar2_over_2mu
    }
}

/// Orbital angular momentum of a partial wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialWave(pub u32);

impl PartialWave {
    pub fn l(self) -> u32 {
        self.0
    }

    /// Power 2l+1 of k in the effective-range function.
    pub fn k_power(self) -> i32 {
        2 * self.0 as i32 + 1
    }

    pub fn centrifugal(self) -> f64 {
        let l = self.0 as f64;
        l * (l + 1.0)
    }
}

impl std::fmt::Display for PartialWave {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "l = {}", self.0)
    }
}

pub fn k_from_elab(e_lab: f64, c: &PhysicalConstants) -> Result<f64> {
    if !(e_lab >= 0.0) || !e_lab.is_finite() {
        return Err(Error::Domain(format!("laboratory energy must be >= 0, got {e_lab}")));
    }
    Ok((e_lab / c.lab_factor()).sqrt())
}

pub fn elab_from_k(k: f64, c: &PhysicalConstants) -> Result<f64> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wave number must be >= 0, got {k}")));
    }
    Ok(k * k * c.lab_factor())
}
