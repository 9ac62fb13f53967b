//! Soft-core two-electron atom and the dipole-coupled laser pulse.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strengths of the electron–nucleus (`a`) and electron–electron (`b`)
/// soft-core interactions. Helium is `a = 2, b = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftCoreParams {
    pub a: f64,
    pub b: f64,
}

impl SoftCoreParams {
    pub const HELIUM: SoftCoreParams = SoftCoreParams { a: 2.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = Self { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.b >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "soft-core strengths must be nonnegative, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// Electron–nucleus attraction `−a/√(1+x²)`.
#[inline]
pub fn v_en(x: f64, params: &SoftCoreParams) -> f64 {
    -params.a / (1.0 + x * x).sqrt()
}

/// Electron–electron repulsion `b/√(1+s²)`.
#[inline]
pub fn v_ee(separation: f64, params: &SoftCoreParams) -> f64 {
    params.b / (1.0 + separation * separation).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    #[default]
    Sin2,
    Flat,
}

/// Few-cycle pulse `E(t) = E0 · f(t) · cos(ω (t − t_start) + cep)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserPulse {
    pub amplitude: f64,
    pub omega: f64,
    pub n_cycles: f64,
    #[serde(default)]
    pub envelope: Envelope,
    #[serde(default)]
    pub t_start: f64,
    /// Carrier-envelope phase (radians).
    #[serde(default)]
    pub cep: f64,
}

impl LaserPulse {
    pub fn new(amplitude: f64, omega: f64, n_cycles: f64) -> Result<Self> {
        let p = Self {
            amplitude,
            omega,
            n_cycles,
            envelope: Envelope::Sin2,
            t_start: 0.0,
            cep: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pulse amplitude must be nonnegative, got {}",
                self.amplitude
            )));
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "carrier frequency must be positive, got {}",
                self.omega
            )));
        }
        if !(self.n_cycles >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pulse needs at least one cycle, got {}",
                self.n_cycles
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_cycles * 2.0 * PI / self.omega
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration()
    }
}

/// Electric field of the pulse at time `t`; zero outside the pulse window.
pub fn field_at(t: f64, pulse: &LaserPulse) -> f64 {
    let tau = t - pulse.t_start;
    let duration = pulse.duration();
    if !(0.0..=duration).contains(&tau) {
        return 0.0;
    }
    let envelope = match pulse.envelope {
        Envelope::Sin2 => (PI * tau / duration).sin().powi(2),
        Envelope::Flat => 1.0,
    };
    pulse.amplitude * envelope * (pulse.omega * tau + pulse.cep).cos()
}

/// Dipole coupling `−x E(t)`.
#[inline]
pub fn v_ext_dipole(x: f64, t: f64, pulse: &LaserPulse) -> f64 {
    -x * field_at(t, pulse)
}
