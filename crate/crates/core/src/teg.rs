//! Thermoelectric generator figure of merit and conversion efficiency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermoelement and device parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TegParams {
    /// Seebeck coefficient (V/K).
    pub seebeck: f64,
    /// Electrical conductivity (S/m).
    pub sigma: f64,
    /// Total thermal conductivity (W/m·K).
    pub k_total: f64,
    /// Optional split `[electronic, bipolar, lattice]`, summing to `k_total`.
    pub k_components: Option<[f64; 3]>,
    /// Thermoelement leg length (m).
    pub leg_length: f64,
    /// Electrical contact resistivity (Ω·m²).
    pub contact_resistivity: f64,
    /// Power multiplier for pulsed operation.
    pub pulse_gain: f64,
}

impl Default for TegParams {
    fn default() -> Self {
        TegParams {
            seebeck: 2e-4,
            sigma: 1e5,
            k_total: 1.5,
            k_components: None,
            leg_length: 1e-3,
            contact_resistivity: 1e-10,
            pulse_gain: 2.7,
        }
    }
}

impl TegParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(format!("teg: {m}")));
        if !(self.sigma > 0.0) {
            return fail("sigma must be positive");
        }
        if !(self.k_total > 0.0) {
            return fail("k_total must be positive");
        }
        if let Some(c) = self.k_components {
            if (c.iter().sum::<f64>() - self.k_total).abs() > 1e-9 {
                return fail("k_components must sum to k_total");
            }
        }
        if !(self.leg_length > 0.0) {
            return fail("leg_length must be positive");
        }
        if !(self.contact_resistivity >= 0.0) {
            return fail("contact_resistivity must be non-negative");
        }
        if !(self.pulse_gain >= 0.0) {
            return fail("pulse_gain must be non-negative");
        }
        if !self.seebeck.is_finite() {
            return fail("seebeck must be finite");
        }
        Ok(())
    }
}

/// Material figure of merit `α²σT / k`.
pub fn zt_thermoelement(p: &TegParams, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "temperature must be positive, got {t}"
        )));
    }
    Ok(p.seebeck * p.seebeck * p.sigma * t / p.k_total)
}

/// Device figure of merit including contact losses, `L / (L + 2ρ_cσ) · ZT`.
pub fn zt_device(zt_te: f64, p: &TegParams) -> Result<f64> {
    if !(zt_te >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "ZT must be non-negative, got {zt_te}"
        )));
    }
    if !(p.leg_length > 0.0 && p.contact_resistivity >= 0.0 && p.sigma > 0.0) {
        return Err(Error::InvalidInput(
            "device parameters must be positive".into(),
        ));
    }
    let l = p.leg_length;
    Ok(l / (l + 2.0 * p.contact_resistivity * p.sigma) * zt_te)
}

/// Conversion efficiency between `t_hot` and `t_cold` for an average ZT.
pub fn teg_efficiency(t_hot: f64, t_cold: f64, zt_avg: f64) -> Result<f64> {
    if !(t_cold > 0.0 && t_hot > t_cold) {
        return Err(Error::InvalidInput(format!(
            "need t_hot > t_cold > 0, got {t_hot} and {t_cold}"
        )));
    }
    if !(zt_avg >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "ZT must be non-negative, got {zt_avg}"
        )));
    }
    let root = (1.0 + zt_avg).sqrt();
    Ok((t_hot - t_cold) / t_hot * (root - 1.0) / (root + t_cold / t_hot))
}

/// Device ZT at the mean of the two temperatures.
pub fn zt_average(p: &TegParams, t_hot: f64, t_cold: f64) -> Result<f64> {
    zt_device(zt_thermoelement(p, 0.5 * (t_hot + t_cold))?, p)
}

pub fn pulse_mode_efficiency(eta: f64, p: &TegParams) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "efficiency must be non-negative, got {eta}"
        )));
    }
    Ok(eta * p.pulse_gain)
}
