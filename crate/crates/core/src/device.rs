//! Device parameters (SI) to coupling rates (rad/s).
//!
//! The magnet on the oscillator is a point dipole, so the field gradient
//! at the atom is `|G_B| = 3 μ₀ |μ_c| / (4π r⁴)`. The Zeeman coupling
//! `μ_B g_F m_Fx G_B x_zpf` is an energy; dividing by ħ gives the
//! Jaynes–Cummings rate `g_ac` in rad/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bohr magneton, J/T (CODATA 2018).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Vacuum permeability, N/A² (CODATA 2018).
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Relative detuning above which a device is reported as off resonance.
pub const RESONANCE_THRESHOLD: f64 = 1e-3;
/// Raman detuning must exceed this multiple of `omega_0` to count as far detuned.
pub const FAR_DETUNING_RATIO: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Effective oscillator mass, kg.
    pub m_c: f64,
    /// Oscillator angular frequency, rad/s.
    pub omega_c: f64,
    /// Atomic splitting, rad/s.
    pub omega_0: f64,
    /// Magnet dipole moment, J/T.
    pub mu_c: f64,
    /// Atom–magnet distance, m.
    pub r: f64,
    pub g_f: f64,
    pub m_fx: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanParams {
    /// Classical Rabi frequency Ω_L, rad/s.
    pub omega_l_rabi: f64,
    /// Vacuum Rabi frequency Ω_k, rad/s.
    pub omega_k_rabi: f64,
    /// Raman detuning δ_L, rad/s.
    pub delta_l: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m_c", self.m_c), ("omega_c", self.omega_c), ("omega_0", self.omega_0), ("r", self.r)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidGeometry(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("mu_c", self.mu_c), ("g_f", self.g_f), ("m_fx", self.m_fx)] {
            if !v.is_finite() {
                return Err(Error::InvalidGeometry(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Zero-point amplitude `√(ħ / 2 ω_c m_c)`, m.
    pub fn zero_point_length(&self) -> f64 {
        (HBAR / (2.0 * self.omega_c * self.m_c)).sqrt()
    }

    /// Illustrative ⁶Li device: ω_0 = ω_c = 2π·228 MHz with a ~100 nm
    /// nanomagnet. Not measured data; chosen so that `g_ac` lands in the kHz
    /// range.
    pub fn lithium6_reference() -> Self {
        let omega = 2.0 * std::f64::consts::PI * 228e6;
        Self {
            m_c: 1e-17,
            omega_c: omega,
            omega_0: omega,
            mu_c: 1.7e-15,
            r: 100e-9,
            g_f: 2.0 / 3.0,
            m_fx: 0.5,
        }
    }
}

impl RamanParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta_l == 0.0 {
            return Err(Error::DivisionByZero("Raman detuning delta_l is zero".into()));
        }
        if ![self.omega_l_rabi, self.omega_k_rabi, self.delta_l].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry("Raman parameters must be finite".into()));
        }
        Ok(())
    }

    /// Human-readable warnings; currently only the far-detuning check.
    pub fn warnings(&self, omega_0: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.delta_l.abs() < FAR_DETUNING_RATIO * omega_0 {
            out.push(format!(
                "|delta_l| = {:e} rad/s is below {FAR_DETUNING_RATIO}·omega_0 = {:e}; adiabatic elimination is questionable",
                self.delta_l.abs(),
                FAR_DETUNING_RATIO * omega_0
            ));
        }
        out
    }

    /// Drive for the reference device, far red-detuned.
    pub fn lithium6_reference() -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        Self {
            omega_l_rabi: two_pi * 1e8,
            omega_k_rabi: two_pi * 1e5,
            delta_l: -two_pi * 5e9,
        }
    }
}

/// Point-dipole field gradient `3 μ₀ |μ_c| / (4π r⁴)`, T/m.
pub fn magnetic_gradient(mu_c: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidGeometry(format!("distance r must be positive, got {r}")));
    }
    // r⁴ underflows for r ≲ 1e-77; split the division to stay finite.
    let r2 = r * r;
    Ok(3.0 * VACUUM_PERMEABILITY * mu_c.abs() / (4.0 * std::f64::consts::PI) / r2 / r2)
}

/// Signed magnetic Jaynes–Cummings rate `g_ac`, rad/s.
pub fn coupling_g_ac(p: &DeviceParams) -> Result<f64> {
    p.validate()?;
    let gradient = magnetic_gradient(p.mu_c, p.r)?;
    Ok(BOHR_MAGNETON / HBAR * p.g_f * p.m_fx * gradient * p.zero_point_length())
}

/// Effective Raman rate `−Ω_L Ω_k / δ_L`, rad/s.
pub fn raman_coupling(rp: &RamanParams) -> Result<f64> {
    rp.validate()?;
    Ok(-rp.omega_l_rabi * rp.omega_k_rabi / rp.delta_l)
}

/// Parameter solved for by [`match_couplings`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParameter {
    OmegaL,
    DeltaL,
    Distance,
}

/// Whether matching equates signed rates or only their magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchConvention {
    #[default]
    Signed,
    Magnitude,
}

/// Closed-form value of `free` that makes the Raman and magnetic rates equal.
///
/// `Ω_L` and `r` must come out positive; `δ_L` may take either sign.
pub fn match_couplings(
    p: &DeviceParams,
    rp: &RamanParams,
    free: FreeParameter,
    convention: MatchConvention,
) -> Result<f64> {
    p.validate()?;
    let g_ac = coupling_g_ac(p)?;
    match free {
        FreeParameter::OmegaL => {
            rp.validate()?;
            if rp.omega_k_rabi == 0.0 {
                return Err(Error::Unmatchable("omega_k_rabi is zero".into()));
            }
            let mut omega_l = -g_ac * rp.delta_l / rp.omega_k_rabi;
            if convention == MatchConvention::Magnitude {
                omega_l = omega_l.abs();
            }
            if !(omega_l > 0.0) {
                return Err(Error::Unmatchable(format!(
                    "required omega_l_rabi = {omega_l:e} is not positive"
                )));
            }
            Ok(omega_l)
        }
        FreeParameter::DeltaL => {
            if g_ac == 0.0 {
                return Err(Error::Unmatchable("g_ac is zero; no finite detuning matches".into()));
            }
            let product = rp.omega_l_rabi * rp.omega_k_rabi;
            if product == 0.0 {
                return Err(Error::Unmatchable("Raman Rabi product is zero".into()));
            }
            Ok(match convention {
                MatchConvention::Signed => -product / g_ac,
                // keep the sign of the current detuning
                MatchConvention::Magnitude => (product / g_ac).abs() * rp.delta_l.signum(),
            })
        }
        FreeParameter::Distance => {
            let target = raman_coupling(rp)?;
            // g_ac(r) = k / r⁴
            let r2 = p.r * p.r;
            let k = g_ac * r2 * r2;
            let ratio = match convention {
                MatchConvention::Signed => k / target,
                MatchConvention::Magnitude => (k / target).abs(),
            };
            if !(ratio > 0.0) || !ratio.is_finite() {
                return Err(Error::Unmatchable(format!(
                    "no positive distance gives g_ac = {target:e} (g_ac·r⁴ = {k:e})"
                )));
            }
            Ok(ratio.sqrt().sqrt())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceReport {
    /// `ω_c − ω_0`, rad/s.
    pub detuning: f64,
    pub threshold: f64,
    /// True iff `|ω_c − ω_0| < 1e-3·ω_c` (strict), so the boundary itself
    /// is reported off resonance.
    pub resonant: bool,
}

pub fn resonance_report(p: &DeviceParams) -> ResonanceReport {
    let detuning = p.omega_c - p.omega_0;
    let threshold = RESONANCE_THRESHOLD * p.omega_c;
    ResonanceReport { detuning, threshold, resonant: detuning.abs() < threshold }
}

/// Device-preset file: TOML with `[device]` and optional `[raman]` tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevicePreset {
    pub device: DeviceParams,
    pub raman: Option<RamanParams>,
}

impl DevicePreset {
    pub fn from_toml(text: &str) -> Result<Self> {
        let preset: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        preset.device.validate()?;
        if let Some(r) = &preset.raman {
            r.validate()?;
        }
        Ok(preset)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("preset serializes")
    }
}
