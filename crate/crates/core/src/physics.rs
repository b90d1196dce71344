//! Ion, trap, Raman-drive and noise parameter records together with the
//! closed-form quantities derived from them.
//!
//! All values are SI with angular frequencies in rad/s. Use [`crate::units`]
//! to convert from MHz, μm and friends.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Error, Result};
use crate::units::{self, ELEMENTARY_CHARGE, HBAR};

/// Species-dependent constants of the trapped ion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Wavelength of the cooling/Raman transition, m.
    pub transition_wavelength: f64,
    /// Natural linewidth γ₀ of the excited state, rad/s.
    pub excited_linewidth: f64,
    /// Qubit hyperfine splitting, rad/s.
    pub hyperfine_splitting: f64,
}

impl IonSpecies {
    pub fn new(
        name: impl Into<String>,
        mass: f64,
        transition_wavelength: f64,
        excited_linewidth: f64,
        hyperfine_splitting: f64,
    ) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            mass: positive("ion.mass", mass)?,
            transition_wavelength: positive("ion.transition_wavelength", transition_wavelength)?,
            excited_linewidth: positive("ion.excited_linewidth", excited_linewidth)?,
            hyperfine_splitting: non_negative("ion.hyperfine_splitting", hyperfine_splitting)?,
        })
    }

    /// ¹¹¹Cd⁺: 110.904 u, 214.5 nm, γ₀/2π = 47 MHz, ω_HF/2π = 14.53 GHz.
    pub fn cadmium_111() -> Self {
        Self {
            name: "111Cd+".to_string(),
            mass: units::amu_to_kg(110.904),
            transition_wavelength: units::nm_to_m(214.5),
            excited_linewidth: units::mhz_to_rad_per_s(47.0),
            hyperfine_splitting: units::ghz_to_rad_per_s(14.53),
        }
    }

    /// Optical wavenumber 2π/λ, rad/m.
    pub fn wavenumber(&self) -> f64 {
        TAU / self.transition_wavelength
    }
}

/// Raman beam pair driving the motional sidebands along the simulated axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanGeometry {
    /// Wave-vector difference projected on the trap axis, rad/m.
    pub delta_k: f64,
    /// Carrier Rabi frequency Ω₀, rad/s.
    pub carrier_rabi: f64,
}

impl RamanGeometry {
    pub fn new(delta_k: f64, carrier_rabi: f64) -> Result<Self> {
        Ok(Self {
            delta_k: non_negative("raman.delta_k", delta_k)?,
            carrier_rabi: non_negative("raman.carrier_rabi", carrier_rabi)?,
        })
    }

    /// Two beams of the ion's transition wavelength crossing at `angle` (rad),
    /// with their difference vector along the trap axis: δk = 2k·sin(θ/2).
    pub fn from_crossing_angle(ion: &IonSpecies, angle: f64, carrier_rabi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&angle) {
            return Err(Error::Domain {
                name: "raman.angle",
                value: angle,
                expected: "0 <= angle <= pi",
            });
        }
        Self::new(2.0 * ion.wavenumber() * (angle / 2.0).sin(), carrier_rabi)
    }

    /// Perpendicular beams, δk = √2·(2π/λ).
    pub fn orthogonal_beams(ion: &IonSpecies, carrier_rabi: f64) -> Self {
        Self {
            delta_k: SQRT_2 * ion.wavenumber(),
            carrier_rabi,
        }
    }
}

/// Descriptive rf/static drive settings. Never used in computation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriveMetadata {
    /// V
    pub rf_amplitude: Option<f64>,
    /// rad/s
    pub drive_frequency: Option<f64>,
    /// V
    pub static_potential: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub label: String,
    /// Secular frequency ω_x of the simulated axis, rad/s.
    pub secular_frequency: f64,
    /// Distance from the ion to the closest electrode, m.
    pub electrode_distance: f64,
    pub drive: DriveMetadata,
}

impl TrapConfig {
    pub fn new(label: impl Into<String>, secular_frequency: f64, electrode_distance: f64) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            secular_frequency: positive("trap.secular_frequency", secular_frequency)?,
            electrode_distance: positive("trap.electrode_distance", electrode_distance)?,
            drive: DriveMetadata::default(),
        })
    }
}

/// Phenomenological electric-field noise spectral density
/// `S_E(ω, d) = s0·(ω/ω_ref)^(−α)·(d/d_ref)^(−p) + floor`, in (V/m)²/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub s0: f64,
    pub omega_ref: f64,
    pub d_ref: f64,
    pub freq_exponent: f64,
    pub dist_exponent: f64,
    /// Frequency- and distance-independent additive floor.
    pub floor: f64,
}

impl NoiseModel {
    pub fn new(
        s0: f64,
        omega_ref: f64,
        d_ref: f64,
        freq_exponent: f64,
        dist_exponent: f64,
    ) -> Result<Self> {
        Ok(Self {
            s0: non_negative("noise.s0", s0)?,
            omega_ref: positive("noise.omega_ref", omega_ref)?,
            d_ref: positive("noise.d_ref", d_ref)?,
            freq_exponent,
            dist_exponent,
            floor: 0.0,
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Result<Self> {
        self.floor = non_negative("noise.floor", floor)?;
        Ok(self)
    }
}

/// Lamb-Dicke parameter η = δk·√(ħ/2mω_x).
pub fn lamb_dicke(geometry: &RamanGeometry, ion: &IonSpecies, omega_x: f64) -> Result<f64> {
    let omega_x = positive("omega_x", omega_x)?;
    Ok(geometry.delta_k * (HBAR / (2.0 * ion.mass * omega_x)).sqrt())
}

/// Recoil frequency ω_R = ħ·δk²/2m, rad/s.
pub fn recoil_frequency(geometry: &RamanGeometry, ion: &IonSpecies) -> f64 {
    HBAR * geometry.delta_k * geometry.delta_k / (2.0 * ion.mass)
}

/// Mean occupation at the Doppler limit, γ₀/2ω_x.
pub fn doppler_limit_nbar(ion: &IonSpecies, omega_x: f64) -> Result<f64> {
    let omega_x = positive("omega_x", omega_x)?;
    Ok(ion.excited_linewidth / (2.0 * omega_x))
}

/// Trap frequency above which Doppler pre-cooling reaches the Lamb-Dicke
/// regime well enough for first-sideband cooling: √(γ₀·ω_R/2).
pub fn cooling_threshold(ion: &IonSpecies, geometry: &RamanGeometry) -> f64 {
    (ion.excited_linewidth * recoil_frequency(geometry, ion) / 2.0).sqrt()
}

/// Heating rate ṅ = e²·S_E/(4mħω_x) in quanta/s for a uniform field noise
/// of spectral density `s_e` ((V/m)²/Hz) at the secular frequency.
pub fn heating_rate_from_noise(s_e: f64, ion: &IonSpecies, omega_x: f64) -> Result<f64> {
    let s_e = non_negative("s_e", s_e)?;
    let omega_x = positive("omega_x", omega_x)?;
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * s_e / (4.0 * ion.mass * HBAR * omega_x))
}

/// Inverse of [`heating_rate_from_noise`].
pub fn noise_from_heating_rate(ndot: f64, ion: &IonSpecies, omega_x: f64) -> Result<f64> {
    let ndot = non_negative("ndot", ndot)?;
    let omega_x = positive("omega_x", omega_x)?;
    Ok(ndot * 4.0 * ion.mass * HBAR * omega_x / (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE))
}

pub fn evaluate_noise(model: &NoiseModel, omega: f64, d: f64) -> Result<f64> {
    let omega = positive("omega", omega)?;
    let d = positive("d", d)?;
    let power_law = model.s0
        * (omega / model.omega_ref).powf(-model.freq_exponent)
        * (d / model.d_ref).powf(-model.dist_exponent);
    Ok(power_law + model.floor)
}
