//! Physical constants (CODATA 2018) and the conversions between the
//! laboratory units used at the interfaces and the SI/rad·s⁻¹ units used
//! everywhere inside the crate.

use std::f64::consts::TAU;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Cyclic frequency in MHz to angular frequency in rad/s.
pub fn mhz_to_rad_per_s(mhz: f64) -> f64 {
    TAU * mhz * 1e6
}

pub fn rad_per_s_to_mhz(omega: f64) -> f64 {
    omega / (TAU * 1e6)
}

pub fn khz_to_rad_per_s(khz: f64) -> f64 {
    TAU * khz * 1e3
}

pub fn rad_per_s_to_khz(omega: f64) -> f64 {
    omega / (TAU * 1e3)
}

pub fn rad_per_s_to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub fn hz_to_rad_per_s(hz: f64) -> f64 {
    TAU * hz
}

pub fn ghz_to_rad_per_s(ghz: f64) -> f64 {
    TAU * ghz * 1e9
}

pub fn um_to_m(um: f64) -> f64 {
    um * 1e-6
}

pub fn m_to_um(m: f64) -> f64 {
    m * 1e6
}

pub fn nm_to_m(nm: f64) -> f64 {
    nm * 1e-9
}

pub fn us_to_s(us: f64) -> f64 {
    us * 1e-6
}

pub fn s_to_us(s: f64) -> f64 {
    s * 1e6
}

pub fn ms_to_s(ms: f64) -> f64 {
    ms * 1e-3
}

pub fn amu_to_kg(amu: f64) -> f64 {
    amu * ATOMIC_MASS_UNIT
}

pub fn kg_to_amu(kg: f64) -> f64 {
    kg / ATOMIC_MASS_UNIT
}
