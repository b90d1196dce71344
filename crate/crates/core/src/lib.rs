//! Simulation and analysis of the motional state of a single trapped ion.
//!
//! The crate covers the full chain from trap parameters to measured heating
//! rates:
//!
//! * [`physics`]: species, Raman drive, trap and noise records; Lamb-Dicke
//!   parameter, recoil frequency, Doppler limit, the ṅ ↔ S_E conversion.
//! * [`fock`]: truncated Fock-state populations and sideband couplings.
//! * [`dynamics`]: Raman sideband cooling cycles and noise-driven heating.
//! * [`spectroscopy`]: sideband spectra, flopping traces, finite-shot
//!   detection and sideband-asymmetry thermometry.
//! * [`analysis`]: heating-rate and power-law fits, cross-trap noise survey.
//!
//! Everything is SI internally with angular frequencies in rad/s; [`units`]
//! holds the conversions.
//!
//! ```
//! use iontrap::physics::{lamb_dicke, IonSpecies, RamanGeometry};
//! use iontrap::units::{khz_to_rad_per_s, mhz_to_rad_per_s};
//!
//! let ion = IonSpecies::cadmium_111();
//! let raman = RamanGeometry::orthogonal_beams(&ion, khz_to_rad_per_s(100.0));
//! let eta = lamb_dicke(&raman, &ion, mhz_to_rad_per_s(5.8)).unwrap();
//! assert!((eta - 0.116).abs() < 1e-3);
//! ```

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod io;
pub mod physics;
pub mod rng;
pub mod spectroscopy;
pub mod units;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/parameters.md")]
    mod parameters {}
    #[doc = include_str!("../../../book/src/fock-states.md")]
    mod fock_states {}
    #[doc = include_str!("../../../book/src/cooling.md")]
    mod cooling {}
    #[doc = include_str!("../../../book/src/heating.md")]
    mod heating {}
    #[doc = include_str!("../../../book/src/thermometry.md")]
    mod thermometry {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
