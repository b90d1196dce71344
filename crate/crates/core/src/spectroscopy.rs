//! Raman sideband spectra, Rabi-flopping traces, finite-shot detection and
//! sideband-asymmetry thermometry.
//!
//! The central fact used here: for a thermal state with mean n̄ the upper
//! sideband transfer equals n̄/(1+n̄) times the lower sideband transfer, at
//! any pulse length and drive strength, because P_{n+1} = P_n·n̄/(1+n̄) and
//! the coupling of |n+1⟩→|n⟩ equals that of |n⟩→|n+1⟩.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, Error, Result};
use crate::fock::{PopulationDistribution, SidebandDrive, SidebandOrder};
use crate::rng::stream_rng;

/// Number of repetitions per probe setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    Finite(u64),
    /// Exact probabilities, no sampling noise.
    Infinite,
}

impl std::str::FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" => Ok(Shots::Infinite),
            other => match other.parse::<u64>() {
                Ok(n) if n >= 1 => Ok(Shots::Finite(n)),
                _ => Err(Error::Format(format!("shots must be a positive integer or 'inf', got '{s}'"))),
            },
        }
    }
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Probe pulse duration, s.
    pub t_probe: f64,
    /// Beatnote offsets δ from the carrier, rad/s.
    pub detuning_grid: Vec<f64>,
    pub orders: Vec<SidebandOrder>,
    pub shots: Shots,
    pub detection_fidelity: f64,
}

impl ProbeConfig {
    /// An on-resonance probe with no detuning grid and both first sidebands.
    pub fn new(t_probe: f64, shots: Shots, detection_fidelity: f64) -> Result<Self> {
        let probe = Self {
            t_probe,
            detuning_grid: Vec::new(),
            orders: vec![SidebandOrder::LOWER, SidebandOrder::UPPER],
            shots,
            detection_fidelity,
        };
        probe.validate()?;
        Ok(probe)
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.detuning_grid = grid;
        self
    }

    pub fn with_orders(mut self, orders: Vec<SidebandOrder>) -> Self {
        self.orders = orders;
        self
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("probe.t_probe", self.t_probe)?;
        if let Shots::Finite(0) = self.shots {
            return Err(Error::Domain { name: "probe.shots", value: 0.0, expected: ">= 1" });
        }
        if !(self.detection_fidelity > 0.5 && self.detection_fidelity <= 1.0) {
            return Err(Error::Domain {
                name: "probe.detection_fidelity",
                value: self.detection_fidelity,
                expected: "0.5 < fidelity <= 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// rad/s from the carrier
    pub delta: f64,
    pub p_bright: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    /// Grid indices where overlapping orders summed above 1 and were clamped.
    pub clamped: Vec<usize>,
}

/// Transfer probability of a detuned two-level Rabi drive:
/// `ω²/(ω²+Δ²)·sin²(√(ω²+Δ²)·t/2)`.
pub fn flop_probability(omega: f64, detuning: f64, t: f64) -> f64 {
    let gen2 = omega * omega + detuning * detuning;
    if gen2 == 0.0 {
        return 0.0;
    }
    let s = (gen2.sqrt() * t / 2.0).sin();
    omega * omega / gen2 * s * s
}

/// Resonant transfer Σ_n P_n·sin²(Ω_{n→n−s}·t/2) on a single order.
pub fn sideband_strength(
    dist: &PopulationDistribution,
    drive: &SidebandDrive,
    order: SidebandOrder,
    t: f64,
) -> f64 {
    dist.probabilities()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(n, p)| {
            let s = (drive.coupling(n, order) * t / 2.0).sin();
            p * s * s
        })
        .sum()
}

/// Exact bright-state probability at beatnote offset `delta`, before clamping.
fn spectrum_probability(
    dist: &PopulationDistribution,
    drive: &SidebandDrive,
    omega_x: f64,
    probe: &ProbeConfig,
    delta: f64,
) -> f64 {
    probe
        .orders
        .iter()
        .map(|&order| {
            let offset = delta - order.value() as f64 * omega_x;
            dist.probabilities()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(n, p)| p * flop_probability(drive.coupling(n, order), offset, probe.t_probe))
                .sum::<f64>()
        })
        .sum()
}

/// Sideband spectrum over `probe.detuning_grid`.
///
/// With [`Shots::Finite`] every grid point is sampled from its own random
/// stream of `seed`, so the result does not depend on thread scheduling.
pub fn synthesize_spectrum(
    dist: &PopulationDistribution,
    drive: &SidebandDrive,
    omega_x: f64,
    probe: &ProbeConfig,
    seed: u64,
) -> Result<Spectrum> {
    probe.validate()?;
    let exact: Vec<f64> = probe
        .detuning_grid
        .par_iter()
        .map(|&delta| spectrum_probability(dist, drive, omega_x, probe, delta))
        .collect();

    let mut clamped = Vec::new();
    let points = exact
        .iter()
        .zip(&probe.detuning_grid)
        .enumerate()
        .map(|(i, (&p, &delta))| {
            let p = if p > 1.0 {
                clamped.push(i);
                1.0
            } else {
                p
            };
            let (p_bright, sigma) = match probe.shots {
                Shots::Infinite => (p, 0.0),
                Shots::Finite(n) => {
                    let mut rng = stream_rng(seed, i as u64);
                    let d = simulate_detection(p, n, probe.detection_fidelity, &mut rng)?;
                    (d.p_est, d.sigma)
                }
            };
            Ok(SpectrumPoint { delta, p_bright, sigma })
        })
        .collect::<Result<Vec<_>>>()?;
    if !clamped.is_empty() {
        log::warn!(
            "{} spectrum point(s) exceeded unit probability from overlapping orders and were clamped",
            clamped.len()
        );
    }
    Ok(Spectrum { points, clamped })
}

/// Bright-state probability after driving `order` for each of `times`.
pub fn rabi_flop_trace(
    dist: &PopulationDistribution,
    order: SidebandOrder,
    drive: &SidebandDrive,
    times: &[f64],
) -> Vec<(f64, f64)> {
    times
        .iter()
        .map(|&t| (t, sideband_strength(dist, drive, order, t)))
        .collect()
}

/// Outcome of a simulated projective measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Observed bright fraction.
    pub p_est: f64,
    /// Binomial standard error of `p_est`.
    pub sigma: f64,
}

/// Probability of registering "bright" given the true bright probability and
/// a symmetric detection fidelity.
pub fn effective_bright_probability(p_true: f64, fidelity: f64) -> f64 {
    fidelity * p_true + (1.0 - fidelity) * (1.0 - p_true)
}

/// Draws `shots` binomial outcomes at the fidelity-degraded probability.
pub fn simulate_detection<R: Rng + ?Sized>(
    p_true: f64,
    shots: u64,
    fidelity: f64,
    rng: &mut R,
) -> Result<Detection> {
    if shots == 0 {
        return Err(Error::Domain { name: "shots", value: 0.0, expected: ">= 1" });
    }
    if !(0.0..=1.0).contains(&p_true) {
        return Err(Error::Domain { name: "p_true", value: p_true, expected: "0 <= p <= 1" });
    }
    let p_eff = effective_bright_probability(p_true, fidelity).clamp(0.0, 1.0);
    let bright = Binomial::new(shots, p_eff)
        .map_err(|e| Error::Contract(e.to_string()))?
        .sample(rng);
    let n = shots as f64;
    let p_est = bright as f64 / n;
    Ok(Detection {
        p_est,
        sigma: (p_est * (1.0 - p_est) / n).sqrt(),
    })
}

/// Undoes the symmetric detection error on an observed bright fraction.
fn correct_for_fidelity(d: Detection, fidelity: f64) -> (f64, f64) {
    let contrast = 2.0 * fidelity - 1.0;
    let p = ((d.p_est - (1.0 - fidelity)) / contrast).clamp(0.0, 1.0);
    (p, d.sigma / contrast)
}

/// n̄ = r/(1 − r) from the upper/lower sideband strength ratio.
pub fn nbar_from_sideband_ratio(r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::Domain { name: "sideband ratio", value: r, expected: ">= 0" });
    }
    if r >= 1.0 {
        return Err(Error::UnphysicalRatio { ratio: r });
    }
    Ok(r / (1.0 - r))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermometryMethod {
    /// Both first sidebands on resonance for `t_probe`.
    #[default]
    PeakRatio,
    /// Amplitude ratio of the upper and lower flopping traces sampled on
    /// `FLOP_FIT_POINTS` times spread over (0, t_probe].
    FlopFit,
}

pub const FLOP_FIT_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbarEstimate {
    pub nbar: f64,
    pub sigma: f64,
}

/// Upper and lower transfer measured (or computed) at one pulse time.
fn probe_pair<R: Rng + ?Sized>(
    dist: &PopulationDistribution,
    drive: &SidebandDrive,
    probe: &ProbeConfig,
    t: f64,
    rng: &mut R,
) -> Result<((f64, f64), (f64, f64))> {
    let upper = sideband_strength(dist, drive, SidebandOrder::UPPER, t);
    let lower = sideband_strength(dist, drive, SidebandOrder::LOWER, t);
    match probe.shots {
        Shots::Infinite => Ok(((upper, 0.0), (lower, 0.0))),
        Shots::Finite(n) => {
            let f = probe.detection_fidelity;
            let u = correct_for_fidelity(simulate_detection(upper.min(1.0), n, f, rng)?, f);
            let l = correct_for_fidelity(simulate_detection(lower.min(1.0), n, f, rng)?, f);
            Ok((u, l))
        }
    }
}

fn ratio_estimate(u: (f64, f64), l: (f64, f64)) -> Result<NbarEstimate> {
    if l.0 <= 0.0 {
        return Err(Error::Domain {
            name: "lower sideband strength",
            value: l.0,
            expected: "> 0 (probe too short or drive off)",
        });
    }
    let r = u.0 / l.0;
    let nbar = nbar_from_sideband_ratio(r)?;
    let sigma_r = ((u.1 / l.0).powi(2) + (u.0 * l.1 / (l.0 * l.0)).powi(2)).sqrt();
    Ok(NbarEstimate {
        nbar,
        sigma: sigma_r / ((1.0 - r) * (1.0 - r)),
    })
}

/// Sideband-asymmetry thermometry of `dist` with the given probe.
///
/// Finite-shot draws come from `rng`; with [`Shots::Infinite`] it is unused.
/// Observed fractions are corrected for the probe's detection fidelity
/// before the ratio is formed.
pub fn measure_nbar<R: Rng + ?Sized>(
    dist: &PopulationDistribution,
    drive: &SidebandDrive,
    probe: &ProbeConfig,
    method: ThermometryMethod,
    rng: &mut R,
) -> Result<NbarEstimate> {
    probe.validate()?;
    match method {
        ThermometryMethod::PeakRatio => {
            let (u, l) = probe_pair(dist, drive, probe, probe.t_probe, rng)?;
            ratio_estimate(u, l)
        }
        ThermometryMethod::FlopFit => {
            let (mut su, mut sl) = ((0.0, 0.0), (0.0, 0.0));
            for k in 1..=FLOP_FIT_POINTS {
                let t = probe.t_probe * k as f64 / FLOP_FIT_POINTS as f64;
                let (u, l) = probe_pair(dist, drive, probe, t, rng)?;
                su = (su.0 + u.0, su.1 + u.1 * u.1);
                sl = (sl.0 + l.0, sl.1 + l.1 * l.1);
            }
            ratio_estimate((su.0, su.1.sqrt()), (sl.0, sl.1.sqrt()))
        }
    }
}
