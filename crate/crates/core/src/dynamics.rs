//! Time evolution of motional populations: Doppler pre-cooling, Raman
//! sideband cooling cycles, and heating by electric-field noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Error, Result};
use crate::fock::{
    default_n_max, n_max_for_tail, thermal_auto, thermal_distribution, PopulationDistribution, SidebandDrive,
    TAIL_LIMIT,
};
use crate::physics::{
    doppler_limit_nbar, evaluate_noise, heating_rate_from_noise, lamb_dicke, IonSpecies,
    NoiseModel, RamanGeometry, TrapConfig,
};
use crate::rng::stream_rng;
use crate::spectroscopy::{measure_nbar, ProbeConfig, Shots, ThermometryMethod};

/// What happens to the motion when the qubit is optically pumped back.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepumpModel {
    /// Populations unchanged.
    #[default]
    Ideal,
    /// Each scattered photon kicks n by ±1 with probability `eta_repump²`
    /// (split evenly between up and down).
    Recoil {
        eta_repump: f64,
        photons_per_repump: f64,
    },
}

/// How long each cooling pulse lasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseSchedule {
    /// Same pulse every cycle: the upper-sideband π time of level
    /// ⌈2·n̄₀ + 1⌉, with n̄₀ the mean of the distribution being cooled.
    Matched,
    /// Same pulse every cycle: the upper-sideband π time of the given level.
    PiForLevel(usize),
    /// Same explicit duration every cycle, s.
    Uniform(f64),
    /// Cycle k uses the π time of level max(1, round(n̄_k)), where n̄_k is
    /// the mean at the start of that cycle.
    Graduated,
    /// Explicit duration per cycle, s.
    PerCycle(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    pub cycles: usize,
    pub pulses: PulseSchedule,
    pub repump: RepumpModel,
}

impl CoolingSchedule {
    pub fn new(cycles: usize, pulses: PulseSchedule, repump: RepumpModel) -> Result<Self> {
        let s = Self { cycles, pulses, repump };
        s.validate()?;
        Ok(s)
    }

    /// `cycles` matched uniform pulses with ideal repumping.
    pub fn matched(cycles: usize) -> Self {
        Self {
            cycles,
            pulses: PulseSchedule::Matched,
            repump: RepumpModel::Ideal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.pulses {
            PulseSchedule::Uniform(t) => {
                positive("schedule.pulse_duration", *t)?;
            }
            PulseSchedule::PerCycle(ts) => {
                if ts.len() != self.cycles {
                    return Err(Error::Contract(format!(
                        "{} pulse durations for {} cycles",
                        ts.len(),
                        self.cycles
                    )));
                }
                for &t in ts {
                    positive("schedule.pulse_duration", t)?;
                }
            }
            PulseSchedule::PiForLevel(0) => {
                return Err(Error::Domain { name: "schedule.pi_level", value: 0.0, expected: ">= 1" })
            }
            _ => {}
        }
        if let RepumpModel::Recoil { eta_repump, photons_per_repump } = self.repump {
            non_negative("schedule.eta_repump", eta_repump)?;
            non_negative("schedule.photons_per_repump", photons_per_repump)?;
        }
        Ok(())
    }
}

/// Doppler cooling replaced by its fixed point: a thermal state at the
/// Doppler limit. `n_max = None` picks the default window.
pub fn doppler_cool(
    ion: &IonSpecies,
    omega_x: f64,
    n_max: Option<usize>,
) -> Result<PopulationDistribution> {
    let nbar = doppler_limit_nbar(ion, omega_x)?;
    match n_max {
        Some(n) => thermal_distribution(nbar, n),
        None => thermal_auto(nbar),
    }
}

/// One Raman cooling cycle: an upper-sideband pulse of length `t_pulse`
/// moves P_n·sin²(Ω_{n→n−1}t/2) from each level n ≥ 1 to n − 1, then the
/// repump step is applied.
pub fn raman_cooling_cycle(
    dist: &PopulationDistribution,
    drive: &SidebandDrive,
    t_pulse: f64,
    repump: RepumpModel,
) -> Result<PopulationDistribution> {
    positive("t_pulse", t_pulse)?;
    let p = dist.probabilities();
    let mut next = p.to_vec();
    for n in 1..p.len() {
        if p[n] == 0.0 {
            continue;
        }
        let s = (drive.upper(n) * t_pulse / 2.0).sin();
        let moved = p[n] * s * s;
        next[n] -= moved;
        next[n - 1] += moved;
    }
    if let RepumpModel::Recoil { eta_repump, photons_per_repump } = repump {
        next = recoil_kick(next, (eta_repump * eta_repump * photons_per_repump).min(1.0));
    }
    PopulationDistribution::renormalized(next, dist.tail_mass())
}

/// Symmetric ±1 kick with total probability `q`; the window grows by one
/// level whenever the top level is occupied so no mass leaves it.
fn recoil_kick(mut p: Vec<f64>, q: f64) -> Vec<f64> {
    if q == 0.0 {
        return p;
    }
    if *p.last().unwrap() > 0.0 {
        p.push(0.0);
    }
    let mut out = vec![0.0; p.len()];
    for (n, &pn) in p.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        let half = pn * q / 2.0;
        out[n + 1] += half;
        if n >= 1 {
            out[n - 1] += half;
            out[n] += pn - 2.0 * half;
        } else {
            out[n] += pn - half;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoolingRun {
    pub distribution: PopulationDistribution,
    /// n̄ before the first cycle and after each cycle (`cycles + 1` entries).
    pub trajectory: Vec<f64>,
    /// Pulse length used in each cycle, s.
    pub pulse_durations: Vec<f64>,
}

/// Level whose π time the matched uniform schedule uses.
pub fn matched_pi_level(nbar: f64) -> usize {
    ((2.0 * nbar + 1.0).ceil() as usize).max(1)
}

/// Applies `schedule.cycles` cooling cycles to `dist`.
pub fn run_cooling(
    dist: &PopulationDistribution,
    schedule: &CoolingSchedule,
    drive: &SidebandDrive,
) -> Result<CoolingRun> {
    schedule.validate()?;
    let mut current = dist.clone();
    let mut trajectory = Vec::with_capacity(schedule.cycles + 1);
    let mut durations = Vec::with_capacity(schedule.cycles);
    trajectory.push(current.mean());
    let fixed = match &schedule.pulses {
        PulseSchedule::Matched if schedule.cycles > 0 => {
            Some(drive.pi_time(matched_pi_level(dist.mean()))?)
        }
        PulseSchedule::PiForLevel(n) => Some(drive.pi_time(*n)?),
        PulseSchedule::Uniform(t) => Some(*t),
        _ => None,
    };
    for k in 0..schedule.cycles {
        let t = match (&schedule.pulses, fixed) {
            (_, Some(t)) => t,
            (PulseSchedule::PerCycle(ts), None) => ts[k],
            (PulseSchedule::Graduated, None) => {
                drive.pi_time((current.mean().round() as usize).max(1))?
            }
            _ => unreachable!("uniform schedules resolve before the loop"),
        };
        current = raman_cooling_cycle(&current, drive, t, schedule.repump)?;
        trajectory.push(current.mean());
        durations.push(t);
    }
    Ok(CoolingRun {
        distribution: current,
        trajectory,
        pulse_durations: durations,
    })
}

/// Richardson tolerance on the local error, per unit of ṅ·t.
pub const HEATING_TOLERANCE: f64 = 1e-8;

/// Right-hand side of the equal-rate birth-death equation in units of ṅ·t.
/// Returns the rate at which mass leaves the window through its top level.
fn birth_death_rhs(y: &[f64], dy: &mut [f64]) -> f64 {
    let top = y.len() - 1;
    for n in 0..=top {
        let nf = n as f64;
        let from_below = if n > 0 { nf * y[n - 1] } else { 0.0 };
        let from_above = if n < top { (nf + 1.0) * y[n + 1] } else { 0.0 };
        dy[n] = from_below + from_above - (2.0 * nf + 1.0) * y[n];
    }
    (top as f64 + 1.0) * y[top]
}

struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
        }
    }

    /// Advances `(y, leak)` by `h` in place.
    fn step(&mut self, y: &mut [f64], leak: &mut f64, h: f64) {
        let mut kl = [0.0; 4];
        kl[0] = birth_death_rhs(y, &mut self.k[0]);
        for (stage, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for ((t, &yi), &ki) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k[stage - 1]) {
                *t = yi + frac * h * ki;
            }
            let (tmp, k) = (&self.tmp, &mut self.k[stage]);
            kl[stage] = birth_death_rhs(tmp, k);
        }
        let [k0, k1, k2, k3] = &self.k;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h / 6.0 * (k0[i] + 2.0 * k1[i] + 2.0 * k2[i] + k3[i]);
        }
        *leak += h / 6.0 * (kl[0] + 2.0 * kl[1] + 2.0 * kl[2] + kl[3]);
    }
}

/// Evolves `dist` for `tau` seconds under
/// dP_n/dt = ṅ·[n·P_{n−1} + (n+1)·P_{n+1} − (2n+1)·P_n].
///
/// The window is widened up front to hold the grown distribution. Mass that
/// still flows past the top level is tracked and must stay below
/// [`TAIL_LIMIT`]. Integration is RK4 with step doubling: a step is accepted
/// when the full-step and two-half-step results agree within
/// [`HEATING_TOLERANCE`]·h (Richardson estimate) and total probability
/// (window plus leak) is conserved; the two-half-step result is kept.
pub fn heat_evolve(dist: &PopulationDistribution, ndot: f64, tau: f64) -> Result<PopulationDistribution> {
    let ndot = non_negative("ndot", ndot)?;
    let tau = non_negative("tau", tau)?;
    let s_end = ndot * tau;
    if s_end == 0.0 {
        return Ok(dist.clone());
    }
    // the flux through the top level over the whole run must fit the tail
    // budget, so size the window for a much smaller static tail
    let grown = dist.mean() + s_end;
    let n_max = dist
        .n_max()
        .max(dist.support_top() + default_n_max(grown).max(n_max_for_tail(grown, 1e-3 * TAIL_LIMIT)));
    let mut y = dist.extended(n_max).probabilities().to_vec();
    let mut leak = 0.0;
    let mut rk = Rk4::new(y.len());
    let (mut full, mut half) = (y.clone(), y.clone());

    // Gershgorin: |λ| ≤ 2(2N+1); keep each half step inside the RK4
    // stability interval (2.78)
    let h_stable = 2.5 / (2.0 * n_max as f64 + 1.0);
    let mut h = h_stable.min(s_end);
    let mut s = 0.0;
    while s_end - s > 1e-12 * s_end {
        h = h.min(h_stable).min(s_end - s);
        full.copy_from_slice(&y);
        half.copy_from_slice(&y);
        let (mut leak_full, mut leak_half) = (leak, leak);
        rk.step(&mut full, &mut leak_full, h);
        rk.step(&mut half, &mut leak_half, h / 2.0);
        rk.step(&mut half, &mut leak_half, h / 2.0);

        let err = full
            .iter()
            .zip(&half)
            .map(|(a, b)| (a - b).abs())
            .fold((leak_full - leak_half).abs(), f64::max)
            / 15.0;
        let drift = (half.iter().sum::<f64>() + leak_half - 1.0 - (y.iter().sum::<f64>() + leak - 1.0)).abs();
        let tol = HEATING_TOLERANCE * h + 8.0 * f64::EPSILON;
        if err <= tol && drift <= 1e-12 {
            y.copy_from_slice(&half);
            leak = leak_half;
            s += h;
            if leak > TAIL_LIMIT {
                return Err(Error::Truncation { tail: leak, limit: TAIL_LIMIT, n_max });
            }
            let grow = if err == 0.0 { 2.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 2.0) };
            h *= grow;
        } else {
            h *= if err > 0.0 { (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5) } else { 0.5 };
            if h < 1e-14 * s_end {
                return Err(Error::Contract("heating integrator step size underflow".into()));
            }
        }
    }
    PopulationDistribution::renormalized(y, leak.max(0.0) + dist.tail_mass())
}

/// One (delay, n̄, σ) measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingPoint {
    /// s
    pub delay: f64,
    pub nbar: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeatingSeries {
    points: Vec<HeatingPoint>,
}

impl HeatingSeries {
    pub fn new(points: Vec<HeatingPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            non_negative("delay", p.delay)?;
            non_negative("sigma", p.sigma)?;
            if !p.nbar.is_finite() {
                return Err(Error::Contract(format!("point {i}: n̄ = {} is not finite", p.nbar)));
            }
            if i > 0 && p.delay <= points[i - 1].delay {
                return Err(Error::Contract(format!(
                    "delays must be strictly increasing (point {i}: {} after {})",
                    p.delay,
                    points[i - 1].delay
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[HeatingPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Where the motional state starts before the heating delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Doppler limit followed by the cooling schedule.
    Cooled,
    /// A thermal state of the given n̄, skipping the cooling stage.
    Thermal(f64),
}

/// Everything needed to simulate a delay-scan heating measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatingExperiment {
    pub ion: IonSpecies,
    pub trap: TrapConfig,
    pub geometry: RamanGeometry,
    pub noise: NoiseModel,
    pub schedule: CoolingSchedule,
    pub probe: ProbeConfig,
    pub coupling: crate::fock::CouplingMode,
    pub method: ThermometryMethod,
    pub initial: InitialState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatingRun {
    pub series: HeatingSeries,
    /// Mean occupation of the simulated state at each delay.
    pub true_nbar: Vec<f64>,
    /// Heating rate implied by the noise model, quanta/s.
    pub ndot: f64,
    pub eta: f64,
    pub initial_nbar: f64,
}

impl HeatingExperiment {
    pub fn drive(&self) -> Result<SidebandDrive> {
        let eta = lamb_dicke(&self.geometry, &self.ion, self.trap.secular_frequency)?;
        SidebandDrive::new(eta, self.geometry.carrier_rabi, self.coupling)
    }

    pub fn heating_rate(&self) -> Result<f64> {
        let s_e = evaluate_noise(&self.noise, self.trap.secular_frequency, self.trap.electrode_distance)?;
        heating_rate_from_noise(s_e, &self.ion, self.trap.secular_frequency)
    }

    /// Motional state at the start of the delay.
    pub fn prepare(&self) -> Result<PopulationDistribution> {
        match self.initial {
            InitialState::Thermal(nbar) => thermal_auto(nbar),
            InitialState::Cooled => {
                let doppler = doppler_cool(&self.ion, self.trap.secular_frequency, None)?;
                Ok(run_cooling(&doppler, &self.schedule, &self.drive()?)?.distribution)
            }
        }
    }
}

/// Cool, wait each of `delays` (s) with the noise-model heating rate, then
/// measure n̄ with the experiment's probe. Delay `i` draws its shots from
/// stream `i` of `seed`, so the output is independent of thread count.
pub fn run_heating_experiment(exp: &HeatingExperiment, delays: &[f64], seed: u64) -> Result<HeatingRun> {
    if delays.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    exp.probe.validate()?;
    exp.schedule.validate()?;
    let drive = exp.drive()?;
    let ndot = exp.heating_rate()?;
    let start = exp.prepare()?;

    let measured: Vec<(f64, f64, f64)> = delays
        .par_iter()
        .enumerate()
        .map(|(i, &delay)| {
            let heated = heat_evolve(&start, ndot, delay)?;
            let mut rng = stream_rng(seed, i as u64);
            let est = measure_nbar(&heated, &drive, &exp.probe, exp.method, &mut rng)?;
            Ok((est.nbar, est.sigma, heated.mean()))
        })
        .collect::<Result<_>>()?;

    let points = delays
        .iter()
        .zip(&measured)
        .map(|(&delay, &(nbar, sigma, _))| HeatingPoint {
            delay,
            nbar,
            sigma: if exp.probe.shots == Shots::Infinite { 0.0 } else { sigma },
        })
        .collect();
    Ok(HeatingRun {
        series: HeatingSeries::new(points)?,
        true_nbar: measured.iter().map(|m| m.2).collect(),
        ndot,
        eta: drive.eta,
        initial_nbar: start.mean(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{thermal_distribution, CouplingMode};
    use crate::units::{mhz_to_rad_per_s, um_to_m};
    use std::f64::consts::{PI, TAU};

    fn drive(eta: f64) -> SidebandDrive {
        SidebandDrive::lamb_dicke(eta, TAU * 100e3).unwrap()
    }

    #[test]
    fn doppler_examples() {
        let ion = IonSpecies::cadmium_111();
        let d = doppler_cool(&ion, mhz_to_rad_per_s(5.8), None).unwrap();
        assert!((d.mean() - 4.051_724).abs() < 1e-6);
        let d = doppler_cool(&ion, mhz_to_rad_per_s(2.69), None).unwrap();
        assert!((d.mean() - 8.736_059).abs() < 1e-6);
        let d = doppler_cool(&ion, ion.excited_linewidth / 2.0, Some(60)).unwrap();
        assert!((d.mean() - 1.0).abs() < 1e-6);
        assert!(doppler_cool(&ion, mhz_to_rad_per_s(2.69), Some(40)).is_err());
    }

    #[test]
    fn cycle_examples() {
        let d = drive(0.116);
        let tpi = PI / (d.eta * d.omega0);
        let g = PopulationDistribution::ground(10).unwrap();
        assert_eq!(raman_cooling_cycle(&g, &d, 3.3e-5, RepumpModel::Ideal).unwrap(), g);

        let one = PopulationDistribution::fock(1, 10).unwrap();
        let out = raman_cooling_cycle(&one, &d, tpi, RepumpModel::Ideal).unwrap();
        assert!((out.get(0) - 1.0).abs() < 1e-12);

        let two = PopulationDistribution::fock(2, 10).unwrap();
        let out = raman_cooling_cycle(&two, &d, tpi, RepumpModel::Ideal).unwrap();
        // sin²(π√2/2) = 0.633128
        assert!((out.get(1) - 0.633_128).abs() < 1e-6);
        assert!((out.get(2) - 0.366_872).abs() < 1e-6);

        assert!(raman_cooling_cycle(&two, &d, 0.0, RepumpModel::Ideal).is_err());
    }

    #[test]
    fn recoil_repump_heats_ground_state() {
        let d = drive(0.116);
        let g = PopulationDistribution::ground(1).unwrap();
        let kick = RepumpModel::Recoil { eta_repump: 0.1, photons_per_repump: 3.0 };
        let out = raman_cooling_cycle(&g, &d, 1e-5, kick).unwrap();
        // q = 0.03, half goes up, the down half stays in |0⟩
        assert!((out.get(1) - 0.015).abs() < 1e-15);
        let top = PopulationDistribution::fock(1, 1).unwrap();
        let out = raman_cooling_cycle(&top, &d, 1e-12, kick).unwrap();
        assert_eq!(out.n_max(), 2);
    }

    #[test]
    fn zero_cycles_is_identity() {
        let t = thermal_auto(4.05).unwrap();
        let run = run_cooling(&t, &CoolingSchedule::matched(0), &drive(0.116)).unwrap();
        assert_eq!(run.distribution, t);
        assert_eq!(run.trajectory, vec![t.mean()]);
    }

    /// With t = π/(ηΩ₀) the level n = 4 sees sin²(π) = 0 and never empties.
    /// Values below come from an independent Python evaluation of the same
    /// cycle map (n_max = 200).
    #[test]
    fn pi_for_ground_level_leaves_dark_population() {
        let t = thermal_distribution(4.05, 200).unwrap();
        let s = CoolingSchedule::new(40, PulseSchedule::PiForLevel(1), RepumpModel::Ideal).unwrap();
        let run = run_cooling(&t, &s, &drive(0.116)).unwrap();
        assert!((run.distribution.mean() - 2.057_144_5).abs() < 1e-6, "{}", run.distribution.mean());
        assert!(run.trajectory.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn matched_schedule_reaches_ground_state() {
        let t = thermal_auto(4.05).unwrap();
        let run = run_cooling(&t, &CoolingSchedule::matched(40), &drive(0.116)).unwrap();
        assert_eq!(run.trajectory.len(), 41);
        assert!(run.distribution.mean() <= 0.1, "{}", run.distribution.mean());

        let t = thermal_auto(8.74).unwrap();
        let run = run_cooling(&t, &CoolingSchedule::matched(90), &drive(0.171)).unwrap();
        assert!(run.distribution.ground_state_fraction() >= 0.8);
    }

    #[test]
    fn graduated_schedule_cools() {
        let t = thermal_auto(4.05).unwrap();
        let s = CoolingSchedule::new(60, PulseSchedule::Graduated, RepumpModel::Ideal).unwrap();
        let run = run_cooling(&t, &s, &drive(0.116)).unwrap();
        assert!(run.distribution.mean() < t.mean());
        assert!(run.pulse_durations[0] < *run.pulse_durations.last().unwrap());
    }

    #[test]
    fn per_cycle_schedule_length_checked() {
        assert!(CoolingSchedule::new(3, PulseSchedule::PerCycle(vec![1e-5; 2]), RepumpModel::Ideal).is_err());
        assert!(CoolingSchedule::new(1, PulseSchedule::Uniform(-1.0), RepumpModel::Ideal).is_err());
    }

    #[test]
    fn heat_identity_and_linear_growth() {
        let t = thermal_auto(0.03).unwrap();
        assert_eq!(heat_evolve(&t, 24.8, 0.0).unwrap(), t);
        assert_eq!(heat_evolve(&t, 0.0, 1.0).unwrap(), t);
        let h = heat_evolve(&t, 24.8, 0.040).unwrap();
        // 0.03 + 24.8·0.04 = 1.022
        assert!((h.mean() - 1.022).abs() < 0.01 * 1.022);
        assert!((h.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(heat_evolve(&t, -1.0, 1.0).is_err());
    }

    #[test]
    fn heat_from_ground_is_geometric() {
        let g = PopulationDistribution::ground(20).unwrap();
        let h = heat_evolve(&g, 10.0, 0.1).unwrap();
        for n in 0..40 {
            assert!((h.get(n) - 0.5f64.powi(n as i32 + 1)).abs() < 1e-6);
        }
    }

    #[test]
    fn heat_rejects_fixed_window_overflow() {
        // a wide window that is nevertheless too small never happens since the
        // window grows; an already-truncated input carries its tail forward
        let mut p = vec![0.0; 21];
        p[20] = 1.0;
        let top = PopulationDistribution::from_probabilities(p).unwrap();
        let h = heat_evolve(&top, 1.0, 0.5).unwrap();
        assert!(h.n_max() > 20);
        assert!(h.tail_mass() <= TAIL_LIMIT);
    }

    fn quadrupole_experiment(shots: Shots) -> HeatingExperiment {
        let ion = IonSpecies::cadmium_111();
        let wx = mhz_to_rad_per_s(5.8);
        let trap = TrapConfig::new("quadrupole", wx, um_to_m(150.0)).unwrap();
        let geometry = RamanGeometry::orthogonal_beams(&ion, TAU * 100e3);
        let s0 = crate::physics::noise_from_heating_rate(24.8, &ion, wx).unwrap();
        let noise = NoiseModel::new(s0, wx, um_to_m(150.0), 1.4, 4.0).unwrap();
        let tpi = PI / (lamb_dicke(&geometry, &ion, wx).unwrap() * geometry.carrier_rabi);
        HeatingExperiment {
            ion,
            trap,
            geometry,
            noise,
            schedule: CoolingSchedule::matched(40),
            probe: ProbeConfig::new(tpi, shots, 0.997).unwrap(),
            coupling: CouplingMode::LambDicke,
            method: ThermometryMethod::PeakRatio,
            initial: InitialState::Thermal(0.03),
        }
    }

    #[test]
    fn noiseless_series_is_exactly_linear() {
        let exp = quadrupole_experiment(Shots::Infinite);
        let delays: Vec<f64> = (0..=10).map(|k| k as f64 * 4e-3).collect();
        let run = run_heating_experiment(&exp, &delays, 1).unwrap();
        assert!((run.ndot - 24.8).abs() < 1e-9);
        for p in run.series.points() {
            assert!((p.nbar - (0.03 + 24.8 * p.delay)).abs() < 1e-6, "{p:?}");
            assert_eq!(p.sigma, 0.0);
        }
    }

    #[test]
    fn silent_noise_gives_flat_series() {
        let mut exp = quadrupole_experiment(Shots::Infinite);
        exp.noise.s0 = 0.0;
        exp.initial = InitialState::Cooled;
        let run = run_heating_experiment(&exp, &[0.0, 0.01, 0.02], 0).unwrap();
        let first = run.series.points()[0].nbar;
        assert!(run.series.points().iter().all(|p| p.nbar == first));
        assert_eq!(run.ndot, 0.0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let exp = quadrupole_experiment(Shots::Finite(500));
        let delays = [0.0, 0.01, 0.02, 0.03];
        let a = run_heating_experiment(&exp, &delays, 42).unwrap();
        let b = run_heating_experiment(&exp, &delays, 42).unwrap();
        let c = run_heating_experiment(&exp, &delays, 43).unwrap();
        assert_eq!(a.series, b.series);
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn series_validation() {
        let p = |delay| HeatingPoint { delay, nbar: 0.1, sigma: 0.0 };
        assert!(HeatingSeries::new(vec![p(0.0), p(0.0)]).is_err());
        assert!(HeatingSeries::new(vec![p(-1.0)]).is_err());
        assert!(run_heating_experiment(&quadrupole_experiment(Shots::Infinite), &[], 0).is_err());
    }
}
