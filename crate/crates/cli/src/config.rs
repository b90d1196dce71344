//! Run configuration: a sectioned key-value (TOML) file whose keys carry
//! their units (`freq_mhz`, `d_um`, `t_probe_us`, ...). Parsing converts
//! everything to SI and enforces the parameter invariants, reporting the
//! offending key with its file and line.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use iontrap::dynamics::{CoolingSchedule, InitialState, PulseSchedule, RepumpModel};
use iontrap::fock::{CouplingMode, SidebandOrder};
use iontrap::physics::{DriveMetadata, IonSpecies, NoiseModel, RamanGeometry, TrapConfig};
use iontrap::rng::DEFAULT_SEED;
use iontrap::spectroscopy::{Shots, ThermometryMethod};
use iontrap::units;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read config: {message}")]
    Missing { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: invalid {key}: {message}")]
    Invalid {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ion: RawIon,
    trap: RawTrap,
    raman: RawRaman,
    noise: RawNoise,
    #[serde(default)]
    probe: RawProbe,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIon {
    name: String,
    mass_amu: f64,
    linewidth_mhz: f64,
    wavelength_nm: f64,
    #[serde(default)]
    hyperfine_ghz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    label: String,
    freq_mhz: f64,
    d_um: f64,
    rf_amplitude_v: Option<f64>,
    drive_freq_mhz: Option<f64>,
    static_v: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRaman {
    angle_deg: Option<f64>,
    delta_k_per_um: Option<f64>,
    omega0_khz: f64,
    #[serde(default)]
    coupling: CouplingMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    s0_v2_per_m2_hz: f64,
    ref_freq_mhz: f64,
    ref_d_um: f64,
    alpha: f64,
    p: f64,
    #[serde(default)]
    floor_v2_per_m2_hz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawShots {
    Count(i64),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    t_probe_us: Option<f64>,
    t_probe_pi_level: Option<usize>,
    shots: RawShots,
    fidelity: f64,
    scan_halfwidth_khz: f64,
    scan_points: usize,
    orders: Vec<i8>,
    method: ThermometryMethod,
    flop_max_us: f64,
    flop_points: usize,
}

impl Default for RawProbe {
    fn default() -> Self {
        Self {
            t_probe_us: Some(80.0),
            t_probe_pi_level: None,
            shots: RawShots::Word("inf".into()),
            fidelity: 0.997,
            scan_halfwidth_khz: 40.0,
            scan_points: 81,
            orders: vec![-1, 1],
            method: ThermometryMethod::PeakRatio,
            flop_max_us: 200.0,
            flop_points: 201,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSchedule {
    cycles: usize,
    pulses: String,
    pulse_us: Option<f64>,
    pi_level: Option<usize>,
    repump: String,
    eta_repump: f64,
    photons_per_repump: f64,
}

impl Default for RawSchedule {
    fn default() -> Self {
        Self {
            cycles: 40,
            pulses: "matched".into(),
            pulse_us: None,
            pi_level: None,
            repump: "ideal".into(),
            eta_repump: 0.0,
            photons_per_repump: 0.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    seed: u64,
    delays_ms: Vec<f64>,
    initial_nbar: Option<f64>,
    out_dir: Option<PathBuf>,
    sweep_freq_mhz: Vec<f64>,
    survey: Option<PathBuf>,
}

impl Default for RawRun {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            delays_ms: (0..=10).map(|k| 4.0 * k as f64).collect(),
            initial_nbar: None,
            out_dir: None,
            sweep_freq_mhz: (2..=12).map(|k| 0.5 * k as f64).collect(),
            survey: None,
        }
    }
}

/// How long the thermometry probe pulse lasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeDuration {
    /// s
    Fixed(f64),
    /// Upper-sideband π time of this level at the configured drive.
    PiForLevel(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSettings {
    pub duration: ProbeDuration,
    pub shots: Shots,
    pub fidelity: f64,
    /// Half width of each sideband scan window, rad/s.
    pub scan_halfwidth: f64,
    pub scan_points: usize,
    pub orders: Vec<SidebandOrder>,
    pub method: ThermometryMethod,
    /// s
    pub flop_max: f64,
    pub flop_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    /// s
    pub delays: Vec<f64>,
    pub initial: InitialState,
    pub out_dir: Option<PathBuf>,
    /// rad/s
    pub sweep_frequencies: Vec<f64>,
    pub survey: Option<PathBuf>,
}

/// A fully validated configuration in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub ion: IonSpecies,
    pub trap: TrapConfig,
    pub geometry: RamanGeometry,
    pub coupling: CouplingMode,
    pub noise: NoiseModel,
    pub probe: ProbeSettings,
    pub schedule: CoolingSchedule,
    pub run: RunSettings,
}

/// 1-based line of `key` inside `[section]`, falling back to the section
/// header, then to line 1.
fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut in_section = false;
    let mut header = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            in_section = t.trim_start_matches('[').trim_end_matches(']').trim() == section;
            if in_section {
                header = Some(i + 1);
            }
            continue;
        }
        if in_section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}

struct Validator<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Validator<'_> {
    fn invalid(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            path: self.path.to_path_buf(),
            line: locate(self.text, section, key),
            key: format!("{section}.{key}"),
            message: message.into(),
        }
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(section, key, format!("must be > 0, got {v}")))
        }
    }

    fn non_negative(&self, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(section, key, format!("must be >= 0, got {v}")))
        }
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Missing {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text, path)
}

/// Parses configuration text; `path` is used only in diagnostics.
pub fn parse_config_str(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        ConfigError::Parse {
            path: path.to_path_buf(),
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    let v = Validator { path, text };

    let ion = IonSpecies {
        name: raw.ion.name,
        mass: units::amu_to_kg(v.positive("ion", "mass_amu", raw.ion.mass_amu)?),
        transition_wavelength: units::nm_to_m(v.positive("ion", "wavelength_nm", raw.ion.wavelength_nm)?),
        excited_linewidth: units::mhz_to_rad_per_s(v.positive("ion", "linewidth_mhz", raw.ion.linewidth_mhz)?),
        hyperfine_splitting: units::ghz_to_rad_per_s(v.non_negative("ion", "hyperfine_ghz", raw.ion.hyperfine_ghz)?),
    };

    let trap = TrapConfig {
        label: raw.trap.label,
        secular_frequency: units::mhz_to_rad_per_s(v.positive("trap", "freq_mhz", raw.trap.freq_mhz)?),
        electrode_distance: units::um_to_m(v.positive("trap", "d_um", raw.trap.d_um)?),
        drive: DriveMetadata {
            rf_amplitude: raw.trap.rf_amplitude_v,
            drive_frequency: raw.trap.drive_freq_mhz.map(units::mhz_to_rad_per_s),
            static_potential: raw.trap.static_v,
        },
    };

    let omega0 = units::khz_to_rad_per_s(v.non_negative("raman", "omega0_khz", raw.raman.omega0_khz)?);
    let geometry = match (raw.raman.angle_deg, raw.raman.delta_k_per_um) {
        (Some(angle), None) => {
            if !(0.0..=180.0).contains(&angle) {
                return Err(v.invalid("raman", "angle_deg", format!("must lie in [0, 180], got {angle}")));
            }
            RamanGeometry::from_crossing_angle(&ion, angle.to_radians(), omega0)
                .map_err(|e| v.invalid("raman", "angle_deg", e.to_string()))?
        }
        (None, Some(dk)) => RamanGeometry {
            delta_k: v.non_negative("raman", "delta_k_per_um", dk)? * 1e6,
            carrier_rabi: omega0,
        },
        _ => {
            return Err(v.invalid("raman", "angle_deg", "give exactly one of angle_deg or delta_k_per_um"))
        }
    };

    let noise = NoiseModel {
        s0: v.non_negative("noise", "s0_v2_per_m2_hz", raw.noise.s0_v2_per_m2_hz)?,
        omega_ref: units::mhz_to_rad_per_s(v.positive("noise", "ref_freq_mhz", raw.noise.ref_freq_mhz)?),
        d_ref: units::um_to_m(v.positive("noise", "ref_d_um", raw.noise.ref_d_um)?),
        freq_exponent: raw.noise.alpha,
        dist_exponent: raw.noise.p,
        floor: v.non_negative("noise", "floor_v2_per_m2_hz", raw.noise.floor_v2_per_m2_hz)?,
    };

    let p = raw.probe;
    let duration = match (p.t_probe_us, p.t_probe_pi_level) {
        (Some(t), None) => ProbeDuration::Fixed(units::us_to_s(v.non_negative("probe", "t_probe_us", t)?)),
        (None, Some(0)) => return Err(v.invalid("probe", "t_probe_pi_level", "must be >= 1")),
        (None, Some(n)) => ProbeDuration::PiForLevel(n),
        _ => {
            return Err(v.invalid("probe", "t_probe_us", "give exactly one of t_probe_us or t_probe_pi_level"))
        }
    };
    let shots = match p.shots {
        RawShots::Count(n) if n >= 1 => Shots::Finite(n as u64),
        RawShots::Count(n) => return Err(v.invalid("probe", "shots", format!("must be >= 1, got {n}"))),
        RawShots::Word(w) => w
            .parse()
            .map_err(|_| v.invalid("probe", "shots", format!("expected a count or \"inf\", got \"{w}\"")))?,
    };
    if !(p.fidelity > 0.5 && p.fidelity <= 1.0) {
        return Err(v.invalid("probe", "fidelity", format!("must lie in (0.5, 1], got {}", p.fidelity)));
    }
    let orders = p
        .orders
        .iter()
        .map(|&s| SidebandOrder::new(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| v.invalid("probe", "orders", e.to_string()))?;
    if p.scan_points < 2 {
        return Err(v.invalid("probe", "scan_points", "need at least 2 points"));
    }
    if p.flop_points < 2 {
        return Err(v.invalid("probe", "flop_points", "need at least 2 points"));
    }
    let probe = ProbeSettings {
        duration,
        shots,
        fidelity: p.fidelity,
        scan_halfwidth: units::khz_to_rad_per_s(v.positive("probe", "scan_halfwidth_khz", p.scan_halfwidth_khz)?),
        scan_points: p.scan_points,
        orders,
        method: p.method,
        flop_max: units::us_to_s(v.positive("probe", "flop_max_us", p.flop_max_us)?),
        flop_points: p.flop_points,
    };

    let s = raw.schedule;
    let pulses = match s.pulses.as_str() {
        "matched" => PulseSchedule::Matched,
        "graduated" => PulseSchedule::Graduated,
        "uniform" => {
            let t = s.pulse_us.ok_or_else(|| v.invalid("schedule", "pulse_us", "required for uniform pulses"))?;
            PulseSchedule::Uniform(units::us_to_s(v.positive("schedule", "pulse_us", t)?))
        }
        "pi_level" => {
            let n = s.pi_level.ok_or_else(|| v.invalid("schedule", "pi_level", "required for pi_level pulses"))?;
            if n == 0 {
                return Err(v.invalid("schedule", "pi_level", "must be >= 1"));
            }
            PulseSchedule::PiForLevel(n)
        }
        other => {
            return Err(v.invalid(
                "schedule",
                "pulses",
                format!("expected matched, uniform, pi_level or graduated, got \"{other}\""),
            ))
        }
    };
    let repump = match s.repump.as_str() {
        "ideal" => RepumpModel::Ideal,
        "recoil" => RepumpModel::Recoil {
            eta_repump: v.non_negative("schedule", "eta_repump", s.eta_repump)?,
            photons_per_repump: v.non_negative("schedule", "photons_per_repump", s.photons_per_repump)?,
        },
        other => {
            return Err(v.invalid("schedule", "repump", format!("expected ideal or recoil, got \"{other}\"")))
        }
    };
    let schedule = CoolingSchedule { cycles: s.cycles, pulses, repump };

    let r = raw.run;
    if r.delays_ms.is_empty() {
        return Err(v.invalid("run", "delays_ms", "must not be empty"));
    }
    for (i, &d) in r.delays_ms.iter().enumerate() {
        if d.is_nan() || d < 0.0 || (i > 0 && d <= r.delays_ms[i - 1]) {
            return Err(v.invalid("run", "delays_ms", "must be >= 0 and strictly increasing"));
        }
    }
    let initial = match r.initial_nbar {
        Some(n) => InitialState::Thermal(v.non_negative("run", "initial_nbar", n)?),
        None => InitialState::Cooled,
    };
    let mut sweep = Vec::with_capacity(r.sweep_freq_mhz.len());
    for &f in &r.sweep_freq_mhz {
        sweep.push(units::mhz_to_rad_per_s(v.positive("run", "sweep_freq_mhz", f)?));
    }
    let run = RunSettings {
        seed: r.seed,
        delays: r.delays_ms.iter().map(|&d| units::ms_to_s(d)).collect(),
        initial,
        out_dir: r.out_dir,
        sweep_frequencies: sweep,
        survey: r.survey,
    };

    Ok(RunConfig {
        path: path.to_path_buf(),
        ion,
        trap,
        geometry,
        coupling: raw.raman.coupling,
        noise,
        probe,
        schedule,
        run,
    })
}
