//! Command dispatch: each subcommand turns a validated configuration into
//! output files (and a short stdout summary).
//!
//! Outputs are assembled in memory and written together once the command
//! has finished, so a failed run leaves no partial tables behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use iontrap::analysis::{fit_heating_rate, fit_power_law, survey_noise_inference, FitResult, Weighting};
use iontrap::dynamics::{doppler_cool, heat_evolve, run_cooling, run_heating_experiment, HeatingExperiment};
use iontrap::fock::{PopulationDistribution, SidebandDrive, SidebandOrder};
use iontrap::io::{self, SeriesRow, SweepRow};
use iontrap::physics::{
    cooling_threshold, doppler_limit_nbar, evaluate_noise, heating_rate_from_noise, lamb_dicke,
    noise_from_heating_rate, recoil_frequency,
};
use iontrap::spectroscopy::{rabi_flop_trace, synthesize_spectrum, ProbeConfig, Shots};
use iontrap::units;

use crate::config::{parse_config, ConfigError, ProbeDuration, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const RUNTIME: u8 = 3;
    pub const FIT: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] iontrap::Error),
    #[error("fit failed: {0}")]
    Fit(iontrap::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => exit::CONFIG,
            CliError::Runtime(_) => exit::RUNTIME,
            CliError::Fit(_) => exit::FIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Stage {
    /// Thermal state at the Doppler limit.
    Doppler,
    /// After the configured Raman cooling schedule.
    #[default]
    Cooled,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "iontrap", version, about = "Trapped-ion cooling, heating and noise simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for all finite-shot sampling; overrides run.seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Shots per probe setting, or "inf" for exact probabilities; overrides probe.shots.
    #[arg(long, global = true, value_name = "N|inf")]
    pub shots: Option<Shots>,
    /// Output directory; overrides run.out_dir (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write gnuplot column files with a description sidecar.
    #[arg(long, global = true)]
    pub plot: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Doppler-limited start, Raman cooling cycles: trajectory and final populations.
    Cool,
    /// Sideband spectrum around the configured orders.
    Spectrum {
        #[arg(long, value_enum, default_value_t = Stage::Cooled)]
        stage: Stage,
    },
    /// Upper and lower sideband Rabi-flopping traces.
    Flop {
        #[arg(long, value_enum, default_value_t = Stage::Cooled)]
        stage: Stage,
        /// Heat for this long (ms) before flopping.
        #[arg(long, value_name = "MS")]
        delay_ms: Option<f64>,
    },
    /// Delay scan: measured n̄ after each configured heating delay.
    Heat,
    /// Linear fit of a heating series (imported, or simulated from the config).
    FitHeating {
        /// Series CSV with columns delay_s,nbar,sigma.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Weight points by 1/σ² (falls back to unweighted if any σ is 0).
        #[arg(long)]
        weighted: bool,
    },
    /// Heating rate versus trap frequency and its power-law fit.
    SweepFrequency,
    /// Field-noise table from a cross-trap survey and its distance fits.
    Survey {
        /// Survey CSV; overrides run.survey.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Derived constants for the configured trap.
    Derive,
}

/// What a command produced: files written (in order) and text for stdout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub stdout: String,
}

/// Files queued for writing at the end of a command.
struct Outputs {
    dir: PathBuf,
    format: Format,
    plot: bool,
    header: String,
    pending: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn file(&mut self, name: String, bytes: Vec<u8>) {
        self.pending.push((self.dir.join(name), bytes));
    }

    /// Queues a table in the selected format, plus plot columns on request.
    fn table<T: Serialize>(&mut self, name: &str, rows: &[T], plot: Plot) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let mut buf = Vec::new();
                io::write_rows(&mut buf, rows)?;
                self.file(format!("{name}.csv"), buf);
            }
            Format::Json => self.file(format!("{name}.json"), json_bytes(&rows)?),
        }
        if self.plot {
            let mut dat = Vec::new();
            io::write_plot_columns(&mut dat, &plot.columns, &plot.rows)?;
            self.file(format!("{name}.dat"), dat);
            let mut side = String::new();
            writeln!(side, "{}", plot.title).unwrap();
            writeln!(side, "{}", self.header).unwrap();
            writeln!(side, "data: {name}.dat").unwrap();
            for (i, (c, d)) in plot.columns.iter().zip(&plot.descriptions).enumerate() {
                writeln!(side, "column {}: {c} — {d}", i + 1).unwrap();
            }
            self.file(format!("{name}.plot.txt"), side.into_bytes());
        }
        Ok(())
    }

    fn write(self) -> Result<Vec<PathBuf>, CliError> {
        if !self.pending.is_empty() {
            std::fs::create_dir_all(&self.dir).map_err(iontrap::Error::from)?;
        }
        let mut files = Vec::with_capacity(self.pending.len());
        for (path, bytes) in self.pending {
            std::fs::write(&path, bytes).map_err(iontrap::Error::from)?;
            files.push(path);
        }
        Ok(files)
    }
}

struct Plot {
    title: String,
    columns: Vec<&'static str>,
    descriptions: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(iontrap::Error::from)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Parses arguments-level inputs and runs `cli.command` on a thread pool of
/// `--jobs` workers.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.flags.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| iontrap::Error::Contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cli.flags))
}

fn load(flags: &Flags) -> Result<RunConfig, CliError> {
    let path = flags
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
    let mut cfg = parse_config(path)?;
    if let Some(seed) = flags.seed {
        cfg.run.seed = seed;
    }
    if let Some(shots) = flags.shots {
        cfg.probe.shots = shots;
    }
    Ok(cfg)
}

fn outputs(flags: &Flags, cfg: Option<&RunConfig>, command: &str) -> Outputs {
    let dir = flags
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.run.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    let header = match cfg {
        Some(c) => format!(
            "command: {command}; config: {}; trap: {}; seed: {}; shots: {}",
            c.path.display(),
            c.trap.label,
            c.run.seed,
            c.probe.shots
        ),
        None => format!("command: {command}"),
    };
    Outputs {
        dir,
        format: flags.format,
        plot: flags.plot,
        header,
        pending: Vec::new(),
    }
}

fn drive_at(cfg: &RunConfig, omega_x: f64) -> Result<SidebandDrive, CliError> {
    let eta = lamb_dicke(&cfg.geometry, &cfg.ion, omega_x)?;
    Ok(SidebandDrive::new(eta, cfg.geometry.carrier_rabi, cfg.coupling)?)
}

fn probe_for(cfg: &RunConfig, drive: &SidebandDrive) -> Result<ProbeConfig, CliError> {
    let t = match cfg.probe.duration {
        ProbeDuration::Fixed(t) => t,
        ProbeDuration::PiForLevel(n) => drive.pi_time(n)?,
    };
    Ok(ProbeConfig::new(t, cfg.probe.shots, cfg.probe.fidelity)?.with_orders(cfg.probe.orders.clone()))
}

/// Heating experiment described by `cfg` with the trap frequency replaced by
/// `omega_x`.
pub fn heating_experiment(cfg: &RunConfig, omega_x: f64) -> Result<HeatingExperiment, CliError> {
    let mut trap = cfg.trap.clone();
    trap.secular_frequency = omega_x;
    let drive = drive_at(cfg, omega_x)?;
    Ok(HeatingExperiment {
        ion: cfg.ion.clone(),
        trap,
        geometry: cfg.geometry,
        noise: cfg.noise,
        schedule: cfg.schedule.clone(),
        probe: probe_for(cfg, &drive)?,
        coupling: cfg.coupling,
        method: cfg.probe.method,
        initial: cfg.run.initial.clone(),
    })
}

fn prepare(cfg: &RunConfig, stage: Stage) -> Result<PopulationDistribution, CliError> {
    let w = cfg.trap.secular_frequency;
    let doppler = doppler_cool(&cfg.ion, w, None)?;
    Ok(match stage {
        Stage::Doppler => doppler,
        Stage::Cooled => run_cooling(&doppler, &cfg.schedule, &drive_at(cfg, w)?)?.distribution,
    })
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn dispatch(command: &Command, flags: &Flags) -> Result<Report, CliError> {
    match command {
        Command::Cool => cool(flags),
        Command::Spectrum { stage } => spectrum(flags, *stage),
        Command::Flop { stage, delay_ms } => flop(flags, *stage, *delay_ms),
        Command::Heat => heat(flags),
        Command::FitHeating { input, weighted } => fit_heating(flags, input.as_deref(), *weighted),
        Command::SweepFrequency => sweep_frequency(flags),
        Command::Survey { input } => survey(flags, input.as_deref()),
        Command::Derive => derive(flags),
    }
}

fn cool(flags: &Flags) -> Result<Report, CliError> {
    let cfg = load(flags)?;
    let w = cfg.trap.secular_frequency;
    let start = doppler_cool(&cfg.ion, w, None)?;
    let run = run_cooling(&start, &cfg.schedule, &drive_at(&cfg, w)?)?;
    let mut out = outputs(flags, Some(&cfg), "cool");

    let traj = io::trajectory_rows(&run.trajectory);
    out.table(
        "cooling_trajectory",
        &traj,
        Plot {
            title: "Mean occupation after each Raman cooling cycle".into(),
            columns: vec!["cycle", "nbar"],
            descriptions: vec!["cycles completed", "mean phonon number"],
            rows: traj.iter().map(|r| vec![r.cycle as f64, r.nbar]).collect(),
        },
    )?;
    let dist = io::distribution_rows(&run.distribution);
    out.table(
        "cooled_distribution",
        &dist,
        Plot {
            title: "Fock-state populations after cooling".into(),
            columns: vec!["n", "p_n"],
            descriptions: vec!["Fock level", "population"],
            rows: dist.iter().map(|r| vec![r.n as f64, r.p_n]).collect(),
        },
    )?;

    let stdout = format!(
        "cycles {}\nnbar_start {:.4}\nnbar_final {:.4}\nground_state_fraction {:.4}\n",
        cfg.schedule.cycles,
        start.mean(),
        run.distribution.mean(),
        run.distribution.ground_state_fraction()
    );
    Ok(Report { files: out.write()?, stdout })
}

fn spectrum(flags: &Flags, stage: Stage) -> Result<Report, CliError> {
    let cfg = load(flags)?;
    let w = cfg.trap.secular_frequency;
    let dist = prepare(&cfg, stage)?;
    let drive = drive_at(&cfg, w)?;
    let mut orders = cfg.probe.orders.clone();
    orders.sort();
    orders.dedup();
    let grid: Vec<f64> = orders
        .iter()
        .flat_map(|o| {
            let centre = o.value() as f64 * w;
            linspace(centre - cfg.probe.scan_halfwidth, centre + cfg.probe.scan_halfwidth, cfg.probe.scan_points)
        })
        .collect();
    let probe = probe_for(&cfg, &drive)?.with_grid(grid);
    let spectrum = synthesize_spectrum(&dist, &drive, w, &probe, cfg.run.seed)?;

    let stage_name = match stage {
        Stage::Doppler => "doppler",
        Stage::Cooled => "cooled",
    };
    let mut out = outputs(flags, Some(&cfg), "spectrum");
    let rows = io::spectrum_rows(&spectrum);
    out.table(
        &format!("spectrum_{stage_name}"),
        &rows,
        Plot {
            title: format!("Raman sideband spectrum ({stage_name} state)"),
            columns: vec!["delta_hz_from_carrier", "p_bright", "sigma"],
            descriptions: vec!["beatnote offset from the carrier, Hz", "bright-state probability", "standard error"],
            rows: rows.iter().map(|r| vec![r.delta_hz_from_carrier, r.p_bright, r.sigma]).collect(),
        },
    )?;
    let mut stdout = format!(
        "stage {stage_name}\nnbar {:.4}\nt_probe_us {:.3}\npoints {}\n",
        dist.mean(),
        units::s_to_us(probe.t_probe),
        rows.len()
    );
    if !spectrum.clamped.is_empty() {
        writeln!(stdout, "clamped_points {}", spectrum.clamped.len()).unwrap();
    }
    Ok(Report { files: out.write()?, stdout })
}

fn flop(flags: &Flags, stage: Stage, delay_ms: Option<f64>) -> Result<Report, CliError> {
    let cfg = load(flags)?;
    let w = cfg.trap.secular_frequency;
    let mut dist = prepare(&cfg, stage)?;
    if let Some(d) = delay_ms {
        if d.is_nan() || d < 0.0 {
            return Err(CliError::Usage(format!("--delay-ms must be >= 0, got {d}")));
        }
        let ndot = heating_rate_from_noise(evaluate_noise(&cfg.noise, w, cfg.trap.electrode_distance)?, &cfg.ion, w)?;
        dist = heat_evolve(&dist, ndot, units::ms_to_s(d))?;
    }
    let drive = drive_at(&cfg, w)?;
    let times = linspace(0.0, cfg.probe.flop_max, cfg.probe.flop_points);
    let mut out = outputs(flags, Some(&cfg), "flop");
    for (name, order) in [("lower", SidebandOrder::LOWER), ("upper", SidebandOrder::UPPER)] {
        let rows = io::trace_rows(&rabi_flop_trace(&dist, order, &drive, &times));
        out.table(
            &format!("flop_{name}"),
            &rows,
            Plot {
                title: format!("Rabi flopping on the {name} motional sideband"),
                columns: vec!["t_us", "p_bright"],
                descriptions: vec!["pulse duration, us", "bright-state probability"],
                rows: rows.iter().map(|r| vec![r.t_us, r.p_bright]).collect(),
            },
        )?;
    }
    let stdout = format!("nbar {:.4}\npoints {}\n", dist.mean(), times.len());
    Ok(Report { files: out.write()?, stdout })
}

fn series_table(out: &mut Outputs, name: &str, rows: &[SeriesRow]) -> Result<(), CliError> {
    out.table(
        name,
        rows,
        Plot {
            title: "Measured mean occupation versus heating delay".into(),
            columns: vec!["delay_s", "nbar", "sigma"],
            descriptions: vec!["delay, s", "measured mean phonon number", "standard error"],
            rows: rows.iter().map(|r| vec![r.delay_s, r.nbar, r.sigma]).collect(),
        },
    )
}

fn heat(flags: &Flags) -> Result<Report, CliError> {
    let cfg = load(flags)?;
    let exp = heating_experiment(&cfg, cfg.trap.secular_frequency)?;
    let run = run_heating_experiment(&exp, &cfg.run.delays, cfg.run.seed)?;
    let mut out = outputs(flags, Some(&cfg), "heat");
    series_table(&mut out, "heating_series", &io::series_rows(&run.series))?;
    let stdout = format!(
        "eta {:.4}\nndot_model_quanta_per_s {}\ninitial_nbar {:.4}\npoints {}\n",
        run.eta,
        run.ndot,
        run.initial_nbar,
        run.series.len()
    );
    Ok(Report { files: out.write()?, stdout })
}

fn fit_heating(flags: &Flags, input: Option<&Path>, weighted: bool) -> Result<Report, CliError> {
    let (cfg, series) = match input {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| iontrap::Error::Io(format!("{}: {e}", path.display())))?;
            let rows: Vec<SeriesRow> = io::read_rows(file)?;
            (None, io::series_from_rows(&rows)?)
        }
        None => {
            let cfg = load(flags)?;
            let exp = heating_experiment(&cfg, cfg.trap.secular_frequency)?;
            let run = run_heating_experiment(&exp, &cfg.run.delays, cfg.run.seed)?;
            (Some(cfg), run.series)
        }
    };
    let weighting = if weighted { Weighting::InverseVariance } else { Weighting::Unweighted };
    let fit = fit_heating_rate(&series, weighting).map_err(CliError::Fit)?;
    let mut out = outputs(flags, cfg.as_ref(), "fit-heating");
    if cfg.is_some() {
        series_table(&mut out, "heating_series", &io::series_rows(&series))?;
    }
    out.file("heating_fit.json".into(), json_bytes(&fit)?);
    let slope = fit.parameter("slope").expect("line fit has a slope");
    let stdout = format!(
        "slope_quanta_per_s {} +/- {}\nslope_quanta_per_ms {:.5} +/- {:.5}\nintercept {:.5}\n",
        slope.value,
        slope.sigma,
        slope.value * 1e-3,
        slope.sigma * 1e-3,
        fit.value("intercept").unwrap_or(f64::NAN)
    );
    Ok(Report { files: out.write()?, stdout })
}

/// Power-law fit plus the exponent of the field-noise spectrum it implies
/// (ṅ ∝ S_E/ω, so the noise exponent is the heating exponent + 1).
#[derive(Debug, Serialize)]
struct SweepFit {
    fit: FitResult,
    heating_exponent: f64,
    implied_noise_exponent: f64,
    simulated: bool,
}

fn sweep_frequency(flags: &Flags) -> Result<Report, CliError> {
    let cfg = load(flags)?;
    if cfg.run.sweep_frequencies.len() < 2 {
        return Err(CliError::Usage("run.sweep_freq_mhz needs at least 2 frequencies".into()));
    }
    let ion = &cfg.ion;
    let d = cfg.trap.electrode_distance;
    let simulated = cfg.probe.shots != Shots::Infinite;
    let model_rate = |w: f64| -> Result<f64, CliError> {
        Ok(heating_rate_from_noise(evaluate_noise(&cfg.noise, w, d)?, ion, w)?)
    };
    let reference_rate = model_rate(cfg.trap.secular_frequency)?;
    let mut rows = Vec::with_capacity(cfg.run.sweep_frequencies.len());
    let mut sigmas = Vec::new();
    for (i, &w) in cfg.run.sweep_frequencies.iter().enumerate() {
        let (ndot, sigma) = if simulated {
            let exp = heating_experiment(&cfg, w)?;
            // Rescale the delay scan so every frequency heats by the same
            // number of quanta as the configured trap; hot traps would
            // otherwise leave the resolvable range of the sideband ratio.
            let rate = model_rate(w)?;
            let scale = if rate > 0.0 && reference_rate > 0.0 { reference_rate / rate } else { 1.0 };
            let delays: Vec<f64> = cfg.run.delays.iter().map(|t| t * scale).collect();
            // one independent seed family per frequency
            let seed = cfg.run.seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let run = run_heating_experiment(&exp, &delays, seed)?;
            let fit = fit_heating_rate(&run.series, Weighting::InverseVariance).map_err(CliError::Fit)?;
            let slope = fit.parameter("slope").expect("line fit has a slope");
            (slope.value, slope.sigma)
        } else {
            (model_rate(w)?, 0.0)
        };
        if ndot.is_nan() || ndot <= 0.0 {
            return Err(CliError::Fit(iontrap::Error::Fit(format!(
                "heating rate at {} MHz is {ndot}, not positive",
                units::rad_per_s_to_mhz(w)
            ))));
        }
        rows.push(SweepRow {
            freq_mhz: units::rad_per_s_to_mhz(w),
            s_e_v2_per_m2_hz: noise_from_heating_rate(ndot, ion, w)?,
            ndot_quanta_per_s: ndot,
        });
        sigmas.push(sigma);
    }
    let xs: Vec<f64> = cfg.run.sweep_frequencies.clone();
    let ys: Vec<f64> = rows.iter().map(|r| r.ndot_quanta_per_s).collect();
    let weights = (simulated && sigmas.iter().all(|&s| s > 0.0)).then_some(sigmas.as_slice());
    let fit = fit_power_law(&xs, &ys, weights).map_err(CliError::Fit)?;
    let exponent = fit.value("exponent").expect("power-law fit has an exponent");

    let mut out = outputs(flags, Some(&cfg), "sweep-frequency");
    out.table(
        "frequency_sweep",
        &rows,
        Plot {
            title: "Heating rate and field noise versus trap frequency".into(),
            columns: vec!["freq_mhz", "s_e_v2_per_m2_hz", "ndot_quanta_per_s"],
            descriptions: vec!["secular frequency, MHz", "field noise S_E, (V/m)^2/Hz", "heating rate, quanta/s"],
            rows: rows.iter().map(|r| vec![r.freq_mhz, r.s_e_v2_per_m2_hz, r.ndot_quanta_per_s]).collect(),
        },
    )?;
    let report = SweepFit {
        fit,
        heating_exponent: exponent,
        implied_noise_exponent: exponent + 1.0,
        simulated,
    };
    out.file("frequency_fit.json".into(), json_bytes(&report)?);
    let stdout = format!(
        "heating_exponent {exponent:.4}\nimplied_noise_exponent {:.4}\npoints {}\n",
        exponent + 1.0,
        rows.len()
    );
    Ok(Report { files: out.write()?, stdout })
}

#[derive(Debug, Serialize)]
struct SurveyFit {
    heating_rate_vs_distance: FitResult,
    noise_vs_distance: FitResult,
}

fn survey(flags: &Flags, input: Option<&Path>) -> Result<Report, CliError> {
    let cfg = flags.config.as_ref().map(|_| load(flags)).transpose()?;
    let path = input
        .map(Path::to_path_buf)
        .or_else(|| cfg.as_ref().and_then(|c| c.run.survey.clone()))
        .ok_or_else(|| CliError::Usage("survey needs --input PATH or run.survey in the config".into()))?;
    let file = std::fs::File::open(&path).map_err(|e| iontrap::Error::Io(format!("{}: {e}", path.display())))?;
    let records = io::read_survey(file)?;
    let rows = survey_noise_inference(&records)?;
    let table = io::survey_table_rows(&rows);

    let mut out = outputs(flags, cfg.as_ref(), "survey");
    out.table(
        "survey_noise",
        &table,
        Plot {
            title: "Heating rate and inferred field noise versus electrode distance".into(),
            columns: vec!["d_um", "freq_mhz", "ndot_quanta_per_s", "s_e_v2_per_m2_hz"],
            descriptions: vec![
                "distance to nearest electrode, um",
                "secular frequency, MHz",
                "heating rate, quanta/s",
                "field noise S_E, (V/m)^2/Hz",
            ],
            rows: table
                .iter()
                .map(|r| vec![r.d_um, r.freq_mhz, r.ndot_quanta_per_s, r.s_e_v2_per_m2_hz])
                .collect(),
        },
    )?;

    let ds: Vec<f64> = rows.iter().map(|r| r.electrode_distance).collect();
    let ndots: Vec<f64> = rows.iter().map(|r| r.heating_rate).collect();
    let ses: Vec<f64> = rows.iter().map(|r| r.s_e).collect();
    let fits = fit_power_law(&ds, &ndots, None).and_then(|a| Ok((a, fit_power_law(&ds, &ses, None)?)));
    let (hf, nf) = match fits {
        Ok(f) => f,
        Err(e) => {
            // the table is still useful without a fit
            out.write()?;
            return Err(CliError::Fit(e));
        }
    };
    let stdout = format!(
        "records {}\nheating_rate_distance_exponent {:.4}\nnoise_distance_exponent {:.4}\n",
        rows.len(),
        hf.value("exponent").unwrap_or(f64::NAN),
        nf.value("exponent").unwrap_or(f64::NAN)
    );
    out.file(
        "survey_fit.json".into(),
        json_bytes(&SurveyFit { heating_rate_vs_distance: hf, noise_vs_distance: nf })?,
    );
    Ok(Report { files: out.write()?, stdout })
}

/// Derived constants for one configuration, SI plus the customary units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub trap: String,
    pub secular_frequency_mhz: f64,
    pub electrode_distance_um: f64,
    pub lamb_dicke_eta: f64,
    pub recoil_frequency_hz: f64,
    pub doppler_limit_nbar: f64,
    pub cooling_threshold_mhz: f64,
    pub noise_s_e_v2_per_m2_hz: f64,
    pub heating_rate_quanta_per_s: f64,
    /// ṅ per unit S_E at this trap frequency, quanta/s per (V/m)²/Hz.
    pub heating_rate_per_unit_noise: f64,
}

pub fn derived(cfg: &RunConfig) -> Result<Derived, iontrap::Error> {
    let w = cfg.trap.secular_frequency;
    let s_e = evaluate_noise(&cfg.noise, w, cfg.trap.electrode_distance)?;
    Ok(Derived {
        trap: cfg.trap.label.clone(),
        secular_frequency_mhz: units::rad_per_s_to_mhz(w),
        electrode_distance_um: units::m_to_um(cfg.trap.electrode_distance),
        lamb_dicke_eta: lamb_dicke(&cfg.geometry, &cfg.ion, w)?,
        recoil_frequency_hz: units::rad_per_s_to_hz(recoil_frequency(&cfg.geometry, &cfg.ion)),
        doppler_limit_nbar: doppler_limit_nbar(&cfg.ion, w)?,
        cooling_threshold_mhz: units::rad_per_s_to_mhz(cooling_threshold(&cfg.ion, &cfg.geometry)),
        noise_s_e_v2_per_m2_hz: s_e,
        heating_rate_quanta_per_s: heating_rate_from_noise(s_e, &cfg.ion, w)?,
        heating_rate_per_unit_noise: heating_rate_from_noise(1.0, &cfg.ion, w)?,
    })
}

fn derive(flags: &Flags) -> Result<Report, CliError> {
    let cfg = load(flags)?;
    let d = derived(&cfg)?;
    let stdout = match flags.format {
        Format::Json => String::from_utf8(json_bytes(&d)?).expect("JSON is UTF-8"),
        Format::Csv => {
            let mut s = String::new();
            writeln!(s, "trap                        {}", d.trap).unwrap();
            writeln!(s, "secular_frequency_mhz       {:.4}", d.secular_frequency_mhz).unwrap();
            writeln!(s, "electrode_distance_um       {:.1}", d.electrode_distance_um).unwrap();
            writeln!(s, "lamb_dicke_eta              {:.3}", d.lamb_dicke_eta).unwrap();
            writeln!(s, "recoil_frequency_khz        {:.2}", d.recoil_frequency_hz * 1e-3).unwrap();
            writeln!(s, "doppler_limit_nbar          {:.2}", d.doppler_limit_nbar).unwrap();
            writeln!(s, "cooling_threshold_mhz       {:.2}", d.cooling_threshold_mhz).unwrap();
            writeln!(s, "noise_s_e_v2_per_m2_hz      {:.4e}", d.noise_s_e_v2_per_m2_hz).unwrap();
            writeln!(s, "heating_rate_quanta_per_s   {:.2}", d.heating_rate_quanta_per_s).unwrap();
            writeln!(s, "ndot_per_unit_s_e           {:.4e}", d.heating_rate_per_unit_noise).unwrap();
            s
        }
    };
    Ok(Report { files: Vec::new(), stdout })
}
