//! CSV tables exchanged with the outside world.
//!
//! Rows are kept in file units (Hz, μs, μm, MHz) so that reading a table and
//! writing it back reproduces the same bytes. Conversions to SI happen in the
//! `From`/`TryFrom` impls.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{SurveyRecord, SurveyRow};
use crate::dynamics::{HeatingPoint, HeatingSeries};
use crate::error::{Error, Result};
use crate::fock::PopulationDistribution;
use crate::spectroscopy::Spectrum;
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub n: usize,
    pub p_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub cycle: usize,
    pub nbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub delay_s: f64,
    pub nbar: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub delta_hz_from_carrier: f64,
    pub p_bright: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_us: f64,
    pub p_bright: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub freq_mhz: f64,
    pub s_e_v2_per_m2_hz: f64,
    pub ndot_quanta_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTableRow {
    pub system: String,
    pub d_um: f64,
    pub freq_mhz: f64,
    pub ndot_quanta_per_s: f64,
    pub s_e_v2_per_m2_hz: f64,
    pub source: String,
}

pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn distribution_rows(dist: &PopulationDistribution) -> Vec<DistributionRow> {
    dist.probabilities()
        .iter()
        .enumerate()
        .map(|(n, &p_n)| DistributionRow { n, p_n })
        .collect()
}

pub fn distribution_from_rows(rows: &[DistributionRow]) -> Result<PopulationDistribution> {
    let mut p = vec![0.0; rows.iter().map(|r| r.n + 1).max().unwrap_or(0)];
    for r in rows {
        p[r.n] = r.p_n;
    }
    PopulationDistribution::from_probabilities(p)
}

pub fn trajectory_rows(trajectory: &[f64]) -> Vec<TrajectoryRow> {
    trajectory
        .iter()
        .enumerate()
        .map(|(cycle, &nbar)| TrajectoryRow { cycle, nbar })
        .collect()
}

impl From<&HeatingPoint> for SeriesRow {
    fn from(p: &HeatingPoint) -> Self {
        Self { delay_s: p.delay, nbar: p.nbar, sigma: p.sigma }
    }
}

pub fn series_rows(series: &HeatingSeries) -> Vec<SeriesRow> {
    series.points().iter().map(SeriesRow::from).collect()
}

pub fn series_from_rows(rows: &[SeriesRow]) -> Result<HeatingSeries> {
    HeatingSeries::new(
        rows.iter()
            .map(|r| HeatingPoint { delay: r.delay_s, nbar: r.nbar, sigma: r.sigma })
            .collect(),
    )
}

pub fn spectrum_rows(spectrum: &Spectrum) -> Vec<SpectrumRow> {
    spectrum
        .points
        .iter()
        .map(|p| SpectrumRow {
            delta_hz_from_carrier: units::rad_per_s_to_hz(p.delta),
            p_bright: p.p_bright,
            sigma: p.sigma,
        })
        .collect()
}

pub fn trace_rows(trace: &[(f64, f64)]) -> Vec<TraceRow> {
    trace
        .iter()
        .map(|&(t, p_bright)| TraceRow { t_us: units::s_to_us(t), p_bright })
        .collect()
}

pub fn survey_table_rows(rows: &[SurveyRow]) -> Vec<SurveyTableRow> {
    rows.iter()
        .map(|r| SurveyTableRow {
            system: r.system_label.clone(),
            d_um: units::m_to_um(r.electrode_distance),
            freq_mhz: units::rad_per_s_to_mhz(r.trap_frequency),
            ndot_quanta_per_s: r.heating_rate,
            s_e_v2_per_m2_hz: r.s_e,
            source: r.source_tag.clone(),
        })
        .collect()
}

/// Unit of the heating-rate column, declared by its header name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatingRateUnit {
    QuantaPerSecond,
    QuantaPerMillisecond,
}

impl HeatingRateUnit {
    fn from_header(name: &str) -> Option<Self> {
        match name {
            "ndot_quanta_per_s" => Some(Self::QuantaPerSecond),
            "ndot_quanta_per_ms" => Some(Self::QuantaPerMillisecond),
            _ => None,
        }
    }

    fn to_per_second(self, v: f64) -> f64 {
        match self {
            Self::QuantaPerSecond => v,
            Self::QuantaPerMillisecond => v * 1e3,
        }
    }
}

const SURVEY_COLUMNS: [&str; 5] = ["system", "mass_amu", "d_um", "freq_mhz", "source"];

/// Reads a survey table with header
/// `system,mass_amu,d_um,freq_mhz,ndot_quanta_per_s,source`.
///
/// The heating-rate column may instead be named `ndot_quanta_per_ms`; the
/// header is the only place the unit is taken from. Lines starting with `#`
/// are comments.
pub fn read_survey<R: Read>(reader: R) -> Result<Vec<SurveyRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("survey header is missing column '{name}'")))
    };
    let cols: Vec<usize> = SURVEY_COLUMNS.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let (rate_col, unit) = headers
        .iter()
        .enumerate()
        .find_map(|(i, h)| HeatingRateUnit::from_header(h).map(|u| (i, u)))
        .ok_or_else(|| {
            Error::Format("survey header needs ndot_quanta_per_s or ndot_quanta_per_ms".into())
        })?;
    if let Some(extra) = headers
        .iter()
        .find(|h| !SURVEY_COLUMNS.contains(h) && HeatingRateUnit::from_header(h).is_none())
    {
        return Err(Error::Format(format!("unknown survey column '{extra}'")));
    }

    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize, what: &str| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("survey row {}: bad {what} '{}'", line + 1, rec.get(i).unwrap_or(""))))
        };
        let record = SurveyRecord::new(
            rec.get(cols[0]).unwrap_or(""),
            units::amu_to_kg(num(cols[1], "mass_amu")?),
            units::um_to_m(num(cols[2], "d_um")?),
            units::mhz_to_rad_per_s(num(cols[3], "freq_mhz")?),
            unit.to_per_second(num(rate_col, "heating rate")?),
            rec.get(cols[4]).unwrap_or(""),
        )
        .map_err(|e| Error::Format(format!("survey row {}: {e}", line + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Whitespace-separated columns with a `#` header line, readable by gnuplot.
pub fn write_plot_columns<W: Write>(mut w: W, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "# {}", columns.join(" "))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::thermal_auto;

    #[test]
    fn distribution_table_round_trip() {
        let d = thermal_auto(0.7).unwrap();
        let mut buf = Vec::new();
        write_rows(&mut buf, &distribution_rows(&d)).unwrap();
        assert!(buf.starts_with(b"n,p_n\n"));
        let rows: Vec<DistributionRow> = read_rows(buf.as_slice()).unwrap();
        assert_eq!(distribution_from_rows(&rows).unwrap().probabilities(), d.probabilities());
    }

    #[test]
    fn survey_units_by_header() {
        let per_s = "system,mass_amu,d_um,freq_mhz,ndot_quanta_per_s,source\nCd,110.904,150,5.8,24.8,here\n";
        let per_ms = "# comment\nsystem,mass_amu,d_um,freq_mhz,ndot_quanta_per_ms,source\nCd,110.904,150,5.8,0.0248,here\n";
        let a = read_survey(per_s.as_bytes()).unwrap();
        let b = read_survey(per_ms.as_bytes()).unwrap();
        assert!((a[0].heating_rate - b[0].heating_rate).abs() < 1e-12);
        assert_eq!(a[0].source_tag, "here");
    }

    #[test]
    fn survey_rejects_bad_tables() {
        let no_rate = "system,mass_amu,d_um,freq_mhz,source\nCd,1,1,1,x\n";
        assert!(read_survey(no_rate.as_bytes()).is_err());
        let extra = "system,mass_amu,d_um,freq_mhz,ndot_quanta_per_s,source,notes\nCd,1,1,1,1,x,y\n";
        assert!(read_survey(extra.as_bytes()).is_err());
        let negative = "system,mass_amu,d_um,freq_mhz,ndot_quanta_per_s,source\nCd,1,-1,1,1,x\n";
        assert!(read_survey(negative.as_bytes()).is_err());
        let garbled = "system,mass_amu,d_um,freq_mhz,ndot_quanta_per_s,source\nCd,abc,1,1,1,x\n";
        assert!(read_survey(garbled.as_bytes()).is_err());
    }
}
