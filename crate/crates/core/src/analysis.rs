//! Straight-line and power-law regression with covariance, and the
//! cross-trap noise survey.

use serde::{Deserialize, Serialize};

use crate::dynamics::HeatingSeries;
use crate::error::{positive, Error, Result};
use crate::physics::{noise_from_heating_rate, IonSpecies};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Ordinary least squares; uncertainties scaled by the residual variance.
    #[default]
    Unweighted,
    /// Weights 1/σ²; uncertainties from the weights alone.
    InverseVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<Parameter>,
    /// Names of the rows/columns of `covariance`.
    pub covariance_labels: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// √(Σ wᵢ·rᵢ²), with wᵢ = 1 when unweighted.
    pub residual_norm: f64,
    pub weighting: Weighting,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameter(name).map(|p| p.value)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.parameter(name).map(|p| p.sigma)
    }
}

/// y = a + b·x fitted by (weighted) least squares, centred on the weighted
/// mean of x for conditioning.
struct Line {
    intercept: f64,
    slope: f64,
    /// [[var a, cov ab], [cov ab, var b]]
    cov: [[f64; 2]; 2],
    residuals: Vec<f64>,
    residual_norm: f64,
}

fn fit_line(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<Line> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    let xbar = (0..n).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let ybar = (0..n).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let stt: f64 = (0..n).map(|i| w(i) * (xs[i] - xbar).powi(2)).sum();
    if stt.is_nan() || stt <= 0.0 {
        return Err(Error::Fit("abscissae are degenerate".into()));
    }
    let sty: f64 = (0..n).map(|i| w(i) * (xs[i] - xbar) * (ys[i] - ybar)).sum();
    let slope = sty / stt;
    let intercept = ybar - slope * xbar;
    let residuals: Vec<f64> = (0..n).map(|i| ys[i] - intercept - slope * xs[i]).collect();
    let chi2: f64 = (0..n).map(|i| w(i) * residuals[i].powi(2)).sum();

    let scale = if weights.is_some() { 1.0 } else { chi2 / (n as f64 - 2.0) };
    let var_b = scale / stt;
    let var_a = scale * (1.0 / sw + xbar * xbar / stt);
    let cov_ab = -scale * xbar / stt;
    Ok(Line {
        intercept,
        slope,
        cov: [[var_a, cov_ab], [cov_ab, var_b]],
        residuals,
        residual_norm: chi2.sqrt(),
    })
}

/// Linear fit of n̄ versus delay. The slope is the heating rate in quanta/s.
///
/// Inverse-variance weighting silently falls back to unweighted when any
/// point has σ = 0; the returned `weighting` says which was used.
pub fn fit_heating_rate(series: &HeatingSeries, weighting: Weighting) -> Result<FitResult> {
    let pts = series.points();
    if pts.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: pts.len() });
    }
    if pts.windows(2).any(|w| w[1].delay <= w[0].delay) {
        return Err(Error::Contract("delays must be strictly increasing".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.delay).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.nbar).collect();
    let weighting = match weighting {
        Weighting::InverseVariance if pts.iter().all(|p| p.sigma > 0.0) => Weighting::InverseVariance,
        _ => Weighting::Unweighted,
    };
    let weights: Option<Vec<f64>> = (weighting == Weighting::InverseVariance)
        .then(|| pts.iter().map(|p| 1.0 / (p.sigma * p.sigma)).collect());
    let line = fit_line(&xs, &ys, weights.as_deref())?;
    Ok(FitResult {
        parameters: vec![
            Parameter { name: "slope".into(), value: line.slope, sigma: line.cov[1][1].sqrt() },
            Parameter { name: "intercept".into(), value: line.intercept, sigma: line.cov[0][0].sqrt() },
        ],
        covariance_labels: vec!["intercept".into(), "slope".into()],
        covariance: line.cov.iter().map(|r| r.to_vec()).collect(),
        residuals: line.residuals,
        residual_norm: line.residual_norm,
        weighting,
    })
}

/// Fits y = A·x^k by linear least squares on (ln x, ln y).
///
/// With `sigmas`, the log-space weights are (y/σ)². Parameters: `exponent`,
/// `amplitude` (A, the value at x = 1) and `ln_amplitude`; the covariance is
/// over (`ln_amplitude`, `exponent`).
pub fn fit_power_law(xs: &[f64], ys: &[f64], sigmas: Option<&[f64]>) -> Result<FitResult> {
    if xs.len() != ys.len() || sigmas.is_some_and(|s| s.len() != xs.len()) {
        return Err(Error::Contract("power-law inputs differ in length".into()));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: xs.len() });
    }
    for (&x, &y) in xs.iter().zip(ys) {
        positive("power-law x", x)?;
        positive("power-law y", y)?;
    }
    let weights = match sigmas {
        Some(s) => {
            let mut w = Vec::with_capacity(s.len());
            for (&sig, &y) in s.iter().zip(ys) {
                positive("power-law sigma", sig)?;
                w.push((y / sig).powi(2));
            }
            Some(w)
        }
        None => None,
    };
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let line = fit_line(&lx, &ly, weights.as_deref())?;
    let amplitude = line.intercept.exp();
    let sigma_ln_a = line.cov[0][0].sqrt();
    Ok(FitResult {
        parameters: vec![
            Parameter { name: "exponent".into(), value: line.slope, sigma: line.cov[1][1].sqrt() },
            Parameter { name: "amplitude".into(), value: amplitude, sigma: amplitude * sigma_ln_a },
            Parameter { name: "ln_amplitude".into(), value: line.intercept, sigma: sigma_ln_a },
        ],
        covariance_labels: vec!["ln_amplitude".into(), "exponent".into()],
        covariance: line.cov.iter().map(|r| r.to_vec()).collect(),
        residuals: line.residuals,
        residual_norm: line.residual_norm,
        weighting: if sigmas.is_some() { Weighting::InverseVariance } else { Weighting::Unweighted },
    })
}

/// One published (or simulated) heating measurement from some trap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub system_label: String,
    /// kg
    pub ion_mass: f64,
    /// m
    pub electrode_distance: f64,
    /// rad/s
    pub trap_frequency: f64,
    /// quanta/s
    pub heating_rate: f64,
    pub source_tag: String,
}

impl SurveyRecord {
    pub fn new(
        system_label: impl Into<String>,
        ion_mass: f64,
        electrode_distance: f64,
        trap_frequency: f64,
        heating_rate: f64,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        Ok(Self {
            system_label: system_label.into(),
            ion_mass: positive("ion_mass", ion_mass)?,
            electrode_distance: positive("electrode_distance", electrode_distance)?,
            trap_frequency: positive("trap_frequency", trap_frequency)?,
            heating_rate: positive("heating_rate", heating_rate)?,
            source_tag: source_tag.into(),
        })
    }
}

/// A survey record with its inferred field-noise spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub system_label: String,
    pub electrode_distance: f64,
    pub trap_frequency: f64,
    pub heating_rate: f64,
    /// (V/m)²/Hz
    pub s_e: f64,
    pub source_tag: String,
}

/// Converts each record's heating rate to S_E using its own mass and trap
/// frequency, sorted by electrode distance.
pub fn survey_noise_inference(records: &[SurveyRecord]) -> Result<Vec<SurveyRow>> {
    if records.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut rows = records
        .iter()
        .map(|r| {
            // only the mass enters the conversion
            let ion = IonSpecies {
                name: r.system_label.clone(),
                mass: r.ion_mass,
                transition_wavelength: 1.0,
                excited_linewidth: 1.0,
                hyperfine_splitting: 0.0,
            };
            Ok(SurveyRow {
                system_label: r.system_label.clone(),
                electrode_distance: r.electrode_distance,
                trap_frequency: r.trap_frequency,
                heating_rate: r.heating_rate,
                s_e: noise_from_heating_rate(r.heating_rate, &ion, r.trap_frequency)?,
                source_tag: r.source_tag.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.electrode_distance.total_cmp(&b.electrode_distance));
    Ok(rows)
}

/// How many times the observed noise exceeds an externally estimated floor.
pub fn thermal_floor_ratio(observed_s_e: f64, assumed_floor: f64) -> Result<f64> {
    let floor = positive("assumed_floor", assumed_floor)?;
    Ok(observed_s_e / floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HeatingPoint;
    use crate::units::{amu_to_kg, mhz_to_rad_per_s, um_to_m};

    fn series(f: impl Fn(f64) -> f64, sigma: f64) -> HeatingSeries {
        HeatingSeries::new(
            (0..=10)
                .map(|k| {
                    let delay = k as f64 * 4e-3;
                    HeatingPoint { delay, nbar: f(delay), sigma }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_line_recovered() {
        let s = series(|t| 0.03 + 24.8 * t, 0.0);
        let fit = fit_heating_rate(&s, Weighting::Unweighted).unwrap();
        assert!((fit.value("slope").unwrap() / 24.8 - 1.0).abs() < 1e-10);
        assert!((fit.value("intercept").unwrap() / 0.03 - 1.0).abs() < 1e-10);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn zero_sigma_forces_unweighted() {
        let s = series(|t| 1.0 + t, 0.0);
        let fit = fit_heating_rate(&s, Weighting::InverseVariance).unwrap();
        assert_eq!(fit.weighting, Weighting::Unweighted);
        let s = series(|t| 1.0 + t, 0.1);
        let fit = fit_heating_rate(&s, Weighting::InverseVariance).unwrap();
        assert_eq!(fit.weighting, Weighting::InverseVariance);
    }

    #[test]
    fn too_few_points() {
        let s = HeatingSeries::new(vec![
            HeatingPoint { delay: 0.0, nbar: 0.0, sigma: 0.0 },
            HeatingPoint { delay: 1.0, nbar: 1.0, sigma: 0.0 },
        ])
        .unwrap();
        assert!(matches!(
            fit_heating_rate(&s, Weighting::Unweighted),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn weighted_covariance_matches_closed_form() {
        // σ_b² = 1/Σ w (x − x̄)² for equal weights w = 1/σ²
        let s = series(|t| 0.5 + 10.0 * t, 0.2);
        let fit = fit_heating_rate(&s, Weighting::InverseVariance).unwrap();
        let xs: Vec<f64> = s.points().iter().map(|p| p.delay).collect();
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let stt: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum::<f64>() / 0.04;
        assert!((fit.sigma("slope").unwrap() - (1.0 / stt).sqrt()).abs() < 1e-12);
        let c = &fit.covariance;
        assert_eq!(c[0][1], c[1][0]);
        assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= 0.0);
    }

    #[test]
    fn power_law_examples() {
        let xs: Vec<f64> = (1..=12).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.4)).collect();
        let fit = fit_power_law(&xs, &ys, None).unwrap();
        assert!((fit.value("exponent").unwrap() + 2.4).abs() < 1e-10);
        assert!((fit.value("amplitude").unwrap() - 3.0).abs() < 1e-10);
        assert!(fit_power_law(&[1.0, 2.0, 0.0], &[1.0, 1.0, 1.0], None).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, -1.0, 1.0], None).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 1.0], None).is_err());
    }

    #[test]
    fn survey_examples() {
        let cd = SurveyRecord::new(
            "111Cd+",
            amu_to_kg(110.904),
            um_to_m(150.0),
            mhz_to_rad_per_s(5.8),
            24.8,
            "this work",
        )
        .unwrap();
        let mut twice = cd.clone();
        twice.heating_rate *= 2.0;
        twice.electrode_distance = um_to_m(100.0);
        let rows = survey_noise_inference(&[cd.clone(), twice]).unwrap();
        // sorted by distance
        assert_eq!(rows[0].electrode_distance, um_to_m(100.0));
        assert!((rows[1].s_e / 2.735_087e-12 - 1.0).abs() < 1e-6);
        assert!((rows[0].s_e / rows[1].s_e - 2.0).abs() < 1e-14);
        assert!(survey_noise_inference(&[]).is_err());
        assert!(SurveyRecord::new("x", 1.0, 1.0, 1.0, 0.0, "").is_err());
    }

    #[test]
    fn floor_ratio() {
        assert_eq!(thermal_floor_ratio(20.0, 1.0).unwrap(), 20.0);
        assert_eq!(thermal_floor_ratio(3.0, 3.0).unwrap(), 1.0);
        assert!(thermal_floor_ratio(3.0, 0.0).is_err());
    }
}
