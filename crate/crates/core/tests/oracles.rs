//! Checks against independent closed forms and Monte Carlo replicas.

use std::f64::consts::TAU;

use iontrap::analysis::{fit_heating_rate, survey_noise_inference, SurveyRecord, Weighting};
use iontrap::dynamics::{heat_evolve, HeatingPoint, HeatingSeries};
use iontrap::fock::PopulationDistribution;
use iontrap::physics::{heating_rate_from_noise, IonSpecies};
use iontrap::rng::stream_rng;
use iontrap::spectroscopy::simulate_detection;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Closed form of the equal-rate birth-death process started in |0⟩:
/// geometric with mean s = ṅτ.
fn geometric(s: f64, n: usize) -> f64 {
    (s / (1.0 + s)).powi(n as i32) / (1.0 + s)
}

#[test]
fn heating_from_ground_matches_closed_form() {
    for &s in &[0.1, 0.5, 1.0, 2.5, 5.0] {
        let n_max = (10.0 * s + 20.0) as usize;
        let g = PopulationDistribution::ground(n_max).unwrap();
        let h = heat_evolve(&g, 2.0, s / 2.0).unwrap();
        let top = h.n_max() + 50;
        let tv: f64 = (0..=top).map(|n| (h.get(n) - geometric(s, n)).abs()).sum::<f64>() / 2.0;
        assert!(tv < 1e-6, "s = {s}: tv = {tv}");
        assert!((h.mean() - s).abs() < 0.01 * s);
    }
}

#[test]
fn survey_round_trips_heating_rates() {
    let records: Vec<SurveyRecord> = [(9.012, 5.8, 50.0, 800.0), (110.904, 2.9, 100.0, 12.0), (40.0, 4.0, 700.0, 3.0)]
        .iter()
        .map(|&(amu, mhz, d_um, ndot)| {
            SurveyRecord::new("x", iontrap::units::amu_to_kg(amu), d_um * 1e-6, TAU * mhz * 1e6, ndot, "").unwrap()
        })
        .collect();
    for row in survey_noise_inference(&records).unwrap() {
        let src = records.iter().find(|r| r.electrode_distance == row.electrode_distance).unwrap();
        let mut ion = IonSpecies::cadmium_111();
        ion.mass = src.ion_mass;
        let back = heating_rate_from_noise(row.s_e, &ion, row.trap_frequency).unwrap();
        assert!(((back - src.heating_rate) / src.heating_rate).abs() < 1e-14);
    }
}

#[test]
fn species_do_not_change_inferred_noise() {
    let s_e = 3e-12;
    let w = TAU * 4e6;
    let rec = |amu: f64| {
        let mut ion = IonSpecies::cadmium_111();
        ion.mass = iontrap::units::amu_to_kg(amu);
        let ndot = heating_rate_from_noise(s_e, &ion, w).unwrap();
        SurveyRecord::new(format!("{amu}"), ion.mass, 1e-4, w, ndot, "").unwrap()
    };
    let rows = survey_noise_inference(&[rec(9.0), rec(198.0)]).unwrap();
    assert!((rows[0].s_e / rows[1].s_e - 1.0).abs() < 1e-14);
}

fn mc_line(seed: u64, sigma: f64, weighting: Weighting) -> (f64, f64) {
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rng = stream_rng(seed, 0);
    let pts = (0..=10)
        .map(|k| {
            let delay = k as f64 * 4e-3;
            HeatingPoint { delay, nbar: 0.03 + 24.8 * delay + noise.sample(&mut rng), sigma }
        })
        .collect();
    let fit = fit_heating_rate(&HeatingSeries::new(pts).unwrap(), weighting).unwrap();
    (fit.value("slope").unwrap(), fit.sigma("slope").unwrap())
}

/// Reported slope σ agrees with the spread over 400 replicas within 20%.
#[test]
fn slope_uncertainty_is_calibrated() {
    for weighting in [Weighting::Unweighted, Weighting::InverseVariance] {
        let fits: Vec<(f64, f64)> = (0..400).map(|s| mc_line(s, 0.05, weighting)).collect();
        let mean = fits.iter().map(|f| f.0).sum::<f64>() / fits.len() as f64;
        let spread = (fits.iter().map(|f| (f.0 - mean).powi(2)).sum::<f64>() / (fits.len() - 1) as f64).sqrt();
        let reported = (fits.iter().map(|f| f.1 * f.1).sum::<f64>() / fits.len() as f64).sqrt();
        assert!((reported / spread - 1.0).abs() < 0.2, "{weighting:?}: {reported} vs {spread}");
        assert!((mean - 24.8).abs() < 4.0 * spread / (fits.len() as f64).sqrt());
    }
}

/// Standard error of the detected fraction falls as shots^(−1/2).
#[test]
fn detection_error_scales_with_shots() {
    let rmse = |shots: u64| {
        let mut rng = stream_rng(77, shots);
        let reps = 2000;
        let sq: f64 = (0..reps)
            .map(|_| {
                let p = rng.random_range(0.2..0.8);
                let d = simulate_detection(p, shots, 1.0, &mut rng).unwrap();
                (d.p_est - p).powi(2)
            })
            .sum();
        (sq / reps as f64).sqrt()
    };
    let ratio = rmse(100) / rmse(1600);
    assert!((ratio / 4.0 - 1.0).abs() < 0.1, "{ratio}");
}
