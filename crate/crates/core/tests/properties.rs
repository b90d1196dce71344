use std::f64::consts::TAU;

use iontrap::dynamics::{heat_evolve, raman_cooling_cycle, RepumpModel};
use iontrap::fock::{
    thermal_auto, CouplingMode, PopulationDistribution, SidebandDrive, SidebandOrder,
};
use iontrap::physics::{
    cooling_threshold, evaluate_noise, heating_rate_from_noise, lamb_dicke,
    noise_from_heating_rate, recoil_frequency, IonSpecies, NoiseModel, RamanGeometry,
};
use iontrap::spectroscopy::{
    measure_nbar, sideband_strength, synthesize_spectrum, ProbeConfig, Shots, ThermometryMethod,
};
use iontrap::analysis::fit_power_law;
use iontrap::rng::stream_rng;
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = CouplingMode> {
    prop_oneof![Just(CouplingMode::LambDicke), Just(CouplingMode::Exact)]
}

/// Arbitrary normalized populations over 2..=40 levels.
fn distribution() -> impl Strategy<Value = PopulationDistribution> {
    prop::collection::vec(0.0f64..1.0, 2..40).prop_filter_map("empty", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-6)
            .then(|| PopulationDistribution::from_probabilities(w.iter().map(|x| x / total).collect()).ok())
            .flatten()
    })
}

proptest! {
    #[test]
    fn lamb_dicke_scales_as_inverse_root_frequency(mhz in 0.1f64..50.0, dk_scale in 0.1f64..3.0) {
        let ion = IonSpecies::cadmium_111();
        let g = RamanGeometry::new(dk_scale * ion.wavenumber(), 1.0).unwrap();
        let w = TAU * mhz * 1e6;
        let a = lamb_dicke(&g, &ion, w).unwrap();
        let b = lamb_dicke(&g, &ion, 4.0 * w).unwrap();
        prop_assert!(((2.0 * b - a) / a).abs() < 1e-14);
        prop_assert!(lamb_dicke(&g, &ion, 1.01 * w).unwrap() < a);
    }

    #[test]
    fn heating_noise_round_trip(s_e in 1e-16f64..1e-8, mhz in 0.1f64..20.0, amu in 1.0f64..250.0) {
        let mut ion = IonSpecies::cadmium_111();
        ion.mass = iontrap::units::amu_to_kg(amu);
        let w = TAU * mhz * 1e6;
        let ndot = heating_rate_from_noise(s_e, &ion, w).unwrap();
        let back = noise_from_heating_rate(ndot, &ion, w).unwrap();
        prop_assert!(((back - s_e) / s_e).abs() < 1e-12);
    }

    #[test]
    fn threshold_squared_is_exact(dk_scale in 0.0f64..3.0, gamma_mhz in 1.0f64..100.0) {
        let mut ion = IonSpecies::cadmium_111();
        ion.excited_linewidth = TAU * gamma_mhz * 1e6;
        let g = RamanGeometry::new(dk_scale * ion.wavenumber(), 1.0).unwrap();
        let th = cooling_threshold(&ion, &g);
        let expect = ion.excited_linewidth * recoil_frequency(&g, &ion) / 2.0;
        prop_assert!((th * th - expect).abs() <= 4.0 * f64::EPSILON * expect);
    }

    #[test]
    fn noise_power_law_is_multiplicative(w1 in 0.1f64..10.0, w2 in 0.1f64..10.0, alpha in -3.0f64..3.0) {
        let m = NoiseModel::new(2.0, 1.0, 1e-4, alpha, 4.0).unwrap();
        let lhs = evaluate_noise(&m, w1 * w2 / m.omega_ref, m.d_ref).unwrap() * m.s0;
        let rhs = evaluate_noise(&m, w1, m.d_ref).unwrap() * evaluate_noise(&m, w2, m.d_ref).unwrap();
        prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
    }

    #[test]
    fn thermal_is_normalized_and_round_trips(nbar in 0.0f64..20.0) {
        let d = thermal_auto(nbar).unwrap();
        prop_assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(d.probabilities().iter().all(|&p| p >= 0.0));
        prop_assert!((d.mean() - nbar).abs() <= 1e-6 * nbar.max(1e-3));
    }

    #[test]
    fn coupling_is_symmetric(n in 0usize..200, eta in 0.0f64..0.6, m in mode()) {
        let d = SidebandDrive::new(eta, 1.3, m).unwrap();
        prop_assert_eq!(d.coupling(n, SidebandOrder::LOWER), d.coupling(n + 1, SidebandOrder::UPPER));
        let two_up = SidebandOrder::new(2).unwrap();
        let two_down = SidebandOrder::new(-2).unwrap();
        prop_assert_eq!(d.coupling(n, two_down), d.coupling(n + 2, two_up));
    }

    /// Σ P_n sin²(Ω_{n→n−1}t/2) = n̄/(1+n̄)·Σ P_n sin²(Ω_{n→n+1}t/2) at any drive.
    #[test]
    fn thermal_sideband_ratio_identity(
        nbar in 0.01f64..15.0,
        eta in 0.01f64..0.4,
        omega0 in 1e3f64..1e6,
        t in 1e-7f64..1e-3,
        m in mode(),
    ) {
        let dist = thermal_auto(nbar).unwrap();
        let d = SidebandDrive::new(eta, omega0, m).unwrap();
        let u = sideband_strength(&dist, &d, SidebandOrder::UPPER, t);
        let l = sideband_strength(&dist, &d, SidebandOrder::LOWER, t);
        prop_assume!(l > 1e-12);
        prop_assert!((u / l / (nbar / (1.0 + nbar)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ideal_cooling_never_heats(dist in distribution(), eta in 0.01f64..0.4, t in 1e-6f64..1e-3, m in mode()) {
        let d = SidebandDrive::new(eta, TAU * 1e5, m).unwrap();
        let out = raman_cooling_cycle(&dist, &d, t, RepumpModel::Ideal).unwrap();
        prop_assert!(out.mean() <= dist.mean() + 1e-12);
        prop_assert!((out.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let g = PopulationDistribution::ground(dist.n_max()).unwrap();
        prop_assert_eq!(raman_cooling_cycle(&g, &d, t, RepumpModel::Ideal).unwrap(), g);
    }

    #[test]
    fn spectrum_probabilities_are_bounded(nbar in 0.0f64..8.0, t_us in 0.0f64..500.0, shots in prop_oneof![Just(Shots::Infinite), (1u64..2000).prop_map(Shots::Finite)]) {
        let dist = thermal_auto(nbar).unwrap();
        let d = SidebandDrive::lamb_dicke(0.12, TAU * 1e5).unwrap();
        let wx = TAU * 5.8e6;
        let grid = (-24..=24).map(|k| k as f64 * wx / 12.0).collect();
        let probe = ProbeConfig::new(t_us * 1e-6, shots, 0.997).unwrap()
            .with_grid(grid)
            .with_orders(vec![SidebandOrder::LOWER, SidebandOrder::CARRIER, SidebandOrder::UPPER]);
        let s = synthesize_spectrum(&dist, &d, wx, &probe, 3).unwrap();
        prop_assert!(s.points.iter().all(|p| (0.0..=1.0).contains(&p.p_bright)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heating_conserves_norm_and_grows_linearly(nbar0 in 0.0f64..3.0, s in 0.0f64..3.0) {
        let start = thermal_auto(nbar0).unwrap();
        let h = heat_evolve(&start, 1.0, s).unwrap();
        prop_assert!((h.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let expect = nbar0 + s;
        prop_assert!((h.mean() - expect).abs() < 0.01 * expect.max(1e-9));
    }

    #[test]
    fn heating_composes(dist in distribution(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let two_step = heat_evolve(&heat_evolve(&dist, 1.0, a).unwrap(), 1.0, b).unwrap();
        let one_step = heat_evolve(&dist, 1.0, a + b).unwrap();
        let n = two_step.n_max().max(one_step.n_max());
        let tv: f64 = (0..=n).map(|k| (two_step.get(k) - one_step.get(k)).abs()).sum::<f64>() / 2.0;
        prop_assert!(tv < 1e-7, "tv = {tv}");
    }

    #[test]
    fn thermometry_round_trip(nbar in 0.01f64..20.0, eta in 0.02f64..0.3, t_us in 5.0f64..400.0) {
        let dist = thermal_auto(nbar).unwrap();
        let d = SidebandDrive::lamb_dicke(eta, TAU * 1e5).unwrap();
        let probe = ProbeConfig::new(t_us * 1e-6, Shots::Infinite, 0.997).unwrap();
        let est = measure_nbar(&dist, &d, &probe, ThermometryMethod::PeakRatio, &mut stream_rng(0, 0)).unwrap();
        prop_assert!(((est.nbar - nbar) / nbar).abs() < 1e-4);
    }

    #[test]
    fn power_law_exponent_is_scale_invariant(k in -4.0f64..4.0, c in 1e-3f64..1e3) {
        let xs: Vec<f64> = (1..=8).map(|i| i as f64 * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x.powf(k) * (1.0 + 0.05 * (x * 7.3).sin())).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let a = fit_power_law(&xs, &ys, None).unwrap();
        let b = fit_power_law(&scaled, &ys, None).unwrap();
        prop_assert!((a.value("exponent").unwrap() - b.value("exponent").unwrap()).abs() < 1e-10);
    }
}
