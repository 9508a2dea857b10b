use num_complex::Complex64;
use polariton::harness::power_to_amplitude;
use polariton::model::fixtures::flux5;
use polariton::readout::{
    calibrate_sigma, fidelity_at, fidelity_report, NoiseModel, ReadoutSettings, ShotSimulator, ThresholdChoice,
};
use polariton::units::ghz;
use polariton::{DriveSpec, QubitState};
use proptest::prelude::*;

fn drive(p_dbm: f64) -> DriveSpec {
    let w = ghz(7.508);
    DriveSpec::new(w, power_to_amplitude(p_dbm, w, flux5().kappa_c, -15.0))
}

fn quiet(seed: u64) -> NoiseModel {
    NoiseModel {
        sigma_det: 0.0,
        gamma_down: 0.0,
        gamma_up: 0.0,
        rng_seed: seed,
    }
}

fn calibrated_sigma() -> f64 {
    let sim = ShotSimulator::new(&flux5(), &quiet(1), &ReadoutSettings::default(), &drive(-89.0)).unwrap();
    calibrate_sigma(sim.cluster_separation(), 1e-3).unwrap()
}

#[test]
fn same_seed_same_report() {
    let noise = NoiseModel::from_t1(3.3e-6, calibrated_sigma(), 42);
    let settings = ReadoutSettings::default();
    let a = fidelity_at(&flux5(), &noise, &settings, &drive(-89.0), 300, 0).unwrap();
    let b = fidelity_at(&flux5(), &noise, &settings, &drive(-89.0), 300, 0).unwrap();
    assert_eq!(a, b);
    let other = NoiseModel { rng_seed: 43, ..noise };
    let c = fidelity_at(&flux5(), &other, &settings, &drive(-89.0), 300, 0).unwrap();
    assert_ne!(a.counts, c.counts);
}

#[test]
fn fidelity_falls_with_detection_noise() {
    let sigma = calibrated_sigma();
    let n = 2000;
    let settings = ReadoutSettings::default();
    let f: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|k| {
            let noise = NoiseModel::from_t1(3.3e-6, k * sigma, 7);
            fidelity_at(&flux5(), &noise, &settings, &drive(-89.0), n, 0)
                .unwrap()
                .f_ro
        })
        .collect();
    for w in f.windows(2) {
        // Three standard errors of the difference of two binomial means.
        let se = (w[0] * (1.0 - w[0]) / n as f64 + w[1] * (1.0 - w[1]) / n as f64).sqrt();
        assert!(w[1] <= w[0] + 3.0 * se.max(1.0 / n as f64), "{f:?}");
    }
    assert!(f[4] < f[0]);
}

#[test]
fn confusion_rows_sum_to_shot_count() {
    let noise = NoiseModel::from_t1(3.3e-6, 4.0 * calibrated_sigma(), 5);
    let settings = ReadoutSettings::default();
    let sim = ShotSimulator::new(&flux5(), &noise, &settings, &drive(-89.0)).unwrap();
    let shots = sim.shots(500, 0).unwrap();
    for choice in [ThresholdChoice::Fixed(0.0), ThresholdChoice::Auto] {
        let r = fidelity_report(&shots, &sim.projection, choice).unwrap();
        assert_eq!(r.counts[0][0] + r.counts[0][1], 500);
        assert_eq!(r.counts[1][0] + r.counts[1][1], 500);
        let p_gg = r.counts[0][0] as f64 / 500.0;
        let p_ee = r.counts[1][1] as f64 / 500.0;
        assert_eq!(r.p_e_given_g + p_gg, 1.0);
        assert_eq!(r.p_g_given_e + p_ee, 1.0);
        assert!((r.f_ro - (1.0 - 0.5 * (r.p_e_given_g + r.p_g_given_e))).abs() < 1e-15);
    }
}

#[test]
fn optimised_threshold_dominates_fixed() {
    let noise = NoiseModel::from_t1(3.3e-6, 3.0 * calibrated_sigma(), 11);
    let sim = ShotSimulator::new(&flux5(), &noise, &ReadoutSettings::default(), &drive(-89.0)).unwrap();
    let shots = sim.shots(1000, 0).unwrap();
    let fixed = fidelity_report(&shots, &sim.projection, ThresholdChoice::Fixed(0.0)).unwrap();
    let auto = fidelity_report(&shots, &sim.projection, ThresholdChoice::Auto).unwrap();
    assert!(auto.f_ro >= fixed.f_ro);
}

#[test]
fn ground_state_never_latches_in_the_window() {
    let settings = ReadoutSettings {
        prep_error: 0.0,
        ..ReadoutSettings::default()
    };
    for p in [-92.0, -89.0, -87.0] {
        let noise = NoiseModel::from_t1(3.3e-6, calibrated_sigma(), 3);
        let sim = ShotSimulator::new(&flux5(), &noise, &settings, &drive(p)).unwrap();
        for k in 0..200 {
            let s = sim.shot(QubitState::Ground, k).unwrap();
            assert!(!s.latched && s.bifurcation_time.is_none(), "{p} dBm shot {k}");
        }
    }
}

#[test]
fn heralded_preparation_errors_are_discarded() {
    let settings = ReadoutSettings {
        prep_error: 0.2,
        heralding: true,
        ..ReadoutSettings::default()
    };
    let noise = NoiseModel::from_t1(3.3e-6, calibrated_sigma(), 9);
    let sim = ShotSimulator::new(&flux5(), &noise, &settings, &drive(-89.0)).unwrap();
    let shots = sim.shots(300, 0).unwrap();
    assert!(shots.iter().all(|s| s.discarded == (s.initial != s.prepared)));
    let r = fidelity_report(&shots, &sim.projection, ThresholdChoice::Fixed(0.0)).unwrap();
    let kept = shots.iter().filter(|s| !s.discarded).count() as u64;
    assert_eq!(r.discarded + kept, 600);
    assert_eq!(r.counts.iter().flatten().sum::<u64>(), kept);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Once the readout mode has bifurcated, later relaxation is invisible.
    #[test]
    fn relaxation_after_bifurcation_keeps_the_outcome(delay in 5e-9..400e-9f64, p in -92.0..-86.0f64) {
        let sim = ShotSimulator::new(&flux5(), &quiet(0), &ReadoutSettings::default(), &drive(p)).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let e = sim.run(QubitState::Excited, QubitState::Excited, vec![], zero).unwrap();
        let t_b = e.bifurcation_time.unwrap();
        let t = t_b + delay;
        prop_assume!(t < sim.settings.pulse_length);
        let s = sim.run(QubitState::Excited, QubitState::Excited, vec![t], zero).unwrap();
        prop_assert!(s.latched);
        prop_assert_eq!(s.assigned, QubitState::Excited);
    }
}
