//! Statistical checks of the simulators at scale: empirical frequencies
//! against model probabilities, drift statistics of the walking noise level,
//! and calibration on simulated data.

use photonstat::{
    bin_shot_log, calibrate_settings, gaussian_averaged_kernel, simulate_fixed,
    simulate_gaussian_noise, simulate_random_walk, thermal_no_click_probability, DetectorSetting,
    NoiseDistribution, PhotonDistribution, RandomWalkSpec,
};
use photonstat_testkit::mc_averaged_kernel;

fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn fixed_noise_frequencies_track_model_probabilities_across_a_grid() {
    let rho = PhotonDistribution::fock(2, 13).unwrap();
    let nbars: Vec<f64> = (0..30).map(|j| 0.1 + j as f64 * (0.85 / 29.0)).collect();
    let n = 100_000u64;
    let records = simulate_fixed(&rho, 0.8, &nbars, n, 2024).unwrap();
    for (record, &nbar) in records.iter().zip(&nbars) {
        let setting = DetectorSetting::new(0.8, nbar).unwrap();
        let p = thermal_no_click_probability(&rho, &setting);
        let dev = (record.frequency() - p).abs();
        assert!(
            dev < 5.0 * binomial_sigma(p, n),
            "nbar={nbar}: frequency {} vs model {p}",
            record.frequency()
        );
    }
}

#[test]
fn gaussian_noise_frequency_matches_both_averaging_routes() {
    let rho = PhotonDistribution::fock(0, 1).unwrap();
    let n = 1_000_000u64;
    let records = simulate_gaussian_noise(&rho, 0.8, &[0.1], 0.1, n, 314).unwrap();
    let f = records[0].frequency();

    let noise = NoiseDistribution::gaussian(0.1, 0.1).unwrap();
    let quad = gaussian_averaged_kernel(0.8, &noise, 0, 513)
        .unwrap()
        .kernel()[0];
    let mc = mc_averaged_kernel(0.8, 0.1, 0.1, 0, 10_000_000, 5150)[0];

    assert!(
        (f - quad).abs() < 4.0 * binomial_sigma(quad, n),
        "{f} vs {quad}"
    );
    assert!((f - mc).abs() < 4.0 * binomial_sigma(mc, n), "{f} vs {mc}");
}

#[test]
fn walk_drift_and_spread_follow_the_random_walk_statistics() {
    let rho = PhotonDistribution::fock(2, 13).unwrap();
    let (start, step, p_up) = (0.1, 5e-4, 0.51);
    let shots = 900_000u64;
    let walk = RandomWalkSpec::new(start, step, p_up, 0.1).unwrap();
    let log = simulate_random_walk(&rho, 0.8, &walk, shots, 99).unwrap();
    assert_eq!(log.len(), shots as usize);

    let expected = start + shots as f64 * (2.0 * p_up - 1.0) * step;
    let sigma = step * (4.0 * p_up * (1.0 - p_up) * shots as f64).sqrt();
    let last = log.records().last().unwrap().nbar_actual;
    assert!(
        (last - expected).abs() < 4.0 * sigma,
        "final level {last}, expected {expected} +- {sigma}"
    );

    let (lo, hi) = log.nbar_range().unwrap();
    assert!(lo >= walk.floor());
    assert!(hi <= expected + 5.0 * sigma);

    let bins = bin_shot_log(&log, 30).unwrap();
    assert_eq!(bins.iter().map(|(r, _)| r.trials()).sum::<u64>(), shots);
    let mut last_mean = f64::NEG_INFINITY;
    let mut increases = 0;
    for (_, mean) in &bins {
        if *mean > last_mean {
            increases += 1;
        }
        last_mean = *mean;
    }
    // Upward drift dominates bin-to-bin fluctuations at this scale.
    assert!(
        increases >= 25,
        "only {increases} of 30 bin means increased"
    );
}

#[test]
fn calibrating_simulated_vacuum_runs_recovers_the_noise_levels() {
    let vacuum = PhotonDistribution::fock(0, 1).unwrap();
    let eta = 0.8;
    let nbars = [0.1, 0.5, 0.95];
    let n = 1_000_000u64;
    let records = simulate_fixed(&vacuum, eta, &nbars, n, 606).unwrap();
    let settings = calibrate_settings(&records, eta).unwrap();
    for (setting, &nbar) in settings.iter().zip(&nbars) {
        let p = 1.0 / (1.0 + eta * nbar);
        // Propagate the binomial deviation through the inversion slope 1/(eta p^2).
        let sigma_nbar = binomial_sigma(p, n) / (eta * p * p);
        assert!(
            (setting.nbar() - nbar).abs() < 4.0 * sigma_nbar,
            "calibrated {} vs true {nbar}",
            setting.nbar()
        );
    }
}
