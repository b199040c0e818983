//! Scenario runners: simulate, reconstruct, and write one directory of run
//! artifacts per experiment.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use photonstat::{
    bin_shot_log, empirical_averaged_kernel, error_bound, gaussian_averaged_kernel, io as pio,
    predicted_error_bound, reconstruct, simulate_fixed, simulate_gaussian_noise,
    simulate_random_walk, thermal_kernel, DetectorSetting, MeasurementRecord, NoiseDistribution,
    PhotonDistribution, PovmElement, RandomWalkSpec, ReconstructionConfig, ReconstructionReport,
    ShotLog,
};
use serde::{Deserialize, Serialize};

use crate::config::{BinKernel, ExperimentConfig, Manifest, Scenario};

/// Seed offsets that decorrelate the error-bound sweep simulations from the
/// main run and from each other.
const SWEEP_RANDOM_SEED_BASE: u64 = 10_000;
const SWEEP_FIXED_SEED_BASE: u64 = 20_000;

/// One row of the error-bound sweep: expected and realized bounds for
/// fluctuating and fixed noise at the same trial count, evaluated at the
/// first noise level of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub trials: u64,
    pub predicted_random: f64,
    pub predicted_fixed: f64,
    pub empirical_random: f64,
    pub empirical_fixed: f64,
}

/// Realized drift of a random-walk run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub realized_min: f64,
    pub realized_max: f64,
    pub final_nbar: f64,
    pub total_shots: u64,
    pub bins: usize,
}

/// In-memory result of a run, so callers can inspect values without
/// re-reading the files just written.
#[derive(Debug)]
pub struct RunOutcome {
    pub truth: PhotonDistribution,
    pub records: Vec<(MeasurementRecord, f64)>,
    /// Absent for simulation-only (custom) runs.
    pub report: Option<ReconstructionReport>,
    pub sweep: Vec<SweepRow>,
    pub walk: Option<WalkSummary>,
}

/// Validate the configuration, then simulate, reconstruct, and write every
/// artifact of the scenario into `out_dir`.
///
/// The manifest is written before any computation, so an unwritable output
/// directory fails immediately.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let manifest = Manifest::new(config.clone());
    write_artifact(out_dir, "manifest.json", |w| {
        pio::write_json_pretty(w, &manifest)?;
        Ok(())
    })?;
    match config.scenario {
        Scenario::Fig1 | Scenario::Fig2 | Scenario::Custom => run_grid(config, out_dir),
        Scenario::Fig3 => run_drift(config, out_dir),
    }
}

/// Grid scenarios: one setting per noise level, fixed or gaussian-fluctuating
/// within each setting. `custom` stops after simulation.
fn run_grid(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let truth = config.parse_truth()?;
    let nbars = config.noise_levels();
    let max_photons = config.search_dim - 1;

    let records = if config.noise_variance == 0.0 {
        simulate_fixed(
            &truth,
            config.eta,
            &nbars,
            config.shots_per_setting,
            config.seed,
        )?
    } else {
        simulate_gaussian_noise(
            &truth,
            config.eta,
            &nbars,
            config.noise_variance,
            config.shots_per_setting,
            config.seed,
        )?
    };
    let povms = grid_kernels(config, &nbars, max_photons)?;
    let rows: Vec<(MeasurementRecord, f64)> =
        records.iter().cloned().zip(nbars.iter().copied()).collect();
    write_measurement_artifacts(out_dir, &rows, &povms)?;

    let report = if config.scenario == Scenario::Custom {
        None
    } else {
        Some(reconstruct_and_write(
            config, &povms, &records, &truth, out_dir,
        )?)
    };

    let sweep = if config.scenario == Scenario::Fig2 && !config.sweep_trials.is_empty() {
        let sweep = error_bound_sweep(config, &truth, nbars[0], max_photons)?;
        write_artifact(out_dir, "sweep.csv", |w| {
            writeln!(
                w,
                "trials,predicted_random,predicted_fixed,empirical_random,empirical_fixed"
            )?;
            for row in &sweep {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    row.trials,
                    row.predicted_random,
                    row.predicted_fixed,
                    row.empirical_random,
                    row.empirical_fixed
                )?;
            }
            Ok(())
        })?;
        sweep
    } else {
        Vec::new()
    };

    Ok(RunOutcome {
        truth,
        records: rows,
        report,
        sweep,
        walk: None,
    })
}

/// Drifting-noise scenario: one sequential random-walk run, binned into
/// contiguous windows that each become a setting.
fn run_drift(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let truth = config.parse_truth()?;
    let max_photons = config.search_dim - 1;
    let walk = RandomWalkSpec::new(
        config.noise_start,
        config.walk_step,
        config.walk_p_up,
        config.walk_floor,
    )?;
    let log = simulate_random_walk(&truth, config.eta, &walk, config.total_shots, config.seed)?;
    let rows = bin_shot_log(&log, config.bins)?;
    let records: Vec<MeasurementRecord> = rows.iter().map(|(rec, _)| rec.clone()).collect();
    let povms = drift_kernels(config, &log, &rows, max_photons)?;

    write_measurement_artifacts(out_dir, &rows, &povms)?;
    if config.write_shots {
        write_artifact(out_dir, "shots.csv", |w| {
            pio::write_shot_log_csv(w, &log)?;
            Ok(())
        })?;
    }
    let (realized_min, realized_max) = log.nbar_range().expect("non-empty shot log");
    let walk_summary = WalkSummary {
        realized_min,
        realized_max,
        final_nbar: log
            .records()
            .last()
            .expect("non-empty shot log")
            .nbar_actual,
        total_shots: config.total_shots,
        bins: config.bins,
    };
    write_artifact(out_dir, "walk.json", |w| {
        pio::write_json_pretty(w, &walk_summary)?;
        Ok(())
    })?;

    let report = reconstruct_and_write(config, &povms, &records, &truth, out_dir)?;
    Ok(RunOutcome {
        truth,
        records: rows,
        report: Some(report),
        sweep: Vec::new(),
        walk: Some(walk_summary),
    })
}

/// Kernels matching a grid simulation: exact thermal kernels for fixed noise,
/// quadrature-averaged kernels when the noise fluctuates.
fn grid_kernels(
    config: &ExperimentConfig,
    nbars: &[f64],
    max_photons: usize,
) -> anyhow::Result<Vec<PovmElement>> {
    nbars
        .iter()
        .map(|&nbar| {
            if config.noise_variance == 0.0 {
                Ok(thermal_kernel(
                    &DetectorSetting::new(config.eta, nbar)?,
                    max_photons,
                ))
            } else {
                let noise = NoiseDistribution::gaussian(nbar, config.noise_variance)?;
                Ok(gaussian_averaged_kernel(
                    config.eta,
                    &noise,
                    max_photons,
                    config.quad_points,
                )?)
            }
        })
        .collect()
}

/// Kernels matching the drift bins: averaged over every realized noise level
/// in the bin, or taken at the bin mean.
fn drift_kernels(
    config: &ExperimentConfig,
    log: &ShotLog,
    rows: &[(MeasurementRecord, f64)],
    max_photons: usize,
) -> anyhow::Result<Vec<PovmElement>> {
    match config.bin_kernel {
        BinKernel::Samples => {
            // Same slicing as the binning itself: equal windows, remainder to
            // the last one. Trial counts double-check the alignment.
            let q = log.len() / config.bins;
            (0..config.bins)
                .map(|b| {
                    let start = b * q;
                    let end = if b == config.bins - 1 {
                        log.len()
                    } else {
                        start + q
                    };
                    assert_eq!(rows[b].0.trials(), (end - start) as u64);
                    let samples: Vec<f64> = log.records()[start..end]
                        .iter()
                        .map(|r| r.nbar_actual)
                        .collect();
                    Ok(empirical_averaged_kernel(
                        config.eta,
                        &samples,
                        max_photons,
                    )?)
                })
                .collect()
        }
        BinKernel::Mean => rows
            .iter()
            .map(|(_, mean)| {
                Ok(thermal_kernel(
                    &DetectorSetting::new(config.eta, *mean)?,
                    max_photons,
                ))
            })
            .collect(),
    }
}

/// Error bound versus trial count at one noise level: deterministic expected
/// bounds from the model plus realized bounds from fresh simulations, for the
/// fluctuating-noise and fixed-noise versions of the same setting.
fn error_bound_sweep(
    config: &ExperimentConfig,
    truth: &PhotonDistribution,
    nbar: f64,
    max_photons: usize,
) -> anyhow::Result<Vec<SweepRow>> {
    let fixed_povm = thermal_kernel(&DetectorSetting::new(config.eta, nbar)?, max_photons);
    let random_povm = if config.noise_variance == 0.0 {
        fixed_povm.clone()
    } else {
        gaussian_averaged_kernel(
            config.eta,
            &NoiseDistribution::gaussian(nbar, config.noise_variance)?,
            max_photons,
            config.quad_points,
        )?
    };
    let mut out = Vec::with_capacity(config.sweep_trials.len());
    for (i, &trials) in config.sweep_trials.iter().enumerate() {
        let rand_records = simulate_gaussian_noise(
            truth,
            config.eta,
            &[nbar],
            config.noise_variance,
            trials,
            config.seed + SWEEP_RANDOM_SEED_BASE + i as u64,
        )?;
        let fixed_records = simulate_fixed(
            truth,
            config.eta,
            &[nbar],
            trials,
            config.seed + SWEEP_FIXED_SEED_BASE + i as u64,
        )?;
        out.push(SweepRow {
            trials,
            predicted_random: predicted_error_bound(
                truth,
                std::slice::from_ref(&random_povm),
                &[trials],
            )?,
            predicted_fixed: predicted_error_bound(
                truth,
                std::slice::from_ref(&fixed_povm),
                &[trials],
            )?,
            empirical_random: error_bound(&rand_records)?,
            empirical_fixed: error_bound(&fixed_records)?,
        });
    }
    Ok(out)
}

fn reconstruct_and_write(
    config: &ExperimentConfig,
    povms: &[PovmElement],
    records: &[MeasurementRecord],
    truth: &PhotonDistribution,
    out_dir: &Path,
) -> anyhow::Result<ReconstructionReport> {
    let rconfig = ReconstructionConfig::new(config.iterations, config.search_dim)?
        .with_trace_every(config.trace_every)?;
    let report = reconstruct(povms, records, &rconfig, Some(truth))?;
    write_reconstruction_artifacts(out_dir, &report)?;
    Ok(report)
}

/// records.csv, kernels.csv, and the per-setting summary.
fn write_measurement_artifacts(
    out_dir: &Path,
    rows: &[(MeasurementRecord, f64)],
    povms: &[PovmElement],
) -> anyhow::Result<()> {
    write_artifact(out_dir, "records.csv", |w| {
        pio::write_records_csv(w, rows)?;
        Ok(())
    })?;
    write_artifact(out_dir, "kernels.csv", |w| {
        pio::write_kernels_csv(w, povms)?;
        Ok(())
    })?;
    write_artifact(out_dir, "summary.json", |w| {
        pio::write_json_pretty(w, &pio::settings_summary(rows))?;
        Ok(())
    })
}

/// estimate.json and trace.csv.
pub fn write_reconstruction_artifacts(
    out_dir: &Path,
    report: &ReconstructionReport,
) -> anyhow::Result<()> {
    write_artifact(out_dir, "estimate.json", |w| {
        pio::write_json_pretty(w, &pio::EstimateJson::from_report(report))?;
        Ok(())
    })?;
    write_artifact(out_dir, "trace.csv", |w| {
        pio::write_trace_csv(w, &report.loglik_trace, report.fidelity_trace.as_deref())?;
        Ok(())
    })
}

/// Create `dir/name`, stream it through the writer closure, and flush.
pub fn write_artifact<F>(dir: &Path, name: &str, f: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
    w.flush()
        .with_context(|| format!("cannot flush {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny(scenario: Scenario) -> ExperimentConfig {
        let mut config = ExperimentConfig::defaults(scenario);
        config.noise_count = 4;
        config.shots_per_setting = 200;
        config.total_shots = 2_000;
        config.bins = 4;
        config.iterations = 50;
        config.trace_every = 10;
        config.search_dim = 5;
        config.quad_points = 32;
        config.sweep_trials = vec![100, 400];
        config
    }

    fn read(dir: &Path, name: &str) -> String {
        fs::read_to_string(dir.join(name)).unwrap()
    }

    #[test]
    fn grid_run_writes_the_full_artifact_set() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&tiny(Scenario::Fig1), dir.path()).unwrap();
        for name in [
            "manifest.json",
            "records.csv",
            "kernels.csv",
            "summary.json",
            "estimate.json",
            "trace.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        assert!(!dir.path().join("sweep.csv").exists());
        assert_eq!(outcome.records.len(), 4);
        let report = outcome.report.unwrap();
        assert_eq!(report.iterations_run, 50);
        let sum: f64 = report.estimate.probs().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fluctuating_run_adds_the_sweep_with_deterministic_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&tiny(Scenario::Fig2), dir.path()).unwrap();
        let sweep = outcome.sweep;
        assert_eq!(sweep.len(), 2);
        assert!(read(dir.path(), "sweep.csv").starts_with(
            "trials,predicted_random,predicted_fixed,empirical_random,empirical_fixed"
        ));
        // expected bounds scale exactly as the inverse square root of trials
        let ratio = sweep[0].predicted_random / sweep[1].predicted_random;
        assert_relative_eq!(ratio, 2.0, max_relative = 1e-12);
        let again =
            run_experiment(&tiny(Scenario::Fig2), tempfile::tempdir().unwrap().path()).unwrap();
        assert_eq!(again.sweep, sweep);
    }

    #[test]
    fn drift_run_writes_walk_summary_and_aligned_bins() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny(Scenario::Fig3);
        config.write_shots = true;
        let outcome = run_experiment(&config, dir.path()).unwrap();
        assert!(dir.path().join("walk.json").exists());
        assert!(read(dir.path(), "shots.csv").starts_with("shot_index,nbar_actual,clicked"));
        let walk = outcome.walk.unwrap();
        assert!(walk.realized_min >= config.walk_floor);
        assert!(walk.realized_max >= walk.realized_min);
        assert_eq!(walk.total_shots, 2_000);
        let trials: u64 = outcome.records.iter().map(|(r, _)| r.trials()).sum();
        assert_eq!(trials, 2_000);
    }

    #[test]
    fn drift_kernels_at_bin_means_stay_close_to_sample_averaged_ones() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny(Scenario::Fig3);
        config.bin_kernel = BinKernel::Mean;
        // the walk drifts by at most step * shots, so both kernel styles see
        // nearly the same noise level within a bin
        let outcome = run_experiment(&config, dir.path()).unwrap();
        let report = outcome.report.unwrap();
        let sum: f64 = report.estimate.probs().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn custom_run_stops_after_simulation() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&tiny(Scenario::Custom), dir.path()).unwrap();
        assert!(outcome.report.is_none());
        assert!(dir.path().join("records.csv").exists());
        assert!(dir.path().join("kernels.csv").exists());
        assert!(!dir.path().join("estimate.json").exists());
        assert!(!dir.path().join("trace.csv").exists());
    }

    #[test]
    fn manifest_is_written_before_heavy_work_and_replays_identically() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny(Scenario::Fig1);
        run_experiment(&config, dir.path()).unwrap();
        let manifest: Manifest = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
        assert_eq!(manifest.config, config);

        let replay_dir = tempfile::tempdir().unwrap();
        run_experiment(&manifest.config, replay_dir.path()).unwrap();
        for name in [
            "manifest.json",
            "records.csv",
            "kernels.csv",
            "estimate.json",
        ] {
            assert_eq!(
                read(dir.path(), name),
                read(replay_dir.path(), name),
                "{name} differs between run and replay"
            );
        }
    }
}
