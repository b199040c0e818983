//! File-driven operations: reconstruct from records and kernels on disk,
//! calibrate kernels from vacuum-input runs, and summarize a run directory.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context};
use photonstat::{
    calibrate_settings, io as pio, reconstruct, thermal_kernel, DetectorSetting, MeasurementRecord,
    PhotonDistribution, PovmElement, ReconstructionConfig, ReconstructionReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{parse_state, Manifest};
use crate::experiments::{write_artifact, write_reconstruction_artifacts, WalkSummary};

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| {
        format!("cannot open {}", path.display())
    })?))
}

pub fn read_records(path: &Path) -> anyhow::Result<Vec<(MeasurementRecord, f64)>> {
    pio::read_records_csv(open(path)?).with_context(|| format!("invalid {}", path.display()))
}

pub fn read_kernels(path: &Path) -> anyhow::Result<Vec<PovmElement>> {
    pio::read_kernels_csv(open(path)?).with_context(|| format!("invalid {}", path.display()))
}

/// Reconstruct from records.csv and kernels.csv, writing estimate.json and
/// trace.csv into `out_dir`. Rows are matched to kernels by position.
pub fn run_reconstruct(
    records_path: &Path,
    kernels_path: &Path,
    iterations: u64,
    search_dim: usize,
    trace_every: u64,
    truth: Option<&str>,
    out_dir: &Path,
) -> anyhow::Result<ReconstructionReport> {
    let rows = read_records(records_path)?;
    let records: Vec<MeasurementRecord> = rows.into_iter().map(|(rec, _)| rec).collect();
    let povms = read_kernels(kernels_path)?;
    let truth = truth
        .map(|spec| parse_state(spec, search_dim))
        .transpose()?;
    let config =
        ReconstructionConfig::new(iterations, search_dim)?.with_trace_every(trace_every)?;
    let report = reconstruct(&povms, &records, &config, truth.as_ref())?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    write_reconstruction_artifacts(out_dir, &report)?;
    Ok(report)
}

/// One calibrated setting: the observed vacuum no-click rate and the noise
/// level it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub label: String,
    pub trials: u64,
    pub frequency: f64,
    pub nbar: f64,
}

/// Infer each setting's noise level from vacuum-input records, then write
/// kernels.csv (thermal kernels at the inferred levels, entries 0..dim-1)
/// and calibration.json into `out_dir`.
pub fn run_calibrate(
    records_path: &Path,
    eta: f64,
    search_dim: usize,
    out_dir: &Path,
) -> anyhow::Result<Vec<CalibrationRow>> {
    if search_dim < 2 {
        bail!("dim must be at least 2, got {search_dim}");
    }
    let rows = read_records(records_path)?;
    let records: Vec<MeasurementRecord> = rows.into_iter().map(|(rec, _)| rec).collect();
    let settings: Vec<DetectorSetting> = calibrate_settings(&records, eta)?;
    let povms: Vec<PovmElement> = settings
        .iter()
        .map(|s| thermal_kernel(s, search_dim - 1))
        .collect();
    let calibration: Vec<CalibrationRow> = records
        .iter()
        .zip(&settings)
        .map(|(rec, s)| CalibrationRow {
            label: rec.setting_label().to_string(),
            trials: rec.trials(),
            frequency: rec.frequency(),
            nbar: s.nbar(),
        })
        .collect();
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    write_artifact(out_dir, "kernels.csv", |w| {
        pio::write_kernels_csv(w, &povms)?;
        Ok(())
    })?;
    write_artifact(out_dir, "calibration.json", |w| {
        pio::write_json_pretty(w, &calibration)?;
        Ok(())
    })?;
    Ok(calibration)
}

/// Human-readable summary of a run directory, as printed by `report`.
pub fn render_report(dir: &Path) -> anyhow::Result<String> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(
        &fs::read_to_string(&manifest_path)
            .with_context(|| format!("cannot read {}", manifest_path.display()))?,
    )
    .with_context(|| format!("invalid {}", manifest_path.display()))?;
    let c = &manifest.config;

    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!(
        "run {}: scenario {:?}, code version {}",
        dir.display(),
        c.scenario,
        manifest.code_version
    ));
    line(format!(
        "  truth {} | eta {} | seed {}",
        c.truth, c.eta, c.seed
    ));

    let summary_path = dir.join("summary.json");
    if summary_path.exists() {
        let settings: Vec<pio::SettingSummary> =
            serde_json::from_str(&fs::read_to_string(&summary_path)?)
                .with_context(|| format!("invalid {}", summary_path.display()))?;
        let trials: u64 = settings.iter().map(|s| s.trials).sum();
        line(format!(
            "  {} settings, {} trials total",
            settings.len(),
            trials
        ));
    }

    let walk_path = dir.join("walk.json");
    if walk_path.exists() {
        let walk: WalkSummary = serde_json::from_str(&fs::read_to_string(&walk_path)?)
            .with_context(|| format!("invalid {}", walk_path.display()))?;
        line(format!(
            "  noise drifted over [{:.4}, {:.4}], ending at {:.4}",
            walk.realized_min, walk.realized_max, walk.final_nbar
        ));
    }

    let estimate_path = dir.join("estimate.json");
    if estimate_path.exists() {
        let est: pio::EstimateJson = serde_json::from_str(&fs::read_to_string(&estimate_path)?)
            .with_context(|| format!("invalid {}", estimate_path.display()))?;
        line(format!(
            "  {} iterations, final log-likelihood {:.6}",
            est.iterations_run, est.final_loglik
        ));
        match est.final_fidelity {
            Some(f) => line(format!(
                "  fidelity to truth {:.4}, error bound {:.6}",
                f, est.error_bound
            )),
            None => line(format!("  error bound {:.6}", est.error_bound)),
        }
        if est.clamp_events > 0 {
            line(format!(
                "  {} probability clamps during iteration",
                est.clamp_events
            ));
        }
        let estimate = PhotonDistribution::from_probs(est.probs.clone())
            .context("estimate.json holds an invalid distribution")?;
        line(format!(
            "  estimated mean photon number {:.4}",
            estimate.mean_photons()
        ));
        line("  n  probability".to_string());
        for (n, p) in est.probs.iter().enumerate() {
            line(format!("  {n:<2} {p:.6}"));
        }
    } else {
        line("  simulation only; no reconstruction artifacts".to_string());
    }
    Ok(out)
}
