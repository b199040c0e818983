//! Noise-level calibration from runs taken with the signal switched off.

use crate::detector::{DetectorSetting, MeasurementRecord};
use crate::error::{Error, Result};

/// Infer the thermal noise level behind a vacuum-signal record by inverting
/// the vacuum no-click rate p = 1/(1 + eta*nbar): nbar = (1/p - 1)/eta.
///
/// The observed rate must lie in (0, 1]; a rate of exactly 1 calibrates to
/// nbar = 0, while a rate of 0 carries no finite noise level.
pub fn calibrate_nbar(record: &MeasurementRecord, eta: f64) -> Result<f64> {
    let rate = record.frequency();
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Calibration {
            label: record.setting_label().to_string(),
            rate,
        });
    }
    let nbar = (1.0 / rate - 1.0) / eta;
    DetectorSetting::new(eta, nbar)?;
    Ok(nbar)
}

/// Calibrate every record against a common efficiency, yielding one detector
/// setting per record.
pub fn calibrate_settings(records: &[MeasurementRecord], eta: f64) -> Result<Vec<DetectorSetting>> {
    records
        .iter()
        .map(|r| calibrate_nbar(r, eta).map(|nbar| DetectorSetting::new(eta, nbar).unwrap()))
        .collect()
}
