//! Detector settings, measurement tallies, and no-click probabilities.

use crate::error::{Error, Result};
use crate::state::PhotonDistribution;

/// One configuration of the on/off detector: quantum efficiency `eta` and the
/// mean photon number `nbar` of the thermal field admixed into the signal mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSetting {
    eta: f64,
    nbar: f64,
}

impl DetectorSetting {
    pub fn new(eta: f64, nbar: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                expected: "in (0, 1]",
            });
        }
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::InvalidParameter {
                name: "nbar",
                value: nbar,
                expected: "finite and >= 0",
            });
        }
        Ok(Self { eta, nbar })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    /// Efficiency left after folding the thermal admixture into the detector:
    /// eta / (1 + eta * nbar).
    pub fn effective_eta(&self) -> f64 {
        self.eta / (1.0 + self.eta * self.nbar)
    }
}

/// Tally for one detector setting: how many trials ran and how many produced
/// no click.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    setting_label: String,
    trials: u64,
    no_clicks: u64,
}

impl MeasurementRecord {
    pub fn new(setting_label: impl Into<String>, trials: u64, no_clicks: u64) -> Result<Self> {
        let setting_label = setting_label.into();
        if trials == 0 {
            return Err(Error::InvalidRecord {
                label: setting_label,
                reason: "zero trials".into(),
            });
        }
        if no_clicks > trials {
            return Err(Error::InvalidRecord {
                label: setting_label,
                reason: format!("{no_clicks} no-click outcomes out of {trials} trials"),
            });
        }
        Ok(Self {
            setting_label,
            trials,
            no_clicks,
        })
    }

    pub fn setting_label(&self) -> &str {
        &self.setting_label
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn no_clicks(&self) -> u64 {
        self.no_clicks
    }

    /// Observed no-click frequency S/N.
    pub fn frequency(&self) -> f64 {
        self.no_clicks as f64 / self.trials as f64
    }
}

/// Probability that a detector with efficiency `eta` registers no click on a
/// signal with photon statistics `rho`: Sum_n (1-eta)^n rho_n.
///
/// `eta` may be 0 (a blind detector never clicks).
pub fn no_click_probability(rho: &PhotonDistribution, eta: f64) -> Result<f64> {
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            expected: "in [0, 1]",
        });
    }
    Ok(attenuated_overlap(rho.probs(), eta))
}

/// No-click probability when thermal noise of mean `nbar` occupies the same
/// mode as the signal: the admixture rescales the vacuum weight by
/// 1/(1 + eta*nbar) and the efficiency to eta/(1 + eta*nbar).
pub fn thermal_no_click_probability(rho: &PhotonDistribution, s: &DetectorSetting) -> f64 {
    let scale = 1.0 / (1.0 + s.eta() * s.nbar());
    // accumulated exactly like the corresponding kernel so that probabilities
    // and kernel inner products agree bit for bit
    let ratio = 1.0 - s.eta() * scale;
    let mut r = scale;
    let mut acc = 0.0;
    for p in rho.probs() {
        acc += p * r;
        r *= ratio;
    }
    acc
}

fn attenuated_overlap(probs: &[f64], eta: f64) -> f64 {
    let base = 1.0 - eta;
    let mut r = 1.0;
    let mut acc = 0.0;
    for p in probs {
        acc += p * r;
        r *= base;
    }
    acc
}
