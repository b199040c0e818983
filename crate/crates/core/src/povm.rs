//! No-click kernels for the on/off detector: plain efficiency, thermal
//! dressing, and averages over a randomly varying noise level.

use crate::detector::DetectorSetting;
use crate::error::{Error, Result};
use crate::state::PhotonDistribution;

/// Diagonal kernel of a no-click effect. Entry n is the probability of no
/// click given exactly n signal photons, so both the effect and its click
/// complement (entrywise 1 - r_n) are physical.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    kernel: Vec<f64>,
    label: String,
}

impl PovmElement {
    pub fn new(kernel: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if kernel.is_empty() {
            return Err(Error::InvalidParameter {
                name: "kernel_len",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if let Some(bad) = kernel
            .iter()
            .find(|r| !r.is_finite() || **r < 0.0 || **r > 1.0)
        {
            return Err(Error::InvalidParameter {
                name: "kernel_entry",
                value: *bad,
                expected: "in [0, 1]",
            });
        }
        Ok(Self {
            kernel,
            label: label.into(),
        })
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.kernel.len()
    }

    /// Expected no-click probability for a state: inner product of kernel and
    /// probabilities over the common index range (missing entries count as 0).
    pub fn no_click_probability(&self, rho: &PhotonDistribution) -> f64 {
        dot(&self.kernel, rho.probs())
    }
}

pub(crate) fn dot(kernel: &[f64], probs: &[f64]) -> f64 {
    kernel.iter().zip(probs).map(|(r, p)| r * p).sum()
}

/// Level of the thermal noise admixed into the detected mode: either a fixed
/// mean photon number or a Gaussian spread around it (truncated at 0 wherever
/// it is sampled or averaged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDistribution {
    Fixed { mean: f64 },
    Gaussian { mean: f64, variance: f64 },
}

impl NoiseDistribution {
    pub fn fixed(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(Self::Fixed { mean })
    }

    /// Gaussian spread; `variance` must be strictly positive (a zero-variance
    /// distribution is `fixed`).
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        check_mean(mean)?;
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "variance",
                value: variance,
                expected: "> 0",
            });
        }
        Ok(Self::Gaussian { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Fixed { mean } | Self::Gaussian { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Fixed { .. } => 0.0,
            Self::Gaussian { variance, .. } => *variance,
        }
    }
}

fn check_mean(mean: f64) -> Result<()> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::InvalidParameter {
            name: "mean",
            value: mean,
            expected: "finite and >= 0",
        });
    }
    Ok(())
}

/// Kernel of a noise-free detector with efficiency `eta`: r_n = (1-eta)^n for
/// n = 0..=max_photons.
pub fn efficiency_kernel(eta: f64, max_photons: usize) -> Result<PovmElement> {
    if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            expected: "in (0, 1]",
        });
    }
    let base = 1.0 - eta;
    let mut kernel = Vec::with_capacity(max_photons + 1);
    let mut r = 1.0;
    for _ in 0..=max_photons {
        kernel.push(r);
        r *= base;
    }
    PovmElement::new(kernel, format!("eta={eta}"))
}

/// Kernel of a detector dressed by same-mode thermal noise:
/// r_n = (1/(1+eta*nbar)) * (1 - eta/(1+eta*nbar))^n.
///
/// Its inner product with any state equals
/// [`crate::detector::thermal_no_click_probability`] bit for bit.
pub fn thermal_kernel(s: &DetectorSetting, max_photons: usize) -> PovmElement {
    let mut kernel = Vec::with_capacity(max_photons + 1);
    fill_thermal_kernel(s.eta(), s.nbar(), max_photons, &mut kernel);
    PovmElement {
        kernel,
        label: format!("eta={} nbar={}", s.eta(), s.nbar()),
    }
}

// Shared recurrence; entries are in (0, 1] by construction.
fn fill_thermal_kernel(eta: f64, nbar: f64, max_photons: usize, out: &mut Vec<f64>) {
    let scale = 1.0 / (1.0 + eta * nbar);
    let ratio = 1.0 - eta * scale;
    out.clear();
    let mut r = scale;
    for _ in 0..=max_photons {
        out.push(r);
        r *= ratio;
    }
}

/// Expected kernel when the noise level fluctuates around a Gaussian mean,
/// truncated to nbar >= 0 and renormalized.
///
/// Evaluated by a deterministic midpoint rule over mean +- 6 sigma clipped to
/// [0, inf), with self-normalized weights, so identical inputs always give
/// identical kernels.
pub fn gaussian_averaged_kernel(
    eta: f64,
    noise: &NoiseDistribution,
    max_photons: usize,
    quad_points: usize,
) -> Result<PovmElement> {
    let NoiseDistribution::Gaussian { mean, variance } = *noise else {
        return Err(Error::InvalidParameter {
            name: "noise",
            value: noise.variance(),
            expected: "a gaussian noise distribution",
        });
    };
    if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            expected: "in (0, 1]",
        });
    }
    if quad_points < 16 {
        return Err(Error::InvalidParameter {
            name: "quad_points",
            value: quad_points as f64,
            expected: ">= 16",
        });
    }
    let sigma = variance.sqrt();
    let lo = (mean - 6.0 * sigma).max(0.0);
    let hi = mean + 6.0 * sigma;
    let h = (hi - lo) / quad_points as f64;
    let mut acc = vec![0.0; max_photons + 1];
    let mut weight_sum = 0.0;
    let mut scratch = Vec::with_capacity(max_photons + 1);
    for i in 0..quad_points {
        let x = lo + (i as f64 + 0.5) * h;
        let z = (x - mean) / sigma;
        let w = (-0.5 * z * z).exp();
        fill_thermal_kernel(eta, x, max_photons, &mut scratch);
        for (a, r) in acc.iter_mut().zip(&scratch) {
            *a += w * r;
        }
        weight_sum += w;
    }
    if weight_sum <= 0.0 {
        return Err(Error::Numerical(
            "gaussian averaging collapsed: all quadrature weights vanished".into(),
        ));
    }
    for a in &mut acc {
        *a = (*a / weight_sum).clamp(0.0, 1.0);
    }
    PovmElement::new(
        acc,
        format!("eta={eta} nbar~trunc-normal(mean={mean} var={variance})"),
    )
}

/// Arithmetic mean of thermal kernels over observed noise samples. Averaging
/// happens at the kernel level, not on the noise values.
pub fn empirical_averaged_kernel(
    eta: f64,
    nbar_samples: &[f64],
    max_photons: usize,
) -> Result<PovmElement> {
    if nbar_samples.is_empty() {
        return Err(Error::InvalidParameter {
            name: "nbar_samples",
            value: 0.0,
            expected: "at least one sample",
        });
    }
    if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            expected: "in (0, 1]",
        });
    }
    let mut acc = vec![0.0; max_photons + 1];
    let mut scratch = Vec::with_capacity(max_photons + 1);
    for &nbar in nbar_samples {
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::InvalidParameter {
                name: "nbar_sample",
                value: nbar,
                expected: "finite and >= 0",
            });
        }
        fill_thermal_kernel(eta, nbar, max_photons, &mut scratch);
        for (a, r) in acc.iter_mut().zip(&scratch) {
            *a += r;
        }
    }
    let inv = 1.0 / nbar_samples.len() as f64;
    for a in &mut acc {
        *a = (*a * inv).clamp(0.0, 1.0);
    }
    PovmElement::new(
        acc,
        format!("eta={eta} nbar~empirical[{}]", nbar_samples.len()),
    )
}
